#include "darkgram/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "bert.hpp"
#include "darkgram/serialize.hpp"
#include "darkgram/text.hpp"

namespace darkgram {

TokenCounts featurize(std::string_view text, const std::vector<std::string>& attachment_names) {
  TokenCounts counts;
  auto tokens = word_tokens(text);
  for (auto& t : tokens) ++counts[t];
  if (tokens.size() < 3) {
    for (const auto& name : attachment_names) {
      for (auto& t : word_tokens(name)) ++counts[t];
    }
  }
  return counts;
}

LabeledCorpus LabeledCorpus::subset(const std::vector<std::size_t>& indices) const {
  LabeledCorpus out;
  out.items.reserve(indices.size());
  for (auto i : indices) out.items.push_back(items.at(i));
  return out;
}

namespace {

// Fisher-Yates over an explicitly specified engine, so results do not depend
// on the standard library's distribution implementations.
template <class T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

bool item_less(const LabeledItem& a, const LabeledItem& b) {
  if (a.label != b.label) return a.label < b.label;
  if (a.text != b.text) return a.text < b.text;
  return a.filenames < b.filenames;
}

double sigmoid(double m) {
  if (m >= 0) return 1.0 / (1.0 + std::exp(-m));
  double e = std::exp(m);
  return e / (1.0 + e);
}

}  // namespace

CorpusSplit stratified_split(const LabeledCorpus& corpus, double train_ratio, std::uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw InputError("train_ratio must be in (0,1)");
  std::array<std::vector<std::size_t>, kLabelCount> by_label;
  for (std::size_t i = 0; i < corpus.items.size(); ++i) {
    by_label[corpus.items[i].label.index()].push_back(i);
  }
  CorpusSplit split;
  for (std::size_t l = 0; l < kLabelCount; ++l) {
    auto& idx = by_label[l];
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const auto& ia = corpus.items[a];
      const auto& ib = corpus.items[b];
      if (item_less(ia, ib)) return true;
      if (item_less(ib, ia)) return false;
      return a < b;
    });
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + l);
    seeded_shuffle(idx, rng);
    auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(idx.size()) * train_ratio));
    split.train.insert(split.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.insert(split.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

LabeledCorpus read_labeled_corpus(const std::filesystem::path& path) {
  LabeledCorpus corpus;
  for_each_jsonl(path, [&](std::size_t, const json& j) {
    LabeledItem item;
    item.text = j.value("text", "");
    item.filenames = j.value("filenames", std::vector<std::string>{});
    const auto name = j.at("label").get<std::string>();
    auto label = label_from_string(name);
    if (!label) throw InputError("unknown label '" + name + "'");
    item.label = *label;
    corpus.items.push_back(std::move(item));
  });
  return corpus;
}

void write_labeled_corpus(const std::filesystem::path& path, const LabeledCorpus& corpus) {
  std::string out;
  for (const auto& item : corpus.items) {
    json j{{"text", item.text}, {"label", to_string(item.label)}};
    if (!item.filenames.empty()) j["filenames"] = item.filenames;
    out += dump_line(j) + "\n";
  }
  write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// Baseline

BaselineModel::SparseVector BaselineModel::vectorize(const TokenCounts& counts) const {
  SparseVector x;
  double norm2 = 0.0;
  for (const auto& [term, tf] : counts) {
    auto it = vocab_.find(term);
    if (it == vocab_.end()) continue;
    double v = 1.0 + std::log(static_cast<double>(tf));
    x.emplace_back(it->second, v);
    norm2 += v * v;
  }
  if (norm2 > 0) {
    double inv = 1.0 / std::sqrt(norm2);
    for (auto& [i, v] : x) v *= inv;
  }
  return x;
}

double BaselineModel::margin(const std::vector<double>& w, const SparseVector& x) {
  double m = w.back();
  for (const auto& [i, v] : x) m += w[i] * v;
  return m;
}

StageScores BaselineModel::score(std::string_view text,
                                 const std::vector<std::string>& attachment_names) const {
  auto x = vectorize(featurize(text, attachment_names));
  StageScores s;
  s.p_ca = sigmoid(margin(gate_, x));
  std::array<double, 5> m{};
  for (std::size_t k = 0; k < 5; ++k) m[k] = margin(categories_[k], x);
  const double top = *std::max_element(m.begin(), m.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < 5; ++k) {
    s.category[k] = std::exp(m[k] - top);
    sum += s.category[k];
  }
  for (auto& p : s.category) p /= sum;
  return s;
}

BaselineModel train_baseline(const LabeledCorpus& corpus, std::uint64_t seed,
                             const BaselineOptions& options) {
  std::vector<LabeledItem> items;
  if (corpus.split) {
    for (auto i : corpus.split->train) items.push_back(corpus.items.at(i));
  } else {
    items = corpus.items;
  }

  std::array<std::size_t, kLabelCount> per_label{};
  for (const auto& it : items) ++per_label[it.label.index()];
  for (std::size_t l = 0; l < kLabelCount; ++l) {
    if (per_label[l] < 2) {
      throw InputError("label " + std::string(to_string(label_from_index(l))) + " has " +
                       std::to_string(per_label[l]) + " training examples; at least 2 required");
    }
  }

  // Canonical order first so that the input order of the corpus is irrelevant.
  std::stable_sort(items.begin(), items.end(), item_less);

  BaselineModel model;
  std::vector<TokenCounts> features;
  features.reserve(items.size());
  std::set<std::string> terms;
  for (const auto& it : items) {
    features.push_back(featurize(it.text, it.filenames));
    for (const auto& [t, _] : features.back()) terms.insert(t);
  }
  std::size_t idx = 0;
  for (const auto& t : terms) model.vocab_[t] = idx++;

  std::vector<BaselineModel::SparseVector> xs;
  xs.reserve(items.size());
  for (const auto& f : features) xs.push_back(model.vectorize(f));

  const std::size_t dim = model.vocab_.size() + 1;
  model.gate_.assign(dim, 0.0);
  for (auto& w : model.categories_) w.assign(dim, 0.0);

  auto sgd_step = [](std::vector<double>& w, const BaselineModel::SparseVector& x, double y, double lr) {
    double g = sigmoid(BaselineModel::margin(w, x)) - y;
    for (const auto& [i, v] : x) w[i] -= lr * g * v;
    w.back() -= lr * g;
  };

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    seeded_shuffle(order, rng);
    const double lr = options.learning_rate / (1.0 + 0.1 * epoch);
    for (auto i : order) {
      const auto& label = items[i].label;
      sgd_step(model.gate_, xs[i], label.is_benign() ? 0.0 : 1.0, lr);
      if (label.is_benign()) continue;
      for (std::size_t k = 0; k < 5; ++k) {
        sgd_step(model.categories_[k], xs[i],
                 static_cast<std::size_t>(*label.category) == k ? 1.0 : 0.0, lr);
      }
    }
  }
  return model;
}

namespace {

json artifact_manifest(std::string_view backend_id) {
  return json{{"format_version", kArtifactFormatVersion},
              {"backend_id", backend_id},
              {"labels", canonical_label_names()}};
}

// Shared validation for every artifact directory. Returns the manifest.
json validate_artifact(const std::filesystem::path& dir) {
  for (const char* name : {"manifest.json", "tokenizer.json", "model.bin"}) {
    if (!std::filesystem::exists(dir / name)) {
      throw ArtifactMissingError("model artifact " + dir.string() + " is missing " + name);
    }
  }
  json manifest;
  try {
    manifest = json::parse(read_text_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw InputError("manifest.json: " + std::string(e.what()));
  }
  const int version = manifest.value("format_version", -1);
  if (version != kArtifactFormatVersion) {
    throw FormatVersionError("manifest.json format_version " + std::to_string(version) +
                             " unsupported (expected " + std::to_string(kArtifactFormatVersion) + ")");
  }
  const auto labels = manifest.value("labels", std::vector<std::string>{});
  if (labels != canonical_label_names()) {
    throw LabelOrderError("manifest.json labels must be exactly [Benign, CredentialCompromise, "
                          "PiratedSoftware, BlackhatResources, PiratedMedia, "
                          "SocialMediaManipulation] in that order");
  }
  if (!manifest.contains("backend_id")) throw InputError("manifest.json lacks backend_id");
  return manifest;
}

}  // namespace

void BaselineModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "manifest.json", artifact_manifest(kBackendId).dump(2) + "\n");
  std::vector<std::string> terms(vocab_.size());
  for (const auto& [t, i] : vocab_) terms[i] = t;
  write_text_file(dir / "tokenizer.json",
                  dump_line(json{{"type", "word-lower"}, {"vocab", terms}}) + "\n");
  json weights{{"gate", gate_}, {"categories", categories_}};
  write_text_file(dir / "model.bin", dump_line(weights) + "\n");
}

BaselineModel BaselineModel::load(const std::filesystem::path& dir) {
  auto manifest = validate_artifact(dir);
  if (manifest["backend_id"] != kBackendId) {
    throw InputError("artifact backend_id is not " + std::string(kBackendId));
  }
  BaselineModel m;
  try {
    auto tok = json::parse(read_text_file(dir / "tokenizer.json"));
    auto terms = tok.at("vocab").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < terms.size(); ++i) m.vocab_[terms[i]] = i;
    auto weights = json::parse(read_text_file(dir / "model.bin"));
    m.gate_ = weights.at("gate").get<std::vector<double>>();
    m.categories_ = weights.at("categories").get<std::array<std::vector<double>, 5>>();
  } catch (const json::exception& e) {
    throw InputError("baseline artifact " + dir.string() + ": " + e.what());
  }
  const std::size_t dim = m.vocab_.size() + 1;
  bool ok = m.gate_.size() == dim;
  for (const auto& w : m.categories_) ok = ok && w.size() == dim;
  if (!ok) throw InputError("baseline artifact " + dir.string() + ": weight dimensions do not match vocabulary");
  return m;
}

std::unique_ptr<ClassifierBackend> load_external_backend(const std::filesystem::path& dir) {
  auto manifest = validate_artifact(dir);
  return detail::load_bert_encoder(dir, manifest);
}

std::unique_ptr<ClassifierBackend> load_backend(const std::filesystem::path& dir) {
  auto manifest = validate_artifact(dir);
  if (manifest["backend_id"] == BaselineModel::kBackendId) {
    return std::make_unique<BaselineModel>(BaselineModel::load(dir));
  }
  return detail::load_bert_encoder(dir, manifest);
}

// ---------------------------------------------------------------------------
// Classification

ClassificationResult classify_text(const ClassifierBackend& backend, std::string_view text,
                                   const std::vector<std::string>& attachment_names,
                                   double gate_threshold) {
  ClassificationResult r;
  r.backend_id = backend.backend_id();
  if (featurize(text, attachment_names).empty()) {
    r.confidence = {{std::string(kGateBenignKey), 1.0}, {std::string(kGateCaKey), 0.0}};
    return r;
  }
  const auto s = backend.score(text, attachment_names);
  r.is_ca = s.p_ca > gate_threshold;
  r.confidence[std::string(kGateBenignKey)] = 1.0 - s.p_ca;
  r.confidence[std::string(kGateCaKey)] = s.p_ca;
  if (r.is_ca) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < 5; ++k) {
      if (s.category[k] > s.category[best]) best = k;
    }
    r.category = kAllCategories[best];
    for (std::size_t k = 0; k < 5; ++k) {
      r.confidence[std::string(to_string(kAllCategories[k]))] = s.category[k];
    }
  }
  return r;
}

ClassificationResult classify_post(const ClassifierBackend& backend, const PostRecord& post,
                                   double gate_threshold) {
  return classify_text(backend, post.text, post.attachment_names(), gate_threshold);
}

void to_json(json& j, const ClassificationResult& r) {
  j = json{{"is_ca", r.is_ca}, {"confidence", r.confidence}, {"backend_id", r.backend_id}};
  if (r.category) j["category"] = to_string(*r.category);
}

void from_json(const json& j, ClassificationResult& r) {
  r.is_ca = j.at("is_ca").get<bool>();
  r.confidence = j.at("confidence").get<std::map<std::string, double>>();
  r.backend_id = j.value("backend_id", std::string());
  r.category.reset();
  if (j.contains("category")) {
    auto c = category_from_string(j["category"].get<std::string>());
    if (!c) throw InputError("unknown category: " + j["category"].dump());
    r.category = c;
  }
  if (r.category.has_value() != r.is_ca) throw InputError("category must be present iff is_ca");
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

MetricsRow binary_row(std::string name, std::size_t tp, std::size_t fp, std::size_t fn, std::size_t n) {
  MetricsRow row;
  row.name = std::move(name);
  const std::size_t tn = n - tp - fp - fn;
  row.support = tp + fn;
  row.accuracy = n ? static_cast<double>(tp + tn) / static_cast<double>(n) : 0.0;
  row.precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  row.recall = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  const double pr = row.precision + row.recall;
  row.f1 = pr > 0 ? 2.0 * row.precision * row.recall / pr : 0.0;
  return row;
}

}  // namespace

MetricsTable evaluate_predictions(const std::vector<Label>& truth, const std::vector<Label>& predicted) {
  if (truth.empty()) throw InputError("evaluation requires a non-empty test set");
  if (truth.size() != predicted.size()) throw InputError("truth and predictions differ in length");
  const std::size_t n = truth.size();

  std::array<std::array<std::size_t, kLabelCount>, kLabelCount> confusion{};
  for (std::size_t i = 0; i < n; ++i) ++confusion[truth[i].index()][predicted[i].index()];

  MetricsTable table;
  double sum_p = 0, sum_r = 0, sum_f1 = 0;
  std::size_t used = 0, correct = 0;
  for (std::size_t l = 0; l < kLabelCount; ++l) {
    std::size_t tp = confusion[l][l], fp = 0, fn = 0;
    correct += tp;
    for (std::size_t o = 0; o < kLabelCount; ++o) {
      if (o == l) continue;
      fp += confusion[o][l];
      fn += confusion[l][o];
    }
    if (tp + fp + fn == 0) continue;
    auto row = binary_row(std::string(to_string(label_from_index(l))), tp, fp, fn, n);
    sum_p += row.precision;
    sum_r += row.recall;
    sum_f1 += row.f1;
    ++used;
    table.rows.push_back(std::move(row));
  }

  std::size_t gtp = 0, gfp = 0, gfn = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool t = !truth[i].is_benign(), p = !predicted[i].is_benign();
    gtp += t && p;
    gfp += !t && p;
    gfn += t && !p;
  }
  table.rows.push_back(binary_row(std::string(kGateRowName), gtp, gfp, gfn, n));

  MetricsRow overall;
  overall.name = std::string(kOverallRowName);
  overall.support = n;
  overall.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  overall.precision = sum_p / static_cast<double>(used);
  overall.recall = sum_r / static_cast<double>(used);
  const double pr = overall.precision + overall.recall;
  overall.f1 = pr > 0 ? 2.0 * overall.precision * overall.recall / pr : 0.0;
  table.rows.push_back(overall);
  table.macro_f1 = sum_f1 / static_cast<double>(used);
  return table;
}

MetricsTable evaluate(const ClassifierBackend& backend, const LabeledCorpus& test, double gate_threshold) {
  std::vector<Label> truth, predicted;
  truth.reserve(test.items.size());
  predicted.reserve(test.items.size());
  for (const auto& item : test.items) {
    truth.push_back(item.label);
    predicted.push_back(classify_text(backend, item.text, item.filenames, gate_threshold).label());
  }
  return evaluate_predictions(truth, predicted);
}

const MetricsRow* MetricsTable::find(std::string_view name) const {
  for (const auto& r : rows) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

std::string MetricsTable::to_csv() const {
  std::string out = "Category,Accuracy,Precision,Recall,F1-score\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%.6f\n", r.accuracy, r.precision, r.recall, r.f1);
    out += r.name;
    out += buf;
  }
  return out;
}

}  // namespace darkgram
