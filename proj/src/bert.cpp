#include "bert.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "darkgram/serialize.hpp"
#include "darkgram/text.hpp"

namespace darkgram::detail {

namespace {

bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
         (c >= 123 && c <= 126);
}

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw InputError("model.bin truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::map<std::string, Tensor> read_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactMissingError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "DGMB", 4) != 0) {
    throw InputError(path.string() + ": not a DGMB tensor file");
  }
  if (auto v = read_u32(in); v != 1) {
    throw FormatVersionError(path.string() + ": tensor file version " + std::to_string(v));
  }
  const auto count = read_u32(in);
  std::map<std::string, Tensor> out;
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name(read_u32(in), '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name.size()))) {
      throw InputError("model.bin truncated");
    }
    Tensor tensor;
    tensor.dims.resize(read_u32(in));
    std::size_t n = 1;
    for (auto& d : tensor.dims) {
      d = read_u32(in);
      n *= d;
    }
    tensor.data.resize(n);
    if (!in.read(reinterpret_cast<char*>(tensor.data.data()), static_cast<std::streamsize>(n * 4))) {
      throw InputError("model.bin truncated in " + name);
    }
    if constexpr (std::endian::native == std::endian::big) {
      for (auto& f : tensor.data) {
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        u = (u >> 24) | ((u >> 8) & 0xff00) | ((u << 8) & 0xff0000) | (u << 24);
        std::memcpy(&f, &u, 4);
      }
    }
    out.emplace(std::move(name), std::move(tensor));
  }
  return out;
}

// Row-major [rows, cols] weight applied as y = x W^T + b.
struct Linear {
  std::size_t in = 0, out = 0;
  std::vector<float> w, b;

  void apply(const float* x, float* y) const {
    for (std::size_t o = 0; o < out; ++o) {
      const float* row = &w[o * in];
      double acc = b[o];
      for (std::size_t i = 0; i < in; ++i) acc += static_cast<double>(row[i]) * x[i];
      y[o] = static_cast<float>(acc);
    }
  }
};

struct LayerNorm {
  std::vector<float> gamma, beta;
  double eps = 1e-12;

  void apply(float* x, std::size_t n) const {
    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += x[i];
    mean /= static_cast<double>(n);
    double var = 0;
    for (std::size_t i = 0; i < n; ++i) var += (x[i] - mean) * (x[i] - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<float>((x[i] - mean) * inv * gamma[i] + beta[i]);
    }
  }
};

struct EncoderLayer {
  Linear query, key, value, attn_out, intermediate, output;
  LayerNorm attn_norm, out_norm;
};

class BertEncoderBackend final : public ClassifierBackend {
 public:
  BertEncoderBackend(std::string id, WordPieceTokenizer tokenizer, const json& config,
                     std::map<std::string, Tensor> tensors)
      : id_(std::move(id)), tokenizer_(std::move(tokenizer)) {
    hidden_ = config.at("hidden_size").get<std::size_t>();
    heads_ = config.at("num_heads").get<std::size_t>();
    max_length_ = config.value("max_length", std::size_t{128});
    const double eps = config.value("layer_norm_eps", 1e-12);
    const auto layers = config.at("num_layers").get<std::size_t>();
    if (hidden_ == 0 || heads_ == 0 || hidden_ % heads_ != 0) {
      throw InputError("bert config: hidden_size must be a positive multiple of num_heads");
    }

    auto take = [&](const std::string& name, std::vector<std::size_t> shape) {
      auto it = tensors.find(name);
      if (it == tensors.end()) throw InputError("model.bin lacks tensor " + name);
      std::size_t n = 1;
      for (auto d : shape) n *= d;
      if (it->second.data.size() != n) throw InputError("tensor " + name + " has unexpected shape");
      return std::move(it->second.data);
    };
    auto linear = [&](const std::string& prefix, std::size_t in, std::size_t out) {
      Linear l;
      l.in = in;
      l.out = out;
      l.w = take(prefix + ".weight", {out, in});
      l.b = take(prefix + ".bias", {out});
      return l;
    };
    auto norm = [&](const std::string& prefix, std::size_t n) {
      LayerNorm ln;
      ln.gamma = take(prefix + ".weight", {n});
      ln.beta = take(prefix + ".bias", {n});
      ln.eps = eps;
      return ln;
    };

    vocab_size_ = config.at("vocab_size").get<std::size_t>();
    max_position_ = config.at("max_position").get<std::size_t>();
    const auto type_vocab = config.value("type_vocab_size", std::size_t{2});
    const auto inter = config.at("intermediate_size").get<std::size_t>();
    max_length_ = std::min(max_length_, max_position_);

    word_ = take("bert.embeddings.word_embeddings.weight", {vocab_size_, hidden_});
    position_ = take("bert.embeddings.position_embeddings.weight", {max_position_, hidden_});
    token_type_ = take("bert.embeddings.token_type_embeddings.weight", {type_vocab, hidden_});
    emb_norm_ = norm("bert.embeddings.LayerNorm", hidden_);
    for (std::size_t l = 0; l < layers; ++l) {
      const std::string p = "bert.encoder.layer." + std::to_string(l) + ".";
      EncoderLayer layer;
      layer.query = linear(p + "attention.self.query", hidden_, hidden_);
      layer.key = linear(p + "attention.self.key", hidden_, hidden_);
      layer.value = linear(p + "attention.self.value", hidden_, hidden_);
      layer.attn_out = linear(p + "attention.output.dense", hidden_, hidden_);
      layer.attn_norm = norm(p + "attention.output.LayerNorm", hidden_);
      layer.intermediate = linear(p + "intermediate.dense", hidden_, inter);
      layer.output = linear(p + "output.dense", inter, hidden_);
      layer.out_norm = norm(p + "output.LayerNorm", hidden_);
      layers_.push_back(std::move(layer));
    }
    pooler_ = linear("bert.pooler.dense", hidden_, hidden_);
    classifier_ = linear("classifier", hidden_, kLabelCount);
  }

  std::string backend_id() const override { return id_; }

  /// Six logits in canonical label order.
  std::array<double, kLabelCount> logits(std::string_view input) const {
    auto ids = tokenizer_.encode(input, max_length_);
    const std::size_t n = ids.size(), h = hidden_;
    std::vector<float> x(n * h);
    for (std::size_t t = 0; t < n; ++t) {
      auto id = static_cast<std::size_t>(ids[t]);
      if (id >= vocab_size_) throw InputError("token id outside embedding table");
      for (std::size_t i = 0; i < h; ++i) {
        x[t * h + i] = word_[id * h + i] + position_[t * h + i] + token_type_[i];
      }
      emb_norm_.apply(&x[t * h], h);
    }

    const std::size_t dh = h / heads_;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<float> q(n * h), k(n * h), v(n * h), ctx(n * h), tmp(n * h);
    std::vector<double> weights(n);
    for (const auto& layer : layers_) {
      for (std::size_t t = 0; t < n; ++t) {
        layer.query.apply(&x[t * h], &q[t * h]);
        layer.key.apply(&x[t * h], &k[t * h]);
        layer.value.apply(&x[t * h], &v[t * h]);
      }
      for (std::size_t hd = 0; hd < heads_; ++hd) {
        const std::size_t off = hd * dh;
        for (std::size_t t = 0; t < n; ++t) {
          double top = -INFINITY;
          for (std::size_t s = 0; s < n; ++s) {
            double dot = 0;
            for (std::size_t i = 0; i < dh; ++i) {
              dot += static_cast<double>(q[t * h + off + i]) * k[s * h + off + i];
            }
            weights[s] = dot * scale;
            top = std::max(top, weights[s]);
          }
          double sum = 0;
          for (std::size_t s = 0; s < n; ++s) {
            weights[s] = std::exp(weights[s] - top);
            sum += weights[s];
          }
          for (std::size_t i = 0; i < dh; ++i) {
            double acc = 0;
            for (std::size_t s = 0; s < n; ++s) acc += weights[s] * v[s * h + off + i];
            ctx[t * h + off + i] = static_cast<float>(acc / sum);
          }
        }
      }
      std::vector<float> inter(layer.intermediate.out);
      for (std::size_t t = 0; t < n; ++t) {
        float* row = &x[t * h];
        layer.attn_out.apply(&ctx[t * h], &tmp[t * h]);
        for (std::size_t i = 0; i < h; ++i) row[i] += tmp[t * h + i];
        layer.attn_norm.apply(row, h);
        layer.intermediate.apply(row, inter.data());
        for (auto& f : inter) f = static_cast<float>(0.5 * f * (1.0 + std::erf(f / std::sqrt(2.0))));
        layer.output.apply(inter.data(), &tmp[t * h]);
        for (std::size_t i = 0; i < h; ++i) row[i] += tmp[t * h + i];
        layer.out_norm.apply(row, h);
      }
    }

    std::vector<float> pooled(h);
    pooler_.apply(&x[0], pooled.data());
    for (auto& f : pooled) f = std::tanh(f);
    std::array<float, kLabelCount> out{};
    classifier_.apply(pooled.data(), out.data());
    std::array<double, kLabelCount> result{};
    for (std::size_t i = 0; i < kLabelCount; ++i) result[i] = out[i];
    return result;
  }

  StageScores score(std::string_view text,
                    const std::vector<std::string>& attachment_names) const override {
    std::string input(text);
    if (word_tokens(text).size() < 3) {
      for (const auto& name : attachment_names) {
        if (!input.empty()) input += ' ';
        input += name;
      }
    }
    auto z = logits(input);
    const double top = *std::max_element(z.begin(), z.end());
    std::array<double, kLabelCount> p{};
    double sum = 0;
    for (std::size_t i = 0; i < kLabelCount; ++i) {
      p[i] = std::exp(z[i] - top);
      sum += p[i];
    }
    for (auto& pi : p) pi /= sum;
    StageScores s;
    s.p_ca = 1.0 - p[0];
    double cat_sum = 0;
    for (std::size_t c = 0; c < 5; ++c) cat_sum += p[c + 1];
    for (std::size_t c = 0; c < 5; ++c) s.category[c] = cat_sum > 0 ? p[c + 1] / cat_sum : 0.2;
    return s;
  }

 private:
  std::string id_;
  WordPieceTokenizer tokenizer_;
  std::size_t hidden_ = 0, heads_ = 0, max_length_ = 128, vocab_size_ = 0, max_position_ = 0;
  std::vector<float> word_, position_, token_type_;
  LayerNorm emb_norm_;
  std::vector<EncoderLayer> layers_;
  Linear pooler_, classifier_;
};

}  // namespace

WordPieceTokenizer::WordPieceTokenizer(std::vector<std::string> vocab, bool lowercase,
                                       std::string unk, std::string cls, std::string sep,
                                       std::size_t max_chars_per_word)
    : vocab_(std::move(vocab)),
      lowercase_(lowercase),
      unk_(std::move(unk)),
      cls_(std::move(cls)),
      sep_(std::move(sep)),
      max_chars_per_word_(max_chars_per_word) {
  for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], static_cast<int>(i));
  for (const auto* special : {&unk_, &cls_, &sep_}) {
    if (!index_.contains(*special)) throw InputError("tokenizer vocab lacks " + *special);
  }
}

int WordPieceTokenizer::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? index_.at(unk_) : it->second;
}

std::vector<std::string> WordPieceTokenizer::basic_tokens(std::string_view text) const {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (c == 0 || (c < 32 && !std::isspace(c)) || c == 127) continue;
    if (std::isspace(c)) {
      flush();
    } else if (is_ascii_punct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(lowercase_ ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return out;
}

std::vector<int> WordPieceTokenizer::encode(std::string_view text, std::size_t max_length) const {
  std::vector<int> ids{index_.at(cls_)};
  const std::size_t budget = max_length >= 2 ? max_length - 2 : 0;
  for (const auto& word : basic_tokens(text)) {
    if (ids.size() - 1 >= budget) break;
    std::vector<int> pieces;
    if (word.size() > max_chars_per_word_) {
      pieces.push_back(index_.at(unk_));
    } else {
      std::size_t start = 0;
      bool bad = false;
      while (start < word.size()) {
        std::size_t end = word.size();
        int found = -1;
        while (start < end) {
          std::string sub = word.substr(start, end - start);
          if (start > 0) sub = "##" + sub;
          if (auto it = index_.find(sub); it != index_.end()) {
            found = it->second;
            break;
          }
          --end;
        }
        if (found < 0) {
          bad = true;
          break;
        }
        pieces.push_back(found);
        start = end;
      }
      if (bad) pieces.assign(1, index_.at(unk_));
    }
    for (int id : pieces) {
      if (ids.size() - 1 >= budget) break;
      ids.push_back(id);
    }
  }
  ids.push_back(id_of(sep_));
  return ids;
}

std::unique_ptr<ClassifierBackend> load_bert_encoder(const std::filesystem::path& dir,
                                                     const json& manifest) {
  if (manifest.value("architecture", "") != "bert-encoder") {
    throw InputError("artifact " + dir.string() + ": unsupported architecture '" +
                     manifest.value("architecture", "") + "'");
  }
  try {
    auto tok = json::parse(read_text_file(dir / "tokenizer.json"));
    if (tok.value("type", "") != "wordpiece") throw InputError("tokenizer.json: type must be wordpiece");
    WordPieceTokenizer tokenizer(tok.at("vocab").get<std::vector<std::string>>(),
                                 tok.value("lowercase", true), tok.value("unk_token", "[UNK]"),
                                 tok.value("cls_token", "[CLS]"), tok.value("sep_token", "[SEP]"),
                                 tok.value("max_input_chars_per_word", std::size_t{100}));
    return std::make_unique<BertEncoderBackend>(manifest.at("backend_id").get<std::string>(),
                                                std::move(tokenizer), manifest.at("config"),
                                                read_tensors(dir / "model.bin"));
  } catch (const json::exception& e) {
    throw InputError("artifact " + dir.string() + ": " + e.what());
  }
}

}  // namespace darkgram::detail
