#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "darkgram/errors.hpp"
#include "darkgram/model.hpp"

namespace darkgram {

/// Sorted term -> frequency.
using TokenCounts = std::map<std::string, int>;

/// Lowercased word tokens of `text`. When the text has fewer than three
/// tokens, tokens of the attachment filenames are added, since many posts
/// are bare files.
TokenCounts featurize(std::string_view text, const std::vector<std::string>& attachment_names);

/// Keys of ClassificationResult::confidence for the gate stage.
inline constexpr std::string_view kGateBenignKey = "Benign";
inline constexpr std::string_view kGateCaKey = "CA";

struct ClassificationResult {
  bool is_ca = false;
  std::optional<CacCategory> category;  // present iff is_ca
  /// Gate stage: "Benign" and "CA" (sum to 1). Category stage, only when
  /// is_ca: the five category names (sum to 1).
  std::map<std::string, double> confidence;
  std::string backend_id;

  Label label() const { return is_ca ? Label{category} : Label{}; }
  friend bool operator==(const ClassificationResult&, const ClassificationResult&) = default;
};

void to_json(nlohmann::json& j, const ClassificationResult& r);
void from_json(const nlohmann::json& j, ClassificationResult& r);

/// Raw output of a backend for one feature vector.
struct StageScores {
  double p_ca = 0.0;
  std::array<double, 5> category{};  // sums to 1
};

/// A loaded classifier. Implementations are immutable after construction
/// and safe to call concurrently. `score` may throw TransientError or
/// PermanentError when the backend cannot answer.
class ClassifierBackend {
 public:
  virtual ~ClassifierBackend() = default;
  virtual std::string backend_id() const = 0;
  virtual StageScores score(std::string_view text,
                            const std::vector<std::string>& attachment_names) const = 0;
};

struct LabeledItem {
  std::string text;
  std::vector<std::string> filenames;
  Label label;
};

struct CorpusSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct LabeledCorpus {
  std::vector<LabeledItem> items;
  std::optional<CorpusSplit> split;

  LabeledCorpus subset(const std::vector<std::size_t>& indices) const;
};

/// Stratified by label: within each label a seeded shuffle, then the first
/// round(n * train_ratio) go to train. Train and test are disjoint and cover
/// every item. Independent of the input order of items.
CorpusSplit stratified_split(const LabeledCorpus& corpus, double train_ratio, std::uint64_t seed);

LabeledCorpus read_labeled_corpus(const std::filesystem::path& path);
void write_labeled_corpus(const std::filesystem::path& path, const LabeledCorpus& corpus);

struct BaselineOptions {
  int epochs = 12;
  double learning_rate = 0.5;
};

/// Term-frequency features with one-vs-rest logistic scoring: a binary gate
/// (benign vs cybercriminal) and five category scorers trained on the
/// cybercriminal items only.
class BaselineModel final : public ClassifierBackend {
 public:
  static constexpr std::string_view kBackendId = "baseline-tf-ovr";

  std::string backend_id() const override { return std::string(kBackendId); }
  StageScores score(std::string_view text,
                    const std::vector<std::string>& attachment_names) const override;

  /// Writes manifest.json, tokenizer.json, and model.bin.
  void save(const std::filesystem::path& dir) const;
  static BaselineModel load(const std::filesystem::path& dir);

  std::size_t vocabulary_size() const { return vocab_.size(); }

 private:
  friend BaselineModel train_baseline(const LabeledCorpus&, std::uint64_t, const BaselineOptions&);

  using SparseVector = std::vector<std::pair<std::size_t, double>>;
  SparseVector vectorize(const TokenCounts& counts) const;
  static double margin(const std::vector<double>& w, const SparseVector& x);

  std::map<std::string, std::size_t> vocab_;
  std::vector<double> gate_;                     // vocab + bias
  std::array<std::vector<double>, 5> categories_;  // vocab + bias each
};

/// Trains on corpus.split->train when a split is present, otherwise on all
/// items. Requires at least two examples of every label present; labels
/// with fewer raise InputError. Deterministic given the seed and
/// independent of item order.
BaselineModel train_baseline(const LabeledCorpus& corpus, std::uint64_t seed,
                             const BaselineOptions& options = {});

/// Two-stage decision. An empty feature vector is benign without consulting
/// the backend. Category ties go to the earliest category in enum order.
ClassificationResult classify_post(const ClassifierBackend& backend, const PostRecord& post,
                                   double gate_threshold = 0.5);
ClassificationResult classify_text(const ClassifierBackend& backend, std::string_view text,
                                   const std::vector<std::string>& attachment_names,
                                   double gate_threshold = 0.5);

struct MetricsRow {
  std::string name;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

/// Per-label one-vs-rest rows (labels occurring in truth or predictions),
/// a "CA gate" row for the binary stage-1 decision, and an "Overall" row
/// whose accuracy is exact-match over six labels and whose precision and
/// recall are macro averages over the per-label rows.
struct MetricsTable {
  std::vector<MetricsRow> rows;
  double macro_f1 = 0.0;  // mean of per-label F1

  const MetricsRow* find(std::string_view name) const;
  /// Category,Accuracy,Precision,Recall,F1-score
  std::string to_csv() const;
};

inline constexpr std::string_view kGateRowName = "CA gate";
inline constexpr std::string_view kOverallRowName = "Overall";

MetricsTable evaluate_predictions(const std::vector<Label>& truth, const std::vector<Label>& predicted);
MetricsTable evaluate(const ClassifierBackend& backend, const LabeledCorpus& test,
                      double gate_threshold = 0.5);

// ---------------------------------------------------------------------------
// Model artifacts

/// Artifact directory contract: model.bin, tokenizer.json, and manifest.json
/// {format_version, backend_id, labels: [six canonical names]}.
inline constexpr int kArtifactFormatVersion = 1;

class ArtifactMissingError : public InputError {
 public:
  using InputError::InputError;
};
class LabelOrderError : public InputError {
 public:
  using InputError::InputError;
};
class FormatVersionError : public InputError {
 public:
  using InputError::InputError;
};

/// Loads an exported transformer encoder artifact (architecture
/// "bert-encoder"). Validates file presence, format version, and label order
/// before reading weights.
std::unique_ptr<ClassifierBackend> load_external_backend(const std::filesystem::path& dir);

/// Dispatches on manifest.json: the built-in baseline or an external export.
std::unique_ptr<ClassifierBackend> load_backend(const std::filesystem::path& dir);

}  // namespace darkgram
