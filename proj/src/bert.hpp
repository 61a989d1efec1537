#pragma once

// Inference for exported transformer encoders (BERT layout).
//
// model.bin: "DGMB", u32 version (1), u32 tensor count, then per tensor
//   u32 name length, name bytes, u32 ndim, u32 dims[ndim], float32 data.
// All integers and floats little-endian. Tensor names follow the usual
// BertForSequenceClassification state-dict names.
//
// tokenizer.json: {"type": "wordpiece", "lowercase": true, "vocab": [...],
//   "unk_token", "cls_token", "sep_token", "max_input_chars_per_word"}
//
// manifest.json additionally carries "architecture": "bert-encoder" and a
// "config" object with vocab_size, hidden_size, num_layers, num_heads,
// intermediate_size, max_position, type_vocab_size, layer_norm_eps,
// max_length.
//
// The encoder input is the post text, followed by the attachment filenames
// when the text has fewer than three word tokens (same rule as featurize).

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "darkgram/classify.hpp"

namespace darkgram::detail {

std::unique_ptr<ClassifierBackend> load_bert_encoder(const std::filesystem::path& dir,
                                                     const nlohmann::json& manifest);

class WordPieceTokenizer {
 public:
  WordPieceTokenizer(std::vector<std::string> vocab, bool lowercase, std::string unk,
                     std::string cls, std::string sep, std::size_t max_chars_per_word);

  /// [CLS] pieces... [SEP], truncated to max_length ids.
  std::vector<int> encode(std::string_view text, std::size_t max_length) const;
  std::vector<std::string> basic_tokens(std::string_view text) const;

 private:
  int id_of(const std::string& token) const;

  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
  bool lowercase_;
  std::string unk_, cls_, sep_;
  std::size_t max_chars_per_word_;
};

}  // namespace darkgram::detail
