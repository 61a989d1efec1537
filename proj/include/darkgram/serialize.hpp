#pragma once

// JSON encodings of the domain types. Field names are snake_case of the
// struct members; optionals are omitted when empty.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "darkgram/model.hpp"

namespace darkgram {

using json = nlohmann::json;

void to_json(json& j, const ChannelRecord& c);
void from_json(const json& j, ChannelRecord& c);
void to_json(json& j, const AttachmentMeta& a);
void from_json(const json& j, AttachmentMeta& a);
void to_json(json& j, const PostRecord& p);
void from_json(const json& j, PostRecord& p);
void to_json(json& j, const EngagementSnapshot& s);
void from_json(const json& j, EngagementSnapshot& s);
void to_json(json& j, const PipelineConfig& c);
void from_json(const json& j, PipelineConfig& c);

/// Compact single-line encoding with sorted keys, suitable for JSONL.
std::string dump_line(const json& j);

/// Calls `fn(line_number, parsed)` for every non-blank line. Malformed JSON
/// raises InputError naming the file and line.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const json&)>& fn);

template <class T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
  std::vector<T> out;
  for_each_jsonl(path, [&](std::size_t, const json& j) { out.push_back(j.get<T>()); });
  return out;
}

template <class T>
std::string to_jsonl(const std::vector<T>& items) {
  std::string out;
  for (const auto& item : items) {
    out += dump_line(json(item));
    out += '\n';
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace darkgram
