#include "darkgram/serialize.hpp"

#include <fstream>
#include <sstream>

#include "darkgram/errors.hpp"

namespace darkgram {

namespace {

template <class Enum, class Parse>
Enum parse_enum(const json& j, const char* field, Parse parse) {
  const auto name = j.at(field).get<std::string>();
  auto parsed = parse(name);
  if (!parsed) throw InputError(std::string("unknown ") + field + " '" + name + "'");
  return *parsed;
}

}  // namespace

void to_json(json& j, const ChannelRecord& c) {
  j = json{{"channel_id", c.channel_id},
           {"title", c.title},
           {"description", c.description},
           {"created_at", c.created_at},
           {"replies_enabled", c.replies_enabled},
           {"source_kind", to_string(c.source_kind)}};
  if (c.category) j["category"] = to_string(*c.category);
}

void from_json(const json& j, ChannelRecord& c) {
  c.channel_id = j.at("channel_id").get<std::string>();
  c.title = j.value("title", "");
  c.description = j.value("description", "");
  c.created_at = j.value("created_at", Timestamp{0});
  c.replies_enabled = j.value("replies_enabled", false);
  c.category.reset();
  if (j.contains("category") && !j["category"].is_null()) {
    c.category = parse_enum<CacCategory>(j, "category", category_from_string);
  }
  c.source_kind = j.contains("source_kind")
                      ? parse_enum<SourceKind>(j, "source_kind", source_kind_from_string)
                      : SourceKind::Replay;
}

void to_json(json& j, const AttachmentMeta& a) {
  j = json{{"filename", a.filename}, {"size_bytes", a.size_bytes}, {"kind", to_string(a.kind)}};
  if (a.content_digest) j["content_digest"] = *a.content_digest;
}

void from_json(const json& j, AttachmentMeta& a) {
  a.filename = j.at("filename").get<std::string>();
  a.size_bytes = j.value("size_bytes", std::int64_t{0});
  a.kind = j.contains("kind")
               ? parse_enum<AttachmentKind>(j, "kind", attachment_kind_from_string)
               : AttachmentKind::Other;
  a.content_digest.reset();
  if (j.contains("content_digest") && !j["content_digest"].is_null()) {
    a.content_digest = j["content_digest"].get<std::string>();
  }
}

void to_json(json& j, const PostRecord& p) {
  j = json{{"channel_id", p.channel_id},
           {"post_id", p.post_id},
           {"posted_at", p.posted_at},
           {"text", p.text},
           {"attachments", p.attachments},
           {"links", p.links},
           {"bot_refs", p.bot_refs},
           {"views", p.views},
           {"forwards", p.forwards},
           {"reactions", p.reactions},
           {"replies", p.replies},
           {"refresh_seq", p.refresh_seq}};
}

void from_json(const json& j, PostRecord& p) {
  p.channel_id = j.at("channel_id").get<std::string>();
  p.post_id = j.at("post_id").get<std::int64_t>();
  p.posted_at = j.at("posted_at").get<Timestamp>();
  p.text = j.value("text", "");
  p.attachments = j.value("attachments", std::vector<AttachmentMeta>{});
  p.links = j.value("links", std::vector<std::string>{});
  p.bot_refs = j.value("bot_refs", std::vector<std::string>{});
  p.views = j.value("views", std::int64_t{0});
  p.forwards = j.value("forwards", std::int64_t{0});
  p.reactions = j.value("reactions", std::map<std::string, std::int64_t>{});
  p.replies = j.value("replies", std::vector<std::string>{});
  p.refresh_seq = j.value("refresh_seq", std::int64_t{0});
}

void to_json(json& j, const EngagementSnapshot& s) {
  j = json{{"channel_id", s.channel_id}, {"taken_at", s.taken_at}, {"subscribers", s.subscribers}};
}

void from_json(const json& j, EngagementSnapshot& s) {
  s.channel_id = j.at("channel_id").get<std::string>();
  s.taken_at = j.at("taken_at").get<Timestamp>();
  s.subscribers = j.at("subscribers").get<std::int64_t>();
}

void to_json(json& j, const PipelineConfig& c) {
  j = json{{"refresh_interval_s", c.refresh_interval_s},
           {"url_engine_threshold", c.url_engine_threshold},
           {"file_av_threshold", c.file_av_threshold},
           {"channel_flag_threshold", c.channel_flag_threshold},
           {"channel_eval_posts", c.channel_eval_posts},
           {"conversion_rate", c.conversion_rate},
           {"large_leak_threshold", c.large_leak_threshold},
           {"growth_window_days", c.growth_window_days},
           {"gate_threshold", c.gate_threshold},
           {"recheck_days", c.recheck_days},
           {"migration_creation_window_days", c.migration_creation_window_days},
           {"report_suppression_days", c.report_suppression_days},
           {"poll_batch", c.poll_batch},
           {"probe_concurrency", c.probe_concurrency},
           {"scan_concurrency", c.scan_concurrency},
           {"eval_concurrency", c.eval_concurrency}};
}

void from_json(const json& j, PipelineConfig& c) {
  PipelineConfig d;
  c.refresh_interval_s = j.value("refresh_interval_s", d.refresh_interval_s);
  c.url_engine_threshold = j.value("url_engine_threshold", d.url_engine_threshold);
  c.file_av_threshold = j.value("file_av_threshold", d.file_av_threshold);
  c.channel_flag_threshold = j.value("channel_flag_threshold", d.channel_flag_threshold);
  c.channel_eval_posts = j.value("channel_eval_posts", d.channel_eval_posts);
  c.conversion_rate = j.value("conversion_rate", d.conversion_rate);
  c.large_leak_threshold = j.value("large_leak_threshold", d.large_leak_threshold);
  c.growth_window_days = j.value("growth_window_days", d.growth_window_days);
  c.gate_threshold = j.value("gate_threshold", d.gate_threshold);
  c.recheck_days = j.value("recheck_days", d.recheck_days);
  c.migration_creation_window_days =
      j.value("migration_creation_window_days", d.migration_creation_window_days);
  c.report_suppression_days = j.value("report_suppression_days", d.report_suppression_days);
  c.poll_batch = j.value("poll_batch", d.poll_batch);
  c.probe_concurrency = j.value("probe_concurrency", d.probe_concurrency);
  c.scan_concurrency = j.value("scan_concurrency", d.scan_concurrency);
  c.eval_concurrency = j.value("eval_concurrency", d.eval_concurrency);
}

std::string dump_line(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const json&)>& fn) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json parsed;
    try {
      parsed = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InputError(path.string() + ": line " + std::to_string(line_no) +
                       ": malformed JSON (" + e.what() + ")");
    }
    try {
      fn(line_no, parsed);
    } catch (const json::exception& e) {
      throw InputError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw EnvironmentError("cannot write " + path.string());
  out << content;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace darkgram
