#include "darkgram/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "darkgram/errors.hpp"
#include "darkgram/serialize.hpp"

namespace darkgram {

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_handle_char(char c) { return is_alnum(c) || c == '_'; }

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool istarts_with(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
  }
  return true;
}

bool url_terminator(char c) {
  return std::isspace(static_cast<unsigned char>(c)) || c == '<' || c == '>' || c == '"' ||
         c == '\'' || c == '`' || c == '{' || c == '}' || c == '|' || c == '\\' || c == '^';
}

// Trailing characters that usually belong to the surrounding sentence.
std::string_view trim_trailing_punct(std::string_view url) {
  while (!url.empty()) {
    char c = url.back();
    if (c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' || c == ']' ||
        c == '*') {
      url.remove_suffix(1);
    } else if (c == ')' && url.find('(') == std::string_view::npos) {
      url.remove_suffix(1);
    } else {
      break;
    }
  }
  return url;
}

}  // namespace

std::optional<std::string> normalize_url(std::string_view url) {
  std::string_view scheme;
  if (istarts_with(url, "https://")) {
    scheme = "https";
  } else if (istarts_with(url, "http://")) {
    scheme = "http";
  } else {
    return std::nullopt;
  }
  url.remove_prefix(scheme.size() + 3);
  if (auto hash = url.find('#'); hash != std::string_view::npos) url = url.substr(0, hash);

  const auto auth_end = url.find_first_of("/?");
  std::string_view authority = url.substr(0, auth_end);
  std::string_view rest = auth_end == std::string_view::npos ? "" : url.substr(auth_end);

  std::string_view userinfo;
  if (auto at = authority.rfind('@'); at != std::string_view::npos) {
    userinfo = authority.substr(0, at + 1);
    authority.remove_prefix(at + 1);
  }
  std::string_view hostport = authority;
  std::string_view host = hostport.substr(0, hostport.find(':'));
  if (host.empty()) return std::nullopt;
  for (char c : host) {
    if (!(is_alnum(c) || c == '-' || c == '.' || c == '_' || static_cast<unsigned char>(c) >= 0x80)) {
      return std::nullopt;
    }
  }

  std::string out(scheme);
  out += "://";
  out += userinfo;
  out += lower(hostport);
  out += rest;
  return out;
}

std::string url_host(std::string_view normalized_url) {
  auto pos = normalized_url.find("://");
  std::string_view rest = pos == std::string_view::npos ? normalized_url
                                                        : normalized_url.substr(pos + 3);
  rest = rest.substr(0, rest.find_first_of("/?#"));
  if (auto at = rest.rfind('@'); at != std::string_view::npos) rest.remove_prefix(at + 1);
  rest = rest.substr(0, rest.find(':'));
  return lower(rest);
}

std::vector<std::string> extract_links(std::string_view text) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::size_t i = 0;
  while (i < text.size()) {
    std::string_view tail = text.substr(i);
    if (!(istarts_with(tail, "http://") || istarts_with(tail, "https://"))) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < text.size() && !url_terminator(text[end])) ++end;
    auto candidate = trim_trailing_punct(text.substr(i, end - i));
    if (auto norm = normalize_url(candidate); norm && seen.insert(*norm).second) {
      out.push_back(*norm);
    }
    i = end;
  }
  return out;
}

std::vector<std::string> extract_bot_refs(std::string_view text) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '@') continue;
    // Characters that can end an email local part also disqualify a mention.
    if (i > 0) {
      char prev = text[i - 1];
      if (is_handle_char(prev) || prev == '.' || prev == '-' || prev == '+') continue;
    }
    std::size_t end = i + 1;
    while (end < text.size() && is_handle_char(text[end])) ++end;
    const std::size_t len = end - i - 1;
    if (len < 4 || len > 32) continue;
    // "@example.com" reads as a domain, not an account.
    if (end + 1 < text.size() && text[end] == '.' && is_alnum(text[end + 1])) continue;
    auto handle = lower(text.substr(i + 1, len));
    if (seen.insert(handle).second) out.push_back(std::move(handle));
  }
  return out;
}

// ---------------------------------------------------------------------------
// ReplaySource

ReplaySource::ReplaySource(std::vector<Entry> entries, Timestamp start)
    : entries_(std::move(entries)), now_(start) {
  std::stable_sort(entries_.begin(), entries_.end(),
                   [](const Entry& a, const Entry& b) { return a.t < b.t; });
  advance_to(start);
}

ReplaySource ReplaySource::from_jsonl(std::string_view text) {
  std::vector<Entry> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = json::parse(line);
      entries.push_back({j.at("t").get<Timestamp>(), j.at("type").get<std::string>(), j});
    } catch (const json::exception& e) {
      throw InputError("replay fixture line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  Timestamp start = entries.empty() ? 0 : entries.front().t;
  for (const auto& e : entries) start = std::min(start, e.t);
  return ReplaySource(std::move(entries), start);
}

ReplaySource ReplaySource::from_file(const std::filesystem::path& path) {
  return from_jsonl(read_text_file(path));
}

Timestamp ReplaySource::first_event_time() const {
  return entries_.empty() ? now_ : entries_.front().t;
}

Timestamp ReplaySource::last_event_time() const {
  return entries_.empty() ? now_ : entries_.back().t;
}

void ReplaySource::advance_to(Timestamp to) {
  if (to < now_) throw InputError("replay clock cannot move backwards");
  now_ = to;
  while (cursor_ < entries_.size() && entries_[cursor_].t <= now_) {
    apply(entries_[cursor_]);
    ++cursor_;
  }
}

void ReplaySource::apply(const Entry& e) {
  const auto& j = e.payload;
  try {
    if (e.type == "channel") {
      auto rec = j.at("channel").get<ChannelRecord>();
      auto& st = channels_[rec.channel_id];
      st.record = std::move(rec);
      st.deleted = false;
    } else if (e.type == "post") {
      auto post = j.at("post").get<PostRecord>();
      post.refresh_seq = 0;
      auto& st = channels_[post.channel_id];
      st.posts[post.post_id] = std::move(post);
    } else if (e.type == "subscribers") {
      channels_[j.at("channel_id").get<std::string>()].subscribers =
          j.at("subscribers").get<std::int64_t>();
    } else if (e.type == "delete_post") {
      channels_[j.at("channel_id").get<std::string>()].posts.erase(
          j.at("post_id").get<std::int64_t>());
    } else if (e.type == "delete_channel") {
      channels_[j.at("channel_id").get<std::string>()].deleted = true;
    } else if (e.type == "outage") {
      channels_[j.at("channel_id").get<std::string>()].outage_until =
          j.at("until").get<Timestamp>();
    } else {
      throw InputError("unknown replay entry type '" + e.type + "'");
    }
  } catch (const json::exception& ex) {
    throw InputError("replay entry at t=" + std::to_string(e.t) + ": " + ex.what());
  }
}

ReplaySource::ChannelState& ReplaySource::reachable(const std::string& channel_id) {
  auto it = channels_.find(channel_id);
  if (it == channels_.end()) throw DeletedError("channel not found: " + channel_id);
  auto& st = it->second;
  if (st.deleted) throw DeletedError("channel deleted: " + channel_id);
  if (now_ < st.outage_until) throw TransientError("channel unreachable: " + channel_id);
  return st;
}

std::vector<PostRecord> ReplaySource::list_recent_posts(const std::string& channel_id,
                                                        std::size_t n) {
  auto& st = reachable(channel_id);
  std::vector<PostRecord> out;
  for (auto it = st.posts.rbegin(); it != st.posts.rend() && out.size() < n; ++it) {
    out.push_back(it->second);
  }
  return out;
}

PostRecord ReplaySource::fetch_post(const std::string& channel_id, std::int64_t post_id) {
  auto& st = reachable(channel_id);
  auto it = st.posts.find(post_id);
  if (it == st.posts.end()) {
    throw DeletedError("post " + std::to_string(post_id) + " not found in " + channel_id);
  }
  return it->second;
}

EngagementSnapshot ReplaySource::snapshot(const std::string& channel_id) {
  auto& st = reachable(channel_id);
  return {channel_id, now_, st.subscribers};
}

std::optional<ChannelRecord> ReplaySource::channel_info(const std::string& channel_id) {
  auto it = channels_.find(channel_id);
  if (it == channels_.end()) return std::nullopt;
  return it->second.record;
}

std::vector<std::string> ReplaySource::known_channels() const {
  std::vector<std::string> out;
  for (const auto& [id, st] : channels_) {
    if (st.record) out.push_back(id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Poller

std::string_view to_string(IngestEventKind k) {
  switch (k) {
    case IngestEventKind::Skip: return "Skip";
    case IngestEventKind::Tombstone: return "Tombstone";
    case IngestEventKind::ChannelDeleted: return "ChannelDeleted";
  }
  return "Skip";
}

PollBatch Poller::poll_cycle(ChannelSource& source, std::span<const std::string> channels,
                             const PipelineConfig& config) {
  if (channels.empty()) throw InputError("poll_cycle requires at least one channel");
  PollBatch batch;
  batch.at = source.now();

  for (const auto& channel : channels) {
    std::vector<PostRecord> recent;
    EngagementSnapshot snap;
    try {
      recent = source.list_recent_posts(channel, static_cast<std::size_t>(config.poll_batch));
      snap = source.snapshot(channel);
    } catch (const DeletedError& e) {
      batch.events.push_back({IngestEventKind::ChannelDeleted, channel, std::nullopt, batch.at, e.what()});
      continue;
    } catch (const Error& e) {
      batch.events.push_back({IngestEventKind::Skip, channel, std::nullopt, batch.at, e.what()});
      continue;
    }

    // Refresh everything seen before, oldest first.
    for (auto it = next_seq_.lower_bound(PostKey{channel, INT64_MIN});
         it != next_seq_.end() && it->first.channel_id == channel; ++it) {
      if (tombstoned_.contains(it->first)) continue;
      try {
        auto post = source.fetch_post(channel, it->first.post_id);
        post.refresh_seq = it->second++;
        batch.posts.push_back(std::move(post));
      } catch (const DeletedError& e) {
        tombstoned_[it->first] = true;
        batch.events.push_back({IngestEventKind::Tombstone, channel, it->first.post_id, batch.at, e.what()});
      } catch (const Error& e) {
        batch.events.push_back({IngestEventKind::Skip, channel, it->first.post_id, batch.at, e.what()});
      }
    }

    std::sort(recent.begin(), recent.end(),
              [](const PostRecord& a, const PostRecord& b) { return a.post_id < b.post_id; });
    auto newest = newest_seen_.find(channel);
    for (auto& post : recent) {
      PostKey key{channel, post.post_id};
      if (next_seq_.contains(key)) continue;
      if (newest != newest_seen_.end() && post.post_id <= newest->second) continue;
      post.refresh_seq = 0;
      next_seq_[key] = 1;
      batch.posts.push_back(std::move(post));
    }
    if (!recent.empty()) {
      auto& slot = newest_seen_[channel];
      slot = std::max(slot, recent.back().post_id);
    }
    batch.snapshots.push_back(std::move(snap));
  }
  return batch;
}

std::int64_t Poller::refresh_count(const std::string& channel_id, std::int64_t post_id) const {
  auto it = next_seq_.find(PostKey{channel_id, post_id});
  return it == next_seq_.end() ? 0 : it->second;
}

// ---------------------------------------------------------------------------
// Archives

namespace {

json event_to_json(const IngestEvent& e) {
  json j{{"kind", to_string(e.kind)}, {"channel_id", e.channel_id}, {"at", e.at}, {"reason", e.reason}};
  if (e.post_id) j["post_id"] = *e.post_id;
  return j;
}

void append_lines(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw EnvironmentError("cannot append to " + path.string());
  out << content;
}

}  // namespace

ArchiveWriter::ArchiveWriter(std::filesystem::path dir, bool truncate) : paths_{std::move(dir)} {
  std::filesystem::create_directories(paths_.dir);
  for (const auto& p : {paths_.posts(), paths_.snapshots(), paths_.events()}) {
    if (truncate || !std::filesystem::exists(p)) write_text_file(p, "");
  }
}

void ArchiveWriter::append(const PollBatch& batch) {
  append_lines(paths_.posts(), to_jsonl(batch.posts));
  append_lines(paths_.snapshots(), to_jsonl(batch.snapshots));
  std::string events;
  for (const auto& e : batch.events) events += dump_line(event_to_json(e)) + "\n";
  append_lines(paths_.events(), events);
}

void ArchiveWriter::write_channels(const std::vector<ChannelRecord>& channels) {
  write_text_file(paths_.channels(), to_jsonl(channels));
}

void read_archive(const std::filesystem::path& path,
                  const std::function<void(const PostRecord&)>& sink) {
  for_each_jsonl(path, [&](std::size_t, const json& j) {
    auto post = j.get<PostRecord>();
    if (auto v = validate_record(post); !v.empty()) throw InputError(describe(v));
    sink(post);
  });
}

std::vector<PostRecord> read_archive(const std::filesystem::path& path) {
  std::vector<PostRecord> out;
  read_archive(path, [&](const PostRecord& p) { out.push_back(p); });
  return out;
}

std::vector<ChannelRecord> read_channels(const std::filesystem::path& path) {
  std::vector<ChannelRecord> out;
  for_each_jsonl(path, [&](std::size_t, const json& j) {
    auto rec = j.get<ChannelRecord>();
    if (auto v = validate_record(rec); !v.empty()) throw InputError(describe(v));
    out.push_back(std::move(rec));
  });
  return out;
}

std::vector<EngagementSnapshot> read_snapshots(const std::filesystem::path& path) {
  std::vector<EngagementSnapshot> out;
  for_each_jsonl(path, [&](std::size_t, const json& j) {
    auto rec = j.get<EngagementSnapshot>();
    if (auto v = validate_record(rec); !v.empty()) throw InputError(describe(v));
    out.push_back(std::move(rec));
  });
  return out;
}

std::vector<IngestEvent> read_events(const std::filesystem::path& path) {
  std::vector<IngestEvent> out;
  for_each_jsonl(path, [&](std::size_t, const json& j) {
    IngestEvent e;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "Skip") e.kind = IngestEventKind::Skip;
    else if (kind == "Tombstone") e.kind = IngestEventKind::Tombstone;
    else if (kind == "ChannelDeleted") e.kind = IngestEventKind::ChannelDeleted;
    else throw InputError("unknown event kind '" + kind + "'");
    e.channel_id = j.at("channel_id").get<std::string>();
    if (j.contains("post_id")) e.post_id = j["post_id"].get<std::int64_t>();
    e.at = j.at("at").get<Timestamp>();
    e.reason = j.value("reason", "");
    out.push_back(std::move(e));
  });
  return out;
}

std::vector<PostRecord> latest_posts(const std::vector<PostRecord>& log) {
  std::map<std::pair<std::string, std::int64_t>, const PostRecord*> latest;
  for (const auto& p : log) latest[{p.channel_id, p.post_id}] = &p;
  std::vector<PostRecord> out;
  out.reserve(latest.size());
  for (const auto& [key, p] : latest) out.push_back(*p);
  return out;
}

ArchiveStats archive_stats(const std::vector<ChannelRecord>& channels,
                           const std::vector<PostRecord>& latest) {
  ArchiveStats s;
  std::set<std::string> ids;
  for (const auto& c : channels) ids.insert(c.channel_id);
  for (const auto& p : latest) {
    ids.insert(p.channel_id);
    if (!s.time_range) {
      s.time_range = std::make_pair(p.posted_at, p.posted_at);
    } else {
      s.time_range->first = std::min(s.time_range->first, p.posted_at);
      s.time_range->second = std::max(s.time_range->second, p.posted_at);
    }
    bool any_reaction = std::any_of(p.reactions.begin(), p.reactions.end(),
                                    [](const auto& kv) { return kv.second > 0; });
    if (any_reaction) ++s.posts_with_reactions;
  }
  s.channels = ids.size();
  s.posts = latest.size();
  return s;
}

std::size_t replay_into_archive(ReplaySource& source, std::span<const std::string> channels,
                                const PipelineConfig& config, ArchiveWriter& writer) {
  Poller poller;
  std::size_t cycles = 0;
  const Timestamp last = source.last_event_time();
  Timestamp t = std::max(source.now(), source.first_event_time());
  while (true) {
    source.advance_to(t);
    writer.append(poller.poll_cycle(source, channels, config));
    ++cycles;
    if (t >= last) break;
    t += config.refresh_interval_s;
  }
  std::vector<ChannelRecord> records;
  for (const auto& c : channels) {
    if (auto rec = source.channel_info(c)) records.push_back(*rec);
  }
  writer.write_channels(records);
  return cycles;
}

}  // namespace darkgram
