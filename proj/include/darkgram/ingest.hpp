#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "darkgram/model.hpp"

namespace darkgram {

// ---------------------------------------------------------------------------
// Text extraction

/// Absolute http/https URLs in order of first appearance, deduplicated.
/// Scheme and host are lowercased, fragments stripped, trailing sentence
/// punctuation trimmed.
std::vector<std::string> extract_links(std::string_view text);

/// Normalizes a single URL; nullopt if it is not an absolute http(s) URL
/// with a host.
std::optional<std::string> normalize_url(std::string_view url);

/// Lowercased host of a normalized URL (no port, no userinfo).
std::string url_host(std::string_view normalized_url);

/// @-mentions matching @[A-Za-z0-9_]{4,32}, returned lowercased without the
/// @. Email addresses are not mentions.
std::vector<std::string> extract_bot_refs(std::string_view text);

// ---------------------------------------------------------------------------
// Channel sources

/// Interchangeable access to a broadcast platform: replay fixtures in tests,
/// a live adapter in production. Errors: TransientError for unreachable,
/// DeletedError when the channel or post no longer exists.
class ChannelSource {
 public:
  virtual ~ChannelSource() = default;

  /// At most `n` posts, newest first.
  virtual std::vector<PostRecord> list_recent_posts(const std::string& channel_id,
                                                    std::size_t n) = 0;
  virtual PostRecord fetch_post(const std::string& channel_id, std::int64_t post_id) = 0;
  virtual EngagementSnapshot snapshot(const std::string& channel_id) = 0;
  virtual std::optional<ChannelRecord> channel_info(const std::string& channel_id) = 0;
  virtual Timestamp now() const = 0;
};

/// A source driven by a fixture script of timed responses. Each entry has a
/// virtual-clock field `t`; entries with t <= now() are in effect.
///
/// Entry types:
///   {"t":..,"type":"channel","channel":{ChannelRecord}}
///   {"t":..,"type":"post","post":{PostRecord}}            new or updated post
///   {"t":..,"type":"subscribers","channel_id":..,"subscribers":N}
///   {"t":..,"type":"delete_post","channel_id":..,"post_id":N}
///   {"t":..,"type":"delete_channel","channel_id":..}
///   {"t":..,"type":"outage","channel_id":..,"until":T}     transient failure
class ReplaySource final : public ChannelSource {
 public:
  struct Entry {
    Timestamp t = 0;
    std::string type;
    nlohmann::json payload;
  };

  explicit ReplaySource(std::vector<Entry> entries, Timestamp start = 0);
  static ReplaySource from_file(const std::filesystem::path& path);
  static ReplaySource from_jsonl(std::string_view text);

  /// Moves the virtual clock forward, applying every entry with t <= to.
  void advance_to(Timestamp to);
  Timestamp now() const override { return now_; }
  Timestamp first_event_time() const;
  Timestamp last_event_time() const;

  std::vector<PostRecord> list_recent_posts(const std::string& channel_id,
                                            std::size_t n) override;
  PostRecord fetch_post(const std::string& channel_id, std::int64_t post_id) override;
  EngagementSnapshot snapshot(const std::string& channel_id) override;
  std::optional<ChannelRecord> channel_info(const std::string& channel_id) override;

  std::vector<std::string> known_channels() const;

 private:
  struct ChannelState {
    std::optional<ChannelRecord> record;
    std::map<std::int64_t, PostRecord> posts;
    std::int64_t subscribers = 0;
    bool deleted = false;
    Timestamp outage_until = 0;
  };

  void apply(const Entry& e);
  ChannelState& reachable(const std::string& channel_id);

  std::vector<Entry> entries_;
  std::size_t cursor_ = 0;
  Timestamp now_ = 0;
  std::map<std::string, ChannelState> channels_;
};

// ---------------------------------------------------------------------------
// Polling

enum class IngestEventKind { Skip, Tombstone, ChannelDeleted };
std::string_view to_string(IngestEventKind k);

struct IngestEvent {
  IngestEventKind kind = IngestEventKind::Skip;
  std::string channel_id;
  std::optional<std::int64_t> post_id;
  Timestamp at = 0;
  std::string reason;

  friend bool operator==(const IngestEvent&, const IngestEvent&) = default;
};

struct PollBatch {
  Timestamp at = 0;
  std::vector<PostRecord> posts;
  std::vector<EngagementSnapshot> snapshots;
  std::vector<IngestEvent> events;
};

/// Drives refresh cycles. Keeps per-post refresh counters so that the stored
/// refresh_seq for every post runs 0,1,2,... without gaps.
class Poller {
 public:
  /// New posts get refresh_seq 0; every previously seen post is re-fetched
  /// with its counter incremented. Unreachable channels become Skip events
  /// and are retried next cycle. Precondition: `channels` non-empty.
  PollBatch poll_cycle(ChannelSource& source, std::span<const std::string> channels,
                       const PipelineConfig& config);

  std::int64_t refresh_count(const std::string& channel_id, std::int64_t post_id) const;

 private:
  struct PostKey {
    std::string channel_id;
    std::int64_t post_id;
    auto operator<=>(const PostKey&) const = default;
  };
  std::map<PostKey, std::int64_t> next_seq_;
  std::map<std::string, std::int64_t> newest_seen_;
  std::map<PostKey, bool> tombstoned_;
};

// ---------------------------------------------------------------------------
// Archives

/// Archive directory layout: posts.jsonl (append log of every refresh),
/// channels.jsonl, snapshots.jsonl, events.jsonl.
struct ArchivePaths {
  std::filesystem::path dir;
  std::filesystem::path posts() const { return dir / "posts.jsonl"; }
  std::filesystem::path channels() const { return dir / "channels.jsonl"; }
  std::filesystem::path snapshots() const { return dir / "snapshots.jsonl"; }
  std::filesystem::path events() const { return dir / "events.jsonl"; }
};

/// Single consumer of poll batches. Appends in batch order.
class ArchiveWriter {
 public:
  explicit ArchiveWriter(std::filesystem::path dir, bool truncate = true);
  void append(const PollBatch& batch);
  void write_channels(const std::vector<ChannelRecord>& channels);
  const ArchivePaths& paths() const { return paths_; }

 private:
  ArchivePaths paths_;
};

/// Streams PostRecords in file order. Malformed lines raise InputError
/// naming the line; invalid records raise InputError listing violations.
void read_archive(const std::filesystem::path& path,
                  const std::function<void(const PostRecord&)>& sink);
std::vector<PostRecord> read_archive(const std::filesystem::path& path);

std::vector<ChannelRecord> read_channels(const std::filesystem::path& path);
std::vector<EngagementSnapshot> read_snapshots(const std::filesystem::path& path);
std::vector<IngestEvent> read_events(const std::filesystem::path& path);

/// Last-write-wins view: the highest refresh_seq of every (channel, post),
/// ordered by channel then post_id.
std::vector<PostRecord> latest_posts(const std::vector<PostRecord>& log);

struct ArchiveStats {
  std::size_t channels = 0;
  std::size_t posts = 0;
  std::optional<std::pair<Timestamp, Timestamp>> time_range;
  std::size_t posts_with_reactions = 0;

  friend bool operator==(const ArchiveStats&, const ArchiveStats&) = default;
};

/// Stats over the materialized (latest) posts. `channels` counts distinct
/// channel ids appearing in either the channel list or the posts.
ArchiveStats archive_stats(const std::vector<ChannelRecord>& channels,
                           const std::vector<PostRecord>& latest);

/// Runs refresh cycles over a replay fixture at config.refresh_interval_s
/// from the first to the last event time and archives every batch. Returns
/// the number of cycles run.
std::size_t replay_into_archive(ReplaySource& source, std::span<const std::string> channels,
                                const PipelineConfig& config, ArchiveWriter& writer);

}  // namespace darkgram
