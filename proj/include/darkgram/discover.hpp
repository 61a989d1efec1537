#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "darkgram/classify.hpp"
#include "darkgram/ingest.hpp"
#include "darkgram/model.hpp"

namespace darkgram {

/// Channel ids named by t.me links in `text`. Public handles come back
/// lowercased; invite links come back as "joinchat/<code>" with the code's
/// case kept (codes are case-sensitive). Order of first appearance, no
/// duplicates. Accepts t.me, telegram.me, with or without scheme, and the
/// /s/ preview form.
std::vector<std::string> tme_links_in_text(std::string_view text);

bool is_invite_link(std::string_view channel_id);

/// t.me channel ids in post texts and link lists, minus `exclude`.
std::vector<std::string> harvest_tme_links(const std::vector<PostRecord>& posts,
                                           const std::set<std::string>& exclude = {});

enum class CandidateState { Queued, Evaluated, Deferred, Flagged, Benign };
std::string_view to_string(CandidateState s);

struct DiscoveredFrom {
  SourceKind kind = SourceKind::Replay;
  std::string origin;  // channel id or external group id; empty for seeds

  friend bool operator==(const DiscoveredFrom&, const DiscoveredFrom&) = default;
};

struct CandidateChannel {
  std::string channel_id;
  DiscoveredFrom discovered_from;
  Timestamp first_seen = 0;
  CandidateState state = CandidateState::Queued;

  friend bool operator==(const CandidateChannel&, const CandidateChannel&) = default;
};

/// Allowed moves: Queued -> Evaluated | Deferred, Evaluated -> Flagged |
/// Benign, Deferred -> Queued.
bool transition_allowed(CandidateState from, CandidateState to);

enum class FlagDecision { Malicious, NotFlagged, Deferred };
std::string_view to_string(FlagDecision d);

struct PostEvidence {
  std::int64_t post_id = 0;
  Timestamp posted_at = 0;
  ClassificationResult result;

  friend bool operator==(const PostEvidence&, const PostEvidence&) = default;
};

struct ChannelFlagDecision {
  std::string channel_id;
  std::int64_t posts_evaluated = 0;
  std::int64_t flagged_count = 0;
  std::vector<PostEvidence> per_post;  // newest first
  FlagDecision decision = FlagDecision::Deferred;
  std::optional<CacCategory> majority_category;
  Timestamp evaluated_at = 0;

  friend bool operator==(const ChannelFlagDecision&, const ChannelFlagDecision&) = default;
};

void to_json(nlohmann::json& j, const ChannelFlagDecision& d);
void from_json(const nlohmann::json& j, ChannelFlagDecision& d);
void to_json(nlohmann::json& j, const CandidateChannel& c);
void from_json(const nlohmann::json& j, CandidateChannel& c);

/// Applies the flag rule to already classified posts (newest first). Only
/// the newest channel_eval_posts are considered; flagging counts stage-1
/// positives. Fewer posts than channel_eval_posts is always Deferred.
ChannelFlagDecision decide_channel(const std::string& channel_id,
                                   std::vector<PostEvidence> newest_first,
                                   const PipelineConfig& config, Timestamp now);

/// Fetches the newest channel_eval_posts posts and classifies each. Source
/// errors propagate (DeletedError vs TransientError).
ChannelFlagDecision evaluate_channel(ChannelSource& source, const std::string& channel_id,
                                     const ClassifierBackend& model, const PipelineConfig& config);

/// Candidates from links found outside the platform, e.g. public groups
/// elsewhere. Same filtering as harvest_tme_links; the first origin of a
/// repeated link is kept.
std::vector<CandidateChannel> ingest_external_links(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& records,
    const std::set<std::string>& exclude = {}, Timestamp now = 0);

struct FrontierOptions {
  /// Already monitored channels: never candidates.
  std::set<std::string> monitored;
  /// Posts fetched from seeds and flagged channels for link harvesting.
  std::size_t harvest_depth = 200;
  std::size_t concurrency = 4;
  /// Recorded in discovered_from for links harvested from channel posts.
  SourceKind source_kind = SourceKind::Replay;
};

struct FrontierError {
  std::string channel_id;
  std::string kind;  // "deleted" or "transient"
  std::string message;
  Timestamp at = 0;
};

/// Breadth-first discovery. Seeds are trusted: their links are always
/// harvested and they receive decisions too. A discovered channel expands
/// the frontier only when Flagged. Invite links are recorded, never joined.
/// Deferred channels come due again recheck_days after their evaluation.
class Frontier {
 public:
  Frontier(const PipelineConfig& config, FrontierOptions options = {});

  void add_seeds(const std::vector<std::string>& seeds, Timestamp now);
  /// Queues external candidates not already known.
  void add_candidates(const std::vector<CandidateChannel>& candidates);

  /// Evaluates queued channels, level by level, until the queue is empty.
  /// Returns how many evaluations ran.
  std::size_t run(ChannelSource& source, const ClassifierBackend& model);

  /// Requeues deferred channels whose recheck time is <= now.
  std::size_t requeue_due(Timestamp now);
  std::optional<Timestamp> next_recheck() const;

  /// Latest decision per channel, by channel id.
  std::vector<ChannelFlagDecision> decisions() const;
  std::vector<CandidateChannel> candidates() const;
  const std::vector<std::string>& invite_links() const { return invites_; }
  const std::vector<FrontierError>& errors() const { return errors_; }
  std::size_t evaluations() const { return evaluations_; }

 private:
  struct Node {
    CandidateChannel candidate;
    bool seed = false;
    bool gone = false;  // deleted on the platform
    std::optional<Timestamp> evaluated_at;
    std::optional<Timestamp> retry_at;  // after a transient failure
  };

  void discover(const std::string& id, const DiscoveredFrom& from, Timestamp now);
  bool set_state(Node& n, CandidateState to);

  PipelineConfig config_;
  FrontierOptions options_;
  std::map<std::string, Node> nodes_;
  std::vector<std::string> queue_;
  std::map<std::string, ChannelFlagDecision> decisions_;
  std::vector<std::string> invites_;
  std::set<std::string> invite_set_;
  std::vector<FrontierError> errors_;
  std::size_t evaluations_ = 0;
};

struct FrontierResult {
  std::vector<ChannelFlagDecision> decisions;
  std::vector<CandidateChannel> candidates;
  std::vector<std::string> invite_links;
  std::vector<FrontierError> errors;
};

/// One discovery pass from `seeds` until the frontier is empty.
FrontierResult run_frontier(const std::vector<std::string>& seeds, ChannelSource& source,
                            const ClassifierBackend& model, const PipelineConfig& config,
                            const FrontierOptions& options = {});

/// Discovery with rechecks: after each pass the clock is moved to the next
/// recheck time via `advance_clock` until no deferred channel comes due
/// before `until`.
FrontierResult run_frontier_with_rechecks(const std::vector<std::string>& seeds, ChannelSource& source,
                                          const ClassifierBackend& model, const PipelineConfig& config,
                                          const std::function<void(Timestamp)>& advance_clock,
                                          Timestamp until, const FrontierOptions& options = {},
                                          const std::vector<CandidateChannel>& external = {});

}  // namespace darkgram
