#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "darkgram/domains.hpp"
#include "darkgram/model.hpp"

namespace darkgram {

// ---------------------------------------------------------------------------
// Growth

struct GrowthObservation {
  std::string channel_id;
  Timestamp window_start = 0;
  Timestamp window_end = 0;
  std::int64_t start_subs = 0;
  std::int64_t end_subs = 0;
  double growth_rate = 0.0;  // (end - start) / start

  friend bool operator==(const GrowthObservation&, const GrowthObservation&) = default;
};

struct SkippedWindow {
  std::string channel_id;
  Timestamp window_start = 0;
  std::string reason;
};

struct GrowthSeries {
  std::vector<GrowthObservation> observations;
  std::vector<SkippedWindow> skipped;
};

/// Subscriber count in effect at `t`: the latest snapshot taken at or before
/// t, provided it is no older than `tolerance` seconds.
std::optional<std::int64_t> subscribers_at(const std::vector<EngagementSnapshot>& channel_snapshots,
                                           Timestamp t, Timestamp tolerance);

/// Consecutive, non-overlapping windows of growth_window_days per channel,
/// starting at the channel's first snapshot. An endpoint needs a snapshot
/// within one refresh interval before it; windows missing one are skipped,
/// as are windows starting from zero subscribers.
GrowthSeries growth_series(const std::vector<EngagementSnapshot>& snapshots, const PipelineConfig& config);

/// One window anchored at `start` (e.g. a post's timestamp).
std::optional<GrowthObservation> anchored_growth(const std::vector<EngagementSnapshot>& channel_snapshots,
                                                 Timestamp start, const PipelineConfig& config);

struct GrowthComparison {
  double median_a = 0.0;
  double median_b = 0.0;
  double p_value = 1.0;
  double u = 0.0;
  bool exact = false;
};

/// Two-sided Mann-Whitney on growth rates. Each group needs two or more
/// observations (InputError otherwise).
GrowthComparison compare_growth(const std::vector<double>& group_a, const std::vector<double>& group_b);

struct ForwardAssociation {
  std::optional<double> median_high;
  std::optional<double> median_low;
  std::optional<double> p_value;  // only when both groups can be tested
  std::size_t n_high = 0;
  std::size_t n_low = 0;
};

/// An observation is "high" when any post of its channel published inside
/// its window was forwarded more than `threshold` times.
ForwardAssociation forward_growth_association(const std::vector<PostRecord>& posts,
                                              const std::vector<GrowthObservation>& observations,
                                              std::int64_t threshold = 100);

// ---------------------------------------------------------------------------
// Migration

struct MigrationEvent {
  std::string old_channel;
  std::string new_channel;
  Timestamp announced_at = 0;
  std::int64_t baseline_subs = 0;
  std::optional<std::int64_t> migrated_subs;  // absent without new-channel snapshots
  std::optional<double> rate;                 // migrated / baseline, unclamped
  bool exceeds_base = false;                  // rate > 1

  friend bool operator==(const MigrationEvent&, const MigrationEvent&) = default;
};

/// Announcements of replacement channels in removed channels. A post of a
/// channel in `removed` linking (t.me) to a channel created within
/// migration_creation_window_days of the post is a migration. Gain is the
/// new channel's subscriber increase over growth_window_days after the
/// announcement; the baseline is the old channel's count at announcement.
/// Only the first announcement per (old, new) pair counts.
std::vector<MigrationEvent> detect_migration(const std::vector<PostRecord>& posts,
                                             const std::vector<EngagementSnapshot>& snapshots,
                                             const std::vector<ChannelRecord>& channels,
                                             const std::set<std::string>& removed,
                                             const PipelineConfig& config);

// ---------------------------------------------------------------------------
// Reactions and replies

using EmojiCount = std::pair<std::string, std::int64_t>;

/// Summed reaction counts, by count descending then emoji ascending.
std::vector<EmojiCount> emoji_distribution(const std::vector<PostRecord>& posts);
/// Share of all reactions held by the top k emojis; none with no reactions.
std::optional<double> top_k_share(const std::vector<EmojiCount>& ranked, std::size_t k);

struct ReplyStats {
  std::optional<double> fraction_without_replies;  // none for no posts
  std::optional<double> median_words;
  std::optional<double> mean_words;
  std::size_t replies = 0;
};

/// A post counts as without replies when it has none or its channel has
/// replies disabled. Words are whitespace-delimited.
ReplyStats reply_stats(const std::vector<PostRecord>& posts, const std::vector<ChannelRecord>& channels);

// ---------------------------------------------------------------------------
// Piracy damage

enum class Pricing { Freemium, Premium };
std::string_view to_string(Pricing p);

struct PriceModel {
  std::string app_id;
  Pricing pricing = Pricing::Premium;
  std::int64_t price_cents = 0;  // subscription price for Freemium apps
};

struct AppListing {
  std::string category;
  PriceModel price;
  std::int64_t views = 0;  // summed over every post sharing the app
};

struct DamageRow {
  std::string category_name;
  std::size_t app_count = 0;
  std::int64_t min_cents = 0;
  std::int64_t max_cents = 0;
  std::int64_t median_cents = 0;  // half-up when averaging two middles
  std::int64_t mean_cents = 0;    // half-up
  std::int64_t loss_cents = 0;

  friend bool operator==(const DamageRow&, const DamageRow&) = default;
};

struct DamageTable {
  std::vector<DamageRow> rows;  // by category name
  DamageRow overall;
  double conversion_rate = 0.10;

  /// Category (Count),Min,Max,Median,Mean,<rate>% conversion
  std::string to_csv() const;
};

/// Converted downloads: views x rate rounded half-up, computed in integer
/// basis points so results are exact.
std::int64_t converted_downloads(std::int64_t views, double conversion_rate);
/// loss = converted_downloads(views) x price.
std::int64_t app_loss_cents(const AppListing& app, double conversion_rate);
/// Negative views or prices raise InputError.
DamageTable estimate_damage(const std::vector<AppListing>& apps, const PipelineConfig& config);

/// "$1,234.56"
std::string format_usd(std::int64_t cents);

// ---------------------------------------------------------------------------
// Domain overlap

struct OverlapReport {
  std::set<std::string> left_domains;
  std::set<std::string> right_domains;
  std::size_t intersection_count = 0;
  std::optional<double> ratio;  // |left ∩ right| / |left|; none when left is empty
};

/// Left: URLs. Right: free texts whose URLs are extracted. Both reduce to
/// registrable domains.
OverlapReport forum_overlap(const std::vector<std::string>& left_urls,
                            const std::vector<std::string>& right_texts,
                            const PublicSuffixList& psl = PublicSuffixList::bundled());

nlohmann::json to_json_report(const OverlapReport& r);
nlohmann::json to_json_report(const GrowthSeries& g);

}  // namespace darkgram
