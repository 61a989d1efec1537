#pragma once

// Planted fixtures and brute-force oracles shared by the unit tests and the
// acceptance binary. The oracles avoid the library's helpers on purpose.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "darkgram/analytics.hpp"
#include "darkgram/model.hpp"
#include "darkgram/report.hpp"
#include "darkgram/scan.hpp"

namespace oracle {

using darkgram::ChannelRecord;
using darkgram::EngagementSnapshot;
using darkgram::PostRecord;
using darkgram::Timestamp;

// --- planted fixtures ------------------------------------------------------

/// 68 distinct emojis, 1000 reactions, top ten hold 748 of them.
std::vector<PostRecord> planted_emoji_posts(std::uint64_t seed);

struct ReplyFixture {
  std::vector<PostRecord> posts;
  std::vector<ChannelRecord> channels;
};
/// 25 replies: median 4 words, mean 229 / 25 = 9.16. Plus posts without
/// replies and a closed channel whose replies must be ignored.
ReplyFixture planted_reply_fixture(std::uint64_t seed);

struct GrowthFixture {
  std::vector<PostRecord> posts;
  std::vector<EngagementSnapshot> snapshots;
};
/// Heavily forwarded channels grow with median 0.274, the rest 0.121.
GrowthFixture planted_forward_fixture();

struct MigrationFixture {
  std::vector<PostRecord> posts;
  std::vector<EngagementSnapshot> snapshots;
  std::vector<ChannelRecord> channels;
  std::set<std::string> removed;
};
/// Base 10000, the new channel gains 15000 within the week.
MigrationFixture planted_migration_fixture();

/// Apps with hand-computed rows; see kDamageCsv.
std::vector<darkgram::AppListing> damage_ledger_apps();
extern const char* const kDamageCsv;
extern const std::int64_t kDamageOverallCents;

/// Left URLs with `left` distinct registrable domains; right texts mention
/// exactly `shared` of them plus unrelated ones. Duplicates and
/// subdomains are mixed in.
std::pair<std::vector<std::string>, std::vector<std::string>> overlap_fixture(std::size_t left, std::size_t shared,
                                                                               std::uint64_t seed);

/// 339 entries, 64 Removed; the five removals with an outcome time have
/// response days {3,4,4,5,9}.
std::vector<darkgram::DisclosureLedgerEntry> planted_ledger();

/// `malicious` Malicious verdicts among `total`, distinct URLs.
std::vector<darkgram::UrlVerdict> planted_verdicts(std::size_t total, std::size_t malicious, std::uint64_t seed);

// --- random fixtures -------------------------------------------------------

struct RandomWorld {
  std::vector<ChannelRecord> channels;
  std::vector<PostRecord> posts;
  std::vector<EngagementSnapshot> snapshots;
  std::set<std::string> removed;
};
/// At most `max_posts` posts over a dozen channels and about a month.
RandomWorld random_world(std::uint64_t seed, std::size_t max_posts = 1000);

// --- brute-force oracles -----------------------------------------------------

std::map<std::string, std::int64_t> brute_emoji_totals(const std::vector<PostRecord>& posts);
/// Sum of the k largest counts over the total; none without reactions.
std::optional<double> brute_top_k(const std::map<std::string, std::int64_t>& totals, std::size_t k);

struct BruteReplies {
  std::optional<double> fraction_without;
  std::optional<double> median_words;
  std::optional<double> mean_words;
  std::size_t replies = 0;
};
BruteReplies brute_replies(const std::vector<PostRecord>& posts, const std::vector<ChannelRecord>& channels);

/// (channel, window_start) -> (start_subs, end_subs)
std::map<std::pair<std::string, Timestamp>, std::pair<std::int64_t, std::int64_t>> brute_growth(
    const std::vector<EngagementSnapshot>& snapshots, const darkgram::PipelineConfig& cfg);

struct BruteMigration {
  std::string old_channel, new_channel;
  Timestamp at = 0;
  std::int64_t base = 0;
  std::optional<std::int64_t> gain;
};
std::vector<BruteMigration> brute_migration(const RandomWorld& w, const darkgram::PipelineConfig& cfg);

/// Exact two-sided permutation p-value of the Mann-Whitney U statistic by
/// enumerating every split of the pooled sample.
double permutation_p(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace oracle
