#include "darkgram/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <tuple>

#include "darkgram/discover.hpp"
#include "darkgram/errors.hpp"
#include "darkgram/ingest.hpp"
#include "darkgram/stats.hpp"
#include "darkgram/text.hpp"

namespace darkgram {

namespace {

using SnapshotsByChannel = std::map<std::string, std::vector<EngagementSnapshot>>;

SnapshotsByChannel by_channel(const std::vector<EngagementSnapshot>& snapshots) {
  SnapshotsByChannel out;
  for (const auto& s : snapshots) out[s.channel_id].push_back(s);
  for (auto& [id, v] : out) {
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.taken_at < b.taken_at; });
  }
  return out;
}

constexpr Timestamp kAnyAge = std::numeric_limits<Timestamp>::max() / 4;

}  // namespace

std::optional<std::int64_t> subscribers_at(const std::vector<EngagementSnapshot>& snaps, Timestamp t,
                                           Timestamp tolerance) {
  auto it = std::upper_bound(snaps.begin(), snaps.end(), t,
                             [](Timestamp v, const EngagementSnapshot& s) { return v < s.taken_at; });
  if (it == snaps.begin()) return std::nullopt;
  --it;
  if (t - it->taken_at > tolerance) return std::nullopt;
  return it->subscribers;
}

GrowthSeries growth_series(const std::vector<EngagementSnapshot>& snapshots, const PipelineConfig& config) {
  GrowthSeries out;
  const Timestamp window = config.growth_window_days * kSecondsPerDay;
  if (window <= 0) throw InputError("growth_window_days must be positive");
  for (const auto& [id, snaps] : by_channel(snapshots)) {
    const Timestamp t0 = snaps.front().taken_at;
    const Timestamp last = snaps.back().taken_at;
    for (Timestamp start = t0; start + window <= last; start += window) {
      const auto s = subscribers_at(snaps, start, config.refresh_interval_s);
      const auto e = subscribers_at(snaps, start + window, config.refresh_interval_s);
      if (!s || !e) {
        out.skipped.push_back({id, start, "missing endpoint snapshot"});
        continue;
      }
      if (*s == 0) {
        out.skipped.push_back({id, start, "zero subscribers at window start"});
        continue;
      }
      out.observations.push_back(GrowthObservation{
          id, start, start + window, *s, *e, static_cast<double>(*e - *s) / static_cast<double>(*s)});
    }
  }
  return out;
}

std::optional<GrowthObservation> anchored_growth(const std::vector<EngagementSnapshot>& snaps, Timestamp start,
                                                 const PipelineConfig& config) {
  if (snaps.empty()) return std::nullopt;
  const Timestamp window = config.growth_window_days * kSecondsPerDay;
  const auto s = subscribers_at(snaps, start, config.refresh_interval_s);
  const auto e = subscribers_at(snaps, start + window, config.refresh_interval_s);
  if (!s || !e || *s == 0) return std::nullopt;
  return GrowthObservation{snaps.front().channel_id, start, start + window, *s, *e,
                           static_cast<double>(*e - *s) / static_cast<double>(*s)};
}

GrowthComparison compare_growth(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) {
    throw InputError("compare_growth needs at least two observations per group (got " +
                     std::to_string(a.size()) + " and " + std::to_string(b.size()) + ")");
  }
  const auto mw = mann_whitney_u(a, b);
  return GrowthComparison{*median(a), *median(b), mw.p_value, mw.u, mw.exact};
}

ForwardAssociation forward_growth_association(const std::vector<PostRecord>& posts,
                                              const std::vector<GrowthObservation>& observations,
                                              std::int64_t threshold) {
  if (observations.empty()) throw InputError("forward_growth_association needs observations");
  std::map<std::string, std::vector<std::pair<Timestamp, std::int64_t>>> forwards;
  for (const auto& p : posts) forwards[p.channel_id].emplace_back(p.posted_at, p.forwards);

  std::vector<double> high, low;
  for (const auto& o : observations) {
    bool is_high = false;
    if (auto it = forwards.find(o.channel_id); it != forwards.end()) {
      is_high = std::any_of(it->second.begin(), it->second.end(), [&](const auto& pf) {
        return pf.first >= o.window_start && pf.first < o.window_end && pf.second > threshold;
      });
    }
    (is_high ? high : low).push_back(o.growth_rate);
  }
  ForwardAssociation r;
  r.n_high = high.size();
  r.n_low = low.size();
  r.median_high = median(high);
  r.median_low = median(low);
  if (high.size() >= 2 && low.size() >= 2) r.p_value = compare_growth(high, low).p_value;
  return r;
}

// ---------------------------------------------------------------------------
// Migration

std::vector<MigrationEvent> detect_migration(const std::vector<PostRecord>& posts,
                                             const std::vector<EngagementSnapshot>& snapshots,
                                             const std::vector<ChannelRecord>& channels,
                                             const std::set<std::string>& removed,
                                             const PipelineConfig& config) {
  std::map<std::string, const ChannelRecord*> records;
  for (const auto& c : channels) records[c.channel_id] = &c;
  const auto snaps = by_channel(snapshots);
  static const std::vector<EngagementSnapshot> kNone;
  auto snaps_of = [&](const std::string& id) -> const std::vector<EngagementSnapshot>& {
    auto it = snaps.find(id);
    return it == snaps.end() ? kNone : it->second;
  };

  std::vector<const PostRecord*> ordered;
  for (const auto& p : posts) {
    if (removed.contains(p.channel_id)) ordered.push_back(&p);
  }
  std::sort(ordered.begin(), ordered.end(), [](const PostRecord* a, const PostRecord* b) {
    return std::tie(a->posted_at, a->channel_id, a->post_id) < std::tie(b->posted_at, b->channel_id, b->post_id);
  });

  const Timestamp creation_window = config.migration_creation_window_days * kSecondsPerDay;
  const Timestamp window = config.growth_window_days * kSecondsPerDay;
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<MigrationEvent> out;
  for (const PostRecord* p : ordered) {
    for (const auto& target : harvest_tme_links({*p}, {p->channel_id})) {
      if (is_invite_link(target)) continue;
      auto rec = records.find(target);
      if (rec == records.end()) continue;
      if (std::llabs(rec->second->created_at - p->posted_at) > creation_window) continue;
      if (!seen.insert({p->channel_id, target}).second) continue;

      const auto baseline = subscribers_at(snaps_of(p->channel_id), p->posted_at, kAnyAge);
      if (!baseline || *baseline <= 0) continue;

      MigrationEvent ev;
      ev.old_channel = p->channel_id;
      ev.new_channel = target;
      ev.announced_at = p->posted_at;
      ev.baseline_subs = *baseline;
      const auto& new_snaps = snaps_of(target);
      const auto end = subscribers_at(new_snaps, p->posted_at + window, config.refresh_interval_s);
      if (end) {
        const auto start = subscribers_at(new_snaps, p->posted_at, kAnyAge).value_or(0);
        ev.migrated_subs = std::max<std::int64_t>(0, *end - start);
        ev.rate = static_cast<double>(*ev.migrated_subs) / static_cast<double>(ev.baseline_subs);
        ev.exceeds_base = *ev.rate > 1.0;
      }
      out.push_back(std::move(ev));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reactions and replies

std::vector<EmojiCount> emoji_distribution(const std::vector<PostRecord>& posts) {
  std::map<std::string, std::int64_t> totals;
  for (const auto& p : posts) {
    for (const auto& [emoji, n] : p.reactions) totals[emoji] += n;
  }
  std::vector<EmojiCount> ranked(totals.begin(), totals.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return ranked;
}

std::optional<double> top_k_share(const std::vector<EmojiCount>& ranked, std::size_t k) {
  std::int64_t total = 0, top = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    total += ranked[i].second;
    if (i < k) top += ranked[i].second;
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(top) / static_cast<double>(total);
}

ReplyStats reply_stats(const std::vector<PostRecord>& posts, const std::vector<ChannelRecord>& channels) {
  std::map<std::string, bool> enabled;
  for (const auto& c : channels) enabled[c.channel_id] = c.replies_enabled;
  ReplyStats r;
  std::size_t without = 0;
  std::vector<double> words;
  for (const auto& p : posts) {
    auto it = enabled.find(p.channel_id);
    const bool closed = it != enabled.end() && !it->second;
    if (closed || p.replies.empty()) {
      ++without;
      continue;
    }
    for (const auto& reply : p.replies) words.push_back(static_cast<double>(whitespace_split(reply).size()));
  }
  if (!posts.empty()) r.fraction_without_replies = static_cast<double>(without) / static_cast<double>(posts.size());
  r.replies = words.size();
  r.median_words = median(words);
  r.mean_words = mean(words);
  return r;
}

// ---------------------------------------------------------------------------
// Damage

std::string_view to_string(Pricing p) { return p == Pricing::Freemium ? "Freemium" : "Premium"; }

std::int64_t converted_downloads(std::int64_t views, double conversion_rate) {
  if (views < 0) throw InputError("views must be non-negative");
  if (!(conversion_rate >= 0.0 && conversion_rate <= 1.0)) throw InputError("conversion rate outside [0,1]");
  const std::int64_t bp = std::llround(conversion_rate * 10000.0);
  return (views * bp + 5000) / 10000;
}

std::int64_t app_loss_cents(const AppListing& app, double conversion_rate) {
  if (app.price.price_cents < 0) throw InputError("price must be non-negative: " + app.price.app_id);
  return converted_downloads(app.views, conversion_rate) * app.price.price_cents;
}

namespace {

DamageRow damage_row(std::string name, const std::vector<const AppListing*>& apps, double rate) {
  DamageRow row;
  row.category_name = std::move(name);
  row.app_count = apps.size();
  if (apps.empty()) return row;
  std::vector<std::int64_t> prices;
  std::int64_t sum = 0;
  for (const auto* a : apps) {
    prices.push_back(a->price.price_cents);
    sum += a->price.price_cents;
    row.loss_cents += app_loss_cents(*a, rate);
  }
  std::sort(prices.begin(), prices.end());
  const auto n = static_cast<std::int64_t>(prices.size());
  row.min_cents = prices.front();
  row.max_cents = prices.back();
  row.median_cents = n % 2 ? prices[n / 2] : (prices[n / 2 - 1] + prices[n / 2] + 1) / 2;
  row.mean_cents = (2 * sum + n) / (2 * n);
  return row;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

DamageTable estimate_damage(const std::vector<AppListing>& apps, const PipelineConfig& config) {
  std::map<std::string, std::vector<const AppListing*>> groups;
  std::vector<const AppListing*> all;
  for (const auto& a : apps) {
    if (a.views < 0) throw InputError("negative views for app " + a.price.app_id);
    if (a.price.price_cents < 0) throw InputError("negative price for app " + a.price.app_id);
    groups[a.category].push_back(&a);
    all.push_back(&a);
  }
  DamageTable t;
  t.conversion_rate = config.conversion_rate;
  std::int64_t total_loss = 0;
  for (const auto& [name, members] : groups) {
    t.rows.push_back(damage_row(name, members, config.conversion_rate));
    total_loss += t.rows.back().loss_cents;
  }
  t.overall = damage_row("Overall", all, config.conversion_rate);
  t.overall.loss_cents = total_loss;
  return t;
}

std::string format_usd(std::int64_t cents) {
  const bool neg = cents < 0;
  std::uint64_t v = neg ? static_cast<std::uint64_t>(-(cents + 1)) + 1 : static_cast<std::uint64_t>(cents);
  std::string dollars = std::to_string(v / 100);
  for (int i = static_cast<int>(dollars.size()) - 3; i > 0; i -= 3) dollars.insert(static_cast<std::size_t>(i), ",");
  char frac[4];
  std::snprintf(frac, sizeof frac, "%02u", static_cast<unsigned>(v % 100));
  return std::string(neg ? "-$" : "$") + dollars + "." + frac;
}

std::string DamageTable::to_csv() const {
  char pct[32];
  std::snprintf(pct, sizeof pct, "%g", static_cast<double>(std::llround(conversion_rate * 10000.0)) / 100.0);
  std::string out = "Category (Count),Min,Max,Median,Mean," + std::string(pct) + "% conversion\n";
  auto line = [&](const DamageRow& r) {
    out += csv_cell(r.category_name + " (" + std::to_string(r.app_count) + ")");
    for (auto v : {r.min_cents, r.max_cents, r.median_cents, r.mean_cents, r.loss_cents}) {
      out += ',';
      out += csv_cell(format_usd(v));
    }
    out += '\n';
  };
  for (const auto& r : rows) line(r);
  line(overall);
  return out;
}

// ---------------------------------------------------------------------------
// Overlap

OverlapReport forum_overlap(const std::vector<std::string>& left_urls, const std::vector<std::string>& right_texts,
                            const PublicSuffixList& psl) {
  OverlapReport r;
  for (const auto& u : left_urls) {
    auto d = registrable_domain_of_url(u, psl);
    if (!d && u.find("://") == std::string::npos) d = registrable_domain_of_url("http://" + u, psl);
    if (d) r.left_domains.insert(*d);
  }
  for (const auto& text : right_texts) {
    for (const auto& u : extract_links(text)) {
      if (auto d = registrable_domain_of_url(u, psl)) r.right_domains.insert(*d);
    }
  }
  for (const auto& d : r.left_domains) {
    if (r.right_domains.contains(d)) ++r.intersection_count;
  }
  if (!r.left_domains.empty()) {
    r.ratio = static_cast<double>(r.intersection_count) / static_cast<double>(r.left_domains.size());
  }
  return r;
}

nlohmann::json to_json_report(const OverlapReport& r) {
  nlohmann::json j{{"left_count", r.left_domains.size()},
                   {"right_count", r.right_domains.size()},
                   {"intersection_count", r.intersection_count},
                   {"ratio", r.ratio ? nlohmann::json(*r.ratio) : nlohmann::json()}};
  return j;
}

nlohmann::json to_json_report(const GrowthSeries& g) {
  nlohmann::json obs = nlohmann::json::array(), skipped = nlohmann::json::array();
  for (const auto& o : g.observations) {
    obs.push_back({{"channel_id", o.channel_id},
                   {"window_start", o.window_start},
                   {"window_end", o.window_end},
                   {"start_subs", o.start_subs},
                   {"end_subs", o.end_subs},
                   {"growth_rate", o.growth_rate}});
  }
  for (const auto& s : g.skipped) {
    skipped.push_back({{"channel_id", s.channel_id}, {"window_start", s.window_start}, {"reason", s.reason}});
  }
  return {{"observations", obs}, {"skipped", skipped}};
}

}  // namespace darkgram
