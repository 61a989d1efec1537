#include "darkgram/discover.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <mutex>
#include <thread>

#include "darkgram/errors.hpp"
#include "darkgram/log.hpp"
#include "darkgram/serialize.hpp"
#include "darkgram/text.hpp"

namespace darkgram {

namespace {

bool handle_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool code_char(char c) { return handle_char(c) || c == '-'; }

// Path segments of t.me that are platform features, not channels.
constexpr std::string_view kReserved[] = {"c",     "s",      "share",    "addstickers", "addemoji",
                                          "proxy", "socks",  "iv",       "addlist",     "bg",
                                          "login", "invoice", "boost",   "setlanguage", "contact",
                                          "addtheme", "confirmphone", "joinchat"};

bool reserved(std::string_view seg) {
  auto lower = to_lower(seg);
  return std::find(std::begin(kReserved), std::end(kReserved), lower) != std::end(kReserved);
}

std::size_t run_of(std::string_view s, std::size_t from, bool (*pred)(char)) {
  std::size_t i = from;
  while (i < s.size() && pred(s[i])) ++i;
  return i - from;
}

// Parses the path after "t.me/" at `p`. Returns the channel id or nothing.
std::optional<std::string> parse_tme_path(std::string_view text, std::size_t p) {
  auto path = text.substr(p);
  auto lower_starts = [&](std::string_view prefix) {
    return path.size() >= prefix.size() && to_lower(path.substr(0, prefix.size())) == prefix;
  };
  if (lower_starts("joinchat/")) {
    const auto n = run_of(path, 9, code_char);
    if (n == 0) return std::nullopt;
    return "joinchat/" + std::string(path.substr(9, n));
  }
  if (!path.empty() && path[0] == '+') {
    const auto n = run_of(path, 1, code_char);
    if (n == 0) return std::nullopt;
    return "joinchat/" + std::string(path.substr(1, n));
  }
  std::size_t start = 0;
  if (lower_starts("s/")) start = 2;
  const auto n = run_of(path, start, handle_char);
  if (n < 4 || n > 32) return std::nullopt;
  auto handle = path.substr(start, n);
  if (start == 0 && reserved(handle)) return std::nullopt;
  return to_lower(handle);
}

}  // namespace

std::vector<std::string> tme_links_in_text(std::string_view text) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  const std::string lower = to_lower(text);
  for (std::size_t i = 0; i < lower.size(); ++i) {
    std::size_t host_len = 0;
    if (lower.compare(i, 5, "t.me/") == 0) {
      host_len = 5;
    } else if (lower.compare(i, 12, "telegram.me/") == 0) {
      host_len = 12;
    } else {
      continue;
    }
    std::size_t q = i;
    if (q >= 4 && lower.compare(q - 4, 4, "www.") == 0) q -= 4;
    if (q > 0) {
      const char prev = lower[q - 1];
      if (std::isalnum(static_cast<unsigned char>(prev)) || prev == '.' || prev == '-' ||
          prev == '_' || prev == '@') {
        continue;
      }
    }
    if (auto id = parse_tme_path(text, i + host_len)) {
      if (seen.insert(*id).second) out.push_back(*id);
    }
    i += host_len - 1;
  }
  return out;
}

bool is_invite_link(std::string_view channel_id) { return channel_id.starts_with("joinchat/"); }

std::vector<std::string> harvest_tme_links(const std::vector<PostRecord>& posts,
                                           const std::set<std::string>& exclude) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  auto add = [&](std::string_view text) {
    for (auto& id : tme_links_in_text(text)) {
      if (exclude.contains(id)) continue;
      if (seen.insert(id).second) out.push_back(std::move(id));
    }
  };
  for (const auto& p : posts) {
    add(p.text);
    for (const auto& l : p.links) add(l);
  }
  return out;
}

std::string_view to_string(CandidateState s) {
  switch (s) {
    case CandidateState::Queued: return "Queued";
    case CandidateState::Evaluated: return "Evaluated";
    case CandidateState::Deferred: return "Deferred";
    case CandidateState::Flagged: return "Flagged";
    case CandidateState::Benign: return "Benign";
  }
  return "Queued";
}

bool transition_allowed(CandidateState from, CandidateState to) {
  using S = CandidateState;
  switch (from) {
    case S::Queued: return to == S::Evaluated || to == S::Deferred;
    case S::Evaluated: return to == S::Flagged || to == S::Benign;
    case S::Deferred: return to == S::Queued;
    case S::Flagged:
    case S::Benign: return false;
  }
  return false;
}

std::string_view to_string(FlagDecision d) {
  switch (d) {
    case FlagDecision::Malicious: return "Malicious";
    case FlagDecision::NotFlagged: return "NotFlagged";
    case FlagDecision::Deferred: return "Deferred";
  }
  return "Deferred";
}

namespace {

std::optional<FlagDecision> flag_decision_from_string(std::string_view s) {
  for (auto d : {FlagDecision::Malicious, FlagDecision::NotFlagged, FlagDecision::Deferred}) {
    if (to_string(d) == s) return d;
  }
  return std::nullopt;
}

std::optional<CandidateState> candidate_state_from_string(std::string_view s) {
  for (auto st : {CandidateState::Queued, CandidateState::Evaluated, CandidateState::Deferred,
                  CandidateState::Flagged, CandidateState::Benign}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

}  // namespace

void to_json(json& j, const ChannelFlagDecision& d) {
  json per_post = json::array();
  for (const auto& e : d.per_post) {
    per_post.push_back(json{{"post_id", e.post_id}, {"posted_at", e.posted_at}, {"result", e.result}});
  }
  j = json{{"channel_id", d.channel_id},
           {"posts_evaluated", d.posts_evaluated},
           {"flagged_count", d.flagged_count},
           {"per_post", per_post},
           {"decision", to_string(d.decision)},
           {"evaluated_at", d.evaluated_at}};
  if (d.majority_category) j["majority_category"] = to_string(*d.majority_category);
}

void from_json(const json& j, ChannelFlagDecision& d) {
  d.channel_id = j.at("channel_id").get<std::string>();
  d.posts_evaluated = j.at("posts_evaluated").get<std::int64_t>();
  d.flagged_count = j.at("flagged_count").get<std::int64_t>();
  d.per_post.clear();
  for (const auto& e : j.at("per_post")) {
    d.per_post.push_back(PostEvidence{e.at("post_id").get<std::int64_t>(), e.value("posted_at", Timestamp{0}),
                                      e.at("result").get<ClassificationResult>()});
  }
  auto dec = flag_decision_from_string(j.at("decision").get<std::string>());
  if (!dec) throw InputError("unknown decision: " + j.at("decision").dump());
  d.decision = *dec;
  d.majority_category.reset();
  if (j.contains("majority_category")) {
    d.majority_category = category_from_string(j["majority_category"].get<std::string>());
    if (!d.majority_category) throw InputError("unknown category: " + j["majority_category"].dump());
  }
  d.evaluated_at = j.value("evaluated_at", Timestamp{0});
}

void to_json(json& j, const CandidateChannel& c) {
  j = json{{"channel_id", c.channel_id},
           {"discovered_from", {{"kind", to_string(c.discovered_from.kind)}, {"origin", c.discovered_from.origin}}},
           {"first_seen", c.first_seen},
           {"state", to_string(c.state)}};
}

void from_json(const json& j, CandidateChannel& c) {
  c.channel_id = j.at("channel_id").get<std::string>();
  const auto& from = j.at("discovered_from");
  auto kind = source_kind_from_string(from.at("kind").get<std::string>());
  if (!kind) throw InputError("unknown source kind: " + from.at("kind").dump());
  c.discovered_from = DiscoveredFrom{*kind, from.value("origin", std::string())};
  c.first_seen = j.value("first_seen", Timestamp{0});
  auto st = candidate_state_from_string(j.value("state", std::string("Queued")));
  if (!st) throw InputError("unknown candidate state: " + j.at("state").dump());
  c.state = *st;
}

ChannelFlagDecision decide_channel(const std::string& channel_id, std::vector<PostEvidence> newest_first,
                                   const PipelineConfig& config, Timestamp now) {
  const auto limit = static_cast<std::size_t>(std::max<std::int64_t>(0, config.channel_eval_posts));
  if (newest_first.size() > limit) newest_first.resize(limit);

  ChannelFlagDecision d;
  d.channel_id = channel_id;
  d.evaluated_at = now;
  d.posts_evaluated = static_cast<std::int64_t>(newest_first.size());
  std::array<int, 5> votes{};
  for (const auto& e : newest_first) {
    if (!e.result.is_ca) continue;
    ++d.flagged_count;
    if (e.result.category) ++votes[static_cast<std::size_t>(*e.result.category)];
  }
  d.per_post = std::move(newest_first);

  if (d.posts_evaluated < config.channel_eval_posts) {
    d.decision = FlagDecision::Deferred;
  } else if (d.flagged_count >= config.channel_flag_threshold) {
    d.decision = FlagDecision::Malicious;
  } else {
    d.decision = FlagDecision::NotFlagged;
  }
  if (d.flagged_count > 0) {
    // max_element keeps the first maximum, which is the enum-order tie-break.
    auto best = std::max_element(votes.begin(), votes.end());
    if (*best > 0) d.majority_category = kAllCategories[static_cast<std::size_t>(best - votes.begin())];
  }
  return d;
}

namespace {

std::vector<PostEvidence> classify_newest(const std::vector<PostRecord>& newest_first,
                                          const ClassifierBackend& model, const PipelineConfig& config) {
  std::vector<PostEvidence> out;
  const auto limit = static_cast<std::size_t>(config.channel_eval_posts);
  for (std::size_t i = 0; i < newest_first.size() && i < limit; ++i) {
    const auto& p = newest_first[i];
    out.push_back(PostEvidence{p.post_id, p.posted_at, classify_post(model, p, config.gate_threshold)});
  }
  return out;
}

}  // namespace

ChannelFlagDecision evaluate_channel(ChannelSource& source, const std::string& channel_id,
                                     const ClassifierBackend& model, const PipelineConfig& config) {
  auto posts = source.list_recent_posts(channel_id, static_cast<std::size_t>(config.channel_eval_posts));
  return decide_channel(channel_id, classify_newest(posts, model, config), config, source.now());
}

std::vector<CandidateChannel> ingest_external_links(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& records,
    const std::set<std::string>& exclude, Timestamp now) {
  std::vector<CandidateChannel> out;
  std::set<std::string> seen;
  for (const auto& [group, urls] : records) {
    for (const auto& url : urls) {
      for (auto& id : tme_links_in_text(url)) {
        if (exclude.contains(id) || !seen.insert(id).second) continue;
        CandidateChannel c;
        c.channel_id = std::move(id);
        c.discovered_from = DiscoveredFrom{SourceKind::ExternalLinkSource, group};
        c.first_seen = now;
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Frontier

Frontier::Frontier(const PipelineConfig& config, FrontierOptions options)
    : config_(config), options_(std::move(options)) {}

bool Frontier::set_state(Node& n, CandidateState to) {
  if (!transition_allowed(n.candidate.state, to)) {
    log_event("error", "illegal_transition",
              {{"channel_id", n.candidate.channel_id},
               {"from", to_string(n.candidate.state)},
               {"to", to_string(to)}});
    return false;
  }
  n.candidate.state = to;
  return true;
}

void Frontier::discover(const std::string& id, const DiscoveredFrom& from, Timestamp now) {
  if (is_invite_link(id)) {
    if (invite_set_.insert(id).second) invites_.push_back(id);
    return;
  }
  if (options_.monitored.contains(id) || nodes_.contains(id)) return;
  Node n;
  n.candidate = CandidateChannel{id, from, now, CandidateState::Queued};
  nodes_.emplace(id, std::move(n));
  queue_.push_back(id);
}

void Frontier::add_seeds(const std::vector<std::string>& seeds, Timestamp now) {
  for (const auto& raw : seeds) {
    auto id = to_lower(raw);
    if (id.empty() || nodes_.contains(id)) continue;
    Node n;
    n.seed = true;
    n.candidate = CandidateChannel{id, DiscoveredFrom{options_.source_kind, ""}, now, CandidateState::Queued};
    nodes_.emplace(id, std::move(n));
    queue_.push_back(id);
  }
}

void Frontier::add_candidates(const std::vector<CandidateChannel>& candidates) {
  for (const auto& c : candidates) {
    if (is_invite_link(c.channel_id)) {
      if (invite_set_.insert(c.channel_id).second) invites_.push_back(c.channel_id);
      continue;
    }
    if (options_.monitored.contains(c.channel_id) || nodes_.contains(c.channel_id)) continue;
    Node n;
    n.candidate = c;
    n.candidate.state = CandidateState::Queued;
    nodes_.emplace(c.channel_id, std::move(n));
    queue_.push_back(c.channel_id);
  }
}

std::size_t Frontier::run(ChannelSource& source, const ClassifierBackend& model) {
  struct Job {
    std::string id;
    std::vector<PostRecord> posts;  // newest first
    std::vector<PostEvidence> evidence;
    std::optional<std::string> error_kind;
    std::string error;
    Timestamp at = 0;
  };

  std::size_t ran = 0;
  std::mutex source_mu;
  const std::size_t depth =
      std::max<std::size_t>(static_cast<std::size_t>(config_.channel_eval_posts), options_.harvest_depth);

  while (!queue_.empty()) {
    std::vector<Job> level;
    for (auto& id : queue_) level.push_back(Job{std::move(id), {}, {}, std::nullopt, {}, 0});
    queue_.clear();

    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t i = next++; i < level.size(); i = next++) {
        auto& job = level[i];
        try {
          {
            std::lock_guard lock(source_mu);
            job.at = source.now();
            job.posts = source.list_recent_posts(job.id, depth);
          }
          job.evidence = classify_newest(job.posts, model, config_);
        } catch (const DeletedError& e) {
          job.error_kind = "deleted";
          job.error = e.what();
        } catch (const Error& e) {
          job.error_kind = "transient";
          job.error = e.what();
        }
      }
    };
    const std::size_t n = std::max<std::size_t>(1, std::min(options_.concurrency, level.size()));
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t + 1 < n; ++t) threads.emplace_back(work);
    work();
    for (auto& t : threads) t.join();

    // Apply results in queue order so that discovery order is deterministic.
    for (auto& job : level) {
      auto& node = nodes_.at(job.id);
      if (job.error_kind) {
        errors_.push_back(FrontierError{job.id, *job.error_kind, job.error, job.at});
        if (*job.error_kind == "deleted") {
          node.gone = true;
        } else {
          node.retry_at = job.at + config_.refresh_interval_s;
        }
        continue;
      }
      ++ran;
      ++evaluations_;
      auto decision = decide_channel(job.id, std::move(job.evidence), config_, job.at);
      node.evaluated_at = job.at;
      node.retry_at.reset();
      if (decision.decision == FlagDecision::Deferred) {
        set_state(node, CandidateState::Deferred);
      } else {
        set_state(node, CandidateState::Evaluated);
        set_state(node, decision.decision == FlagDecision::Malicious ? CandidateState::Flagged
                                                                     : CandidateState::Benign);
      }
      const bool expand = node.seed || decision.decision == FlagDecision::Malicious;
      decisions_[job.id] = std::move(decision);
      if (expand) {
        const DiscoveredFrom from{options_.source_kind, job.id};
        for (const auto& link : harvest_tme_links(job.posts, {})) discover(link, from, job.at);
      }
    }
  }
  return ran;
}

std::size_t Frontier::requeue_due(Timestamp now) {
  std::size_t n = 0;
  const Timestamp recheck = config_.recheck_days * kSecondsPerDay;
  for (auto& [id, node] : nodes_) {
    if (node.gone) continue;
    if (node.candidate.state == CandidateState::Deferred && node.evaluated_at &&
        *node.evaluated_at + recheck <= now) {
      set_state(node, CandidateState::Queued);
      queue_.push_back(id);
      ++n;
    } else if (node.candidate.state == CandidateState::Queued && node.retry_at && *node.retry_at <= now) {
      node.retry_at.reset();
      queue_.push_back(id);
      ++n;
    }
  }
  return n;
}

std::optional<Timestamp> Frontier::next_recheck() const {
  std::optional<Timestamp> best;
  const Timestamp recheck = config_.recheck_days * kSecondsPerDay;
  for (const auto& [id, node] : nodes_) {
    if (node.gone) continue;
    std::optional<Timestamp> t;
    if (node.candidate.state == CandidateState::Deferred && node.evaluated_at) {
      t = *node.evaluated_at + recheck;
    } else if (node.candidate.state == CandidateState::Queued && node.retry_at) {
      t = node.retry_at;
    }
    if (t && (!best || *t < *best)) best = t;
  }
  return best;
}

std::vector<ChannelFlagDecision> Frontier::decisions() const {
  std::vector<ChannelFlagDecision> out;
  for (const auto& [id, d] : decisions_) out.push_back(d);
  return out;
}

std::vector<CandidateChannel> Frontier::candidates() const {
  std::vector<CandidateChannel> out;
  for (const auto& [id, n] : nodes_) out.push_back(n.candidate);
  return out;
}

namespace {

FrontierResult collect(const Frontier& f) {
  return FrontierResult{f.decisions(), f.candidates(), f.invite_links(), f.errors()};
}

}  // namespace

FrontierResult run_frontier(const std::vector<std::string>& seeds, ChannelSource& source,
                            const ClassifierBackend& model, const PipelineConfig& config,
                            const FrontierOptions& options) {
  if (seeds.empty()) throw InputError("run_frontier needs at least one seed");
  Frontier f(config, options);
  f.add_seeds(seeds, source.now());
  f.run(source, model);
  return collect(f);
}

FrontierResult run_frontier_with_rechecks(const std::vector<std::string>& seeds, ChannelSource& source,
                                          const ClassifierBackend& model, const PipelineConfig& config,
                                          const std::function<void(Timestamp)>& advance_clock,
                                          Timestamp until, const FrontierOptions& options,
                                          const std::vector<CandidateChannel>& external) {
  if (seeds.empty() && external.empty()) throw InputError("discovery needs seeds or candidates");
  Frontier f(config, options);
  f.add_seeds(seeds, source.now());
  f.add_candidates(external);
  f.run(source, model);
  while (auto t = f.next_recheck()) {
    if (*t > until) break;
    if (*t > source.now()) advance_clock(*t);
    if (f.requeue_due(source.now()) == 0) break;
    f.run(source, model);
  }
  return collect(f);
}

}  // namespace darkgram
