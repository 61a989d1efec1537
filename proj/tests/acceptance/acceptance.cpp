// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <httplib.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cli.hpp"
#include "darkgram/analytics.hpp"
#include "darkgram/classify.hpp"
#include "darkgram/discover.hpp"
#include "darkgram/errors.hpp"
#include "darkgram/fixtures.hpp"
#include "darkgram/ingest.hpp"
#include "darkgram/payload.hpp"
#include "darkgram/probe.hpp"
#include "darkgram/report.hpp"
#include "darkgram/scan.hpp"
#include "darkgram/serialize.hpp"
#include "darkgram/stats.hpp"
#include "oracles.hpp"

using namespace darkgram;
namespace fs = std::filesystem;
namespace fx = darkgram::fixtures;
using Clock = std::chrono::steady_clock;

namespace {

// Collects the first few failed expectations of one criterion.
struct Check {
  bool ok = true;
  std::vector<std::string> why;
  std::string note;

  void expect(bool cond, const std::string& what) {
    if (cond) return;
    ok = false;
    if (why.size() < 5) why.push_back(what);
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("dg-accept-" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::set<std::string> flagged_ids(const std::vector<ChannelFlagDecision>& ds) {
  std::set<std::string> out;
  for (const auto& d : ds) {
    if (d.decision == FlagDecision::Malicious) out.insert(d.channel_id);
  }
  return out;
}

// Shared by the frontier and deferred checks.
const BaselineModel& discovery_model() {
  static BaselineModel m = train_baseline(fx::generate_corpus(1000, 1), 1);
  return m;
}

// ---------------------------------------------------------------------------

Check frontier() {
  Check o;
  const auto& model = discovery_model();
  auto f = fx::frontier_fixture(17);
  o.expect(f.candidates.size() == 245, "fixture has " + std::to_string(f.candidates.size()) + " candidates");
  o.expect(f.planted_malicious.size() == 127, "fixture plants " + std::to_string(f.planted_malicious.size()));

  ReplaySource src(f.script, f.start);
  PipelineConfig cfg;
  const auto t0 = Clock::now();
  auto r = run_frontier(f.seeds, src, model, cfg);
  const double secs = seconds_since(t0);

  std::set<std::string> seeds(f.seeds.begin(), f.seeds.end()), reached;
  for (const auto& d : r.decisions) {
    if (!seeds.count(d.channel_id)) reached.insert(d.channel_id);
    if (d.decision == FlagDecision::Malicious) {
      o.expect(d.posts_evaluated == cfg.channel_eval_posts, d.channel_id + " flagged on a short window");
      o.expect(d.flagged_count >= cfg.channel_flag_threshold, d.channel_id + " flagged below threshold");
    }
  }
  const auto flagged = flagged_ids(r.decisions);
  std::size_t false_pos = 0, missed = 0;
  for (const auto& id : flagged) false_pos += !f.planted_malicious.count(id);
  for (const auto& id : f.planted_malicious) missed += !flagged.count(id);

  o.expect(reached == f.candidates, "reached " + std::to_string(reached.size()) + " candidates");
  o.expect(false_pos == 0, std::to_string(false_pos) + " false positives");
  o.expect(missed == 0, std::to_string(missed) + " planted channels missed");
  o.expect(secs < 60.0, "took " + fmt(secs, 1) + " s");
  o.note = "candidates " + std::to_string(reached.size()) + ", flagged " + std::to_string(flagged.size()) +
           ", fp " + std::to_string(false_pos) + ", " + fmt(secs, 2) + " s";
  return o;
}

Check deferred() {
  Check o;
  const auto& model = discovery_model();
  auto f = fx::deferred_fixture(23);
  o.expect(f.planted_malicious.size() == 19, "fixture plants " + std::to_string(f.planted_malicious.size()));

  ReplaySource src(f.script, f.start);
  PipelineConfig cfg;
  const auto t0 = Clock::now();
  auto first = run_frontier(f.seeds, src, model, cfg);
  std::size_t deferred_first = 0;
  for (const auto& d : first.decisions) deferred_first += d.decision == FlagDecision::Deferred;

  ReplaySource replay(f.script, f.start);
  auto r = run_frontier_with_rechecks(f.seeds, replay, model, cfg, [&](Timestamp t) { replay.advance_to(t); },
                                      f.horizon);
  const double secs = seconds_since(t0);
  const auto flagged = flagged_ids(r.decisions);

  o.expect(deferred_first >= 19, "only " + std::to_string(deferred_first) + " deferred on the first pass");
  o.expect(flagged == f.planted_malicious, "flagged " + std::to_string(flagged.size()) + " after rechecks");
  o.expect(secs < 30.0, "took " + fmt(secs, 1) + " s");
  o.note = "deferred at first " + std::to_string(deferred_first) + ", flagged after recheck " +
           std::to_string(flagged.size()) + ", " + fmt(secs, 2) + " s";
  return o;
}

// Scripted services: engine hits and the fallback answer come from the URL.
struct SweepReputation final : ReputationClient {
  std::map<std::string, std::int64_t> hits;
  ReputationResponse check(const std::string& url) override { return {hits.at(url), 70, nlohmann::json::object()}; }
};
struct SweepFallback final : FallbackClient {
  std::map<std::string, std::optional<bool>> answer;  // nullopt: service down
  bool is_phishing(const std::string& url) override {
    auto a = answer.at(url);
    if (!a) throw TransientError("fallback down");
    return *a;
  }
};

Check url_rule() {
  Check o;
  PipelineConfig cfg;
  SweepReputation rep;
  SweepFallback fb;
  std::size_t cases = 0;
  const std::array<std::optional<bool>, 3> fallbacks{std::nullopt, false, true};
  for (std::int64_t hits = 0; hits <= 5; ++hits) {
    for (const auto& flag : fallbacks) {
      const bool want = hits >= 2 || flag.value_or(false);
      const auto want_final = want ? UrlFinal::Malicious : UrlFinal::Benign;
      const std::string tag = "hits=" + std::to_string(hits) + " fallback=" + (flag ? (*flag ? "true" : "false") : "absent");
      o.expect(decide_url(hits, flag, cfg) == want_final, "decide_url " + tag);

      const std::string url = "https://sweep-" + std::to_string(cases) + ".test/";
      rep.hits[url] = hits;
      fb.answer[url] = flag;
      auto v = scan_url(url, rep, fb, cfg);
      o.expect(v.outcome == want_final, "scan_url " + tag);
      ++cases;
    }
  }
  o.expect(decide_url(1, std::nullopt, cfg) == UrlFinal::Benign, "hits=1 without fallback is not Benign");
  o.note = std::to_string(cases) + " cases";
  return o;
}

struct SweepSandbox final : SandboxClient {
  std::map<std::string, SandboxResponse> table;
  SandboxResponse lookup(const std::string& digest) override { return table.at(digest); }
};

Check file_rule() {
  Check o;
  PipelineConfig cfg;
  SweepSandbox sb;
  std::size_t cases = 0;
  for (bool sandbox : {false, true}) {
    for (std::int64_t av = 0; av <= 3; ++av) {
      const auto want = sandbox && av >= 2 ? FileFinal::Malicious : FileFinal::NotMalicious;
      const std::string tag = std::string("sandbox=") + (sandbox ? "true" : "false") + " av=" + std::to_string(av);
      o.expect(decide_file(sandbox, av, cfg) == want, "decide_file " + tag);
      std::string digest(64, '0');
      digest[0] = "0123456789abcdef"[cases];
      sb.table[digest] = {sandbox, av, false};
      o.expect(scan_file(digest, sb, cfg).outcome == want, "scan_file " + tag);
      ++cases;
    }
  }
  o.expect(decide_file(false, 5, cfg) == FileFinal::NotMalicious, "av alone convicts");
  o.note = std::to_string(cases) + " combinations";
  return o;
}

// Confusion matrix and per-label scores computed here, not by the library.
struct BruteMetrics {
  std::array<double, kLabelCount> f1{}, precision{}, recall{};
  double macro_f1 = 0.0;
};

BruteMetrics brute_metrics(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& pred) {
  std::array<std::array<std::size_t, kLabelCount>, kLabelCount> cm{};
  for (std::size_t i = 0; i < truth.size(); ++i) ++cm[truth[i]][pred[i]];
  BruteMetrics m;
  std::size_t present = 0;
  for (std::size_t k = 0; k < kLabelCount; ++k) {
    std::size_t tp = cm[k][k], row = 0, col = 0;
    for (std::size_t j = 0; j < kLabelCount; ++j) {
      row += cm[k][j];
      col += cm[j][k];
    }
    if (row == 0 && col == 0) continue;
    ++present;
    m.precision[k] = col ? static_cast<double>(tp) / col : 0.0;
    m.recall[k] = row ? static_cast<double>(tp) / row : 0.0;
    const double s = m.precision[k] + m.recall[k];
    m.f1[k] = s > 0 ? 2 * m.precision[k] * m.recall[k] / s : 0.0;
    m.macro_f1 += m.f1[k];
  }
  m.macro_f1 /= static_cast<double>(present);
  return m;
}

Check classifier() {
  Check o;
  const auto t0 = Clock::now();
  auto corpus = fx::generate_corpus(1000, 42);
  std::array<std::size_t, kLabelCount> per_label{};
  for (const auto& it : corpus.items) ++per_label[it.label.index()];
  for (std::size_t k = 0; k < kLabelCount; ++k) {
    o.expect(per_label[k] >= 1000, "label " + std::to_string(k) + " has " + std::to_string(per_label[k]));
  }
  corpus.split = stratified_split(corpus, 0.7, 42);
  auto model = train_baseline(corpus, 42);
  auto test = corpus.subset(corpus.split->test);
  o.expect(test.items.size() == 1800, "test split has " + std::to_string(test.items.size()));

  auto table = evaluate(model, test);
  std::vector<std::size_t> truth, pred;
  for (const auto& it : test.items) {
    truth.push_back(it.label.index());
    pred.push_back(classify_text(model, it.text, it.filenames).label().index());
  }
  auto brute = brute_metrics(truth, pred);
  const double secs = seconds_since(t0);

  o.expect(table.macro_f1 >= 0.90, "macro-F1 " + fmt(table.macro_f1));
  o.expect(std::fabs(table.macro_f1 - brute.macro_f1) <= 0.02, "macro-F1 differs from the oracle");
  for (std::size_t k = 0; k < kLabelCount; ++k) {
    const auto name = std::string(to_string(label_from_index(k)));
    const auto* row = table.find(name);
    o.expect(row != nullptr, "no row for " + name);
    if (!row) continue;
    o.expect(std::fabs(row->f1 - brute.f1[k]) <= 0.02, name + " F1 differs from the oracle");
    o.expect(std::fabs(row->precision - brute.precision[k]) <= 0.02, name + " precision differs");
    o.expect(std::fabs(row->recall - brute.recall[k]) <= 0.02, name + " recall differs");
  }
  o.expect(secs < 300.0, "took " + fmt(secs, 1) + " s");
  o.note = "macro-F1 " + fmt(table.macro_f1) + " (oracle " + fmt(brute.macro_f1) + "), " + fmt(secs, 1) + " s";
  return o;
}

Check payload_kind() {
  Check o;
  const auto text = read_text_file(fs::path(DARKGRAM_TEST_DATA) / "payload_labeled.jsonl");
  std::istringstream in(text);
  std::string line;
  std::size_t rows = 0, errors = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto r = nlohmann::json::parse(line);
    ++rows;
    auto got = detect_payload_kind(r.at("text").get<std::string>(), r.at("filenames").get<std::vector<std::string>>());
    errors += to_string(got) != r.at("kind").get<std::string>();
  }
  o.expect(rows == 200, std::to_string(rows) + " fixture rows");
  o.expect(errors <= 1, std::to_string(errors) + " errors");
  o.note = std::to_string(errors) + " errors of " + std::to_string(rows);
  return o;
}

Check damage() {
  Check o;
  PipelineConfig cfg;
  auto t = estimate_damage(oracle::damage_ledger_apps(), cfg);
  o.expect(t.to_csv() == oracle::kDamageCsv, "fixture table differs");
  o.expect(t.overall.loss_cents == oracle::kDamageOverallCents,
           "overall " + std::to_string(t.overall.loss_cents) + " cents");

  const std::string header = "Category (Count),Min,Max,Median,Mean,10% conversion\n";
  o.expect(estimate_damage({}, cfg).to_csv().compare(0, header.size(), header) == 0, "header bytes");
  o.expect(t.to_csv().compare(0, header.size(), header) == 0, "header bytes on the fixture");

  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<AppListing> apps;
    const std::size_t n = 1 + rng() % 50;
    for (std::size_t i = 0; i < n; ++i) {
      apps.push_back({"cat" + std::to_string(rng() % 7),
                      {"app" + std::to_string(i), rng() % 2 ? Pricing::Freemium : Pricing::Premium,
                       static_cast<std::int64_t>(rng() % 10000)},
                      static_cast<std::int64_t>(rng() % 5000000)});
    }
    auto d = estimate_damage(apps, cfg);
    std::int64_t sum = 0, brute = 0;
    std::size_t count = 0;
    for (const auto& r : d.rows) {
      sum += r.loss_cents;
      count += r.app_count;
    }
    for (const auto& a : apps) brute += ((a.views * 10 + 50) / 100) * a.price.price_cents;
    o.expect(d.overall.loss_cents == sum, "overall != category sum, trial " + std::to_string(trial));
    o.expect(sum == brute, "category sum != recount, trial " + std::to_string(trial));
    o.expect(d.overall.app_count == count, "app counts, trial " + std::to_string(trial));
  }
  o.note = "overall " + format_usd(t.overall.loss_cents) + ", 100 random tables";
  return o;
}

Check overlap() {
  Check o;
  std::string note;
  for (auto [left, shared, want] : {std::tuple{14574, 3438, 0.2359}, std::tuple{4051, 2989, 0.7378}}) {
    auto [urls, texts] = oracle::overlap_fixture(left, shared, 7);
    auto r = forum_overlap(urls, texts);
    const double got = r.ratio.value_or(-1.0);
    o.expect(std::fabs(got - want) <= 1e-4, std::to_string(left) + "/" + std::to_string(shared) + " -> " + fmt(got));
    note += (note.empty() ? "" : ", ") + fmt(got);
  }
  o.note = note;
  return o;
}

Check analytics() {
  Check o;
  PipelineConfig cfg;
  std::size_t windows = 0, migrations = 0;
  for (std::uint64_t seed = 1001; seed <= 1100; ++seed) {
    auto w = oracle::random_world(seed, 1000);
    const std::string at = " (seed " + std::to_string(seed) + ")";
    o.expect(w.posts.size() <= 1000, "world too large" + at);

    auto ranked = emoji_distribution(w.posts);
    auto totals = oracle::brute_emoji_totals(w.posts);
    o.expect(ranked.size() == totals.size(), "emoji kinds" + at);
    for (const auto& [e, n] : ranked) o.expect(totals.count(e) && totals.at(e) == n, "emoji count" + at);
    for (std::size_t k : {1u, 5u, 10u}) {
      auto a = top_k_share(ranked, k);
      auto b = oracle::brute_top_k(totals, k);
      o.expect(a.has_value() == b.has_value() && (!a || std::fabs(*a - *b) <= 1e-9), "top-k share" + at);
    }

    auto rs = reply_stats(w.posts, w.channels);
    auto rb = oracle::brute_replies(w.posts, w.channels);
    o.expect(rs.replies == rb.replies, "reply count" + at);
    auto same = [](const std::optional<double>& x, const std::optional<double>& y) {
      return x.has_value() == y.has_value() && (!x || std::fabs(*x - *y) <= 1e-9);
    };
    o.expect(same(rs.fraction_without_replies, rb.fraction_without), "fraction without replies" + at);
    o.expect(same(rs.median_words, rb.median_words), "median reply words" + at);
    o.expect(same(rs.mean_words, rb.mean_words), "mean reply words" + at);

    auto g = growth_series(w.snapshots, cfg);
    auto gb = oracle::brute_growth(w.snapshots, cfg);
    o.expect(g.observations.size() == gb.size(), "growth window count" + at);
    windows += g.observations.size();
    for (const auto& ob : g.observations) {
      auto it = gb.find({ob.channel_id, ob.window_start});
      if (it == gb.end()) {
        o.expect(false, "unexpected growth window" + at);
        continue;
      }
      o.expect(ob.start_subs == it->second.first && ob.end_subs == it->second.second, "growth endpoints" + at);
      const double want = static_cast<double>(it->second.second - it->second.first) / it->second.first;
      o.expect(std::fabs(ob.growth_rate - want) <= 1e-9, "growth rate" + at);
    }

    auto m = detect_migration(w.posts, w.snapshots, w.channels, w.removed, cfg);
    auto mb = oracle::brute_migration(w, cfg);
    o.expect(m.size() == mb.size(), "migration count" + at);
    migrations += m.size();
    for (std::size_t i = 0; i < std::min(m.size(), mb.size()); ++i) {
      o.expect(m[i].old_channel == mb[i].old_channel && m[i].new_channel == mb[i].new_channel, "migration pair" + at);
      o.expect(m[i].baseline_subs == mb[i].base && m[i].migrated_subs == mb[i].gain, "migration counts" + at);
      if (mb[i].gain) {
        o.expect(m[i].rate && std::fabs(*m[i].rate - static_cast<double>(*mb[i].gain) / mb[i].base) <= 1e-9,
                 "migration rate" + at);
      }
    }
  }
  o.expect(windows > 500 && migrations > 20, "random worlds too thin to mean anything");

  std::mt19937_64 rng(8);
  std::size_t perms = 0;
  for (int trial = 0; trial < 80; ++trial) {
    const std::size_t n1 = 2 + rng() % 9, n2 = 2 + rng() % 9;
    std::vector<double> a, b;
    for (std::size_t i = 0; i < n1; ++i) a.push_back(static_cast<double>(rng() % 12) / 10.0);
    for (std::size_t i = 0; i < n2; ++i) b.push_back(static_cast<double>(rng() % 12) / 10.0 + (trial % 4) * 0.1);
    auto c = compare_growth(a, b);
    const double want = oracle::permutation_p(a, b);
    o.expect(std::fabs(c.p_value - want) <= 1e-9,
             "compare_growth p " + fmt(c.p_value, 6) + " vs permutation " + fmt(want, 6));
    ++perms;
  }
  o.note = "100 worlds, " + std::to_string(windows) + " growth windows, " + std::to_string(migrations) +
           " migrations, " + std::to_string(perms) + " permutation checks";
  return o;
}

int dg(const std::vector<std::string>& args, std::string* err = nullptr) {
  std::ostringstream out, e;
  const int code = cli::run(args, out, e);
  if (err) *err = e.str();
  return code;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) files[fs::relative(entry.path(), root).generic_string()] = read_text_file(entry.path());
  }
  return files;
}

// The replay pipeline end to end through the command line.
bool run_pipeline(const fs::path& dir, std::string& failure) {
  auto p = [&](const char* s) { return (dir / s).string(); };
  const std::string now = "1705000000";
  const std::vector<std::vector<std::string>> steps = {
      {"--seed", "9", "--now", now, "fixtures", "--kind", "pipeline", "--out", p("fx")},
      {"--config", p("fx/darkgram.conf"), "--now", now, "ingest", "--fixture", p("fx"), "--out", p("archive")},
      {"--seed", "9", "--now", now, "train", "--corpus", p("fx/corpus.jsonl"), "--out", p("model")},
      {"--now", now, "classify", "--model", p("model"), "--in", p("archive"), "--out", p("results.jsonl")},
      {"--now", now, "scan", "--archive", p("archive"), "--mock", p("fx/scanner.json"), "--out", p("scan")},
      {"--now", now, "discover", "--seeds", p("fx/seeds.txt"), "--fixture", p("fx"), "--model", p("model"), "--out",
       p("disc/decisions.jsonl")},
      {"--config", p("fx/darkgram.conf"), "--now", now, "analyze", "--archive", p("archive"), "--out", p("analysis"),
       "--apps", p("fx/apps.jsonl"), "--forum", p("fx/forum.txt")},
      {"--now", now, "report", "bundle", "--decisions", p("disc/decisions.jsonl"), "--archive", p("archive"),
       "--verdicts", p("scan"), "--outbox", p("outbox")},
      {"--now", now, "report", "export", "--verdicts", p("scan"), "--destination", "phishtank", "--out", p("blocklists"),
       "--archive", p("archive")},
  };
  for (const auto& step : steps) {
    std::string err;
    if (dg(step, &err) != 0) {
      failure = "step failed: " + step[step.size() > 4 ? 4 : 0] + ": " + err;
      return false;
    }
  }
  return true;
}

Check determinism() {
  Check o;
  TempDir tmp;
  const fs::path dir = tmp.path() / "run";
  std::map<std::string, std::string> runs[2];
  for (auto& run : runs) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::string failure;
    if (!run_pipeline(dir, failure)) {
      o.expect(false, failure);
      return o;
    }
    run = snapshot(dir);
  }
  o.expect(runs[0].size() == runs[1].size(), "file sets differ");
  std::size_t differ = 0, bytes = 0;
  for (const auto& [name, body] : runs[0]) {
    auto it = runs[1].find(name);
    if (it == runs[1].end() || it->second != body) {
      ++differ;
      o.expect(false, name + " differs between runs");
    }
    bytes += body.size();
  }
  o.expect(runs[0].size() > 20, "pipeline produced only " + std::to_string(runs[0].size()) + " files");
  o.note = std::to_string(runs[0].size()) + " files, " + std::to_string(bytes) + " bytes, " + std::to_string(differ) +
           " differ";
  return o;
}

// A site that hands out a payload whenever asked.
class PayloadSite {
 public:
  static inline const std::string kMarker = "PAYLOAD-7c1e-combo:password";

  PayloadSite() {
    svr_.Get("/leak", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("<title>Fresh combos</title><a href=\"/f/combo.txt\">Download</a>", "text/html");
    });
    svr_.Get("/f/combo.txt", [this](const httplib::Request&, httplib::Response& res) {
      ++served;
      res.set_header("Content-Disposition", "attachment; filename=\"combo.txt\"");
      std::string body;
      while (body.size() < (256 << 10)) body += kMarker + "\n";
      res.set_content(body, "application/octet-stream");
    });
    svr_.Get("/mirror", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("<title>Mirror</title><a href=\"/f/dump.zip\" download>get</a>", "text/html");
    });
    svr_.Get("/f/dump.zip", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kMarker, "application/zip");
    });
    svr_.Get("/vip", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("<title>VIP</title>Payment required to download. <a href=\"/f/combo.txt\">download</a>",
                      "text/html");
    });
    port_ = svr_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { svr_.listen_after_bind(); });
    svr_.wait_until_ready();
  }
  ~PayloadSite() {
    svr_.stop();
    thread_.join();
  }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }
  std::atomic<int> served{0};

 private:
  httplib::Server svr_;
  int port_ = 0;
  std::thread thread_;
};

Check ethics() {
  Check o;
  PayloadSite site;
  std::atomic<int> hook_calls{0};
  const std::vector<std::string> urls = {site.url("/leak"), site.url("/mirror"), site.url("/vip"),
                                         "http://127.0.0.1:1/dead"};
  auto probes = probe_links(
      urls,
      [&] {
        auto c = std::make_unique<HttpPageClient>(std::chrono::seconds(5));
        c->set_persistence_hook([&](std::string_view) { ++hook_calls; });
        return c;
      },
      2);
  std::size_t observed = 0;
  for (const auto& p : probes) observed += p.status == ProbeStatus::DownloadObserved;
  o.expect(observed == 2, std::to_string(observed) + " downloads observed");

  TempDir tmp;
  {
    std::string lines;
    for (const auto& p : probes) lines += probe_to_jsonl(p) + "\n";
    write_text_file(tmp.path() / "probes.jsonl", lines);
  }

  // Random bundles whose posts carry payload-looking attachments and digests.
  std::mt19937_64 rng(31);
  Outbox box(tmp.path() / "outbox");
  const std::string exe_digest(64, 'd');
  std::vector<std::string> secrets = {PayloadSite::kMarker};
  for (int trial = 0; trial < 40; ++trial) {
    ChannelRecord ch;
    ch.channel_id = "leaks" + std::to_string(trial);
    ch.title = "Leaks " + std::to_string(trial);
    ChannelFlagDecision d;
    d.channel_id = ch.channel_id;
    d.decision = FlagDecision::Malicious;
    d.majority_category = CacCategory::CredentialCompromise;
    EvidenceStore ev;
    std::vector<PostRecord> posts;
    const int n = 10, flagged = 5 + static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) {
      PostRecord p;
      p.channel_id = ch.channel_id;
      p.post_id = 1000 - i;
      p.posted_at = fx::kEpoch + (1000 - i) * 600;
      p.text = "fresh combo list " + std::to_string(i) + " " + urls[i % 3];
      p.links = {urls[i % 3]};
      const std::string doc_digest(40, static_cast<char>('a' + rng() % 3));
      secrets.push_back(doc_digest);
      p.attachments = {{"tool.exe", 4096, AttachmentKind::Executable, exe_digest},
                       {"combo.txt", 90000, AttachmentKind::Document, doc_digest}};
      posts.push_back(p);
      PostEvidence e;
      e.post_id = p.post_id;
      e.posted_at = p.posted_at;
      e.result.is_ca = i < flagged;
      if (e.result.is_ca) e.result.category = CacCategory::CredentialCompromise;
      d.per_post.push_back(e);
    }
    d.posts_evaluated = n;
    d.flagged_count = flagged;
    ev.add_posts(posts);
    ev.add_probes(probes);
    ev.add_file_verdicts({FileVerdict{exe_digest, true, 3, false, FileFinal::Malicious}});
    auto b = build_report(ch, d, ev, fx::kEpoch + trial * 40 * kSecondsPerDay);
    box.write(b);
    write_text_file(tmp.path() / ("email-" + std::to_string(trial) + ".txt"), render_email(b));
  }

  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(tmp.path())) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const auto text = read_text_file(entry.path());
    for (const auto& s : secrets) {
      o.expect(text.find(s) == std::string::npos, entry.path().filename().string() + " holds payload bytes");
    }
  }
  o.expect(hook_calls == 0, "persistence hook called " + std::to_string(hook_calls.load()) + " times");
  o.note = "hook calls " + std::to_string(hook_calls.load()) + ", " + std::to_string(files) + " artifacts scanned, " +
           std::to_string(site.served.load()) + " downloads started";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Check()>>> criteria = {
      {"frontier-threshold", frontier},  {"deferred-recovery", deferred}, {"url-verdict-rule", url_rule},
      {"file-verdict-rule", file_rule},  {"baseline-classifier", classifier}, {"payload-kind", payload_kind},
      {"damage-arithmetic", damage},     {"overlap-arithmetic", overlap},  {"analytics-oracles", analytics},
      {"determinism", determinism},      {"ethics-guards", ethics},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Check o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.ok = false;
      o.why.push_back(std::string("exception: ") + e.what());
    }
    std::cout << (o.ok ? "PASS " : "FAIL ") << name;
    if (!o.note.empty()) std::cout << " (" << o.note << ")";
    std::cout << "\n";
    for (const auto& w : o.why) std::cout << "    " << w << "\n";
    std::cout.flush();
    failed += !o.ok;
  }
  std::cout << (failed ? "FAIL" : "PASS") << " overall: " << criteria.size() - failed << "/" << criteria.size()
            << "\n";
  return failed ? 1 : 0;
}
