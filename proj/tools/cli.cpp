#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "darkgram/analytics.hpp"
#include "darkgram/classify.hpp"
#include "darkgram/config.hpp"
#include "darkgram/discover.hpp"
#include "darkgram/errors.hpp"
#include "darkgram/fixtures.hpp"
#include "darkgram/ingest.hpp"
#include "darkgram/log.hpp"
#include "darkgram/probe.hpp"
#include "darkgram/report.hpp"
#include "darkgram/scan.hpp"
#include "darkgram/serialize.hpp"
#include "darkgram/text.hpp"

namespace darkgram::cli {

namespace fs = std::filesystem;

namespace {

// Everything a subcommand records about itself for the run manifest.
struct Run {
  std::string subcommand;
  std::string run_id;
  Settings settings;
  std::uint64_t seed = 0;
  std::optional<Timestamp> pinned_now;
  std::optional<Timestamp> started_at;  // replay subcommands use the virtual clock
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::int64_t posts_processed = 0;
  std::int64_t channels_flagged = 0;
  std::int64_t urls_scanned = 0;
  std::optional<fs::path> manifest;

  const PipelineConfig& cfg() const { return settings.pipeline; }
  Timestamp now() const {
    if (pinned_now) return *pinned_now;
    return static_cast<Timestamp>(std::time(nullptr));
  }
  void input(const fs::path& p) { inputs.push_back(p.string()); }
  void output(const fs::path& p) {
    outputs.push_back(p.string());
    if (!manifest) manifest = fs::is_directory(p) ? p / "run_manifest.json" : fs::path(p.string() + ".manifest.json");
  }
};

void write_manifest(const Run& run, int exit_code) {
  if (!run.manifest) return;
  json cfg = run.cfg();
  const auto& s = run.settings.services;
  json services{{"reputation_url", s.reputation_url}, {"fallback_url", s.fallback_url},
                {"sandbox_url", s.sandbox_url}, {"scanner_rate_per_s", s.scanner_rate_per_s}};
  json m{{"run_id", run.run_id},
         {"started_at", run.started_at.value_or(run.now())},
         {"subcommand", run.subcommand},
         {"config", cfg},
         {"services", services},
         {"seed", run.seed},
         {"inputs", run.inputs},
         {"outputs", run.outputs},
         {"counters", {{"posts_processed", run.posts_processed},
                       {"channels_flagged", run.channels_flagged},
                       {"urls_scanned", run.urls_scanned}}},
         {"exit_code", exit_code}};
  write_text_file(*run.manifest, m.dump(2) + "\n");
}

fs::path must_exist(const fs::path& p) {
  if (!fs::exists(p)) throw InputError("no such file or directory: " + p.string());
  return p;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream in(read_text_file(must_exist(p)));
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    auto e = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(b, e - b + 1));
  }
  return out;
}

bool is_platform_link(const std::string& url) {
  auto host = url_host(url);
  return host == "t.me" || host == "telegram.me" || host == "www.t.me" || host == "www.telegram.me";
}

fs::path sidecar(const fs::path& out, std::string_view suffix) {
  return out.parent_path() / (out.stem().string() + std::string(suffix));
}

// Replay fixtures come as a file or a directory holding replay.jsonl and
// optionally fixture.json, channels.txt and model/.
struct ReplayInput {
  fs::path script;
  fs::path dir;
  json meta = json::object();
};

ReplayInput resolve_replay(const fs::path& fixture) {
  must_exist(fixture);
  ReplayInput r;
  if (fs::is_directory(fixture)) {
    r.dir = fixture;
    r.script = must_exist(fixture / "replay.jsonl");
    if (fs::exists(fixture / "fixture.json")) {
      try {
        r.meta = json::parse(read_text_file(fixture / "fixture.json"));
      } catch (const json::exception& e) {
        throw InputError((fixture / "fixture.json").string() + ": " + e.what());
      }
    }
  } else {
    r.script = fixture;
    r.dir = fixture.parent_path();
  }
  return r;
}

void require_replay(const std::string& source) {
  if (source == "live") {
    throw EnvironmentError("no live platform adapter is configured in this build; use --source replay");
  }
  if (source != "replay") throw InputError("unknown source '" + source + "'");
}

std::vector<PostRecord> load_posts(const fs::path& in) {
  if (fs::is_directory(in)) return latest_posts(read_archive(must_exist(ArchivePaths{in}.posts())));
  return read_archive(must_exist(in));
}

// ---------------------------------------------------------------------------

void cmd_fixtures(Run& run, const std::string& kind, const fs::path& out, std::size_t per_class, std::ostream& os) {
  fs::create_directories(out);
  auto write_model = [&] {
    auto corpus = fixtures::generate_corpus(per_class, run.seed);
    write_labeled_corpus(out / "corpus.jsonl", corpus);
    train_baseline(corpus, run.seed).save(out / "model");
  };
  auto write_discovery = [&](const fixtures::DiscoveryFixture& fx) {
    write_text_file(out / "replay.jsonl", fixtures::script_to_jsonl(fx.script));
    std::string seeds;
    for (const auto& s : fx.seeds) seeds += s + "\n";
    write_text_file(out / "seeds.txt", seeds);
    json meta{{"start", fx.start}, {"horizon", fx.horizon},
              {"planted_malicious", fx.planted_malicious}, {"candidates", fx.candidates.size()}};
    write_text_file(out / "fixture.json", meta.dump(2) + "\n");
    write_model();
  };

  if (kind == "corpus") {
    write_labeled_corpus(out / "corpus.jsonl", fixtures::generate_corpus(per_class, run.seed));
  } else if (kind == "frontier") {
    write_discovery(fixtures::frontier_fixture(run.seed));
  } else if (kind == "deferred") {
    write_discovery(fixtures::deferred_fixture(run.seed));
  } else if (kind == "external") {
    auto fx = fixtures::external_link_fixture(run.seed);
    write_text_file(out / "replay.jsonl", fixtures::script_to_jsonl(fx.script));
    std::string groups;
    for (const auto& [g, urls] : fx.groups) groups += dump_line(json{{"group", g}, {"urls", urls}}) + "\n";
    write_text_file(out / "groups.jsonl", groups);
    json meta{{"start", fx.start}, {"horizon", fx.start}, {"planted_malicious", fx.planted_malicious},
              {"links", fx.link_count}};
    write_text_file(out / "fixture.json", meta.dump(2) + "\n");
    write_model();
  } else if (kind == "scanner") {
    auto fx = fixtures::scanner_fixture(run.seed);
    std::string urls;
    for (const auto& u : fx.urls) urls += u + "\n";
    write_text_file(out / "urls.txt", urls);
    write_text_file(out / "scanner.json", fixtures::tables_to_json(fx.tables).dump(2) + "\n");
  } else if (kind == "pipeline") {
    fixtures::write_pipeline_fixture(out, run.seed);
  } else {
    throw InputError("unknown fixture kind '" + kind + "'");
  }
  run.output(out);
  os << "wrote " << kind << " fixture to " << out.string() << "\n";
}

void cmd_ingest(Run& run, const std::string& source, const fs::path& fixture, const fs::path& out,
                const std::optional<fs::path>& channels_file, std::ostream& os) {
  require_replay(source);
  auto in = resolve_replay(fixture);
  run.input(in.script);
  auto src = ReplaySource::from_file(in.script);
  run.started_at = src.now();

  std::vector<std::string> channels;
  if (channels_file) {
    run.input(*channels_file);
    channels = read_lines(*channels_file);
  } else if (fs::exists(in.dir / "channels.txt")) {
    channels = read_lines(in.dir / "channels.txt");
  } else {
    auto all = ReplaySource::from_file(in.script);
    all.advance_to(all.last_event_time());
    channels = all.known_channels();
  }
  if (channels.empty()) throw InputError("no channels to ingest");

  ArchiveWriter writer(out);
  auto cycles = replay_into_archive(src, channels, run.cfg(), writer);
  std::vector<ChannelRecord> records;
  for (const auto& c : channels) {
    if (auto rec = src.channel_info(c)) records.push_back(*rec);
  }
  writer.write_channels(records);

  auto latest = latest_posts(read_archive(writer.paths().posts()));
  auto stats = archive_stats(records, latest);
  json j{{"cycles", cycles}, {"channels", stats.channels}, {"posts", stats.posts},
         {"posts_with_reactions", stats.posts_with_reactions}};
  if (stats.time_range) j["time_range"] = {stats.time_range->first, stats.time_range->second};
  write_text_file(out / "stats.json", j.dump(2) + "\n");
  run.posts_processed = static_cast<std::int64_t>(latest.size());
  run.output(out);
  log_event("info", "ingest.done", j);
  os << "archived " << latest.size() << " posts from " << stats.channels << " channels in " << cycles
     << " cycles\n";
}

void cmd_train(Run& run, const fs::path& corpus_path, const fs::path& out, double ratio,
               const std::optional<fs::path>& metrics_path, std::ostream& os) {
  run.input(must_exist(corpus_path));
  auto corpus = read_labeled_corpus(corpus_path);
  if (!corpus.split) corpus.split = stratified_split(corpus, ratio, run.seed);
  auto model = train_baseline(corpus, run.seed);
  model.save(out);
  run.output(out);
  auto test = corpus.subset(corpus.split->test);
  auto metrics = evaluate(model, test, run.cfg().gate_threshold);
  auto mpath = metrics_path.value_or(out / "metrics.csv");
  write_text_file(mpath, metrics.to_csv());
  run.outputs.push_back(mpath.string());
  run.posts_processed = static_cast<std::int64_t>(corpus.items.size());
  os << "trained on " << corpus.split->train.size() << " items; held-out macro-F1 " << metrics.macro_f1 << "\n";
}

void cmd_classify(Run& run, const fs::path& model_dir, const fs::path& in, const fs::path& out, std::ostream& os) {
  run.input(must_exist(model_dir));
  run.input(in);
  auto model = load_backend(model_dir);
  auto posts = load_posts(in);
  std::string lines;
  for (const auto& p : posts) {
    auto r = classify_post(*model, p, run.cfg().gate_threshold);
    lines += dump_line(json{{"channel_id", p.channel_id}, {"post_id", p.post_id}, {"result", r}}) + "\n";
  }
  write_text_file(out, lines);
  run.output(out);
  run.posts_processed = static_cast<std::int64_t>(posts.size());
  os << "classified " << posts.size() << " posts\n";
}

void cmd_scan(Run& run, const std::optional<fs::path>& urls_file, const std::optional<fs::path>& archive,
              const fs::path& out, const std::optional<fs::path>& mock, bool probe, std::ostream& os) {
  std::vector<std::string> urls;
  std::set<std::string> digests;
  if (urls_file) {
    run.input(*urls_file);
    urls = read_lines(*urls_file);
  }
  if (archive) {
    run.input(*archive);
    for (const auto& p : load_posts(*archive)) {
      for (const auto& l : p.links) {
        if (!is_platform_link(l)) urls.push_back(l);
      }
      for (const auto& a : p.attachments) {
        if (a.content_digest) digests.insert(*a.content_digest);
      }
    }
  }
  if (!urls_file && !archive) throw InputError("scan needs --urls or --archive");

  std::unique_ptr<MockScannerServer> server;
  ServiceSettings svc = run.settings.services;
  if (mock) {
    run.input(*mock);
    json tables;
    try {
      tables = json::parse(read_text_file(must_exist(*mock)));
    } catch (const json::exception& e) {
      throw InputError(mock->string() + ": " + e.what());
    }
    server = std::make_unique<MockScannerServer>(fixtures::tables_from_json(tables));
    server->start();
    svc.reputation_url = svc.fallback_url = svc.sandbox_url = server->base_url();
  }
  if (svc.reputation_url.empty() || svc.fallback_url.empty()) {
    throw EnvironmentError("no scanner configured: set reputation_url and fallback_url, or pass --mock");
  }
  auto bucket = std::make_shared<TokenBucket>(svc.scanner_rate_per_s, std::max(1.0, svc.scanner_rate_per_s));
  if (server) bucket = std::make_shared<TokenBucket>(1e6, 1e6);  // local tables have no quota
  auto rep = rate_limited(make_http_reputation_client({svc.reputation_url, run.settings.scanner_key}), bucket);
  auto fb = rate_limited(make_http_fallback_client({svc.fallback_url, run.settings.scanner_key}), bucket);

  ScanOptions opts;
  opts.now = run.now();
  auto batch = batch_scan(urls, *rep, *fb, run.cfg(), static_cast<std::size_t>(run.cfg().scan_concurrency), opts);

  std::vector<FileVerdict> files;
  if (!digests.empty()) {
    if (svc.sandbox_url.empty()) throw EnvironmentError("no sandbox configured: set sandbox_url");
    auto sandbox = rate_limited(make_http_sandbox_client({svc.sandbox_url, run.settings.scanner_key}), bucket);
    for (const auto& d : digests) {
      try {
        files.push_back(scan_file(d, *sandbox, run.cfg(), opts));
      } catch (const PermanentError& e) {
        log_event("warn", "scan.file_skipped", {{"digest", d}, {"reason", e.what()}});
      }
    }
  }

  fs::create_directories(out);
  write_text_file(out / "url_verdicts.jsonl", to_jsonl(batch.verdicts));
  write_text_file(out / "file_verdicts.jsonl", to_jsonl(files));
  const auto& s = batch.summary;
  json summary{{"urls", {{"total", s.total}, {"malicious", s.malicious}, {"benign", s.benign},
                         {"unreachable", s.unreachable}, {"malicious_fraction", nullptr}}},
               {"files", {{"total", files.size()},
                          {"malicious", std::count_if(files.begin(), files.end(), [](const FileVerdict& v) {
                             return v.outcome == FileFinal::Malicious;
                           })}}}};
  if (s.malicious_fraction) summary["urls"]["malicious_fraction"] = *s.malicious_fraction;
  write_text_file(out / "summary.json", summary.dump(2) + "\n");

  if (probe) {
    std::vector<std::string> targets;
    for (const auto& v : batch.verdicts) targets.push_back(v.url);
    auto results = probe_links(
        targets, [] { return std::make_unique<HttpPageClient>(); },
        static_cast<std::size_t>(run.cfg().probe_concurrency));
    std::string lines;
    for (const auto& r : results) lines += probe_to_jsonl(r);
    write_text_file(out / "probes.jsonl", lines);
  }
  run.urls_scanned = static_cast<std::int64_t>(batch.verdicts.size());
  run.output(out);
  os << "scanned " << s.total << " urls (" << s.malicious << " malicious) and " << files.size() << " files\n";
}

std::vector<std::pair<std::string, std::vector<std::string>>> read_groups(const fs::path& p) {
  std::vector<std::pair<std::string, std::vector<std::string>>> out;
  for_each_jsonl(must_exist(p), [&](std::size_t, const json& j) {
    out.emplace_back(j.at("group").get<std::string>(), j.at("urls").get<std::vector<std::string>>());
  });
  return out;
}

void cmd_discover(Run& run, const std::optional<fs::path>& seeds_file, const std::string& source,
                  const fs::path& fixture, const std::optional<fs::path>& model_dir, const fs::path& out,
                  const std::optional<fs::path>& external, const std::optional<fs::path>& monitored,
                  std::ostream& os) {
  require_replay(source);
  auto in = resolve_replay(fixture);
  run.input(in.script);
  std::vector<std::string> seeds;
  if (seeds_file) {
    run.input(*seeds_file);
    seeds = read_lines(*seeds_file);
  }
  auto mdir = model_dir.value_or(in.dir / "model");
  if (!fs::exists(mdir)) throw InputError("no model: pass --model (looked for " + mdir.string() + ")");
  run.input(mdir);
  auto model = load_backend(mdir);

  auto script = ReplaySource::from_file(in.script);
  Timestamp start = in.meta.value("start", script.last_event_time());
  Timestamp horizon = in.meta.value("horizon", start);
  ReplaySource src = std::move(script);
  src.advance_to(std::max(start, src.now()));
  run.started_at = src.now();

  FrontierOptions opts;
  opts.concurrency = static_cast<std::size_t>(run.cfg().eval_concurrency);
  if (monitored) {
    run.input(*monitored);
    for (auto& m : read_lines(*monitored)) opts.monitored.insert(to_lower(m));
  }
  std::vector<CandidateChannel> ext;
  if (external) {
    run.input(*external);
    ext = ingest_external_links(read_groups(*external), opts.monitored, src.now());
  }
  auto result = run_frontier_with_rechecks(
      seeds, src, *model, run.cfg(), [&](Timestamp t) { src.advance_to(t); }, horizon, opts, ext);

  std::string lines;
  std::string posts, channels;
  for (const auto& d : result.decisions) {
    lines += dump_line(json(d)) + "\n";
    run.posts_processed += d.posts_evaluated;
    if (d.decision != FlagDecision::Malicious) continue;
    ++run.channels_flagged;
    // Evidence for the report step: the evaluated posts and channel metadata.
    if (auto rec = src.channel_info(d.channel_id)) channels += dump_line(json(*rec)) + "\n";
    for (const auto& e : d.per_post) {
      try {
        posts += dump_line(json(src.fetch_post(d.channel_id, e.post_id))) + "\n";
      } catch (const Error& ex) {
        log_event("warn", "discover.evidence_missing", {{"channel_id", d.channel_id}, {"post_id", e.post_id}});
      }
    }
  }
  write_text_file(out, lines);
  run.output(out);
  write_text_file(sidecar(out, ".posts.jsonl"), posts);
  write_text_file(sidecar(out, ".channels.jsonl"), channels);
  write_text_file(sidecar(out, ".candidates.jsonl"), to_jsonl(result.candidates));
  std::string invites, errors;
  for (const auto& i : result.invite_links) invites += i + "\n";
  for (const auto& e : result.errors) {
    errors += dump_line(json{{"channel_id", e.channel_id}, {"kind", e.kind}, {"message", e.message}, {"at", e.at}}) + "\n";
  }
  write_text_file(sidecar(out, ".invites.txt"), invites);
  write_text_file(sidecar(out, ".errors.jsonl"), errors);
  for (auto s : {".posts.jsonl", ".channels.jsonl", ".candidates.jsonl", ".invites.txt", ".errors.jsonl"}) {
    run.outputs.push_back(sidecar(out, s).string());
  }
  os << "flagged " << run.channels_flagged << " of " << result.decisions.size() << " evaluated channels\n";
}

std::set<std::string> removed_channels(const std::vector<IngestEvent>& events,
                                       const std::vector<EngagementSnapshot>& snapshots) {
  std::map<std::string, Timestamp> deleted_at, last_seen;
  for (const auto& e : events) {
    if (e.kind == IngestEventKind::ChannelDeleted) deleted_at[e.channel_id] = std::max(deleted_at[e.channel_id], e.at);
  }
  for (const auto& s : snapshots) last_seen[s.channel_id] = std::max(last_seen[s.channel_id], s.taken_at);
  std::set<std::string> out;
  for (const auto& [id, t] : deleted_at) {
    auto it = last_seen.find(id);
    if (it != last_seen.end() && it->second < t) out.insert(id);
  }
  return out;
}

std::vector<AppListing> app_listings(const fs::path& catalog, const std::vector<PostRecord>& posts) {
  std::vector<AppListing> apps;
  for_each_jsonl(must_exist(catalog), [&](std::size_t, const json& j) {
    AppListing a;
    a.category = j.at("category").get<std::string>();
    a.price.app_id = to_lower(j.at("app_id").get<std::string>());
    auto pricing = j.at("pricing").get<std::string>();
    if (pricing == "Freemium") a.price.pricing = Pricing::Freemium;
    else if (pricing == "Premium") a.price.pricing = Pricing::Premium;
    else throw InputError("unknown pricing '" + pricing + "'");
    a.price.price_cents = j.at("price_cents").get<std::int64_t>();
    bool shared = false;
    for (const auto& p : posts) {
      std::string hay = to_lower(p.text);
      for (const auto& n : p.attachment_names()) {
        auto s = to_lower(n);
        std::replace(s.begin(), s.end(), '_', ' ');
        hay += " " + s;
      }
      if (hay.find(a.price.app_id) != std::string::npos) {
        a.views += p.views;
        shared = true;
      }
    }
    if (shared) apps.push_back(std::move(a));
  });
  return apps;
}

void cmd_analyze(Run& run, const fs::path& archive, const fs::path& out, const std::optional<fs::path>& apps_file,
                 const std::optional<fs::path>& forum_file, std::ostream& os) {
  ArchivePaths paths{must_exist(archive)};
  run.input(archive);
  auto latest = latest_posts(read_archive(must_exist(paths.posts())));
  auto channels = read_channels(must_exist(paths.channels()));
  auto snapshots = read_snapshots(must_exist(paths.snapshots()));
  auto events = fs::exists(paths.events()) ? read_events(paths.events()) : std::vector<IngestEvent>{};
  const auto& cfg = run.cfg();
  fs::create_directories(out);

  auto growth = growth_series(snapshots, cfg);
  write_text_file(out / "growth.json", to_json_report(growth).dump(2) + "\n");

  std::set<std::string> ca_channels;
  for (const auto& c : channels) {
    if (c.category) ca_channels.insert(c.channel_id);
  }
  std::vector<double> ca_rates, benign_rates;
  for (const auto& o : growth.observations) {
    (ca_channels.contains(o.channel_id) ? ca_rates : benign_rates).push_back(o.growth_rate);
  }
  json comparison = nullptr;
  if (ca_rates.size() >= 2 && benign_rates.size() >= 2) {
    auto c = compare_growth(ca_rates, benign_rates);
    comparison = {{"median_ca", c.median_a}, {"median_benign", c.median_b}, {"u", c.u},
                  {"p_value", c.p_value}, {"exact", c.exact}};
  }

  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json forwards{{"growth_comparison", comparison}};
  if (!growth.observations.empty()) {
    auto fwd = forward_growth_association(latest, growth.observations);
    forwards.update({{"median_high", opt(fwd.median_high)}, {"median_low", opt(fwd.median_low)},
                     {"p_value", opt(fwd.p_value)}, {"n_high", fwd.n_high}, {"n_low", fwd.n_low}});
  }
  write_text_file(out / "forwards.json", forwards.dump(2) + "\n");

  auto removed = removed_channels(events, snapshots);
  auto migrations = detect_migration(latest, snapshots, channels, removed, cfg);
  json mig = json::array();
  for (const auto& m : migrations) {
    mig.push_back({{"old_channel", m.old_channel}, {"new_channel", m.new_channel}, {"announced_at", m.announced_at},
                   {"baseline_subs", m.baseline_subs},
                   {"migrated_subs", m.migrated_subs ? json(*m.migrated_subs) : json(nullptr)},
                   {"rate", opt(m.rate)}, {"exceeds_base", m.exceeds_base}});
  }
  write_text_file(out / "migration.json", json{{"removed", removed}, {"events", mig}}.dump(2) + "\n");

  auto ranked = emoji_distribution(latest);
  json emo = json::array();
  for (const auto& [e, n] : ranked) emo.push_back({e, n});
  write_text_file(out / "reactions.json",
                  json{{"distinct", ranked.size()}, {"top10_share", opt(top_k_share(ranked, 10))}, {"ranked", emo}}
                          .dump(2) + "\n");

  auto rs = reply_stats(latest, channels);
  write_text_file(out / "replies.json", json{{"fraction_without_replies", opt(rs.fraction_without_replies)},
                                             {"median_words", opt(rs.median_words)},
                                             {"mean_words", opt(rs.mean_words)},
                                             {"replies", rs.replies}}
                                            .dump(2) + "\n");

  if (apps_file) {
    run.input(*apps_file);
    auto table = estimate_damage(app_listings(*apps_file, latest), cfg);
    write_text_file(out / "damage.csv", table.to_csv());
  }
  if (forum_file) {
    run.input(*forum_file);
    std::vector<std::string> left, right = read_lines(*forum_file);
    for (const auto& p : latest) {
      for (const auto& l : p.links) {
        if (!is_platform_link(l)) left.push_back(l);
      }
    }
    write_text_file(out / "overlap.json", to_json_report(forum_overlap(left, right)).dump(2) + "\n");
  }
  run.posts_processed = static_cast<std::int64_t>(latest.size());
  run.output(out);
  os << "analyzed " << latest.size() << " posts, " << growth.observations.size() << " growth windows, "
     << migrations.size() << " migrations\n";
}

Destination parse_destination(const std::string& s) {
  if (auto d = destination_from_string(s)) return *d;
  throw InputError("unknown destination '" + s + "' (PlatformAbuse, Organization, Blocklist)");
}

void cmd_report_bundle(Run& run, const fs::path& decisions_path, const std::vector<fs::path>& archives,
                       const std::optional<fs::path>& verdicts, const fs::path& outbox_dir,
                       const std::string& destination, std::ostream& os) {
  run.input(must_exist(decisions_path));
  auto dest = parse_destination(destination);
  std::vector<ChannelFlagDecision> decisions;
  for_each_jsonl(decisions_path, [&](std::size_t, const json& j) { decisions.push_back(j.get<ChannelFlagDecision>()); });

  EvidenceStore ev;
  std::map<std::string, ChannelRecord> channels;
  auto add_channels = [&](const std::vector<ChannelRecord>& cs) {
    for (const auto& c : cs) channels[c.channel_id] = c;
  };
  if (auto p = sidecar(decisions_path, ".posts.jsonl"); fs::exists(p)) ev.add_posts(read_archive(p));
  if (auto p = sidecar(decisions_path, ".channels.jsonl"); fs::exists(p)) add_channels(read_channels(p));
  for (const auto& a : archives) {
    run.input(a);
    ArchivePaths ap{must_exist(a)};
    ev.add_posts(latest_posts(read_archive(must_exist(ap.posts()))));
    if (fs::exists(ap.channels())) add_channels(read_channels(ap.channels()));
  }
  if (verdicts) {
    run.input(must_exist(*verdicts));
    if (fs::exists(*verdicts / "url_verdicts.jsonl")) ev.add_url_verdicts(read_jsonl<UrlVerdict>(*verdicts / "url_verdicts.jsonl"));
    if (fs::exists(*verdicts / "file_verdicts.jsonl")) ev.add_file_verdicts(read_jsonl<FileVerdict>(*verdicts / "file_verdicts.jsonl"));
  }

  Outbox outbox(outbox_dir);
  std::size_t written = 0, suppressed = 0;
  for (const auto& d : decisions) {
    if (d.decision != FlagDecision::Malicious) continue;
    auto it = channels.find(d.channel_id);
    ChannelRecord rec = it != channels.end() ? it->second : ChannelRecord{d.channel_id, d.channel_id, "", 0, false, std::nullopt, SourceKind::Replay};
    auto bundle = build_report(rec, d, ev, run.now(), dest);
    if (outbox.write(bundle, run.cfg().report_suppression_days)) {
      ++written;
      os << bundle.bundle_id() << " " << d.channel_id << "\n";
    } else {
      ++suppressed;
    }
  }
  run.channels_flagged = static_cast<std::int64_t>(written);
  run.output(outbox_dir);
  os << "wrote " << written << " bundles, suppressed " << suppressed << "\n";
}

void cmd_report_export(Run& run, const fs::path& verdicts_path, const std::string& destination, const fs::path& out,
                       const std::optional<fs::path>& archive, std::ostream& os) {
  auto vpath = fs::is_directory(must_exist(verdicts_path)) ? verdicts_path / "url_verdicts.jsonl" : verdicts_path;
  run.input(must_exist(vpath));
  auto verdicts = read_jsonl<UrlVerdict>(vpath);
  std::map<std::string, Timestamp> first_seen;
  if (archive) {
    run.input(*archive);
    for (const auto& p : load_posts(*archive)) {
      for (const auto& l : p.links) {
        auto n = normalize_url(l);
        if (!n) continue;
        auto [it, fresh] = first_seen.emplace(*n, p.posted_at);
        if (!fresh) it->second = std::min(it->second, p.posted_at);
      }
    }
  }
  auto path = write_blocklist(out, destination, verdicts, first_seen);
  run.output(path);
  auto rows = std::count_if(verdicts.begin(), verdicts.end(), [](const UrlVerdict& v) { return v.outcome == UrlFinal::Malicious; });
  run.urls_scanned = static_cast<std::int64_t>(verdicts.size());
  os << "exported " << rows << " urls to " << path.string() << "\n";
}

void cmd_report_ledger(Run& run, const fs::path& ledger, const std::optional<std::string>& bundle,
                       std::optional<Timestamp> sent_at, const std::string& destination,
                       const std::optional<std::string>& outcome, std::optional<Timestamp> outcome_at,
                       const std::optional<fs::path>& out, std::ostream& os) {
  if (bundle) {
    if (!sent_at || !outcome) throw InputError("appending to the ledger needs --sent-at and --outcome");
    auto o = outcome_from_string(*outcome);
    if (!o) throw InputError("unknown outcome '" + *outcome + "'");
    append_ledger(ledger, make_ledger_entry(*bundle, *sent_at, parse_destination(destination), *o, outcome_at));
  }
  run.input(must_exist(ledger));
  auto st = ledger_stats(read_ledger(ledger));
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json by_dest = json::object();
  for (const auto& [d, m] : st.median_response_days_by_destination) by_dest[d] = opt(m);
  json j{{"total", st.total}, {"removed", st.removed}, {"removal_rate", opt(st.removal_rate)},
         {"median_response_days", opt(st.median_response_days)}, {"median_response_days_by_destination", by_dest}};
  if (out) {
    write_text_file(*out, j.dump(2) + "\n");
    run.output(*out);
  } else {
    run.manifest = fs::path(ledger.string() + ".manifest.json");
  }
  os << j.dump(2) << "\n";
}

void cmd_serve_mock(Run& run, const fs::path& tables_path, std::ostream& os) {
  run.input(must_exist(tables_path));
  json tables;
  try {
    tables = json::parse(read_text_file(tables_path));
  } catch (const json::exception& e) {
    throw InputError(tables_path.string() + ": " + e.what());
  }
  MockScannerServer server(fixtures::tables_from_json(tables));
  server.start();
  os << server.base_url() << std::endl;
  // Serve until stdin closes.
  std::string line;
  while (std::getline(std::cin, line)) {
  }
  server.stop();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"darkgram: discovery, scanning and analysis of cybercriminal broadcast channels", "darkgram"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<fs::path> config_path, log_path, manifest_path;
  std::uint64_t seed = 0;
  std::optional<Timestamp> now;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--seed", seed, "seed for every random choice");
  app.add_option("--now", now, "pin the clock (epoch seconds) for timestamps and manifests");
  app.add_option("--log", log_path, "append JSONL logs here (default: $DARKGRAM_LOG)");
  app.add_option("--manifest", manifest_path, "run manifest path (default: next to the main output)");

  // fixtures
  auto* fx = app.add_subcommand("fixtures", "write synthetic fixtures");
  std::string fx_kind = "pipeline";
  fs::path fx_out;
  std::size_t per_class = 1000;
  fx->add_option("--kind", fx_kind, "corpus, frontier, deferred, external, scanner or pipeline");
  fx->add_option("--out", fx_out, "output directory")->required();
  fx->add_option("--per-class", per_class, "corpus items per label");

  // ingest
  auto* ing = app.add_subcommand("ingest", "poll a channel source into an archive");
  std::string source = "replay";
  fs::path fixture, ing_out;
  std::optional<fs::path> channels_file;
  ing->add_option("--source", source, "replay or live");
  ing->add_option("--fixture", fixture, "replay script or fixture directory")->required();
  ing->add_option("--out", ing_out, "archive directory")->required();
  ing->add_option("--channels", channels_file, "channel ids to poll, one per line");

  // train
  auto* tr = app.add_subcommand("train", "train the baseline classifier");
  fs::path corpus_path, tr_out;
  double ratio = 0.7;
  std::optional<fs::path> metrics_path;
  tr->add_option("--corpus", corpus_path, "labeled corpus JSONL")->required();
  tr->add_option("--out", tr_out, "model artifact directory")->required();
  tr->add_option("--train-ratio", ratio, "stratified split ratio");
  tr->add_option("--metrics", metrics_path, "held-out metrics CSV");

  // classify
  auto* cl = app.add_subcommand("classify", "classify posts");
  fs::path model_dir, cl_in, cl_out;
  cl->add_option("--model", model_dir, "model artifact directory")->required();
  cl->add_option("--in", cl_in, "posts JSONL or archive directory")->required();
  cl->add_option("--out", cl_out, "results JSONL")->required();

  // scan
  auto* sc = app.add_subcommand("scan", "scan URLs and executables");
  std::optional<fs::path> urls_file, sc_archive, mock;
  fs::path sc_out;
  bool probe = false;
  sc->add_option("--urls", urls_file, "URLs, one per line");
  sc->add_option("--archive", sc_archive, "archive directory: scan every shared URL and executable");
  sc->add_option("--out", sc_out, "output directory")->required();
  sc->add_option("--mock", mock, "serve these scanner tables locally instead of real services");
  sc->add_flag("--probe", probe, "also probe each URL for a download (filenames only)");

  // discover
  auto* di = app.add_subcommand("discover", "find and evaluate linked channels");
  std::optional<fs::path> seeds_file, di_model, external, monitored;
  fs::path di_fixture, di_out = "decisions.jsonl";
  std::string di_source = "replay";
  di->add_option("--seeds", seeds_file, "seed channel ids, one per line");
  di->add_option("--source", di_source, "replay or live");
  di->add_option("--fixture", di_fixture, "replay script or fixture directory")->required();
  di->add_option("--model", di_model, "model artifact directory (default: <fixture>/model)");
  di->add_option("--out", di_out, "decisions JSONL");
  di->add_option("--external", external, "external link groups JSONL {group, urls}");
  di->add_option("--monitored", monitored, "already monitored channels, never candidates");

  // analyze
  auto* an = app.add_subcommand("analyze", "engagement, growth, migration, damage and overlap reports");
  fs::path an_archive, an_out;
  std::optional<fs::path> apps_file, forum_file;
  an->add_option("--archive", an_archive, "archive directory")->required();
  an->add_option("--out", an_out, "output directory")->required();
  an->add_option("--apps", apps_file, "app price catalog JSONL");
  an->add_option("--forum", forum_file, "forum texts, one per line");

  // report
  auto* rp = app.add_subcommand("report", "disclosure bundles, blocklists and the ledger");
  rp->require_subcommand(1);
  auto* rb = rp->add_subcommand("bundle", "build report bundles for flagged channels");
  fs::path rb_decisions, rb_outbox;
  std::vector<fs::path> rb_archives;
  std::optional<fs::path> rb_verdicts;
  std::string rb_dest = "PlatformAbuse";
  rb->add_option("--decisions", rb_decisions, "decisions JSONL")->required();
  rb->add_option("--archive", rb_archives, "archive directories with post evidence");
  rb->add_option("--verdicts", rb_verdicts, "scan output directory");
  rb->add_option("--outbox", rb_outbox, "outbox directory")->required();
  rb->add_option("--destination", rb_dest, "PlatformAbuse, Organization or Blocklist");
  auto* re = rp->add_subcommand("export", "blocklist CSV of malicious URLs");
  fs::path re_verdicts, re_out;
  std::string re_dest;
  std::optional<fs::path> re_archive;
  re->add_option("--verdicts", re_verdicts, "url_verdicts.jsonl or scan output directory")->required();
  re->add_option("--destination", re_dest, "blocklist name")->required();
  re->add_option("--out", re_out, "output directory")->required();
  re->add_option("--archive", re_archive, "archive for first_seen times");
  auto* rl = rp->add_subcommand("ledger", "record outcomes and summarize the disclosure ledger");
  fs::path ledger;
  std::optional<std::string> rl_bundle, rl_outcome;
  std::optional<Timestamp> rl_sent, rl_outcome_at;
  std::string rl_dest = "PlatformAbuse";
  std::optional<fs::path> rl_out;
  rl->add_option("--ledger", ledger, "ledger JSONL")->required();
  rl->add_option("--append", rl_bundle, "bundle id to record");
  rl->add_option("--sent-at", rl_sent, "epoch seconds");
  rl->add_option("--destination", rl_dest, "PlatformAbuse, Organization or Blocklist");
  rl->add_option("--outcome", rl_outcome, "Removed, Active, Acknowledged or NoResponse");
  rl->add_option("--outcome-at", rl_outcome_at, "epoch seconds");
  rl->add_option("--out", rl_out, "stats JSON");

  auto* sm = app.add_subcommand("serve-mock", "serve scanner tables on 127.0.0.1 until stdin closes");
  fs::path sm_tables;
  sm->add_option("--tables", sm_tables, "scanner tables JSON")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  Run run;
  run.seed = seed;
  run.pinned_now = now;
  run.manifest = manifest_path;
  for (auto* s : app.get_subcommands()) {
    run.subcommand = s->get_name();
    for (auto* n : s->get_subcommands()) run.subcommand += " " + n->get_name();
  }
  std::string joined;
  for (const auto& a : args) joined += a + '\x1f';

  int code = 0;
  try {
    auto env = darkgram_environment();
    if (!config_path) {
      if (auto it = env.find("DARKGRAM_CONFIG"); it != env.end() && !it->second.empty()) config_path = it->second;
    }
    if (config_path) must_exist(*config_path);
    run.settings = load_settings(config_path, env);
    if (config_path) run.input(*config_path);
    run.run_id = "run-" + hex64(fnv1a64(joined + config_to_text(run.cfg()) + std::to_string(seed)));

    if (!log_path) {
      if (auto it = env.find("DARKGRAM_LOG"); it != env.end() && !it->second.empty()) log_path = it->second;
    }
    if (log_path) {
      auto path = *log_path;
      set_log_sink([path](const std::string& line) {
        std::ofstream f(path, std::ios::app | std::ios::binary);
        f << line << "\n";
      });
    } else {
      set_log_sink(nullptr);
    }
    set_log_context({{"run_id", run.run_id}, {"subcommand", run.subcommand}});
    log_event("info", "run.start", {{"args", args}});

    if (*fx) cmd_fixtures(run, fx_kind, fx_out, per_class, out);
    else if (*ing) cmd_ingest(run, source, fixture, ing_out, channels_file, out);
    else if (*tr) cmd_train(run, corpus_path, tr_out, ratio, metrics_path, out);
    else if (*cl) cmd_classify(run, model_dir, cl_in, cl_out, out);
    else if (*sc) cmd_scan(run, urls_file, sc_archive, sc_out, mock, probe, out);
    else if (*di) cmd_discover(run, seeds_file, di_source, di_fixture, di_model, di_out, external, monitored, out);
    else if (*an) cmd_analyze(run, an_archive, an_out, apps_file, forum_file, out);
    else if (*rb) cmd_report_bundle(run, rb_decisions, rb_archives, rb_verdicts, rb_outbox, rb_dest, out);
    else if (*re) cmd_report_export(run, re_verdicts, re_dest, re_out, re_archive, out);
    else if (*rl) cmd_report_ledger(run, ledger, rl_bundle, rl_sent, rl_dest, rl_outcome, rl_outcome_at, rl_out, out);
    else if (*sm) cmd_serve_mock(run, sm_tables, out);
  } catch (const InputError& e) {
    err << "darkgram: " << e.what() << "\n";
    code = 1;
  } catch (const nlohmann::json::exception& e) {
    err << "darkgram: malformed input: " << e.what() << "\n";
    code = 1;
  } catch (const Error& e) {
    err << "darkgram: " << e.what() << "\n";
    code = 2;
  } catch (const fs::filesystem_error& e) {
    err << "darkgram: " << e.what() << "\n";
    code = 2;
  } catch (const std::exception& e) {
    err << "darkgram: internal error: " << e.what() << "\n";
    code = 2;
  }
  log_event(code == 0 ? "info" : "error", "run.end", {{"exit_code", code}});
  try {
    write_manifest(run, code);
  } catch (const std::exception& e) {
    err << "darkgram: cannot write run manifest: " << e.what() << "\n";
    if (code == 0) code = 2;
  }
  set_log_sink(nullptr);
  return code;
}

}  // namespace darkgram::cli
