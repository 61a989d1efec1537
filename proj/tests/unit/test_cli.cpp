#include <doctest.h>

#include <set>
#include <sstream>

#include "cli.hpp"
#include "darkgram/discover.hpp"
#include "darkgram/ingest.hpp"
#include "darkgram/report.hpp"
#include "darkgram/serialize.hpp"
#include "support.hpp"

using namespace darkgram;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result dg(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<json> jsonl(const fs::path& p) {
  std::vector<json> out;
  std::istringstream in(read_text_file(p));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

json manifest(const fs::path& p) { return json::parse(read_text_file(p)); }

std::int64_t counter(const json& m, const char* name) { return m.at("counters").at(name).get<std::int64_t>(); }

}  // namespace

TEST_CASE("argument errors exit 1") {
  auto r = dg({"classify", "--model", "m", "--in", "x", "--out", "y", "--bogus"});
  CHECK(r.code == 1);
  CHECK(dg({}).code == 1);
  CHECK(dg({"frobnicate"}).code == 1);
  CHECK(dg({"train", "--out", "x"}).code == 1);  // missing required option
  CHECK(dg({"--help"}).code == 0);
}

TEST_CASE("a missing input exits 1 and names the path") {
  testing::TempDir dir;
  const auto missing = (dir / "no_such_model").string();
  auto r = dg({"classify", "--model", missing, "--in", (dir / "posts.jsonl").string(), "--out",
               (dir / "out.jsonl").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find(missing) != std::string::npos);

  const auto corpus = (dir / "corpus.jsonl").string();
  r = dg({"train", "--corpus", corpus, "--out", (dir / "model").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find(corpus) != std::string::npos);

  r = dg({"--config", (dir / "nope.conf").string(), "fixtures", "--out", (dir / "fx").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("nope.conf") != std::string::npos);
}

TEST_CASE("environment problems exit 2") {
  testing::TempDir dir;
  write_text_file(dir / "replay.jsonl", "");
  auto r = dg({"ingest", "--source", "live", "--fixture", (dir / "replay.jsonl").string(), "--out",
               (dir / "archive").string()});
  CHECK(r.code == 2);
  write_text_file(dir / "urls.txt", "https://a.test/\n");
  r = dg({"scan", "--urls", (dir / "urls.txt").string(), "--out", (dir / "scan").string()});
  CHECK(r.code == 2);  // no scanner configured and no mock
}

TEST_CASE("bad configuration exits 1") {
  testing::TempDir dir;
  write_text_file(dir / "bad.conf", "channel_eval_posts = -3\n");
  auto r = dg({"--config", (dir / "bad.conf").string(), "fixtures", "--kind", "scanner", "--out",
               (dir / "fx").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("channel_eval_posts") != std::string::npos);
}

TEST_CASE("pipeline run: manifests agree with their outputs") {
  testing::TempDir dir;
  auto p = [&](const char* s) { return (dir / s).string(); };
  const std::string conf = p("fx/darkgram.conf");
  REQUIRE(dg({"--seed", "3", "fixtures", "--kind", "pipeline", "--out", p("fx")}).code == 0);

  auto r = dg({"--config", conf, "ingest", "--fixture", p("fx"), "--out", p("archive")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  auto m = manifest(dir / "archive/run_manifest.json");
  CHECK(m.at("subcommand") == "ingest");
  CHECK(m.at("exit_code") == 0);
  const auto latest = latest_posts(read_archive(dir / "archive/posts.jsonl"));
  CHECK(counter(m, "posts_processed") == static_cast<std::int64_t>(latest.size()));

  r = dg({"--seed", "3", "train", "--corpus", p("fx/corpus.jsonl"), "--out", p("model")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (auto f : {"model.bin", "tokenizer.json", "manifest.json", "metrics.csv"}) CHECK(fs::exists(dir / "model" / f));

  r = dg({"--now", "1705000000", "classify", "--model", p("model"), "--in", p("archive"), "--out", p("results.jsonl")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(counter(manifest(dir / "results.jsonl.manifest.json"), "posts_processed") ==
        static_cast<std::int64_t>(jsonl(dir / "results.jsonl").size()));

  r = dg({"--now", "1705000000", "scan", "--archive", p("archive"), "--mock", p("fx/scanner.json"), "--out", p("scan")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto verdicts = jsonl(dir / "scan/url_verdicts.jsonl");
  CHECK(counter(manifest(dir / "scan/run_manifest.json"), "urls_scanned") == static_cast<std::int64_t>(verdicts.size()));
  auto summary = json::parse(read_text_file(dir / "scan/summary.json"));
  std::int64_t mal = 0;
  for (const auto& v : verdicts) mal += v.at("final") == "Malicious";
  CHECK(summary.at("urls").at("malicious") == mal);

  r = dg({"discover", "--seeds", p("fx/seeds.txt"), "--fixture", p("fx"), "--model", p("model"), "--out",
          p("disc/decisions.jsonl")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  std::int64_t flagged = 0, evaluated = 0;
  for (const auto& d : jsonl(dir / "disc/decisions.jsonl")) {
    flagged += d.at("decision") == "Malicious";
    evaluated += d.at("posts_evaluated").get<std::int64_t>();
  }
  m = manifest(dir / "disc/decisions.jsonl.manifest.json");
  CHECK(counter(m, "channels_flagged") == flagged);
  CHECK(counter(m, "posts_processed") == evaluated);
  CHECK(flagged > 0);

  r = dg({"--config", conf, "analyze", "--archive", p("archive"), "--out", p("analysis"), "--apps", p("fx/apps.jsonl"),
          "--forum", p("fx/forum.txt")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (auto f : {"damage.csv", "growth.json", "migration.json", "overlap.json", "reactions.json", "replies.json"}) {
    CHECK(fs::exists(dir / "analysis" / f));
  }
  CHECK(read_text_file(dir / "analysis/damage.csv").rfind("Category (Count),Min,Max,Median,Mean,10% conversion\n", 0) == 0);

  r = dg({"--now", "1705000000", "report", "bundle", "--decisions", p("disc/decisions.jsonl"), "--archive", p("archive"),
          "--verdicts", p("scan"), "--outbox", p("outbox")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  std::int64_t bundles = 0;
  for (const auto& e : fs::directory_iterator(dir / "outbox")) bundles += e.is_directory();
  CHECK(counter(manifest(dir / "outbox/run_manifest.json"), "channels_flagged") == bundles);
  CHECK(bundles == flagged);
  // a second run inside the suppression window writes nothing new
  r = dg({"--now", "1705086400", "report", "bundle", "--decisions", p("disc/decisions.jsonl"), "--outbox", p("outbox")});
  REQUIRE(r.code == 0);
  CHECK(counter(manifest(dir / "outbox/run_manifest.json"), "channels_flagged") == 0);

  r = dg({"--now", "1705000000", "report", "export", "--verdicts", p("scan"), "--destination", "phishtank", "--out",
          p("blocklists"), "--archive", p("archive")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto csv = read_text_file(dir / "blocklists/blocklist_phishtank.csv");
  CHECK(static_cast<std::int64_t>(std::count(csv.begin(), csv.end(), '\n')) == mal + 1);
  CHECK(counter(manifest(dir / "blocklists/blocklist_phishtank.csv.manifest.json"), "urls_scanned") ==
        static_cast<std::int64_t>(verdicts.size()));
}

TEST_CASE("ledger subcommand") {
  testing::TempDir dir;
  const auto ledger = (dir / "ledger.jsonl").string();
  for (auto [days, outcome] : {std::pair{3, "Removed"}, {4, "Removed"}, {9, "Active"}}) {
    auto r = dg({"report", "ledger", "--ledger", ledger, "--append", "b" + std::to_string(days), "--sent-at", "0",
                 "--outcome", outcome, "--outcome-at", std::to_string(days * 86400 + 5)});
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
  auto r = dg({"report", "ledger", "--ledger", ledger, "--out", (dir / "stats.json").string()});
  REQUIRE(r.code == 0);
  auto s = json::parse(read_text_file(dir / "stats.json"));
  CHECK(s.at("total") == 3);
  CHECK(s.at("removed") == 2);
  CHECK(s.at("median_response_days") == 4.0);
  CHECK(dg({"report", "ledger", "--ledger", ledger, "--append", "x", "--sent-at", "0", "--outcome", "Gone"}).code == 1);
}

TEST_CASE("fixtures subcommand") {
  testing::TempDir dir;
  REQUIRE(dg({"--seed", "4", "fixtures", "--kind", "scanner", "--out", (dir / "s").string()}).code == 0);
  auto urls = read_text_file(dir / "s/urls.txt");
  CHECK(std::count(urls.begin(), urls.end(), '\n') == 1000);
  CHECK(fs::exists(dir / "s/scanner.json"));
  CHECK(dg({"fixtures", "--kind", "nonsense", "--out", (dir / "n").string()}).code == 1);
}
