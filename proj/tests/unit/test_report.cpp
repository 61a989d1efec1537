#include <doctest.h>

#include <random>

#include "darkgram/errors.hpp"
#include "darkgram/report.hpp"
#include "darkgram/serialize.hpp"
#include "darkgram/text.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace darkgram;

namespace {

const std::string kDigest(64, 'e');

std::size_t utf8_length(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    auto j = s.find('\n', i);
    out.push_back(s.substr(i, j - i));
    i = j + 1;
  }
  return out;
}

const std::string kPayload = "alice@example.com:hunter2";

ChannelRecord channel() {
  ChannelRecord c;
  c.channel_id = "leakhub";
  c.title = "Leak Hub";
  c.description = "fresh combos daily";
  return c;
}

// A Malicious decision over `n` posts of which `flagged` are CA, newest first.
ChannelFlagDecision decision(int n, int flagged) {
  ChannelFlagDecision d;
  d.channel_id = "leakhub";
  d.decision = FlagDecision::Malicious;
  d.majority_category = CacCategory::CredentialCompromise;
  for (int i = 0; i < n; ++i) {
    PostEvidence e;
    e.post_id = 100 - i;
    e.posted_at = 1704067200 + (100 - i) * 3600;
    e.result.is_ca = i < flagged;
    if (e.result.is_ca) e.result.category = CacCategory::CredentialCompromise;
    d.per_post.push_back(e);
  }
  d.posts_evaluated = n;
  d.flagged_count = flagged;
  return d;
}

EvidenceStore store(int n) {
  EvidenceStore ev;
  std::vector<PostRecord> posts;
  for (int i = 0; i < n; ++i) {
    PostRecord p;
    p.channel_id = "leakhub";
    p.post_id = 100 - i;
    p.posted_at = 1704067200 + (100 - i) * 3600;
    p.text = "combo list #" + std::to_string(i) + " at https://dl.test/" + std::to_string(i);
    p.links = {"https://dl.test/" + std::to_string(i)};
    AttachmentMeta exe{"tool.exe", 1000, AttachmentKind::Executable, kDigest};
    AttachmentMeta txt{"combo.txt", 5000, AttachmentKind::Document, std::nullopt};
    p.attachments = {exe, txt};
    posts.push_back(p);
  }
  ev.add_posts(posts);
  UrlVerdict v;
  v.url = "https://dl.test/0";
  v.engine_hits = 4;
  v.engines_total = 70;
  v.outcome = UrlFinal::Malicious;
  ev.add_url_verdicts({v});
  ev.add_file_verdicts({FileVerdict{kDigest, true, 3, false, FileFinal::Malicious}});
  return ev;
}

}  // namespace

TEST_CASE("bundle keeps the ten newest flagged posts") {
  auto ev = store(15);
  auto b = build_report(channel(), decision(15, 12), ev, 1705000000);
  REQUIRE(b.post_summaries.size() == 10);
  for (std::size_t i = 0; i < b.post_summaries.size(); ++i) {
    CHECK(b.post_summaries[i].post_id == 100 - static_cast<std::int64_t>(i));
  }
  CHECK(b.handle_url == "https://t.me/leakhub");
  CHECK(b.majority_category == CacCategory::CredentialCompromise);

  auto few = build_report(channel(), decision(10, 7), ev, 1705000000);
  CHECK(few.post_summaries.size() == 7);

  auto d = decision(10, 4);
  d.decision = FlagDecision::NotFlagged;
  CHECK_THROWS_AS(build_report(channel(), d, ev, 0), InputError);
}

TEST_CASE("evidence refs cite verdicts, never payloads") {
  auto ev = store(10);
  auto b = build_report(channel(), decision(10, 6), ev, 1705000000);
  const auto& first = b.post_summaries.front();
  CHECK(first.verdict_refs.size() == 2);  // url verdict and file verdict
  CHECK(std::is_sorted(b.evidence_refs.begin(), b.evidence_refs.end()));
  const auto text = json(b).dump() + render_email(b);
  CHECK(text.find(kDigest) == std::string::npos);
  CHECK(text.find(kPayload) == std::string::npos);
}

TEST_CASE("excerpts are cut at 280 code points") {
  auto ev = store(10);
  std::string longtext;
  for (int i = 0; i < 400; ++i) longtext += "é";  // two bytes each
  ev.posts[{"leakhub", 100}].text = longtext;
  auto b = build_report(channel(), decision(10, 5), ev, 0);
  const auto& ex = b.post_summaries.front().excerpt;
  CHECK(utf8_length(ex) == kExcerptChars);
  CHECK(ex.size() == 2 * kExcerptChars);

  // a bare file post is summarised by its file names
  ev.posts[{"leakhub", 99}].text.clear();
  b = build_report(channel(), decision(10, 5), ev, 0);
  CHECK(b.post_summaries[1].excerpt == "[attachments: tool.exe combo.txt]");
}

TEST_CASE("email rendering is a pure function of the bundle") {
  ReportBundle b;
  b.channel_id = "leakhub";
  b.channel_name = "Leak Hub";
  b.handle_url = "https://t.me/leakhub";
  b.majority_category = CacCategory::CredentialCompromise;
  b.created_at = 1709294400;
  ClassificationResult r;
  r.is_ca = true;
  r.category = CacCategory::CredentialCompromise;
  b.post_summaries = {{12, 1709290800, "fresh combos", r, {"u-1"}}, {11, 1709287200, "more", r, {}}};
  b.evidence_refs = {"u-1"};
  const std::string want =
      "Subject: Abuse report: Leak Hub (https://t.me/leakhub)\n"
      "Report-ID: " + b.bundle_id() + "\n"
      "Date: 2024-03-01T12:00:00Z\n"
      "\n"
      "Channel: Leak Hub\n"
      "URL: https://t.me/leakhub\n"
      "Category: CredentialCompromise\n"
      "\n"
      "The channel distributes cybercriminal content. Its most recent flagged posts:\n"
      "\n"
      "1. Post 12 (2024-03-01T11:00:00Z) [CredentialCompromise]\n"
      "   fresh combos\n"
      "   Evidence: u-1\n"
      "2. Post 11 (2024-03-01T10:00:00Z) [CredentialCompromise]\n"
      "   more\n"
      "\n"
      "Evidence references:\n"
      "- u-1\n";
  CHECK(render_email(b) == want);
  CHECK(render_email(b) == render_email(json(b).get<ReportBundle>()));
  CHECK(json(b).get<ReportBundle>() == b);
}

TEST_CASE("outbox suppresses repeats within the window") {
  testing::TempDir dir;
  Outbox box(dir / "outbox");
  auto ev = store(12);
  auto b1 = build_report(channel(), decision(10, 6), ev, 1705000000);
  auto p = box.write(b1);
  REQUIRE(p.has_value());
  CHECK(std::filesystem::exists(*p / "report.txt"));
  CHECK(std::filesystem::exists(*p / "bundle.json"));
  CHECK(p->filename() == b1.bundle_id());

  // same posts ten days later: suppressed
  auto b2 = build_report(channel(), decision(10, 6), ev, 1705000000 + 10 * kSecondsPerDay);
  CHECK_FALSE(box.write(b2).has_value());
  // a newly flagged post goes through
  auto d = decision(11, 7);
  for (auto& e : d.per_post) e.post_id += 1, e.posted_at += 3600;
  auto b3 = build_report(channel(), d, ev, 1705000000 + 11 * kSecondsPerDay);
  CHECK(box.write(b3).has_value());
  // after the window: goes through
  auto b4 = build_report(channel(), decision(10, 6), ev, 1705000000 + 45 * kSecondsPerDay);
  CHECK(box.write(b4).has_value());
  // another destination is independent
  auto b5 = build_report(channel(), decision(10, 6), ev, 1705000000 + kSecondsPerDay, Destination::Organization);
  CHECK(box.write(b5).has_value());
  CHECK(box.bundles().size() == 4);
}

TEST_CASE("no report artifact holds payload bytes") {
  // Property: across random bundles nothing written carries a digest of a
  // non-executable or any attachment content.
  std::mt19937_64 rng(5);
  testing::TempDir dir;
  Outbox box(dir / "outbox");
  for (int trial = 0; trial < 30; ++trial) {
    auto ev = store(12);
    for (auto& [key, p] : ev.posts) {
      p.attachments.push_back({"dump.txt", 10, AttachmentKind::Document, std::string(40, 'a' + trial % 6)});
    }
    auto b = build_report(channel(), decision(12, 5 + static_cast<int>(rng() % 7)), ev,
                          1705000000 + trial * 40 * kSecondsPerDay);
    box.write(b);
  }
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir.path())) {
    if (!entry.is_regular_file()) continue;
    const auto text = read_text_file(entry.path());
    for (int k = 0; k < 6; ++k) CHECK(text.find(std::string(40, static_cast<char>('a' + k))) == std::string::npos);
    CHECK(text.find(kDigest) == std::string::npos);
  }
}

TEST_CASE("blocklist export") {
  CHECK(export_blocklist({}) == "url,first_seen,evidence_ref\n");
  auto vs = oracle::planted_verdicts(5000, 3857, 9);
  auto csv = export_blocklist(vs);
  auto lines = split_lines(csv);
  REQUIRE(lines.size() == 3858);
  CHECK(lines[0] == "url,first_seen,evidence_ref");
  CHECK(std::is_sorted(lines.begin() + 1, lines.end()));
  UrlVerdict odd;
  odd.url = "https://x.test/a,b";
  odd.outcome = UrlFinal::Malicious;
  odd.scanned_at = 1709294400;
  auto line = split_lines(export_blocklist({odd}, {{odd.url, 1709251200}}))[1];
  CHECK(line == "\"https://x.test/a,b\",2024-03-01T00:00:00Z," + odd.verdict_id());

  testing::TempDir dir;
  auto path = write_blocklist(dir.path(), "open/phish", vs);
  CHECK(path.filename() == "blocklist_open_phish.csv");
  CHECK(read_text_file(path) == csv);
}

TEST_CASE("ledger statistics") {
  auto s = ledger_stats(oracle::planted_ledger());
  CHECK(s.total == 339);
  CHECK(s.removed == 64);
  CHECK(*s.removal_rate == doctest::Approx(64.0 / 339.0).epsilon(1e-12));
  CHECK(*s.removal_rate == doctest::Approx(0.188).epsilon(0.001));
  CHECK(*s.median_response_days == 4);
  CHECK(*s.median_response_days_by_destination.at("PlatformAbuse") == 4);
  CHECK_FALSE(ledger_stats({}).removal_rate.has_value());

  CHECK_THROWS_AS(make_ledger_entry("b", 100, Destination::Blocklist, Outcome::Removed, 50), InputError);
  auto e = make_ledger_entry("b", 0, Destination::Blocklist, Outcome::Removed, kSecondsPerDay * 2 - 1);
  CHECK(e.response_days == std::optional<std::int64_t>(1));
}

TEST_CASE("ledger statistics equal a recount on random ledgers") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<DisclosureLedgerEntry> es;
    std::size_t removed = 0;
    std::vector<std::int64_t> days;
    const int n = static_cast<int>(rng() % 60);
    for (int i = 0; i < n; ++i) {
      const auto o = static_cast<Outcome>(rng() % 4);
      removed += o == Outcome::Removed;
      std::optional<Timestamp> at;
      if (rng() % 2) {
        const auto d = static_cast<std::int64_t>(rng() % 20);
        days.push_back(d);
        at = 1000 + d * kSecondsPerDay + static_cast<Timestamp>(rng() % kSecondsPerDay);
      }
      es.push_back(make_ledger_entry("b" + std::to_string(i), 1000, Destination::PlatformAbuse, o, at));
    }
    auto s = ledger_stats(es);
    CHECK(s.removed == removed);
    if (n) CHECK(*s.removal_rate == static_cast<double>(removed) / n);
    std::sort(days.begin(), days.end());
    if (days.empty()) {
      CHECK_FALSE(s.median_response_days.has_value());
    } else {
      const auto k = days.size();
      const double m = k % 2 ? days[k / 2] : (days[k / 2 - 1] + days[k / 2]) / 2.0;
      CHECK(*s.median_response_days == m);
    }
  }
}

TEST_CASE("ledger file round trip") {
  testing::TempDir dir;
  auto path = dir / "ledger.jsonl";
  CHECK(read_ledger(path).empty());
  auto es = oracle::planted_ledger();
  for (std::size_t i = 0; i < 20; ++i) append_ledger(path, es[i]);
  auto back = read_ledger(path);
  REQUIRE(back.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) CHECK(back[i] == es[i]);

  json bad = es[0];
  bad["response_days"] = 99;
  write_text_file(path, dump_line(bad) + "\n");
  CHECK_THROWS_AS(read_ledger(path), InputError);
}

TEST_CASE("utc formatting") {
  CHECK(format_utc(0) == "1970-01-01T00:00:00Z");
  CHECK(format_utc(1709294400) == "2024-03-01T12:00:00Z");
}
