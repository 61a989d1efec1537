#include <doctest.h>

#include <algorithm>

#include "darkgram/discover.hpp"
#include "darkgram/errors.hpp"
#include "darkgram/fixtures.hpp"
#include "darkgram/serialize.hpp"

using namespace darkgram;
namespace fx = darkgram::fixtures;

namespace {

// Flags any text containing "CA:" and names the category by the digit after it.
class MarkerBackend final : public ClassifierBackend {
 public:
  std::string backend_id() const override { return "marker"; }
  StageScores score(std::string_view text, const std::vector<std::string>&) const override {
    StageScores s;
    s.category = {0.2, 0.2, 0.2, 0.2, 0.2};
    auto at = text.find("CA:");
    if (at == std::string_view::npos) {
      s.p_ca = 0.01;
      return s;
    }
    s.p_ca = 0.99;
    std::size_t k = 0;
    if (at + 3 < text.size() && text[at + 3] >= '0' && text[at + 3] <= '4') k = text[at + 3] - '0';
    s.category = {0.05, 0.05, 0.05, 0.05, 0.05};
    s.category[k] = 0.8;
    return s;
  }
};

PostEvidence evidence(std::int64_t id, bool ca, CacCategory cat = CacCategory::PiratedMedia) {
  PostEvidence e;
  e.post_id = id;
  e.posted_at = id * 100;
  e.result.is_ca = ca;
  if (ca) e.result.category = cat;
  return e;
}

std::vector<PostEvidence> newest_first(int n, int ca) {
  std::vector<PostEvidence> v;
  for (int i = 0; i < n; ++i) v.push_back(evidence(n - i, i < ca));
  return v;
}

ChannelRecord channel(const std::string& id) {
  ChannelRecord c;
  c.channel_id = id;
  c.title = id;
  return c;
}

PostRecord post(const std::string& ch, std::int64_t id, const std::string& text) {
  PostRecord p;
  p.channel_id = ch;
  p.post_id = id;
  p.posted_at = id;
  p.text = text;
  return p;
}

LabeledCorpus& small_corpus() {
  static LabeledCorpus c = fx::generate_corpus(300, 7);
  return c;
}

const BaselineModel& trained() {
  static BaselineModel m = train_baseline(small_corpus(), 7);
  return m;
}

}  // namespace

TEST_CASE("t.me link forms") {
  auto got = tme_links_in_text(
      "join https://t.me/LeakHub and t.me/s/Preview_Chan, telegram.me/other_one "
      "also http://t.me/joinchat/AbC-dEf12 and https://t.me/+XyZ987 again t.me/leakhub");
  std::vector<std::string> want{"leakhub", "preview_chan", "other_one", "joinchat/AbC-dEf12", "joinchat/XyZ987"};
  CHECK(got == want);
  CHECK(is_invite_link("joinchat/AbC"));
  CHECK_FALSE(is_invite_link("leakhub"));
  CHECK(tme_links_in_text("no links, example.com/t.me").empty());
  CHECK(tme_links_in_text("t.me/abc t.me/share t.me/" + std::string(33, 'x')).empty());
  CHECK(tme_links_in_text("t.me/abcd") == std::vector<std::string>{"abcd"});
}

TEST_CASE("harvest filters excluded channels") {
  std::vector<PostRecord> posts{post("aaaaa", 1, "see t.me/bbbbb and t.me/ccccc"), post("aaaaa", 2, "t.me/BBBBB t.me/aaaaa")};
  posts[1].links = {"https://t.me/ddddd"};
  auto got = harvest_tme_links(posts, {"aaaaa", "ccccc"});
  std::vector<std::string> want{"bbbbb", "ddddd"};
  CHECK(got == want);
}

TEST_CASE("state machine") {
  using S = CandidateState;
  const S all[] = {S::Queued, S::Evaluated, S::Deferred, S::Flagged, S::Benign};
  for (S from : all) {
    for (S to : all) {
      bool want = (from == S::Queued && (to == S::Evaluated || to == S::Deferred)) ||
                  (from == S::Evaluated && (to == S::Flagged || to == S::Benign)) ||
                  (from == S::Deferred && to == S::Queued);
      CHECK(transition_allowed(from, to) == want);
    }
  }
}

TEST_CASE("flag rule boundaries") {
  PipelineConfig cfg;
  CHECK(decide_channel("c", newest_first(10, 5), cfg, 0).decision == FlagDecision::Malicious);
  CHECK(decide_channel("c", newest_first(10, 4), cfg, 0).decision == FlagDecision::NotFlagged);
  CHECK(decide_channel("c", newest_first(9, 9), cfg, 0).decision == FlagDecision::Deferred);
  CHECK(decide_channel("c", {}, cfg, 0).decision == FlagDecision::Deferred);

  // only the newest ten count
  auto v = newest_first(10, 4);
  for (int i = 0; i < 5; ++i) v.push_back(evidence(-i, true));
  auto d = decide_channel("c", v, cfg, 42);
  CHECK(d.decision == FlagDecision::NotFlagged);
  CHECK(d.posts_evaluated == 10);
  CHECK(d.flagged_count == 4);
  CHECK(d.per_post.size() == 10);
  CHECK(d.evaluated_at == 42);

  cfg.channel_flag_threshold = 3;
  cfg.channel_eval_posts = 4;
  CHECK(decide_channel("c", newest_first(4, 3), cfg, 0).decision == FlagDecision::Malicious);
}

TEST_CASE("majority category") {
  PipelineConfig cfg;
  std::vector<PostEvidence> v;
  for (int i = 0; i < 10; ++i) {
    v.push_back(evidence(10 - i, i < 7, i < 3 ? CacCategory::PiratedSoftware : CacCategory::CredentialCompromise));
  }
  auto d = decide_channel("c", v, cfg, 0);
  REQUIRE(d.majority_category.has_value());
  CHECK(*d.majority_category == CacCategory::CredentialCompromise);
  json j = d;
  CHECK(j.get<ChannelFlagDecision>() == d);
}

TEST_CASE("frontier expands only through flagged channels") {
  std::vector<ReplaySource::Entry> s;
  auto add = [&](const std::string& id, const std::vector<std::string>& texts) {
    s.push_back(fx::channel_entry(0, channel(id)));
    std::int64_t n = 0;
    for (const auto& t : texts) s.push_back(fx::post_entry(0, post(id, ++n, t)));
  };
  std::vector<std::string> bad(10, "CA:2 fresh tools"), good(10, "nice weather");
  auto with = [](std::vector<std::string> v, const std::string& extra) {
    v[0] += " " + extra;
    return v;
  };
  add("seed", with(good, "t.me/bad1 t.me/good1 t.me/joinchat/SecretCode"));
  add("bad1", with(bad, "t.me/bad2"));
  add("good1", with(good, "t.me/hidden"));
  add("bad2", bad);
  add("hidden", bad);
  ReplaySource src(s, 0);
  MarkerBackend model;
  PipelineConfig cfg;
  auto r = run_frontier({"seed"}, src, model, cfg);

  std::map<std::string, FlagDecision> by;
  for (const auto& d : r.decisions) by[d.channel_id] = d.decision;
  CHECK(by.at("seed") == FlagDecision::NotFlagged);
  CHECK(by.at("bad1") == FlagDecision::Malicious);
  CHECK(by.at("bad2") == FlagDecision::Malicious);
  CHECK(by.at("good1") == FlagDecision::NotFlagged);
  CHECK(by.count("hidden") == 0);
  CHECK(r.invite_links == std::vector<std::string>{"joinchat/SecretCode"});
  CHECK(by.count("joinchat/SecretCode") == 0);  // recorded, never joined
  for (const auto& c : r.candidates) {
    if (c.channel_id == "bad2") CHECK(c.discovered_from.origin == "bad1");
  }
}

TEST_CASE("frontier records deleted and transient channels") {
  std::vector<ReplaySource::Entry> s{fx::channel_entry(0, channel("seed")),
                                     fx::post_entry(0, post("seed", 1, "t.me/gone t.me/flaky t.me/later"))};
  s.push_back(fx::channel_entry(0, channel("flaky")));
  s.push_back({0, "outage", json{{"t", 0}, {"type", "outage"}, {"channel_id", "flaky"}, {"until", 1000}}});
  ReplaySource src(s, 0);
  MarkerBackend model;
  PipelineConfig cfg;
  auto r = run_frontier({"seed"}, src, model, cfg);
  std::map<std::string, std::string> kinds;
  for (const auto& e : r.errors) kinds[e.channel_id] = e.kind;
  CHECK(kinds["gone"] == "deleted");
  CHECK(kinds["flaky"] == "transient");
}

TEST_CASE("evaluate_channel propagates source errors") {
  std::vector<ReplaySource::Entry> s{fx::channel_entry(0, channel("c"))};
  ReplaySource src(s, 0);
  MarkerBackend model;
  PipelineConfig cfg;
  CHECK_THROWS_AS(evaluate_channel(src, "nope", model, cfg), DeletedError);
  CHECK(evaluate_channel(src, "c", model, cfg).decision == FlagDecision::Deferred);
}

TEST_CASE("external links: first origin wins, monitored excluded") {
  std::vector<std::pair<std::string, std::vector<std::string>>> groups{
      {"g1", {"https://t.me/alpha", "https://t.me/Beta"}},
      {"g2", {"https://t.me/beta", "https://t.me/mine", "https://example.com/x"}},
  };
  auto c = ingest_external_links(groups, {"mine"}, 9);
  REQUIRE(c.size() == 2);
  CHECK(c[0].channel_id == "alpha");
  CHECK(c[1].channel_id == "beta");
  CHECK(c[1].discovered_from.origin == "g1");
  CHECK(c[1].discovered_from.kind == SourceKind::ExternalLinkSource);
  CHECK(c[1].first_seen == 9);
}

TEST_CASE("deferred channels are rechecked once they fill up") {
  auto f = fx::deferred_fixture(3, 4, 2);
  ReplaySource src(f.script, f.start);
  PipelineConfig cfg;
  auto r = run_frontier_with_rechecks(f.seeds, src, trained(), cfg, [&](Timestamp t) { src.advance_to(t); },
                                      f.horizon);
  std::set<std::string> flagged;
  for (const auto& d : r.decisions) {
    if (d.decision == FlagDecision::Malicious) flagged.insert(d.channel_id);
  }
  CHECK(flagged == f.planted_malicious);
}

TEST_CASE("small frontier fixture reaches every candidate") {
  auto f = fx::frontier_fixture(5, 12, 30, 14);
  ReplaySource src(f.script, f.start);
  PipelineConfig cfg;
  auto r = run_frontier(f.seeds, src, trained(), cfg);
  std::set<std::string> seeds(f.seeds.begin(), f.seeds.end()), reached, flagged;
  for (const auto& d : r.decisions) {
    if (!seeds.count(d.channel_id)) reached.insert(d.channel_id);
    if (d.decision == FlagDecision::Malicious) flagged.insert(d.channel_id);
  }
  CHECK(reached == f.candidates);
  CHECK(flagged == f.planted_malicious);
}
