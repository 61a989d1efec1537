#include <doctest.h>

#include <algorithm>
#include <random>

#include "darkgram/config.hpp"
#include "darkgram/errors.hpp"
#include "darkgram/model.hpp"
#include "darkgram/serialize.hpp"
#include "darkgram/text.hpp"
#include "support.hpp"

using namespace darkgram;

namespace {

bool has_field(const ValidationResult& v, const std::string& field) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.field == field; });
}

PostRecord sample_post() {
  PostRecord p;
  p.channel_id = "combo_cloud";
  p.post_id = 42;
  p.posted_at = 1704067200;
  p.text = "fresh combo 50k";
  p.attachments.push_back({"tool.apk", 1024, AttachmentKind::Executable, std::string(64, 'a')});
  p.attachments.push_back({"combo.txt", 2048, AttachmentKind::Document, std::nullopt});
  p.links = {"https://example.com/a"};
  p.bot_refs = {"pay_bot"};
  p.views = 900;
  p.forwards = 12;
  p.reactions = {{"🔥", 5}, {"👍", 2}};
  p.replies = {"thanks", "works"};
  p.refresh_seq = 3;
  return p;
}

}  // namespace

TEST_CASE("labels keep canonical order") {
  auto names = canonical_label_names();
  REQUIRE(names.size() == kLabelCount);
  CHECK(names[0] == "Benign");
  CHECK(names[1] == "CredentialCompromise");
  CHECK(names[5] == "SocialMediaManipulation");
  for (std::size_t i = 0; i < kLabelCount; ++i) {
    auto l = label_from_index(i);
    CHECK(l.index() == i);
    CHECK(to_string(l) == names[i]);
    CHECK(label_from_string(names[i]) == l);
  }
  CHECK_FALSE(label_from_string("Malware").has_value());
  CHECK(Label{} < Label{CacCategory::CredentialCompromise});
}

TEST_CASE("executables may carry a digest, documents may not") {
  AttachmentMeta exe{"app.apk", 10, AttachmentKind::Executable, std::string(64, 'f')};
  CHECK(validate_record(exe).empty());

  AttachmentMeta doc{"combo.txt", 10, AttachmentKind::Document, std::string(64, 'f')};
  auto v = validate_record(doc);
  REQUIRE(has_field(v, "content_digest"));
  CHECK(describe(v).find("digest only for executables") != std::string::npos);

  AttachmentMeta upper{"app.apk", 10, AttachmentKind::Executable, std::string(64, 'F')};
  CHECK(has_field(validate_record(upper), "content_digest"));
}

TEST_CASE("post validation names every bad field") {
  auto p = sample_post();
  CHECK(validate_record(p).empty());
  p.views = -1;
  p.forwards = -2;
  p.reactions["😡"] = -1;
  p.channel_id.clear();
  auto v = validate_record(p);
  CHECK(has_field(v, "views"));
  CHECK(has_field(v, "forwards"));
  CHECK(has_field(v, "reactions"));
  CHECK(has_field(v, "channel_id"));
}

TEST_CASE("channel must exist before its posts") {
  ChannelRecord c{"c1", "t", "", 1000, true, std::nullopt, SourceKind::Replay};
  auto p = sample_post();
  p.channel_id = "c1";
  p.posted_at = 999;
  CHECK(has_field(validate_channel_posts(c, {p}), "created_at"));
  p.posted_at = 1000;
  CHECK(validate_channel_posts(c, {p}).empty());
}

TEST_CASE("config validation") {
  PipelineConfig cfg;
  CHECK(validate_config(cfg).empty());
  cfg.channel_flag_threshold = 11;
  CHECK(has_field(validate_config(cfg), "channel_flag_threshold"));
  cfg = {};
  cfg.conversion_rate = 1.5;
  CHECK(has_field(validate_config(cfg), "conversion_rate"));
  cfg = {};
  cfg.refresh_interval_s = 0;
  CHECK_FALSE(validate_config(cfg).empty());
}

TEST_CASE("defaults are the study constants") {
  PipelineConfig cfg;
  CHECK(cfg.refresh_interval_s == 600);
  CHECK(cfg.url_engine_threshold == 2);
  CHECK(cfg.file_av_threshold == 2);
  CHECK(cfg.channel_flag_threshold == 5);
  CHECK(cfg.channel_eval_posts == 10);
  CHECK(cfg.conversion_rate == doctest::Approx(0.10));
  CHECK(cfg.large_leak_threshold == 10000);
}

TEST_CASE("post json round trip") {
  auto p = sample_post();
  json j = p;
  CHECK(j.get<PostRecord>() == p);
  // optionals are omitted, not null
  CHECK_FALSE(j["attachments"][1].contains("content_digest"));
  CHECK(dump_line(j).find('\n') == std::string::npos);
}

TEST_CASE("config json round trip") {
  PipelineConfig cfg;
  cfg.gate_threshold = 0.7;
  cfg.recheck_days = 3;
  json j = cfg;
  CHECK(j.get<PipelineConfig>() == cfg);
}

TEST_CASE("jsonl reader names the bad line") {
  testing::TempDir dir;
  auto path = dir / "bad.jsonl";
  write_text_file(path, "{\"a\":1}\n\n{oops\n");
  try {
    for_each_jsonl(path, [](std::size_t, const json&) {});
    FAIL("expected InputError");
  } catch (const InputError& e) {
    std::string msg = e.what();
    CHECK(msg.find("bad.jsonl") != std::string::npos);
    CHECK(msg.find('3') != std::string::npos);
  }
}

TEST_CASE("config text, environment and secrets") {
  Settings st;
  apply_config_text(st, "# comment\nchannel_flag_threshold = 6  # inline\ngate_threshold=0.6\n"
                        "reputation_url = http://127.0.0.1:1\n");
  CHECK(st.pipeline.channel_flag_threshold == 6);
  CHECK(st.pipeline.gate_threshold == doctest::Approx(0.6));
  CHECK(st.services.reputation_url == "http://127.0.0.1:1");

  CHECK_THROWS_AS(apply_config_text(st, "scanner_key = abc"), InputError);
  CHECK_THROWS_AS(apply_config_text(st, "api_token = abc"), InputError);
  CHECK_THROWS_AS(apply_config_text(st, "no_such_key = 1"), InputError);
  CHECK_THROWS_AS(apply_config_text(st, "channel_eval_posts = ten"), InputError);
  CHECK_THROWS_AS(apply_config_text(st, "just words"), InputError);

  apply_environment(st, {{"DARKGRAM_SCANNER_KEY", "k"}, {"DARKGRAM_GATE_THRESHOLD", "0.4"}, {"HOME", "/x"}});
  CHECK(st.scanner_key == "k");
  CHECK(st.pipeline.gate_threshold == doctest::Approx(0.4));
}

TEST_CASE("load_settings: file then environment, then validation") {
  testing::TempDir dir;
  auto conf = dir / "d.conf";
  write_text_file(conf, "channel_eval_posts = 12\nchannel_flag_threshold = 6\n");
  auto st = load_settings(conf, {{"DARKGRAM_CHANNEL_FLAG_THRESHOLD", "7"}});
  CHECK(st.pipeline.channel_eval_posts == 12);
  CHECK(st.pipeline.channel_flag_threshold == 7);
  CHECK_THROWS_AS(load_settings(conf, {{"DARKGRAM_CHANNEL_FLAG_THRESHOLD", "13"}}), InputError);
}

TEST_CASE("config text round trips") {
  PipelineConfig cfg;
  cfg.conversion_rate = 0.25;
  cfg.recheck_days = 2;
  Settings st;
  apply_config_text(st, config_to_text(cfg));
  CHECK(st.pipeline == cfg);
}

TEST_CASE("word tokens split filenames") {
  auto t = word_tokens("Gmail_US-UK.50k combo:LIST!");
  std::vector<std::string> want{"gmail", "us", "uk", "50k", "combo", "list"};
  CHECK(t == want);
  CHECK(word_tokens("").empty());
}

TEST_CASE("fnv1a64 reference vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("utf8 truncation never splits a sequence") {
  CHECK(utf8_truncate("héllo", 2) == "hé");
  CHECK(utf8_truncate("🔥🔥🔥", 2) == "🔥🔥");
  CHECK(utf8_truncate("abc", 10) == "abc");

  std::mt19937_64 rng(7);
  const std::vector<std::string> pieces{"a", "é", "€", "🔥", " "};
  for (int round = 0; round < 200; ++round) {
    std::string s;
    std::size_t cps = rng() % 40;
    for (std::size_t i = 0; i < cps; ++i) s += pieces[rng() % pieces.size()];
    std::size_t limit = rng() % 45;
    auto t = utf8_truncate(s, limit);
    CHECK(s.compare(0, t.size(), t) == 0);
    std::size_t count = 0;
    for (unsigned char c : t) count += (c & 0xC0) != 0x80;
    CHECK(count == std::min(cps, limit));
  }
}
