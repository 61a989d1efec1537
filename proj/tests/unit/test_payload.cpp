#include <doctest.h>

#include <fstream>

#include "darkgram/errors.hpp"
#include "darkgram/payload.hpp"
#include "darkgram/serialize.hpp"
#include "support.hpp"

using namespace darkgram;

namespace {

std::vector<json> read_lines(const std::string& name) {
  std::ifstream in(testing::data_path(name));
  REQUIRE(in);
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

}  // namespace

TEST_CASE("worked payload examples") {
  CHECK(detect_payload_kind("11,000 Hotmail account credentials", {}) == PayloadKind::UserCredentials);
  CHECK(detect_payload_kind("fresh Netflix session cookies, import to browser", {}) == PayloadKind::SessionCookies);
  CHECK(detect_payload_kind("", {"notes.pdf"}) == PayloadKind::Unknown);
}

TEST_CASE("cookie cues dominate credential cues") {
  CHECK(detect_payload_kind("accounts with cookies", {}) == PayloadKind::SessionCookies);
  CHECK(detect_payload_kind("combo list", {"sessions.txt"}) == PayloadKind::SessionCookies);
  CHECK(detect_payload_kind("", {"combo.txt", "cookies.txt"}) == PayloadKind::SessionCookies);
}

TEST_CASE("hand-labeled payload fixture: at most one error") {
  auto rows = read_lines("payload_labeled.jsonl");
  REQUIRE(rows.size() == 200);
  int errors = 0;
  for (const auto& r : rows) {
    auto got = detect_payload_kind(r.at("text").get<std::string>(),
                                   r.at("filenames").get<std::vector<std::string>>());
    if (to_string(got) != r.at("kind").get<std::string>()) {
      ++errors;
      MESSAGE("mislabeled: " << r.dump() << " -> " << to_string(got));
    }
  }
  CHECK(errors <= 1);
}

TEST_CASE("credential filename statistics match the hand oracle") {
  auto rows = read_lines("credential_filenames.jsonl");
  REQUIRE(rows.size() == 50);
  for (const auto& r : rows) {
    INFO(r.dump());
    auto s = parse_credential_stats(r.at("filename").get<std::string>(), r.at("text").get<std::string>());
    if (r.at("count").is_null()) {
      CHECK_FALSE(s.estimated_count.has_value());
    } else {
      CHECK(s.estimated_count == std::optional<std::int64_t>(r.at("count").get<std::int64_t>()));
    }
    auto countries = r.at("countries").get<std::vector<std::string>>();
    CHECK(s.countries == std::set<std::string>(countries.begin(), countries.end()));
    if (r.at("service").is_null()) {
      CHECK_FALSE(s.service.has_value());
    } else {
      CHECK(s.service == std::optional<std::string>(r.at("service").get<std::string>()));
    }
    CHECK(s.large_leak == r.at("large_leak").get<bool>());
  }
}

TEST_CASE("large_leak follows the configured threshold") {
  CHECK(parse_credential_stats("combo_500.txt", "", 500).large_leak);
  CHECK_FALSE(parse_credential_stats("combo_499.txt", "", 500).large_leak);
  CHECK_FALSE(parse_credential_stats("stuff.txt", "").large_leak);
}

TEST_CASE("count tokens") {
  CHECK(count_tokens("50k") == std::vector<std::int64_t>{50000});
  CHECK(count_tokens("1,234,567 lines") == std::vector<std::int64_t>{1234567});
  CHECK(count_tokens("mp3 v2 x500 500x").empty());
  CHECK(count_tokens("2024 and 12-01-2024 and 1.5").empty());
  CHECK(count_tokens("2024,000") == std::vector<std::int64_t>{2024000});
  CHECK(count_tokens("12 34") == std::vector<std::int64_t>{12, 34});
  CHECK(count_tokens("").empty());
}

TEST_CASE("proof posts need the whole word") {
  CHECK(detect_proof_post("PROOF inside, check screenshot"));
  CHECK(detect_proof_post("proofs: see below"));
  CHECK_FALSE(detect_proof_post("bulletproof hosting"));
  CHECK_FALSE(detect_proof_post("waterproofs"));
  CHECK_FALSE(detect_proof_post(""));
}

TEST_CASE("bot taxonomy") {
  CHECK(classify_bot({{"pay 5 USD to unlock", false, true}}) == BotKind::PaymentGateway);
  CHECK(classify_bot({{"join these 3 channels first", false, false}}) == BotKind::FollowToAccess);
  CHECK(classify_bot({{"here is your file", true, false}}) == BotKind::ContentAccess);
  CHECK(classify_bot({}) == BotKind::Unknown);
  CHECK(classify_bot({{"hello there", false, false}}) == BotKind::Unknown);
}

TEST_CASE("bot precedence is total") {
  // Every combination of follow, payment and delivery cues.
  for (int mask = 0; mask < 8; ++mask) {
    std::vector<BotMessage> t;
    if (mask & 1) t.push_back({"subscribe to our channels before you get the link", false, false});
    if (mask & 2) t.push_back({"invoice attached, pay to continue", false, true});
    if (mask & 4) t.push_back({"", true, false});
    BotKind want = (mask & 1) ? BotKind::FollowToAccess
                 : (mask & 2) ? BotKind::PaymentGateway
                 : (mask & 4) ? BotKind::ContentAccess
                              : BotKind::Unknown;
    CHECK(classify_bot(t) == want);
  }
}

TEST_CASE("cue tables are replaceable") {
  auto t = CueTable::from_json_text(R"({"credential":["kombo"],"cookie":["keks"],"services":["Mail.Ru"]})");
  CHECK(detect_payload_kind("frische kombo", {}, t) == PayloadKind::UserCredentials);
  CHECK(detect_payload_kind("keks und kombo", {}, t) == PayloadKind::SessionCookies);
  CHECK(detect_payload_kind("combo cookies", {}, t) == PayloadKind::Unknown);
  CHECK(parse_credential_stats("mail.ru_5k.txt", "", 10000, t).service == std::optional<std::string>("mail.ru"));
  CHECK_THROWS_AS(CueTable::from_json_text("{nope"), InputError);
}

TEST_CASE("cue matching is token-sequence based") {
  std::vector<std::string> tokens{"fresh", "mail", "pass", "list"};
  auto hit = find_first_cue(tokens, CueTable::defaults().credential);
  REQUIRE(hit);
  CHECK(hit->first == 1);
  CHECK_FALSE(contains_any_cue({"bypass"}, CueTable::defaults().credential));
}
