#include "darkgram/payload.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "darkgram/errors.hpp"
#include "darkgram/ingest.hpp"
#include "darkgram/serialize.hpp"
#include "darkgram/text.hpp"

namespace darkgram {

// Generated from data/cues.json at configure time.
extern const char* const kDefaultCuesJson;

namespace {

// ISO 3166-1 alpha-2, plus UK which leak filenames use for GB.
constexpr std::string_view kCountryCodes[] = {
    "AD", "AE", "AF", "AG", "AI", "AL", "AM", "AO", "AQ", "AR", "AS", "AT", "AU", "AW", "AX", "AZ",
    "BA", "BB", "BD", "BE", "BF", "BG", "BH", "BI", "BJ", "BL", "BM", "BN", "BO", "BQ", "BR", "BS",
    "BT", "BV", "BW", "BY", "BZ", "CA", "CC", "CD", "CF", "CG", "CH", "CI", "CK", "CL", "CM", "CN",
    "CO", "CR", "CU", "CV", "CW", "CX", "CY", "CZ", "DE", "DJ", "DK", "DM", "DO", "DZ", "EC", "EE",
    "EG", "EH", "ER", "ES", "ET", "FI", "FJ", "FK", "FM", "FO", "FR", "GA", "GB", "GD", "GE", "GF",
    "GG", "GH", "GI", "GL", "GM", "GN", "GP", "GQ", "GR", "GS", "GT", "GU", "GW", "GY", "HK", "HM",
    "HN", "HR", "HT", "HU", "ID", "IE", "IL", "IM", "IN", "IO", "IQ", "IR", "IS", "IT", "JE", "JM",
    "JO", "JP", "KE", "KG", "KH", "KI", "KM", "KN", "KP", "KR", "KW", "KY", "KZ", "LA", "LB", "LC",
    "LI", "LK", "LR", "LS", "LT", "LU", "LV", "LY", "MA", "MC", "MD", "ME", "MF", "MG", "MH", "MK",
    "ML", "MM", "MN", "MO", "MP", "MQ", "MR", "MS", "MT", "MU", "MV", "MW", "MX", "MY", "MZ", "NA",
    "NC", "NE", "NF", "NG", "NI", "NL", "NO", "NP", "NR", "NU", "NZ", "OM", "PA", "PE", "PF", "PG",
    "PH", "PK", "PL", "PM", "PN", "PR", "PS", "PT", "PW", "PY", "QA", "RE", "RO", "RS", "RU", "RW",
    "SA", "SB", "SC", "SD", "SE", "SG", "SH", "SI", "SJ", "SK", "SL", "SM", "SN", "SO", "SR", "SS",
    "ST", "SV", "SX", "SY", "SZ", "TC", "TD", "TF", "TG", "TH", "TJ", "TK", "TL", "TM", "TN", "TO",
    "TR", "TT", "TV", "TW", "TZ", "UA", "UG", "UM", "US", "UY", "UZ", "VA", "VC", "VE", "VG", "VI",
    "VN", "VU", "WF", "WS", "YE", "YT", "ZA", "ZM", "ZW", "UK",
};

bool is_country_code(std::string_view s) {
  return std::find(std::begin(kCountryCodes), std::end(kCountryCodes), s) != std::end(kCountryCodes);
}

std::vector<Cue> parse_cue_list(const json& j, const char* key) {
  std::vector<Cue> out;
  if (!j.contains(key)) return out;
  for (const auto& phrase : j.at(key)) {
    auto tokens = word_tokens(phrase.get<std::string>());
    if (!tokens.empty()) out.push_back(std::move(tokens));
  }
  return out;
}

bool has_cue(std::string_view text, const std::vector<std::string>& filenames,
             const std::vector<Cue>& cues) {
  if (contains_any_cue(word_tokens(text), cues)) return true;
  return std::any_of(filenames.begin(), filenames.end(), [&](const std::string& f) {
    return contains_any_cue(word_tokens(f), cues);
  });
}

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

}  // namespace

CueTable CueTable::from_json_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("cue table: ") + e.what());
  }
  CueTable t;
  t.credential = parse_cue_list(j, "credential");
  t.cookie = parse_cue_list(j, "cookie");
  t.proof = parse_cue_list(j, "proof");
  t.payment = parse_cue_list(j, "payment");
  t.follow = parse_cue_list(j, "follow");
  t.follow_targets = parse_cue_list(j, "follow_targets");
  t.paywall = parse_cue_list(j, "paywall");
  if (j.contains("services")) {
    for (const auto& phrase : j.at("services")) {
      auto name = phrase.get<std::string>();
      auto tokens = word_tokens(name);
      if (tokens.empty()) continue;
      t.services.push_back(std::move(tokens));
      t.service_names.push_back(to_lower(name));
    }
  }
  return t;
}

CueTable CueTable::load(const std::filesystem::path& path) {
  return from_json_text(read_text_file(path));
}

const CueTable& CueTable::defaults() {
  static const CueTable table = from_json_text(kDefaultCuesJson);
  return table;
}

std::optional<std::pair<std::size_t, const Cue*>> find_first_cue(
    const std::vector<std::string>& tokens, const std::vector<Cue>& cues) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (const auto& cue : cues) {
      if (i + cue.size() > tokens.size()) continue;
      if (std::equal(cue.begin(), cue.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
        return std::make_pair(i, &cue);
      }
    }
  }
  return std::nullopt;
}

bool contains_any_cue(const std::vector<std::string>& tokens, const std::vector<Cue>& cues) {
  return find_first_cue(tokens, cues).has_value();
}

std::string_view to_string(PayloadKind k) {
  switch (k) {
    case PayloadKind::UserCredentials: return "UserCredentials";
    case PayloadKind::SessionCookies: return "SessionCookies";
    case PayloadKind::Unknown: return "Unknown";
  }
  return "Unknown";
}

PayloadKind detect_payload_kind(std::string_view text, const std::vector<std::string>& filenames,
                                const CueTable& cues) {
  if (has_cue(text, filenames, cues.cookie)) return PayloadKind::SessionCookies;
  if (has_cue(text, filenames, cues.credential)) return PayloadKind::UserCredentials;
  return PayloadKind::Unknown;
}

std::vector<std::int64_t> count_tokens(std::string_view s) {
  std::vector<std::int64_t> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_digit(s[i])) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    std::string digits;
    bool grouped = false;
    bool dotted = false;
    while (i < s.size()) {
      if (is_digit(s[i])) {
        digits.push_back(s[i++]);
      } else if (s[i] == ',' && i + 3 < s.size() && is_digit(s[i + 1]) && is_digit(s[i + 2]) &&
                 is_digit(s[i + 3]) && (i + 4 >= s.size() || !is_digit(s[i + 4]))) {
        grouped = true;
        ++i;
      } else if ((s[i] == '.' || s[i] == '-' || s[i] == '/') && i + 1 < s.size() && is_digit(s[i + 1])) {
        dotted = true;
        digits.push_back(s[i++]);
      } else {
        break;
      }
    }
    std::int64_t multiplier = 1;
    std::size_t end = i;
    if (end < s.size() && (s[end] == 'k' || s[end] == 'K') &&
        (end + 1 >= s.size() || !is_alpha(s[end + 1]))) {
      multiplier = 1000;
      ++end;
    }
    const bool glued_before = start > 0 && is_alpha(s[start - 1]);
    const bool glued_after = end < s.size() && is_alpha(s[end]);
    i = end;
    if (dotted || glued_before || glued_after || digits.size() > 15) continue;
    const std::int64_t value = std::stoll(digits) * multiplier;
    const bool year_like = !grouped && multiplier == 1 && digits.size() == 4 && value >= 1990 && value <= 2035;
    if (year_like) continue;
    out.push_back(value);
  }
  return out;
}

CredentialStats parse_credential_stats(std::string_view filename, std::string_view text,
                                       std::int64_t large_leak_threshold, const CueTable& cues) {
  CredentialStats stats;
  auto counts = count_tokens(filename);
  if (counts.empty()) counts = count_tokens(text);
  if (!counts.empty()) stats.estimated_count = *std::max_element(counts.begin(), counts.end());
  stats.large_leak = stats.estimated_count && *stats.estimated_count >= large_leak_threshold;

  // Country codes: upper-case two-letter words of the filename.
  std::string word;
  auto flush = [&] {
    if (word.size() == 2 && std::isupper(static_cast<unsigned char>(word[0])) &&
        std::isupper(static_cast<unsigned char>(word[1])) && is_country_code(word)) {
      stats.countries.insert(word);
    }
    word.clear();
  };
  for (char c : filename) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      word.push_back(c);
    } else {
      flush();
    }
  }
  flush();

  for (std::string_view source : {filename, text}) {
    if (auto hit = find_first_cue(word_tokens(source), cues.services)) {
      const auto idx = static_cast<std::size_t>(hit->second - cues.services.data());
      stats.service = idx < cues.service_names.size() ? cues.service_names[idx] : hit->second->front();
      break;
    }
  }
  return stats;
}

bool detect_proof_post(std::string_view text, const CueTable& cues) {
  return contains_any_cue(word_tokens(text), cues.proof);
}

std::string_view to_string(BotKind k) {
  switch (k) {
    case BotKind::PaymentGateway: return "PaymentGateway";
    case BotKind::ContentAccess: return "ContentAccess";
    case BotKind::FollowToAccess: return "FollowToAccess";
    case BotKind::Unknown: return "Unknown";
  }
  return "Unknown";
}

BotKind classify_bot(const std::vector<BotMessage>& transcript, const CueTable& cues) {
  bool follow = false, payment = false, content = false;
  for (const auto& msg : transcript) {
    auto tokens = word_tokens(msg.text);
    const bool mentions_target = contains_any_cue(tokens, cues.follow_targets) ||
                                 !extract_bot_refs(msg.text).empty();
    if (contains_any_cue(tokens, cues.follow) && mentions_target) follow = true;
    if (msg.has_invoice || contains_any_cue(tokens, cues.payment)) payment = true;
    if (msg.has_document || !extract_links(msg.text).empty()) content = true;
  }
  if (follow) return BotKind::FollowToAccess;
  if (payment) return BotKind::PaymentGateway;
  if (content) return BotKind::ContentAccess;
  return BotKind::Unknown;
}

}  // namespace darkgram
