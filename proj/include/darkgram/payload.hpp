#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "darkgram/model.hpp"

namespace darkgram {

/// A cue is a word-token sequence: "mail:pass" matches the tokens
/// [mail, pass] appearing consecutively.
using Cue = std::vector<std::string>;

/// Keyword rules, loaded from cues.json. Each list holds phrases that are
/// tokenized the same way as post text.
struct CueTable {
  std::vector<Cue> credential;
  std::vector<Cue> cookie;
  std::vector<Cue> proof;
  std::vector<Cue> payment;
  std::vector<Cue> follow;
  std::vector<Cue> follow_targets;
  std::vector<Cue> paywall;
  std::vector<Cue> services;
  std::vector<std::string> service_names;  // as written, parallel to services

  static CueTable from_json_text(std::string_view text);
  static CueTable load(const std::filesystem::path& path);
  /// The table shipped in data/cues.json, compiled in.
  static const CueTable& defaults();
};

/// Index of the first occurrence of any cue in `tokens`, with the cue.
std::optional<std::pair<std::size_t, const Cue*>> find_first_cue(
    const std::vector<std::string>& tokens, const std::vector<Cue>& cues);
bool contains_any_cue(const std::vector<std::string>& tokens, const std::vector<Cue>& cues);

enum class PayloadKind { UserCredentials, SessionCookies, Unknown };
std::string_view to_string(PayloadKind k);

/// Cookie cues win over credential cues when both occur; neither gives
/// Unknown. Cues are matched separately in the text and in each filename.
PayloadKind detect_payload_kind(std::string_view text, const std::vector<std::string>& filenames,
                                const CueTable& cues = CueTable::defaults());

struct CredentialStats {
  std::optional<std::int64_t> estimated_count;
  std::optional<std::string> service;
  std::set<std::string> countries;
  bool large_leak = false;

  friend bool operator==(const CredentialStats&, const CredentialStats&) = default;
};

/// Integer tokens found in `s`, with k/K expanded by 1000 and thousands
/// separators honored. Digits glued to letters ("mp3"), dotted or dashed
/// digit groups (dates, versions), and bare four-digit years are ignored.
std::vector<std::int64_t> count_tokens(std::string_view s);

/// Largest count token of the filename (falling back to the text), country
/// codes written in upper case in the filename, and the first known service.
CredentialStats parse_credential_stats(std::string_view filename, std::string_view text,
                                       std::int64_t large_leak_threshold = 10000,
                                       const CueTable& cues = CueTable::defaults());

/// Case-insensitive whole-word "proof" or "proofs".
bool detect_proof_post(std::string_view text, const CueTable& cues = CueTable::defaults());

enum class BotKind { PaymentGateway, ContentAccess, FollowToAccess, Unknown };
std::string_view to_string(BotKind k);

/// One message received from a bot in a recorded transcript.
struct BotMessage {
  std::string text;
  bool has_document = false;  // a file was delivered
  bool has_invoice = false;   // a platform payment invoice was attached
};

/// Precedence FollowToAccess > PaymentGateway > ContentAccess. Empty or
/// cue-free transcripts are Unknown.
BotKind classify_bot(const std::vector<BotMessage>& transcript,
                     const CueTable& cues = CueTable::defaults());

}  // namespace darkgram
