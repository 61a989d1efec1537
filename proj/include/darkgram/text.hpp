#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace darkgram {

/// Lowercased word tokens. Letters, digits, and non-ASCII bytes form words;
/// everything else (including '_' and '.') separates them, so filenames
/// split into their parts.
std::vector<std::string> word_tokens(std::string_view text);

/// Whitespace-delimited tokens, unmodified.
std::vector<std::string_view> whitespace_split(std::string_view text);

std::string to_lower(std::string_view s);

/// At most `max_codepoints` code points, never splitting a UTF-8 sequence.
std::string utf8_truncate(std::string_view s, std::size_t max_codepoints);

/// 64-bit FNV-1a; stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace darkgram
