#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "darkgram/model.hpp"

namespace darkgram {

/// Scanner endpoints. Keys never live in files: they come from
/// DARKGRAM_SCANNER_KEY (and DARKGRAM_API_TOKEN for a live source).
struct ServiceSettings {
  std::string reputation_url;
  std::string fallback_url;
  std::string sandbox_url;
  double scanner_rate_per_s = 4.0;
};

struct Settings {
  PipelineConfig pipeline;
  ServiceSettings services;
  std::string scanner_key;  // from the environment only
  std::string api_token;    // from the environment only
};

using Environment = std::map<std::string, std::string>;

/// The process environment, DARKGRAM_* variables only.
Environment darkgram_environment();

/// Plain "key = value" lines; '#' starts a comment. Keys are the
/// PipelineConfig field names plus reputation_url, fallback_url,
/// sandbox_url and scanner_rate_per_s. Unknown keys and secrets raise
/// InputError.
void apply_config_text(Settings& settings, std::string_view text, std::string_view origin = "config");

/// DARKGRAM_<KEY> overrides any file value, e.g. DARKGRAM_GATE_THRESHOLD.
void apply_environment(Settings& settings, const Environment& env);

/// Defaults, then the file (if given), then the environment. The result is
/// validated.
Settings load_settings(const std::optional<std::filesystem::path>& file, const Environment& env);

/// key = value text of a PipelineConfig, in field order.
std::string config_to_text(const PipelineConfig& config);

}  // namespace darkgram
