#include "darkgram/config.hpp"

#include <cctype>
#include <cstdlib>

#include "darkgram/errors.hpp"
#include "darkgram/serialize.hpp"
#include "darkgram/text.hpp"

extern char** environ;

namespace darkgram {

namespace {

constexpr std::string_view kSecretKeys[] = {"api_token", "scanner_key", "api_key", "token", "password"};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

void set_value(Settings& st, const std::string& key, const std::string& value, std::string_view origin) {
  for (auto secret : kSecretKeys) {
    if (key == secret) {
      throw InputError(std::string(origin) + ": '" + key +
                       "' is a secret; set it through the environment instead");
    }
  }
  auto bad = [&](const char* what) {
    return InputError(std::string(origin) + ": " + key + " expects " + what + ", got '" + value + "'");
  };
  if (key == "reputation_url") {
    st.services.reputation_url = value;
    return;
  }
  if (key == "fallback_url") {
    st.services.fallback_url = value;
    return;
  }
  if (key == "sandbox_url") {
    st.services.sandbox_url = value;
    return;
  }
  if (key == "scanner_rate_per_s") {
    try {
      std::size_t used = 0;
      st.services.scanner_rate_per_s = std::stod(value, &used);
      if (used != value.size()) throw bad("a number");
    } catch (const std::logic_error&) {
      throw bad("a number");
    }
    return;
  }
  // Pipeline fields: type follows the default value's JSON type.
  json current = st.pipeline;
  if (!current.contains(key)) throw InputError(std::string(origin) + ": unknown key '" + key + "'");
  try {
    std::size_t used = 0;
    if (current[key].is_number_integer()) {
      current[key] = std::stoll(value, &used);
      if (used != value.size()) throw bad("an integer");
    } else {
      current[key] = std::stod(value, &used);
      if (used != value.size()) throw bad("a number");
    }
  } catch (const std::logic_error&) {
    throw bad("a number");
  }
  st.pipeline = current.get<PipelineConfig>();
}

}  // namespace

Environment darkgram_environment() {
  Environment env;
  for (char** e = environ; e && *e; ++e) {
    std::string_view kv(*e);
    if (!kv.starts_with("DARKGRAM_")) continue;
    auto eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    env.emplace(std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1)));
  }
  return env;
}

void apply_config_text(Settings& settings, std::string_view text, std::string_view origin) {
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    auto line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto stripped = trim(line);
    if (stripped.empty()) continue;
    auto eq = stripped.find('=');
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw InputError(where + ": expected key = value");
    auto key = to_lower(trim(stripped.substr(0, eq)));
    set_value(settings, key, trim(stripped.substr(eq + 1)), where);
  }
}

void apply_environment(Settings& settings, const Environment& env) {
  for (const auto& [name, value] : env) {
    if (!name.starts_with("DARKGRAM_")) continue;
    if (name == "DARKGRAM_SCANNER_KEY") {
      settings.scanner_key = value;
    } else if (name == "DARKGRAM_API_TOKEN") {
      settings.api_token = value;
    } else if (name == "DARKGRAM_LOG" || name == "DARKGRAM_EXTERNAL_ARTIFACT" || name == "DARKGRAM_CONFIG") {
      continue;  // consumed elsewhere
    } else {
      set_value(settings, to_lower(name.substr(9)), value, name);
    }
  }
}

Settings load_settings(const std::optional<std::filesystem::path>& file, const Environment& env) {
  Settings st;
  if (file) apply_config_text(st, read_text_file(*file), file->string());
  apply_environment(st, env);
  if (auto v = validate_config(st.pipeline); !v.empty()) throw InputError("invalid configuration: " + describe(v));
  return st;
}

std::string config_to_text(const PipelineConfig& config) {
  // Field order of the struct, not the sorted JSON order.
  static constexpr std::string_view kOrder[] = {
      "refresh_interval_s", "url_engine_threshold", "file_av_threshold", "channel_flag_threshold",
      "channel_eval_posts", "conversion_rate",      "large_leak_threshold", "growth_window_days",
      "gate_threshold",     "recheck_days",         "migration_creation_window_days",
      "report_suppression_days", "poll_batch",      "probe_concurrency",  "scan_concurrency",
      "eval_concurrency"};
  json j = config;
  std::string out;
  for (auto k : kOrder) out += std::string(k) + " = " + j[std::string(k)].dump() + "\n";
  return out;
}

}  // namespace darkgram
