#pragma once

#include <functional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace darkgram {

/// Structured log lines, one JSON object each. The default sink drops
/// everything; the CLI installs a file sink tagged with the run id.
using LogSink = std::function<void(const std::string& line)>;

void set_log_sink(LogSink sink);
void set_log_context(nlohmann::json context);  // merged into every line
void log_event(std::string_view level, std::string_view event, nlohmann::json fields = {});

}  // namespace darkgram
