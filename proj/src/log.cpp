#include "darkgram/log.hpp"

#include <mutex>

#include "darkgram/serialize.hpp"

namespace darkgram {

namespace {
std::mutex g_mu;
LogSink g_sink;
json g_context = json::object();
}  // namespace

void set_log_sink(LogSink sink) {
  std::lock_guard lock(g_mu);
  g_sink = std::move(sink);
}

void set_log_context(json context) {
  std::lock_guard lock(g_mu);
  g_context = context.is_object() ? std::move(context) : json::object();
}

void log_event(std::string_view level, std::string_view event, json fields) {
  std::lock_guard lock(g_mu);
  if (!g_sink) return;
  json line = g_context;
  if (fields.is_object()) line.update(fields);
  line["level"] = level;
  line["event"] = event;
  g_sink(dump_line(line));
}

}  // namespace darkgram
