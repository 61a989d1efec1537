#include "darkgram/scan.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <set>
#include <thread>

#include <httplib.h>

#include "darkgram/errors.hpp"
#include "darkgram/ingest.hpp"
#include "darkgram/log.hpp"
#include "darkgram/serialize.hpp"
#include "darkgram/text.hpp"

namespace darkgram {

std::string_view to_string(UrlFinal f) {
  switch (f) {
    case UrlFinal::Malicious: return "Malicious";
    case UrlFinal::Benign: return "Benign";
    case UrlFinal::Unreachable: return "Unreachable";
  }
  return "Benign";
}

std::string_view to_string(FileFinal f) {
  return f == FileFinal::Malicious ? "Malicious" : "NotMalicious";
}

std::optional<UrlFinal> url_final_from_string(std::string_view s) {
  for (auto f : {UrlFinal::Malicious, UrlFinal::Benign, UrlFinal::Unreachable}) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

std::optional<FileFinal> file_final_from_string(std::string_view s) {
  for (auto f : {FileFinal::Malicious, FileFinal::NotMalicious}) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

std::string UrlVerdict::verdict_id() const {
  return "url-" + hex64(fnv1a64(url + '\n' + std::to_string(scanned_at)));
}

std::string FileVerdict::verdict_id() const { return "file-" + hex64(fnv1a64(content_digest)); }

void to_json(json& j, const UrlVerdict& v) {
  j = json{{"url", v.url},
           {"engine_hits", v.engine_hits},
           {"engines_total", v.engines_total},
           {"final", to_string(v.outcome)},
           {"scanned_at", v.scanned_at},
           {"verdict_id", v.verdict_id()}};
  if (v.fallback_flag) j["fallback_flag"] = *v.fallback_flag;
}

void from_json(const json& j, UrlVerdict& v) {
  v.url = j.at("url").get<std::string>();
  v.engine_hits = j.at("engine_hits").get<std::int64_t>();
  v.engines_total = j.at("engines_total").get<std::int64_t>();
  v.fallback_flag = j.contains("fallback_flag") ? std::optional<bool>(j["fallback_flag"].get<bool>())
                                                : std::nullopt;
  auto f = url_final_from_string(j.at("final").get<std::string>());
  if (!f) throw InputError("unknown URL verdict: " + j.at("final").dump());
  v.outcome = *f;
  v.scanned_at = j.value("scanned_at", Timestamp{0});
}

void to_json(json& j, const FileVerdict& v) {
  j = json{{"content_digest", v.content_digest},
           {"sandbox_detected", v.sandbox_detected},
           {"av_hits", v.av_hits},
           {"previously_seen", v.previously_seen},
           {"final", to_string(v.outcome)},
           {"verdict_id", v.verdict_id()}};
}

void from_json(const json& j, FileVerdict& v) {
  v.content_digest = j.at("content_digest").get<std::string>();
  v.sandbox_detected = j.at("sandbox_detected").get<bool>();
  v.av_hits = j.at("av_hits").get<std::int64_t>();
  v.previously_seen = j.value("previously_seen", false);
  auto f = file_final_from_string(j.at("final").get<std::string>());
  if (!f) throw InputError("unknown file verdict: " + j.at("final").dump());
  v.outcome = *f;
}

UrlFinal decide_url(std::int64_t engine_hits, std::optional<bool> fallback_flag,
                    const PipelineConfig& config) {
  if (engine_hits >= config.url_engine_threshold) return UrlFinal::Malicious;
  if (fallback_flag.value_or(false)) return UrlFinal::Malicious;
  return UrlFinal::Benign;
}

FileFinal decide_file(bool sandbox_detected, std::int64_t av_hits, const PipelineConfig& config) {
  return sandbox_detected && av_hits >= config.file_av_threshold ? FileFinal::Malicious
                                                                 : FileFinal::NotMalicious;
}

// ---------------------------------------------------------------------------
// HTTP clients

namespace {

json post_json(const HttpEndpoint& ep, const std::string& route, const json& body) {
  httplib::Client cli(ep.base_url);
  if (!cli.is_valid()) throw EnvironmentError("invalid scanner endpoint: " + ep.base_url);
  cli.set_connection_timeout(ep.timeout);
  cli.set_read_timeout(ep.timeout);
  httplib::Headers headers;
  if (!ep.api_key.empty()) headers.emplace("Authorization", "Bearer " + ep.api_key);
  auto res = cli.Post(route, headers, body.dump(), "application/json");
  if (!res) {
    throw TransientError("scanner " + ep.base_url + route + ": " + httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransientError("scanner " + ep.base_url + route + " answered " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw PermanentError("scanner " + ep.base_url + route + " answered " + std::to_string(res->status));
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw PermanentError("scanner " + ep.base_url + route + " sent malformed JSON: " + e.what());
  }
}

// Missing or mistyped response fields are a contract violation, not a retry case.
template <class F>
auto field_errors(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw PermanentError(std::string("scanner response: ") + e.what());
  }
}

class HttpReputation final : public ReputationClient {
 public:
  explicit HttpReputation(HttpEndpoint ep) : ep_(std::move(ep)) {}
  ReputationResponse check(const std::string& url) override {
    auto j = post_json(ep_, "/url", json{{"url", url}});
    return field_errors([&] {
      ReputationResponse r;
      r.engine_hits = j.at("engine_hits").get<std::int64_t>();
      r.engines_total = j.at("engines_total").get<std::int64_t>();
      r.raw = j.value("raw", json());
      return r;
    });
  }

 private:
  HttpEndpoint ep_;
};

class HttpFallback final : public FallbackClient {
 public:
  explicit HttpFallback(HttpEndpoint ep) : ep_(std::move(ep)) {}
  bool is_phishing(const std::string& url) override {
    auto j = post_json(ep_, "/phishing", json{{"url", url}});
    return field_errors([&] { return j.at("phishing").get<bool>(); });
  }

 private:
  HttpEndpoint ep_;
};

class HttpSandbox final : public SandboxClient {
 public:
  explicit HttpSandbox(HttpEndpoint ep) : ep_(std::move(ep)) {}
  SandboxResponse lookup(const std::string& digest) override {
    auto j = post_json(ep_, "/file", json{{"digest", digest}});
    return field_errors([&] {
      SandboxResponse r;
      r.sandbox_detected = j.at("sandbox_detected").get<bool>();
      r.av_hits = j.at("av_hits").get<std::int64_t>();
      r.previously_seen = j.value("previously_seen", false);
      return r;
    });
  }

 private:
  HttpEndpoint ep_;
};

}  // namespace

std::unique_ptr<ReputationClient> make_http_reputation_client(HttpEndpoint endpoint) {
  return std::make_unique<HttpReputation>(std::move(endpoint));
}
std::unique_ptr<FallbackClient> make_http_fallback_client(HttpEndpoint endpoint) {
  return std::make_unique<HttpFallback>(std::move(endpoint));
}
std::unique_ptr<SandboxClient> make_http_sandbox_client(HttpEndpoint endpoint) {
  return std::make_unique<HttpSandbox>(std::move(endpoint));
}

// ---------------------------------------------------------------------------
// Mock server

struct MockScannerServer::Impl {
  Tables tables;
  httplib::Server server;
  std::thread thread;
  int port = 0;
  mutable std::mutex mu;
  std::map<std::string, std::size_t, std::less<>> counts;

  void count(const std::string& route) {
    std::lock_guard lock(mu);
    ++counts[route];
  }
};

MockScannerServer::MockScannerServer(Tables tables) : impl_(std::make_unique<Impl>()) {
  impl_->tables = std::move(tables);
  auto* impl = impl_.get();
  auto parse = [](const httplib::Request& req, httplib::Response& res, const char* key,
                  std::string& out) {
    try {
      out = json::parse(req.body).at(key).get<std::string>();
      return true;
    } catch (const json::exception&) {
      res.status = 400;
      return false;
    }
  };
  impl->server.Post("/url", [impl, parse](const httplib::Request& req, httplib::Response& res) {
    impl->count("/url");
    std::string url;
    if (!parse(req, res, "url", url)) return;
    json out{{"engine_hits", 0}, {"engines_total", impl->tables.default_engines_total}, {"raw", json::object()}};
    if (auto it = impl->tables.reputation.find(url); it != impl->tables.reputation.end()) {
      out = json{{"engine_hits", it->second.engine_hits},
                 {"engines_total", it->second.engines_total},
                 {"raw", it->second.raw.is_null() ? json::object() : it->second.raw}};
    }
    res.set_content(out.dump(), "application/json");
  });
  impl->server.Post("/phishing", [impl, parse](const httplib::Request& req, httplib::Response& res) {
    impl->count("/phishing");
    std::string url;
    if (!parse(req, res, "url", url)) return;
    auto it = impl->tables.phishing.find(url);
    const bool flag = it != impl->tables.phishing.end() && it->second;
    res.set_content(json{{"phishing", flag}}.dump(), "application/json");
  });
  impl->server.Post("/file", [impl, parse](const httplib::Request& req, httplib::Response& res) {
    impl->count("/file");
    std::string digest;
    if (!parse(req, res, "digest", digest)) return;
    auto it = impl->tables.sandbox.find(digest);
    if (it == impl->tables.sandbox.end()) {
      res.status = 404;
      return;
    }
    res.set_content(json{{"sandbox_detected", it->second.sandbox_detected},
                         {"av_hits", it->second.av_hits},
                         {"previously_seen", it->second.previously_seen}}
                        .dump(),
                    "application/json");
  });
}

MockScannerServer::~MockScannerServer() { stop(); }

int MockScannerServer::start() {
  if (impl_->thread.joinable()) return impl_->port;
  impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  if (impl_->port <= 0) throw EnvironmentError("mock scanner: cannot bind a local port");
  impl_->thread = std::thread([impl = impl_.get()] { impl->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void MockScannerServer::stop() {
  if (!impl_ || !impl_->thread.joinable()) return;
  impl_->server.stop();
  impl_->thread.join();
}

std::string MockScannerServer::base_url() const {
  return "http://127.0.0.1:" + std::to_string(impl_->port);
}

std::size_t MockScannerServer::request_count(std::string_view route) const {
  std::lock_guard lock(impl_->mu);
  auto it = impl_->counts.find(route);
  return it == impl_->counts.end() ? 0 : it->second;
}

// ---------------------------------------------------------------------------
// Rate limiting

TokenBucket::TokenBucket(double tokens_per_second, double burst)
    : rate_(tokens_per_second), burst_(std::max(1.0, burst)), tokens_(burst_),
      last_(std::chrono::steady_clock::now()) {
  if (!(tokens_per_second > 0)) throw InputError("token bucket rate must be positive");
}

void TokenBucket::refill() {
  auto now = std::chrono::steady_clock::now();
  std::chrono::duration<double> dt = now - last_;
  last_ = now;
  tokens_ = std::min(burst_, tokens_ + dt.count() * rate_);
}

bool TokenBucket::try_acquire() {
  std::lock_guard lock(mu_);
  refill();
  if (tokens_ < 1.0) return false;
  tokens_ -= 1.0;
  return true;
}

void TokenBucket::acquire() {
  while (true) {
    double wait_s = 0;
    {
      std::lock_guard lock(mu_);
      refill();
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      wait_s = (1.0 - tokens_) / rate_;
    }
    std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
  }
}

namespace {

class LimitedReputation final : public ReputationClient {
 public:
  LimitedReputation(std::unique_ptr<ReputationClient> inner, std::shared_ptr<TokenBucket> b)
      : inner_(std::move(inner)), bucket_(std::move(b)) {}
  ReputationResponse check(const std::string& url) override {
    bucket_->acquire();
    return inner_->check(url);
  }

 private:
  std::unique_ptr<ReputationClient> inner_;
  std::shared_ptr<TokenBucket> bucket_;
};

class LimitedFallback final : public FallbackClient {
 public:
  LimitedFallback(std::unique_ptr<FallbackClient> inner, std::shared_ptr<TokenBucket> b)
      : inner_(std::move(inner)), bucket_(std::move(b)) {}
  bool is_phishing(const std::string& url) override {
    bucket_->acquire();
    return inner_->is_phishing(url);
  }

 private:
  std::unique_ptr<FallbackClient> inner_;
  std::shared_ptr<TokenBucket> bucket_;
};

class LimitedSandbox final : public SandboxClient {
 public:
  LimitedSandbox(std::unique_ptr<SandboxClient> inner, std::shared_ptr<TokenBucket> b)
      : inner_(std::move(inner)), bucket_(std::move(b)) {}
  SandboxResponse lookup(const std::string& digest) override {
    bucket_->acquire();
    return inner_->lookup(digest);
  }

 private:
  std::unique_ptr<SandboxClient> inner_;
  std::shared_ptr<TokenBucket> bucket_;
};

}  // namespace

std::unique_ptr<ReputationClient> rate_limited(std::unique_ptr<ReputationClient> inner,
                                               std::shared_ptr<TokenBucket> bucket) {
  return std::make_unique<LimitedReputation>(std::move(inner), std::move(bucket));
}
std::unique_ptr<FallbackClient> rate_limited(std::unique_ptr<FallbackClient> inner,
                                             std::shared_ptr<TokenBucket> bucket) {
  return std::make_unique<LimitedFallback>(std::move(inner), std::move(bucket));
}
std::unique_ptr<SandboxClient> rate_limited(std::unique_ptr<SandboxClient> inner,
                                            std::shared_ptr<TokenBucket> bucket) {
  return std::make_unique<LimitedSandbox>(std::move(inner), std::move(bucket));
}

// ---------------------------------------------------------------------------
// Cache

std::optional<UrlVerdict> VerdictCache::get_url(const std::string& url, std::int64_t day) const {
  std::shared_lock lock(mu_);
  auto it = urls_.find({url, day});
  if (it == urls_.end()) return std::nullopt;
  return it->second;
}

void VerdictCache::put_url(const UrlVerdict& v, std::int64_t day) {
  std::unique_lock lock(mu_);
  urls_.insert_or_assign({v.url, day}, v);
}

std::optional<FileVerdict> VerdictCache::get_file(const std::string& digest) const {
  std::shared_lock lock(mu_);
  auto it = files_.find(digest);
  if (it == files_.end()) return std::nullopt;
  return it->second;
}

void VerdictCache::put_file(const FileVerdict& v) {
  std::unique_lock lock(mu_);
  files_.insert_or_assign(v.content_digest, v);
}

std::size_t VerdictCache::size() const {
  std::shared_lock lock(mu_);
  return urls_.size() + files_.size();
}

// ---------------------------------------------------------------------------
// Scanning

namespace {

std::int64_t day_of(Timestamp t) {
  return t >= 0 ? t / kSecondsPerDay : -((-t + kSecondsPerDay - 1) / kSecondsPerDay);
}

bool valid_digest(const std::string& d) {
  if (d.size() != 32 && d.size() != 40 && d.size() != 64) return false;
  return std::all_of(d.begin(), d.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c)) || (c >= 'a' && c <= 'f');
  });
}

}  // namespace

UrlVerdict scan_url(const std::string& url, ReputationClient& reputation, FallbackClient& fallback,
                    const PipelineConfig& config, const ScanOptions& options) {
  const auto day = day_of(options.now);
  if (options.cache && !options.bypass_cache) {
    if (auto hit = options.cache->get_url(url, day)) return *hit;
  }
  UrlVerdict v;
  v.url = url;
  v.scanned_at = options.now;
  try {
    auto r = reputation.check(url);
    if (r.engine_hits < 0 || r.engines_total < 0 || r.engine_hits > r.engines_total) {
      throw PermanentError("reputation response out of range for " + url);
    }
    v.engine_hits = r.engine_hits;
    v.engines_total = r.engines_total;
  } catch (const Error& e) {
    log_event("warn", "reputation_unreachable", {{"url", url}, {"error", e.what()}});
    v.outcome = UrlFinal::Unreachable;
    return v;  // not cached: a later attempt may succeed
  }
  if (v.engine_hits < config.url_engine_threshold) {
    try {
      v.fallback_flag = fallback.is_phishing(url);
    } catch (const Error& e) {
      log_event("warn", "fallback_unreachable", {{"url", url}, {"error", e.what()}});
    }
  }
  v.outcome = decide_url(v.engine_hits, v.fallback_flag, config);
  if (options.cache) options.cache->put_url(v, day);
  return v;
}

FileVerdict scan_file(const std::string& digest, SandboxClient& sandbox, const PipelineConfig& config,
                      const ScanOptions& options) {
  if (!valid_digest(digest)) {
    throw InputError("not a lowercase hex content digest: '" + digest + "'");
  }
  if (options.cache && !options.bypass_cache) {
    if (auto hit = options.cache->get_file(digest)) return *hit;
  }
  auto r = sandbox.lookup(digest);
  if (r.av_hits < 0) throw PermanentError("sandbox answered negative av_hits for " + digest);
  FileVerdict v;
  v.content_digest = digest;
  v.sandbox_detected = r.sandbox_detected;
  v.av_hits = r.av_hits;
  v.previously_seen = r.previously_seen;
  v.outcome = decide_file(v.sandbox_detected, v.av_hits, config);
  if (options.cache) options.cache->put_file(v);
  return v;
}

ScanSummary summarize(const std::vector<UrlVerdict>& verdicts) {
  ScanSummary s;
  s.total = verdicts.size();
  for (const auto& v : verdicts) {
    switch (v.outcome) {
      case UrlFinal::Malicious: ++s.malicious; break;
      case UrlFinal::Benign: ++s.benign; break;
      case UrlFinal::Unreachable: ++s.unreachable; break;
    }
  }
  if (s.total > 0) s.malicious_fraction = static_cast<double>(s.malicious) / static_cast<double>(s.total);
  return s;
}

BatchScanResult batch_scan(const std::vector<std::string>& urls, ReputationClient& reputation,
                           FallbackClient& fallback, const PipelineConfig& config,
                           std::size_t concurrency, const ScanOptions& options) {
  std::vector<std::string> distinct;
  std::set<std::string> seen;
  for (const auto& raw : urls) {
    auto u = normalize_url(raw).value_or(raw);
    if (seen.insert(u).second) distinct.push_back(std::move(u));
  }

  BatchScanResult result;
  result.verdicts.resize(distinct.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < distinct.size(); i = next++) {
      result.verdicts[i] = scan_url(distinct[i], reputation, fallback, config, options);
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(concurrency, distinct.size()));
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i + 1 < n; ++i) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  result.summary = summarize(result.verdicts);
  return result;
}

}  // namespace darkgram
