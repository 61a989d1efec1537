#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "darkgram/model.hpp"

namespace darkgram {

enum class UrlFinal { Malicious, Benign, Unreachable };
enum class FileFinal { Malicious, NotMalicious };
std::string_view to_string(UrlFinal f);
std::string_view to_string(FileFinal f);
std::optional<UrlFinal> url_final_from_string(std::string_view s);
std::optional<FileFinal> file_final_from_string(std::string_view s);

struct UrlVerdict {
  std::string url;
  std::int64_t engine_hits = 0;
  std::int64_t engines_total = 0;  // 0 only when the reputation service was unreachable
  std::optional<bool> fallback_flag;
  UrlFinal outcome = UrlFinal::Benign;
  Timestamp scanned_at = 0;

  /// Stable reference used by reports and blocklists.
  std::string verdict_id() const;
  friend bool operator==(const UrlVerdict&, const UrlVerdict&) = default;
};

struct FileVerdict {
  std::string content_digest;
  bool sandbox_detected = false;
  std::int64_t av_hits = 0;
  bool previously_seen = false;
  FileFinal outcome = FileFinal::NotMalicious;

  std::string verdict_id() const;
  friend bool operator==(const FileVerdict&, const FileVerdict&) = default;
};

void to_json(nlohmann::json& j, const UrlVerdict& v);
void from_json(const nlohmann::json& j, UrlVerdict& v);
void to_json(nlohmann::json& j, const FileVerdict& v);
void from_json(const nlohmann::json& j, FileVerdict& v);

/// The decision rules on their own.
UrlFinal decide_url(std::int64_t engine_hits, std::optional<bool> fallback_flag,
                    const PipelineConfig& config);
FileFinal decide_file(bool sandbox_detected, std::int64_t av_hits, const PipelineConfig& config);

// ---------------------------------------------------------------------------
// Client contracts. All of them raise TransientError when the service
// cannot be reached.

struct ReputationResponse {
  std::int64_t engine_hits = 0;
  std::int64_t engines_total = 0;
  nlohmann::json raw;
};

class ReputationClient {
 public:
  virtual ~ReputationClient() = default;
  virtual ReputationResponse check(const std::string& url) = 0;
};

/// Single-detector phishing check, consulted for URLs the multi-engine
/// service did not flag.
class FallbackClient {
 public:
  virtual ~FallbackClient() = default;
  virtual bool is_phishing(const std::string& url) = 0;
};

struct SandboxResponse {
  bool sandbox_detected = false;
  std::int64_t av_hits = 0;
  bool previously_seen = false;
};

class SandboxClient {
 public:
  virtual ~SandboxClient() = default;
  virtual SandboxResponse lookup(const std::string& digest) = 0;
};

/// JSON-over-HTTP implementations of the wire contracts:
///   POST {base}/url      {"url":..}    -> {"engine_hits","engines_total","raw"}
///   POST {base}/phishing {"url":..}    -> {"phishing": bool}
///   POST {base}/file     {"digest":..} -> {"sandbox_detected","av_hits","previously_seen"}
/// An API key, when given, is sent as a bearer token.
struct HttpEndpoint {
  std::string base_url;  // e.g. http://127.0.0.1:8080
  std::string api_key;
  std::chrono::milliseconds timeout = std::chrono::seconds(10);
};

std::unique_ptr<ReputationClient> make_http_reputation_client(HttpEndpoint endpoint);
std::unique_ptr<FallbackClient> make_http_fallback_client(HttpEndpoint endpoint);
std::unique_ptr<SandboxClient> make_http_sandbox_client(HttpEndpoint endpoint);

/// Serves the wire contracts above from fixture tables on 127.0.0.1.
/// Unknown URLs answer zero hits; unknown digests answer 404.
class MockScannerServer {
 public:
  struct Tables {
    std::map<std::string, ReputationResponse> reputation;
    std::map<std::string, bool> phishing;
    std::map<std::string, SandboxResponse> sandbox;
    std::int64_t default_engines_total = 80;
  };

  explicit MockScannerServer(Tables tables);
  ~MockScannerServer();
  MockScannerServer(const MockScannerServer&) = delete;
  MockScannerServer& operator=(const MockScannerServer&) = delete;

  /// Binds an ephemeral port and serves on a background thread.
  int start();
  void stop();
  std::string base_url() const;
  std::size_t request_count(std::string_view route) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// Rate limiting

/// Classic token bucket. acquire() blocks until a token is available.
class TokenBucket {
 public:
  TokenBucket(double tokens_per_second, double burst);
  void acquire();
  bool try_acquire();

 private:
  void refill();

  std::mutex mu_;
  double rate_;
  double burst_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
};

std::unique_ptr<ReputationClient> rate_limited(std::unique_ptr<ReputationClient> inner,
                                               std::shared_ptr<TokenBucket> bucket);
std::unique_ptr<FallbackClient> rate_limited(std::unique_ptr<FallbackClient> inner,
                                             std::shared_ptr<TokenBucket> bucket);
std::unique_ptr<SandboxClient> rate_limited(std::unique_ptr<SandboxClient> inner,
                                            std::shared_ptr<TokenBucket> bucket);

// ---------------------------------------------------------------------------
// Scanning

/// URL verdicts keyed by (url, day); file verdicts by digest. Concurrent
/// readers, exclusive writers.
class VerdictCache {
 public:
  std::optional<UrlVerdict> get_url(const std::string& url, std::int64_t day) const;
  void put_url(const UrlVerdict& v, std::int64_t day);
  std::optional<FileVerdict> get_file(const std::string& digest) const;
  void put_file(const FileVerdict& v);
  std::size_t size() const;

 private:
  mutable std::shared_mutex mu_;
  std::map<std::pair<std::string, std::int64_t>, UrlVerdict> urls_;
  std::map<std::string, FileVerdict> files_;
};

struct ScanOptions {
  VerdictCache* cache = nullptr;
  bool bypass_cache = false;
  Timestamp now = 0;  // scan time; also selects the cache day
};

/// Reputation first; the fallback only when engine hits are below the
/// threshold. An unreachable reputation service gives Unreachable without
/// consulting the fallback; an unreachable fallback leaves the flag absent.
UrlVerdict scan_url(const std::string& url, ReputationClient& reputation, FallbackClient& fallback,
                    const PipelineConfig& config, const ScanOptions& options = {});

/// Digest must be 32, 40, or 64 hex characters (InputError otherwise). An
/// unreachable sandbox propagates TransientError: no verdict is invented.
FileVerdict scan_file(const std::string& digest, SandboxClient& sandbox,
                      const PipelineConfig& config, const ScanOptions& options = {});

struct ScanSummary {
  std::size_t total = 0;
  std::size_t malicious = 0;
  std::size_t benign = 0;
  std::size_t unreachable = 0;
  std::optional<double> malicious_fraction;  // none for an empty batch
};

struct BatchScanResult {
  std::vector<UrlVerdict> verdicts;  // one per distinct URL, first-seen order
  ScanSummary summary;
};

/// Deduplicates (after normalization), then scans with at most
/// `concurrency` requests in flight. Clients must be thread-safe; wrap them
/// with rate_limited() to respect quotas.
BatchScanResult batch_scan(const std::vector<std::string>& urls, ReputationClient& reputation,
                           FallbackClient& fallback, const PipelineConfig& config,
                           std::size_t concurrency = 8, const ScanOptions& options = {});

ScanSummary summarize(const std::vector<UrlVerdict>& verdicts);

}  // namespace darkgram
