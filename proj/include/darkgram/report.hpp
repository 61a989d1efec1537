#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "darkgram/classify.hpp"
#include "darkgram/discover.hpp"
#include "darkgram/model.hpp"
#include "darkgram/probe.hpp"
#include "darkgram/scan.hpp"

namespace darkgram {

enum class Destination { PlatformAbuse, Organization, Blocklist };
std::string_view to_string(Destination d);
std::optional<Destination> destination_from_string(std::string_view s);

inline constexpr std::size_t kExcerptChars = 280;
inline constexpr std::size_t kMaxSummaries = 10;

struct PostSummary {
  std::int64_t post_id = 0;
  Timestamp posted_at = 0;
  std::string excerpt;  // at most kExcerptChars code points of post text
  ClassificationResult classification;
  std::vector<std::string> verdict_refs;

  friend bool operator==(const PostSummary&, const PostSummary&) = default;
};

struct ReportBundle {
  std::string channel_id;
  std::string channel_name;
  std::string handle_url;
  std::string description;
  CacCategory majority_category = CacCategory::CredentialCompromise;
  std::vector<PostSummary> post_summaries;  // newest first
  std::vector<std::string> evidence_refs;   // sorted, distinct
  Timestamp created_at = 0;
  Destination destination = Destination::PlatformAbuse;

  /// Content-derived, so identical bundles share an id.
  std::string bundle_id() const;
  friend bool operator==(const ReportBundle&, const ReportBundle&) = default;
};

void to_json(nlohmann::json& j, const ReportBundle& b);
void from_json(const nlohmann::json& j, ReportBundle& b);

/// Everything a report may cite. Only metadata: post text, verdicts and
/// probe outcomes. Attachment bytes never enter the store.
struct EvidenceStore {
  std::map<std::pair<std::string, std::int64_t>, PostRecord> posts;
  std::map<std::string, UrlVerdict> url_verdicts;    // by URL
  std::map<std::string, FileVerdict> file_verdicts;  // by digest
  std::map<std::string, LinkProbeResult> probes;     // by URL

  void add_posts(const std::vector<PostRecord>& ps);
  void add_url_verdicts(const std::vector<UrlVerdict>& vs);
  void add_file_verdicts(const std::vector<FileVerdict>& vs);
  void add_probes(const std::vector<LinkProbeResult>& ps);
};

std::string probe_ref(const LinkProbeResult& p);

/// Up to ten newest flagged posts of a Malicious decision. Throws
/// InputError for any other decision.
ReportBundle build_report(const ChannelRecord& channel, const ChannelFlagDecision& decision,
                          const EvidenceStore& evidence, Timestamp created_at,
                          Destination destination = Destination::PlatformAbuse);

/// Plain-text disclosure message. Pure function of the bundle.
std::string render_email(const ReportBundle& bundle);

/// Writes outbox/<bundle_id>/report.txt and bundle.json. A bundle for a
/// channel and destination already reported within `suppression_days` is
/// suppressed unless it cites a flagged post the earlier bundle did not.
/// Returns the bundle directory, or nothing when suppressed.
class Outbox {
 public:
  explicit Outbox(std::filesystem::path dir);
  std::optional<std::filesystem::path> write(const ReportBundle& bundle, std::int64_t suppression_days = 30);
  std::vector<ReportBundle> bundles() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

/// url,first_seen,evidence_ref for Malicious verdicts only, stable-sorted by
/// URL. first_seen falls back to the scan time when the URL is not in
/// `first_seen`.
std::string export_blocklist(const std::vector<UrlVerdict>& verdicts,
                             const std::map<std::string, Timestamp>& first_seen = {});
/// Writes blocklist_<destination>.csv into `dir`.
std::filesystem::path write_blocklist(const std::filesystem::path& dir, std::string_view destination,
                                      const std::vector<UrlVerdict>& verdicts,
                                      const std::map<std::string, Timestamp>& first_seen = {});

enum class Outcome { Removed, Active, Acknowledged, NoResponse };
std::string_view to_string(Outcome o);
std::optional<Outcome> outcome_from_string(std::string_view s);

struct DisclosureLedgerEntry {
  std::string bundle_id;
  Timestamp sent_at = 0;
  Destination destination = Destination::PlatformAbuse;
  Outcome outcome = Outcome::NoResponse;
  std::optional<Timestamp> outcome_at;
  std::optional<std::int64_t> response_days;

  friend bool operator==(const DisclosureLedgerEntry&, const DisclosureLedgerEntry&) = default;
};

/// Fills response_days with whole days from sent_at to outcome_at.
DisclosureLedgerEntry make_ledger_entry(std::string bundle_id, Timestamp sent_at, Destination destination,
                                        Outcome outcome, std::optional<Timestamp> outcome_at);

void to_json(nlohmann::json& j, const DisclosureLedgerEntry& e);
void from_json(const nlohmann::json& j, DisclosureLedgerEntry& e);

std::vector<DisclosureLedgerEntry> read_ledger(const std::filesystem::path& path);
void append_ledger(const std::filesystem::path& path, const DisclosureLedgerEntry& entry);

struct LedgerStats {
  std::size_t total = 0;
  std::size_t removed = 0;
  std::optional<double> removal_rate;  // none for an empty ledger
  std::optional<double> median_response_days;
  std::map<std::string, std::optional<double>> median_response_days_by_destination;
};

LedgerStats ledger_stats(const std::vector<DisclosureLedgerEntry>& entries);

/// "2024-03-01T12:00:00Z"
std::string format_utc(Timestamp t);

}  // namespace darkgram
