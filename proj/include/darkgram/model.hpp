#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace darkgram {

/// UTC epoch seconds.
using Timestamp = std::int64_t;

inline constexpr Timestamp kSecondsPerDay = 86400;

enum class CacCategory {
  CredentialCompromise,
  PiratedSoftware,
  BlackhatResources,
  PiratedMedia,
  SocialMediaManipulation,
};

inline constexpr std::array<CacCategory, 5> kAllCategories = {
    CacCategory::CredentialCompromise, CacCategory::PiratedSoftware,
    CacCategory::BlackhatResources,    CacCategory::PiratedMedia,
    CacCategory::SocialMediaManipulation,
};

std::string_view to_string(CacCategory c);
std::optional<CacCategory> category_from_string(std::string_view name);

/// Six-valued training label: benign, or one of the five categories.
/// Canonical order is Benign followed by the categories in declaration order.
struct Label {
  std::optional<CacCategory> category;  // nullopt = Benign

  bool is_benign() const { return !category.has_value(); }
  friend bool operator==(const Label&, const Label&) = default;
  friend auto operator<=>(const Label& a, const Label& b) {
    return a.index() <=> b.index();
  }
  std::size_t index() const {
    return category ? static_cast<std::size_t>(*category) + 1 : 0;
  }
};

inline constexpr std::string_view kBenignName = "Benign";
inline constexpr std::size_t kLabelCount = 6;

std::string_view to_string(const Label& l);
std::optional<Label> label_from_string(std::string_view name);
Label label_from_index(std::size_t i);
/// Canonical label names in order: Benign, then the five categories.
std::vector<std::string> canonical_label_names();

enum class SourceKind { Replay, Live, ExternalLinkSource };
std::string_view to_string(SourceKind k);
std::optional<SourceKind> source_kind_from_string(std::string_view s);

enum class AttachmentKind { Document, Archive, Executable, Media, Other };
std::string_view to_string(AttachmentKind k);
std::optional<AttachmentKind> attachment_kind_from_string(std::string_view s);

struct ChannelRecord {
  std::string channel_id;
  std::string title;
  std::string description;
  Timestamp created_at = 0;
  bool replies_enabled = false;
  std::optional<CacCategory> category;
  SourceKind source_kind = SourceKind::Replay;

  friend bool operator==(const ChannelRecord&, const ChannelRecord&) = default;
};

struct AttachmentMeta {
  std::string filename;
  std::int64_t size_bytes = 0;
  AttachmentKind kind = AttachmentKind::Other;
  // Only executables submitted for scanning carry a digest. Credential
  // payload files are never downloaded, so they have nothing to hash.
  std::optional<std::string> content_digest;

  friend bool operator==(const AttachmentMeta&, const AttachmentMeta&) = default;
};

struct PostRecord {
  std::string channel_id;
  std::int64_t post_id = 0;
  Timestamp posted_at = 0;
  std::string text;
  std::vector<AttachmentMeta> attachments;
  std::vector<std::string> links;
  std::vector<std::string> bot_refs;
  std::int64_t views = 0;
  std::int64_t forwards = 0;
  std::map<std::string, std::int64_t> reactions;  // raw emoji -> count
  std::vector<std::string> replies;
  std::int64_t refresh_seq = 0;

  std::vector<std::string> attachment_names() const;

  friend bool operator==(const PostRecord&, const PostRecord&) = default;
};

struct EngagementSnapshot {
  std::string channel_id;
  Timestamp taken_at = 0;
  std::int64_t subscribers = 0;

  friend bool operator==(const EngagementSnapshot&, const EngagementSnapshot&) = default;
};

/// Every quantitative rule of the pipeline. Defaults are the study's constants.
struct PipelineConfig {
  std::int64_t refresh_interval_s = 600;
  std::int64_t url_engine_threshold = 2;
  std::int64_t file_av_threshold = 2;
  std::int64_t channel_flag_threshold = 5;
  std::int64_t channel_eval_posts = 10;
  double conversion_rate = 0.10;
  std::int64_t large_leak_threshold = 10000;
  std::int64_t growth_window_days = 7;

  // Operational knobs without a counterpart in the study.
  double gate_threshold = 0.5;
  std::int64_t recheck_days = 7;
  std::int64_t migration_creation_window_days = 30;
  std::int64_t report_suppression_days = 30;
  std::int64_t poll_batch = 100;
  std::int64_t probe_concurrency = 4;
  std::int64_t scan_concurrency = 8;
  std::int64_t eval_concurrency = 4;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

/// A violated invariant, named by field.
struct Violation {
  std::string field;
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Empty means the record is valid.
using ValidationResult = std::vector<Violation>;

ValidationResult validate_record(const ChannelRecord& c);
ValidationResult validate_record(const PostRecord& p);
ValidationResult validate_record(const AttachmentMeta& a);
ValidationResult validate_record(const EngagementSnapshot& s);
ValidationResult validate_config(const PipelineConfig& cfg);
/// Cross-record check: the channel exists before any of its posts.
ValidationResult validate_channel_posts(const ChannelRecord& c,
                                        const std::vector<PostRecord>& posts);

std::string describe(const ValidationResult& violations);

}  // namespace darkgram
