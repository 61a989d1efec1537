#include "darkgram/model.hpp"

#include <cctype>

namespace darkgram {

namespace {

constexpr std::array<std::string_view, 5> kCategoryNames = {
    "CredentialCompromise", "PiratedSoftware", "BlackhatResources",
    "PiratedMedia", "SocialMediaManipulation",
};

bool is_lower_hex(std::string_view s) {
  if (s.empty()) return false;
  for (char ch : s) {
    if (!std::isxdigit(static_cast<unsigned char>(ch)) ||
        std::isupper(static_cast<unsigned char>(ch))) {
      return false;
    }
  }
  return true;
}

}  // namespace

std::string_view to_string(CacCategory c) {
  return kCategoryNames[static_cast<std::size_t>(c)];
}

std::optional<CacCategory> category_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == name) return static_cast<CacCategory>(i);
  }
  return std::nullopt;
}

std::string_view to_string(const Label& l) {
  return l.category ? to_string(*l.category) : kBenignName;
}

std::optional<Label> label_from_string(std::string_view name) {
  if (name == kBenignName) return Label{};
  if (auto c = category_from_string(name)) return Label{*c};
  return std::nullopt;
}

Label label_from_index(std::size_t i) {
  if (i == 0) return Label{};
  return Label{static_cast<CacCategory>(i - 1)};
}

std::vector<std::string> canonical_label_names() {
  std::vector<std::string> out;
  out.reserve(kLabelCount);
  for (std::size_t i = 0; i < kLabelCount; ++i) {
    out.emplace_back(to_string(label_from_index(i)));
  }
  return out;
}

std::string_view to_string(SourceKind k) {
  switch (k) {
    case SourceKind::Replay: return "Replay";
    case SourceKind::Live: return "Live";
    case SourceKind::ExternalLinkSource: return "ExternalLinkSource";
  }
  return "Replay";
}

std::optional<SourceKind> source_kind_from_string(std::string_view s) {
  if (s == "Replay") return SourceKind::Replay;
  if (s == "Live") return SourceKind::Live;
  if (s == "ExternalLinkSource") return SourceKind::ExternalLinkSource;
  return std::nullopt;
}

std::string_view to_string(AttachmentKind k) {
  switch (k) {
    case AttachmentKind::Document: return "Document";
    case AttachmentKind::Archive: return "Archive";
    case AttachmentKind::Executable: return "Executable";
    case AttachmentKind::Media: return "Media";
    case AttachmentKind::Other: return "Other";
  }
  return "Other";
}

std::optional<AttachmentKind> attachment_kind_from_string(std::string_view s) {
  for (auto k : {AttachmentKind::Document, AttachmentKind::Archive,
                 AttachmentKind::Executable, AttachmentKind::Media,
                 AttachmentKind::Other}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::vector<std::string> PostRecord::attachment_names() const {
  std::vector<std::string> names;
  names.reserve(attachments.size());
  for (const auto& a : attachments) names.push_back(a.filename);
  return names;
}

ValidationResult validate_record(const ChannelRecord& c) {
  ValidationResult v;
  if (c.channel_id.empty()) v.push_back({"channel_id", "channel_id non-empty"});
  return v;
}

ValidationResult validate_record(const AttachmentMeta& a) {
  ValidationResult v;
  if (a.size_bytes < 0) v.push_back({"size_bytes", "size_bytes non-negative"});
  if (a.content_digest) {
    if (a.kind != AttachmentKind::Executable) {
      v.push_back({"content_digest", "digest only for executables"});
    } else if (!is_lower_hex(*a.content_digest)) {
      v.push_back({"content_digest", "content_digest lowercase hex"});
    }
  }
  return v;
}

ValidationResult validate_record(const PostRecord& p) {
  ValidationResult v;
  if (p.channel_id.empty()) v.push_back({"channel_id", "channel_id non-empty"});
  if (p.post_id < 0) v.push_back({"post_id", "post_id non-negative"});
  if (p.views < 0) v.push_back({"views", "views non-negative"});
  if (p.forwards < 0) v.push_back({"forwards", "forwards non-negative"});
  if (p.refresh_seq < 0) v.push_back({"refresh_seq", "refresh_seq non-negative"});
  for (const auto& [emoji, count] : p.reactions) {
    if (count < 0) {
      v.push_back({"reactions", "reaction count non-negative: " + emoji});
    }
  }
  for (const auto& a : p.attachments) {
    for (auto& sub : validate_record(a)) {
      v.push_back({"attachments." + sub.field, sub.message});
    }
  }
  return v;
}

ValidationResult validate_record(const EngagementSnapshot& s) {
  ValidationResult v;
  if (s.channel_id.empty()) v.push_back({"channel_id", "channel_id non-empty"});
  if (s.subscribers < 0) v.push_back({"subscribers", "subscribers non-negative"});
  return v;
}

ValidationResult validate_config(const PipelineConfig& cfg) {
  ValidationResult v;
  auto at_least_one = [&](std::int64_t value, const char* name) {
    if (value < 1) v.push_back({name, std::string(name) + " >= 1"});
  };
  at_least_one(cfg.refresh_interval_s, "refresh_interval_s");
  at_least_one(cfg.url_engine_threshold, "url_engine_threshold");
  at_least_one(cfg.file_av_threshold, "file_av_threshold");
  at_least_one(cfg.channel_flag_threshold, "channel_flag_threshold");
  at_least_one(cfg.channel_eval_posts, "channel_eval_posts");
  at_least_one(cfg.large_leak_threshold, "large_leak_threshold");
  at_least_one(cfg.growth_window_days, "growth_window_days");
  at_least_one(cfg.recheck_days, "recheck_days");
  at_least_one(cfg.poll_batch, "poll_batch");
  at_least_one(cfg.probe_concurrency, "probe_concurrency");
  at_least_one(cfg.scan_concurrency, "scan_concurrency");
  at_least_one(cfg.eval_concurrency, "eval_concurrency");
  if (cfg.channel_flag_threshold > cfg.channel_eval_posts) {
    v.push_back({"channel_flag_threshold", "channel_flag_threshold <= channel_eval_posts"});
  }
  if (!(cfg.conversion_rate >= 0.0 && cfg.conversion_rate <= 1.0)) {
    v.push_back({"conversion_rate", "conversion_rate in [0,1]"});
  }
  if (!(cfg.gate_threshold >= 0.0 && cfg.gate_threshold <= 1.0)) {
    v.push_back({"gate_threshold", "gate_threshold in [0,1]"});
  }
  return v;
}

ValidationResult validate_channel_posts(const ChannelRecord& c,
                                        const std::vector<PostRecord>& posts) {
  ValidationResult v;
  for (const auto& p : posts) {
    if (p.channel_id == c.channel_id && p.posted_at < c.created_at) {
      v.push_back({"created_at", "created_at <= posted_at of post " +
                                     std::to_string(p.post_id)});
    }
  }
  return v;
}

std::string describe(const ValidationResult& violations) {
  std::string out;
  for (const auto& viol : violations) {
    if (!out.empty()) out += "; ";
    out += viol.field + ": " + viol.message;
  }
  return out;
}

}  // namespace darkgram
