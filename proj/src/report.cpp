#include "darkgram/report.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>

#include "darkgram/errors.hpp"
#include "darkgram/serialize.hpp"
#include "darkgram/stats.hpp"
#include "darkgram/text.hpp"

namespace darkgram {

std::string_view to_string(Destination d) {
  switch (d) {
    case Destination::PlatformAbuse: return "PlatformAbuse";
    case Destination::Organization: return "Organization";
    case Destination::Blocklist: return "Blocklist";
  }
  return "PlatformAbuse";
}

std::optional<Destination> destination_from_string(std::string_view s) {
  for (auto d : {Destination::PlatformAbuse, Destination::Organization, Destination::Blocklist}) {
    if (to_string(d) == s) return d;
  }
  return std::nullopt;
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Removed: return "Removed";
    case Outcome::Active: return "Active";
    case Outcome::Acknowledged: return "Acknowledged";
    case Outcome::NoResponse: return "NoResponse";
  }
  return "NoResponse";
}

std::optional<Outcome> outcome_from_string(std::string_view s) {
  for (auto o : {Outcome::Removed, Outcome::Active, Outcome::Acknowledged, Outcome::NoResponse}) {
    if (to_string(o) == s) return o;
  }
  return std::nullopt;
}

std::string format_utc(Timestamp t) {
  std::time_t tt = static_cast<std::time_t>(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// Bundles

void to_json(json& j, const ReportBundle& b) {
  json summaries = json::array();
  for (const auto& s : b.post_summaries) {
    summaries.push_back(json{{"post_id", s.post_id},
                             {"posted_at", s.posted_at},
                             {"excerpt", s.excerpt},
                             {"classification", s.classification},
                             {"verdict_refs", s.verdict_refs}});
  }
  j = json{{"bundle_id", b.bundle_id()},
           {"channel_id", b.channel_id},
           {"channel_name", b.channel_name},
           {"handle_url", b.handle_url},
           {"description", b.description},
           {"majority_category", to_string(b.majority_category)},
           {"post_summaries", summaries},
           {"evidence_refs", b.evidence_refs},
           {"created_at", b.created_at},
           {"destination", to_string(b.destination)}};
}

void from_json(const json& j, ReportBundle& b) {
  b.channel_id = j.at("channel_id").get<std::string>();
  b.channel_name = j.at("channel_name").get<std::string>();
  b.handle_url = j.at("handle_url").get<std::string>();
  b.description = j.value("description", std::string());
  auto cat = category_from_string(j.at("majority_category").get<std::string>());
  if (!cat) throw InputError("unknown category in bundle: " + j.at("majority_category").dump());
  b.majority_category = *cat;
  b.post_summaries.clear();
  for (const auto& s : j.at("post_summaries")) {
    b.post_summaries.push_back(PostSummary{s.at("post_id").get<std::int64_t>(), s.value("posted_at", Timestamp{0}),
                                           s.at("excerpt").get<std::string>(),
                                           s.at("classification").get<ClassificationResult>(),
                                           s.value("verdict_refs", std::vector<std::string>{})});
  }
  b.evidence_refs = j.value("evidence_refs", std::vector<std::string>{});
  b.created_at = j.at("created_at").get<Timestamp>();
  auto dest = destination_from_string(j.at("destination").get<std::string>());
  if (!dest) throw InputError("unknown destination: " + j.at("destination").dump());
  b.destination = *dest;
}

std::string ReportBundle::bundle_id() const {
  std::string key = channel_id + '\n' + std::string(to_string(destination)) + '\n' + std::to_string(created_at);
  for (const auto& s : post_summaries) key += '\n' + std::to_string(s.post_id);
  return "b-" + hex64(fnv1a64(key));
}

void EvidenceStore::add_posts(const std::vector<PostRecord>& ps) {
  for (const auto& p : ps) posts.insert_or_assign({p.channel_id, p.post_id}, p);
}
void EvidenceStore::add_url_verdicts(const std::vector<UrlVerdict>& vs) {
  for (const auto& v : vs) url_verdicts.insert_or_assign(v.url, v);
}
void EvidenceStore::add_file_verdicts(const std::vector<FileVerdict>& vs) {
  for (const auto& v : vs) file_verdicts.insert_or_assign(v.content_digest, v);
}
void EvidenceStore::add_probes(const std::vector<LinkProbeResult>& ps) {
  for (const auto& p : ps) probes.insert_or_assign(p.url, p);
}

std::string probe_ref(const LinkProbeResult& p) {
  return "probe-" + hex64(fnv1a64(p.url + '\n' + std::string(to_string(p.status))));
}

namespace {

std::string excerpt_of(const PostRecord* post) {
  if (!post) return "";
  if (!post->text.empty()) return utf8_truncate(post->text, kExcerptChars);
  // Name the files, never their contents.
  auto names = post->attachment_names();
  if (names.empty()) return "";
  std::string s = "[attachments:";
  for (const auto& n : names) s += " " + n;
  return utf8_truncate(s + "]", kExcerptChars);
}

std::vector<std::string> refs_for(const PostRecord* post, const EvidenceStore& ev) {
  std::set<std::string> refs;
  if (!post) return {};
  for (const auto& link : post->links) {
    if (auto it = ev.url_verdicts.find(link); it != ev.url_verdicts.end()) refs.insert(it->second.verdict_id());
    if (auto it = ev.probes.find(link); it != ev.probes.end()) refs.insert(probe_ref(it->second));
  }
  for (const auto& a : post->attachments) {
    if (a.kind != AttachmentKind::Executable || !a.content_digest) continue;
    if (auto it = ev.file_verdicts.find(*a.content_digest); it != ev.file_verdicts.end()) {
      refs.insert(it->second.verdict_id());
    }
  }
  return {refs.begin(), refs.end()};
}

}  // namespace

ReportBundle build_report(const ChannelRecord& channel, const ChannelFlagDecision& decision,
                          const EvidenceStore& evidence, Timestamp created_at, Destination destination) {
  if (decision.decision != FlagDecision::Malicious) {
    throw InputError("report requires a Malicious decision; " + decision.channel_id + " is " +
                     std::string(to_string(decision.decision)));
  }
  if (channel.channel_id != decision.channel_id) {
    throw InputError("channel " + channel.channel_id + " does not match decision for " + decision.channel_id);
  }
  std::vector<const PostEvidence*> flagged;
  for (const auto& e : decision.per_post) {
    if (e.result.is_ca) flagged.push_back(&e);
  }
  if (flagged.empty()) throw std::logic_error("Malicious decision without flagged posts: " + decision.channel_id);
  std::stable_sort(flagged.begin(), flagged.end(), [](const PostEvidence* a, const PostEvidence* b) {
    return a->posted_at != b->posted_at ? a->posted_at > b->posted_at : a->post_id > b->post_id;
  });
  if (flagged.size() > kMaxSummaries) flagged.resize(kMaxSummaries);

  ReportBundle b;
  b.channel_id = channel.channel_id;
  b.channel_name = channel.title;
  b.handle_url = "https://t.me/" + channel.channel_id;
  b.description = channel.description;
  b.majority_category = decision.majority_category.value_or(
      flagged.front()->result.category.value_or(CacCategory::CredentialCompromise));
  b.created_at = created_at;
  b.destination = destination;
  std::set<std::string> all_refs;
  for (const auto* e : flagged) {
    const PostRecord* post = nullptr;
    if (auto it = evidence.posts.find({channel.channel_id, e->post_id}); it != evidence.posts.end()) {
      post = &it->second;
    }
    PostSummary s{e->post_id, e->posted_at, excerpt_of(post), e->result, refs_for(post, evidence)};
    all_refs.insert(s.verdict_refs.begin(), s.verdict_refs.end());
    b.post_summaries.push_back(std::move(s));
  }
  b.evidence_refs.assign(all_refs.begin(), all_refs.end());
  return b;
}

std::string render_email(const ReportBundle& b) {
  std::string out;
  out += "Subject: Abuse report: " + b.channel_name + " (" + b.handle_url + ")\n";
  out += "Report-ID: " + b.bundle_id() + "\n";
  out += "Date: " + format_utc(b.created_at) + "\n";
  out += "\n";
  out += "Channel: " + b.channel_name + "\n";
  out += "URL: " + b.handle_url + "\n";
  out += "Category: " + std::string(to_string(b.majority_category)) + "\n";
  if (!b.description.empty()) out += "Description: " + b.description + "\n";
  out += "\n";
  out += "The channel distributes cybercriminal content. Its most recent flagged posts:\n\n";
  std::size_t n = 0;
  for (const auto& s : b.post_summaries) {
    out += std::to_string(++n) + ". Post " + std::to_string(s.post_id) + " (" + format_utc(s.posted_at) + ")";
    if (s.classification.category) out += " [" + std::string(to_string(*s.classification.category)) + "]";
    out += "\n";
    out += "   " + s.excerpt + "\n";
    if (!s.verdict_refs.empty()) {
      out += "   Evidence:";
      for (const auto& r : s.verdict_refs) out += " " + r;
      out += "\n";
    }
  }
  out += "\nEvidence references:\n";
  if (b.evidence_refs.empty()) out += "(none)\n";
  for (const auto& r : b.evidence_refs) out += "- " + r + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Outbox

namespace {
std::mutex g_outbox_mu;
}

Outbox::Outbox(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::vector<ReportBundle> Outbox::bundles() const {
  std::vector<ReportBundle> out;
  if (!std::filesystem::exists(dir_)) return out;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    auto f = entry.path() / "bundle.json";
    if (entry.is_directory() && std::filesystem::exists(f)) files.push_back(f);
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      out.push_back(json::parse(read_text_file(f)).get<ReportBundle>());
    } catch (const json::exception& e) {
      throw InputError(f.string() + ": " + e.what());
    }
  }
  return out;
}

std::optional<std::filesystem::path> Outbox::write(const ReportBundle& bundle, std::int64_t suppression_days) {
  std::lock_guard lock(g_outbox_mu);
  const Timestamp window = suppression_days * kSecondsPerDay;
  for (const auto& prior : bundles()) {
    if (prior.channel_id != bundle.channel_id || prior.destination != bundle.destination) continue;
    if (bundle.created_at - prior.created_at >= window || bundle.created_at < prior.created_at) continue;
    std::set<std::int64_t> reported;
    for (const auto& s : prior.post_summaries) reported.insert(s.post_id);
    const bool has_new = std::any_of(bundle.post_summaries.begin(), bundle.post_summaries.end(),
                                     [&](const PostSummary& s) { return !reported.contains(s.post_id); });
    if (!has_new) return std::nullopt;
  }
  const auto dir = dir_ / bundle.bundle_id();
  write_text_file(dir / "report.txt", render_email(bundle));
  write_text_file(dir / "bundle.json", json(bundle).dump(2) + "\n");
  return dir;
}

// ---------------------------------------------------------------------------
// Blocklists

std::string export_blocklist(const std::vector<UrlVerdict>& verdicts, const std::map<std::string, Timestamp>& first_seen) {
  std::vector<const UrlVerdict*> rows;
  for (const auto& v : verdicts) {
    if (v.outcome == UrlFinal::Malicious) rows.push_back(&v);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const UrlVerdict* a, const UrlVerdict* b) { return a->url < b->url; });
  std::string out = "url,first_seen,evidence_ref\n";
  for (const auto* v : rows) {
    auto it = first_seen.find(v->url);
    const Timestamp seen = it == first_seen.end() ? v->scanned_at : it->second;
    std::string url = v->url;
    if (url.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : url) {
        if (c == '"') quoted += '"';
        quoted += c;
      }
      url = quoted + "\"";
    }
    out += url + "," + format_utc(seen) + "," + v->verdict_id() + "\n";
  }
  return out;
}

std::filesystem::path write_blocklist(const std::filesystem::path& dir, std::string_view destination,
                                      const std::vector<UrlVerdict>& verdicts,
                                      const std::map<std::string, Timestamp>& first_seen) {
  std::string name(destination);
  for (char& c : name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  if (name.empty()) throw InputError("blocklist destination name is empty");
  auto path = dir / ("blocklist_" + name + ".csv");
  write_text_file(path, export_blocklist(verdicts, first_seen));
  return path;
}

// ---------------------------------------------------------------------------
// Ledger

DisclosureLedgerEntry make_ledger_entry(std::string bundle_id, Timestamp sent_at, Destination destination,
                                        Outcome outcome, std::optional<Timestamp> outcome_at) {
  DisclosureLedgerEntry e{std::move(bundle_id), sent_at, destination, outcome, outcome_at, std::nullopt};
  if (outcome_at) {
    if (*outcome_at < sent_at) throw InputError("outcome precedes sending for " + e.bundle_id);
    e.response_days = (*outcome_at - sent_at) / kSecondsPerDay;
  }
  return e;
}

void to_json(json& j, const DisclosureLedgerEntry& e) {
  j = json{{"bundle_id", e.bundle_id},
           {"sent_at", e.sent_at},
           {"destination", to_string(e.destination)},
           {"outcome", to_string(e.outcome)}};
  if (e.outcome_at) j["outcome_at"] = *e.outcome_at;
  if (e.response_days) j["response_days"] = *e.response_days;
}

void from_json(const json& j, DisclosureLedgerEntry& e) {
  e.bundle_id = j.at("bundle_id").get<std::string>();
  e.sent_at = j.at("sent_at").get<Timestamp>();
  auto dest = destination_from_string(j.at("destination").get<std::string>());
  if (!dest) throw InputError("unknown destination: " + j.at("destination").dump());
  e.destination = *dest;
  auto out = outcome_from_string(j.at("outcome").get<std::string>());
  if (!out) throw InputError("unknown outcome: " + j.at("outcome").dump());
  e.outcome = *out;
  e.outcome_at = j.contains("outcome_at") ? std::optional<Timestamp>(j["outcome_at"].get<Timestamp>()) : std::nullopt;
  e.response_days =
      j.contains("response_days") ? std::optional<std::int64_t>(j["response_days"].get<std::int64_t>()) : std::nullopt;
  if (e.outcome_at && e.response_days && *e.response_days != (*e.outcome_at - e.sent_at) / kSecondsPerDay) {
    throw InputError("response_days inconsistent with timestamps for " + e.bundle_id);
  }
}

std::vector<DisclosureLedgerEntry> read_ledger(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return {};
  return read_jsonl<DisclosureLedgerEntry>(path);
}

void append_ledger(const std::filesystem::path& path, const DisclosureLedgerEntry& entry) {
  static std::mutex mu;
  std::lock_guard lock(mu);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw EnvironmentError("cannot append to ledger " + path.string());
  out << dump_line(json(entry)) << '\n';
}

LedgerStats ledger_stats(const std::vector<DisclosureLedgerEntry>& entries) {
  LedgerStats s;
  s.total = entries.size();
  std::vector<double> all;
  std::map<std::string, std::vector<double>> by_dest;
  for (const auto& e : entries) {
    if (e.outcome == Outcome::Removed) ++s.removed;
    auto& bucket = by_dest[std::string(to_string(e.destination))];
    if (e.response_days) {
      all.push_back(static_cast<double>(*e.response_days));
      bucket.push_back(static_cast<double>(*e.response_days));
    }
  }
  if (s.total > 0) s.removal_rate = static_cast<double>(s.removed) / static_cast<double>(s.total);
  s.median_response_days = median(all);
  for (auto& [dest, days] : by_dest) s.median_response_days_by_destination[dest] = median(days);
  return s;
}

}  // namespace darkgram
