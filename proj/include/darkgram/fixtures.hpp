#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "darkgram/classify.hpp"
#include "darkgram/ingest.hpp"
#include "darkgram/model.hpp"
#include "darkgram/scan.hpp"

// Synthetic data for tests, demos and the end-to-end replay run. Every
// generator is a pure function of its seed.
namespace darkgram::fixtures {

inline constexpr Timestamp kEpoch = 1704067200;  // 2024-01-01T00:00:00Z

struct PostDraft {
  std::string text;
  std::vector<AttachmentMeta> attachments;
};

/// Templated posts per label. `clear` restricts to templates without
/// cross-label vocabulary, for fixtures that need a near-certain gate.
class TextFactory {
 public:
  explicit TextFactory(std::uint64_t seed) : rng_(seed) {}
  PostDraft post(const Label& label, bool clear = false);
  std::size_t uniform(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// `per_class` items of each of the six labels, in label-interleaved order.
LabeledCorpus generate_corpus(std::size_t per_class, std::uint64_t seed);

ReplaySource::Entry channel_entry(Timestamp t, const ChannelRecord& c);
ReplaySource::Entry post_entry(Timestamp t, const PostRecord& p);
ReplaySource::Entry subscribers_entry(Timestamp t, const std::string& channel_id, std::int64_t subs);
ReplaySource::Entry delete_channel_entry(Timestamp t, const std::string& channel_id);
std::string script_to_jsonl(const std::vector<ReplaySource::Entry>& script);

struct DiscoveryFixture {
  std::vector<ReplaySource::Entry> script;
  std::vector<std::string> seeds;
  std::set<std::string> candidates;         // every channel discovery should reach
  std::set<std::string> planted_malicious;  // exactly these should be flagged
  std::set<std::string> unreachable;        // linked only from unflagged channels
  Timestamp start = kEpoch;
  Timestamp horizon = kEpoch;               // recheck until here
};

/// Seed hubs with benign posts linking to `candidates` channels; the first
/// `malicious` of them carry >= channel_flag_threshold CA posts among their
/// newest ten, the rest at most one below it (older CA posts are planted
/// beyond the window).
DiscoveryFixture frontier_fixture(std::uint64_t seed, std::size_t seeds = 339,
                                  std::size_t candidates = 245, std::size_t malicious = 127);

/// `sparse` CA channels start with fewer than ten posts and fill up later;
/// `controls` benign channels do the same with benign posts.
DiscoveryFixture deferred_fixture(std::uint64_t seed, std::size_t sparse = 19, std::size_t controls = 6);

struct ExternalLinkFixture {
  std::vector<ReplaySource::Entry> script;
  std::vector<std::pair<std::string, std::vector<std::string>>> groups;  // group -> urls
  std::set<std::string> planted_malicious;
  std::set<std::string> malicious_groups;
  std::size_t link_count = 0;
  Timestamp start = kEpoch;
};

ExternalLinkFixture external_link_fixture(std::uint64_t seed, std::size_t groups = 3002,
                                          std::size_t links = 4191, std::size_t malicious = 69,
                                          std::size_t malicious_groups = 14,
                                          std::size_t benign_channels = 531);

struct ScannerFixture {
  std::vector<std::string> urls;
  std::set<std::string> planted_malicious;
  MockScannerServer::Tables tables;
};

/// Malicious URLs get >= 2 engine hits or a phishing hit from the fallback.
ScannerFixture scanner_fixture(std::uint64_t seed, std::size_t urls = 1000, std::size_t malicious = 281);

nlohmann::json tables_to_json(const MockScannerServer::Tables& t);
MockScannerServer::Tables tables_from_json(const nlohmann::json& j);

/// A small monitored world for the end-to-end run. Writes replay.jsonl,
/// seeds.txt, channels.txt, corpus.jsonl, scanner.json, apps.jsonl,
/// forum.txt and darkgram.conf into `dir`.
void write_pipeline_fixture(const std::filesystem::path& dir, std::uint64_t seed);

}  // namespace darkgram::fixtures
