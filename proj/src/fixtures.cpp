#include "darkgram/fixtures.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <sstream>

#include "darkgram/analytics.hpp"
#include "darkgram/config.hpp"
#include "darkgram/errors.hpp"
#include "darkgram/serialize.hpp"
#include "darkgram/text.hpp"

namespace darkgram::fixtures {

namespace {

using Vocab = std::vector<std::string_view>;

const std::map<std::string_view, Vocab>& vocab() {
  static const std::map<std::string_view, Vocab> v{
      {"service", {"netflix", "spotify", "hotmail", "gmail", "yahoo", "outlook", "disney+", "hbo max",
                   "amazon prime", "paypal", "steam", "roblox", "crunchyroll", "nordvpn", "facebook",
                   "instagram", "uber", "deezer", "hulu", "origin"}},
      {"country", {"US", "UK", "DE", "FR", "IT", "ES", "BR", "IN", "CA", "AU", "NL", "MX", "TR", "PL"}},
      {"app", {"spotify", "canva", "picsart", "kinemaster", "capcut", "photoshop", "lightroom",
               "truecaller", "duolingo", "nova launcher", "filmora", "idm", "winrar", "avast",
               "malwarebytes", "minecraft", "office 2021", "vpn master", "remini", "inshot"}},
      {"tool", {"redline stealer", "raccoon stealer", "keylogger", "rat builder", "sms bomber",
                "otp bot", "config checker", "brute forcer", "crypter", "exploit kit", "openbullet",
                "silverbullet", "mail bomber", "botnet panel"}},
      {"bank", {"chase", "wells fargo", "barclays", "hsbc", "revolut", "cashapp", "venmo", "santander"}},
      {"movie", {"the last voyage", "night harbor", "iron tide", "shadow protocol", "the quiet river",
                 "city of glass", "midnight run", "red horizon", "frozen kingdom", "lost signal",
                 "paper moon", "glass empire"}},
      {"show", {"crown and blood", "the agency", "dark waters", "neon streets", "silent valley",
                "the long road", "harbor lights", "empire of sand"}},
      {"year", {"2019", "2020", "2021", "2022", "2023", "2024"}},
      {"res", {"480p", "720p", "1080p", "2160p", "4k"}},
      {"platform", {"instagram", "tiktok", "youtube", "twitter", "facebook", "telegram", "twitch"}},
      {"metric", {"followers", "likes", "views", "subscribers", "comments", "members", "plays"}},
      {"company", {"apple", "google", "samsung", "microsoft", "nasa", "tesla", "sony", "nokia"}},
      {"product", {"phone", "laptop", "smartwatch", "tablet", "rocket", "headset", "camera"}},
      {"team", {"real madrid", "arsenal", "lakers", "juventus", "celtics", "bayern", "chelsea"}},
      {"dish", {"pasta", "lentil soup", "banana bread", "fried rice", "pancakes", "curry"}},
      {"ingredient", {"garlic", "spinach", "lemon", "ginger", "honey", "basil"}},
      {"day", {"monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"}},
      {"coin", {"bitcoin", "ethereum", "solana", "cardano"}},
      {"city", {"berlin", "lagos", "jakarta", "lima", "toronto", "osaka", "madrid"}},
      {"book", {"atomic habits", "deep work", "the alchemist", "sapiens", "clean code"}},
      {"topic", {"gardening", "astronomy", "photography", "history", "chess", "cooking"}},
  };
  return v;
}

// A leading '~' marks templates that borrow vocabulary from other labels.
const std::array<std::vector<std::string_view>, kLabelCount>& templates() {
  static const std::array<std::vector<std::string_view>, kLabelCount> t{{
      // Benign
      {"good morning everyone, the weather in {city} is sunny today",
       "tech news: {company} announces a new {product} for next year",
       "tip of the day: back up your {product} regularly",
       "football results: {team} won {n} to {m} last night",
       "recipe of the week: {dish} with {ingredient}",
       "our community meetup is on {day} in {city}, everyone welcome",
       "{coin} market update: price moved {n} percent this week",
       "weekly newsletter: the best {topic} stories from our readers",
       "reminder: the {topic} club meets every {day} evening",
       "photo of the day from {city}, thanks for sharing",
       "{company} stock closed higher after earnings call",
       "book club: this month we read {book}",
       "~how to protect your {service} account with two factor authentication",
       "~review: {movie} is worth watching in theaters",
       "~{app} released an official update with new features, get it from the store",
       "~be careful with scam messages asking for your {service} password",
       "~the official {platform} page of our club reached {n} thousand followers, thank you"},
      // CredentialCompromise
      {"{count} {service} account credentials, file attached",
       "fresh {service} combo list {count} lines mail:pass",
       "{service} logins leaked today, {count} hits with valid mail access",
       "private combolist {country} {service} user:pass",
       "{count} {service} accounts ulp dump, checked by bot",
       "HQ combo {country} {count} email:pass for {service}",
       "valid {service} premium accounts with capture, {count} hits",
       "database leak {country} {count} lines with emails and passwords",
       "~fresh {service} session cookies, import to browser and bypass login",
       "~{service} logs from stealer, {count} accounts, free download"},
      // PiratedSoftware
      {"{app} premium mod apk v{ver} unlocked",
       "{app} cracked full version for windows, activation key included",
       "{app} pro {ver} patch, no ads, all features unlocked",
       "{app} mod menu unlimited coins apk",
       "{app} v{ver} crack + keygen, portable edition",
       "license key generator for {app}, lifetime activation",
       "{app} gold mod apk latest version, premium unlocked",
       "~download {app} premium free, no root required"},
      // BlackhatResources
      {"new {tool} for carding, method {year} working",
       "phishing kit for {service} scam page with admin panel",
       "{tool} source code, fud builder",
       "ddos script and botnet panel tutorial",
       "cashout method with {bank} bin list",
       "{tool} bypass antivirus, undetected, lifetime license",
       "carding tutorial {year}: {bank} method with fresh bins",
       "spoofing and otp bypass guide for {bank} accounts",
       "~{tool} free download, cracked by our team"},
      // PiratedMedia
      {"{movie} {year} {res} full movie download",
       "watch {show} season {n} episode {m} in hd",
       "{movie} web-dl x264 {res} hindi dubbed",
       "new {show} episodes uploaded, all seasons {res}",
       "ebook {book} pdf free",
       "{movie} {year} bluray {res} dual audio",
       "{show} s0{n}e0{m} {res} web-rip",
       "~{movie} is streaming now, link in channel"},
      // SocialMediaManipulation
      {"buy {count} {platform} {metric} cheap, instant delivery",
       "smm panel: {platform} {metric}, likes and comments, best price",
       "youtube subscribers and watch time for monetization",
       "real {platform} {metric} {count} for ${price}",
       "boost your telegram channel members, non drop",
       "{platform} {metric} refill guarantee, cheapest smm panel",
       "grow your {platform} with {count} organic {metric} in 24 hours",
       "~{platform} verification badge service, contact admin"},
  }};
  return t;
}

// Shared by every label, so a few items stay ambiguous whatever the model.
const std::array<std::string_view, 8> kGeneric = {
    "new post, check it out", "admin is back, stay tuned", "link in the pinned message",
    "thanks for 10k members", "daily drop is live", "dm for details", "read the rules before asking",
    "channel backup coming soon"};

const std::array<std::string_view, 6> kPrefixes = {"", "", "", "new: ", "update: ", "🔥 "};
const std::array<std::string_view, 6> kSuffixes = {"", "", "", " share with friends", " more in channel",
                                                  " join now"};

std::string format_count(std::size_t style, std::int64_t n) {
  if (style == 0) {
    std::string s = std::to_string(n), out;
    int k = 0;
    for (auto it = s.rbegin(); it != s.rend(); ++it, ++k) {
      if (k && k % 3 == 0) out.push_back(',');
      out.push_back(*it);
    }
    return {out.rbegin(), out.rend()};
  }
  if (style == 1 && n >= 1000) return std::to_string(n / 1000) + "k";
  return std::to_string(n);
}

std::string digest_for(std::string_view name) {
  std::string out;
  for (std::uint64_t salt = 1; salt <= 4; ++salt) out += hex64(fnv1a64(name, 0xcbf29ce484222325ULL ^ salt));
  return out;
}

json entry_json(Timestamp t, std::string_view type) { return json{{"t", t}, {"type", type}}; }

}  // namespace

PostDraft TextFactory::post(const Label& label, bool clear) {
  if (!clear && uniform(25) == 0) return PostDraft{std::string(kGeneric[uniform(kGeneric.size())]), {}};
  const auto& pool = templates()[label.index()];
  std::string_view tmpl;
  do {
    tmpl = pool[uniform(pool.size())];
  } while (clear && tmpl.front() == '~');
  if (tmpl.front() == '~') tmpl.remove_prefix(1);

  std::map<std::string, std::string> chosen;  // one value per slot per post
  auto slot = [&](const std::string& key) -> std::string {
    if (auto it = chosen.find(key); it != chosen.end()) return it->second;
    std::string value;
    if (key == "count") {
      static constexpr std::array<std::int64_t, 8> kBases = {500, 1200, 5000, 11000, 25000, 50000, 120000, 300000};
      value = format_count(uniform(3), kBases[uniform(kBases.size())] + 100 * static_cast<std::int64_t>(uniform(10)));
    } else if (key == "n" || key == "m") {
      value = std::to_string(1 + uniform(9));
    } else if (key == "price") {
      value = std::to_string(1 + uniform(99));
    } else if (key == "ver") {
      value = std::to_string(1 + uniform(19)) + "." + std::to_string(uniform(10)) + "." + std::to_string(uniform(10));
    } else {
      const auto& words = vocab().at(key);
      value = std::string(words[uniform(words.size())]);
    }
    return chosen[key] = value;
  };

  std::string body;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i);
      body += slot(std::string(tmpl.substr(i + 1, close - i - 1)));
      i = close;
    } else {
      body.push_back(tmpl[i]);
    }
  }

  PostDraft d;
  // Bare files: some CA posts are only an attachment with a telling name.
  if (!label.is_benign() && uniform(8) == 0) {
    auto name_of = [&](std::string s) {
      std::replace(s.begin(), s.end(), ' ', '_');
      return s;
    };
    AttachmentMeta a;
    a.size_bytes = 1024 * static_cast<std::int64_t>(1 + uniform(4096));
    switch (*label.category) {
      case CacCategory::CredentialCompromise:
        a.filename = name_of(slot("service")) + "_" + slot("country") + "_" + std::to_string(1000 * (1 + uniform(90))) + ".txt";
        a.kind = AttachmentKind::Document;
        break;
      case CacCategory::PiratedSoftware:
        a.filename = name_of(slot("app")) + "_v" + slot("ver") + "_premium_mod.apk";
        a.kind = AttachmentKind::Executable;
        a.content_digest = digest_for(a.filename);
        break;
      case CacCategory::BlackhatResources:
        a.filename = name_of(slot("tool")) + "_builder.zip";
        a.kind = AttachmentKind::Archive;
        break;
      case CacCategory::PiratedMedia:
        a.filename = name_of(slot("movie")) + "." + slot("year") + "." + slot("res") + ".web-dl.mkv";
        a.kind = AttachmentKind::Media;
        break;
      case CacCategory::SocialMediaManipulation:
        a.filename = "smm_panel_" + slot("platform") + "_price_list.pdf";
        a.kind = AttachmentKind::Document;
        break;
    }
    d.attachments.push_back(std::move(a));
    if (uniform(2) == 0) return d;  // no caption at all
  }
  d.text = std::string(kPrefixes[uniform(kPrefixes.size())]) + body +
           std::string(kSuffixes[uniform(kSuffixes.size())]);
  return d;
}

LabeledCorpus generate_corpus(std::size_t per_class, std::uint64_t seed) {
  TextFactory f(seed);
  LabeledCorpus c;
  c.items.reserve(per_class * kLabelCount);
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t l = 0; l < kLabelCount; ++l) {
      auto label = label_from_index(l);
      auto d = f.post(label);
      LabeledItem item{std::move(d.text), {}, label};
      for (const auto& a : d.attachments) item.filenames.push_back(a.filename);
      c.items.push_back(std::move(item));
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Replay scripts

ReplaySource::Entry channel_entry(Timestamp t, const ChannelRecord& c) {
  auto j = entry_json(t, "channel");
  j["channel"] = c;
  return {t, "channel", std::move(j)};
}

ReplaySource::Entry post_entry(Timestamp t, const PostRecord& p) {
  auto j = entry_json(t, "post");
  j["post"] = p;
  return {t, "post", std::move(j)};
}

ReplaySource::Entry subscribers_entry(Timestamp t, const std::string& channel_id, std::int64_t subs) {
  auto j = entry_json(t, "subscribers");
  j["channel_id"] = channel_id;
  j["subscribers"] = subs;
  return {t, "subscribers", std::move(j)};
}

ReplaySource::Entry delete_channel_entry(Timestamp t, const std::string& channel_id) {
  auto j = entry_json(t, "delete_channel");
  j["channel_id"] = channel_id;
  return {t, "delete_channel", std::move(j)};
}

std::string script_to_jsonl(const std::vector<ReplaySource::Entry>& script) {
  std::vector<const ReplaySource::Entry*> order;
  for (const auto& e : script) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->t < b->t; });
  std::string out;
  for (const auto* e : order) out += dump_line(e->payload) + "\n";
  return out;
}

namespace {

const std::array<std::string_view, 12> kNameHeads = {"leak", "combo", "mod", "crack", "cine", "boost",
                                                     "smm", "free", "vip", "dark", "prime", "ultra"};
const std::array<std::string_view, 8> kNameTails = {"hub", "zone", "world", "store", "vault", "club", "base", "box"};

std::string channel_name(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%03zu", i);
  return std::string(kNameHeads[i % kNameHeads.size()]) +
         std::string(kNameTails[(i / kNameHeads.size()) % kNameTails.size()]) + buf;
}

// Mixed case in links; discovery lowercases handles.
std::string display_handle(const std::string& id, std::size_t i) {
  if (i % 3 != 0) return id;
  auto s = id;
  s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

CacCategory category_at(std::size_t i) { return kAllCategories[i % kAllCategories.size()]; }

struct ChannelPlan {
  std::string id;
  std::string title;
  std::vector<bool> ca;  // oldest first
  CacCategory category = CacCategory::CredentialCompromise;
  std::vector<std::string> extra_links;  // appended to some posts as t.me links
};

// Posts `spacing` apart, the newest one hour before `end`.
void emit_channel(std::vector<ReplaySource::Entry>& script, TextFactory& f, const ChannelPlan& plan,
                  Timestamp end, std::int64_t first_post_id = 1, Timestamp created_at = 0,
                  bool with_record = true, Timestamp spacing = 6 * 3600) {
  if (with_record) {
    ChannelRecord c;
    c.channel_id = plan.id;
    c.title = plan.title;
    c.description = "channel " + plan.title;
    c.created_at = created_at ? created_at : end - 400 * kSecondsPerDay;
    c.replies_enabled = false;
    // The source learns of the channel shortly before its first post.
    const Timestamp first_post = end - kSecondsPerDay / 24 - static_cast<Timestamp>(plan.ca.size()) * spacing;
    script.push_back(channel_entry(std::max(c.created_at, first_post - 3600), c));
  }
  const auto n = plan.ca.size();
  for (std::size_t j = 0; j < n; ++j) {
    PostRecord p;
    p.channel_id = plan.id;
    p.post_id = first_post_id + static_cast<std::int64_t>(j);
    p.posted_at = end - kSecondsPerDay / 24 - static_cast<Timestamp>(n - 1 - j) * spacing;
    Label label;
    if (plan.ca[j]) label = Label{f.uniform(4) == 0 ? category_at(f.uniform(5)) : plan.category};
    auto d = f.post(label, true);
    p.text = std::move(d.text);
    p.attachments = std::move(d.attachments);
    // Links go round-robin onto every other post.
    const std::size_t slots = (n + 1) / 2;
    for (std::size_t k = j / 2; j % 2 == 0 && k < plan.extra_links.size(); k += slots) {
      const auto& link = plan.extra_links[k];
      p.text += (p.text.empty() ? "" : " ") + std::string("https://t.me/") + link;
      p.links.push_back("https://t.me/" + link);
    }
    p.views = 100 + static_cast<std::int64_t>(f.uniform(5000));
    script.push_back(post_entry(p.posted_at, p));
  }
}

std::vector<bool> planted_flags(TextFactory& f, std::size_t total, std::size_t window, std::size_t ca_in_window,
                                bool older_ca) {
  std::vector<bool> newest(window, false);
  std::fill(newest.begin(), newest.begin() + static_cast<std::ptrdiff_t>(ca_in_window), true);
  std::shuffle(newest.begin(), newest.end(), f.rng());
  std::vector<bool> flags(total - window, older_ca);
  flags.insert(flags.end(), newest.begin(), newest.end());
  return flags;
}

}  // namespace

DiscoveryFixture frontier_fixture(std::uint64_t seed, std::size_t seeds, std::size_t candidates,
                                  std::size_t malicious) {
  if (malicious > candidates || seeds == 0) throw InputError("frontier fixture: bad shape");
  const PipelineConfig cfg;
  const auto window = static_cast<std::size_t>(cfg.channel_eval_posts);
  const auto threshold = static_cast<std::size_t>(cfg.channel_flag_threshold);
  TextFactory f(seed);
  DiscoveryFixture fx;
  fx.start = fx.horizon = kEpoch;

  std::vector<std::string> ids;
  for (std::size_t i = 0; i < candidates; ++i) ids.push_back(channel_name(i));
  std::vector<std::size_t> order(candidates);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), f.rng());
  std::set<std::size_t> bad(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(malicious));

  for (std::size_t s = 0; s < seeds; ++s) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "linkhub_%03zu", s);
    fx.seeds.emplace_back(buf);
  }

  // Every candidate linked from one seed, about a third from a second one.
  std::vector<std::vector<std::string>> seed_links(seeds);
  for (std::size_t i = 0; i < candidates; ++i) {
    seed_links[i % seeds].push_back(display_handle(ids[i], i));
    if (i % 3 == 1) seed_links[(i * 7 + 3) % seeds].push_back(display_handle(ids[i], i + 1));
  }
  for (std::size_t s = 0; s < seeds; ++s) {
    ChannelPlan plan{fx.seeds[s], "Link Hub " + std::to_string(s), std::vector<bool>(12, false),
                     CacCategory::PiratedMedia, seed_links[s]};
    emit_channel(fx.script, f, plan, fx.start);
  }

  std::size_t trap_no = 0;
  for (std::size_t i = 0; i < candidates; ++i) {
    ChannelPlan plan;
    plan.id = ids[i];
    plan.title = ids[i];
    plan.category = category_at(i);
    const std::size_t k = i;
    if (bad.contains(i)) {
      auto total = window + k % 5;
      auto in_window = threshold + k % (window - threshold + 1);
      plan.ca = planted_flags(f, total, window, in_window, false);
      // Back-links to hubs and to other candidates, plus a private invite.
      plan.extra_links = {fx.seeds[k % seeds], ids[(k * 11 + 5) % candidates], "+Inv" + std::to_string(k) + "Xq"};
      fx.planted_malicious.insert(ids[i]);
    } else {
      auto total = window + k % 4;
      auto in_window = k % threshold;  // 0 .. threshold-1
      plan.ca = planted_flags(f, total, window, in_window, true);
      // Links from unflagged channels must never be followed.
      std::string trap = "trapnode" + std::to_string(trap_no++);
      plan.extra_links = {trap};
      fx.unreachable.insert(trap);
      ChannelPlan t{trap, trap, std::vector<bool>(window, true), category_at(k), {}};
      emit_channel(fx.script, f, t, fx.start);
    }
    fx.candidates.insert(ids[i]);
    emit_channel(fx.script, f, plan, fx.start);
  }
  return fx;
}

DiscoveryFixture deferred_fixture(std::uint64_t seed, std::size_t sparse, std::size_t controls) {
  const PipelineConfig cfg;
  const auto window = static_cast<std::size_t>(cfg.channel_eval_posts);
  TextFactory f(seed);
  DiscoveryFixture fx;
  fx.start = kEpoch;
  fx.horizon = kEpoch + 35 * kSecondsPerDay;
  fx.seeds = {"sparsehub_000"};

  std::vector<std::string> links;
  for (std::size_t i = 0; i < sparse + controls; ++i) {
    links.push_back((i < sparse ? "newleaks" : "quietnews") + std::to_string(100 + i));
  }
  emit_channel(fx.script, f, ChannelPlan{fx.seeds[0], "Sparse Hub", std::vector<bool>(12, false),
                                         CacCategory::PiratedMedia, links},
               fx.start);

  // Most fill up within the first recheck interval, a few only later.
  static constexpr std::array<Timestamp, 7> kFillDays = {1, 2, 3, 4, 5, 9, 12};
  for (std::size_t i = 0; i < links.size(); ++i) {
    const bool bad = i < sparse;
    const std::size_t initial = 3 + i % (window - 3);  // 3 .. window-1
    const std::size_t later = window + 2 - initial;
    ChannelPlan early{links[i], links[i], std::vector<bool>(initial, bad), category_at(i), {}};
    emit_channel(fx.script, f, early, fx.start, 1, fx.start - 20 * kSecondsPerDay);
    ChannelPlan late{links[i], links[i], std::vector<bool>(later, bad), category_at(i), {}};
    emit_channel(fx.script, f, late, fx.start + kFillDays[i % kFillDays.size()] * kSecondsPerDay,
                 1 + static_cast<std::int64_t>(initial), 0, false, 2 * 3600);
    fx.candidates.insert(links[i]);
    if (bad) fx.planted_malicious.insert(links[i]);
  }
  return fx;
}

ExternalLinkFixture external_link_fixture(std::uint64_t seed, std::size_t groups, std::size_t links,
                                          std::size_t malicious, std::size_t malicious_groups,
                                          std::size_t benign_channels) {
  if (malicious_groups == 0 || malicious_groups > groups || links < malicious + (groups - malicious_groups) ||
      benign_channels == 0) {
    throw InputError("external link fixture: bad shape");
  }
  const PipelineConfig cfg;
  const auto window = static_cast<std::size_t>(cfg.channel_eval_posts);
  TextFactory f(seed);
  ExternalLinkFixture fx;
  fx.link_count = links;

  std::vector<std::string> group_ids;
  for (std::size_t g = 0; g < groups; ++g) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "group%04zu", g);
    group_ids.emplace_back(buf);
  }
  std::vector<std::vector<std::string>> urls(groups);

  for (std::size_t i = 0; i < malicious; ++i) {
    auto id = "shared" + channel_name(i);
    ChannelPlan plan{id, id, planted_flags(f, window, window, 5 + i % 6, false), category_at(i), {}};
    emit_channel(fx.script, f, plan, fx.start);
    urls[i % malicious_groups].push_back("https://t.me/" + display_handle(id, i));
    fx.planted_malicious.insert(id);
    fx.malicious_groups.insert(group_ids[i % malicious_groups]);
  }
  std::vector<std::string> benign;
  for (std::size_t i = 0; i < benign_channels; ++i) {
    auto id = "group" + channel_name(i) + "chat";
    ChannelPlan plan{id, id, planted_flags(f, window, window, i % 5, false), category_at(i), {}};
    emit_channel(fx.script, f, plan, fx.start);
    benign.push_back(id);
  }
  std::size_t slot = 0;
  auto next_benign = [&] {
    auto id = slot < benign.size() ? benign[slot] : benign[f.uniform(benign.size())];
    ++slot;
    return "https://t.me/" + id;
  };
  for (std::size_t g = malicious_groups; g < groups; ++g) urls[g].push_back(next_benign());
  for (std::size_t n = malicious + groups - malicious_groups; n < links; ++n) {
    urls[f.uniform(groups)].push_back(next_benign());
  }
  for (std::size_t g = 0; g < groups; ++g) fx.groups.emplace_back(group_ids[g], std::move(urls[g]));
  return fx;
}

// ---------------------------------------------------------------------------
// Scanner tables

ScannerFixture scanner_fixture(std::uint64_t seed, std::size_t n, std::size_t malicious) {
  if (malicious > n) throw InputError("scanner fixture: more malicious than urls");
  TextFactory f(seed);
  ScannerFixture fx;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), f.rng());
  std::set<std::size_t> bad(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(malicious));
  static constexpr std::array<std::string_view, 6> kHosts = {"files-mirror.example", "cdn.shortlnk.example",
                                                             "mega-drop.example", "apk-store.example",
                                                             "paste.example.org", "login-verify.example.net"};
  for (std::size_t i = 0; i < n; ++i) {
    auto url = "https://" + std::string(kHosts[i % kHosts.size()]) + "/d/" + hex64(fnv1a64(std::to_string(i), seed)).substr(0, 10);
    ReputationResponse r;
    r.engines_total = 70 + static_cast<std::int64_t>(f.uniform(20));
    bool phishing = false;
    if (bad.contains(i)) {
      if (f.uniform(3) == 0) {
        r.engine_hits = static_cast<std::int64_t>(f.uniform(2));
        phishing = true;
      } else {
        r.engine_hits = 2 + static_cast<std::int64_t>(f.uniform(8));
      }
      fx.planted_malicious.insert(url);
    } else {
      r.engine_hits = static_cast<std::int64_t>(f.uniform(2));
    }
    r.raw = json{{"scan_id", hex64(fnv1a64(url))}};
    fx.tables.reputation[url] = r;
    fx.tables.phishing[url] = phishing;
    fx.urls.push_back(url);
  }
  return fx;
}

json tables_to_json(const MockScannerServer::Tables& t) {
  json rep = json::object(), phish = json::object(), sand = json::object();
  for (const auto& [url, r] : t.reputation) {
    rep[url] = {{"engine_hits", r.engine_hits}, {"engines_total", r.engines_total}, {"raw", r.raw}};
  }
  for (const auto& [url, p] : t.phishing) phish[url] = p;
  for (const auto& [d, s] : t.sandbox) {
    sand[d] = {{"sandbox_detected", s.sandbox_detected}, {"av_hits", s.av_hits}, {"previously_seen", s.previously_seen}};
  }
  return {{"reputation", rep}, {"phishing", phish}, {"sandbox", sand}, {"default_engines_total", t.default_engines_total}};
}

MockScannerServer::Tables tables_from_json(const json& j) {
  MockScannerServer::Tables t;
  try {
    const json none = json::object();
    const json& rep = j.contains("reputation") ? j.at("reputation") : none;
    const json& phish = j.contains("phishing") ? j.at("phishing") : none;
    const json& sand = j.contains("sandbox") ? j.at("sandbox") : none;
    for (const auto& [url, r] : rep.items()) {
      t.reputation[url] = {r.at("engine_hits").get<std::int64_t>(), r.at("engines_total").get<std::int64_t>(),
                           r.value("raw", json(nullptr))};
    }
    for (const auto& [url, p] : phish.items()) t.phishing[url] = p.get<bool>();
    for (const auto& [d, s] : sand.items()) {
      t.sandbox[d] = {s.at("sandbox_detected").get<bool>(), s.at("av_hits").get<std::int64_t>(),
                      s.value("previously_seen", false)};
    }
    t.default_engines_total = j.value("default_engines_total", std::int64_t{80});
  } catch (const json::exception& e) {
    throw InputError(std::string("scanner tables: ") + e.what());
  }
  return t;
}

// ---------------------------------------------------------------------------
// End-to-end world

void write_pipeline_fixture(const std::filesystem::path& dir, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  TextFactory f(seed);
  const Timestamp t0 = kEpoch;
  const Timestamp days = 12;
  std::vector<ReplaySource::Entry> script;

  struct Monitored {
    std::string id;
    std::optional<CacCategory> category;
    bool replies = false;
    std::int64_t subs = 0;
    double daily_growth = 0.0;
  };
  const std::vector<Monitored> monitored = {
      {"combo_cloud", CacCategory::CredentialCompromise, false, 12000, 0.030},
      {"apk_heaven", CacCategory::PiratedSoftware, true, 48000, 0.012},
      {"tool_market", CacCategory::BlackhatResources, true, 5300, 0.041},
      {"cinema_drop", CacCategory::PiratedMedia, false, 91000, 0.008},
      {"smm_wholesale", CacCategory::SocialMediaManipulation, true, 7600, 0.025},
      {"mail_access_pro", CacCategory::CredentialCompromise, false, 15500, 0.018},
      {"daily_tech_news", std::nullopt, true, 30000, 0.004},
      {"city_events_daily", std::nullopt, false, 8200, 0.006},
  };
  const std::string migrated_from = "mail_access_pro";
  const std::string migrated_to = "mail_access_pro2";
  const Timestamp removal_at = t0 + 4 * kSecondsPerDay;

  static constexpr std::array<std::string_view, 8> kEmojis = {"👍", "🔥", "❤", "😂", "😮", "🙏", "👎", "🎉"};
  auto scan = scanner_fixture(seed ^ 0x5ca11ULL, 40, 12);
  std::vector<std::string> forum_urls;
  std::size_t url_no = 0;
  std::vector<std::string> channels_txt;

  // Ids grow with time, 100 apart, so other posts can slot in between.
  auto emit_posts = [&](const Monitored& m, Timestamp from, Timestamp to, std::int64_t first_id) {
    std::int64_t id = first_id;
    for (Timestamp t = from + 5 * 3600 + static_cast<Timestamp>(f.uniform(3600)); t < to;
         t += 20 * 3600 + static_cast<Timestamp>(f.uniform(8 * 3600))) {
      PostRecord p;
      p.channel_id = m.id;
      p.post_id = id;
      id += 100;
      p.posted_at = t;
      Label label{m.category};
      if (m.category && f.uniform(5) == 0) label = Label{};
      auto d = f.post(label, true);
      p.text = std::move(d.text);
      p.attachments = std::move(d.attachments);
      if (m.category && f.uniform(2) == 0) {
        const auto& url = scan.urls[url_no++ % scan.urls.size()];
        p.text += (p.text.empty() ? "" : " ") + url;
        p.links.push_back(url);
        if (f.uniform(3) == 0) forum_urls.push_back(url);
      }
      for (const auto& a : p.attachments) {
        if (a.content_digest) {
          scan.tables.sandbox[*a.content_digest] = {f.uniform(2) == 0, static_cast<std::int64_t>(f.uniform(4)), false};
        }
      }
      if (m.id == migrated_from && t < removal_at && t + 20 * 3600 >= removal_at - 24 * 3600) {
        p.text = "we are moving, join the new channel t.me/" + migrated_to + " before this one is banned";
        p.links = {"https://t.me/" + migrated_to};
        p.attachments.clear();
      }
      // Views and reactions grow over three refreshes.
      for (int step = 0; step < 3; ++step) {
        auto q = p;
        q.views = (step + 1) * (200 + static_cast<std::int64_t>(f.uniform(3000)));
        q.forwards = step * static_cast<std::int64_t>(f.uniform(80));
        for (std::size_t e = 0; e < 3; ++e) {
          auto em = std::string(kEmojis[f.uniform(e == 0 ? 2 : kEmojis.size())]);
          q.reactions[em] += (step + 1) * static_cast<std::int64_t>(1 + f.uniform(40));
        }
        if (m.replies) {
          for (std::size_t r = 0, n = f.uniform(4); r < n; ++r) q.replies.push_back(f.post(Label{}, true).text);
        }
        script.push_back(post_entry(t + step * 4 * 3600, q));
      }
    }
    return id;
  };

  for (const auto& m : monitored) {
    ChannelRecord c{m.id, m.id, "the " + m.id + " channel", t0 - 200 * kSecondsPerDay, m.replies, m.category,
                    SourceKind::Replay};
    script.push_back(channel_entry(t0 - 3600, c));
    channels_txt.push_back(m.id);
    const Timestamp stop = m.id == migrated_from ? removal_at : t0 + days * kSecondsPerDay;
    emit_posts(m, t0, stop, 100);
    double subs = static_cast<double>(m.subs);
    for (Timestamp t = t0 - 3600; t < stop; t += 6 * 3600) {
      script.push_back(subscribers_entry(t, m.id, static_cast<std::int64_t>(subs)));
      subs *= 1.0 + m.daily_growth / 4.0;
    }
  }
  script.push_back(delete_channel_entry(removal_at, migrated_from));
  {
    Monitored m{migrated_to, CacCategory::CredentialCompromise, false, 0, 0.0};
    ChannelRecord c{migrated_to, migrated_to, "backup of " + migrated_from, removal_at - kSecondsPerDay, false,
                    m.category, SourceKind::Replay};
    script.push_back(channel_entry(c.created_at, c));
    channels_txt.push_back(migrated_to);
    emit_posts(m, removal_at, t0 + days * kSecondsPerDay, 100);
    std::int64_t subs = 0;
    for (Timestamp t = removal_at - kSecondsPerDay; t < t0 + days * kSecondsPerDay; t += 6 * 3600) {
      script.push_back(subscribers_entry(t, migrated_to, subs));
      subs += 350 + static_cast<std::int64_t>(f.uniform(200));
    }
  }

  // Discovery targets linked from the monitored channels.
  std::vector<std::string> seeds;
  for (const auto& m : monitored) seeds.push_back(m.id);
  for (std::size_t i = 0; i < 6; ++i) {
    const bool bad = i < 4;
    ChannelPlan plan{"found" + channel_name(i), "found " + std::to_string(i),
                     planted_flags(f, 11, 10, bad ? 6 + i : i, false), category_at(i), {}};
    emit_channel(script, f, plan, t0 + 2 * kSecondsPerDay);
    PostRecord p;
    p.channel_id = monitored[i].id;
    p.post_id = 50;  // before the channel's first regular post
    p.posted_at = t0 + 3 * 3600 + static_cast<Timestamp>(i) * 600;
    p.text = "partner channel: t.me/" + plan.id;
    p.links = {"https://t.me/" + plan.id};
    p.views = 400;
    script.push_back(post_entry(p.posted_at, p));
  }

  // Catalog of pirated apps with prices in cents.
  std::string apps;
  static constexpr std::array<std::tuple<std::string_view, std::string_view, std::string_view, std::int64_t>, 10> kApps = {{
      {"spotify", "Music & Audio", "Freemium", 1099}, {"canva", "Graphics & Design", "Freemium", 1499},
      {"picsart", "Photography", "Freemium", 1300},   {"kinemaster", "Video Players & Editors", "Freemium", 699},
      {"capcut", "Video Players & Editors", "Freemium", 799}, {"photoshop", "Graphics & Design", "Premium", 2299},
      {"truecaller", "Communication", "Freemium", 449}, {"duolingo", "Education", "Freemium", 699},
      {"winrar", "Tools", "Premium", 2900},           {"nova launcher", "Personalization", "Premium", 499},
  }};
  for (const auto& [app, category, pricing, cents] : kApps) {
    apps += dump_line(json{{"app_id", app}, {"category", category}, {"pricing", pricing}, {"price_cents", cents}}) + "\n";
  }

  std::string forum;
  for (std::size_t i = 0; i < forum_urls.size(); ++i) {
    forum += "thread " + std::to_string(i) + ": mirror at " + forum_urls[i] + " works\n";
  }
  forum += "unrelated thread about https://www.example.com/news and https://blog.example.org/post\n";

  LabeledCorpus corpus = generate_corpus(300, seed ^ 0xc0ffeeULL);

  std::string seeds_txt, chans;
  for (const auto& s : seeds) seeds_txt += s + "\n";
  for (const auto& c : channels_txt) chans += c + "\n";

  PipelineConfig cfg;
  cfg.refresh_interval_s = 3600;

  write_text_file(dir / "replay.jsonl", script_to_jsonl(script));
  write_text_file(dir / "seeds.txt", seeds_txt);
  write_text_file(dir / "channels.txt", chans);
  write_labeled_corpus(dir / "corpus.jsonl", corpus);
  write_text_file(dir / "scanner.json", tables_to_json(scan.tables).dump(2) + "\n");
  write_text_file(dir / "apps.jsonl", apps);
  write_text_file(dir / "forum.txt", forum);
  write_text_file(dir / "darkgram.conf", "# end-to-end fixture\n" + config_to_text(cfg));
}

}  // namespace darkgram::fixtures
