#include "darkgram/probe.hpp"

#include <algorithm>
#include <cctype>
#include <condition_variable>
#include <map>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

#include <httplib.h>

#include "darkgram/errors.hpp"
#include "darkgram/ingest.hpp"
#include "darkgram/serialize.hpp"
#include "darkgram/text.hpp"

namespace darkgram {

std::string_view to_string(ProbeStatus s) {
  switch (s) {
    case ProbeStatus::DownloadObserved: return "DownloadObserved";
    case ProbeStatus::Paywalled: return "Paywalled";
    case ProbeStatus::Unreachable: return "Unreachable";
    case ProbeStatus::NoDownload: return "NoDownload";
  }
  return "NoDownload";
}

namespace {

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string path;    // path + query, at least "/"
};

UrlParts split_url(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw InputError("not an absolute URL: " + std::string(url));
  auto path_start = url.find_first_of("/?", scheme_end + 3);
  UrlParts p;
  p.origin = std::string(url.substr(0, path_start));
  p.path = path_start == std::string_view::npos ? "/" : std::string(url.substr(path_start));
  if (p.path.front() == '?') p.path = "/" + p.path;
  return p;
}

std::string decode_entities(std::string s) {
  static const std::pair<std::string_view, std::string_view> kEntities[] = {
      {"&amp;", "&"}, {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&#39;", "'"}, {"&nbsp;", " "}};
  for (const auto& [from, to] : kEntities) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
      s.replace(pos, from.size(), to);
      pos += to.size();
    }
  }
  return s;
}

std::string collapse_ws(std::string_view s) {
  std::string out;
  for (auto tok : whitespace_split(s)) {
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

bool is_html(const std::string& content_type) {
  auto ct = to_lower(content_type);
  return ct.empty() || ct.find("text/html") != std::string::npos ||
         ct.find("application/xhtml") != std::string::npos;
}

constexpr std::string_view kFileExtensions[] = {
    ".txt", ".csv", ".zip", ".rar", ".7z", ".tar", ".gz", ".sql", ".json", ".apk",
    ".exe", ".msi", ".pdf", ".xlsx", ".db", ".dat", ".log", ".bin", ".iso", ".dmg"};

bool file_like(std::string_view url) {
  auto path = url.substr(0, url.find_first_of("?#"));
  auto lower_path = to_lower(path);
  return std::any_of(std::begin(kFileExtensions), std::end(kFileExtensions),
                     [&](std::string_view ext) { return lower_path.ends_with(ext); });
}

bool has_paywall(const Page& page, const CueTable& cues) {
  if (page.status == 402) return true;
  return contains_any_cue(word_tokens(html_visible_text(page.html)), cues.paywall);
}

}  // namespace

// ---------------------------------------------------------------------------
// HTML helpers

std::optional<std::string> html_title(std::string_view html) {
  static const std::regex re("<title[^>]*>([\\s\\S]*?)</title>", std::regex::icase);
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(html.begin(), html.end(), m, re)) return std::nullopt;
  auto title = collapse_ws(decode_entities(m[1].str()));
  if (title.empty()) return std::nullopt;
  return title;
}

std::string html_visible_text(std::string_view html) {
  static const std::regex scripts("<(script|style)[^>]*>[\\s\\S]*?</\\1>", std::regex::icase);
  static const std::regex tags("<[^>]*>");
  std::string s = std::regex_replace(std::string(html), scripts, " ");
  s = std::regex_replace(s, tags, " ");
  return collapse_ws(decode_entities(s));
}

namespace {

// "/a/b/../c/./d" -> "/a/c/d"; the query, if any, is left alone.
std::string remove_dot_segments(const std::string& target) {
  const auto q = target.find_first_of("?#");
  const std::string path = target.substr(0, q);
  const std::string rest = q == std::string::npos ? "" : target.substr(q);
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i <= path.size()) {
    auto slash = path.find('/', i);
    if (slash == std::string::npos) slash = path.size();
    std::string seg = path.substr(i, slash - i);
    if (seg == "..") {
      if (out.size() > 1) out.pop_back();
    } else if (seg != ".") {
      out.push_back(std::move(seg));
    }
    i = slash + 1;
  }
  std::string joined;
  for (std::size_t k = 0; k < out.size(); ++k) joined += (k ? "/" : "") + out[k];
  // a trailing "." or ".." still names a directory
  if (path.ends_with("/.") || path.ends_with("/..")) joined += '/';
  if (joined.empty() || joined[0] != '/') joined.insert(joined.begin(), '/');
  return joined + rest;
}

}  // namespace

std::string resolve_url(std::string_view base, std::string_view href) {
  if (href.starts_with("http://") || href.starts_with("https://")) return std::string(href);
  auto scheme_end = base.find("://");
  if (scheme_end == std::string_view::npos) return std::string(href);
  if (href.starts_with("//")) return std::string(base.substr(0, scheme_end + 1)) + std::string(href);
  auto path_start = base.find('/', scheme_end + 3);
  std::string origin(base.substr(0, path_start));
  if (href.starts_with("/")) return origin + remove_dot_segments(std::string(href));
  std::string base_path = path_start == std::string_view::npos ? "/" : std::string(base.substr(path_start));
  base_path = base_path.substr(0, base_path.find_first_of("?#"));
  if (href.starts_with("?")) return origin + base_path + std::string(href);
  std::string dir = base_path.substr(0, base_path.rfind('/') + 1);
  return origin + remove_dot_segments(dir + std::string(href));
}

std::vector<Anchor> html_anchors(std::string_view html, std::string_view base_url) {
  static const std::regex anchor("<a\\b([^>]*)>([\\s\\S]*?)</a>", std::regex::icase);
  static const std::regex href_re("href\\s*=\\s*(\"([^\"]*)\"|'([^']*)'|([^\\s>]+))", std::regex::icase);
  static const std::regex download_re("(^|\\s)download(\\s|=|$)", std::regex::icase);
  std::vector<Anchor> out;
  std::string doc(html);
  for (auto it = std::sregex_iterator(doc.begin(), doc.end(), anchor); it != std::sregex_iterator(); ++it) {
    const std::string attrs = (*it)[1].str();
    std::smatch hm;
    if (!std::regex_search(attrs, hm, href_re)) continue;
    std::string href = hm[2].matched ? hm[2].str() : hm[3].matched ? hm[3].str() : hm[4].str();
    href = decode_entities(href);
    if (href.empty() || href.starts_with("#") || href.starts_with("javascript:") ||
        href.starts_with("mailto:")) {
      continue;
    }
    Anchor a;
    a.href = resolve_url(base_url, href);
    a.text = html_visible_text((*it)[2].str());
    a.download_attr = std::regex_search(attrs, download_re);
    out.push_back(std::move(a));
  }
  return out;
}

std::optional<std::string> content_disposition_filename(std::string_view header) {
  static const std::regex star("filename\\*\\s*=\\s*[^']*'[^']*'([^;]+)", std::regex::icase);
  static const std::regex plain("filename\\s*=\\s*(\"([^\"]*)\"|([^;]+))", std::regex::icase);
  std::string h(header);
  std::smatch m;
  std::string name;
  if (std::regex_search(h, m, star)) {
    name = m[1].str();
  } else if (std::regex_search(h, m, plain)) {
    name = m[2].matched ? m[2].str() : m[3].str();
  } else {
    return std::nullopt;
  }
  name = collapse_ws(name);
  // Strip any directory component a server might send.
  if (auto slash = name.find_last_of("/\\"); slash != std::string::npos) name = name.substr(slash + 1);
  if (name.empty()) return std::nullopt;
  return name;
}

// ---------------------------------------------------------------------------
// HttpPageClient

HttpPageClient::HttpPageClient(std::chrono::milliseconds timeout) : timeout_(timeout) {}

Page HttpPageClient::load(const std::string& url) {
  auto parts = split_url(url);
  httplib::Client cli(parts.origin);
  if (!cli.is_valid()) throw TransientError("unsupported URL: " + url);
  cli.set_follow_location(true);
  cli.set_connection_timeout(timeout_);
  cli.set_read_timeout(timeout_);
  auto res = cli.Get(parts.path);
  if (!res) throw TransientError("cannot load " + url + ": " + httplib::to_string(res.error()));
  Page page;
  page.status = res->status;
  page.url = res->location.empty() ? url : resolve_url(url, res->location);
  if (is_html(res->get_header_value("Content-Type"))) page.html = res->body;
  return page;
}

ClickOutcome HttpPageClient::click(const std::string& target_url) {
  auto parts = split_url(target_url);
  httplib::Client cli(parts.origin);
  if (!cli.is_valid()) throw TransientError("unsupported URL: " + target_url);
  cli.set_follow_location(true);
  cli.set_connection_timeout(timeout_);
  cli.set_read_timeout(timeout_);

  ClickOutcome outcome;
  int status = 0;
  std::string content_type;
  bool download = false;
  std::string body;
  auto res = cli.Get(
      parts.path, httplib::Headers{},
      [&](const httplib::Response& r) {
        status = r.status;
        content_type = r.get_header_value("Content-Type");
        const auto disposition = r.get_header_value("Content-Disposition");
        const bool attachment = to_lower(disposition).find("attachment") != std::string::npos;
        if (r.status >= 200 && r.status < 300 && (attachment || !is_html(content_type))) {
          download = true;
          outcome.kind = ClickOutcome::Kind::Download;
          outcome.filename = content_disposition_filename(disposition);
          if (!outcome.filename) {
            auto path = parts.path.substr(0, parts.path.find('?'));
            auto name = path.substr(path.rfind('/') + 1);
            if (!name.empty()) outcome.filename = name;
          }
          return false;  // cancel before the body is transferred
        }
        return true;
      },
      [&](const char* data, std::size_t len) {
        if (download) {
          if (hook_) hook_(std::string_view(data, len));
          return false;
        }
        body.append(data, len);
        return true;
      });
  if (download) return outcome;
  if (!res) throw TransientError("cannot open " + target_url + ": " + httplib::to_string(res.error()));
  if (status == 402) {
    outcome.kind = ClickOutcome::Kind::PaymentRequired;
    return outcome;
  }
  if (status >= 200 && status < 300) {
    outcome.kind = ClickOutcome::Kind::Page;
    outcome.page = Page{status, target_url, body};
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// Probing

LinkProbeResult probe_external_link(const std::string& url, PageClient& client, const CueTable& cues,
                                    std::size_t max_clicks) {
  LinkProbeResult result;
  result.url = url;
  if (!normalize_url(url)) {
    throw InputError("probe requires an http(s) URL: " + url);
  }
  Page page;
  try {
    page = client.load(url);
  } catch (const Error&) {
    result.status = ProbeStatus::Unreachable;
    return result;
  }
  result.page_title = html_title(page.html);
  if (page.status >= 400 && page.status != 402) {
    result.status = ProbeStatus::Unreachable;
    return result;
  }
  if (has_paywall(page, cues)) {
    result.status = ProbeStatus::Paywalled;
    return result;
  }

  static const std::vector<Cue> kDownloadCue{Cue{"download"}};
  std::vector<Anchor> candidates;
  for (auto& a : html_anchors(page.html, page.url.empty() ? url : page.url)) {
    const bool says_download = contains_any_cue(word_tokens(a.text), kDownloadCue);
    if (a.download_attr || file_like(a.href) || says_download) candidates.push_back(std::move(a));
  }
  // Explicit download markers first.
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Anchor& x, const Anchor& y) { return x.download_attr > y.download_attr; });

  bool paywall_seen = false;
  std::size_t clicks = 0;
  for (const auto& cand : candidates) {
    if (clicks++ >= max_clicks) break;
    ClickOutcome outcome;
    try {
      outcome = client.click(cand.href);
    } catch (const Error&) {
      continue;
    }
    switch (outcome.kind) {
      case ClickOutcome::Kind::Download:
        result.status = ProbeStatus::DownloadObserved;
        result.download_filename = outcome.filename.value_or("");
        return result;
      case ClickOutcome::Kind::PaymentRequired:
        paywall_seen = true;
        break;
      case ClickOutcome::Kind::Page:
        if (outcome.page && has_paywall(*outcome.page, cues)) paywall_seen = true;
        break;
      case ClickOutcome::Kind::Nothing:
        break;
    }
  }
  result.status = paywall_seen ? ProbeStatus::Paywalled : ProbeStatus::NoDownload;
  return result;
}

std::vector<LinkProbeResult> probe_links(const std::vector<std::string>& urls,
                                         const std::function<std::unique_ptr<PageClient>()>& make_client,
                                         std::size_t concurrency, const CueTable& cues) {
  std::vector<LinkProbeResult> results(urls.size());
  if (urls.empty()) return results;
  concurrency = std::max<std::size_t>(1, std::min(concurrency, urls.size()));

  std::mutex mu;
  std::condition_variable cv;
  std::set<std::string> busy_hosts;
  std::vector<bool> taken(urls.size(), false);
  std::size_t remaining = urls.size();

  auto worker = [&] {
    auto client = make_client();
    while (true) {
      std::size_t job = urls.size();
      std::string host;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] {
          if (remaining == 0) return true;
          for (std::size_t i = 0; i < urls.size(); ++i) {
            if (!taken[i] && !busy_hosts.contains(url_host(urls[i]))) return true;
          }
          return false;
        });
        if (remaining == 0) return;
        for (std::size_t i = 0; i < urls.size(); ++i) {
          if (taken[i]) continue;
          host = url_host(urls[i]);
          if (busy_hosts.contains(host)) continue;
          taken[i] = true;
          --remaining;
          busy_hosts.insert(host);
          job = i;
          break;
        }
      }
      LinkProbeResult r;
      try {
        r = probe_external_link(urls[job], *client, cues);
      } catch (const InputError&) {
        r.url = urls[job];
        r.status = ProbeStatus::Unreachable;
      }
      {
        std::lock_guard lock(mu);
        results[job] = std::move(r);
        busy_hosts.erase(host);
      }
      cv.notify_all();
    }
  };

  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < concurrency; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  return results;
}

std::string probe_to_jsonl(const LinkProbeResult& r) {
  json j{{"url", r.url}, {"status", to_string(r.status)}};
  if (r.page_title) j["page_title"] = *r.page_title;
  if (r.download_filename) j["download_filename"] = *r.download_filename;
  return dump_line(j) + "\n";
}

}  // namespace darkgram
