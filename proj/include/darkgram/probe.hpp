#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "darkgram/payload.hpp"

namespace darkgram {

enum class ProbeStatus { DownloadObserved, Paywalled, Unreachable, NoDownload };
std::string_view to_string(ProbeStatus s);

struct LinkProbeResult {
  std::string url;
  ProbeStatus status = ProbeStatus::NoDownload;
  std::optional<std::string> page_title;
  std::optional<std::string> download_filename;  // present iff DownloadObserved

  friend bool operator==(const LinkProbeResult&, const LinkProbeResult&) = default;
};

/// A loaded page as the crawler sees it.
struct Page {
  int status = 200;
  std::string url;  // final URL after redirects
  std::string html;
};

/// What clicking an element produced.
struct ClickOutcome {
  enum class Kind { Download, Page, PaymentRequired, Nothing } kind = Kind::Nothing;
  std::optional<std::string> filename;  // for Download
  std::optional<Page> page;             // for Page
};

/// Page-interaction client. Implementations must abort a download once its
/// filename is known, before any body bytes are handed to storage; the
/// persistence hook exists so tests can prove it is never reached.
/// Network failures raise TransientError.
class PageClient {
 public:
  using PersistenceHook = std::function<void(std::string_view bytes)>;

  virtual ~PageClient() = default;
  virtual Page load(const std::string& url) = 0;
  virtual ClickOutcome click(const std::string& target_url) = 0;

  void set_persistence_hook(PersistenceHook hook) { hook_ = std::move(hook); }

 protected:
  PersistenceHook hook_;
};

/// HTTP(S) client. Redirects are followed. Downloads are recognised by a
/// Content-Disposition attachment or a non-HTML content type; the transfer is
/// cancelled as soon as the response headers arrive.
class HttpPageClient final : public PageClient {
 public:
  explicit HttpPageClient(std::chrono::milliseconds timeout = std::chrono::seconds(10));
  Page load(const std::string& url) override;
  ClickOutcome click(const std::string& target_url) override;

 private:
  std::chrono::milliseconds timeout_;
};

// HTML helpers, exposed for testing.
std::optional<std::string> html_title(std::string_view html);
std::string html_visible_text(std::string_view html);

struct Anchor {
  std::string href;  // resolved absolute URL
  std::string text;
  bool download_attr = false;
};
std::vector<Anchor> html_anchors(std::string_view html, std::string_view base_url);
std::string resolve_url(std::string_view base, std::string_view href);

/// Filename from a Content-Disposition header value.
std::optional<std::string> content_disposition_filename(std::string_view header);

/// Loads the page, records its title, and clicks up to `max_clicks`
/// download candidates (download attribute, file-like href, or "download"
/// in the anchor text). Paywall markers in the page or a 402 give Paywalled.
/// Never throws for network failures: they become Unreachable.
LinkProbeResult probe_external_link(const std::string& url, PageClient& client,
                                    const CueTable& cues = CueTable::defaults(),
                                    std::size_t max_clicks = 5);

/// Probes with at most `concurrency` requests in flight and at most one per
/// host at a time. Results are in input order.
std::vector<LinkProbeResult> probe_links(const std::vector<std::string>& urls,
                                         const std::function<std::unique_ptr<PageClient>()>& make_client,
                                         std::size_t concurrency = 4,
                                         const CueTable& cues = CueTable::defaults());

std::string probe_to_jsonl(const LinkProbeResult& r);

}  // namespace darkgram
