#include "darkgram/domains.hpp"

#include <algorithm>
#include <cctype>
#include <vector>

#include "darkgram/ingest.hpp"
#include "darkgram/text.hpp"

namespace darkgram {

// Generated from data/public_suffix_list.dat at build time.
extern const char* const kPublicSuffixList;

namespace {

std::vector<std::string_view> labels_of(std::string_view host) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto dot = host.find('.', start);
    out.push_back(host.substr(start, dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return out;
}

std::string join_from(const std::vector<std::string_view>& labels, std::size_t from) {
  std::string out;
  for (std::size_t i = from; i < labels.size(); ++i) {
    if (!out.empty()) out += '.';
    out += labels[i];
  }
  return out;
}

bool is_ip_literal(std::string_view host) {
  if (host.find(':') != std::string_view::npos) return true;  // IPv6
  return !host.empty() && std::all_of(host.begin(), host.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c)) || c == '.';
  });
}

}  // namespace

PublicSuffixList PublicSuffixList::parse(std::string_view text) {
  PublicSuffixList psl;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    auto line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    // A rule is the first whitespace-delimited token of a line.
    auto toks = whitespace_split(line);
    if (toks.empty() || toks[0].starts_with("//")) continue;
    auto rule = to_lower(toks[0]);
    if (rule.starts_with("!")) {
      psl.exceptions_.insert(rule.substr(1));
    } else if (rule.starts_with("*.")) {
      psl.wildcards_.insert(rule.substr(2));
    } else {
      psl.rules_.insert(rule);
    }
  }
  return psl;
}

const PublicSuffixList& PublicSuffixList::bundled() {
  static const PublicSuffixList psl = parse(kPublicSuffixList);
  return psl;
}

std::optional<std::string> PublicSuffixList::public_suffix(std::string_view raw_host) const {
  std::string host = to_lower(raw_host);
  while (!host.empty() && host.back() == '.') host.pop_back();
  if (host.empty() || is_ip_literal(host)) return std::nullopt;
  const auto labels = labels_of(host);
  if (std::any_of(labels.begin(), labels.end(), [](auto l) { return l.empty(); })) return std::nullopt;

  // Walk from the longest candidate suffix to the shortest; the first match
  // is the longest rule. Exceptions beat everything.
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto candidate = join_from(labels, i);
    if (exceptions_.contains(candidate)) return join_from(labels, i + 1);
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto candidate = join_from(labels, i);
    if (rules_.contains(candidate)) return candidate;
    if (i + 1 < labels.size() && wildcards_.contains(join_from(labels, i + 1))) return candidate;
  }
  return std::string(labels.back());  // implicit "*" rule
}

std::optional<std::string> PublicSuffixList::registrable_domain(std::string_view raw_host) const {
  std::string host = to_lower(raw_host);
  while (!host.empty() && host.back() == '.') host.pop_back();
  if (host.empty()) return std::nullopt;
  if (is_ip_literal(host)) return host;
  auto suffix = public_suffix(host);
  if (!suffix || host.size() <= suffix->size()) return std::nullopt;
  const auto labels = labels_of(host);
  const auto suffix_labels = labels_of(*suffix).size();
  if (labels.size() <= suffix_labels) return std::nullopt;
  return join_from(labels, labels.size() - suffix_labels - 1);
}

std::optional<std::string> registrable_domain_of_url(std::string_view url, const PublicSuffixList& psl) {
  auto norm = normalize_url(url);
  if (!norm) return std::nullopt;
  return psl.registrable_domain(url_host(*norm));
}

}  // namespace darkgram
