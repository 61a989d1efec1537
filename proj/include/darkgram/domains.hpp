#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>

namespace darkgram {

/// Public suffix rules (normal, wildcard, exception) in the standard list
/// format. Hosts are compared in ASCII lowercase; internationalized names
/// must already be in their punycode form to match IDN rules.
class PublicSuffixList {
 public:
  static PublicSuffixList parse(std::string_view text);
  /// The snapshot compiled into the library.
  static const PublicSuffixList& bundled();

  std::optional<std::string> public_suffix(std::string_view host) const;
  /// Public suffix plus one label. None when the host is itself a public
  /// suffix. IP literals are returned unchanged.
  std::optional<std::string> registrable_domain(std::string_view host) const;

  std::size_t rule_count() const { return rules_.size() + wildcards_.size() + exceptions_.size(); }

 private:
  std::unordered_set<std::string> rules_;
  std::unordered_set<std::string> wildcards_;   // "*.ck" stored as "ck"
  std::unordered_set<std::string> exceptions_;  // "!www.ck" stored as "www.ck"
};

/// Registrable domain of an http(s) URL, or none.
std::optional<std::string> registrable_domain_of_url(std::string_view url,
                                                     const PublicSuffixList& psl = PublicSuffixList::bundled());

}  // namespace darkgram
