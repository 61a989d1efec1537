#include "darkgram/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "darkgram/errors.hpp"

namespace darkgram {

std::optional<double> median(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

std::optional<double> mean(std::span<const double> values) {
  if (values.empty()) return std::nullopt;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

namespace {

// Doubled midranks keep tied ranks integral: a tie spanning ranks i..j gets
// i + j instead of (i + j) / 2.
std::vector<std::int64_t> doubled_ranks(const std::vector<double>& pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return pooled[x] < pooled[y]; });
  std::vector<std::int64_t> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const auto r = static_cast<std::int64_t>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                                 std::size_t exact_limit) {
  if (a.empty() || b.empty()) throw InputError("Mann-Whitney needs two non-empty samples");
  for (double v : a) {
    if (std::isnan(v)) throw InputError("Mann-Whitney: NaN in sample");
  }
  for (double v : b) {
    if (std::isnan(v)) throw InputError("Mann-Whitney: NaN in sample");
  }
  const std::size_t n1 = a.size(), n2 = b.size(), n = n1 + n2;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = doubled_ranks(pooled);

  std::int64_t r1 = 0;  // doubled rank sum of a
  for (std::size_t i = 0; i < n1; ++i) r1 += ranks[i];

  MannWhitneyResult res;
  res.u = static_cast<double>(r1) / 2.0 - static_cast<double>(n1 * (n1 + 1)) / 2.0;
  const auto expected = static_cast<std::int64_t>(n1 * (n + 1));  // doubled
  const std::int64_t observed_dev = std::llabs(r1 - expected);

  if (n1 <= exact_limit && n2 <= exact_limit) {
    // count[k][s]: subsets of size k with doubled rank sum s. Counts stay
    // below C(40, 20) < 2^53, so doubles hold them exactly.
    const auto max_sum = static_cast<std::size_t>(std::accumulate(ranks.begin(), ranks.end(), std::int64_t{0}));
    std::vector<std::vector<double>> count(n1 + 1, std::vector<double>(max_sum + 1, 0.0));
    count[0][0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<std::size_t>(ranks[i]);
      for (std::size_t k = std::min(i + 1, n1); k >= 1; --k) {
        for (std::size_t s = max_sum; s >= r; --s) {
          count[k][s] += count[k - 1][s - r];
          if (s == r) break;
        }
      }
    }
    double extreme = 0.0, total = 0.0;
    for (std::size_t s = 0; s <= max_sum; ++s) {
      const double c = count[n1][s];
      if (c == 0.0) continue;
      total += c;
      if (std::llabs(static_cast<std::int64_t>(s) - expected) >= observed_dev) extreme += c;
    }
    res.p_value = std::min(1.0, extreme / total);
    res.exact = true;
    return res;
  }

  // Normal approximation.
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double dn = static_cast<double>(n);
  const double mu = static_cast<double>(n1 * n2) / 2.0;
  const double var = static_cast<double>(n1 * n2) / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (var <= 0.0) {
    res.p_value = 1.0;
    return res;
  }
  const double z = std::max(0.0, std::fabs(res.u - mu) - 0.5) / std::sqrt(var);
  res.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return res;
}

}  // namespace darkgram
