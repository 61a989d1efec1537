#pragma once

#include <optional>
#include <span>
#include <vector>

namespace darkgram {

/// Median with the two middle values averaged; none for an empty input.
std::optional<double> median(std::vector<double> values);
std::optional<double> mean(std::span<const double> values);

struct MannWhitneyResult {
  double u = 0.0;        // U statistic of the first sample
  double p_value = 1.0;  // two-sided
  bool exact = false;
};

/// Two-sided Mann-Whitney U test. With both samples of at most
/// `exact_limit` values the p-value is the exact permutation probability of
/// the rank sum (midranks, so ties are handled exactly). Larger samples use
/// the normal approximation with tie and continuity corrections.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                                 std::size_t exact_limit = 20);

}  // namespace darkgram
