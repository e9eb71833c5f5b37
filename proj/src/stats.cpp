#include "kge/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace kge {

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& diffs) {
  std::vector<double> d;
  for (double x : diffs) {
    if (x != 0.0) d.push_back(x);
  }
  const std::size_t n = d.size();
  if (n < 5) throw std::invalid_argument("wilcoxon: fewer than 5 nonzero differences (underpowered)");
  if (n > 25) throw std::invalid_argument("wilcoxon: more than 25 differences (use the normal approximation)");

  // Average ranks of |d|, doubled so ties stay integral.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::fabs(d[a]) < std::fabs(d[b]); });
  std::vector<std::int64_t> rank2(n, 0);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && std::fabs(d[order[j]]) == std::fabs(d[order[i]])) ++j;
    // positions i..j-1 share the average rank ((i+1) + ... + j) / (j - i)
    const std::int64_t doubled = static_cast<std::int64_t>(i + 1 + j);  // 2 * average rank
    for (std::size_t k = i; k < j; ++k) rank2[order[k]] = doubled;
    i = j;
  }

  std::int64_t w_plus2 = 0;
  std::int64_t total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += rank2[i];
    if (d[i] > 0.0) w_plus2 += rank2[i];
  }
  const std::int64_t w_minus2 = total2 - w_plus2;
  const std::int64_t w_obs2 = std::min(w_plus2, w_minus2);

  // Exact null distribution of W+ (doubled): subset-sum counts over the
  // doubled ranks. Equivalent to enumerating all 2^n sign assignments.
  std::vector<std::uint64_t> count(static_cast<std::size_t>(total2) + 1, 0);
  count[0] = 1;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::int64_t s = total2; s >= rank2[i]; --s)
      count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - rank2[i])];
  }

  std::uint64_t favorable = 0;
  for (std::int64_t s = 0; s <= total2; ++s) {
    if (s <= w_obs2 || s >= total2 - w_obs2) favorable += count[static_cast<std::size_t>(s)];
  }
  const double p = std::min(1.0, static_cast<double>(favorable) / std::ldexp(1.0, static_cast<int>(n)));

  WilcoxonResult result;
  result.w = static_cast<double>(w_obs2) / 2.0;
  result.p = p;
  result.n = n;
  return result;
}

ConfidenceInterval confidence_interval(const std::vector<double>& samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw std::invalid_argument("confidence_interval: need at least 2 samples");
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n));
  return {mean, 1.96 * sd / std::sqrt(static_cast<double>(n))};
}

}  // namespace kge
