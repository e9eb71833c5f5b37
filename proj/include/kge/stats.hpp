#pragma once

#include <vector>

namespace kge {

struct WilcoxonResult {
  double w = 0.0;  // min(W+, W-); half-integral under rank ties
  double p = 0.0;  // exact two-sided p-value
  std::size_t n = 0;  // pairs remaining after zero removal
};

// Exact two-sided Wilcoxon signed-rank test over paired differences. Zero
// differences are dropped; ties in |diff| get average ranks. The p-value is
// computed from the exact null distribution of W+ over all 2^n sign
// assignments (p = P(W+ <= w or W+ >= T - w)). Requires 5 <= n <= 25, the
// regime where the exact distribution is both meaningful and cheap.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& diffs);

struct ConfidenceInterval {
  double mean = 0.0;
  double halfwidth = 0.0;
};

// mean +- 1.96 * s / sqrt(n), with s the standard deviation WITHOUT
// Bessel's correction (divide by n, not n-1). Requires n >= 2.
ConfidenceInterval confidence_interval(const std::vector<double>& samples);

}  // namespace kge
