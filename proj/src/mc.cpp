// Apache License, Version 2.0, refer to LICENSE.txt

#include "mssp/mc.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace mssp {

double log_sum_exp(std::span<const double> logs) {
  if (logs.empty()) return -std::numeric_limits<double>::infinity();
  double m = *std::max_element(logs.begin(), logs.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double v : logs) acc += std::exp(v - m);
  return m + std::log(acc);
}

double sign_test_pvalue(int wins, int trials) {
  if (trials < 0 || wins < 0 || wins > trials)
    throw std::invalid_argument("sign_test_pvalue: need 0 <= wins <= trials");
  if (trials == 0) return 1.0;
  // Sum of C(trials, k) / 2^trials for k >= wins, in log space for safety.
  std::vector<double> terms;
  for (int k = wins; k <= trials; ++k) {
    double lc = std::lgamma(trials + 1.0) - std::lgamma(k + 1.0) -
                std::lgamma(trials - k + 1.0);
    terms.push_back(lc - trials * std::log(2.0));
  }
  return std::min(1.0, std::exp(log_sum_exp(terms)));
}

}  // namespace mssp
