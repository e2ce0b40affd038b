// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace mssp {

// Monte Carlo estimate with its standard error.
struct McEstimate {
  double value = 0.0;
  double se = 0.0;
};

// Running mean / standard error accumulator.
class McAccumulator {
 public:
  void add(double x) {
    ++count_;
    double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }
  std::size_t count() const { return count_; }
  double mean() const { return mean_; }
  double variance() const {
    return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0;
  }
  McEstimate estimate() const {
    double se = count_ > 1 ? std::sqrt(variance() / static_cast<double>(count_)) : 0.0;
    return {mean_, se};
  }

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

double log_sum_exp(std::span<const double> logs);

// Standard error of an empirical proportion p over n trials.
inline double proportion_se(double p, std::size_t n) {
  if (n == 0) return 0.0;
  return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(n));
}

// One-sided sign test: probability of at least `wins` successes in `trials`
// fair coin flips.  Ties must be dropped by the caller.
double sign_test_pvalue(int wins, int trials);

}  // namespace mssp
