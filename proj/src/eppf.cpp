// Apache License, Version 2.0, refer to LICENSE.txt

#include "mssp/eppf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace mssp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_composition(std::span<const int> sizes) {
  for (int s : sizes)
    if (s < 1) throw std::invalid_argument("composition entries must be >= 1");
}

int sum_of(std::span<const int> sizes) {
  return std::accumulate(sizes.begin(), sizes.end(), 0);
}

// log of the partition probability for the two-parameter family; the
// single-parameter family is the discount = 0 special case and must go
// through this exact code path so the two agree bitwise.
double log_eppf_pyp(double discount, double concentration,
                    std::span<const int> sizes) {
  int n = sum_of(sizes);
  int blocks = static_cast<int>(sizes.size());
  if (n == 0) return 0.0;
  double lp = 0.0;
  for (int k = 1; k < blocks; ++k) lp += std::log(concentration + k * discount);
  lp += std::lgamma(concentration + 1.0) - std::lgamma(concentration + n);
  for (int s : sizes)
    lp += std::lgamma(s - discount) - std::lgamma(1.0 - discount);
  return lp;
}

double log_eppf_dm(int categories, double tau, std::span<const int> sizes) {
  int n = sum_of(sizes);
  int blocks = static_cast<int>(sizes.size());
  if (n == 0) return 0.0;
  if (blocks > categories) return kNegInf;
  double lp = std::lgamma(categories + 1.0) - std::lgamma(categories - blocks + 1.0);
  lp += std::lgamma(tau * categories) - std::lgamma(n + tau * categories);
  lp -= blocks * std::lgamma(tau);
  for (int s : sizes) lp += std::lgamma(s + tau);
  return lp;
}

// Evaluated as the log product of sequential predictive probabilities along
// a block-major insertion order; the result is insertion-order invariant.
double log_eppf_gn(double gamma, std::span<const int> sizes) {
  double lp = 0.0;
  int n = 0;
  int blocks = 0;
  for (int target : sizes) {
    if (n == 0) {
      // First observation opens the first block with probability one.
    } else {
      double kk = static_cast<double>(blocks);
      lp += std::log(kk * kk - kk * gamma) - std::log(n * (n + gamma));
    }
    ++blocks;
    ++n;
    for (int size = 1; size < target; ++size) {
      lp += std::log((size + 1.0) * (n - blocks + gamma)) -
            std::log(n * (n + gamma));
      ++n;
    }
  }
  return lp;
}

PredictiveWeights predictive_pyp(double discount, double concentration,
                                 std::span<const int> sizes) {
  PredictiveWeights w;
  int n = sum_of(sizes);
  if (n == 0) return w;
  int blocks = static_cast<int>(sizes.size());
  double denom = concentration + n;
  w.existing.reserve(sizes.size());
  for (int s : sizes) w.existing.push_back((s - discount) / denom);
  w.new_mass = (concentration + discount * blocks) / denom;
  return w;
}

PredictiveWeights predictive_dm(int categories, double tau,
                                std::span<const int> sizes) {
  PredictiveWeights w;
  int n = sum_of(sizes);
  if (n == 0) return w;
  int blocks = static_cast<int>(sizes.size());
  if (blocks > categories)
    throw std::invalid_argument("predictive: composition has more blocks than categories");
  double denom = tau * categories + n;
  for (int s : sizes) w.existing.push_back((s + tau) / denom);
  w.new_mass = tau * (categories - blocks) / denom;
  return w;
}

PredictiveWeights predictive_gn(double gamma, std::span<const int> sizes) {
  PredictiveWeights w;
  int n = sum_of(sizes);
  if (n == 0) return w;
  double blocks = static_cast<double>(sizes.size());
  double denom = n * (n + gamma);
  for (int s : sizes) w.existing.push_back((s + 1.0) * (n - blocks + gamma) / denom);
  w.new_mass = (blocks * blocks - blocks * gamma) / denom;
  return w;
}

}  // namespace

void validate(const EppfFamily& family) {
  std::visit(
      [](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, DpFamily>) {
          if (!(f.concentration > 0.0))
            throw std::invalid_argument("DpFamily: concentration must be > 0");
        } else if constexpr (std::is_same_v<F, PypFamily>) {
          if (!(f.discount >= 0.0 && f.discount < 1.0))
            throw std::invalid_argument("PypFamily: discount must be in [0, 1)");
          if (!(f.concentration > -f.discount))
            throw std::invalid_argument("PypFamily: concentration must exceed -discount");
        } else if constexpr (std::is_same_v<F, DmFamily>) {
          if (f.categories < 1)
            throw std::invalid_argument("DmFamily: categories must be >= 1");
          if (!(f.tau > 0.0))
            throw std::invalid_argument("DmFamily: tau must be > 0");
        } else if constexpr (std::is_same_v<F, GnFamily>) {
          if (!(f.gamma > 0.0 && f.gamma < 1.0))
            throw std::invalid_argument("GnFamily: gamma must be in (0, 1)");
        } else {
          if (!f.weights.draw)
            throw std::invalid_argument("EmpiricalWeightsFamily: missing sampler");
          if (f.weights.truncation < 1)
            throw std::invalid_argument("EmpiricalWeightsFamily: truncation must be >= 1");
        }
      },
      family);
}

double PredictiveWeights::total() const {
  return std::accumulate(existing.begin(), existing.end(), new_mass);
}

double log_eppf(const EppfFamily& family, std::span<const int> sizes) {
  validate(family);
  check_composition(sizes);
  return std::visit(
      [&](const auto& f) -> double {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, DpFamily>)
          return log_eppf_pyp(0.0, f.concentration, sizes);
        else if constexpr (std::is_same_v<F, PypFamily>)
          return log_eppf_pyp(f.discount, f.concentration, sizes);
        else if constexpr (std::is_same_v<F, DmFamily>)
          return log_eppf_dm(f.categories, f.tau, sizes);
        else if constexpr (std::is_same_v<F, GnFamily>)
          return log_eppf_gn(f.gamma, sizes);
        else
          throw std::invalid_argument(
              "log_eppf: empirical-weights family has no closed form");
      },
      family);
}

double log_eppf(const EppfFamily& family, std::initializer_list<int> sizes) {
  return log_eppf(family, std::span<const int>(sizes.begin(), sizes.size()));
}

PredictiveWeights predictive(const EppfFamily& family, std::span<const int> sizes) {
  validate(family);
  check_composition(sizes);
  return std::visit(
      [&](const auto& f) -> PredictiveWeights {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, DpFamily>)
          return predictive_pyp(0.0, f.concentration, sizes);
        else if constexpr (std::is_same_v<F, PypFamily>)
          return predictive_pyp(f.discount, f.concentration, sizes);
        else if constexpr (std::is_same_v<F, DmFamily>)
          return predictive_dm(f.categories, f.tau, sizes);
        else if constexpr (std::is_same_v<F, GnFamily>)
          return predictive_gn(f.gamma, sizes);
        else
          throw std::invalid_argument(
              "predictive: empirical-weights family has no closed form");
      },
      family);
}

PredictiveWeights predictive(const EppfFamily& family,
                             std::initializer_list<int> sizes) {
  return predictive(family, std::span<const int>(sizes.begin(), sizes.size()));
}

PredictiveWeights predictive_from_ratios(const EppfFamily& family,
                                         std::span<const int> sizes) {
  double base = log_eppf(family, sizes);
  if (!std::isfinite(base))
    throw std::invalid_argument("predictive_from_ratios: base composition has probability zero");
  PredictiveWeights w;
  if (sizes.empty()) {
    w.new_mass = std::exp(log_eppf(family, {1}) - base);
    return w;
  }
  std::vector<int> grown(sizes.begin(), sizes.end());
  for (std::size_t k = 0; k < grown.size(); ++k) {
    ++grown[k];
    w.existing.push_back(std::exp(log_eppf(family, grown) - base));
    --grown[k];
  }
  grown.push_back(1);
  w.new_mass = std::exp(log_eppf(family, grown) - base);
  return w;
}

SetPartition sample_partition(const EppfFamily& family, int n, Rng& rng) {
  validate(family);
  if (n < 0) throw std::invalid_argument("sample_partition: n must be >= 0");
  if (const auto* ew = std::get_if<EmpiricalWeightsFamily>(&family)) {
    // Atom draws from one weight realization; residual mass yields fresh
    // atoms, each distinct.
    std::vector<double> w = ew->weights.draw(rng);
    double total = std::accumulate(w.begin(), w.end(), 0.0);
    double residual = std::max(0.0, 1.0 - total);
    std::vector<int> tags(n);
    int fresh = 0;
    std::vector<double> probs = w;
    probs.push_back(residual);
    for (int i = 0; i < n; ++i) {
      int h = draw_categorical(rng, probs);
      tags[i] = (h == static_cast<int>(w.size())) ? -(++fresh) : h;
    }
    return canonicalize(tags);
  }
  SetPartition p;
  for (int i = 0; i < n; ++i) {
    PredictiveWeights pw = predictive(family, p.block_sizes);
    std::vector<double> probs = pw.existing;
    probs.push_back(pw.new_mass);
    int pick = draw_categorical(rng, probs);
    if (pick == p.blocks()) {
      p.block_sizes.push_back(1);
      p.labels.push_back(p.blocks());
    } else {
      ++p.block_sizes[pick];
      p.labels.push_back(pick + 1);
    }
  }
  return p;
}

StickWeights stick_breaking_weights(double discount, double concentration,
                                    int truncation, Rng& rng) {
  if (!(discount >= 0.0 && discount < 1.0))
    throw std::invalid_argument("stick_breaking_weights: discount must be in [0, 1)");
  if (!(concentration > -discount))
    throw std::invalid_argument("stick_breaking_weights: concentration must exceed -discount");
  if (truncation < 1)
    throw std::invalid_argument("stick_breaking_weights: truncation must be >= 1");
  StickWeights out;
  out.weights.resize(truncation);
  double remaining = 1.0;
  for (int i = 0; i < truncation; ++i) {
    double v = draw_beta(rng, 1.0 - discount, concentration + (i + 1) * discount);
    out.weights[i] = v * remaining;
    remaining *= (1.0 - v);
  }
  out.residual = remaining;
  return out;
}

WeightSampler weight_sampler(const EppfFamily& family, int truncation) {
  validate(family);
  if (truncation < 1)
    throw std::invalid_argument("weight_sampler: truncation must be >= 1");
  return std::visit(
      [&](const auto& f) -> WeightSampler {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, DpFamily>) {
          double conc = f.concentration;
          return {[conc, truncation](Rng& rng) {
                    return stick_breaking_weights(0.0, conc, truncation, rng).weights;
                  },
                  truncation};
        } else if constexpr (std::is_same_v<F, PypFamily>) {
          double disc = f.discount, conc = f.concentration;
          return {[disc, conc, truncation](Rng& rng) {
                    return stick_breaking_weights(disc, conc, truncation, rng).weights;
                  },
                  truncation};
        } else if constexpr (std::is_same_v<F, DmFamily>) {
          int m = f.categories;
          double tau = f.tau;
          return {[m, tau](Rng& rng) { return draw_dirichlet(rng, tau, m); }, m};
        } else if constexpr (std::is_same_v<F, GnFamily>) {
          // Category count drawn from its heavy-tailed prior, capped at the
          // truncation level with the tail mass renormalized away.
          std::vector<double> pmf(truncation);
          double term = f.gamma;
          for (int m = 1; m <= truncation; ++m) {
            pmf[m - 1] = term;
            term *= (m - f.gamma) / (m + 1.0);
          }
          return {[pmf](Rng& rng) {
                    int m = draw_categorical(rng, pmf) + 1;
                    return draw_dirichlet(rng, 1.0, m);
                  },
                  truncation};
        } else {
          return f.weights;
        }
      },
      family);
}

double distinct_tuple_sum(const std::vector<std::vector<double>>& x) {
  if (x.empty()) return 1.0;
  int rows = static_cast<int>(x.size());
  std::size_t atoms = x[0].size();
  for (const auto& row : x)
    if (row.size() != atoms)
      throw std::invalid_argument("distinct_tuple_sum: rows must have equal length");
  if (rows > 12)
    throw std::invalid_argument("distinct_tuple_sum: too many tuple positions");
  // Sum over set partitions of the row indices with Moebius coefficient
  // prod_B (-1)^{|B|-1} (|B|-1)!, each block contributing the column-product
  // sum of its rows.
  std::map<std::uint32_t, double> block_cache;
  auto block_sum = [&](std::uint32_t mask) {
    auto it = block_cache.find(mask);
    if (it != block_cache.end()) return it->second;
    double s = 0.0;
    for (std::size_t h = 0; h < atoms; ++h) {
      double prod = 1.0;
      for (int d = 0; d < rows; ++d)
        if (mask & (1u << d)) prod *= x[d][h];
      s += prod;
    }
    block_cache.emplace(mask, s);
    return s;
  };
  double total = 0.0;
  for_each_partition(rows, [&](const SetPartition& p) {
    double term = 1.0;
    std::vector<std::uint32_t> masks(p.blocks(), 0);
    for (int d = 0; d < rows; ++d) masks[p.labels[d] - 1] |= (1u << d);
    for (int b = 0; b < p.blocks(); ++b) {
      int sz = p.block_sizes[b];
      double coeff = (sz % 2 == 0) ? -1.0 : 1.0;
      coeff *= std::tgamma(static_cast<double>(sz));  // (|B|-1)!
      term *= coeff * block_sum(masks[b]);
    }
    total += term;
  });
  return total;
}

std::vector<McEstimate> eppf_mc_from_weights_batch(
    const WeightSampler& sampler, const std::vector<std::vector<int>>& sizes_list,
    int num_samples, Rng& rng) {
  if (!sampler.draw)
    throw std::invalid_argument("eppf_mc_from_weights: missing sampler");
  if (num_samples < 1)
    throw std::invalid_argument("eppf_mc_from_weights: num_samples must be >= 1");
  int max_total = 0;
  // Precompute, per composition, the partitions of its block index set as
  // (coefficient, block sums) pairs; per weight draw only power sums remain.
  struct Term {
    double coeff;
    std::vector<int> block_sums;
  };
  std::vector<std::vector<Term>> terms(sizes_list.size());
  for (std::size_t c = 0; c < sizes_list.size(); ++c) {
    const auto& sizes = sizes_list[c];
    check_composition(sizes);
    int blocks = static_cast<int>(sizes.size());
    int total = sum_of(sizes);
    max_total = std::max(max_total, total);
    if (blocks == 0) continue;
    if (sampler.truncation < blocks)
      throw std::invalid_argument("eppf_mc_from_weights: truncation below block count");
    for_each_partition(blocks, [&](const SetPartition& p) {
      Term t;
      t.coeff = 1.0;
      t.block_sums.assign(p.blocks(), 0);
      for (int k = 0; k < blocks; ++k) t.block_sums[p.labels[k] - 1] += sizes[k];
      for (int sz : p.block_sizes) {
        double coeff = (sz % 2 == 0) ? -1.0 : 1.0;
        t.coeff *= coeff * std::tgamma(static_cast<double>(sz));
      }
      terms[c].push_back(std::move(t));
    });
  }
  std::vector<McAccumulator> acc(sizes_list.size());
  std::vector<double> power_sum(max_total + 1, 0.0);
  for (int s = 0; s < num_samples; ++s) {
    std::vector<double> w = sampler.draw(rng);
    if (static_cast<int>(w.size()) > sampler.truncation)
      throw std::runtime_error("eppf_mc_from_weights: draw exceeds declared truncation");
    double residual = 1.0 - std::accumulate(w.begin(), w.end(), 0.0);
    if (residual > 1e-12)
      w.insert(w.end(), kDustAtoms, residual / kDustAtoms);
    std::fill(power_sum.begin(), power_sum.end(), 0.0);
    for (double wh : w) {
      double pw = 1.0;
      for (int m = 1; m <= max_total; ++m) {
        pw *= wh;
        power_sum[m] += pw;
      }
    }
    for (std::size_t c = 0; c < sizes_list.size(); ++c) {
      if (sizes_list[c].empty()) {
        acc[c].add(1.0);
        continue;
      }
      double est = 0.0;
      for (const Term& t : terms[c]) {
        double prod = t.coeff;
        for (int m : t.block_sums) prod *= power_sum[m];
        est += prod;
      }
      acc[c].add(est);
    }
  }
  std::vector<McEstimate> out;
  out.reserve(acc.size());
  for (const auto& a : acc) out.push_back(a.estimate());
  return out;
}

McEstimate eppf_mc_from_weights(const WeightSampler& sampler,
                                std::span<const int> sizes, int num_samples,
                                Rng& rng) {
  std::vector<std::vector<int>> one{std::vector<int>(sizes.begin(), sizes.end())};
  return eppf_mc_from_weights_batch(sampler, one, num_samples, rng)[0];
}

}  // namespace mssp
