// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "mssp/mc.hpp"
#include "mssp/partitions.hpp"
#include "mssp/rng.hpp"

namespace mssp {

// Exchangeable partition families with closed-form probabilities.
struct DpFamily {
  double concentration = 1.0;
};

// Two-parameter family; discount = 0 reduces exactly to DpFamily.
struct PypFamily {
  double discount = 0.0;
  double concentration = 1.0;
};

// Symmetric Dirichlet-multinomial over a fixed number of categories; at most
// `categories` blocks can ever appear.
struct DmFamily {
  int categories = 1;
  double tau = 1.0;
};

// One-parameter family with gamma in (0, 1); the number of blocks stays
// bounded in distribution as n grows.
struct GnFamily {
  double gamma = 0.5;
};

// Weight sequences drawn by a user-supplied sampler; `draw` may return at
// most `truncation` weights (non-negative, summing to at most 1).
struct WeightSampler {
  std::function<std::vector<double>(Rng&)> draw;
  int truncation = 0;
};

// Family known only through samples of its weights; no closed-form
// probabilities are available.
struct EmpiricalWeightsFamily {
  WeightSampler weights;
};

using EppfFamily =
    std::variant<DpFamily, PypFamily, DmFamily, GnFamily, EmpiricalWeightsFamily>;

void validate(const EppfFamily& family);

// Predictive distribution of the next observation: probability of joining
// each existing block plus the probability of opening a new one.
struct PredictiveWeights {
  std::vector<double> existing;
  double new_mass = 1.0;

  double total() const;
};

// Log probability of an unordered partition with the given block sizes
// (composition in any order; possibly empty).  Returns -infinity for events
// of probability zero, e.g. more blocks than a DmFamily has categories.
double log_eppf(const EppfFamily& family, std::span<const int> sizes);
double log_eppf(const EppfFamily& family, std::initializer_list<int> sizes);

PredictiveWeights predictive(const EppfFamily& family, std::span<const int> sizes);
PredictiveWeights predictive(const EppfFamily& family, std::initializer_list<int> sizes);

// Same distribution computed as ratios of log_eppf values; agreement with
// predictive() is a test target.
PredictiveWeights predictive_from_ratios(const EppfFamily& family,
                                         std::span<const int> sizes);

// Sequential draw of a partition of [n] from the predictive rule.
SetPartition sample_partition(const EppfFamily& family, int n, Rng& rng);

struct StickWeights {
  std::vector<double> weights;
  double residual = 0.0;  // mass beyond the truncation level
};

// Number of equal pseudo-atoms a truncation residual is split into when a
// weight draw must cover its own tail (lets singleton blocks land on tail
// atoms, shrinking the truncation bias to the order of residual squared).
inline constexpr int kDustAtoms = 64;

// Stick-breaking weights with Beta(1 - discount, concentration + i * discount)
// sticks; discount = 0 gives the single-parameter special case.
StickWeights stick_breaking_weights(double discount, double concentration,
                                    int truncation, Rng& rng);

// Weight sampler matching a closed-form family (stick-breaking for Dp/Pyp,
// Dirichlet for Dm, mixture of Dirichlets for Gn).  The Gn draw caps the
// category count at `truncation` and renormalizes its tail mass.
WeightSampler weight_sampler(const EppfFamily& family, int truncation);

// Monte Carlo estimate of the partition probability from weight draws:
// mean over samples of the sum over distinct atom tuples of the weight
// products prescribed by `sizes`.
McEstimate eppf_mc_from_weights(const WeightSampler& sampler,
                                std::span<const int> sizes, int num_samples,
                                Rng& rng);

// Shared-draw variant: one weight draw feeds every composition, so the
// estimates are correlated but each is unbiased.
std::vector<McEstimate> eppf_mc_from_weights_batch(
    const WeightSampler& sampler, const std::vector<std::vector<int>>& sizes_list,
    int num_samples, Rng& rng);

// Sum over tuples (h_1, ..., h_D) of pairwise-distinct atom indices of
// prod_d x[d][h_d], computed via the partition identity over column products
// instead of the D-fold loop.  All rows must have equal length.
double distinct_tuple_sum(const std::vector<std::vector<double>>& x);

}  // namespace mssp
