// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <vector>

#include "mssp/mc.hpp"
#include "mssp/mssp.hpp"
#include "mssp/partitions.hpp"
#include "mssp/rng.hpp"

namespace mssp {

// The six marginal samplers used by the discovery bandit: independent,
// additive, and hierarchical constructions with Dirichlet or Pitman-Yor
// components, each with random hyperparameters.
enum class StrategyFamily {
  kIndependentDp,
  kIndependentPy,
  kAdditiveDp,
  kAdditivePy,
  kHierarchicalDp,
  kHierarchicalPy,
};

struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;  // mean is shape / rate
};

struct BetaPrior {
  double a = 1.0;
  double b = 1.0;
};

// Spike-and-slab prior on a mix weight: point masses at 0 and 1 plus a
// uniform slab.
struct EpsilonPrior {
  double at_zero = 0.15;
  double at_one = 0.15;
  double slab = 0.7;
};

struct StrategyModel {
  StrategyFamily family = StrategyFamily::kIndependentDp;
  GammaPrior root_concentration;   // shared / root process (additive, hierarchical)
  GammaPrior group_concentration;  // per-group processes
  BetaPrior root_discount;         // Pitman-Yor variants only
  BetaPrior group_discount;
  EpsilonPrior mix;                // additive variants only
};

// Hyperprior constants for each strategy.
StrategyModel default_model(StrategyFamily family);

bool uses_discounts(StrategyFamily family);
bool is_additive(StrategyFamily family);
bool is_hierarchical(StrategyFamily family);
bool is_independent(StrategyFamily family);

struct Hyperparams {
  double root_concentration = 0.0;
  double root_discount = 0.0;
  std::vector<double> concentrations;  // one per group
  std::vector<double> discounts;       // one per group (zero for DP variants)
  std::vector<double> mixes;           // one per group (additive variants only)
};

// The dependence structure implied by a hyperparameter draw.  Independent
// strategies model each group's partition separately, so their spec carries
// no cross-group information.
MsspSpec strategy_spec(const StrategyModel& model, const Hyperparams& hyper,
                       int groups);

Hyperparams draw_hyperparams(const StrategyModel& model, int groups, Rng& rng);

struct ChainState {
  StrategyModel model;
  GroupedSample data;
  Hyperparams hyper;
  AugmentedState latent;
  // Pinning the hyperparameters turns the sweep into a pure latent update.
  bool update_hyperparameters = true;
  // Adaptive random-walk state for Pitman-Yor (discount, concentration)
  // pairs: two coordinates per pair, groups first, then the root pair when
  // the model has one.
  std::vector<double> mh_log_step;
  std::vector<long> mh_accepted;
  std::vector<long> mh_attempted;
  long sweeps = 0;
};

// Structural invariants: hyperparameters in domain, latent state consistent
// with the data.  Throws std::invalid_argument on violation.
void check_chain(const ChainState& state);

// Hyperparameters drawn from their priors; latent allocations drawn from the
// sequential conditional given the data (retrying hyperparameter draws that
// give the data probability zero).
ChainState init_chain(const StrategyModel& model, const GroupedSample& data,
                      Rng& rng);

// One full sweep: latent resampling (tables for hierarchical models,
// species component flags for additive ones), then hyperparameter updates
// (auxiliary-variable conditional for Dirichlet concentrations, ten adaptive
// random-walk sub-steps per Pitman-Yor pair, exact spike-and-slab
// conditional for mix weights).
void gibbs_step(ChainState& state, Rng& rng);

// Probability that the next observation in each group is a previously unseen
// species, given the current latent state and hyperparameters.
std::vector<double> discovery_snapshot(const ChainState& state);

// Advances the chain and averages the discovery probability for one group;
// the standard error comes from batch means.
McEstimate discovery_probability(ChainState& state, int group,
                                 int num_iterations, Rng& rng);

struct ChainRun {
  ChainState state;
  std::vector<McEstimate> discovery;  // one per group
};

// Runs `iterations` sweeps and averages per-group discovery probabilities
// over all of them.  A warm state carries hyperparameters and adaptation
// forward; its latent allocations are reused when the data is unchanged,
// extended observation by observation when the new data appends to the old,
// and rebuilt otherwise.
ChainRun run_chain(const StrategyModel& model, const GroupedSample& data,
                   int iterations, const ChainState* warm, Rng& rng);

// Default sweep counts from the sequential sampling protocol.
inline constexpr int kIterationsPerStep = 200;
inline constexpr int kHierarchicalWarmup = 1000;

}  // namespace mssp
