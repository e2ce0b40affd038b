// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "mssp/eppf.hpp"
#include "mssp/mc.hpp"
#include "mssp/partitions.hpp"
#include "mssp/rng.hpp"

namespace mssp {

// Joint models for J groups of observations with species shared (or not)
// across groups.  All four constructions keep the groups exchangeable within
// themselves and are regular: group marginals are again of species-sampling
// form.

// Groups are mutually independent; no species is ever shared.
struct IndependentSpec {
  std::vector<EppfFamily> families;
};

// Each observation comes from a shared process with probability mix[j], else
// from the group's own process; the shared and idiosyncratic processes never
// collide.
struct AdditiveSpec {
  std::vector<double> mix;
  EppfFamily shared;
  std::vector<EppfFamily> idiosyncratic;
};

// Each group runs its own process whose base measure is one common discrete
// root process (tables within groups, dishes at the root).
struct HierarchicalSpec {
  EppfFamily root;
  std::vector<EppfFamily> children;
};

// The root process clusters whole groups; groups in one cluster share a
// single within-cluster process, groups in different clusters share nothing.
struct NestedSpec {
  EppfFamily root;
  EppfFamily within;
  int groups = 1;
};

using MsspSpec =
    std::variant<IndependentSpec, AdditiveSpec, HierarchicalSpec, NestedSpec>;

int group_count(const MsspSpec& spec);
// All four constructions have species-sampling marginals.
bool regular(const MsspSpec& spec);
void validate(const MsspSpec& spec);

// Latent allocations that make the joint partition probability a product of
// per-process partition probabilities.
struct IndependentState {};

// component_of_species[d-1]: 0 if species d belongs to the shared process,
// j >= 1 if it belongs to group j's own process (then it may only be observed
// in group j).
struct AdditiveState {
  std::vector<int> component_of_species;
};

// table_of_obs[j][i]: 0-based table of observation i in group j, tables
// numbered by first customer; dish_of_table[j][t]: 1-based species served.
struct HierState {
  std::vector<std::vector<int>> table_of_obs;
  std::vector<std::vector<int>> dish_of_table;
};

// cluster_of_group[j]: 1-based cluster label in order of first assignment
// over non-empty groups; 0 marks a group with no observations (its cluster is
// left unassigned until one arrives).
struct NestedState {
  std::vector<int> cluster_of_group;
};

using AugmentedState =
    std::variant<IndependentState, AdditiveState, HierState, NestedState>;

// Throws std::invalid_argument when the latent state does not fit the spec
// and sample (wrong shape, non-canonical numbering, or species/latent
// mismatch).
void validate_state(const MsspSpec& spec, const GroupedSample& grouped,
                    const AugmentedState& state);

struct SampledArray {
  GroupedSample sample;
  AugmentedState latent;
};

// Forward-simulates sizes[j] observations per group, group by group.
SampledArray sample_array(const MsspSpec& spec, std::span<const int> sizes,
                          Rng& rng);

// Joint log probability of the observed array and the latent allocations.
double log_peppf_augmented(const MsspSpec& spec, const GroupedSample& grouped,
                           const AugmentedState& state);

// Log probability of the observed array with latent allocations summed out.
// Exact enumeration; requires total observations <= 10 (use log_peppf_mc
// above that).
double log_peppf(const MsspSpec& spec, const GroupedSample& grouped);

// Sequential importance sampling estimate of the array probability
// (probability scale): latent paths are drawn observation by observation from
// their conditional given the observed species.
McEstimate log_peppf_mc(const MsspSpec& spec, const GroupedSample& grouped,
                        int num_samples, Rng& rng);

// All latent states consistent with the observed array (total <= 10).
std::vector<AugmentedState> enumerate_latent_states(const MsspSpec& spec,
                                                    const GroupedSample& grouped);

// Monte Carlo estimate of the array probability from truncated weight draws:
// mean over draws of the sum over distinct atom tuples of per-group weight
// products.
McEstimate peppf_mc_from_weights(const MsspSpec& spec, const GroupedSample& grouped,
                                 int truncation, int num_samples, Rng& rng);

// Predictive distribution of the next observation in `group` given the array
// and a latent state: probability of each existing species 1..D plus a new
// one.  Conditional on the latent allocations.
PredictiveWeights mgcrp_predictive(const MsspSpec& spec, const GroupedSample& grouped,
                                   const AugmentedState& state, int group);

// Latent allocations summed out exactly (total <= 10); matches the ratio of
// log_peppf values for the extended and current arrays.
PredictiveWeights mgcrp_predictive_exact(const MsspSpec& spec,
                                         const GroupedSample& grouped, int group);

// Marginal law of one group's partition: a closed-form family when one
// exists, otherwise an empirical-weights family backed by a sampler.
EppfFamily marginal_family(const MsspSpec& spec, int group);

// Draws latent allocations consistent with `grouped` from the sequential
// conditional scheme; second member is the log importance weight (the log
// probability of the observed species path given the sampled allocations).
std::pair<AugmentedState, double> conditional_augmentation(const MsspSpec& spec,
                                                           const GroupedSample& grouped,
                                                           Rng& rng);

// Appends one observation of `species` (0 = brand-new species) to `group`,
// extending both the sample and the latent state; any new latent allocation
// is drawn from its conditional.
void append_observation(const MsspSpec& spec, GroupedSample& grouped,
                        AugmentedState& state, int group, int species, Rng& rng);

}  // namespace mssp
