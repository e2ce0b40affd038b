// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mssp/inference.hpp"
#include "mssp/rng.hpp"

namespace mssp {

// One arm of the discovery bandit.  Species share a global 0-based axis
// across arms: `counts` holds a finite population for without-replacement
// draws, `truth` a probability vector for i.i.d. draws.  Either may be
// empty when the mode does not need it.
struct ArmPopulation {
  std::string name;
  std::vector<long> counts;
  std::vector<double> truth;
};

void validate(const ArmPopulation& arm);

// Tree-count CSV: a header row of plot codes and one row per species with
// non-negative integer counts.  Columns are pooled into four arms by code
// prefix (BCI, P, S, C followed by digits); other columns are skipped with a
// warning.
struct CsvLoad {
  std::vector<ArmPopulation> arms;
  std::vector<std::string> warnings;
};

CsvLoad load_tree_csv(std::istream& in);
CsvLoad load_tree_csv(const std::string& path);

// Synthetic arms: each draws a uniformly random size-`support_per_arm`
// subset of the species axis, permutes it, and assigns power-law masses
// k^(-s) over ranks k.  One exponent per arm.
std::vector<ArmPopulation> generate_zipf_arms(int total_species, int support_per_arm,
                                              const std::vector<double>& exponents,
                                              Rng& rng);

inline constexpr int kZipfTotalSpecies = 3000;
inline constexpr int kZipfSupportPerArm = 2500;
std::vector<double> default_zipf_exponents();  // 1.3 for four arms, then 2 for four

enum class SamplingMode { kWithoutReplacement, kIid };

enum class StrategyKind { kUniform, kOracle, kModel };

struct BanditStrategy {
  StrategyKind kind = StrategyKind::kUniform;
  StrategyModel model;  // used when kind == kModel
  std::string name = "uniform";
};

BanditStrategy uniform_strategy();
BanditStrategy oracle_strategy();
BanditStrategy model_strategy(StrategyFamily family);

struct BanditConfig {
  int init_per_arm = 30;
  int steps = 300;
  int replicates = 20;
  int mcmc_iters_per_step = kIterationsPerStep;
  int hier_warmup = kHierarchicalWarmup;  // extra first-step sweeps, hierarchical only
  SamplingMode mode = SamplingMode::kWithoutReplacement;
  unsigned long long seed = 0;
};

// One sequential step: the chosen arm, the species drawn from it, whether it
// was new anywhere, and the per-arm discovery estimates behind the choice
// (empty for the uniform strategy).  `true_probability` carries the actual
// unseen mass per arm when the populations expose their truth.
struct StepRecord {
  int step = 0;  // 1-based
  int arm = -1;
  int species = -1;
  bool was_new = false;
  std::vector<double> est_probability;
  std::vector<double> true_probability;
};

struct Trajectory {
  std::vector<StepRecord> records;
  std::vector<long> cumulative_new;  // aligned with records
  int initial_species = 0;
  int steps_completed = 0;
  bool exhausted_early = false;
};

// Runs one replicate: `init_per_arm` draws per arm, then `steps` rounds of
// estimate / pick-argmax / draw-one.  Arm draw streams depend only on
// (seed, replicate, arm), so different strategies see identical draws from
// any arm they sample equally often.  Model strategies keep one warm-started
// chain across steps.
Trajectory run_bandit(const BanditConfig& config,
                      const std::vector<ArmPopulation>& populations,
                      const BanditStrategy& strategy, int replicate = 0);

struct BanditSummary {
  double avg_new_per_step = 0.0;
  std::vector<double> cumulative_mean;  // per step, padded with final values
  std::vector<double> cumulative_sd;
  double rmse = 0.0;  // estimated vs true discovery probabilities
  bool rmse_defined = false;
};

BanditSummary metrics(const std::vector<Trajectory>& trajectories);

}  // namespace mssp
