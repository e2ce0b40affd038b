// Apache License, Version 2.0, refer to LICENSE.txt

#include "mssp/bandit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mssp {

namespace {

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return std::isspace(c) == 0; };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

constexpr const char* kPlotCodes[] = {"BCI", "P", "S", "C"};
constexpr int kPlotArms = 4;

// A column belongs to an arm when its header is the plot code followed by
// digits only; anything else is left unmatched.
int arm_of_column(const std::string& header) {
  for (int a = 0; a < kPlotArms; ++a) {
    const std::string code = kPlotCodes[a];
    if (header.size() < code.size() || header.compare(0, code.size(), code) != 0)
      continue;
    bool digits = true;
    for (std::size_t i = code.size(); i < header.size(); ++i)
      digits = digits && std::isdigit(static_cast<unsigned char>(header[i])) != 0;
    if (digits) return a;
  }
  return -1;
}

long parse_count(const std::string& cell, int row, const std::string& column) {
  std::size_t pos = 0;
  long value = 0;
  bool ok = !cell.empty();
  if (ok) {
    try {
      value = std::stol(cell, &pos);
    } catch (const std::exception&) {
      ok = false;
    }
  }
  if (!ok || pos != cell.size())
    throw std::invalid_argument("tree csv: row " + std::to_string(row) + " column '" +
                                column + "' has non-integer count '" + cell + "'");
  if (value < 0)
    throw std::invalid_argument("tree csv: row " + std::to_string(row) + " column '" +
                                column + "' has negative count");
  return value;
}

const char* strategy_label(StrategyFamily family) {
  switch (family) {
    case StrategyFamily::kIndependentDp: return "independent-dp";
    case StrategyFamily::kIndependentPy: return "independent-py";
    case StrategyFamily::kAdditiveDp: return "additive-dp";
    case StrategyFamily::kAdditivePy: return "additive-py";
    case StrategyFamily::kHierarchicalDp: return "hierarchical-dp";
    case StrategyFamily::kHierarchicalPy: return "hierarchical-py";
  }
  return "model";
}

}  // namespace

void validate(const ArmPopulation& arm) {
  if (arm.counts.empty() && arm.truth.empty())
    throw std::invalid_argument("arm population: needs counts or a truth vector");
  for (long c : arm.counts)
    if (c < 0) throw std::invalid_argument("arm population: negative count");
  if (!arm.truth.empty()) {
    double sum = 0.0;
    for (double p : arm.truth) {
      if (!std::isfinite(p) || p < 0.0)
        throw std::invalid_argument("arm population: truth entries must be probabilities");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("arm population: truth must sum to 1");
  }
  if (!arm.counts.empty() && !arm.truth.empty() && arm.counts.size() != arm.truth.size())
    throw std::invalid_argument("arm population: counts and truth sizes differ");
}

CsvLoad load_tree_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("tree csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split_csv_line(line);
  std::vector<int> column_arm(header.size(), -1);
  CsvLoad out;
  out.arms.resize(kPlotArms);
  for (int a = 0; a < kPlotArms; ++a) out.arms[a].name = kPlotCodes[a];

  int matched = 0;
  for (std::size_t c = 0; c < header.size(); ++c) {
    column_arm[c] = arm_of_column(header[c]);
    if (column_arm[c] >= 0)
      ++matched;
    else
      out.warnings.push_back("column '" + header[c] + "' ignored: unrecognized plot code");
  }
  if (matched == 0) throw std::invalid_argument("tree csv: no recognized plot columns");

  int row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw std::invalid_argument("tree csv: row " + std::to_string(row) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(header.size()));
    for (auto& arm : out.arms) arm.counts.push_back(0);
    for (std::size_t c = 0; c < cells.size(); ++c)
      if (column_arm[c] >= 0)
        out.arms[column_arm[c]].counts.back() += parse_count(cells[c], row, header[c]);
  }
  return out;
}

CsvLoad load_tree_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tree csv '" + path + "'");
  return load_tree_csv(in);
}

std::vector<ArmPopulation> generate_zipf_arms(int total_species, int support_per_arm,
                                              const std::vector<double>& exponents,
                                              Rng& rng) {
  if (total_species < 1)
    throw std::invalid_argument("zipf arms: total_species must be positive");
  if (support_per_arm < 1 || support_per_arm > total_species)
    throw std::invalid_argument("zipf arms: support must be in [1, total_species]");
  if (exponents.empty()) throw std::invalid_argument("zipf arms: need at least one exponent");
  for (double s : exponents)
    if (!std::isfinite(s) || s <= 0.0)
      throw std::invalid_argument("zipf arms: exponents must be positive");

  double norm = 0.0;
  std::vector<double> mass(support_per_arm);
  std::vector<ArmPopulation> arms;
  arms.reserve(exponents.size());
  for (std::size_t a = 0; a < exponents.size(); ++a) {
    const double s = exponents[a];
    norm = 0.0;
    for (int k = 1; k <= support_per_arm; ++k) {
      mass[k - 1] = std::pow(static_cast<double>(k), -s);
      norm += mass[k - 1];
    }
    // The first `support_per_arm` entries of a uniform permutation give the
    // support and its rank order in one pass.
    std::vector<int> perm(total_species);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = 0; i < support_per_arm; ++i) {
      std::uniform_int_distribution<int> pick(i, total_species - 1);
      std::swap(perm[i], perm[pick(rng)]);
    }
    ArmPopulation arm;
    arm.name = "arm" + std::to_string(a + 1);
    arm.truth.assign(total_species, 0.0);
    for (int k = 1; k <= support_per_arm; ++k) arm.truth[perm[k - 1]] = mass[k - 1] / norm;
    arms.push_back(std::move(arm));
  }
  return arms;
}

std::vector<double> default_zipf_exponents() {
  return {1.3, 1.3, 1.3, 1.3, 2.0, 2.0, 2.0, 2.0};
}

BanditStrategy uniform_strategy() { return BanditStrategy{StrategyKind::kUniform, {}, "uniform"}; }

BanditStrategy oracle_strategy() { return BanditStrategy{StrategyKind::kOracle, {}, "oracle"}; }

BanditStrategy model_strategy(StrategyFamily family) {
  return BanditStrategy{StrategyKind::kModel, default_model(family), strategy_label(family)};
}

Trajectory run_bandit(const BanditConfig& config,
                      const std::vector<ArmPopulation>& populations,
                      const BanditStrategy& strategy, int replicate) {
  const int num_arms = static_cast<int>(populations.size());
  if (num_arms == 0) throw std::invalid_argument("bandit: need at least one arm");
  if (config.init_per_arm < 0) throw std::invalid_argument("bandit: negative init_per_arm");
  if (config.steps < 1) throw std::invalid_argument("bandit: steps must be positive");
  if (config.mcmc_iters_per_step < 1)
    throw std::invalid_argument("bandit: mcmc_iters_per_step must be positive");
  if (config.hier_warmup < 0) throw std::invalid_argument("bandit: negative hier_warmup");
  if (replicate < 0) throw std::invalid_argument("bandit: negative replicate");
  for (const auto& pop : populations) validate(pop);

  std::size_t axis = 0;
  for (const auto& pop : populations)
    axis = std::max({axis, pop.counts.size(), pop.truth.size()});
  const bool without = config.mode == SamplingMode::kWithoutReplacement;
  for (const auto& pop : populations) {
    if (without && pop.counts.size() != axis)
      throw std::invalid_argument("bandit: arm '" + pop.name +
                                  "' lacks counts on the shared species axis");
    if (!without && pop.truth.size() != axis)
      throw std::invalid_argument("bandit: arm '" + pop.name +
                                  "' lacks a truth vector on the shared species axis");
  }
  const int num_species = static_cast<int>(axis);

  // Per-arm draw streams depend only on (seed, replicate, arm) so the k-th
  // draw from an arm is the same whichever strategy asks for it.
  std::vector<Rng> arm_rng;
  arm_rng.reserve(num_arms);
  for (int j = 0; j < num_arms; ++j)
    arm_rng.push_back(rng_stream(config.seed,
                                 {101, static_cast<std::uint64_t>(replicate),
                                  static_cast<std::uint64_t>(j)}));
  Rng pick_rng = rng_stream(config.seed, {103, static_cast<std::uint64_t>(replicate)});
  Rng mcmc_rng = rng_stream(config.seed, {105, static_cast<std::uint64_t>(replicate)});

  std::vector<std::vector<long>> remaining(num_arms);
  std::vector<long> remaining_total(num_arms, 0);
  if (without)
    for (int j = 0; j < num_arms; ++j) {
      remaining[j] = populations[j].counts;
      for (long c : remaining[j]) remaining_total[j] += c;
    }

  // Reference masses: the truth when given, otherwise full-population
  // frequencies.  Only synthetic (truth) masses feed the recorded
  // true_probability column.
  bool truth_everywhere = true;
  std::vector<std::vector<double>> base_mass(num_arms);
  for (int j = 0; j < num_arms; ++j) {
    if (!populations[j].truth.empty()) {
      base_mass[j] = populations[j].truth;
    } else {
      truth_everywhere = false;
      long total = 0;
      for (long c : populations[j].counts) total += c;
      base_mass[j].assign(axis, 0.0);
      if (total > 0)
        for (std::size_t s = 0; s < populations[j].counts.size(); ++s)
          base_mass[j][s] = static_cast<double>(populations[j].counts[s]) / total;
    }
  }

  std::vector<std::vector<int>> labels(num_arms);
  std::vector<int> local_of(num_species, 0);
  int next_local = 1;
  std::vector<char> seen(num_species, 0);
  long seen_count = 0;

  auto observe = [&](int arm, int species) {
    const bool fresh = seen[species] == 0;
    if (fresh) {
      seen[species] = 1;
      ++seen_count;
      local_of[species] = next_local++;
    }
    labels[arm].push_back(local_of[species]);
    return fresh;
  };

  auto draw_from = [&](int j) {
    if (without) {
      std::vector<double> weights(remaining[j].begin(), remaining[j].end());
      const int idx = draw_categorical(arm_rng[j], weights);
      --remaining[j][idx];
      --remaining_total[j];
      return idx;
    }
    return draw_categorical(arm_rng[j], populations[j].truth);
  };

  auto unseen_mass = [&](int j) {
    double mass = 0.0;
    for (int s = 0; s < num_species; ++s)
      if (seen[s] == 0) mass += base_mass[j][s];
    return mass;
  };

  // Species keep their order-of-arrival ids so each step's sample extends the
  // previous one and the model chain can warm-start by appending.
  auto make_sample = [&]() {
    GroupedSample g;
    g.groups = num_arms;
    g.labels = labels;
    g.sizes.resize(num_arms);
    for (int j = 0; j < num_arms; ++j) g.sizes[j] = static_cast<int>(labels[j].size());
    g.distinct = next_local - 1;
    g.freq.assign(num_arms, std::vector<int>(g.distinct, 0));
    for (int j = 0; j < num_arms; ++j)
      for (int d : labels[j]) ++g.freq[j][d - 1];
    return g;
  };

  for (int j = 0; j < num_arms; ++j)
    for (int i = 0; i < config.init_per_arm; ++i) {
      if (without && remaining_total[j] == 0)
        throw std::invalid_argument("bandit: arm '" + populations[j].name +
                                    "' is smaller than init_per_arm");
      observe(j, draw_from(j));
    }

  Trajectory traj;
  traj.initial_species = static_cast<int>(seen_count);

  ChainState warm;
  bool have_warm = false;

  for (int step = 1; step <= config.steps; ++step) {
    std::vector<char> eligible(num_arms, 1);
    int num_eligible = num_arms;
    if (without)
      for (int j = 0; j < num_arms; ++j)
        if (remaining_total[j] == 0) {
          eligible[j] = 0;
          --num_eligible;
        }
    if (num_eligible == 0) {
      traj.exhausted_early = true;
      break;
    }

    StepRecord rec;
    rec.step = step;
    std::vector<double> score(num_arms, 0.0);
    if (strategy.kind == StrategyKind::kOracle) {
      for (int j = 0; j < num_arms; ++j) score[j] = unseen_mass(j);
      rec.est_probability = score;
    } else if (strategy.kind == StrategyKind::kModel) {
      const GroupedSample g = make_sample();
      int iters = config.mcmc_iters_per_step;
      if (is_hierarchical(strategy.model.family) && !have_warm) iters += config.hier_warmup;
      ChainRun run = run_chain(strategy.model, g, iters, have_warm ? &warm : nullptr, mcmc_rng);
      warm = std::move(run.state);
      have_warm = true;
      for (int j = 0; j < num_arms; ++j) score[j] = run.discovery[j].value;
      rec.est_probability = score;
    }
    // An exhausted arm has discovery probability zero and is out of the race.
    for (int j = 0; j < num_arms; ++j)
      if (eligible[j] == 0 && !rec.est_probability.empty()) rec.est_probability[j] = 0.0;
    if (truth_everywhere) {
      rec.true_probability.resize(num_arms);
      for (int j = 0; j < num_arms; ++j) rec.true_probability[j] = unseen_mass(j);
    }

    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> tied;
    for (int j = 0; j < num_arms; ++j) {
      if (eligible[j] == 0) continue;
      if (score[j] > best) {
        best = score[j];
        tied.assign(1, j);
      } else if (score[j] == best) {
        tied.push_back(j);
      }
    }
    std::uniform_int_distribution<int> pick(0, static_cast<int>(tied.size()) - 1);
    const int arm = tied[pick(pick_rng)];

    rec.arm = arm;
    rec.species = draw_from(arm);
    rec.was_new = observe(arm, rec.species);
    const long prev = traj.cumulative_new.empty() ? 0 : traj.cumulative_new.back();
    traj.cumulative_new.push_back(prev + (rec.was_new ? 1 : 0));
    traj.records.push_back(std::move(rec));
    traj.steps_completed = step;
  }
  return traj;
}

BanditSummary metrics(const std::vector<Trajectory>& trajectories) {
  if (trajectories.empty()) throw std::invalid_argument("metrics: no trajectories");
  BanditSummary out;

  double rate_sum = 0.0;
  int rated = 0;
  std::size_t horizon = 0;
  for (const auto& t : trajectories) {
    horizon = std::max(horizon, t.cumulative_new.size());
    if (t.steps_completed > 0) {
      rate_sum += static_cast<double>(t.cumulative_new.back()) / t.steps_completed;
      ++rated;
    }
  }
  out.avg_new_per_step = rated > 0 ? rate_sum / rated : 0.0;

  out.cumulative_mean.resize(horizon, 0.0);
  out.cumulative_sd.resize(horizon, 0.0);
  for (std::size_t i = 0; i < horizon; ++i) {
    McAccumulator acc;
    for (const auto& t : trajectories) {
      // A finished trajectory holds its final count for the rest of the band.
      double v = 0.0;
      if (!t.cumulative_new.empty())
        v = static_cast<double>(i < t.cumulative_new.size() ? t.cumulative_new[i]
                                                            : t.cumulative_new.back());
      acc.add(v);
    }
    out.cumulative_mean[i] = acc.mean();
    out.cumulative_sd[i] = std::sqrt(acc.variance());
  }

  double sq_sum = 0.0;
  long sq_count = 0;
  for (const auto& t : trajectories)
    for (const auto& rec : t.records) {
      if (rec.est_probability.empty() || rec.true_probability.empty()) continue;
      for (std::size_t j = 0; j < rec.est_probability.size(); ++j) {
        const double d = rec.est_probability[j] - rec.true_probability[j];
        sq_sum += d * d;
        ++sq_count;
      }
    }
  out.rmse_defined = sq_count > 0;
  out.rmse = out.rmse_defined ? std::sqrt(sq_sum / sq_count)
                              : std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace mssp
