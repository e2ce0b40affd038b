// Apache License, Version 2.0, refer to LICENSE.txt

#include "mssp/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "mssp/eppf.hpp"

namespace mssp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Acceptance target and per-pair proposal repetitions for the adaptive
// random walk on Pitman-Yor hyperparameters.
constexpr double kMhTargetAcceptance = 0.44;
constexpr int kMhRepeats = 10;

double log_gamma_pdf(double x, const GammaPrior& p) {
  if (!(x > 0.0)) return kNegInf;
  return (p.shape - 1.0) * std::log(x) - p.rate * x;
}

double log_beta_pdf(double x, const BetaPrior& p) {
  if (!(x > 0.0 && x < 1.0)) return kNegInf;
  return (p.a - 1.0) * std::log(x) + (p.b - 1.0) * std::log1p(-x);
}

// Log change in a Pitman-Yor partition probability when a new block of size
// m joins a configuration with K blocks and n observations (valid for
// K = n = 0 as well; the Dirichlet case is discount zero).
double block_log_delta(double discount, double conc, int blocks, int obs, int m) {
  return std::log(conc + blocks * discount) + std::lgamma(m - discount) -
         std::lgamma(1.0 - discount) - std::lgamma(conc + obs + m) +
         std::lgamma(conc + obs);
}

std::vector<int> group_blocks(const GroupedSample& g, int j) {
  std::vector<int> blocks;
  for (int d = 1; d <= g.distinct; ++d)
    if (g.freq[j][d - 1] > 0) blocks.push_back(g.freq[j][d - 1]);
  return blocks;
}

EppfFamily component_family(bool py, double discount, double conc) {
  if (py) return PypFamily{discount, conc};
  return DpFamily{conc};
}

int py_pair_count(StrategyFamily f, int groups) {
  if (!uses_discounts(f)) return 0;
  return is_independent(f) ? groups : groups + 1;
}

// Auxiliary-variable conditional for a Dirichlet concentration given a
// partition of n observations into K blocks.
double dp_concentration_update(const GammaPrior& prior, int K, int n,
                               double current, Rng& rng) {
  if (n == 0 || K == 0) return draw_gamma(rng, prior.shape, prior.rate);
  double eta = draw_beta(rng, current + 1.0, static_cast<double>(n));
  eta = std::min(std::max(eta, 1e-12), 1.0 - 1e-12);
  double rate = prior.rate - std::log(eta);
  double odds = (prior.shape + K - 1.0) / (n * rate);
  bool boost = draw_uniform(rng) < odds / (1.0 + odds);
  return draw_gamma(rng, prior.shape + K - (boost ? 0.0 : 1.0), rate);
}

double logit(double x) { return std::log(x) - std::log1p(-x); }

// Ten adaptive random-walk sub-steps on (logit discount, log(concentration +
// discount)); the concentration prior's positivity constraint rejects any
// proposal with a non-positive concentration.  The adaptation gain decays as
// one over the sweep count.
template <typename LogLik>
void py_pair_update(ChainState& st, int pair, const BetaPrior& bp,
                    const GammaPrior& gp, double& discount, double& conc,
                    LogLik&& loglik, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  double gain = 1.0 / static_cast<double>(st.sweeps + 1);
  double sigma = std::min(std::max(discount, 1e-12), 1.0 - 1e-12);
  double u = logit(sigma);
  double v = std::log(conc + sigma);
  double cur_target = log_beta_pdf(sigma, bp) + log_gamma_pdf(conc, gp) +
                      loglik(sigma, conc) + std::log(sigma) + std::log1p(-sigma) +
                      std::log(conc + sigma);
  for (int rep = 0; rep < kMhRepeats; ++rep) {
    for (int coord = 0; coord < 2; ++coord) {
      int idx = 2 * pair + coord;
      double step = std::exp(st.mh_log_step[idx]);
      double u2 = u, v2 = v;
      (coord == 0 ? u2 : v2) += step * normal(rng);
      double s2 = 1.0 / (1.0 + std::exp(-u2));
      s2 = std::min(std::max(s2, 1e-12), 1.0 - 1e-12);
      double c2 = std::exp(v2) - s2;
      double prop_target = kNegInf;
      if (c2 > 0.0)
        prop_target = log_beta_pdf(s2, bp) + log_gamma_pdf(c2, gp) + loglik(s2, c2) +
                      std::log(s2) + std::log1p(-s2) + std::log(c2 + s2);
      bool accept = std::log(draw_uniform(rng)) < prop_target - cur_target;
      st.mh_attempted[idx]++;
      if (accept) {
        st.mh_accepted[idx]++;
        u = u2;
        v = v2;
        sigma = s2;
        conc = c2;
        cur_target = prop_target;
      }
      st.mh_log_step[idx] += gain * ((accept ? 1.0 : 0.0) - kMhTargetAcceptance);
    }
  }
  discount = sigma;
}

// ---- additive sweep ----

struct AdditiveWork {
  // component 0 is shared, component j >= 1 belongs to group j
  std::vector<int> comp_blocks;  // K per component
  std::vector<int> comp_obs;     // n per component
  std::vector<int> pooled;       // per species: total observations
  std::vector<int> home_group;   // per species: 0-based group, -1 if several
};

AdditiveWork load_additive(const GroupedSample& g, const AdditiveState& st) {
  AdditiveWork w;
  int J = g.groups;
  w.comp_blocks.assign(J + 1, 0);
  w.comp_obs.assign(J + 1, 0);
  w.pooled.assign(g.distinct, 0);
  w.home_group.assign(g.distinct, -1);
  for (int d = 1; d <= g.distinct; ++d) {
    auto gs = g.groups_of_species(d);
    w.pooled[d - 1] = g.species_total(d);
    if (gs.size() == 1) w.home_group[d - 1] = gs[0];
    int c = st.component_of_species[d - 1];
    w.comp_blocks[c]++;
    w.comp_obs[c] += w.pooled[d - 1];
  }
  return w;
}

void additive_sweep(ChainState& st, Rng& rng) {
  auto& latent = std::get<AdditiveState>(st.latent);
  const GroupedSample& g = st.data;
  int J = g.groups;
  bool py = uses_discounts(st.model.family);
  AdditiveWork w = load_additive(g, latent);

  // resample each single-group species' component flag
  for (int d = 1; d <= g.distinct; ++d) {
    int j = w.home_group[d - 1];
    if (j < 0) continue;  // species observed in several groups stays shared
    int m = w.pooled[d - 1];
    int cur = latent.component_of_species[d - 1];
    w.comp_blocks[cur]--;
    w.comp_obs[cur] -= m;
    double eps = st.hyper.mixes[j];
    double lw_shared =
        (eps > 0.0 ? m * std::log(eps) : kNegInf) +
        block_log_delta(py ? st.hyper.root_discount : 0.0, st.hyper.root_concentration,
                        w.comp_blocks[0], w.comp_obs[0], m);
    double lw_own =
        (eps < 1.0 ? m * std::log1p(-eps) : kNegInf) +
        block_log_delta(py ? st.hyper.discounts[j] : 0.0, st.hyper.concentrations[j],
                        w.comp_blocks[j + 1], w.comp_obs[j + 1], m);
    double top = std::max(lw_shared, lw_own);
    double ps = std::exp(lw_shared - top);
    int next = draw_uniform(rng) * (ps + std::exp(lw_own - top)) < ps ? 0 : j + 1;
    latent.component_of_species[d - 1] = next;
    w.comp_blocks[next]++;
    w.comp_obs[next] += m;
  }

  if (!st.update_hyperparameters) return;

  // mix weights: exact spike-and-slab conditional given flag counts
  for (int j = 0; j < J; ++j) {
    long shared_obs = 0, own_obs = 0;
    for (int d = 1; d <= g.distinct; ++d) {
      int c = latent.component_of_species[d - 1];
      if (c == 0)
        shared_obs += g.freq[j][d - 1];
      else if (c == j + 1)
        own_obs += g.freq[j][d - 1];
    }
    const EpsilonPrior& mp = st.model.mix;
    double w_zero = shared_obs == 0 ? mp.at_zero : 0.0;
    double w_one = own_obs == 0 ? mp.at_one : 0.0;
    double w_slab = mp.slab * std::exp(std::lgamma(shared_obs + 1.0) +
                                       std::lgamma(own_obs + 1.0) -
                                       std::lgamma(shared_obs + own_obs + 2.0));
    int pick = draw_categorical(rng, {w_zero, w_one, w_slab});
    if (pick == 0)
      st.hyper.mixes[j] = 0.0;
    else if (pick == 1)
      st.hyper.mixes[j] = 1.0;
    else
      st.hyper.mixes[j] = draw_beta(rng, shared_obs + 1.0, own_obs + 1.0);
  }

  // component block sizes for the concentration / discount updates
  auto blocks_of = [&](int c) {
    std::vector<int> blocks;
    for (int d = 1; d <= g.distinct; ++d)
      if (latent.component_of_species[d - 1] == c) blocks.push_back(w.pooled[d - 1]);
    return blocks;
  };
  if (!py) {
    std::vector<int> b0 = blocks_of(0);
    st.hyper.root_concentration = dp_concentration_update(
        st.model.root_concentration, static_cast<int>(b0.size()), w.comp_obs[0],
        st.hyper.root_concentration, rng);
    for (int j = 0; j < J; ++j) {
      std::vector<int> bj = blocks_of(j + 1);
      st.hyper.concentrations[j] = dp_concentration_update(
          st.model.group_concentration, static_cast<int>(bj.size()), w.comp_obs[j + 1],
          st.hyper.concentrations[j], rng);
    }
  } else {
    for (int j = 0; j < J; ++j) {
      std::vector<int> bj = blocks_of(j + 1);
      py_pair_update(st, j, st.model.group_discount, st.model.group_concentration,
                     st.hyper.discounts[j], st.hyper.concentrations[j],
                     [&](double s, double c) {
                       return log_eppf(PypFamily{s, c}, bj);
                     },
                     rng);
    }
    std::vector<int> b0 = blocks_of(0);
    py_pair_update(st, J, st.model.root_discount, st.model.root_concentration,
                   st.hyper.root_discount, st.hyper.root_concentration,
                   [&](double s, double c) {
                     return log_eppf(PypFamily{s, c}, b0);
                   },
                   rng);
  }
}

// ---- hierarchical sweep ----

struct HierWork {
  std::vector<std::vector<int>> obs_table;  // slot per observation
  std::vector<std::vector<int>> tsize;      // slot-indexed; 0 marks a dead slot
  std::vector<std::vector<int>> tdish;
  std::vector<int> group_tables;   // active tables per group
  std::vector<int> dish_tables;    // per species: tables serving it
  int total_tables = 0;
  int active_dishes = 0;
};

HierWork load_hier(const GroupedSample& g, const HierState& st) {
  HierWork w;
  int J = g.groups;
  w.obs_table = st.table_of_obs;
  w.tsize.resize(J);
  w.tdish = st.dish_of_table;
  w.group_tables.assign(J, 0);
  w.dish_tables.assign(g.distinct, 0);
  for (int j = 0; j < J; ++j) {
    w.tsize[j].assign(st.dish_of_table[j].size(), 0);
    for (int t : st.table_of_obs[j]) w.tsize[j][t]++;
    w.group_tables[j] = static_cast<int>(st.dish_of_table[j].size());
    w.total_tables += w.group_tables[j];
    for (int dish : st.dish_of_table[j])
      if (w.dish_tables[dish - 1]++ == 0) w.active_dishes++;
  }
  return w;
}

HierState canonical_hier(const GroupedSample& g, const HierWork& w) {
  HierState out;
  int J = g.groups;
  out.table_of_obs.resize(J);
  out.dish_of_table.resize(J);
  for (int j = 0; j < J; ++j) {
    std::vector<int> rank(w.tsize[j].size(), -1);
    out.table_of_obs[j].reserve(w.obs_table[j].size());
    for (int slot : w.obs_table[j]) {
      if (rank[slot] < 0) {
        rank[slot] = static_cast<int>(out.dish_of_table[j].size());
        out.dish_of_table[j].push_back(w.tdish[j][slot]);
      }
      out.table_of_obs[j].push_back(rank[slot]);
    }
  }
  return out;
}

void hier_sweep(ChainState& st, Rng& rng) {
  const GroupedSample& g = st.data;
  int J = g.groups;
  bool py = uses_discounts(st.model.family);
  HierWork w = load_hier(g, std::get<HierState>(st.latent));

  double root_disc = py ? st.hyper.root_discount : 0.0;
  std::vector<int> cand;
  std::vector<double> wt;
  for (int j = 0; j < J; ++j) {
    double disc = py ? st.hyper.discounts[j] : 0.0;
    double conc = st.hyper.concentrations[j];
    int nj = static_cast<int>(g.labels[j].size());
    for (int i = 0; i < nj; ++i) {
      int d = g.labels[j][i];
      int t = w.obs_table[j][i];
      if (--w.tsize[j][t] == 0) {
        w.group_tables[j]--;
        w.total_tables--;
        if (--w.dish_tables[d - 1] == 0) w.active_dishes--;
      }
      cand.clear();
      wt.clear();
      for (int s = 0; s < static_cast<int>(w.tsize[j].size()); ++s)
        if (w.tsize[j][s] > 0 && w.tdish[j][s] == d) {
          cand.push_back(s);
          wt.push_back(w.tsize[j][s] - disc);
        }
      double root_mass =
          w.dish_tables[d - 1] > 0
              ? (w.dish_tables[d - 1] - root_disc)
              : (st.hyper.root_concentration + root_disc * w.active_dishes);
      root_mass /= st.hyper.root_concentration + w.total_tables;
      cand.push_back(-1);
      wt.push_back((conc + disc * w.group_tables[j]) * root_mass);
      int pick = cand[draw_categorical(rng, wt)];
      if (pick < 0) {
        // reuse the slot the observation just emptied, if any
        int slot = w.tsize[j][t] == 0 ? t : -1;
        if (slot < 0) {
          slot = static_cast<int>(w.tsize[j].size());
          w.tsize[j].push_back(0);
          w.tdish[j].push_back(d);
        }
        w.tsize[j][slot] = 1;
        w.tdish[j][slot] = d;
        w.obs_table[j][i] = slot;
        w.group_tables[j]++;
        w.total_tables++;
        if (w.dish_tables[d - 1]++ == 0) w.active_dishes++;
      } else {
        w.tsize[j][pick]++;
        w.obs_table[j][i] = pick;
      }
    }
  }
  st.latent = canonical_hier(g, w);

  if (!st.update_hyperparameters) return;

  auto group_table_sizes = [&](int j) {
    std::vector<int> sizes;
    for (int s = 0; s < static_cast<int>(w.tsize[j].size()); ++s)
      if (w.tsize[j][s] > 0) sizes.push_back(w.tsize[j][s]);
    return sizes;
  };
  auto root_blocks = [&]() {
    std::vector<int> sizes;
    for (int d = 0; d < g.distinct; ++d)
      if (w.dish_tables[d] > 0) sizes.push_back(w.dish_tables[d]);
    return sizes;
  };
  if (!py) {
    for (int j = 0; j < J; ++j)
      st.hyper.concentrations[j] = dp_concentration_update(
          st.model.group_concentration, w.group_tables[j],
          static_cast<int>(g.labels[j].size()), st.hyper.concentrations[j], rng);
    st.hyper.root_concentration =
        dp_concentration_update(st.model.root_concentration, w.active_dishes,
                                w.total_tables, st.hyper.root_concentration, rng);
  } else {
    for (int j = 0; j < J; ++j) {
      std::vector<int> sizes = group_table_sizes(j);
      py_pair_update(st, j, st.model.group_discount, st.model.group_concentration,
                     st.hyper.discounts[j], st.hyper.concentrations[j],
                     [&](double s, double c) {
                       return log_eppf(PypFamily{s, c}, sizes);
                     },
                     rng);
    }
    std::vector<int> rb = root_blocks();
    py_pair_update(st, J, st.model.root_discount, st.model.root_concentration,
                   st.hyper.root_discount, st.hyper.root_concentration,
                   [&](double s, double c) {
                     return log_eppf(PypFamily{s, c}, rb);
                   },
                   rng);
  }
}

// ---- independent sweep ----

void independent_sweep(ChainState& st, Rng& rng) {
  if (!st.update_hyperparameters) return;
  const GroupedSample& g = st.data;
  bool py = uses_discounts(st.model.family);
  for (int j = 0; j < g.groups; ++j) {
    std::vector<int> blocks = group_blocks(g, j);
    if (!py) {
      st.hyper.concentrations[j] = dp_concentration_update(
          st.model.group_concentration, static_cast<int>(blocks.size()),
          static_cast<int>(g.labels[j].size()), st.hyper.concentrations[j], rng);
    } else {
      py_pair_update(st, j, st.model.group_discount, st.model.group_concentration,
                     st.hyper.discounts[j], st.hyper.concentrations[j],
                     [&](double s, double c) {
                       return log_eppf(PypFamily{s, c}, blocks);
                     },
                     rng);
    }
  }
}

// Draws hyperparameters and latent allocations until the data has positive
// probability (mix weights at the spikes can forbid shared or unshared
// species).
void draw_admissible(ChainState& st, Rng& rng) {
  const int kMaxTries = 10000;
  for (int attempt = 0; attempt < kMaxTries; ++attempt) {
    if (is_independent(st.model.family)) {
      st.latent = IndependentState{};
      return;
    }
    MsspSpec spec = strategy_spec(st.model, st.hyper, st.data.groups);
    auto [latent, logw] = conditional_augmentation(spec, st.data, rng);
    if (std::isfinite(logw)) {
      st.latent = std::move(latent);
      return;
    }
    st.hyper = draw_hyperparams(st.model, st.data.groups, rng);
  }
  throw std::runtime_error(
      "failed to find latent allocations with positive probability");
}

bool same_data(const GroupedSample& a, const GroupedSample& b) {
  return a.groups == b.groups && a.labels == b.labels;
}

// True when `next` extends `prev` by appending observations at group ends
// without renaming species.
bool extends_data(const GroupedSample& prev, const GroupedSample& next) {
  if (prev.groups != next.groups || prev.distinct > next.distinct) return false;
  for (int j = 0; j < prev.groups; ++j) {
    if (prev.labels[j].size() > next.labels[j].size()) return false;
    if (!std::equal(prev.labels[j].begin(), prev.labels[j].end(),
                    next.labels[j].begin()))
      return false;
  }
  return true;
}

}  // namespace

StrategyModel default_model(StrategyFamily family) {
  StrategyModel m;
  m.family = family;
  switch (family) {
    case StrategyFamily::kIndependentDp:
      m.group_concentration = {0.75, 1.0};
      break;
    case StrategyFamily::kIndependentPy:
      m.group_discount = {1.0, 3.0};
      m.group_concentration = {0.2, 1.0};
      break;
    case StrategyFamily::kAdditiveDp:
      m.root_concentration = {0.5, 2.0};
      m.group_concentration = {6.0, 2.0};
      break;
    case StrategyFamily::kAdditivePy:
      m.root_discount = {1.0, 3.0};
      m.group_discount = {1.0, 2.0};
      m.root_concentration = {0.25, 4.0};
      m.group_concentration = {2.0, 2.0};
      break;
    case StrategyFamily::kHierarchicalDp:
      m.root_concentration = {1.0, 1.0 / 3.0};
      m.group_concentration = {1.0, 0.5};
      break;
    case StrategyFamily::kHierarchicalPy:
      m.root_discount = {1.0, 2.0};
      m.group_discount = {1.0, 2.0};
      m.root_concentration = {1.0, 1.0};
      m.group_concentration = {1.0, 1.0};
      break;
  }
  return m;
}

bool uses_discounts(StrategyFamily f) {
  return f == StrategyFamily::kIndependentPy || f == StrategyFamily::kAdditivePy ||
         f == StrategyFamily::kHierarchicalPy;
}

bool is_additive(StrategyFamily f) {
  return f == StrategyFamily::kAdditiveDp || f == StrategyFamily::kAdditivePy;
}

bool is_hierarchical(StrategyFamily f) {
  return f == StrategyFamily::kHierarchicalDp || f == StrategyFamily::kHierarchicalPy;
}

bool is_independent(StrategyFamily f) {
  return f == StrategyFamily::kIndependentDp || f == StrategyFamily::kIndependentPy;
}

MsspSpec strategy_spec(const StrategyModel& model, const Hyperparams& hyper,
                       int groups) {
  bool py = uses_discounts(model.family);
  if (is_independent(model.family)) {
    IndependentSpec s;
    for (int j = 0; j < groups; ++j)
      s.families.push_back(
          component_family(py, py ? hyper.discounts[j] : 0.0, hyper.concentrations[j]));
    return s;
  }
  if (is_additive(model.family)) {
    AdditiveSpec s;
    s.mix = hyper.mixes;
    s.shared = component_family(py, py ? hyper.root_discount : 0.0,
                                hyper.root_concentration);
    for (int j = 0; j < groups; ++j)
      s.idiosyncratic.push_back(
          component_family(py, py ? hyper.discounts[j] : 0.0, hyper.concentrations[j]));
    return s;
  }
  HierarchicalSpec s;
  s.root =
      component_family(py, py ? hyper.root_discount : 0.0, hyper.root_concentration);
  for (int j = 0; j < groups; ++j)
    s.children.push_back(
        component_family(py, py ? hyper.discounts[j] : 0.0, hyper.concentrations[j]));
  return s;
}

Hyperparams draw_hyperparams(const StrategyModel& model, int groups, Rng& rng) {
  Hyperparams h;
  bool py = uses_discounts(model.family);
  h.concentrations.resize(groups);
  h.discounts.assign(groups, 0.0);
  for (int j = 0; j < groups; ++j) {
    h.concentrations[j] =
        draw_gamma(rng, model.group_concentration.shape, model.group_concentration.rate);
    if (py) h.discounts[j] = draw_beta(rng, model.group_discount.a, model.group_discount.b);
  }
  if (!is_independent(model.family)) {
    h.root_concentration =
        draw_gamma(rng, model.root_concentration.shape, model.root_concentration.rate);
    if (py)
      h.root_discount = draw_beta(rng, model.root_discount.a, model.root_discount.b);
  }
  if (is_additive(model.family)) {
    h.mixes.resize(groups);
    for (int j = 0; j < groups; ++j) {
      int pick = draw_categorical(
          rng, {model.mix.at_zero, model.mix.at_one, model.mix.slab});
      h.mixes[j] = pick == 0 ? 0.0 : pick == 1 ? 1.0 : draw_uniform(rng);
    }
  }
  return h;
}

void check_chain(const ChainState& st) {
  validate(st.data);
  int J = st.data.groups;
  bool py = uses_discounts(st.model.family);
  if (static_cast<int>(st.hyper.concentrations.size()) != J)
    throw std::invalid_argument("one concentration per group required");
  for (double c : st.hyper.concentrations)
    if (!(c > 0.0)) throw std::invalid_argument("concentration out of domain");
  if (py) {
    if (static_cast<int>(st.hyper.discounts.size()) != J)
      throw std::invalid_argument("one discount per group required");
    for (double s : st.hyper.discounts)
      if (!(s >= 0.0 && s < 1.0)) throw std::invalid_argument("discount out of domain");
  }
  if (!is_independent(st.model.family) && !(st.hyper.root_concentration > 0.0))
    throw std::invalid_argument("root concentration out of domain");
  if (py && !is_independent(st.model.family) &&
      !(st.hyper.root_discount >= 0.0 && st.hyper.root_discount < 1.0))
    throw std::invalid_argument("root discount out of domain");
  if (is_additive(st.model.family)) {
    if (static_cast<int>(st.hyper.mixes.size()) != J)
      throw std::invalid_argument("one mix weight per group required");
    for (double e : st.hyper.mixes)
      if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("mix weight out of domain");
  }
  if (is_independent(st.model.family)) {
    if (!std::holds_alternative<IndependentState>(st.latent))
      throw std::invalid_argument("latent state type does not match the strategy");
  } else {
    MsspSpec spec = strategy_spec(st.model, st.hyper, J);
    validate_state(spec, st.data, st.latent);
    if (!std::isfinite(log_peppf_augmented(spec, st.data, st.latent)))
      throw std::invalid_argument("latent state has probability zero");
  }
  int pairs = py_pair_count(st.model.family, J);
  if (static_cast<int>(st.mh_log_step.size()) != 2 * pairs ||
      st.mh_accepted.size() != st.mh_log_step.size() ||
      st.mh_attempted.size() != st.mh_log_step.size())
    throw std::invalid_argument("adaptation state has the wrong shape");
}

ChainState init_chain(const StrategyModel& model, const GroupedSample& data,
                      Rng& rng) {
  validate(data);
  ChainState st;
  st.model = model;
  st.data = data;
  st.hyper = draw_hyperparams(model, data.groups, rng);
  int pairs = py_pair_count(model.family, data.groups);
  st.mh_log_step.assign(2 * pairs, 0.0);
  st.mh_accepted.assign(2 * pairs, 0);
  st.mh_attempted.assign(2 * pairs, 0);
  draw_admissible(st, rng);
  return st;
}

void gibbs_step(ChainState& st, Rng& rng) {
  if (is_independent(st.model.family))
    independent_sweep(st, rng);
  else if (is_additive(st.model.family))
    additive_sweep(st, rng);
  else
    hier_sweep(st, rng);
  st.sweeps++;
}

std::vector<double> discovery_snapshot(const ChainState& st) {
  const GroupedSample& g = st.data;
  std::vector<double> out(g.groups);
  if (is_independent(st.model.family)) {
    bool py = uses_discounts(st.model.family);
    for (int j = 0; j < g.groups; ++j) {
      std::vector<int> blocks = group_blocks(g, j);
      PredictiveWeights pw = predictive(
          component_family(py, py ? st.hyper.discounts[j] : 0.0,
                           st.hyper.concentrations[j]),
          blocks);
      out[j] = pw.new_mass / pw.total();
    }
    return out;
  }
  MsspSpec spec = strategy_spec(st.model, st.hyper, g.groups);
  for (int j = 0; j < g.groups; ++j) {
    PredictiveWeights pw = mgcrp_predictive(spec, g, st.latent, j);
    out[j] = pw.new_mass / pw.total();
  }
  return out;
}

McEstimate discovery_probability(ChainState& st, int group, int num_iterations,
                                 Rng& rng) {
  if (group < 0 || group >= st.data.groups)
    throw std::invalid_argument("group index out of range");
  if (num_iterations < 1) throw std::invalid_argument("num_iterations must be >= 1");
  const int batches = std::min(20, num_iterations);
  std::vector<McAccumulator> batch(batches);
  McAccumulator all;
  for (int it = 0; it < num_iterations; ++it) {
    gibbs_step(st, rng);
    double v = discovery_snapshot(st)[group];
    all.add(v);
    batch[it % batches].add(v);
  }
  McAccumulator over_batches;
  for (auto& b : batch)
    if (b.count() > 0) over_batches.add(b.mean());
  McEstimate est;
  est.value = all.mean();
  est.se = over_batches.count() >= 2 ? over_batches.estimate().se : all.estimate().se;
  return est;
}

ChainRun run_chain(const StrategyModel& model, const GroupedSample& data,
                   int iterations, const ChainState* warm, Rng& rng) {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  validate(data);
  ChainState st;
  if (warm == nullptr) {
    st = init_chain(model, data, rng);
  } else {
    st = *warm;
    st.model = model;
    if (same_data(warm->data, data)) {
      st.data = data;
    } else if (!is_independent(model.family) && extends_data(warm->data, data)) {
      // replay the appended observations through the sequential conditional
      MsspSpec spec = strategy_spec(st.model, st.hyper, data.groups);
      GroupedSample grown = warm->data;
      AugmentedState latent = warm->latent;
      bool ok = true;
      try {
        for (int j = 0; j < data.groups && ok; ++j)
          for (std::size_t i = grown.labels[j].size(); i < data.labels[j].size(); ++i) {
            int species = data.labels[j][i];
            append_observation(spec, grown, latent, j,
                               species <= grown.distinct ? species : 0, rng);
            if (grown.labels[j].back() != species) ok = false;
          }
      } catch (const std::runtime_error&) {
        ok = false;
      } catch (const std::invalid_argument&) {
        // e.g. an appended species is impossible under the carried latent
        // flags; the state is rebuilt from scratch below
        ok = false;
      }
      st.data = data;
      if (ok && same_data(grown, data)) {
        st.latent = std::move(latent);
      } else {
        draw_admissible(st, rng);
      }
    } else {
      st.data = data;
      if (is_independent(model.family))
        st.latent = IndependentState{};
      else
        draw_admissible(st, rng);
    }
  }

  const int batches = std::min(20, iterations);
  int J = data.groups;
  std::vector<std::vector<McAccumulator>> batch(J,
                                                std::vector<McAccumulator>(batches));
  std::vector<McAccumulator> all(J);
  for (int it = 0; it < iterations; ++it) {
    gibbs_step(st, rng);
    std::vector<double> snap = discovery_snapshot(st);
    for (int j = 0; j < J; ++j) {
      all[j].add(snap[j]);
      batch[j][it % batches].add(snap[j]);
    }
  }
  ChainRun run;
  run.discovery.resize(J);
  for (int j = 0; j < J; ++j) {
    McAccumulator over;
    for (auto& b : batch[j])
      if (b.count() > 0) over.add(b.mean());
    run.discovery[j].value = all[j].mean();
    run.discovery[j].se =
        over.count() >= 2 ? over.estimate().se : all[j].estimate().se;
  }
  run.state = std::move(st);
  return run;
}

}  // namespace mssp
