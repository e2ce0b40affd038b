// Apache License, Version 2.0, refer to LICENSE.txt

#include "mssp/mssp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mssp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Truncation level behind marginal_family's empirical-weights samplers.
constexpr int kMarginalTruncation = 1000;

void require_component(const EppfFamily& family, const char* where) {
  if (std::holds_alternative<EmpiricalWeightsFamily>(family))
    throw std::invalid_argument(std::string(where) +
                                ": empirical-weights component families are not supported");
  validate(family);
}

// count * log(p) with the 0 * log(0) = 0 convention.
double count_log(int count, double p) {
  if (count == 0) return 0.0;
  if (p <= 0.0) return kNegInf;
  return count * std::log(p);
}

// Appends tail pseudo-atoms so the dropped mass of a truncated weight draw
// stays reachable.
void append_dust(std::vector<double>& w) {
  double residual = 1.0 - std::accumulate(w.begin(), w.end(), 0.0);
  if (residual > 1e-12) w.insert(w.end(), kDustAtoms, residual / kDustAtoms);
}

// The per-construction "process" structs below share one duck-typed
// interface: free_step draws the next observation in a group, cond_step
// advances the latent state for an observed species and returns the species'
// predictive probability (0 when impossible), species_predictive aggregates
// latent moves into per-species probabilities, state() exports the latent
// allocations.  Species ids are 1-based; groups are 0-based.

struct IndepProc {
  const IndependentSpec& s;
  std::vector<std::vector<int>> comp;           // per group: block sizes
  std::vector<std::vector<int>> block_species;  // per group: block -> species
  std::vector<int> group_of;                    // species-1 -> owning group
  std::vector<int> block_of;                    // species-1 -> block in owner
  int next_id = 1;

  explicit IndepProc(const IndependentSpec& sp)
      : s(sp), comp(sp.families.size()), block_species(sp.families.size()) {}

  void load(const GroupedSample& g, const IndependentState&) {
    group_of.assign(g.distinct, -1);
    block_of.assign(g.distinct, -1);
    for (int j = 0; j < g.groups; ++j)
      for (int d = 1; d <= g.distinct; ++d)
        if (g.freq[j][d - 1] > 0) {
          if (group_of[d - 1] >= 0)
            throw std::invalid_argument(
                "independent model: the array has probability zero (shared species)");
          group_of[d - 1] = j;
          block_of[d - 1] = static_cast<int>(comp[j].size());
          comp[j].push_back(g.freq[j][d - 1]);
          block_species[j].push_back(d);
        }
    next_id = g.distinct + 1;
  }

  void register_new(int j, int d) {
    if (static_cast<int>(group_of.size()) < d) {
      group_of.resize(d, -1);
      block_of.resize(d, -1);
    }
    group_of[d - 1] = j;
    block_of[d - 1] = static_cast<int>(comp[j].size());
    comp[j].push_back(1);
    block_species[j].push_back(d);
    next_id = std::max(next_id, d + 1);
  }

  int free_step(int j, Rng& rng) {
    PredictiveWeights pr = predictive(s.families[j], comp[j]);
    std::vector<double> w = pr.existing;
    w.push_back(pr.new_mass);
    int pick = draw_categorical(rng, w);
    if (pick < static_cast<int>(comp[j].size())) {
      comp[j][pick]++;
      return block_species[j][pick];
    }
    int d = next_id;
    register_new(j, d);
    return d;
  }

  double cond_step(int j, int d, bool is_new, Rng&) {
    PredictiveWeights pr = predictive(s.families[j], comp[j]);
    if (is_new) {
      double w = pr.new_mass;
      if (w <= 0.0) return 0.0;
      register_new(j, d);
      return w;
    }
    if (group_of[d - 1] != j) return 0.0;
    int b = block_of[d - 1];
    double w = pr.existing[b];
    if (w <= 0.0) return 0.0;
    comp[j][b]++;
    return w;
  }

  PredictiveWeights species_predictive(int j, int distinct) const {
    PredictiveWeights pr = predictive(s.families[j], comp[j]);
    PredictiveWeights out;
    out.existing.assign(distinct, 0.0);
    for (int b = 0; b < static_cast<int>(comp[j].size()); ++b)
      out.existing[block_species[j][b] - 1] = pr.existing[b];
    out.new_mass = pr.new_mass;
    return out;
  }

  AugmentedState state() const { return IndependentState{}; }
};

struct AdditiveProc {
  const AdditiveSpec& s;
  // Component index c: 0 is the shared process, c >= 1 is group c's own.
  std::vector<std::vector<int>> comp;
  std::vector<std::vector<int>> block_species;
  std::vector<int> comp_of;  // species-1 -> component
  std::vector<int> block_of;
  int next_id = 1;

  explicit AdditiveProc(const AdditiveSpec& sp)
      : s(sp), comp(sp.mix.size() + 1), block_species(sp.mix.size() + 1) {}

  const EppfFamily& family(int c) const {
    return c == 0 ? s.shared : s.idiosyncratic[c - 1];
  }

  void load(const GroupedSample& g, const AdditiveState& st) {
    if (static_cast<int>(st.component_of_species.size()) != g.distinct)
      throw std::invalid_argument("additive state does not match the sample");
    comp_of = st.component_of_species;
    block_of.assign(g.distinct, -1);
    for (int d = 1; d <= g.distinct; ++d) {
      int c = comp_of[d - 1];
      int total = 0;
      for (int j = 0; j < g.groups; ++j) {
        int m = g.freq[j][d - 1];
        if (m > 0 && c != 0 && c != j + 1)
          throw std::invalid_argument(
              "additive model: the array has probability zero under this state");
        total += m;
      }
      block_of[d - 1] = static_cast<int>(comp[c].size());
      comp[c].push_back(total);
      block_species[c].push_back(d);
    }
    next_id = g.distinct + 1;
  }

  void register_new(int c, int d) {
    if (static_cast<int>(comp_of.size()) < d) {
      comp_of.resize(d, -1);
      block_of.resize(d, -1);
    }
    comp_of[d - 1] = c;
    block_of[d - 1] = static_cast<int>(comp[c].size());
    comp[c].push_back(1);
    block_species[c].push_back(d);
    next_id = std::max(next_id, d + 1);
  }

  int free_step(int j, Rng& rng) {
    int c = draw_uniform(rng) < s.mix[j] ? 0 : j + 1;
    PredictiveWeights pr = predictive(family(c), comp[c]);
    std::vector<double> w = pr.existing;
    w.push_back(pr.new_mass);
    int pick = draw_categorical(rng, w);
    if (pick < static_cast<int>(comp[c].size())) {
      comp[c][pick]++;
      return block_species[c][pick];
    }
    int d = next_id;
    register_new(c, d);
    return d;
  }

  double cond_step(int j, int d, bool is_new, Rng& rng) {
    double eps = s.mix[j];
    if (is_new) {
      double w0 = eps > 0.0 ? eps * predictive(s.shared, comp[0]).new_mass : 0.0;
      double wj = eps < 1.0
                      ? (1.0 - eps) * predictive(s.idiosyncratic[j], comp[j + 1]).new_mass
                      : 0.0;
      double total = w0 + wj;
      if (total <= 0.0) return 0.0;
      int c = draw_uniform(rng) * total < w0 ? 0 : j + 1;
      register_new(c, d);
      return total;
    }
    int c = comp_of[d - 1];
    double w = 0.0;
    if (c == 0)
      w = eps * predictive(s.shared, comp[0]).existing[block_of[d - 1]];
    else if (c == j + 1)
      w = (1.0 - eps) * predictive(s.idiosyncratic[j], comp[c]).existing[block_of[d - 1]];
    if (w <= 0.0) return 0.0;
    comp[c][block_of[d - 1]]++;
    return w;
  }

  PredictiveWeights species_predictive(int j, int distinct) const {
    double eps = s.mix[j];
    PredictiveWeights pr0 = predictive(s.shared, comp[0]);
    PredictiveWeights prj = predictive(s.idiosyncratic[j], comp[j + 1]);
    PredictiveWeights out;
    out.existing.assign(distinct, 0.0);
    for (int b = 0; b < static_cast<int>(comp[0].size()); ++b)
      out.existing[block_species[0][b] - 1] = eps * pr0.existing[b];
    for (int b = 0; b < static_cast<int>(comp[j + 1].size()); ++b)
      out.existing[block_species[j + 1][b] - 1] = (1.0 - eps) * prj.existing[b];
    out.new_mass = eps * pr0.new_mass + (1.0 - eps) * prj.new_mass;
    return out;
  }

  AugmentedState state() const {
    AdditiveState st;
    st.component_of_species = comp_of;
    return st;
  }
};

struct HierProc {
  const HierarchicalSpec& s;
  std::vector<std::vector<int>> obs_table;  // group -> obs -> table
  std::vector<std::vector<int>> tsize;      // group -> table sizes
  std::vector<std::vector<int>> tdish;      // group -> table -> species
  std::vector<int> root_comp;               // root block -> table count
  std::vector<int> root_species;            // root block -> species
  std::vector<int> root_block;              // species-1 -> root block
  int next_id = 1;

  explicit HierProc(const HierarchicalSpec& sp)
      : s(sp),
        obs_table(sp.children.size()),
        tsize(sp.children.size()),
        tdish(sp.children.size()) {}

  void load(const GroupedSample& g, const HierState& st) {
    obs_table = st.table_of_obs;
    tdish = st.dish_of_table;
    root_block.assign(g.distinct, -1);
    for (int j = 0; j < g.groups; ++j) {
      tsize[j].assign(tdish[j].size(), 0);
      for (int t : obs_table[j]) tsize[j][t]++;
      for (int d : tdish[j]) {
        if (root_block[d - 1] < 0) {
          root_block[d - 1] = static_cast<int>(root_comp.size());
          root_comp.push_back(0);
          root_species.push_back(d);
        }
        root_comp[root_block[d - 1]]++;
      }
    }
    next_id = g.distinct + 1;
  }

  void open_table(int j, int d, bool new_dish) {
    obs_table[j].push_back(static_cast<int>(tsize[j].size()));
    tsize[j].push_back(1);
    tdish[j].push_back(d);
    if (new_dish) {
      if (static_cast<int>(root_block.size()) < d) root_block.resize(d, -1);
      root_block[d - 1] = static_cast<int>(root_comp.size());
      root_comp.push_back(1);
      root_species.push_back(d);
      next_id = std::max(next_id, d + 1);
    } else {
      root_comp[root_block[d - 1]]++;
    }
  }

  int free_step(int j, Rng& rng) {
    PredictiveWeights prc = predictive(s.children[j], tsize[j]);
    std::vector<double> w = prc.existing;
    w.push_back(prc.new_mass);
    int pick = draw_categorical(rng, w);
    if (pick < static_cast<int>(tsize[j].size())) {
      tsize[j][pick]++;
      obs_table[j].push_back(pick);
      return tdish[j][pick];
    }
    PredictiveWeights prr = predictive(s.root, root_comp);
    std::vector<double> wr = prr.existing;
    wr.push_back(prr.new_mass);
    int b = draw_categorical(rng, wr);
    if (b < static_cast<int>(root_comp.size())) {
      open_table(j, root_species[b], false);
      return root_species[b];
    }
    int d = next_id;
    open_table(j, d, true);
    return d;
  }

  double cond_step(int j, int d, bool is_new, Rng& rng) {
    PredictiveWeights prc = predictive(s.children[j], tsize[j]);
    PredictiveWeights prr = predictive(s.root, root_comp);
    std::vector<double> w;
    std::vector<int> table;  // matching table index, -1 for a new table
    for (int t = 0; t < static_cast<int>(tdish[j].size()); ++t)
      if (tdish[j][t] == d) {
        w.push_back(prc.existing[t]);
        table.push_back(t);
      }
    double root_mass;
    if (is_new)
      root_mass = prr.new_mass;
    else
      root_mass = root_block[d - 1] >= 0 ? prr.existing[root_block[d - 1]] : 0.0;
    w.push_back(prc.new_mass * root_mass);
    table.push_back(-1);
    double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (total <= 0.0) return 0.0;
    int pick = table[draw_categorical(rng, w)];
    if (pick >= 0) {
      tsize[j][pick]++;
      obs_table[j].push_back(pick);
    } else {
      open_table(j, d, is_new);
    }
    return total;
  }

  PredictiveWeights species_predictive(int j, int distinct) const {
    PredictiveWeights prc = predictive(s.children[j], tsize[j]);
    PredictiveWeights prr = predictive(s.root, root_comp);
    PredictiveWeights out;
    out.existing.assign(distinct, 0.0);
    for (int t = 0; t < static_cast<int>(tdish[j].size()); ++t)
      out.existing[tdish[j][t] - 1] += prc.existing[t];
    for (int b = 0; b < static_cast<int>(root_comp.size()); ++b)
      out.existing[root_species[b] - 1] += prc.new_mass * prr.existing[b];
    out.new_mass = prc.new_mass * prr.new_mass;
    return out;
  }

  AugmentedState state() const {
    HierState st;
    st.table_of_obs = obs_table;
    st.dish_of_table = tdish;
    return st;
  }
};

struct NestedProc {
  const NestedSpec& s;
  std::vector<int> cl;     // group -> cluster, 1-based, 0 = unassigned
  std::vector<int> csize;  // cluster -> member groups
  std::vector<std::vector<int>> ccomp;          // cluster -> block sizes (pooled)
  std::vector<std::vector<int>> block_species;  // cluster -> block -> species
  std::vector<int> cluster_of_species;          // species-1 -> cluster-1
  std::vector<int> block_of;
  int next_id = 1;

  explicit NestedProc(const NestedSpec& sp) : s(sp), cl(sp.groups, 0) {}

  void load(const GroupedSample& g, const NestedState& st) {
    cl = st.cluster_of_group;
    int clusters = 0;
    for (int r : cl) clusters = std::max(clusters, r);
    csize.assign(clusters, 0);
    for (int r : cl)
      if (r > 0) csize[r - 1]++;
    ccomp.assign(clusters, {});
    block_species.assign(clusters, {});
    cluster_of_species.assign(g.distinct, -1);
    block_of.assign(g.distinct, -1);
    for (int d = 1; d <= g.distinct; ++d) {
      int r = -1;
      int total = 0;
      for (int j = 0; j < g.groups; ++j) {
        int m = g.freq[j][d - 1];
        if (m == 0) continue;
        if (r >= 0 && cl[j] != r + 1)
          throw std::invalid_argument(
              "nested model: the array has probability zero under this state");
        r = cl[j] - 1;
        total += m;
      }
      cluster_of_species[d - 1] = r;
      block_of[d - 1] = static_cast<int>(ccomp[r].size());
      ccomp[r].push_back(total);
      block_species[r].push_back(d);
    }
    next_id = g.distinct + 1;
  }

  void join_cluster(int j, int r) {  // r is 1-based; r == clusters+1 opens one
    if (r > static_cast<int>(csize.size())) {
      csize.push_back(0);
      ccomp.emplace_back();
      block_species.emplace_back();
    }
    cl[j] = r;
    csize[r - 1]++;
  }

  void register_new(int r, int d) {  // new species d in cluster r (1-based)
    if (static_cast<int>(cluster_of_species.size()) < d) {
      cluster_of_species.resize(d, -1);
      block_of.resize(d, -1);
    }
    cluster_of_species[d - 1] = r - 1;
    block_of[d - 1] = static_cast<int>(ccomp[r - 1].size());
    ccomp[r - 1].push_back(1);
    block_species[r - 1].push_back(d);
    next_id = std::max(next_id, d + 1);
  }

  int free_step(int j, Rng& rng) {
    if (cl[j] == 0) {
      PredictiveWeights prr = predictive(s.root, csize);
      std::vector<double> w = prr.existing;
      w.push_back(prr.new_mass);
      join_cluster(j, draw_categorical(rng, w) + 1);
    }
    int r = cl[j];
    PredictiveWeights prw = predictive(s.within, ccomp[r - 1]);
    std::vector<double> w = prw.existing;
    w.push_back(prw.new_mass);
    int pick = draw_categorical(rng, w);
    if (pick < static_cast<int>(ccomp[r - 1].size())) {
      ccomp[r - 1][pick]++;
      return block_species[r - 1][pick];
    }
    int d = next_id;
    register_new(r, d);
    return d;
  }

  double cond_step(int j, int d, bool is_new, Rng& rng) {
    if (cl[j] > 0) {
      int r = cl[j];
      PredictiveWeights prw = predictive(s.within, ccomp[r - 1]);
      if (is_new) {
        double w = prw.new_mass;
        if (w <= 0.0) return 0.0;
        register_new(r, d);
        return w;
      }
      if (cluster_of_species[d - 1] != r - 1) return 0.0;
      double w = prw.existing[block_of[d - 1]];
      if (w <= 0.0) return 0.0;
      ccomp[r - 1][block_of[d - 1]]++;
      return w;
    }
    PredictiveWeights prr = predictive(s.root, csize);
    if (is_new) {
      // The group may join any cluster (or a new one) and then draw a fresh
      // species there.
      std::vector<double> w;
      for (int r = 0; r < static_cast<int>(csize.size()); ++r)
        w.push_back(prr.existing[r] * predictive(s.within, ccomp[r]).new_mass);
      w.push_back(prr.new_mass);
      double total = std::accumulate(w.begin(), w.end(), 0.0);
      if (total <= 0.0) return 0.0;
      int r = draw_categorical(rng, w) + 1;
      join_cluster(j, r);
      register_new(r, d);
      return total;
    }
    // An existing species pins the group to that species' cluster.
    int r = cluster_of_species[d - 1];
    PredictiveWeights prw = predictive(s.within, ccomp[r]);
    double w = prr.existing[r] * prw.existing[block_of[d - 1]];
    if (w <= 0.0) return 0.0;
    join_cluster(j, r + 1);
    ccomp[r][block_of[d - 1]]++;
    return w;
  }

  PredictiveWeights species_predictive(int j, int distinct) const {
    PredictiveWeights out;
    out.existing.assign(distinct, 0.0);
    if (cl[j] > 0) {
      int r = cl[j];
      PredictiveWeights prw = predictive(s.within, ccomp[r - 1]);
      for (int b = 0; b < static_cast<int>(ccomp[r - 1].size()); ++b)
        out.existing[block_species[r - 1][b] - 1] = prw.existing[b];
      out.new_mass = prw.new_mass;
      return out;
    }
    // Unassigned group: mix over the cluster it would join.
    PredictiveWeights prr = predictive(s.root, csize);
    out.new_mass = prr.new_mass;
    for (int r = 0; r < static_cast<int>(csize.size()); ++r) {
      PredictiveWeights prw = predictive(s.within, ccomp[r]);
      for (int b = 0; b < static_cast<int>(ccomp[r].size()); ++b)
        out.existing[block_species[r][b] - 1] += prr.existing[r] * prw.existing[b];
      out.new_mass += prr.existing[r] * prw.new_mass;
    }
    return out;
  }

  AugmentedState state() const {
    NestedState st;
    st.cluster_of_group = cl;
    return st;
  }
};

template <typename Fn>
auto with_proc(const MsspSpec& spec, Fn&& fn) {
  return std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IndependentSpec>) {
          IndepProc p(s);
          return fn(p);
        } else if constexpr (std::is_same_v<T, AdditiveSpec>) {
          AdditiveProc p(s);
          return fn(p);
        } else if constexpr (std::is_same_v<T, HierarchicalSpec>) {
          HierProc p(s);
          return fn(p);
        } else {
          NestedProc p(s);
          return fn(p);
        }
      },
      spec);
}

template <typename Fn>
auto with_loaded_proc(const MsspSpec& spec, const GroupedSample& g,
                      const AugmentedState& st, Fn&& fn) {
  return with_proc(spec, [&](auto& p) {
    using P = std::decay_t<decltype(p)>;
    if constexpr (std::is_same_v<P, IndepProc>) {
      const auto* ls = std::get_if<IndependentState>(&st);
      if (!ls) throw std::invalid_argument("latent state type does not match the spec");
      p.load(g, *ls);
    } else if constexpr (std::is_same_v<P, AdditiveProc>) {
      const auto* ls = std::get_if<AdditiveState>(&st);
      if (!ls) throw std::invalid_argument("latent state type does not match the spec");
      p.load(g, *ls);
    } else if constexpr (std::is_same_v<P, HierProc>) {
      const auto* ls = std::get_if<HierState>(&st);
      if (!ls) throw std::invalid_argument("latent state type does not match the spec");
      p.load(g, *ls);
    } else {
      const auto* ls = std::get_if<NestedState>(&st);
      if (!ls) throw std::invalid_argument("latent state type does not match the spec");
      p.load(g, *ls);
    }
    return fn(p);
  });
}

template <typename Proc>
std::pair<AugmentedState, double> run_conditional(Proc& p, const GroupedSample& g,
                                                  Rng& rng) {
  std::vector<char> seen(g.distinct, 0);
  double logw = 0.0;
  for (int j = 0; j < g.groups; ++j)
    for (int i = 0; i < g.sizes[j]; ++i) {
      int d = g.labels[j][i];
      double w = p.cond_step(j, d, !seen[d - 1], rng);
      if (!(w > 0.0)) return {p.state(), kNegInf};
      seen[d - 1] = 1;
      logw += std::log(w);
    }
  return {p.state(), logw};
}

void check_group(const MsspSpec& spec, int group) {
  if (group < 0 || group >= group_count(spec))
    throw std::invalid_argument("group index out of range");
}

void check_sample(const MsspSpec& spec, const GroupedSample& g) {
  validate(g);
  if (g.groups != group_count(spec))
    throw std::invalid_argument("sample group count does not match the spec");
}

}  // namespace

int group_count(const MsspSpec& spec) {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IndependentSpec>)
          return static_cast<int>(s.families.size());
        else if constexpr (std::is_same_v<T, AdditiveSpec>)
          return static_cast<int>(s.mix.size());
        else if constexpr (std::is_same_v<T, HierarchicalSpec>)
          return static_cast<int>(s.children.size());
        else
          return s.groups;
      },
      spec);
}

bool regular(const MsspSpec&) {
  // Every construction here mixes species-sampling processes in ways that
  // keep each group's marginal a species-sampling process.
  return true;
}

void validate(const MsspSpec& spec) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IndependentSpec>) {
          if (s.families.empty())
            throw std::invalid_argument("independent spec needs at least one group");
          for (const auto& f : s.families) require_component(f, "independent spec");
        } else if constexpr (std::is_same_v<T, AdditiveSpec>) {
          if (s.mix.empty())
            throw std::invalid_argument("additive spec needs at least one group");
          if (s.idiosyncratic.size() != s.mix.size())
            throw std::invalid_argument(
                "additive spec needs one idiosyncratic family per group");
          for (double eps : s.mix)
            if (!(eps >= 0.0 && eps <= 1.0))
              throw std::invalid_argument("additive mix weights must lie in [0, 1]");
          require_component(s.shared, "additive spec");
          for (const auto& f : s.idiosyncratic) require_component(f, "additive spec");
        } else if constexpr (std::is_same_v<T, HierarchicalSpec>) {
          if (s.children.empty())
            throw std::invalid_argument("hierarchical spec needs at least one group");
          require_component(s.root, "hierarchical spec");
          for (const auto& f : s.children) require_component(f, "hierarchical spec");
        } else {
          if (s.groups < 1)
            throw std::invalid_argument("nested spec needs at least one group");
          require_component(s.root, "nested spec");
          require_component(s.within, "nested spec");
        }
      },
      spec);
}

void validate_state(const MsspSpec& spec, const GroupedSample& grouped,
                    const AugmentedState& state) {
  validate(spec);
  check_sample(spec, grouped);
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IndependentSpec>) {
          if (!std::holds_alternative<IndependentState>(state))
            throw std::invalid_argument("latent state type does not match the spec");
        } else if constexpr (std::is_same_v<T, AdditiveSpec>) {
          const auto* st = std::get_if<AdditiveState>(&state);
          if (!st) throw std::invalid_argument("latent state type does not match the spec");
          if (static_cast<int>(st->component_of_species.size()) != grouped.distinct)
            throw std::invalid_argument("additive state needs one component per species");
          for (int c : st->component_of_species)
            if (c < 0 || c > grouped.groups)
              throw std::invalid_argument("additive component out of range");
        } else if constexpr (std::is_same_v<T, HierarchicalSpec>) {
          const auto* st = std::get_if<HierState>(&state);
          if (!st) throw std::invalid_argument("latent state type does not match the spec");
          if (static_cast<int>(st->table_of_obs.size()) != grouped.groups ||
              static_cast<int>(st->dish_of_table.size()) != grouped.groups)
            throw std::invalid_argument("hierarchical state has the wrong group count");
          for (int j = 0; j < grouped.groups; ++j) {
            const auto& tables = st->table_of_obs[j];
            const auto& dishes = st->dish_of_table[j];
            if (static_cast<int>(tables.size()) != grouped.sizes[j])
              throw std::invalid_argument("hierarchical state has the wrong size");
            int num_tables = static_cast<int>(dishes.size());
            std::vector<int> first(num_tables, -1);
            std::vector<int> count(num_tables, 0);
            for (int i = 0; i < static_cast<int>(tables.size()); ++i) {
              int t = tables[i];
              if (t < 0 || t >= num_tables)
                throw std::invalid_argument("hierarchical table index out of range");
              if (dishes[t] != grouped.labels[j][i])
                throw std::invalid_argument(
                    "hierarchical table dish disagrees with its observations");
              if (first[t] < 0) first[t] = i;
              count[t]++;
            }
            for (int t = 0; t < num_tables; ++t) {
              if (count[t] == 0)
                throw std::invalid_argument("hierarchical state has an empty table");
              if (t > 0 && first[t] < first[t - 1])
                throw std::invalid_argument(
                    "hierarchical tables must be numbered by first customer");
              if (dishes[t] < 1 || dishes[t] > grouped.distinct)
                throw std::invalid_argument("hierarchical dish out of range");
            }
          }
        } else {
          const auto* st = std::get_if<NestedState>(&state);
          if (!st) throw std::invalid_argument("latent state type does not match the spec");
          if (static_cast<int>(st->cluster_of_group.size()) != grouped.groups)
            throw std::invalid_argument("nested state has the wrong group count");
          int max_label = 0;
          for (int j = 0; j < grouped.groups; ++j) {
            int r = st->cluster_of_group[j];
            if (grouped.sizes[j] == 0) {
              if (r != 0)
                throw std::invalid_argument("empty groups must stay unassigned");
              continue;
            }
            if (r < 1 || r > max_label + 1)
              throw std::invalid_argument(
                  "nested clusters must be labeled in order of first assignment");
            max_label = std::max(max_label, r);
          }
        }
      },
      spec);
}

SampledArray sample_array(const MsspSpec& spec, std::span<const int> sizes,
                          Rng& rng) {
  validate(spec);
  if (static_cast<int>(sizes.size()) != group_count(spec))
    throw std::invalid_argument("sample_array: one size per group required");
  for (int n : sizes)
    if (n < 0) throw std::invalid_argument("sample_array: negative group size");
  return with_proc(spec, [&](auto& p) {
    SampledArray out;
    out.sample.groups = static_cast<int>(sizes.size());
    out.sample.sizes.assign(sizes.begin(), sizes.end());
    out.sample.labels.resize(sizes.size());
    for (int j = 0; j < static_cast<int>(sizes.size()); ++j)
      for (int i = 0; i < sizes[j]; ++i)
        out.sample.labels[j].push_back(p.free_step(j, rng));
    out.sample.distinct = p.next_id - 1;
    out.sample.freq.assign(sizes.size(), std::vector<int>(out.sample.distinct, 0));
    for (int j = 0; j < static_cast<int>(sizes.size()); ++j)
      for (int d : out.sample.labels[j]) out.sample.freq[j][d - 1]++;
    out.latent = p.state();
    validate(out.sample);
    return out;
  });
}

double log_peppf_augmented(const MsspSpec& spec, const GroupedSample& grouped,
                           const AugmentedState& state) {
  validate_state(spec, grouped, state);
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IndependentSpec>) {
          for (int d = 1; d <= grouped.distinct; ++d)
            if (static_cast<int>(grouped.groups_of_species(d).size()) > 1)
              return kNegInf;
          double lp = 0.0;
          for (int j = 0; j < grouped.groups; ++j) {
            std::vector<int> comp;
            for (int m : grouped.freq[j])
              if (m > 0) comp.push_back(m);
            lp += log_eppf(s.families[j], comp);
          }
          return lp;
        } else if constexpr (std::is_same_v<T, AdditiveSpec>) {
          const auto& cs = std::get<AdditiveState>(state).component_of_species;
          std::vector<std::vector<int>> comp(grouped.groups + 1);
          for (int d = 1; d <= grouped.distinct; ++d) {
            int c = cs[d - 1];
            for (int j = 0; j < grouped.groups; ++j)
              if (grouped.freq[j][d - 1] > 0 && c != 0 && c != j + 1) return kNegInf;
            comp[c].push_back(grouped.species_total(d));
          }
          double lp = 0.0;
          for (int j = 0; j < grouped.groups; ++j) {
            int shared_obs = 0;
            for (int d = 1; d <= grouped.distinct; ++d)
              if (cs[d - 1] == 0) shared_obs += grouped.freq[j][d - 1];
            int own_obs = grouped.sizes[j] - shared_obs;
            lp += count_log(shared_obs, s.mix[j]);
            lp += count_log(own_obs, 1.0 - s.mix[j]);
          }
          if (std::isinf(lp)) return kNegInf;
          lp += log_eppf(s.shared, comp[0]);
          for (int j = 0; j < grouped.groups; ++j)
            lp += log_eppf(s.idiosyncratic[j], comp[j + 1]);
          return lp;
        } else if constexpr (std::is_same_v<T, HierarchicalSpec>) {
          const auto& st = std::get<HierState>(state);
          std::vector<int> dish_tables(grouped.distinct, 0);
          double lp = 0.0;
          for (int j = 0; j < grouped.groups; ++j) {
            std::vector<int> tsize(st.dish_of_table[j].size(), 0);
            for (int t : st.table_of_obs[j]) tsize[t]++;
            for (int d : st.dish_of_table[j]) dish_tables[d - 1]++;
            lp += log_eppf(s.children[j], tsize);
          }
          lp += log_eppf(s.root, dish_tables);
          return lp;
        } else {
          const auto& cl = std::get<NestedState>(state).cluster_of_group;
          int clusters = 0;
          for (int r : cl) clusters = std::max(clusters, r);
          std::vector<int> csize(clusters, 0);
          for (int r : cl)
            if (r > 0) csize[r - 1]++;
          std::vector<std::vector<int>> comp(clusters);
          for (int d = 1; d <= grouped.distinct; ++d) {
            int r = -1;
            for (int j : grouped.groups_of_species(d)) {
              if (r >= 0 && cl[j] != r) return kNegInf;
              r = cl[j];
            }
            comp[r - 1].push_back(grouped.species_total(d));
          }
          double lp = log_eppf(s.root, csize);
          for (const auto& c : comp) lp += log_eppf(s.within, c);
          return lp;
        }
      },
      spec);
}

std::vector<AugmentedState> enumerate_latent_states(const MsspSpec& spec,
                                                    const GroupedSample& grouped) {
  validate(spec);
  check_sample(spec, grouped);
  if (grouped.total() > 10)
    throw std::invalid_argument("latent enumeration is limited to 10 observations");
  return std::visit(
      [&](const auto& s) -> std::vector<AugmentedState> {
        using T = std::decay_t<decltype(s)>;
        std::vector<AugmentedState> out;
        if constexpr (std::is_same_v<T, IndependentSpec>) {
          out.push_back(IndependentState{});
        } else if constexpr (std::is_same_v<T, AdditiveSpec>) {
          // Species seen in several groups must be shared; the rest toggle
          // between shared and their own group's component.
          std::vector<int> base(grouped.distinct, 0);
          std::vector<int> single;
          for (int d = 1; d <= grouped.distinct; ++d) {
            auto rows = grouped.groups_of_species(d);
            if (rows.size() == 1) single.push_back(d);
          }
          for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << single.size());
               ++mask) {
            AdditiveState st;
            st.component_of_species = base;
            for (std::size_t i = 0; i < single.size(); ++i)
              if (mask >> i & 1)
                st.component_of_species[single[i] - 1] =
                    grouped.groups_of_species(single[i])[0] + 1;
            out.push_back(std::move(st));
          }
        } else if constexpr (std::is_same_v<T, HierarchicalSpec>) {
          // One seating choice per (group, species) cell, combined over cells.
          struct Cell {
            int group;
            int species;
            std::vector<int> positions;
            std::vector<SetPartition> partitions;
          };
          std::vector<Cell> cells;
          for (int j = 0; j < grouped.groups; ++j)
            for (int d = 1; d <= grouped.distinct; ++d) {
              Cell c{j, d, {}, {}};
              for (int i = 0; i < grouped.sizes[j]; ++i)
                if (grouped.labels[j][i] == d) c.positions.push_back(i);
              if (c.positions.empty()) continue;
              for_each_partition(static_cast<int>(c.positions.size()),
                                 [&](const SetPartition& p) { c.partitions.push_back(p); });
              cells.push_back(std::move(c));
            }
          std::vector<std::size_t> choice(cells.size(), 0);
          while (true) {
            HierState st;
            st.table_of_obs.assign(grouped.groups,
                                   std::vector<int>(0));
            st.dish_of_table.assign(grouped.groups, {});
            for (int j = 0; j < grouped.groups; ++j) {
              st.table_of_obs[j].assign(grouped.sizes[j], -1);
              // first obs position, dish, member positions
              struct Table {
                int first;
                int dish;
                std::vector<int> members;
              };
              std::vector<Table> tables;
              for (std::size_t ci = 0; ci < cells.size(); ++ci) {
                if (cells[ci].group != j) continue;
                const SetPartition& p = cells[ci].partitions[choice[ci]];
                int blocks = p.blocks();
                std::vector<std::vector<int>> members(blocks);
                for (int i = 0; i < p.n(); ++i)
                  members[p.labels[i] - 1].push_back(cells[ci].positions[i]);
                for (auto& m : members)
                  tables.push_back(Table{m.front(), cells[ci].species, std::move(m)});
              }
              std::sort(tables.begin(), tables.end(),
                        [](const Table& a, const Table& b) { return a.first < b.first; });
              for (std::size_t t = 0; t < tables.size(); ++t) {
                st.dish_of_table[j].push_back(tables[t].dish);
                for (int i : tables[t].members)
                  st.table_of_obs[j][i] = static_cast<int>(t);
              }
            }
            out.push_back(st);
            std::size_t ci = 0;
            for (; ci < cells.size(); ++ci) {
              if (++choice[ci] < cells[ci].partitions.size()) break;
              choice[ci] = 0;
            }
            if (ci == cells.size()) break;
          }
        } else {
          std::vector<int> nonempty;
          for (int j = 0; j < grouped.groups; ++j)
            if (grouped.sizes[j] > 0) nonempty.push_back(j);
          if (nonempty.empty()) {
            out.push_back(NestedState{std::vector<int>(grouped.groups, 0)});
            return out;
          }
          for_each_partition(static_cast<int>(nonempty.size()), [&](const SetPartition& p) {
            NestedState st;
            st.cluster_of_group.assign(grouped.groups, 0);
            for (std::size_t i = 0; i < nonempty.size(); ++i)
              st.cluster_of_group[nonempty[i]] = p.labels[i];
            // Groups sharing a species must share a cluster.
            for (int d = 1; d <= grouped.distinct; ++d) {
              auto rows = grouped.groups_of_species(d);
              for (std::size_t i = 1; i < rows.size(); ++i)
                if (st.cluster_of_group[rows[i]] != st.cluster_of_group[rows[0]]) return;
            }
            out.push_back(std::move(st));
          });
        }
        return out;
      },
      spec);
}

double log_peppf(const MsspSpec& spec, const GroupedSample& grouped) {
  std::vector<AugmentedState> states = enumerate_latent_states(spec, grouped);
  std::vector<double> logs;
  logs.reserve(states.size());
  for (const AugmentedState& st : states)
    logs.push_back(log_peppf_augmented(spec, grouped, st));
  return log_sum_exp(logs);
}

McEstimate log_peppf_mc(const MsspSpec& spec, const GroupedSample& grouped,
                        int num_samples, Rng& rng) {
  validate(spec);
  check_sample(spec, grouped);
  if (num_samples < 1) throw std::invalid_argument("log_peppf_mc: num_samples < 1");
  McAccumulator acc;
  for (int s = 0; s < num_samples; ++s) {
    double logw = with_proc(spec, [&](auto& p) { return run_conditional(p, grouped, rng).second; });
    acc.add(std::isinf(logw) ? 0.0 : std::exp(logw));
  }
  return acc.estimate();
}

std::pair<AugmentedState, double> conditional_augmentation(const MsspSpec& spec,
                                                           const GroupedSample& grouped,
                                                           Rng& rng) {
  validate(spec);
  check_sample(spec, grouped);
  return with_proc(spec, [&](auto& p) { return run_conditional(p, grouped, rng); });
}

McEstimate peppf_mc_from_weights(const MsspSpec& spec, const GroupedSample& grouped,
                                 int truncation, int num_samples, Rng& rng) {
  validate(spec);
  check_sample(spec, grouped);
  if (truncation < 1) throw std::invalid_argument("peppf_mc_from_weights: truncation < 1");
  if (num_samples < 1) throw std::invalid_argument("peppf_mc_from_weights: num_samples < 1");
  const int J = grouped.groups;
  const int D = grouped.distinct;

  // One draw = per-group weight rows over a common atom axis.
  auto draw_rows = std::visit(
      [&](const auto& s) -> std::function<std::vector<std::vector<double>>(Rng&)> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IndependentSpec>) {
          std::vector<WeightSampler> samplers;
          for (const auto& f : s.families) samplers.push_back(weight_sampler(f, truncation));
          return [samplers, J](Rng& r) {
            std::vector<std::vector<double>> segs(J);
            int total = 0;
            for (int j = 0; j < J; ++j) {
              segs[j] = samplers[j].draw(r);
              append_dust(segs[j]);
              total += static_cast<int>(segs[j].size());
            }
            std::vector<std::vector<double>> pi(J, std::vector<double>(total, 0.0));
            int off = 0;
            for (int j = 0; j < J; ++j) {
              std::copy(segs[j].begin(), segs[j].end(), pi[j].begin() + off);
              off += static_cast<int>(segs[j].size());
            }
            return pi;
          };
        } else if constexpr (std::is_same_v<T, AdditiveSpec>) {
          WeightSampler shared = weight_sampler(s.shared, truncation);
          std::vector<WeightSampler> own;
          for (const auto& f : s.idiosyncratic) own.push_back(weight_sampler(f, truncation));
          std::vector<double> mix = s.mix;
          return [shared, own, mix, J](Rng& r) {
            std::vector<double> w0 = shared.draw(r);
            append_dust(w0);
            std::vector<std::vector<double>> wj(J);
            int total = static_cast<int>(w0.size());
            for (int j = 0; j < J; ++j) {
              wj[j] = own[j].draw(r);
              append_dust(wj[j]);
              total += static_cast<int>(wj[j].size());
            }
            std::vector<std::vector<double>> pi(J, std::vector<double>(total, 0.0));
            int off = static_cast<int>(w0.size());
            for (int j = 0; j < J; ++j) {
              for (std::size_t h = 0; h < w0.size(); ++h) pi[j][h] = mix[j] * w0[h];
              for (std::size_t h = 0; h < wj[j].size(); ++h)
                pi[j][off + static_cast<int>(h)] = (1.0 - mix[j]) * wj[j][h];
              off += static_cast<int>(wj[j].size());
            }
            return pi;
          };
        } else if constexpr (std::is_same_v<T, HierarchicalSpec>) {
          WeightSampler root = weight_sampler(s.root, truncation);
          std::vector<WeightSampler> child;
          for (const auto& f : s.children) child.push_back(weight_sampler(f, truncation));
          return [root, child, J](Rng& r) {
            std::vector<double> beta = root.draw(r);
            append_dust(beta);
            std::vector<std::vector<double>> pi(J, std::vector<double>(beta.size(), 0.0));
            for (int j = 0; j < J; ++j) {
              std::vector<double> sticks = child[j].draw(r);
              double res = 1.0 - std::accumulate(sticks.begin(), sticks.end(), 0.0);
              if (res > 1e-12) sticks.push_back(res);
              for (double u : sticks) pi[j][draw_categorical(r, beta)] += u;
            }
            return pi;
          };
        } else {
          WeightSampler root = weight_sampler(s.root, truncation);
          WeightSampler within = weight_sampler(s.within, truncation);
          return [root, within, J](Rng& r) {
            std::vector<double> rho = root.draw(r);
            append_dust(rho);
            std::vector<int> pick(J);
            for (int j = 0; j < J; ++j) pick[j] = draw_categorical(r, rho);
            std::vector<int> order(pick);  // distinct picked clusters
            std::sort(order.begin(), order.end());
            order.erase(std::unique(order.begin(), order.end()), order.end());
            std::vector<std::vector<double>> w(order.size());
            std::vector<int> offset(order.size());
            int total = 0;
            for (std::size_t c = 0; c < order.size(); ++c) {
              w[c] = within.draw(r);
              append_dust(w[c]);
              offset[c] = total;
              total += static_cast<int>(w[c].size());
            }
            std::vector<std::vector<double>> pi(J, std::vector<double>(total, 0.0));
            for (int j = 0; j < J; ++j) {
              std::size_t c = std::lower_bound(order.begin(), order.end(), pick[j]) -
                              order.begin();
              std::copy(w[c].begin(), w[c].end(), pi[j].begin() + offset[c]);
            }
            return pi;
          };
        }
      },
      spec);

  McAccumulator acc;
  std::vector<std::vector<double>> x(D);
  for (int s = 0; s < num_samples; ++s) {
    std::vector<std::vector<double>> pi = draw_rows(rng);
    const int H = static_cast<int>(pi.empty() ? 0 : pi[0].size());
    for (int d = 0; d < D; ++d) {
      x[d].assign(H, 1.0);
      for (int j = 0; j < J; ++j) {
        int m = grouped.freq[j][d];
        for (int k = 0; k < m; ++k)
          for (int h = 0; h < H; ++h) x[d][h] *= pi[j][h];
      }
    }
    acc.add(D == 0 ? 1.0 : distinct_tuple_sum(x));
  }
  return acc.estimate();
}

PredictiveWeights mgcrp_predictive(const MsspSpec& spec, const GroupedSample& grouped,
                                   const AugmentedState& state, int group) {
  validate_state(spec, grouped, state);
  check_group(spec, group);
  return with_loaded_proc(spec, grouped, state, [&](auto& p) {
    return p.species_predictive(group, grouped.distinct);
  });
}

PredictiveWeights mgcrp_predictive_exact(const MsspSpec& spec,
                                         const GroupedSample& grouped, int group) {
  check_group(spec, group);
  std::vector<AugmentedState> states = enumerate_latent_states(spec, grouped);
  std::vector<double> logs;
  logs.reserve(states.size());
  for (const AugmentedState& st : states)
    logs.push_back(log_peppf_augmented(spec, grouped, st));
  double norm = log_sum_exp(logs);
  if (std::isinf(norm))
    throw std::invalid_argument("predictive conditioned on a probability-zero array");
  PredictiveWeights out;
  out.existing.assign(grouped.distinct, 0.0);
  out.new_mass = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (std::isinf(logs[i])) continue;
    double w = std::exp(logs[i] - norm);
    PredictiveWeights pr = mgcrp_predictive(spec, grouped, states[i], group);
    for (int d = 0; d < grouped.distinct; ++d) out.existing[d] += w * pr.existing[d];
    out.new_mass += w * pr.new_mass;
  }
  return out;
}

EppfFamily marginal_family(const MsspSpec& spec, int group) {
  validate(spec);
  check_group(spec, group);
  return std::visit(
      [&](const auto& s) -> EppfFamily {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IndependentSpec>) {
          return s.families[group];
        } else if constexpr (std::is_same_v<T, AdditiveSpec>) {
          double eps = s.mix[group];
          if (eps == 0.0) return s.idiosyncratic[group];
          if (eps == 1.0) return s.shared;
          WeightSampler shared = weight_sampler(s.shared, kMarginalTruncation);
          WeightSampler own = weight_sampler(s.idiosyncratic[group], kMarginalTruncation);
          WeightSampler mixed;
          mixed.truncation = shared.truncation + own.truncation;
          mixed.draw = [shared, own, eps](Rng& rng) {
            std::vector<double> w = shared.draw(rng);
            for (double& v : w) v *= eps;
            std::vector<double> w2 = own.draw(rng);
            for (double v : w2) w.push_back((1.0 - eps) * v);
            return w;
          };
          return EmpiricalWeightsFamily{mixed};
        } else if constexpr (std::is_same_v<T, HierarchicalSpec>) {
          WeightSampler root = weight_sampler(s.root, kMarginalTruncation);
          WeightSampler child = weight_sampler(s.children[group], kMarginalTruncation);
          WeightSampler out;
          out.truncation = root.truncation + kDustAtoms;
          out.draw = [root, child](Rng& rng) {
            std::vector<double> beta = root.draw(rng);
            append_dust(beta);
            std::vector<double> sticks = child.draw(rng);
            double res = 1.0 - std::accumulate(sticks.begin(), sticks.end(), 0.0);
            if (res > 1e-12) sticks.push_back(res);
            std::vector<double> pi(beta.size(), 0.0);
            for (double u : sticks) pi[draw_categorical(rng, beta)] += u;
            return pi;
          };
          return EmpiricalWeightsFamily{out};
        } else {
          return s.within;
        }
      },
      spec);
}

void append_observation(const MsspSpec& spec, GroupedSample& grouped,
                        AugmentedState& state, int group, int species, Rng& rng) {
  validate_state(spec, grouped, state);
  check_group(spec, group);
  if (species < 0 || species > grouped.distinct)
    throw std::invalid_argument("append_observation: species out of range");
  bool is_new = species == 0;
  int d = is_new ? grouped.distinct + 1 : species;
  with_loaded_proc(spec, grouped, state, [&](auto& p) {
    double w = p.cond_step(group, d, is_new, rng);
    if (!(w > 0.0))
      throw std::invalid_argument(
          "append_observation: the observation has probability zero under the model");
    state = p.state();
    return 0;
  });
  grouped.labels[group].push_back(d);
  grouped.sizes[group]++;
  if (is_new) {
    grouped.distinct = d;
    for (auto& row : grouped.freq) row.push_back(0);
  }
  grouped.freq[group][d - 1]++;
}

}  // namespace mssp
