// Apache License, Version 2.0, refer to LICENSE.txt

#include "mssp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "mssp/eppf.hpp"

namespace mssp {

namespace {

double pair_tie(const EppfFamily& family) {
  return std::exp(log_eppf(family, {2}));
}

TieValues with_correlation(double within_j, double within_k, double across) {
  if (!(within_j > 0.0) || !(within_k > 0.0))
    throw std::invalid_argument(
        "correlation undefined: a within-group tie probability is zero");
  TieValues t;
  t.within_j = within_j;
  t.within_k = within_k;
  t.across = across;
  t.correlation = across / std::sqrt(within_j * within_k);
  return t;
}

TieValues hier_ties(double child2_j, double child2_k, double root2) {
  return with_correlation(child2_j + (1.0 - child2_j) * root2,
                          child2_k + (1.0 - child2_k) * root2, root2);
}

TieValues nested_ties(double root2, double within2) {
  return with_correlation(within2, within2, root2 * within2);
}

TieValues additive_ties(double eps_j, double eps_k, double shared2,
                        double idio2_j, double idio2_k) {
  double wj = eps_j * eps_j * shared2 + (1.0 - eps_j) * (1.0 - eps_j) * idio2_j;
  double wk = eps_k * eps_k * shared2 + (1.0 - eps_k) * (1.0 - eps_k) * idio2_k;
  return with_correlation(wj, wk, eps_j * eps_k * shared2);
}

// Strict parameter fetching: every key must be known and every known key
// supplied.
class ParamReader {
 public:
  ParamReader(std::string model, const std::map<std::string, double>& params)
      : model_(std::move(model)), params_(params) {}

  double operator()(const std::string& key) {
    auto it = params_.find(key);
    if (it == params_.end())
      throw std::invalid_argument("model '" + model_ + "' needs parameter '" + key + "'");
    used_.insert(key);
    return it->second;
  }

  void finish() const {
    for (const auto& [key, value] : params_)
      if (!used_.count(key))
        throw std::invalid_argument("model '" + model_ + "' does not take parameter '" +
                                    key + "'");
  }

 private:
  std::string model_;
  const std::map<std::string, double>& params_;
  std::set<std::string> used_;
};

double dp_tie(double conc) {
  if (!(conc > 0.0)) throw std::invalid_argument("concentration must be positive");
  return 1.0 / (1.0 + conc);
}

double py_tie(double discount, double conc) {
  if (!(discount >= 0.0 && discount < 1.0))
    throw std::invalid_argument("discount must lie in [0, 1)");
  if (!(conc > -discount))
    throw std::invalid_argument("concentration must exceed -discount");
  return (1.0 - discount) / (1.0 + conc);
}

double dm_tie(double categories, double tau) {
  if (!(categories >= 1.0)) throw std::invalid_argument("categories must be >= 1");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  return (1.0 + tau) / (1.0 + tau * categories);
}

double gn_tie(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("gamma must lie in (0, 1)");
  return 2.0 * gamma / (1.0 + gamma);
}

double check_eps(double eps) {
  if (!(eps >= 0.0 && eps <= 1.0))
    throw std::invalid_argument("mix weight must lie in [0, 1]");
  return eps;
}

double check_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
  return p;
}

}  // namespace

TieValues closed_form_ties(const MsspSpec& spec, int j, int k) {
  validate(spec);
  int J = group_count(spec);
  if (j < 0 || j >= J || k < 0 || k >= J)
    throw std::invalid_argument("group index out of range");
  return std::visit(
      [&](const auto& s) -> TieValues {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IndependentSpec>) {
          double wj = pair_tie(s.families[j]);
          double wk = pair_tie(s.families[k]);
          TieValues t = with_correlation(wj, wk, j == k ? wj : 0.0);
          if (j == k) t.correlation = 1.0;
          return t;
        } else if constexpr (std::is_same_v<T, AdditiveSpec>) {
          TieValues t = additive_ties(s.mix[j], s.mix[k], pair_tie(s.shared),
                                      pair_tie(s.idiosyncratic[j]),
                                      pair_tie(s.idiosyncratic[k]));
          if (j == k) {
            t.across = t.within_j;
            t.correlation = 1.0;
          }
          return t;
        } else if constexpr (std::is_same_v<T, HierarchicalSpec>) {
          TieValues t = hier_ties(pair_tie(s.children[j]), pair_tie(s.children[k]),
                                  pair_tie(s.root));
          if (j == k) {
            t.across = t.within_j;
            t.correlation = 1.0;
          }
          return t;
        } else {
          TieValues t = nested_ties(pair_tie(s.root), pair_tie(s.within));
          if (j == k) {
            t.across = t.within_j;
            t.correlation = 1.0;
          }
          return t;
        }
      },
      spec);
}

TieEstimates tie_probabilities_mc(const MsspSpec& spec, int j, int k,
                                  int num_samples, Rng& rng) {
  validate(spec);
  int J = group_count(spec);
  if (j < 0 || j >= J || k < 0 || k >= J)
    throw std::invalid_argument("group index out of range");
  if (j == k) throw std::invalid_argument("tie probabilities need two distinct groups");
  if (num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");

  std::vector<int> sizes(J, 0);
  sizes[j] = sizes[k] = 2;
  const int batches = std::min(20, num_samples);
  std::vector<long> bwj(batches, 0), bwk(batches, 0), bax(batches, 0), bn(batches, 0);
  long wj = 0, wk = 0, ax = 0;
  for (int s = 0; s < num_samples; ++s) {
    SampledArray arr = sample_array(spec, sizes, rng);
    const auto& lj = arr.sample.labels[j];
    const auto& lk = arr.sample.labels[k];
    int b = s % batches;
    bn[b]++;
    if (lj[0] == lj[1]) wj++, bwj[b]++;
    if (lk[0] == lk[1]) wk++, bwk[b]++;
    if (lj[0] == lk[0]) ax++, bax[b]++;
  }
  auto prop = [&](long count) {
    double p = static_cast<double>(count) / num_samples;
    return McEstimate{p, proportion_se(p, num_samples)};
  };
  TieEstimates est;
  est.within_j = prop(wj);
  est.within_k = prop(wk);
  est.across = prop(ax);
  if (wj == 0 || wk == 0)
    throw std::invalid_argument(
        "correlation undefined: no within-group ties were observed");
  est.correlation.value =
      est.across.value / std::sqrt(est.within_j.value * est.within_k.value);
  McAccumulator corr_batches;
  for (int b = 0; b < batches; ++b) {
    if (bwj[b] == 0 || bwk[b] == 0 || bn[b] == 0) continue;
    double cj = static_cast<double>(bwj[b]) / bn[b];
    double ck = static_cast<double>(bwk[b]) / bn[b];
    double ca = static_cast<double>(bax[b]) / bn[b];
    corr_batches.add(ca / std::sqrt(cj * ck));
  }
  est.correlation.se =
      corr_batches.count() >= 2 ? corr_batches.estimate().se : est.across.se;
  return est;
}

double correlation(const MsspSpec& spec, int j, int k,
                   const CorrelationMethod& method) {
  if (std::holds_alternative<ClosedFormMethod>(method))
    return closed_form_ties(spec, j, k).correlation;
  const auto& mc = std::get<MonteCarloMethod>(method);
  if (mc.rng == nullptr)
    throw std::invalid_argument("Monte Carlo correlation needs a random stream");
  if (j == k) return 1.0;
  return tie_probabilities_mc(spec, j, k, mc.num_samples, *mc.rng).correlation.value;
}

TieValues closed_form_registry(const std::string& model,
                               const std::map<std::string, double>& params) {
  ParamReader p(model, params);
  TieValues t;
  if (model == "hdp") {
    double child = dp_tie(p("alpha"));
    t = hier_ties(child, child, dp_tie(p("alpha0")));
  } else if (model == "hpy") {
    double child = py_tie(p("sigma"), p("alpha"));
    t = hier_ties(child, child, py_tie(p("sigma0"), p("alpha0")));
  } else if (model == "hdm") {
    double child = dm_tie(p("m"), p("tau"));
    t = hier_ties(child, child, dm_tie(p("m0"), p("tau0")));
  } else if (model == "hgn") {
    double child = gn_tie(p("gamma"));
    t = hier_ties(child, child, gn_tie(p("gamma0")));
  } else if (model == "hssp") {
    double root2 = check_prob(p("root2"), "root2");
    t = with_correlation(p("child2_j") + p("child11_j") * root2,
                         p("child2_k") + p("child11_k") * root2, root2);
  } else if (model == "ndp") {
    t = nested_ties(dp_tie(p("alpha")), dp_tie(p("beta")));
  } else if (model == "npy") {
    t = nested_ties(py_tie(p("sigma_a"), p("alpha")), py_tie(p("sigma_b"), p("beta")));
  } else if (model == "ndm") {
    t = nested_ties(dm_tie(p("m_a"), p("tau_a")), dm_tie(p("m_b"), p("tau_b")));
  } else if (model == "ngn") {
    t = nested_ties(gn_tie(p("gamma_a")), gn_tie(p("gamma_b")));
  } else if (model == "nssp") {
    t = nested_ties(check_prob(p("root2"), "root2"), check_prob(p("within2"), "within2"));
  } else if (model == "+dp") {
    t = additive_ties(check_eps(p("eps_j")), check_eps(p("eps_k")), dp_tie(p("alpha0")),
                      dp_tie(p("alpha_j")), dp_tie(p("alpha_k")));
  } else if (model == "+py") {
    t = additive_ties(check_eps(p("eps_j")), check_eps(p("eps_k")),
                      py_tie(p("sigma0"), p("alpha0")), py_tie(p("sigma_j"), p("alpha_j")),
                      py_tie(p("sigma_k"), p("alpha_k")));
  } else if (model == "+dm") {
    t = additive_ties(check_eps(p("eps_j")), check_eps(p("eps_k")),
                      dm_tie(p("m0"), p("tau0")), dm_tie(p("m_j"), p("tau_j")),
                      dm_tie(p("m_k"), p("tau_k")));
  } else if (model == "+gn") {
    t = additive_ties(check_eps(p("eps_j")), check_eps(p("eps_k")), gn_tie(p("gamma0")),
                      gn_tie(p("gamma_j")), gn_tie(p("gamma_k")));
  } else if (model == "+ssp") {
    t = additive_ties(check_eps(p("eps_j")), check_eps(p("eps_k")),
                      check_prob(p("shared2"), "shared2"),
                      check_prob(p("idio2_j"), "idio2_j"),
                      check_prob(p("idio2_k"), "idio2_k"));
  } else if (model == "hhdp") {
    double alpha = p("alpha");
    double beta = p("beta");
    double beta0 = p("beta0");
    if (!(alpha > 0.0 && beta > 0.0 && beta0 > 0.0))
      throw std::invalid_argument("hhdp concentrations must be positive");
    double within = (1.0 + beta + beta0) / ((1.0 + beta) * (1.0 + beta0));
    t.within_j = t.within_k = within;
    t.across = 1.0 / (1.0 + beta0) +
               beta0 / ((1.0 + alpha) * (1.0 + beta) * (1.0 + beta0));
    t.correlation = 1.0 - alpha * beta0 / ((1.0 + alpha) * (1.0 + beta + beta0));
  } else if (model == "ncam") {
    double alpha = p("alpha");
    double beta = p("beta");
    if (!(alpha > 0.0 && beta > 0.0))
      throw std::invalid_argument("ncam concentrations must be positive");
    t.within_j = t.within_k = 1.0 / (1.0 + beta);
    t.across = (1.0 / (1.0 + alpha)) * (1.0 / (1.0 + beta) + alpha / (2.0 * beta + 1.0));
    t.correlation = 1.0 - beta * alpha / ((2.0 * beta + 1.0) * (1.0 + alpha));
  } else if (model == "gmdp" || model == "gmsigma") {
    throw std::invalid_argument("model '" + model +
                                "' is recognized but unsupported (its closed form needs "
                                "special-function constants)");
  } else {
    throw std::invalid_argument("unknown model '" + model + "'");
  }
  p.finish();
  return t;
}

std::vector<double> extreme_trend_check(const std::string& model,
                                        TrendDirection direction) {
  using Map = std::map<std::string, double>;
  std::vector<Map> path;
  bool exch = direction == TrendDirection::kExchangeable;
  auto no_path = [&]() {
    throw std::invalid_argument("model '" + model + "' has no " +
                                (exch ? std::string("exchangeable")
                                      : std::string("independence")) +
                                " parameter path");
  };
  const std::vector<double> up = {1.0, 10.0, 100.0, 1000.0};
  const std::vector<double> down = {1.0, 0.1, 0.01, 0.001};
  const std::vector<double> eps_up = {0.5, 0.9, 0.99, 0.999};
  const std::vector<double> eps_down = {0.5, 0.1, 0.01, 0.001};

  if (model == "hdp") {
    for (double v : up)
      path.push_back(exch ? Map{{"alpha", v}, {"alpha0", 1.0}}
                          : Map{{"alpha", 1.0}, {"alpha0", v}});
  } else if (model == "hpy") {
    for (double v : up) {
      Map m{{"sigma", 0.25}, {"sigma0", 0.25}};
      if (exch) {
        m["alpha"] = v;
        m["alpha0"] = 1.0;
      } else {
        m["alpha"] = 1.0;
        m["alpha0"] = v;
      }
      path.push_back(m);
    }
  } else if (model == "hdm") {
    for (double v : {2.0, 10.0, 100.0, 1000.0})
      path.push_back(exch ? Map{{"m", v}, {"tau", 1.0}, {"m0", 3.0}, {"tau0", 1.0}}
                          : Map{{"m", 3.0}, {"tau", 1.0}, {"m0", v}, {"tau0", 1.0}});
  } else if (model == "hgn") {
    for (double v : exch ? eps_up : eps_down)
      path.push_back(Map{{"gamma", 0.5}, {"gamma0", v}});
  } else if (model == "ndp") {
    if (!exch) no_path();
    for (double v : down) path.push_back(Map{{"alpha", v}, {"beta", 1.0}});
  } else if (model == "npy") {
    if (!exch) no_path();
    for (double v : {0.5, 0.1, 0.01, 0.001})
      path.push_back(Map{{"sigma_a", v}, {"alpha", v}, {"sigma_b", 0.25}, {"beta", 1.0}});
  } else if (model == "ndm") {
    if (!exch) no_path();
    for (double v : {4.0, 3.0, 2.0, 1.0})
      path.push_back(Map{{"m_a", v}, {"tau_a", 1.0}, {"m_b", 3.0}, {"tau_b", 1.0}});
  } else if (model == "ngn") {
    if (!exch) no_path();
    for (double v : eps_up) path.push_back(Map{{"gamma_a", v}, {"gamma_b", 0.5}});
  } else if (model == "+dp") {
    for (double v : exch ? eps_up : eps_down)
      path.push_back(Map{{"eps_j", v},
                         {"eps_k", v},
                         {"alpha0", 1.0},
                         {"alpha_j", 1.0},
                         {"alpha_k", 1.0}});
  } else if (model == "+py") {
    for (double v : exch ? eps_up : eps_down)
      path.push_back(Map{{"eps_j", v},
                         {"eps_k", v},
                         {"sigma0", 0.25},
                         {"alpha0", 1.0},
                         {"sigma_j", 0.25},
                         {"alpha_j", 1.0},
                         {"sigma_k", 0.25},
                         {"alpha_k", 1.0}});
  } else if (model == "+dm") {
    for (double v : exch ? eps_up : eps_down)
      path.push_back(Map{{"eps_j", v},
                         {"eps_k", v},
                         {"m0", 3.0},
                         {"tau0", 1.0},
                         {"m_j", 3.0},
                         {"tau_j", 1.0},
                         {"m_k", 3.0},
                         {"tau_k", 1.0}});
  } else if (model == "+gn") {
    for (double v : exch ? eps_up : eps_down)
      path.push_back(Map{{"eps_j", v},
                         {"eps_k", v},
                         {"gamma0", 0.5},
                         {"gamma_j", 0.5},
                         {"gamma_k", 0.5}});
  } else if (model == "hhdp") {
    if (exch)
      for (double v : down) path.push_back(Map{{"alpha", v}, {"beta", 1.0}, {"beta0", 1.0}});
    else
      for (double v : up) path.push_back(Map{{"alpha", v}, {"beta", 1.0}, {"beta0", v}});
  } else if (model == "ncam") {
    if (!exch) no_path();  // the ratio stays above one half
    for (double v : down) path.push_back(Map{{"alpha", v}, {"beta", 1.0}});
  } else {
    no_path();
  }

  std::vector<double> corr;
  for (const Map& m : path) corr.push_back(closed_form_registry(model, m).correlation);
  for (std::size_t i = 1; i < corr.size(); ++i) {
    bool ok = exch ? corr[i] > corr[i - 1] : corr[i] < corr[i - 1];
    if (!ok)
      throw std::runtime_error("correlation path for '" + model +
                               "' is not monotone toward its limit");
  }
  return corr;
}

TieReport tie_report_closed_form(const MsspSpec& spec) {
  int J = group_count(spec);
  TieReport r;
  r.within.resize(J);
  r.across.assign(J, std::vector<double>(J, 0.0));
  r.correlation.assign(J, std::vector<double>(J, 1.0));
  for (int j = 0; j < J; ++j) r.within[j] = closed_form_ties(spec, j, j).within_j;
  for (int j = 0; j < J; ++j) {
    r.across[j][j] = r.within[j];
    for (int k = j + 1; k < J; ++k) {
      TieValues t = closed_form_ties(spec, j, k);
      r.across[j][k] = r.across[k][j] = t.across;
      r.correlation[j][k] = r.correlation[k][j] = t.correlation;
    }
  }
  return r;
}

TieReport tie_report_mc(const MsspSpec& spec, int num_samples, Rng& rng) {
  validate(spec);
  if (num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");
  int J = group_count(spec);
  std::vector<int> sizes(J, 2);
  const int batches = std::min(20, num_samples);
  std::vector<std::vector<long>> wj(J, std::vector<long>(batches, 0));
  std::vector<std::vector<std::vector<long>>> ax(
      J, std::vector<std::vector<long>>(J, std::vector<long>(batches, 0)));
  std::vector<long> bn(batches, 0);
  for (int s = 0; s < num_samples; ++s) {
    SampledArray arr = sample_array(spec, sizes, rng);
    int b = s % batches;
    bn[b]++;
    for (int j = 0; j < J; ++j)
      if (arr.sample.labels[j][0] == arr.sample.labels[j][1]) wj[j][b]++;
    for (int j = 0; j < J; ++j)
      for (int k = j + 1; k < J; ++k)
        if (arr.sample.labels[j][0] == arr.sample.labels[k][0]) ax[j][k][b]++;
  }
  TieReport r;
  r.monte_carlo = true;
  r.num_samples = num_samples;
  r.within.resize(J);
  r.within_se.resize(J);
  r.across.assign(J, std::vector<double>(J, 0.0));
  r.across_se.assign(J, std::vector<double>(J, 0.0));
  r.correlation.assign(J, std::vector<double>(J, 1.0));
  r.correlation_se.assign(J, std::vector<double>(J, 0.0));
  auto total = [&](const std::vector<long>& per_batch) {
    long t = 0;
    for (long v : per_batch) t += v;
    return t;
  };
  for (int j = 0; j < J; ++j) {
    double p = static_cast<double>(total(wj[j])) / num_samples;
    r.within[j] = p;
    r.within_se[j] = proportion_se(p, num_samples);
    r.across[j][j] = p;
    r.across_se[j][j] = r.within_se[j];
  }
  for (int j = 0; j < J; ++j)
    for (int k = j + 1; k < J; ++k) {
      double a = static_cast<double>(total(ax[j][k])) / num_samples;
      double a_se = proportion_se(a, num_samples);
      r.across[j][k] = r.across[k][j] = a;
      r.across_se[j][k] = r.across_se[k][j] = a_se;
      if (r.within[j] > 0.0 && r.within[k] > 0.0) {
        double c = a / std::sqrt(r.within[j] * r.within[k]);
        McAccumulator cb;
        for (int b = 0; b < batches; ++b) {
          if (wj[j][b] == 0 || wj[k][b] == 0 || bn[b] == 0) continue;
          double pj = static_cast<double>(wj[j][b]) / bn[b];
          double pk = static_cast<double>(wj[k][b]) / bn[b];
          double pa = static_cast<double>(ax[j][k][b]) / bn[b];
          cb.add(pa / std::sqrt(pj * pk));
        }
        r.correlation[j][k] = r.correlation[k][j] = c;
        double c_se = cb.count() >= 2 ? cb.estimate().se : a_se;
        r.correlation_se[j][k] = r.correlation_se[k][j] = c_se;
      } else {
        r.correlation[j][k] = r.correlation[k][j] =
            std::numeric_limits<double>::quiet_NaN();
      }
    }
  return r;
}

McEstimate marginal_moment(const MsspSpec& spec, int j, double p0A, int q,
                           int num_samples, Rng& rng) {
  validate(spec);
  int J = group_count(spec);
  if (j < 0 || j >= J) throw std::invalid_argument("group index out of range");
  check_prob(p0A, "p0A");
  if (q < 1) throw std::invalid_argument("q must be >= 1");
  if (num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");
  std::vector<int> sizes(J, 0);
  sizes[j] = q;
  McAccumulator acc;
  for (int s = 0; s < num_samples; ++s) {
    SampledArray arr = sample_array(spec, sizes, rng);
    acc.add(std::pow(p0A, arr.sample.distinct));
  }
  return acc.estimate();
}

McEstimate mixed_moment(const MsspSpec& spec, const std::vector<int>& q,
                        double p0A, int num_samples, Rng& rng) {
  validate(spec);
  int J = group_count(spec);
  if (static_cast<int>(q.size()) != J)
    throw std::invalid_argument("one exponent per group required");
  int total = 0;
  for (int v : q) {
    if (v < 0) throw std::invalid_argument("exponents must be non-negative");
    total += v;
  }
  if (total == 0) throw std::invalid_argument("at least one exponent must be positive");
  check_prob(p0A, "p0A");
  if (num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");
  McAccumulator acc;
  for (int s = 0; s < num_samples; ++s) {
    SampledArray arr = sample_array(spec, q, rng);
    acc.add(std::pow(p0A, arr.sample.distinct));
  }
  return acc.estimate();
}

McEstimate disjoint_joint_moment(const MsspSpec& spec, const std::vector<int>& q,
                                 const std::vector<double>& p0_masses,
                                 int num_samples, Rng& rng) {
  validate(spec);
  int J = group_count(spec);
  if (static_cast<int>(q.size()) != J)
    throw std::invalid_argument("one exponent per group required");
  if (static_cast<int>(p0_masses.size()) != J)
    throw std::invalid_argument("one set mass per group required");
  for (int v : q)
    if (v < 0) throw std::invalid_argument("exponents must be non-negative");
  for (double m : p0_masses) check_prob(m, "set mass");
  for (int a = 0; a < J; ++a)
    for (int b = a + 1; b < J; ++b)
      if (p0_masses[a] + p0_masses[b] > 1.0)
        throw std::invalid_argument(
            "set masses must pairwise sum to at most 1 (disjoint sets)");
  if (num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");
  McAccumulator acc;
  for (int s = 0; s < num_samples; ++s) {
    SampledArray arr = sample_array(spec, q, rng);
    bool shared = false;
    for (int d = 1; d <= arr.sample.distinct && !shared; ++d)
      shared = arr.sample.groups_of_species(d).size() > 1;
    if (shared) {
      acc.add(0.0);
      continue;
    }
    double v = 1.0;
    for (int j = 0; j < J; ++j) {
      if (q[j] == 0) continue;
      int kj = 0;
      for (int d = 1; d <= arr.sample.distinct; ++d)
        if (arr.sample.freq[j][d - 1] > 0) kj++;
      v *= std::pow(p0_masses[j], kj);
    }
    acc.add(v);
  }
  return acc.estimate();
}

std::vector<McEstimate> discovery_curve(const MsspSpec& spec, int j, int k,
                                        int n_max, int num_samples, Rng& rng) {
  validate(spec);
  int J = group_count(spec);
  if (j < 0 || j >= J || k < 0 || k >= J)
    throw std::invalid_argument("group index out of range");
  if (j == k) throw std::invalid_argument("discovery curves need two distinct groups");
  if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
  if (num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");
  std::vector<int> sizes(J, 0);
  sizes[j] = 1;
  sizes[k] = n_max;
  std::vector<McAccumulator> acc(n_max);
  for (int s = 0; s < num_samples; ++s) {
    SampledArray arr = sample_array(spec, sizes, rng);
    int d = arr.sample.labels[j][0];
    bool seen = false;
    for (int n = 1; n <= n_max; ++n) {
      seen = seen || arr.sample.labels[k][n - 1] == d;
      acc[n - 1].add(seen ? 0.0 : 1.0);
    }
  }
  std::vector<McEstimate> out;
  out.reserve(n_max);
  for (auto& a : acc) out.push_back(a.estimate());
  return out;
}

}  // namespace mssp
