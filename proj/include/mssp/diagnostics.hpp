// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "mssp/mc.hpp"
#include "mssp/mssp.hpp"
#include "mssp/rng.hpp"

namespace mssp {

// Tie probabilities for one pair of groups: two draws inside each group, one
// draw from each, and the ratio across / sqrt(within_j * within_k).
struct TieValues {
  double within_j = 0.0;
  double within_k = 0.0;
  double across = 0.0;
  double correlation = 0.0;
};

struct TieEstimates {
  McEstimate within_j;
  McEstimate within_k;
  McEstimate across;
  McEstimate correlation;  // standard error via batch means
};

// Exact tie probabilities assembled from the component families' pair
// partition probabilities.
TieValues closed_form_ties(const MsspSpec& spec, int j, int k);

// Empirical tie frequencies from arrays holding two observations in each of
// groups j and k (j != k).
TieEstimates tie_probabilities_mc(const MsspSpec& spec, int j, int k,
                                  int num_samples, Rng& rng);

struct ClosedFormMethod {};
struct MonteCarloMethod {
  int num_samples = 100000;
  Rng* rng = nullptr;
};
using CorrelationMethod = std::variant<ClosedFormMethod, MonteCarloMethod>;

// across / sqrt(within_j * within_k); throws when a within-tie probability is
// zero (the ratio is undefined).
double correlation(const MsspSpec& spec, int j, int k,
                   const CorrelationMethod& method);

// Named closed-form rows, evaluated as exact rational expressions.  Accepted
// names: hdp, hpy, hdm, hgn, hssp, ndp, npy, ndm, ngn, nssp, +dp, +py, +dm,
// +gn, +ssp, hhdp, ncam.  The hssp/nssp/+ssp rows take caller-supplied pair
// partition probabilities ("...2" keys) instead of family parameters; gmdp
// and gmsigma are recognized but unsupported.  Unknown or out-of-domain
// parameters throw.
TieValues closed_form_registry(const std::string& model,
                               const std::map<std::string, double>& params);

enum class TrendDirection { kIndependence, kExchangeable };

// Correlations along a fixed parameter path approaching the requested
// extreme; throws if the model has no such path or the sequence fails to be
// strictly monotone toward it.
std::vector<double> extreme_trend_check(const std::string& model,
                                        TrendDirection direction);

// Per-group and per-pair summary for tabular output.  across[j][j] equals
// within[j]; the correlation diagonal is 1.  The *_se members are filled only
// by the Monte Carlo builder.
struct TieReport {
  std::vector<double> within;
  std::vector<std::vector<double>> across;
  std::vector<std::vector<double>> correlation;
  bool monte_carlo = false;
  int num_samples = 0;
  std::vector<double> within_se;
  std::vector<std::vector<double>> across_se;
  std::vector<std::vector<double>> correlation_se;
};

TieReport tie_report_closed_form(const MsspSpec& spec);
TieReport tie_report_mc(const MsspSpec& spec, int num_samples, Rng& rng);

// E[P_j(A)^q] for a set A of base-measure mass p0A: the mean of
// p0A^(distinct species among q draws from group j).
McEstimate marginal_moment(const MsspSpec& spec, int j, double p0A, int q,
                           int num_samples, Rng& rng);

// E[prod_j P_j(A)^{q_j}]: the mean of p0A^(distinct species pooled across
// groups) for an array with q_j observations per group.
McEstimate mixed_moment(const MsspSpec& spec, const std::vector<int>& q,
                        double p0A, int num_samples, Rng& rng);

// E[prod_j P_j(A_j)^{q_j}] for pairwise-disjoint sets with the given masses:
// draws sharing a species across groups contribute zero, the rest contribute
// the product of per-group mass powers.
McEstimate disjoint_joint_moment(const MsspSpec& spec, const std::vector<int>& q,
                                 const std::vector<double>& p0_masses,
                                 int num_samples, Rng& rng);

// P(the single draw from group j is absent from the first n draws of group k)
// for n = 1..n_max; one array draw feeds every n.
std::vector<McEstimate> discovery_curve(const MsspSpec& spec, int j, int k,
                                        int n_max, int num_samples, Rng& rng);

}  // namespace mssp
