// Apache License, Version 2.0, refer to LICENSE.txt

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mssp/diagnostics.hpp"
#include "mssp/eppf.hpp"
#include "mssp/mssp.hpp"
#include "mssp/rng.hpp"

using namespace mssp;

namespace {

MsspSpec hdp(double root_conc, double child_conc, int groups = 2) {
  HierarchicalSpec s;
  s.root = DpFamily{root_conc};
  s.children.assign(groups, EppfFamily(DpFamily{child_conc}));
  return s;
}

MsspSpec ndp(double root_conc, double within_conc, int groups = 2) {
  NestedSpec s;
  s.root = DpFamily{root_conc};
  s.within = DpFamily{within_conc};
  s.groups = groups;
  return s;
}

MsspSpec adddp(double mix_j, double mix_k, double conc = 1.0) {
  AdditiveSpec s;
  s.mix = {mix_j, mix_k};
  s.shared = DpFamily{conc};
  s.idiosyncratic = {EppfFamily(DpFamily{conc}), EppfFamily(DpFamily{conc})};
  return s;
}

MsspSpec indep(std::vector<EppfFamily> families) {
  IndependentSpec s;
  s.families = std::move(families);
  return s;
}

double peppf(const MsspSpec& spec, const std::vector<std::vector<int>>& labels) {
  return std::exp(log_peppf(spec, grouped_from_observations(labels)));
}

double fam2(const EppfFamily& f) { return std::exp(log_eppf(f, {2})); }

}  // namespace

TEST_CASE("registry rows match hand-computed values") {
  TieValues t = closed_form_registry("hdp", {{"alpha", 1.0}, {"alpha0", 1.0}});
  CHECK(t.within_j == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(t.within_k == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(t.across == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(t.correlation == doctest::Approx(2.0 / 3.0).epsilon(1e-14));

  t = closed_form_registry(
      "hpy", {{"sigma", 0.5}, {"alpha", 1.0}, {"sigma0", 0.5}, {"alpha0", 1.0}});
  CHECK(t.within_j == doctest::Approx(0.4375).epsilon(1e-14));
  CHECK(t.across == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(t.correlation == doctest::Approx(1.0 / 1.75).epsilon(1e-14));

  t = closed_form_registry("hgn", {{"gamma", 0.5}, {"gamma0", 0.5}});
  CHECK(t.across == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(t.within_j == doctest::Approx(8.0 / 9.0).epsilon(1e-14));
  CHECK(t.correlation == doctest::Approx(0.75).epsilon(1e-14));

  t = closed_form_registry("hdm", {{"m", 2.0}, {"tau", 1.0}, {"m0", 2.0}, {"tau0", 1.0}});
  // child and root pair ties are both 2/3
  CHECK(t.within_j == doctest::Approx(2.0 / 3.0 + 1.0 / 3.0 * 2.0 / 3.0).epsilon(1e-14));
  CHECK(t.across == doctest::Approx(2.0 / 3.0).epsilon(1e-14));

  t = closed_form_registry("+dp", {{"eps_j", 1.0},
                                   {"eps_k", 1.0},
                                   {"alpha0", 1.0},
                                   {"alpha_j", 1.0},
                                   {"alpha_k", 1.0}});
  CHECK(t.within_j == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(t.across == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(t.correlation == doctest::Approx(1.0).epsilon(1e-14));

  t = closed_form_registry("ndp", {{"alpha", 1.0}, {"beta", 1.0}});
  CHECK(t.within_j == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(t.across == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(t.correlation == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("registry rows agree with the generic construction formulas") {
  auto same = [](const TieValues& a, const TieValues& b) {
    CHECK(a.within_j == doctest::Approx(b.within_j).epsilon(1e-12));
    CHECK(a.within_k == doctest::Approx(b.within_k).epsilon(1e-12));
    CHECK(a.across == doctest::Approx(b.across).epsilon(1e-12));
    CHECK(a.correlation == doctest::Approx(b.correlation).epsilon(1e-12));
  };

  same(closed_form_registry("hdp", {{"alpha", 0.7}, {"alpha0", 2.3}}),
       closed_form_ties(hdp(2.3, 0.7), 0, 1));

  HierarchicalSpec hpy;
  hpy.root = PypFamily{0.4, 1.1};
  hpy.children.assign(2, EppfFamily(PypFamily{0.2, 0.9}));
  same(closed_form_registry("hpy", {{"sigma", 0.2},
                                    {"alpha", 0.9},
                                    {"sigma0", 0.4},
                                    {"alpha0", 1.1}}),
       closed_form_ties(MsspSpec(hpy), 0, 1));

  HierarchicalSpec hdm;
  hdm.root = DmFamily{4, 0.8};
  hdm.children.assign(2, EppfFamily(DmFamily{6, 1.5}));
  same(closed_form_registry(
           "hdm", {{"m", 6.0}, {"tau", 1.5}, {"m0", 4.0}, {"tau0", 0.8}}),
       closed_form_ties(MsspSpec(hdm), 0, 1));

  HierarchicalSpec hgn;
  hgn.root = GnFamily{0.35};
  hgn.children.assign(2, EppfFamily(GnFamily{0.6}));
  same(closed_form_registry("hgn", {{"gamma", 0.6}, {"gamma0", 0.35}}),
       closed_form_ties(MsspSpec(hgn), 0, 1));

  same(closed_form_registry("ndp", {{"alpha", 1.7}, {"beta", 0.4}}),
       closed_form_ties(ndp(1.7, 0.4), 0, 1));

  NestedSpec npy;
  npy.root = PypFamily{0.3, 0.8};
  npy.within = PypFamily{0.15, 2.0};
  npy.groups = 2;
  same(closed_form_registry("npy", {{"sigma_a", 0.3},
                                    {"alpha", 0.8},
                                    {"sigma_b", 0.15},
                                    {"beta", 2.0}}),
       closed_form_ties(MsspSpec(npy), 0, 1));

  NestedSpec ndm;
  ndm.root = DmFamily{3, 1.0};
  ndm.within = DmFamily{5, 0.7};
  ndm.groups = 2;
  same(closed_form_registry(
           "ndm", {{"m_a", 3.0}, {"tau_a", 1.0}, {"m_b", 5.0}, {"tau_b", 0.7}}),
       closed_form_ties(MsspSpec(ndm), 0, 1));

  NestedSpec ngn;
  ngn.root = GnFamily{0.45};
  ngn.within = GnFamily{0.7};
  ngn.groups = 2;
  same(closed_form_registry("ngn", {{"gamma_a", 0.45}, {"gamma_b", 0.7}}),
       closed_form_ties(MsspSpec(ngn), 0, 1));

  same(closed_form_registry("+dp", {{"eps_j", 0.3},
                                    {"eps_k", 0.8},
                                    {"alpha0", 1.0},
                                    {"alpha_j", 1.0},
                                    {"alpha_k", 1.0}}),
       closed_form_ties(adddp(0.3, 0.8), 0, 1));

  AdditiveSpec apy;
  apy.mix = {0.6, 0.25};
  apy.shared = PypFamily{0.5, 1.0};
  apy.idiosyncratic = {EppfFamily(PypFamily{0.2, 0.3}), EppfFamily(PypFamily{0.1, 2.0})};
  same(closed_form_registry("+py", {{"eps_j", 0.6},
                                    {"eps_k", 0.25},
                                    {"sigma0", 0.5},
                                    {"alpha0", 1.0},
                                    {"sigma_j", 0.2},
                                    {"alpha_j", 0.3},
                                    {"sigma_k", 0.1},
                                    {"alpha_k", 2.0}}),
       closed_form_ties(MsspSpec(apy), 0, 1));

  AdditiveSpec adm;
  adm.mix = {0.5, 0.5};
  adm.shared = DmFamily{3, 1.0};
  adm.idiosyncratic = {EppfFamily(DmFamily{4, 0.5}), EppfFamily(DmFamily{2, 2.0})};
  same(closed_form_registry("+dm", {{"eps_j", 0.5},
                                    {"eps_k", 0.5},
                                    {"m0", 3.0},
                                    {"tau0", 1.0},
                                    {"m_j", 4.0},
                                    {"tau_j", 0.5},
                                    {"m_k", 2.0},
                                    {"tau_k", 2.0}}),
       closed_form_ties(MsspSpec(adm), 0, 1));

  AdditiveSpec agn;
  agn.mix = {0.9, 0.4};
  agn.shared = GnFamily{0.5};
  agn.idiosyncratic = {EppfFamily(GnFamily{0.3}), EppfFamily(GnFamily{0.8})};
  same(closed_form_registry("+gn", {{"eps_j", 0.9},
                                    {"eps_k", 0.4},
                                    {"gamma0", 0.5},
                                    {"gamma_j", 0.3},
                                    {"gamma_k", 0.8}}),
       closed_form_ties(MsspSpec(agn), 0, 1));

  // Rows that take pair partition probabilities directly.
  HierarchicalSpec hs;
  hs.root = GnFamily{0.4};
  hs.children = {EppfFamily(PypFamily{0.3, 1.0}), EppfFamily(DpFamily{2.0})};
  double c2j = fam2(hs.children[0]);
  double c2k = fam2(hs.children[1]);
  same(closed_form_registry("hssp", {{"child2_j", c2j},
                                     {"child11_j", 1.0 - c2j},
                                     {"child2_k", c2k},
                                     {"child11_k", 1.0 - c2k},
                                     {"root2", fam2(hs.root)}}),
       closed_form_ties(MsspSpec(hs), 0, 1));

  NestedSpec ns;
  ns.root = DmFamily{3, 1.2};
  ns.within = GnFamily{0.6};
  ns.groups = 2;
  same(closed_form_registry(
           "nssp", {{"root2", fam2(ns.root)}, {"within2", fam2(ns.within)}}),
       closed_form_ties(MsspSpec(ns), 0, 1));

  AdditiveSpec as;
  as.mix = {0.3, 0.8};
  as.shared = GnFamily{0.5};
  as.idiosyncratic = {EppfFamily(DpFamily{1.0}), EppfFamily(PypFamily{0.25, 0.5})};
  same(closed_form_registry("+ssp", {{"eps_j", 0.3},
                                     {"eps_k", 0.8},
                                     {"shared2", fam2(as.shared)},
                                     {"idio2_j", fam2(as.idiosyncratic[0])},
                                     {"idio2_k", fam2(as.idiosyncratic[1])}}),
       closed_form_ties(MsspSpec(as), 0, 1));
}

TEST_CASE("closed-form ties equal exact two-observation array probabilities") {
  std::vector<MsspSpec> specs;
  specs.push_back(hdp(1.0, 1.0));
  specs.push_back(hdp(2.5, 0.4));
  HierarchicalSpec hmix;
  hmix.root = DmFamily{3, 1.0};
  hmix.children = {EppfFamily(GnFamily{0.6}), EppfFamily(PypFamily{0.3, 0.5})};
  specs.push_back(hmix);
  specs.push_back(ndp(1.0, 2.0));
  NestedSpec nmix;
  nmix.root = PypFamily{0.5, 1.0};
  nmix.within = GnFamily{0.5};
  nmix.groups = 2;
  specs.push_back(nmix);
  specs.push_back(adddp(0.4, 0.7));
  AdditiveSpec amix;
  amix.mix = {0.8, 0.2};
  amix.shared = DmFamily{4, 1.0};
  amix.idiosyncratic = {EppfFamily(DpFamily{0.5}), EppfFamily(PypFamily{0.2, 1.5})};
  specs.push_back(amix);
  specs.push_back(indep({EppfFamily(DpFamily{1.0}), EppfFamily(GnFamily{0.4})}));

  for (const auto& spec : specs) {
    CAPTURE(specs.size());
    TieValues t = closed_form_ties(spec, 0, 1);
    CHECK(t.within_j == doctest::Approx(peppf(spec, {{1, 1}, {}})).epsilon(1e-10));
    CHECK(t.within_k == doctest::Approx(peppf(spec, {{}, {1, 1}})).epsilon(1e-10));
    CHECK(t.across == doctest::Approx(peppf(spec, {{1}, {1}})).epsilon(1e-10));
    if (t.within_j > 0.0 && t.within_k > 0.0)
      CHECK(t.correlation ==
            doctest::Approx(t.across / std::sqrt(t.within_j * t.within_k))
                .epsilon(1e-12));
    // the diagonal is a perfect correlation
    TieValues d = closed_form_ties(spec, 1, 1);
    CHECK(d.correlation == 1.0);
    CHECK(d.across == d.within_j);
  }
}

TEST_CASE("tie estimates agree with closed forms across every samplable row") {
  struct Entry {
    const char* name;
    MsspSpec spec;
  };
  std::vector<Entry> entries;
  entries.push_back({"hdp-a", hdp(1.0, 1.0)});
  entries.push_back({"hdp-b", hdp(0.5, 3.0)});
  HierarchicalSpec hpy1;
  hpy1.root = PypFamily{0.4, 1.0};
  hpy1.children.assign(2, EppfFamily(PypFamily{0.2, 0.5}));
  entries.push_back({"hpy-a", hpy1});
  HierarchicalSpec hpy2;
  hpy2.root = PypFamily{0.1, 0.3};
  hpy2.children.assign(2, EppfFamily(PypFamily{0.6, 2.0}));
  entries.push_back({"hpy-b", hpy2});
  HierarchicalSpec hdm1;
  hdm1.root = DmFamily{3, 1.0};
  hdm1.children.assign(2, EppfFamily(DmFamily{4, 0.7}));
  entries.push_back({"hdm-a", hdm1});
  HierarchicalSpec hdm2;
  hdm2.root = DmFamily{2, 2.0};
  hdm2.children.assign(2, EppfFamily(DmFamily{6, 1.0}));
  entries.push_back({"hdm-b", hdm2});
  HierarchicalSpec hgn1;
  hgn1.root = GnFamily{0.5};
  hgn1.children.assign(2, EppfFamily(GnFamily{0.5}));
  entries.push_back({"hgn-a", hgn1});
  HierarchicalSpec hgn2;
  hgn2.root = GnFamily{0.2};
  hgn2.children.assign(2, EppfFamily(GnFamily{0.8}));
  entries.push_back({"hgn-b", hgn2});
  entries.push_back({"ndp-a", ndp(1.0, 1.0)});
  entries.push_back({"ndp-b", ndp(3.0, 0.5)});
  NestedSpec npy1;
  npy1.root = PypFamily{0.5, 1.0};
  npy1.within = PypFamily{0.2, 0.8};
  npy1.groups = 2;
  entries.push_back({"npy-a", npy1});
  NestedSpec npy2;
  npy2.root = PypFamily{0.1, 0.2};
  npy2.within = PypFamily{0.4, 1.5};
  npy2.groups = 2;
  entries.push_back({"npy-b", npy2});
  NestedSpec ndm1;
  ndm1.root = DmFamily{2, 1.0};
  ndm1.within = DmFamily{5, 0.6};
  ndm1.groups = 2;
  entries.push_back({"ndm-a", ndm1});
  NestedSpec ndm2;
  ndm2.root = DmFamily{4, 0.3};
  ndm2.within = DmFamily{3, 2.0};
  ndm2.groups = 2;
  entries.push_back({"ndm-b", ndm2});
  NestedSpec ngn1;
  ngn1.root = GnFamily{0.6};
  ngn1.within = GnFamily{0.4};
  ngn1.groups = 2;
  entries.push_back({"ngn-a", ngn1});
  NestedSpec ngn2;
  ngn2.root = GnFamily{0.3};
  ngn2.within = GnFamily{0.7};
  ngn2.groups = 2;
  entries.push_back({"ngn-b", ngn2});
  entries.push_back({"+dp-a", adddp(0.5, 0.5)});
  entries.push_back({"+dp-b", adddp(0.2, 0.9, 2.0)});
  AdditiveSpec apy1;
  apy1.mix = {0.7, 0.3};
  apy1.shared = PypFamily{0.3, 1.0};
  apy1.idiosyncratic = {EppfFamily(PypFamily{0.2, 0.5}), EppfFamily(PypFamily{0.4, 1.0})};
  entries.push_back({"+py-a", apy1});
  AdditiveSpec apy2;
  apy2.mix = {1.0, 0.6};
  apy2.shared = PypFamily{0.5, 0.5};
  apy2.idiosyncratic = {EppfFamily(PypFamily{0.1, 1.0}), EppfFamily(PypFamily{0.3, 2.0})};
  entries.push_back({"+py-b", apy2});
  AdditiveSpec adm1;
  adm1.mix = {0.4, 0.8};
  adm1.shared = DmFamily{3, 1.0};
  adm1.idiosyncratic = {EppfFamily(DmFamily{2, 0.5}), EppfFamily(DmFamily{4, 1.0})};
  entries.push_back({"+dm-a", adm1});
  AdditiveSpec adm2;
  adm2.mix = {0.0, 1.0};
  adm2.shared = DmFamily{5, 0.8};
  adm2.idiosyncratic = {EppfFamily(DmFamily{3, 1.2}), EppfFamily(DmFamily{2, 0.4})};
  entries.push_back({"+dm-b", adm2});
  AdditiveSpec agn1;
  agn1.mix = {0.6, 0.6};
  agn1.shared = GnFamily{0.4};
  agn1.idiosyncratic = {EppfFamily(GnFamily{0.5}), EppfFamily(GnFamily{0.6})};
  entries.push_back({"+gn-a", agn1});
  AdditiveSpec agn2;
  agn2.mix = {0.9, 0.1};
  agn2.shared = GnFamily{0.7};
  agn2.idiosyncratic = {EppfFamily(GnFamily{0.2}), EppfFamily(GnFamily{0.9})};
  entries.push_back({"+gn-b", agn2});
  // pair-probability rows, exercised through equivalent concrete specs
  HierarchicalSpec hs;
  hs.root = GnFamily{0.4};
  hs.children = {EppfFamily(PypFamily{0.3, 1.0}), EppfFamily(DpFamily{2.0})};
  entries.push_back({"hssp", hs});
  NestedSpec nssp;
  nssp.root = DmFamily{3, 1.2};
  nssp.within = GnFamily{0.6};
  nssp.groups = 2;
  entries.push_back({"nssp", nssp});
  AdditiveSpec assp;
  assp.mix = {0.3, 0.8};
  assp.shared = GnFamily{0.5};
  assp.idiosyncratic = {EppfFamily(DpFamily{1.0}), EppfFamily(PypFamily{0.25, 0.5})};
  entries.push_back({"+ssp", assp});

  Rng rng = rng_stream(20240817, {1});
  const int n = 60000;
  for (const auto& e : entries) {
    CAPTURE(e.name);
    TieValues exact = closed_form_ties(e.spec, 0, 1);
    TieEstimates est = tie_probabilities_mc(e.spec, 0, 1, n, rng);
    CHECK(std::abs(est.within_j.value - exact.within_j) <=
          3.5 * est.within_j.se + 1e-9);
    CHECK(std::abs(est.within_k.value - exact.within_k) <=
          3.5 * est.within_k.se + 1e-9);
    CHECK(std::abs(est.across.value - exact.across) <= 3.5 * est.across.se + 1e-9);
    CHECK(std::abs(est.correlation.value - exact.correlation) <=
          3.5 * est.correlation.se + 0.01);
    CHECK(est.correlation.se >= 0.0);
    CHECK(std::isfinite(est.correlation.se));
  }
}

TEST_CASE("hierarchical identity: correlation times within equals across") {
  const double pts[][2] = {{1.0, 1.0}, {0.3, 2.0}, {5.0, 0.7}, {10.0, 10.0}, {0.1, 0.1}};
  for (auto& p : pts) {
    TieValues t = closed_form_registry("hdp", {{"alpha", p[0]}, {"alpha0", p[1]}});
    CHECK(t.correlation * t.within_j == doctest::Approx(t.across).epsilon(1e-13));
  }
  // the two published formulations of the hhdp and ncam rows are consistent
  TieValues h = closed_form_registry("hhdp",
                                     {{"alpha", 1.3}, {"beta", 0.8}, {"beta0", 2.1}});
  CHECK(h.correlation == doctest::Approx(h.across / h.within_j).epsilon(1e-13));
  TieValues c = closed_form_registry("ncam", {{"alpha", 0.9}, {"beta", 1.7}});
  CHECK(c.correlation == doctest::Approx(c.across / c.within_j).epsilon(1e-13));
  CHECK(c.correlation > 0.5);
}

TEST_CASE("registry rejects bad models and parameters") {
  CHECK_THROWS_AS(closed_form_registry("gmdp", {}), std::invalid_argument);
  CHECK_THROWS_AS(closed_form_registry("gmsigma", {}), std::invalid_argument);
  CHECK_THROWS_AS(closed_form_registry("mystery", {}), std::invalid_argument);
  // missing, unknown, and out-of-domain parameters
  CHECK_THROWS_AS(closed_form_registry("hdp", {{"alpha", 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(
      closed_form_registry("hdp", {{"alpha", 1.0}, {"alpha0", 1.0}, {"beta", 1.0}}),
      std::invalid_argument);
  CHECK_THROWS_AS(closed_form_registry("hdp", {{"alpha", -1.0}, {"alpha0", 1.0}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(closed_form_registry("hgn", {{"gamma", 1.5}, {"gamma0", 0.5}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      closed_form_registry(
          "hdm", {{"m", 0.5}, {"tau", 1.0}, {"m0", 2.0}, {"tau0", 1.0}}),
      std::invalid_argument);
  CHECK_THROWS_AS(closed_form_registry("+dp", {{"eps_j", 1.5},
                                               {"eps_k", 0.5},
                                               {"alpha0", 1.0},
                                               {"alpha_j", 1.0},
                                               {"alpha_k", 1.0}}),
                  std::invalid_argument);
  // a zero within-group tie probability leaves the ratio undefined
  CHECK_THROWS_AS(closed_form_registry("+ssp", {{"eps_j", 0.0},
                                                {"eps_k", 0.5},
                                                {"shared2", 0.5},
                                                {"idio2_j", 0.0},
                                                {"idio2_k", 0.5}}),
                  std::invalid_argument);
}

TEST_CASE("correlation paths move monotonically toward their extremes") {
  const char* exch_models[] = {"hdp", "hpy", "hdm", "hgn", "ndp",  "npy",  "ndm",
                               "ngn", "+dp", "+py", "+dm", "+gn", "hhdp", "ncam"};
  for (const char* m : exch_models) {
    CAPTURE(m);
    std::vector<double> v = extreme_trend_check(m, TrendDirection::kExchangeable);
    REQUIRE(v.size() == 4);
    for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] > v[i - 1]);
    CHECK(v.back() > 0.9);
    CHECK(v.back() <= 1.0 + 1e-12);
  }
  // the nested Dirichlet-multinomial path reaches full exchangeability exactly
  std::vector<double> ndm_path = extreme_trend_check("ndm", TrendDirection::kExchangeable);
  CHECK(ndm_path.back() == doctest::Approx(1.0).epsilon(1e-14));

  const char* indep_models[] = {"hdp", "hpy", "hdm", "hgn", "+dp", "+py", "+dm",
                                "+gn", "hhdp"};
  for (const char* m : indep_models) {
    CAPTURE(m);
    std::vector<double> v = extreme_trend_check(m, TrendDirection::kIndependence);
    REQUIRE(v.size() == 4);
    for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] < v[i - 1]);
    CHECK(v.back() < 0.05);
    CHECK(v.back() > 0.0);
  }

  // nested models and the common-atom model cannot approach independence
  for (const char* m : {"ndp", "npy", "ndm", "ngn", "ncam"})
    CHECK_THROWS_AS(extreme_trend_check(m, TrendDirection::kIndependence),
                    std::invalid_argument);
  CHECK_THROWS_AS(extreme_trend_check("gmdp", TrendDirection::kExchangeable),
                  std::invalid_argument);
  CHECK_THROWS_AS(extreme_trend_check("hssp", TrendDirection::kExchangeable),
                  std::invalid_argument);
}

TEST_CASE("correlation dispatch covers both methods") {
  MsspSpec spec = hdp(1.0, 1.0);
  CHECK(correlation(spec, 0, 1, ClosedFormMethod{}) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(correlation(spec, 0, 0, ClosedFormMethod{}) == 1.0);

  Rng rng = rng_stream(20240817, {2});
  MonteCarloMethod mc;
  mc.num_samples = 40000;
  mc.rng = &rng;
  CHECK(correlation(spec, 0, 1, mc) == doctest::Approx(2.0 / 3.0).epsilon(0.05));
  CHECK(correlation(spec, 1, 1, mc) == 1.0);

  MonteCarloMethod no_rng;
  CHECK_THROWS_AS(correlation(spec, 0, 1, no_rng), std::invalid_argument);
  Rng r2 = rng_stream(20240817, {3});
  CHECK_THROWS_AS(tie_probabilities_mc(spec, 1, 1, 100, r2), std::invalid_argument);
}

TEST_CASE("tie reports carry consistent tables") {
  AdditiveSpec a3;
  a3.mix = {0.2, 0.6, 1.0};
  a3.shared = DpFamily{1.0};
  a3.idiosyncratic = {EppfFamily(DpFamily{0.5}), EppfFamily(GnFamily{0.5}),
                      EppfFamily(PypFamily{0.3, 1.0})};
  MsspSpec spec = a3;

  TieReport r = tie_report_closed_form(spec);
  REQUIRE(r.within.size() == 3);
  CHECK_FALSE(r.monte_carlo);
  for (int j = 0; j < 3; ++j) {
    CHECK(r.across[j][j] == doctest::Approx(r.within[j]).epsilon(1e-14));
    CHECK(r.correlation[j][j] == 1.0);
    for (int k = 0; k < 3; ++k) {
      CHECK(r.across[j][k] == doctest::Approx(r.across[k][j]).epsilon(1e-14));
      CHECK(r.correlation[j][k] == doctest::Approx(r.correlation[k][j]).epsilon(1e-14));
      // Cauchy-Schwarz: an across tie cannot beat the within geometric mean
      CHECK(r.across[j][k] <= std::sqrt(r.within[j] * r.within[k]) + 1e-12);
      CHECK(r.correlation[j][k] <= 1.0 + 1e-12);
    }
  }
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k) {
      TieValues t = closed_form_ties(spec, j, k);
      CHECK(r.across[j][k] == doctest::Approx(t.across).epsilon(1e-14));
      CHECK(r.correlation[j][k] == doctest::Approx(t.correlation).epsilon(1e-14));
    }

  Rng rng = rng_stream(20240817, {4});
  TieReport m = tie_report_mc(spec, 30000, rng);
  CHECK(m.monte_carlo);
  CHECK(m.num_samples == 30000);
  REQUIRE(m.within_se.size() == 3);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(m.within[j] - r.within[j]) <= 3.5 * m.within_se[j] + 1e-9);
    for (int k = j + 1; k < 3; ++k) {
      CHECK(std::abs(m.across[j][k] - r.across[j][k]) <=
            3.5 * m.across_se[j][k] + 1e-9);
      CHECK(std::abs(m.correlation[j][k] - r.correlation[j][k]) <=
            3.5 * m.correlation_se[j][k] + 0.01);
      CHECK(m.across[j][k] == m.across[k][j]);
    }
    CHECK(m.correlation[j][j] == 1.0);
    CHECK(m.across[j][j] == doctest::Approx(m.within[j]).epsilon(1e-14));
  }
}

TEST_CASE("moment estimators hit closed-form anchors") {
  Rng rng = rng_stream(20240817, {5});
  MsspSpec dp1 = indep({EppfFamily(DpFamily{1.0})});

  // one draw: the set mass itself, with zero variance
  McEstimate m1 = marginal_moment(dp1, 0, 0.5, 1, 2000, rng);
  CHECK(m1.value == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(m1.se == doctest::Approx(0.0).epsilon(1e-14));
  // a full-mass set is certain
  McEstimate mfull = marginal_moment(dp1, 0, 1.0, 3, 2000, rng);
  CHECK(mfull.value == doctest::Approx(1.0).epsilon(1e-14));

  // two draws tie with probability 1/2: E = (p + p^2) / 2
  McEstimate m2 = marginal_moment(dp1, 0, 0.5, 2, 40000, rng);
  CHECK(std::abs(m2.value - 0.375) <= 3.5 * m2.se + 1e-9);

  // independent groups never share species: the mixed moment factorizes
  MsspSpec dp2 = indep({EppfFamily(DpFamily{1.0}), EppfFamily(DpFamily{1.0})});
  McEstimate mix = mixed_moment(dp2, {1, 1}, 0.5, 2000, rng);
  CHECK(mix.value == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(mix.se == doctest::Approx(0.0).epsilon(1e-14));

  // hierarchical pair: ties happen across groups with probability 1/2
  MsspSpec h = hdp(1.0, 1.0);
  McEstimate hm = mixed_moment(h, {1, 1}, 0.5, 40000, rng);
  CHECK(std::abs(hm.value - 0.375) <= 3.5 * hm.se + 1e-9);

  // a zero exponent removes the group entirely
  McEstimate red = mixed_moment(h, {2, 0}, 0.5, 40000, rng);
  McEstimate marg = marginal_moment(h, 0, 0.5, 2, 40000, rng);
  CHECK(std::abs(red.value - marg.value) <= 3.5 * (red.se + marg.se) + 1e-9);
}

TEST_CASE("marginal moments match the pair-tie decomposition") {
  // E[P_j(A)^2] = within * p + (1 - within) * p^2 for any pair-tie rate
  struct Case {
    MsspSpec spec;
    double p0A;
  };
  std::vector<Case> cases;
  cases.push_back({hdp(1.5, 0.7), 0.3});
  cases.push_back({ndp(1.0, 2.0), 0.6});
  cases.push_back({adddp(0.4, 0.7), 0.5});
  Rng rng = rng_stream(20240817, {6});
  for (auto& c : cases) {
    double w = closed_form_ties(c.spec, 0, 0).within_j;
    double expected = w * c.p0A + (1.0 - w) * c.p0A * c.p0A;
    McEstimate got = marginal_moment(c.spec, 0, c.p0A, 2, 40000, rng);
    CHECK(std::abs(got.value - expected) <= 3.5 * got.se + 1e-9);
  }
}

TEST_CASE("disjoint-set moments zero out shared draws") {
  Rng rng = rng_stream(20240817, {7});

  // hierarchical pair with one draw each: no-share probability times the masses
  MsspSpec h = hdp(1.0, 1.0);
  McEstimate d = disjoint_joint_moment(h, {1, 1}, {0.3, 0.4}, 60000, rng);
  CHECK(std::abs(d.value - 0.06) <= 3.5 * d.se + 1e-9);

  // independent groups never share, so the moment factorizes exactly
  MsspSpec ind = indep({EppfFamily(DpFamily{1.0}), EppfFamily(DpFamily{2.0})});
  McEstimate f = disjoint_joint_moment(ind, {2, 1}, {0.3, 0.4}, 60000, rng);
  double expect_j = 0.5 * 0.3 + 0.5 * 0.09;  // DP(1) pair tie = 1/2
  double expect_k = 0.4;
  CHECK(std::abs(f.value - expect_j * expect_k) <= 3.5 * f.se + 1e-9);

  // a group with exponent zero contributes a unit factor
  McEstimate g = disjoint_joint_moment(h, {2, 0}, {0.5, 0.5}, 40000, rng);
  McEstimate marg = marginal_moment(h, 0, 0.5, 2, 40000, rng);
  CHECK(std::abs(g.value - marg.value) <= 3.5 * (g.se + marg.se) + 1e-9);

  // overlapping masses cannot describe disjoint sets
  CHECK_THROWS_AS(disjoint_joint_moment(h, {1, 1}, {0.6, 0.7}, 100, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(mixed_moment(h, {0, 0}, 0.5, 100, rng), std::invalid_argument);
  CHECK_THROWS_AS(mixed_moment(h, {-1, 2}, 0.5, 100, rng), std::invalid_argument);
  CHECK_THROWS_AS(marginal_moment(h, 0, 1.5, 2, 100, rng), std::invalid_argument);
  CHECK_THROWS_AS(marginal_moment(h, 2, 0.5, 2, 100, rng), std::invalid_argument);
}

TEST_CASE("discovery curves decay for sharing models and stay flat without") {
  Rng rng = rng_stream(20240817, {8});

  // independent groups never rediscover the other group's species
  MsspSpec ind = indep({EppfFamily(DpFamily{1.0}), EppfFamily(DpFamily{1.0})});
  std::vector<McEstimate> flat = discovery_curve(ind, 0, 1, 6, 3000, rng);
  REQUIRE(flat.size() == 6);
  for (auto& e : flat) {
    CHECK(e.value == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(e.se == doctest::Approx(0.0).epsilon(1e-14));
  }

  MsspSpec h = hdp(1.0, 1.0);
  std::vector<McEstimate> curve = discovery_curve(h, 0, 1, 8, 40000, rng);
  REQUIRE(curve.size() == 8);
  // first point: the across-tie complement
  CHECK(std::abs(curve[0].value - 0.5) <= 3.5 * curve[0].se + 1e-9);
  for (std::size_t i = 1; i < curve.size(); ++i)
    CHECK(curve[i].value <= curve[i - 1].value + 3.5 * (curve[i].se + curve[i - 1].se));
  // the curve genuinely decays for a sharing model
  CHECK(curve.back().value < curve.front().value - 3.5 * curve.back().se);

  CHECK_THROWS_AS(discovery_curve(h, 0, 0, 4, 100, rng), std::invalid_argument);
  CHECK_THROWS_AS(discovery_curve(h, 0, 1, 0, 100, rng), std::invalid_argument);
}
