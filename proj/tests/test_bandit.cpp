// Apache License, Version 2.0, refer to LICENSE.txt

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include "mssp/bandit.hpp"
#include "mssp/mc.hpp"
#include "mssp/rng.hpp"

using namespace mssp;

namespace {

CsvLoad parse(const std::string& text) {
  std::istringstream in(text);
  return load_tree_csv(in);
}

// Structural checks every trajectory must satisfy.
void check_trajectory(const Trajectory& t, int num_arms, bool has_estimates) {
  REQUIRE(t.records.size() == t.cumulative_new.size());
  REQUIRE(t.steps_completed == static_cast<int>(t.records.size()));
  long running = 0;
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    const StepRecord& rec = t.records[i];
    CHECK(rec.step == static_cast<int>(i) + 1);
    CHECK(rec.arm >= 0);
    CHECK(rec.arm < num_arms);
    CHECK(rec.species >= 0);
    running += rec.was_new ? 1 : 0;
    CHECK(t.cumulative_new[i] == running);
    if (has_estimates) {
      REQUIRE(rec.est_probability.size() == static_cast<std::size_t>(num_arms));
      for (double p : rec.est_probability) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
      }
    } else {
      CHECK(rec.est_probability.empty());
    }
  }
}

void check_same(const Trajectory& a, const Trajectory& b) {
  REQUIRE(a.records.size() == b.records.size());
  CHECK(a.initial_species == b.initial_species);
  CHECK(a.exhausted_early == b.exhausted_early);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].arm == b.records[i].arm);
    CHECK(a.records[i].species == b.records[i].species);
    CHECK(a.records[i].was_new == b.records[i].was_new);
    REQUIRE(a.records[i].est_probability.size() == b.records[i].est_probability.size());
    for (std::size_t j = 0; j < a.records[i].est_probability.size(); ++j)
      CHECK(a.records[i].est_probability[j] == b.records[i].est_probability[j]);
    CHECK(a.cumulative_new[i] == b.cumulative_new[i]);
  }
}

}  // namespace

TEST_CASE("tree csv pools columns by plot code and warns on the rest") {
  const CsvLoad load = parse(
      "species,BCI1,BCI2,P1,S1,C1,Q9\n"
      "alpha,1,2,3,0,4,7\n"
      "beta,0,1,0,2,0,1\n");
  REQUIRE(load.arms.size() == 4);
  CHECK(load.arms[0].name == "BCI");
  CHECK(load.arms[1].name == "P");
  CHECK(load.arms[2].name == "S");
  CHECK(load.arms[3].name == "C");
  REQUIRE(load.arms[0].counts.size() == 2);
  CHECK(load.arms[0].counts == std::vector<long>{3, 1});
  CHECK(load.arms[1].counts == std::vector<long>{3, 0});
  CHECK(load.arms[2].counts == std::vector<long>{0, 2});
  CHECK(load.arms[3].counts == std::vector<long>{4, 0});
  REQUIRE(load.warnings.size() == 2);
  CHECK(load.warnings[0].find("species") != std::string::npos);
  CHECK(load.warnings[1].find("Q9") != std::string::npos);

  // Minimal two-column example.
  const CsvLoad tiny = parse("BCI1,P1\n3,2\n");
  CHECK(tiny.warnings.empty());
  CHECK(tiny.arms[0].counts == std::vector<long>{3});
  CHECK(tiny.arms[1].counts == std::vector<long>{2});
  CHECK(tiny.arms[2].counts == std::vector<long>{0});
  CHECK(tiny.arms[3].counts == std::vector<long>{0});

  // Bare codes, CRLF endings, and blank lines are all accepted.
  const CsvLoad bare = parse("P,S22\r\n5,6\r\n\r\n1,2\n");
  CHECK(bare.arms[1].counts == std::vector<long>{5, 1});
  CHECK(bare.arms[2].counts == std::vector<long>{6, 2});
}

TEST_CASE("tree csv rejects malformed input") {
  CHECK_THROWS_AS(parse("BCI1\n-2\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("BCI1\n3.5\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("BCI1\nxy\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("BCI1\n\n7,8\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("foo,bar\n1,2\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse(""), std::invalid_argument);
  CHECK_THROWS_AS(load_tree_csv(std::string("/nonexistent/trees.csv")), std::runtime_error);
}

TEST_CASE("zipf arms put power-law mass on a random support") {
  Rng rng = rng_stream(7100, {1});
  const auto arms = generate_zipf_arms(60, 40, {1.3, 2.0}, rng);
  REQUIRE(arms.size() == 2);
  const double exponents[2] = {1.3, 2.0};
  for (int a = 0; a < 2; ++a) {
    const ArmPopulation& arm = arms[a];
    CHECK(arm.name == (a == 0 ? "arm1" : "arm2"));
    CHECK(arm.counts.empty());
    REQUIRE(arm.truth.size() == 60);
    validate(arm);
    double sum = 0.0;
    int support = 0;
    std::vector<double> nonzero;
    for (double p : arm.truth) {
      sum += p;
      if (p > 0.0) {
        ++support;
        nonzero.push_back(p);
      }
    }
    CHECK(support == 40);
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    // Sorted masses follow k^(-s) exactly.
    std::sort(nonzero.begin(), nonzero.end(), std::greater<>());
    CHECK(nonzero[1] / nonzero[0] == doctest::Approx(std::pow(2.0, -exponents[a])).epsilon(1e-12));
    CHECK(nonzero[4] / nonzero[0] == doctest::Approx(std::pow(5.0, -exponents[a])).epsilon(1e-12));
  }
  // Supports are random: two fresh arms almost surely differ.
  const auto more = generate_zipf_arms(60, 40, {1.3, 1.3}, rng);
  auto support_of = [](const ArmPopulation& arm) {
    std::set<int> s;
    for (std::size_t i = 0; i < arm.truth.size(); ++i)
      if (arm.truth[i] > 0.0) s.insert(static_cast<int>(i));
    return s;
  };
  CHECK(support_of(more[0]) != support_of(more[1]));

  // Full support covers every species.
  const auto full = generate_zipf_arms(30, 30, {1.0}, rng);
  for (double p : full[0].truth) CHECK(p > 0.0);

  CHECK_THROWS_AS(generate_zipf_arms(10, 0, {1.0}, rng), std::invalid_argument);
  CHECK_THROWS_AS(generate_zipf_arms(10, 11, {1.0}, rng), std::invalid_argument);
  CHECK_THROWS_AS(generate_zipf_arms(0, 1, {1.0}, rng), std::invalid_argument);
  CHECK_THROWS_AS(generate_zipf_arms(10, 5, {}, rng), std::invalid_argument);
  CHECK_THROWS_AS(generate_zipf_arms(10, 5, {0.0}, rng), std::invalid_argument);
  CHECK_THROWS_AS(generate_zipf_arms(10, 5, {-1.0}, rng), std::invalid_argument);
}

TEST_CASE("arm population validation") {
  ArmPopulation arm;
  CHECK_THROWS_AS(validate(arm), std::invalid_argument);
  arm.counts = {3, 0, 1};
  validate(arm);
  arm.counts[1] = -1;
  CHECK_THROWS_AS(validate(arm), std::invalid_argument);
  arm.counts[1] = 0;
  arm.truth = {0.5, 0.5, 0.0};
  validate(arm);
  arm.truth = {0.5, 0.4, 0.0};
  CHECK_THROWS_AS(validate(arm), std::invalid_argument);
  arm.truth = {1.5, -0.5, 0.0};
  CHECK_THROWS_AS(validate(arm), std::invalid_argument);
  arm.truth = {0.5, 0.5};
  CHECK_THROWS_AS(validate(arm), std::invalid_argument);
}

TEST_CASE("uniform bandit trajectories respect the draw contract") {
  Rng rng = rng_stream(7100, {2});
  const auto arms = generate_zipf_arms(40, 25, {1.3, 1.3, 2.0}, rng);
  BanditConfig config;
  config.init_per_arm = 5;
  config.steps = 60;
  config.mode = SamplingMode::kIid;
  config.seed = 321;

  const Trajectory traj = run_bandit(config, arms, uniform_strategy(), 0);
  check_trajectory(traj, 3, false);
  REQUIRE(traj.records.size() == 60);
  CHECK_FALSE(traj.exhausted_early);
  CHECK(traj.initial_species >= 1);
  CHECK(traj.initial_species <= 15);

  // True unseen mass is recorded for synthetic arms and can only shrink.
  std::vector<double> last(3, 1.1);
  int picks[3] = {0, 0, 0};
  for (const StepRecord& rec : traj.records) {
    REQUIRE(rec.true_probability.size() == 3);
    for (int j = 0; j < 3; ++j) {
      CHECK(rec.true_probability[j] >= 0.0);
      CHECK(rec.true_probability[j] <= 1.0);
      CHECK(rec.true_probability[j] <= last[j] + 1e-15);
      last[j] = rec.true_probability[j];
    }
    ++picks[rec.arm];
  }
  for (int j = 0; j < 3; ++j) CHECK(picks[j] >= 5);

  const Trajectory again = run_bandit(config, arms, uniform_strategy(), 0);
  check_same(traj, again);

  // A different replicate explores differently.
  const Trajectory other = run_bandit(config, arms, uniform_strategy(), 1);
  bool differs = other.initial_species != traj.initial_species;
  for (std::size_t i = 0; !differs && i < traj.records.size(); ++i)
    differs = traj.records[i].species != other.records[i].species ||
              traj.records[i].arm != other.records[i].arm;
  CHECK(differs);
}

TEST_CASE("without-replacement draws exhaust finite arms and stop early") {
  std::vector<ArmPopulation> arms(2);
  arms[0].name = "small";
  arms[0].counts = {2, 0, 0, 0};
  arms[1].name = "big";
  arms[1].counts = {0, 2, 2, 1};
  BanditConfig config;
  config.init_per_arm = 1;
  config.steps = 10;
  config.mode = SamplingMode::kWithoutReplacement;
  config.seed = 77;

  const Trajectory traj = run_bandit(config, arms, oracle_strategy(), 0);
  check_trajectory(traj, 2, true);
  // 7 individuals minus 2 initial draws leave 5 sequential steps.
  CHECK(traj.steps_completed == 5);
  CHECK(traj.exhausted_early);
  CHECK(traj.records.size() == 5);

  // Draw tallies never exceed the populations; draining everything means the
  // small arm's second individual shows up in exactly one record.
  std::vector<std::vector<long>> drawn(2, std::vector<long>(4, 0));
  int from_small = 0;
  for (const StepRecord& rec : traj.records) {
    ++drawn[rec.arm][rec.species];
    if (rec.arm == 0) ++from_small;
  }
  for (int j = 0; j < 2; ++j)
    for (int s = 0; s < 4; ++s) CHECK(drawn[j][s] <= arms[j].counts[s]);
  CHECK(from_small == 1);

  // After that the arm is empty: never drawn again, probability forced to 0.
  bool small_gone = false;
  for (const StepRecord& rec : traj.records) {
    if (small_gone) {
      CHECK(rec.arm == 1);
      CHECK(rec.est_probability[0] == 0.0);
    }
    if (rec.arm == 0) small_gone = true;
  }

  BanditConfig too_greedy = config;
  too_greedy.init_per_arm = 5;
  CHECK_THROWS_AS(run_bandit(too_greedy, arms, oracle_strategy(), 0), std::invalid_argument);
}

TEST_CASE("oracle chases the arm with unseen mass") {
  std::vector<ArmPopulation> arms(2);
  arms[0].name = "spent";
  arms[0].truth.assign(51, 0.0);
  arms[0].truth[0] = 1.0;
  arms[1].name = "fresh";
  arms[1].truth.assign(51, 0.0);
  for (int s = 1; s <= 50; ++s) arms[1].truth[s] = 0.02;
  BanditConfig config;
  config.init_per_arm = 2;
  config.steps = 30;
  config.mode = SamplingMode::kIid;
  config.seed = 55;

  const Trajectory traj = run_bandit(config, arms, oracle_strategy(), 0);
  check_trajectory(traj, 2, true);
  for (const StepRecord& rec : traj.records) {
    CHECK(rec.arm == 1);
    CHECK(rec.est_probability[0] == 0.0);
    // Oracle estimates are the truth itself.
    REQUIRE(rec.true_probability.size() == 2);
    CHECK(rec.est_probability[0] == rec.true_probability[0]);
    CHECK(rec.est_probability[1] == rec.true_probability[1]);
  }

  const BanditSummary summary = metrics({traj});
  CHECK(summary.rmse_defined);
  CHECK(summary.rmse == 0.0);
}

TEST_CASE("oracle beats uniform under paired replication") {
  Rng rng = rng_stream(7100, {3});
  const auto arms = generate_zipf_arms(200, 150, {1.3, 2.0}, rng);
  BanditConfig config;
  config.init_per_arm = 5;
  config.steps = 40;
  config.replicates = 20;
  config.mode = SamplingMode::kIid;
  config.seed = 4242;

  int oracle_wins = 0;
  int uniform_wins = 0;
  double diff_sum = 0.0;
  for (int r = 0; r < config.replicates; ++r) {
    const Trajectory o = run_bandit(config, arms, oracle_strategy(), r);
    const Trajectory u = run_bandit(config, arms, uniform_strategy(), r);
    const long on = o.cumulative_new.back();
    const long un = u.cumulative_new.back();
    if (on > un) ++oracle_wins;
    if (un > on) ++uniform_wins;
    diff_sum += static_cast<double>(on - un);
  }
  CHECK(diff_sum / config.replicates > 0.0);
  CHECK(oracle_wins > uniform_wins);
  const int decided = oracle_wins + uniform_wins;
  // Uniform never significantly beats the oracle; here the oracle's edge is
  // itself significant at 5%.
  CHECK(sign_test_pvalue(uniform_wins, decided) >= 0.05);
  CHECK(sign_test_pvalue(oracle_wins, decided) < 0.05);
}

TEST_CASE("model strategies drive the bandit with warm-started chains") {
  Rng rng = rng_stream(7100, {4});
  const auto arms = generate_zipf_arms(30, 20, {1.3, 2.0}, rng);
  BanditConfig config;
  config.init_per_arm = 4;
  config.steps = 6;
  config.mcmc_iters_per_step = 60;
  config.hier_warmup = 120;
  config.mode = SamplingMode::kIid;
  config.seed = 99;

  for (StrategyFamily family : {StrategyFamily::kIndependentDp, StrategyFamily::kAdditiveDp,
                                StrategyFamily::kHierarchicalDp}) {
    CAPTURE(static_cast<int>(family));
    const BanditStrategy strategy = model_strategy(family);
    const Trajectory traj = run_bandit(config, arms, strategy, 0);
    check_trajectory(traj, 2, true);
    REQUIRE(traj.records.size() == 6);
    const Trajectory again = run_bandit(config, arms, strategy, 0);
    check_same(traj, again);
  }

  // Model estimates land close enough to the truth to be usable: collect the
  // root-mean-square error over a couple of replicates.
  std::vector<Trajectory> runs;
  runs.push_back(run_bandit(config, arms, model_strategy(StrategyFamily::kIndependentDp), 0));
  runs.push_back(run_bandit(config, arms, model_strategy(StrategyFamily::kIndependentDp), 1));
  const BanditSummary summary = metrics(runs);
  CHECK(summary.rmse_defined);
  CHECK(summary.rmse >= 0.0);
  CHECK(summary.rmse <= 1.0);
  CHECK(summary.cumulative_mean.size() == 6);
}

TEST_CASE("metrics aggregates trajectories") {
  Trajectory t1;
  t1.steps_completed = 3;
  t1.cumulative_new = {1, 1, 2};
  for (int i = 0; i < 3; ++i) {
    StepRecord rec;
    rec.step = i + 1;
    rec.arm = 0;
    rec.est_probability = {0.5};
    rec.true_probability = {0.25};
    t1.records.push_back(rec);
  }
  Trajectory t2;
  t2.steps_completed = 2;
  t2.cumulative_new = {0, 1};
  t2.records.resize(2);

  const BanditSummary summary = metrics({t1, t2});
  CHECK(summary.avg_new_per_step == doctest::Approx((2.0 / 3.0 + 1.0 / 2.0) / 2.0).epsilon(1e-12));
  REQUIRE(summary.cumulative_mean.size() == 3);
  CHECK(summary.cumulative_mean[0] == doctest::Approx(0.5));
  CHECK(summary.cumulative_mean[1] == doctest::Approx(1.0));
  // The short trajectory holds its final count in the last slot.
  CHECK(summary.cumulative_mean[2] == doctest::Approx(1.5));
  CHECK(summary.cumulative_sd[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(summary.rmse_defined);
  CHECK(summary.rmse == doctest::Approx(0.25).epsilon(1e-12));

  const BanditSummary bare = metrics({t2});
  CHECK_FALSE(bare.rmse_defined);
  CHECK(std::isnan(bare.rmse));

  CHECK_THROWS_AS(metrics({}), std::invalid_argument);
}

TEST_CASE("bandit argument validation") {
  Rng rng = rng_stream(7100, {5});
  const auto arms = generate_zipf_arms(20, 10, {1.3, 2.0}, rng);
  BanditConfig config;
  config.init_per_arm = 2;
  config.steps = 3;
  config.mode = SamplingMode::kIid;

  CHECK_THROWS_AS(run_bandit(config, {}, uniform_strategy(), 0), std::invalid_argument);
  BanditConfig bad = config;
  bad.steps = 0;
  CHECK_THROWS_AS(run_bandit(bad, arms, uniform_strategy(), 0), std::invalid_argument);
  bad = config;
  bad.init_per_arm = -1;
  CHECK_THROWS_AS(run_bandit(bad, arms, uniform_strategy(), 0), std::invalid_argument);
  bad = config;
  bad.mcmc_iters_per_step = 0;
  CHECK_THROWS_AS(run_bandit(bad, arms, uniform_strategy(), 0), std::invalid_argument);
  CHECK_THROWS_AS(run_bandit(config, arms, uniform_strategy(), -1), std::invalid_argument);

  // Mode must match the populations' representation.
  BanditConfig finite = config;
  finite.mode = SamplingMode::kWithoutReplacement;
  CHECK_THROWS_AS(run_bandit(finite, arms, uniform_strategy(), 0), std::invalid_argument);
  std::vector<ArmPopulation> counted(2);
  counted[0].counts = {5, 5};
  counted[1].counts = {5, 5};
  CHECK_THROWS_AS(run_bandit(config, counted, uniform_strategy(), 0), std::invalid_argument);
  std::vector<ArmPopulation> ragged = counted;
  ragged[1].counts = {5};
  CHECK_THROWS_AS(run_bandit(finite, ragged, uniform_strategy(), 0), std::invalid_argument);
}
