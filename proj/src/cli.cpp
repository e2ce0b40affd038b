// Apache License, Version 2.0, refer to LICENSE.txt

#include "mssp/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "mssp/diagnostics.hpp"
#include "mssp/eppf.hpp"
#include "mssp/partitions.hpp"

namespace mssp {

namespace {

using nlohmann::json;

std::string full_precision(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::string part;
  std::stringstream ss(text);
  while (std::getline(ss, part, ',')) parts.push_back(part);
  return parts;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> values;
  for (const std::string& part : split_list(text)) {
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(part, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != part.size())
      throw std::invalid_argument(std::string(what) + ": bad integer '" + part + "'");
    values.push_back(v);
  }
  return values;
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
  std::vector<double> values;
  for (const std::string& part : split_list(text)) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(part, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != part.size())
      throw std::invalid_argument(std::string(what) + ": bad number '" + part + "'");
    values.push_back(v);
  }
  return values;
}

// Builds a component family from name + parameter map, insisting on exactly
// the keys the family takes.
EppfFamily family_from_params(const std::string& name,
                              std::map<std::string, double> params) {
  auto take = [&](const char* key) {
    auto it = params.find(key);
    if (it == params.end())
      throw std::invalid_argument("family '" + name + "' needs parameter '" + key + "'");
    double v = it->second;
    params.erase(it);
    return v;
  };
  EppfFamily family;
  if (name == "dp") {
    family = DpFamily{take("alpha")};
  } else if (name == "py" || name == "pyp") {
    double sigma = take("sigma");
    family = PypFamily{sigma, take("alpha")};
  } else if (name == "dm") {
    double m = take("m");
    if (!(m == std::floor(m)))
      throw std::invalid_argument("family 'dm': parameter 'm' must be an integer");
    family = DmFamily{static_cast<int>(m), take("tau")};
  } else if (name == "gn") {
    family = GnFamily{take("gamma")};
  } else {
    throw std::invalid_argument("unknown family '" + name + "' (expected dp, py, dm, gn)");
  }
  if (!params.empty())
    throw std::invalid_argument("family '" + name + "' does not take parameter '" +
                                params.begin()->first + "'");
  validate(family);
  return family;
}

EppfFamily family_from_json(const json& v) {
  if (!v.is_object() || !v.contains("family"))
    throw std::invalid_argument("spec: each component needs a \"family\" name");
  std::map<std::string, double> params;
  for (const auto& [key, value] : v.items()) {
    if (key == "family") continue;
    if (!value.is_number())
      throw std::invalid_argument("spec: family parameter '" + key + "' must be a number");
    params[key] = value.get<double>();
  }
  return family_from_params(v.at("family").get<std::string>(), params);
}

std::vector<EppfFamily> families_from_json(const json& v, const char* key) {
  if (!v.is_array() || v.empty())
    throw std::invalid_argument(std::string("spec: \"") + key +
                                "\" must be a non-empty array of families");
  std::vector<EppfFamily> families;
  families.reserve(v.size());
  for (const auto& item : v) families.push_back(family_from_json(item));
  return families;
}

MsspSpec spec_from_json(const json& v) {
  if (!v.is_object() || !v.contains("construction"))
    throw std::invalid_argument("spec: needs a \"construction\" key");
  const std::string kind = v.at("construction").get<std::string>();
  MsspSpec spec;
  if (kind == "independent") {
    spec = IndependentSpec{families_from_json(v.at("families"), "families")};
  } else if (kind == "additive") {
    AdditiveSpec a;
    if (!v.contains("mix") || !v.at("mix").is_array())
      throw std::invalid_argument("spec: additive construction needs a \"mix\" array");
    a.mix = v.at("mix").get<std::vector<double>>();
    a.shared = family_from_json(v.at("shared"));
    a.idiosyncratic = families_from_json(v.at("idiosyncratic"), "idiosyncratic");
    spec = std::move(a);
  } else if (kind == "hierarchical") {
    HierarchicalSpec h;
    h.root = family_from_json(v.at("root"));
    h.children = families_from_json(v.at("children"), "children");
    spec = std::move(h);
  } else if (kind == "nested") {
    NestedSpec n;
    n.root = family_from_json(v.at("root"));
    n.within = family_from_json(v.at("within"));
    n.groups = v.at("groups").get<int>();
    spec = std::move(n);
  } else {
    throw std::invalid_argument("spec: unknown construction '" + kind +
                                "' (independent, additive, hierarchical, nested)");
  }
  validate(spec);
  return spec;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
  if (!out.good()) throw std::runtime_error("failed while writing '" + path + "'");
}

// Table output goes to --out when given, otherwise to the caller's stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw std::runtime_error("cannot write '" + path + "'");
      stream_ = &file_;
    }
  }
  std::ostream& stream() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

void require_format(const std::string& format) {
  if (format != "csv" && format != "json")
    throw std::invalid_argument("format must be 'csv' or 'json'");
}

int resolve_threads(int requested, int replicates) {
  int t = requested;
  if (t <= 0) {
    if (const char* env = std::getenv("MSSP_THREADS")) t = std::atoi(env);
  }
  if (t <= 0) t = static_cast<int>(std::thread::hardware_concurrency());
  if (t <= 0) t = 1;
  return std::min(t, std::max(1, replicates));
}

BanditStrategy strategy_from_name(const std::string& name) {
  if (name == "uniform") return uniform_strategy();
  if (name == "oracle") return oracle_strategy();
  if (name == "idp") return model_strategy(StrategyFamily::kIndependentDp);
  if (name == "ipy") return model_strategy(StrategyFamily::kIndependentPy);
  if (name == "adp") return model_strategy(StrategyFamily::kAdditiveDp);
  if (name == "apy") return model_strategy(StrategyFamily::kAdditivePy);
  if (name == "hdp") return model_strategy(StrategyFamily::kHierarchicalDp);
  if (name == "hpy") return model_strategy(StrategyFamily::kHierarchicalPy);
  throw std::invalid_argument("unknown strategy '" + name +
                              "' (uniform, oracle, idp, ipy, adp, apy, hdp, hpy)");
}

int cmd_eppf(const RunConfig& cfg, std::ostream& out) {
  const EppfFamily family = family_from_params(cfg.family, cfg.family_params);
  if (cfg.check) {
    if (cfg.check_n < 1) throw std::invalid_argument("eppf --check needs --n >= 1");
    double sum = 0.0;
    for_each_partition(cfg.check_n, [&](const SetPartition& p) {
      sum += std::exp(log_eppf(family, std::span<const int>(p.block_sizes)));
    });
    char line[64];
    std::snprintf(line, sizeof line, "sum=%.9f", sum);
    out << line << "\n";
    return 0;
  }
  if (cfg.sizes.empty())
    throw std::invalid_argument("eppf needs --sizes, or --check with --n");
  for (int s : cfg.sizes)
    if (s < 1) throw std::invalid_argument("eppf: block sizes must be >= 1");
  out << full_precision(std::exp(log_eppf(family, std::span<const int>(cfg.sizes)))) << "\n";
  return 0;
}

const char* kSupportedModels =
    "hdp hpy hdm hgn hssp ndp npy ndm ngn nssp +dp +py +dm +gn +ssp hhdp ncam";

void emit_pair_csv(std::ostream& os, const TieReport& closed, const TieReport* mc) {
  os << "j,k,within_j,within_k,across,correlation";
  if (mc != nullptr)
    os << ",mc_within_j,mc_within_j_se,mc_within_k,mc_within_k_se"
          ",mc_across,mc_across_se,mc_correlation,mc_correlation_se";
  os << "\n";
  const int J = static_cast<int>(closed.within.size());
  for (int j = 0; j < J; ++j)
    for (int k = j; k < J; ++k) {
      os << j << "," << k << "," << full_precision(closed.within[j]) << ","
         << full_precision(closed.within[k]) << "," << full_precision(closed.across[j][k])
         << "," << full_precision(closed.correlation[j][k]);
      if (mc != nullptr)
        os << "," << full_precision(mc->within[j]) << "," << full_precision(mc->within_se[j])
           << "," << full_precision(mc->within[k]) << "," << full_precision(mc->within_se[k])
           << "," << full_precision(mc->across[j][k]) << ","
           << full_precision(mc->across_se[j][k]) << ","
           << full_precision(mc->correlation[j][k]) << ","
           << full_precision(mc->correlation_se[j][k]);
      os << "\n";
    }
}

json pair_json(const TieReport& closed, const TieReport* mc) {
  json pairs = json::array();
  const int J = static_cast<int>(closed.within.size());
  for (int j = 0; j < J; ++j)
    for (int k = j; k < J; ++k) {
      json row{{"j", j},
               {"k", k},
               {"within_j", closed.within[j]},
               {"within_k", closed.within[k]},
               {"across", closed.across[j][k]},
               {"correlation", closed.correlation[j][k]}};
      if (mc != nullptr) {
        row["mc_within_j"] = mc->within[j];
        row["mc_within_j_se"] = mc->within_se[j];
        row["mc_within_k"] = mc->within[k];
        row["mc_within_k_se"] = mc->within_se[k];
        row["mc_across"] = mc->across[j][k];
        row["mc_across_se"] = mc->across_se[j][k];
        row["mc_correlation"] = mc->correlation[j][k];
        row["mc_correlation_se"] = mc->correlation_se[j][k];
      }
      pairs.push_back(std::move(row));
    }
  return pairs;
}

int cmd_diagnose(const RunConfig& cfg, std::ostream& out) {
  require_format(cfg.format);
  const bool have_model = !cfg.model.empty();
  const bool have_spec = !cfg.spec_path.empty();
  if (have_model == have_spec)
    throw std::invalid_argument("diagnose: give exactly one of --model or --spec");
  Sink sink(cfg.out, out);

  if (have_model) {
    TieValues t;
    try {
      t = closed_form_registry(cfg.model, cfg.model_params);
    } catch (const std::invalid_argument& e) {
      const std::string msg = e.what();
      if (msg.find("unsupported") != std::string::npos ||
          msg.find("unknown model") != std::string::npos)
        throw std::invalid_argument(msg + "; supported models: " + kSupportedModels);
      throw;
    }
    if (cfg.format == "json") {
      json row{{"model", cfg.model},
               {"within_j", t.within_j},
               {"within_k", t.within_k},
               {"across", t.across},
               {"correlation", t.correlation}};
      sink.stream() << row.dump(2) << "\n";
    } else {
      sink.stream() << "model,within_j,within_k,across,correlation\n"
                    << cfg.model << "," << full_precision(t.within_j) << ","
                    << full_precision(t.within_k) << "," << full_precision(t.across) << ","
                    << full_precision(t.correlation) << "\n";
    }
    return 0;
  }

  const MsspSpec spec = load_spec_file(cfg.spec_path);
  const TieReport closed = tie_report_closed_form(spec);
  TieReport mc;
  const bool with_mc = cfg.mc_samples > 0;
  if (with_mc) {
    Rng rng = rng_stream(cfg.seed, {17});
    mc = tie_report_mc(spec, cfg.mc_samples, rng);
  }
  if (cfg.format == "json") {
    json doc{{"groups", static_cast<int>(closed.within.size())},
             {"monte_carlo", with_mc},
             {"num_samples", with_mc ? mc.num_samples : 0},
             {"pairs", pair_json(closed, with_mc ? &mc : nullptr)}};
    sink.stream() << doc.dump(2) << "\n";
  } else {
    emit_pair_csv(sink.stream(), closed, with_mc ? &mc : nullptr);
  }
  return 0;
}

int cmd_curve(const RunConfig& cfg, std::ostream& out) {
  require_format(cfg.format);
  if (cfg.spec_path.empty()) throw std::invalid_argument("curve needs --spec");
  if (cfg.curve_n_max < 0) throw std::invalid_argument("curve: --n-max must be >= 0");
  const MsspSpec spec = load_spec_file(cfg.spec_path);
  Sink sink(cfg.out, out);
  if (cfg.curve_n_max == 0) return 0;
  Rng rng = rng_stream(cfg.seed, {19});
  const std::vector<McEstimate> points = discovery_curve(
      spec, cfg.curve_group, cfg.curve_given, cfg.curve_n_max, cfg.curve_samples, rng);
  if (cfg.format == "json") {
    json rows = json::array();
    for (std::size_t i = 0; i < points.size(); ++i)
      rows.push_back({{"n", static_cast<int>(i) + 1},
                      {"estimate", points[i].value},
                      {"stderr", points[i].se}});
    sink.stream() << rows.dump(2) << "\n";
  } else {
    sink.stream() << "n,estimate,stderr\n";
    for (std::size_t i = 0; i < points.size(); ++i)
      sink.stream() << (i + 1) << "," << full_precision(points[i].value) << ","
                    << full_precision(points[i].se) << "\n";
  }
  return 0;
}

int cmd_bandit(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const bool have_data = !cfg.data_path.empty();
  if (have_data == cfg.synthetic)
    throw std::invalid_argument("bandit: give exactly one of --data or --synthetic");
  const BanditStrategy strategy = strategy_from_name(cfg.strategy);

  std::vector<ArmPopulation> arms;
  BanditConfig bandit;
  bandit.init_per_arm = cfg.init_per_arm;
  bandit.steps = cfg.steps;
  bandit.replicates = cfg.replicates;
  bandit.mcmc_iters_per_step = cfg.mcmc_iters;
  bandit.seed = cfg.seed;
  if (bandit.replicates < 1) throw std::invalid_argument("bandit: --replicates must be >= 1");

  if (have_data) {
    CsvLoad load = load_tree_csv(cfg.data_path);
    for (const std::string& w : load.warnings) err << "warning: " << w << "\n";
    arms = std::move(load.arms);
    bandit.mode = SamplingMode::kWithoutReplacement;
    long individuals = 0;
    int species = 0;
    const std::size_t axis = arms.empty() ? 0 : arms[0].counts.size();
    for (std::size_t s = 0; s < axis; ++s) {
      long total = 0;
      for (const auto& arm : arms) total += arm.counts[s];
      individuals += total;
      if (total > 0) ++species;
    }
    err << "loaded " << arms.size() << " arms, " << species << " species, " << individuals
        << " individuals\n";
  } else {
    const std::vector<double> exponents =
        cfg.zipf_exponents.empty() ? default_zipf_exponents() : cfg.zipf_exponents;
    Rng arm_rng = rng_stream(cfg.seed, {1});
    arms = generate_zipf_arms(cfg.zipf_species, cfg.zipf_support, exponents, arm_rng);
    bandit.mode = SamplingMode::kIid;
  }

  std::vector<Trajectory> trajectories(bandit.replicates);
  const int threads = resolve_threads(cfg.threads, bandit.replicates);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    try {
      for (int r; (r = next.fetch_add(1)) < bandit.replicates;)
        trajectories[r] = run_bandit(bandit, arms, strategy, r);
    } catch (...) {
      std::lock_guard<std::mutex> hold(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  const BanditSummary summary = metrics(trajectories);
  const int num_arms = static_cast<int>(arms.size());

  std::ostringstream traj_csv;
  traj_csv << "replicate,step,arm,species_id,was_new";
  for (int j = 0; j < num_arms; ++j) traj_csv << ",est_prob_arm_" << (j + 1);
  traj_csv << "\n";
  for (int r = 0; r < bandit.replicates; ++r)
    for (const StepRecord& rec : trajectories[r].records) {
      traj_csv << r << "," << rec.step << "," << rec.arm << "," << rec.species << ","
               << (rec.was_new ? 1 : 0);
      for (int j = 0; j < num_arms; ++j) {
        traj_csv << ",";
        if (!rec.est_probability.empty()) traj_csv << full_precision(rec.est_probability[j]);
      }
      traj_csv << "\n";
    }
  const std::string traj_path = cfg.out_prefix + "trajectory.csv";
  write_file(traj_path, traj_csv.str());

  std::ostringstream summary_csv;
  summary_csv << "strategy,avg_new_per_step,rmse\n"
              << strategy.name << "," << full_precision(summary.avg_new_per_step) << ","
              << (summary.rmse_defined ? full_precision(summary.rmse) : "NA") << "\n";
  const std::string summary_path = cfg.out_prefix + "summary.csv";
  write_file(summary_path, summary_csv.str());

  err << "wrote " << traj_path << " and " << summary_path << "\n";
  out << "strategy=" << strategy.name << " replicates=" << bandit.replicates
      << " steps=" << bandit.steps
      << " avg_new_per_step=" << full_precision(summary.avg_new_per_step)
      << " rmse=" << (summary.rmse_defined ? full_precision(summary.rmse) : "NA") << "\n";
  return 0;
}

int execute(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.subcommand == "eppf") return cmd_eppf(cfg, out);
  if (cfg.subcommand == "diagnose") return cmd_diagnose(cfg, out);
  if (cfg.subcommand == "curve") return cmd_curve(cfg, out);
  if (cfg.subcommand == "bandit") return cmd_bandit(cfg, out, err);
  throw std::invalid_argument("unknown subcommand '" + cfg.subcommand +
                              "' (eppf, diagnose, curve, bandit)");
}

}  // namespace

std::string emit_config(const RunConfig& c) {
  json j{{"subcommand", c.subcommand},
         {"seed", c.seed},
         {"format", c.format},
         {"out", c.out},
         {"threads", c.threads},
         {"spec", c.spec_path},
         {"eppf",
          {{"family", c.family},
           {"params", c.family_params},
           {"sizes", c.sizes},
           {"check", c.check},
           {"check_n", c.check_n}}},
         {"diagnose", {{"model", c.model}, {"params", c.model_params}, {"mc", c.mc_samples}}},
         {"curve",
          {{"group", c.curve_group},
           {"given", c.curve_given},
           {"n_max", c.curve_n_max},
           {"samples", c.curve_samples}}},
         {"bandit",
          {{"data", c.data_path},
           {"synthetic", c.synthetic},
           {"strategy", c.strategy},
           {"init_per_arm", c.init_per_arm},
           {"steps", c.steps},
           {"replicates", c.replicates},
           {"mcmc_iters", c.mcmc_iters},
           {"species", c.zipf_species},
           {"support", c.zipf_support},
           {"exponents", c.zipf_exponents},
           {"out_prefix", c.out_prefix}}}};
  return j.dump(2) + "\n";
}

RunConfig parse_config_text(const std::string& text) {
  try {
    const json j = json::parse(text);
    RunConfig c;
    c.subcommand = j.at("subcommand").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.format = j.at("format").get<std::string>();
    c.out = j.at("out").get<std::string>();
    c.threads = j.at("threads").get<int>();
    c.spec_path = j.at("spec").get<std::string>();
    const json& e = j.at("eppf");
    c.family = e.at("family").get<std::string>();
    c.family_params = e.at("params").get<std::map<std::string, double>>();
    c.sizes = e.at("sizes").get<std::vector<int>>();
    c.check = e.at("check").get<bool>();
    c.check_n = e.at("check_n").get<int>();
    const json& d = j.at("diagnose");
    c.model = d.at("model").get<std::string>();
    c.model_params = d.at("params").get<std::map<std::string, double>>();
    c.mc_samples = d.at("mc").get<int>();
    const json& u = j.at("curve");
    c.curve_group = u.at("group").get<int>();
    c.curve_given = u.at("given").get<int>();
    c.curve_n_max = u.at("n_max").get<int>();
    c.curve_samples = u.at("samples").get<int>();
    const json& b = j.at("bandit");
    c.data_path = b.at("data").get<std::string>();
    c.synthetic = b.at("synthetic").get<bool>();
    c.strategy = b.at("strategy").get<std::string>();
    c.init_per_arm = b.at("init_per_arm").get<int>();
    c.steps = b.at("steps").get<int>();
    c.replicates = b.at("replicates").get<int>();
    c.mcmc_iters = b.at("mcmc_iters").get<int>();
    c.zipf_species = b.at("species").get<int>();
    c.zipf_support = b.at("support").get<int>();
    c.zipf_exponents = b.at("exponents").get<std::vector<double>>();
    c.out_prefix = b.at("out_prefix").get<std::string>();
    return c;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

RunConfig load_config(const std::string& path) {
  return parse_config_text(read_file(path));
}

MsspSpec spec_from_text(const std::string& text) {
  try {
    return spec_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("spec: ") + e.what());
  }
}

MsspSpec load_spec_file(const std::string& path) {
  return spec_from_text(read_file(path));
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  RunConfig cfg;
  std::string emit_path;
  std::string config_path;
  std::string sizes_text;
  std::string exponents_text;
  std::vector<std::string> param_kv;
  std::map<std::string, std::optional<double>> named;
  for (const char* key :
       {"alpha", "alpha0", "sigma", "sigma0", "beta", "beta0", "tau", "tau0", "gamma",
        "gamma0", "m", "m0"})
    named[key];

  CLI::App app{"Multivariate species sampling toolkit"};
  app.require_subcommand(1);

  CLI::App* eppf = app.add_subcommand(
      "eppf", "Evaluate a partition probability or sweep its normalization");
  eppf->add_option("--family", cfg.family, "Component family: dp, py, dm, gn")->required();
  eppf->add_option("--alpha", named["alpha"], "Concentration");
  eppf->add_option("--sigma", named["sigma"], "Discount");
  eppf->add_option("--m,--M", named["m"], "Category count");
  eppf->add_option("--tau", named["tau"], "Per-category weight");
  eppf->add_option("--gamma", named["gamma"], "Tie strength");
  eppf->add_option("--sizes", sizes_text, "Comma-separated block sizes");
  eppf->add_flag("--check", cfg.check, "Sum the law over all partitions of [n]");
  eppf->add_option("--n", cfg.check_n, "Sample size for --check");
  eppf->add_option("--emit-config", emit_path, "Write the effective config and exit");

  CLI::App* diagnose =
      app.add_subcommand("diagnose", "Tie probabilities and correlation tables");
  diagnose->add_option("--model", cfg.model, "Named closed-form row");
  diagnose->add_option("--spec", cfg.spec_path, "Declarative model file");
  diagnose->add_option("--mc", cfg.mc_samples, "Add Monte Carlo columns with this many samples");
  diagnose->add_option("--seed", cfg.seed, "Random seed");
  diagnose->add_option("--format", cfg.format, "csv or json");
  diagnose->add_option("--out", cfg.out, "Write the table here instead of stdout");
  diagnose->add_option("--param", param_kv, "Extra key=value model parameter");
  for (auto& [key, slot] : named)
    diagnose->add_option("--" + key, slot, "Model parameter " + key);
  diagnose->add_option("--emit-config", emit_path, "Write the effective config and exit");

  CLI::App* curve = app.add_subcommand("curve", "Discovery probability against sample size");
  curve->add_option("--spec", cfg.spec_path, "Declarative model file")->required();
  curve->add_option("--group", cfg.curve_group, "Group whose next draw is scored");
  curve->add_option("--given", cfg.curve_given, "Group supplying the conditioning sample");
  curve->add_option("--n-max", cfg.curve_n_max, "Largest conditioning sample size")->required();
  curve->add_option("--samples", cfg.curve_samples, "Monte Carlo sample count");
  curve->add_option("--seed", cfg.seed, "Random seed");
  curve->add_option("--format", cfg.format, "csv or json");
  curve->add_option("--out", cfg.out, "Write rows here instead of stdout");
  curve->add_option("--emit-config", emit_path, "Write the effective config and exit");

  CLI::App* bandit = app.add_subcommand("bandit", "Sequential discovery runs over arms");
  bandit->add_option("--data", cfg.data_path, "Tree-count CSV (finite populations)");
  bandit->add_flag("--synthetic", cfg.synthetic, "Power-law synthetic arms");
  bandit->add_option("--strategy", cfg.strategy,
                     "uniform, oracle, idp, ipy, adp, apy, hdp, hpy")
      ->required();
  bandit->add_option("--init-per-arm", cfg.init_per_arm, "Pilot draws per arm");
  bandit->add_option("--steps", cfg.steps, "Sequential steps per replicate");
  bandit->add_option("--replicates", cfg.replicates, "Independent replicates");
  bandit->add_option("--mcmc-iters", cfg.mcmc_iters, "Chain sweeps per step");
  bandit->add_option("--seed", cfg.seed, "Random seed");
  bandit->add_option("--species", cfg.zipf_species, "Synthetic species axis size");
  bandit->add_option("--support", cfg.zipf_support, "Synthetic support per arm");
  bandit->add_option("--exponents", exponents_text, "Comma-separated power-law exponents");
  bandit->add_option("--out-prefix", cfg.out_prefix, "Prefix for the two output CSVs");
  bandit->add_option("--threads", cfg.threads, "Worker cap (default MSSP_THREADS)");
  bandit->add_option("--emit-config", emit_path, "Write the effective config and exit");

  CLI::App* run = app.add_subcommand("run", "Execute a stored run configuration");
  run->add_option("--config", config_path, "Run configuration JSON")->required();
  run->add_option("--emit-config", emit_path, "Write the loaded config and exit");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("mssp");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) {
      cfg = load_config(config_path);
    } else {
      for (CLI::App* sub : {eppf, diagnose, curve, bandit})
        if (sub->parsed()) cfg.subcommand = sub->get_name();
      if (!sizes_text.empty()) cfg.sizes = parse_int_list(sizes_text, "--sizes");
      if (!exponents_text.empty())
        cfg.zipf_exponents = parse_double_list(exponents_text, "--exponents");
      auto& target = eppf->parsed() ? cfg.family_params : cfg.model_params;
      for (const auto& [key, slot] : named)
        if (slot.has_value()) target[key] = *slot;
      for (const std::string& kv : param_kv) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
          throw std::invalid_argument("--param expects key=value, got '" + kv + "'");
        std::size_t pos = 0;
        double v = 0.0;
        const std::string value = kv.substr(eq + 1);
        try {
          v = std::stod(value, &pos);
        } catch (const std::exception&) {
          pos = std::string::npos;
        }
        if (pos != value.size())
          throw std::invalid_argument("--param: bad number in '" + kv + "'");
        cfg.model_params[kv.substr(0, eq)] = v;
      }
    }
    if (!emit_path.empty()) {
      const std::string text = emit_config(cfg);
      if (emit_path == "-")
        out << text;
      else
        write_file(emit_path, text);
      return 0;
    }
    return execute(cfg, out, err);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace mssp
