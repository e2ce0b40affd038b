// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mssp/bandit.hpp"
#include "mssp/mssp.hpp"

namespace mssp {

// Everything a single invocation needs, whichever subcommand runs.  The
// struct round-trips through its JSON form: parse_config_text(emit_config(c))
// compares equal to c.
struct RunConfig {
  std::string subcommand;
  std::uint64_t seed = 0;
  std::string format = "csv";  // csv | json
  std::string out;             // table output file; empty writes to stdout
  int threads = 0;             // 0 picks the environment / hardware default

  // eppf
  std::string family;
  std::map<std::string, double> family_params;
  std::vector<int> sizes;
  bool check = false;
  int check_n = 0;

  // diagnose
  std::string model;
  std::map<std::string, double> model_params;
  std::string spec_path;
  int mc_samples = 0;  // 0 keeps the table closed-form only

  // curve
  int curve_group = 0;
  int curve_given = 1;
  int curve_n_max = 0;
  int curve_samples = 100000;

  // bandit
  std::string data_path;
  bool synthetic = false;
  std::string strategy;
  int init_per_arm = 30;
  int steps = 300;
  int replicates = 20;
  int mcmc_iters = kIterationsPerStep;
  int zipf_species = kZipfTotalSpecies;
  int zipf_support = kZipfSupportPerArm;
  std::vector<double> zipf_exponents;  // empty applies the defaults
  std::string out_prefix = "bandit_";

  bool operator==(const RunConfig&) const = default;
};

std::string emit_config(const RunConfig& config);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// Declarative model tree mirroring MsspSpec: {"construction": ..., families
// as {"family": "dp", "alpha": 1.0} objects}.  Throws std::invalid_argument
// on malformed input.
MsspSpec spec_from_text(const std::string& text);
MsspSpec load_spec_file(const std::string& path);

// Dispatches `args` (without the program name) and returns the process exit
// code: 0 success, 1 usage or validation, 2 runtime failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace mssp
