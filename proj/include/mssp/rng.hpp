// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace mssp {

using Rng = std::mt19937_64;

// Independent generator derived from a master seed and a stream path,
// e.g. rng_stream(seed, {replicate, arm}).  Streams with distinct paths are
// statistically independent; the derivation is deterministic and portable.
Rng rng_stream(std::uint64_t master_seed,
               std::initializer_list<std::uint64_t> path = {});

double draw_gamma(Rng& rng, double shape, double rate);
double draw_beta(Rng& rng, double a, double b);
// Symmetric Dirichlet with concentration `conc` in each of `dim` coordinates.
std::vector<double> draw_dirichlet(Rng& rng, double conc, int dim);
// Index draw proportional to `weights` (not necessarily normalized).
int draw_categorical(Rng& rng, const std::vector<double>& weights);
double draw_uniform(Rng& rng);

}  // namespace mssp
