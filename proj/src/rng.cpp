// Apache License, Version 2.0, refer to LICENSE.txt

#include "mssp/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace mssp {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng rng_stream(std::uint64_t master_seed,
               std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = master_seed;
  std::uint64_t mixed = splitmix64(s);
  for (std::uint64_t p : path) {
    s ^= splitmix64(s) + 0x165667b19e3779f9ULL + p;
    mixed = splitmix64(s);
  }
  std::seed_seq seq{static_cast<std::uint32_t>(mixed),
                    static_cast<std::uint32_t>(mixed >> 32),
                    static_cast<std::uint32_t>(s),
                    static_cast<std::uint32_t>(s >> 32)};
  return Rng(seq);
}

double draw_gamma(Rng& rng, double shape, double rate) {
  if (shape <= 0.0 || rate <= 0.0)
    throw std::invalid_argument("draw_gamma: shape and rate must be positive");
  std::gamma_distribution<double> g(shape, 1.0 / rate);
  return g(rng);
}

double draw_beta(Rng& rng, double a, double b) {
  double x = draw_gamma(rng, a, 1.0);
  double y = draw_gamma(rng, b, 1.0);
  double s = x + y;
  // Both gammas can underflow to zero for tiny shapes; fall back to the mean.
  if (s <= 0.0) return a / (a + b);
  return x / s;
}

std::vector<double> draw_dirichlet(Rng& rng, double conc, int dim) {
  if (dim < 1) throw std::invalid_argument("draw_dirichlet: dim must be >= 1");
  std::vector<double> out(dim);
  double total = 0.0;
  for (int i = 0; i < dim; ++i) {
    out[i] = draw_gamma(rng, conc, 1.0);
    total += out[i];
  }
  if (total <= 0.0) {
    for (double& v : out) v = 1.0 / dim;
    return out;
  }
  for (double& v : out) v /= total;
  return out;
}

int draw_categorical(Rng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w))
      throw std::invalid_argument("draw_categorical: weights must be finite and non-negative");
    total += w;
  }
  if (total <= 0.0)
    throw std::invalid_argument("draw_categorical: total weight must be positive");
  double u = draw_uniform(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

double draw_uniform(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng);
}

}  // namespace mssp
