#pragma once

#include <cstddef>
#include <vector>

#include "rml/rng.hpp"

namespace rml::dyson {

// v_n(tau) = int_0^1 exp(-2 pi^2 xi (1-xi) rho tau) cos(2 pi xi n) dxi.
double fekete_v(long n, double tau, double rho);

// tau rho / (n^2 + pi^2 tau^2 rho^2).
double cauchy_profile(long n, double tau, double rho);

// sum_{|n| > m} v_n(tau) from the asymptotic expansion of v_n in 1/n^2.
double fekete_tail_sum(long m, double tau, double rho);

// sum_{|n| > m} of the Cauchy profile (exact, via the coth series).
double cauchy_tail_sum(long m, double tau, double rho);

struct MesoscopicState {
  double rho_j = 1.0;
  double tau = 0.0;
  std::size_t K = 0;
  std::vector<double> x;  // index k + K holds particle k
  std::vector<double> v;
  double leakage = 0.0;   // 1 - sum v, mass absorbed by the frozen exterior

  double x_at(long k) const { return x[static_cast<std::size_t>(k + static_cast<long>(K))]; }
  double v_at(long k) const { return v[static_cast<std::size_t>(k + static_cast<long>(K))]; }
};

struct MesoscopicOptions {
  bool noise = true;
  double kappa = 0.1;
  double dt_cap = 1e-3;
  double dt_floor = 1e-12;
  std::size_t max_consecutive_rejections = 1000;
  std::vector<double> record_taus;  // empty: record tau_max only
};

struct MesoscopicRun {
  std::vector<MesoscopicState> states;
  std::size_t steps = 0;
  std::size_t rejections = 0;
};

// Particles |k| <= K evolve; the exterior is frozen at its Fekete positions,
// contributing a closed-form drift and absorbing overlap mass.
MesoscopicRun simulate_mesoscopic(std::size_t K, double tau_max, double rho_j, double beta, Rng& rng,
                                  const MesoscopicOptions& options = {});

}  // namespace rml::dyson
