#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "rml/rng.hpp"
#include "rml/spectral_model.hpp"

namespace rml::dyson {

struct DysonOptions {
  double kappa = 0.1;
  double dt_floor = 1e-12;
  std::size_t max_consecutive_rejections = 1000;
  std::vector<double> landmarks;  // times the integrator lands on exactly
  bool store_all_steps = true;    // false: store t=0, landmarks and t_max only
  // Start time of the exact matrix warm start used when the initial spectrum
  // has coincident values; <= 0 picks 1e-2 * t_max.
  double warm_start_time = 0.0;
};

struct EigenvaluePath {
  double beta = 1.0;
  std::vector<double> times;
  Eigen::MatrixXd values;  // N x T, column k non-increasing
  std::size_t steps = 0;
  std::size_t rejections = 0;
  std::size_t floor_sorts = 0;   // steps accepted at dt_floor after sorting
  std::size_t jump_flags = 0;    // steps exceeding the continuity bound
  double warm_start = 0.0;       // 0 when no warm start was needed

  std::size_t n() const { return static_cast<std::size_t>(values.rows()); }
  // Column index of a stored time (exact match within 1e-12), or throws.
  std::size_t index_of(double t) const;
};

EigenvaluePath integrate_dyson(const DiscreteSpectrum& spectrum, double beta, double t_max, double dt_cap,
                               Rng& rng, const DysonOptions& options = {});

struct OverlapVector {
  std::size_t j = 0;  // 0-based
  std::vector<double> times;
  Eigen::MatrixXd u;  // N x T
  std::size_t substeps = 0;
  std::size_t implicit_steps = 0;  // intervals taken as one backward Euler step
  std::size_t clipped = 0;
  double max_mass_error = 0.0;
  double max_rhs_sum = 0.0;  // max per substep of the mass change, should be roundoff
};

// Explicit Euler on the frozen path; intervals that would need more than
// kMaxExplicitSubsteps substeps (near collisions) take one backward Euler step.
// Outputs at the requested stored times (empty: every stored time).
inline constexpr std::size_t kMaxExplicitSubsteps = 32;
OverlapVector integrate_overlap_ode(const EigenvaluePath& path, std::size_t j,
                                    const std::vector<double>& output_times = {});

// Right-hand side of the overlap equation; exposed for the per-step
// mass-conservation property test.
void overlap_rhs(const Eigen::VectorXd& lambda, const Eigen::VectorXd& u, Eigen::VectorXd& out);

}  // namespace rml::dyson
