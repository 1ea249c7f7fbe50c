#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "rml/spectral_model.hpp"

namespace rml::burgers {

using cplx = std::complex<double>;

struct SolverOptions {
  double damping = 0.5;
  double tol = 1e-12;
  std::size_t max_iter = 10000;
  std::size_t grid_points = 4096;
  // When set, spikes enter G as atoms of weight 1/N each.
  std::optional<std::size_t> finite_n;
};

struct StieltjesSolution {
  cplx z;
  double t = 0.0;
  cplx g;
  double residual = 0.0;
  std::size_t iterations = 0;
};

struct BoundaryValue {
  cplx g;                   // G(lambda + i0, t) = v - i pi rho
  bool low_confidence = false;  // within 1e-3 of a support edge
};

struct BulkState {
  double t = 0.0;
  std::vector<double> lambda_grid;  // increasing
  std::vector<double> rho;
  std::vector<double> v;
  std::vector<double> x_grid;
  std::vector<double> lambda_of_x;
  double mass = 0.0;  // trapezoid integral of rho
};

// Tail-CDF inversion at a fixed time from a Chebyshev representation of the
// density on the support; reusable across many x.
class QuantileFunction {
 public:
  QuantileFunction(double lo, double hi, std::vector<double> cosine_coeffs);
  double operator()(double x) const;
  double tail_mass(double lambda) const;  // normalized
  double total_mass() const { return total_; }
  std::pair<double, double> support() const { return {lo_, hi_}; }

 private:
  double tail_theta(double theta) const;
  double lo_, hi_;
  std::vector<double> a_;
  double total_;
};

// Subordination data at a real point outside the support: omega = z - tG.
struct RealPoint {
  double g = 0.0;
  double omega = 0.0;
  double i2 = 0.0;  // sum w / (omega - a)^2
  double i3 = 0.0;
  double i4 = 0.0;
};

class BurgersSolver {
 public:
  explicit BurgersSolver(SpectralModel model, SolverOptions options = {});

  const SpectralModel& model() const { return model_; }
  const SolverOptions& options() const { return options_; }
  const std::vector<double>& grid_a() const { return a_; }
  const std::vector<double>& grid_w() const { return w_; }

  // int dx / (z - a(x) - t g) on the quantile grid.
  cplx map(cplx g, cplx z, double t) const;
  double residual(cplx g, cplx z, double t) const { return std::abs(g - map(g, z, t)); }

  StieltjesSolution solve_G(cplx z, double t, std::optional<cplx> guess = {}) const;
  BoundaryValue boundary_G(double lambda, double t) const;
  double density(double lambda, double t) const;
  double velocity(double lambda, double t) const;
  double quantile(double x, double t) const;
  QuantileFunction quantile_function(double t, std::size_t nodes = 128) const;
  cplx local_resolvent(cplx z, double a, double t) const;
  double overlap_kernel(double lambda, double mu, double t) const;
  std::pair<double, double> support(double t) const;
  BulkState bulk_state(double t, std::size_t nodes = 128, std::size_t x_points = 101) const;

  // Real Stieltjes transform outside the support (Newton on the real fixed point).
  RealPoint real_point(double lambda, double t) const;
  // G_A and its derivatives at a real omega outside the grid support.
  RealPoint subordination_at(double omega) const;

 private:
  SpectralModel model_;
  SolverOptions options_;
  std::vector<double> a_;
  std::vector<double> w_;
  double a_max_ = 0.0;
  double a_min_ = 0.0;
  double bulk_lo_ = 0.0;
  double bulk_hi_ = 0.0;
};

// Stationary OU kernel from the additive solver by the exact time change
// X^OU_t = e^{-t/2} X^add_{e^t - 1}; the solver must hold the radius-2 semicircle.
double stationary_overlap_kernel(const BurgersSolver& semicircle, double lambda, double mu, double t);

}  // namespace rml::burgers
