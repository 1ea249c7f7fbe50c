#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "rml/matrix_mc.hpp"
#include "rml/spectral_model.hpp"
#include "rml/stieltjes.hpp"

namespace rml::spike {

enum class HSource { TransversePde, LocalResolvent };

struct SpikeOptions {
  double alive_margin = 1e-6;
  std::size_t rk_steps = 1000;  // dt = t_max / rk_steps
  double critical_guard = 1e-3;
  HSource h_source = HSource::TransversePde;
  std::size_t pde_x_points = 256;
  double pde_grading = 2.0;  // x = s^p on a uniform s-grid; 1 is the uniform midpoint grid
  std::size_t panel_order = 12;
  std::size_t quantile_snapshots = 33;
  std::optional<double> pde_fixed_dt;
  burgers::SolverOptions solver;
};

struct SpikeTrajectory {
  std::vector<double> times;
  std::vector<double> position;
  std::vector<double> edge;
  std::vector<bool> alive;
  std::vector<double> slope;  // d lambda / dt at each time (0 after death)
  std::optional<double> death_time;
};

SpikeTrajectory spike_trajectory(const burgers::BurgersSolver& solver, std::size_t j, double t_max,
                                 const SpikeOptions& options = {});

struct SpikeOverlapState {
  std::vector<double> times;
  std::vector<double> f;
  std::vector<double> h;
  std::vector<double> lambda1;
  std::vector<double> mass_error;  // f + int u dx - 1
  std::vector<double> x_grid;
  std::vector<double> x_weights;
  Eigen::MatrixXd u;            // x_points x T
  Eigen::MatrixXd lambda_of_x;  // x_points x T
  std::size_t steps = 0;
  std::size_t clipped = 0;
  double max_mass_error = 0.0;
  double min_u = 0.0;
};

class SpikeLab {
 public:
  // horizon: largest time any query will use; the spike path is integrated on [0, horizon].
  SpikeLab(SpectralModel model, std::size_t j, double horizon, SpikeOptions options = {});

  const burgers::BurgersSolver& solver() const { return solver_; }
  const SpikeTrajectory& trajectory() const { return traj_; }
  std::optional<double> critical_time() const { return traj_.death_time; }
  double horizon() const { return horizon_; }
  double spike() const { return a_j_; }

  double position(double t) const;
  double phi(double s) const;
  double integrated_phi(double t) const;
  double principal_overlap_f(double t) const;
  double mean_overlap(double t) const;
  // 1 - t int rho_A / (a_j - a)^2 from subordination (independent route).
  double principal_overlap_subordination(double t) const;

  SpikeOverlapState transverse_pde(double t_max, std::size_t x_points) const;
  const SpikeOverlapState& transverse() const;

  double h(double s) const;
  double h_resolvent(double s) const;
  double variance_g2(double t) const;
  double moments_gn(std::size_t n, double t) const;
  std::vector<double> moment_ladder(std::size_t n_max, double t) const;

 private:
  double phi_unchecked(double s) const;
  void check_evaluable(double t, const char* where) const;
  double pde_horizon() const;

  SpectralModel model_;
  std::size_t j_;
  double a_j_;
  double horizon_;
  SpikeOptions options_;
  burgers::BurgersSolver solver_;
  SpikeTrajectory traj_;
  mutable std::once_flag pde_once_;
  mutable std::unique_ptr<SpikeOverlapState> pde_;
};

struct SampleStats {
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double ks_normal = 0.0;  // sup distance to the fitted normal CDF
};
SampleStats sample_stats(const std::vector<double>& xs);

struct CltSummary {
  std::size_t n = 0;
  std::size_t n_samples = 0;
  double t = 0.0;
  double g2 = 0.0;
  double mean_overlap_mc = 0.0;
  double mean_overlap_theory = 0.0;
  // sqrt(N)(overlap - sample mean)
  SampleStats unconditional;
  // sqrt(N)(overlap - exp(-1/2 int phi_N)), phi_N from the sampled eigenvalue path
  SampleStats conditional;

  double ratio_unconditional() const { return g2 > 0 ? unconditional.variance / g2 : 0.0; }
  double ratio_conditional() const { return g2 > 0 ? conditional.variance / g2 : 0.0; }
  std::string to_text() const;
};

// One spike, alive at cfg.t_max. cfg.checkpoints is replaced by path_points
// equal intervals on [0, t_max] (rounded up to even for Simpson).
CltSummary clt_report(const SpectralModel& model, const mc::MatrixPathConfig& cfg,
                      const SpikeOptions& options = {}, std::size_t path_points = 40);

}  // namespace rml::spike
