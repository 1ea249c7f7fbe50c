#include "rml/dyson.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "rml/error.hpp"
#include "rml/matrix_mc.hpp"

namespace rml::dyson {

namespace {

struct Increment {
  double dt;
  Eigen::VectorXd db;
};

// Brownian bridge split of an increment into two halves with the same sum.
std::pair<Increment, Increment> bridge_split(const Increment& inc, Rng& rng) {
  const double half = 0.5 * inc.dt;
  const double sd = std::sqrt(0.25 * inc.dt);
  Increment first{half, inc.db};
  for (Eigen::Index i = 0; i < first.db.size(); ++i) first.db(i) = 0.5 * inc.db(i) + sd * rng.gaussian();
  Increment second{half, inc.db - first.db};
  return {std::move(first), std::move(second)};
}

double min_gap(const Eigen::VectorXd& lam) {
  double g = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i + 1 < lam.size(); ++i) g = std::min(g, lam(i) - lam(i + 1));
  return g;
}

void coulomb_drift(const Eigen::VectorXd& lam, Eigen::VectorXd& drift, Eigen::ArrayXd& buf) {
  const Eigen::Index n = lam.size();
  drift.setZero(n);
  buf.resize(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const Eigen::Index m = n - i - 1;
    auto f = buf.head(m);
    f = inv_n / (lam(i) - lam.tail(m).array());
    drift(i) += f.sum();
    drift.tail(m).array() -= f;
  }
}

bool strictly_decreasing(const Eigen::VectorXd& lam) {
  for (Eigen::Index i = 0; i + 1 < lam.size(); ++i)
    if (!(lam(i) > lam(i + 1))) return false;
  return true;
}

Eigen::VectorXd warm_start_spectrum(const std::vector<double>& values, double beta, double t0, Rng& rng) {
  const std::size_t n = values.size();
  if (beta == 1.0) {
    Eigen::MatrixXd x = mc::diagonal_source<double>(values) + mc::sample_hermitian_increment<double>(n, t0, rng);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x, Eigen::EigenvaluesOnly);
    return es.eigenvalues().reverse();
  }
  if (beta == 2.0) {
    Eigen::MatrixXcd x = mc::diagonal_source<mc::Complex>(values) + mc::sample_hermitian_increment<mc::Complex>(n, t0, rng);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(x, Eigen::EigenvaluesOnly);
    return es.eigenvalues().reverse();
  }
  throw DomainError("dyson-sde/integrate_dyson",
                    "coincident initial eigenvalues need a matrix warm start, only available for beta in {1,2}");
}

}  // namespace

std::size_t EigenvaluePath::index_of(double t) const {
  auto it = std::lower_bound(times.begin(), times.end(), t - 1e-12);
  if (it == times.end() || std::abs(*it - t) > 1e-12)
    throw InputError("dyson-sde/EigenvaluePath", "time " + std::to_string(t) + " is not a stored path time");
  return static_cast<std::size_t>(it - times.begin());
}

EigenvaluePath integrate_dyson(const DiscreteSpectrum& spectrum, double beta, double t_max, double dt_cap,
                               Rng& rng, const DysonOptions& options) {
  const char* where = "dyson-sde/integrate_dyson";
  const std::size_t n = spectrum.size();
  if (n == 0) throw InputError(where, "empty spectrum");
  if (!(beta > 0.0)) throw DomainError(where, "beta must be > 0");
  if (!(dt_cap > 0.0)) throw DomainError(where, "dt_cap must be > 0");
  if (!(t_max >= 0.0)) throw DomainError(where, "t_max must be >= 0");
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (spectrum.values[i] < spectrum.values[i + 1]) throw InputError(where, "spectrum must be non-increasing");

  std::vector<double> marks;
  for (double m : options.landmarks)
    if (m > 0.0 && m < t_max) marks.push_back(m);
  std::sort(marks.begin(), marks.end());
  marks.push_back(t_max);

  EigenvaluePath path;
  path.beta = beta;
  std::vector<Eigen::VectorXd> cols;
  Eigen::VectorXd lam = Eigen::Map<const Eigen::VectorXd>(spectrum.values.data(), static_cast<Eigen::Index>(n));
  path.times.push_back(0.0);
  cols.push_back(lam);

  double t = 0.0;
  if (n > 1 && t_max > 0.0 && !(min_gap(lam) > 0.0)) {
    double t0 = options.warm_start_time > 0.0 ? options.warm_start_time : 1e-2 * t_max;
    t0 = std::min(t0, marks.front());
    lam = warm_start_spectrum(spectrum.values, beta, t0, rng);
    t = t0;
    path.warm_start = t0;
    path.times.push_back(t);
    cols.push_back(lam);
  }

  const double nn = static_cast<double>(n);
  const double noise = std::sqrt(2.0 / (beta * nn));
  std::size_t mark = 0;
  while (mark < marks.size() && marks[mark] <= t) ++mark;

  std::vector<Increment> pending;
  Eigen::VectorXd drift(n), trial(n);
  Eigen::ArrayXd buf(n);
  std::size_t consecutive = 0;
  while (t < t_max && mark < marks.size()) {
    const double target = marks[mark];
    coulomb_drift(lam, drift, buf);
    double cap = std::min(dt_cap, target - t);
    if (n > 1) cap = std::min(cap, options.kappa * nn * std::pow(min_gap(lam), 2));
    cap = std::max(cap, std::min(options.dt_floor, target - t));

    Increment inc;
    if (pending.empty()) {
      inc.dt = cap;
      inc.db.resize(static_cast<Eigen::Index>(n));
      double sd = std::sqrt(cap);
      for (std::size_t i = 0; i < n; ++i) inc.db(static_cast<Eigen::Index>(i)) = sd * rng.gaussian();
    } else {
      inc = std::move(pending.back());
      pending.pop_back();
      while (inc.dt > cap * (1.0 + 1e-12) && inc.dt > options.dt_floor) {
        auto halves = bridge_split(inc, rng);
        pending.push_back(std::move(halves.second));
        inc = std::move(halves.first);
      }
    }

    trial = lam + noise * inc.db + inc.dt * drift;
    bool ordered = n == 1 || strictly_decreasing(trial);
    if (!ordered && inc.dt > options.dt_floor) {
      ++path.rejections;
      if (++consecutive > options.max_consecutive_rejections)
        throw StiffnessError(where, "more than " + std::to_string(options.max_consecutive_rejections) +
                                        " consecutive rejected steps at t=" + std::to_string(t));
      auto halves = bridge_split(inc, rng);
      pending.push_back(std::move(halves.second));
      pending.push_back(std::move(halves.first));
      continue;
    }
    if (!ordered) {
      std::sort(trial.data(), trial.data() + n, std::greater<double>());
      ++path.floor_sorts;
    }
    consecutive = 0;

    double bound = 10.0 * std::sqrt(2.0 * inc.dt / (beta * nn)) + inc.dt * drift.cwiseAbs().maxCoeff();
    if ((trial - lam).cwiseAbs().maxCoeff() > bound) ++path.jump_flags;
    if (!trial.allFinite()) throw NumericError(where, "non-finite eigenvalue at t=" + std::to_string(t));

    lam = trial;
    t += inc.dt;
    ++path.steps;
    bool hit = pending.empty() && std::abs(t - target) <= 1e-12 * std::max(1.0, target);
    if (hit) {
      t = target;
      ++mark;
    }
    if (options.store_all_steps || hit) {
      path.times.push_back(t);
      cols.push_back(lam);
    }
  }

  path.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) path.values.col(static_cast<Eigen::Index>(k)) = cols[k];
  return path;
}

void overlap_rhs(const Eigen::VectorXd& lambda, const Eigen::VectorXd& u, Eigen::VectorXd& out) {
  const Eigen::Index n = lambda.size();
  out.setZero(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  thread_local Eigen::ArrayXd d, flux;
  d.resize(n);
  flux.resize(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const Eigen::Index m = n - i - 1;
    d.head(m) = lambda(i) - lambda.tail(m).array();
    flux.head(m) = inv_n * (u.tail(m).array() - u(i)) / d.head(m).square();
    out(i) += flux.head(m).sum();
    out.tail(m).array() -= flux.head(m);
  }
}

OverlapVector integrate_overlap_ode(const EigenvaluePath& path, std::size_t j,
                                    const std::vector<double>& output_times) {
  const char* where = "dyson-sde/integrate_overlap_ode";
  const std::size_t n = path.n();
  if (j >= n) throw DomainError(where, "reference index out of range");
  if (path.times.empty()) throw InputError(where, "empty path");

  std::vector<char> emit(path.times.size(), output_times.empty() ? 1 : 0);
  for (double t : output_times) emit[path.index_of(t)] = 1;

  OverlapVector out;
  out.j = j;
  std::vector<Eigen::VectorXd> cols;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  u(static_cast<Eigen::Index>(j)) = 1.0;
  Eigen::VectorXd rhs(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  if (emit[0]) {
    out.times.push_back(path.times[0]);
    cols.push_back(u);
  }
  for (std::size_t k = 0; k < path.times.size() && n > 1; ++k) {
    Eigen::VectorXd lam = path.values.col(static_cast<Eigen::Index>(k));
    if (!(min_gap(lam) > 1e-14 * std::max(1.0, lam.cwiseAbs().maxCoeff())))
      throw SingularKernelError(where, "coincident eigenvalues at stored time t=" + std::to_string(path.times[k]));
  }
  for (std::size_t k = 0; k + 1 < path.times.size(); ++k) {
    Eigen::VectorXd lam = path.values.col(static_cast<Eigen::Index>(k));
    double dt_total = path.times[k + 1] - path.times[k];
    // Euler is a convex update when dt * max_i sum_k w_ik <= 1.
    double deg = 0.0;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
      double s = 0.0;
      for (Eigen::Index m = 0; m < static_cast<Eigen::Index>(n); ++m)
        if (m != i) s += inv_n / std::pow(lam(i) - lam(m), 2);
      deg = std::max(deg, s);
    }
    const double need = dt_total * deg;
    if (need > static_cast<double>(kMaxExplicitSubsteps)) {
      // (I + dt L) u' = u with L the graph Laplacian: an M-matrix with unit
      // column sums, so mass and positivity carry over.
      const auto ni = static_cast<Eigen::Index>(n);
      Eigen::MatrixXd a = Eigen::MatrixXd::Identity(ni, ni);
      for (Eigen::Index i = 0; i < ni; ++i)
        for (Eigen::Index m = i + 1; m < ni; ++m) {
          double w = dt_total * inv_n / std::pow(lam(i) - lam(m), 2);
          a(i, m) -= w;
          a(m, i) -= w;
          a(i, i) += w;
          a(m, m) += w;
        }
      auto ldlt = a.ldlt();
      Eigen::VectorXd next = ldlt.solve(u);
      // Refine with the residual in flux form, which is accurate to roundoff
      // even when dt * w is huge.
      for (int it = 0; it < 2; ++it) {
        Eigen::VectorXd r = u - next;
        for (Eigen::Index i = 0; i < ni; ++i)
          for (Eigen::Index m = i + 1; m < ni; ++m) {
            double f = -a(i, m) * (next(i) - next(m));
            r(i) -= f;
            r(m) += f;
          }
        next += ldlt.solve(r);
      }
      out.max_rhs_sum = std::max(out.max_rhs_sum, std::abs(next.sum() - u.sum()));
      u = next;
      ++out.substeps;
      ++out.implicit_steps;
    } else {
      std::size_t sub = std::max<std::size_t>(static_cast<std::size_t>(std::ceil(need)), 1);
      double dt = dt_total / static_cast<double>(sub);
      for (std::size_t s = 0; s < sub; ++s) {
        overlap_rhs(lam, u, rhs);
        out.max_rhs_sum = std::max(out.max_rhs_sum, dt * std::abs(rhs.sum()));
        u += dt * rhs;
        ++out.substeps;
      }
    }
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      if (u(i) < -1e-12) {
        ++out.clipped;
        u(i) = 0.0;
      }
    }
    out.max_mass_error = std::max(out.max_mass_error, std::abs(u.sum() - 1.0));
    if (emit[k + 1]) {
      out.times.push_back(path.times[k + 1]);
      cols.push_back(u);
    }
  }
  out.u.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.u.col(static_cast<Eigen::Index>(k)) = cols[k];
  return out;
}

}  // namespace rml::dyson
