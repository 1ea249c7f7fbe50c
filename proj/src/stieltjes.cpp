#include "rml/stieltjes.hpp"

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numbers>

#include "rml/error.hpp"

namespace rml::burgers {

namespace {

constexpr double kPi = std::numbers::pi;
const double kEps[3] = {1e-3, 5e-4, 2.5e-4};

// Intercept of the least-squares line through (eps_k, g_k).
cplx linear_intercept(const double* eps, const cplx* g, std::size_t n) {
  if (n == 1) return g[0];
  double me = 0.0;
  cplx mg = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    me += eps[k];
    mg += g[k];
  }
  me /= static_cast<double>(n);
  mg /= static_cast<double>(n);
  double see = 0.0;
  cplx seg = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    see += (eps[k] - me) * (eps[k] - me);
    seg += (eps[k] - me) * (g[k] - mg);
  }
  return mg - (seg / see) * me;
}

template <class F>
double bracket_root(F f, double lo, double hi, const char* where) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0)) throw NumericError(where, "root is not bracketed");
  std::uintmax_t iters = 300;
  auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-15 * std::max(1.0, std::abs(a)); };
  auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
  return 0.5 * (r.first + r.second);
}

}  // namespace

QuantileFunction::QuantileFunction(double lo, double hi, std::vector<double> cosine_coeffs)
    : lo_(lo), hi_(hi), a_(std::move(cosine_coeffs)) {
  total_ = tail_theta(kPi);
}

double QuantileFunction::tail_theta(double theta) const {
  double s = 0.5 * a_[0] * theta;
  for (std::size_t j = 1; j < a_.size(); ++j) s += a_[j] * std::sin(static_cast<double>(j) * theta) / static_cast<double>(j);
  return s;
}

double QuantileFunction::tail_mass(double lambda) const {
  if (hi_ <= lo_) return lambda < lo_ ? 1.0 : 0.0;
  double mid = 0.5 * (lo_ + hi_);
  double hw = 0.5 * (hi_ - lo_);
  double c = std::clamp((lambda - mid) / hw, -1.0, 1.0);
  return tail_theta(std::acos(c)) / total_;
}

double QuantileFunction::operator()(double x) const {
  if (hi_ <= lo_) return lo_;
  double mid = 0.5 * (lo_ + hi_);
  double hw = 0.5 * (hi_ - lo_);
  double target = x * total_;
  auto f = [&](double th) { return tail_theta(th) - target; };
  double th = bracket_root(f, 0.0, kPi, "stieltjes-burgers/quantile_lambda");
  return mid + hw * std::cos(th);
}

BurgersSolver::BurgersSolver(SpectralModel model, SolverOptions options)
    : model_(std::move(model)), options_(std::move(options)) {
  const char* where = "stieltjes-burgers/BurgersSolver";
  if (!(options_.damping > 0.0 && options_.damping <= 1.0)) throw ConfigError(where, "damping must be in (0,1]");
  if (options_.grid_points < 2) throw ConfigError(where, "grid needs at least 2 points");
  double bulk_weight = 1.0;
  if (options_.finite_n) {
    if (*options_.finite_n <= model_.spike_count()) throw ConfigError(where, "finite N must exceed spike count");
    bulk_weight = 1.0 - static_cast<double>(model_.spike_count()) / static_cast<double>(*options_.finite_n);
  }
  if (model_.zero_bulk()) {
    a_ = {0.0};
    w_ = {bulk_weight};
  } else {
    const std::size_t m = options_.grid_points;
    const double h = 1.0 / static_cast<double>(m - 1);
    a_.resize(m);
    w_.assign(m, h * bulk_weight);
    w_.front() *= 0.5;
    w_.back() *= 0.5;
    for (std::size_t k = 0; k < m; ++k) a_[k] = bulk_quantile(model_.bulk(), static_cast<double>(k) * h);
  }
  bulk_hi_ = *std::max_element(a_.begin(), a_.end());
  bulk_lo_ = *std::min_element(a_.begin(), a_.end());
  if (options_.finite_n) {
    for (double s : model_.spikes()) {
      a_.push_back(s);
      w_.push_back(1.0 / static_cast<double>(*options_.finite_n));
    }
  }
  a_max_ = *std::max_element(a_.begin(), a_.end());
  a_min_ = *std::min_element(a_.begin(), a_.end());
}

cplx BurgersSolver::map(cplx g, cplx z, double t) const {
  const cplx omega = z - t * g;
  cplx s = 0.0;
  for (std::size_t k = 0; k < a_.size(); ++k) s += w_[k] / (omega - a_[k]);
  return s;
}

StieltjesSolution BurgersSolver::solve_G(cplx z, double t, std::optional<cplx> guess) const {
  const char* where = "stieltjes-burgers/solve_G";
  if (!(z.imag() > 0.0)) throw DomainError(where, "Im z must be > 0");
  if (!(t >= 0.0)) throw DomainError(where, "t must be >= 0");
  StieltjesSolution sol;
  sol.z = z;
  sol.t = t;
  if (t == 0.0) {
    sol.g = map(0.0, z, 0.0);
    sol.residual = 0.0;
    return sol;
  }
  cplx g = guess.value_or(1.0 / z);
  if (!(g.imag() < 0.0)) g = 1.0 / z;
  const double om = options_.damping;
  double res = 0.0;
  for (std::size_t it = 0; it < options_.max_iter; ++it) {
    cplx fg = map(g, z, t);
    res = std::abs(g - fg);
    sol.iterations = it;
    if (res < options_.tol) break;
    g = (1.0 - om) * g + om * fg;
  }
  if (!(res < options_.tol)) throw SolverError(where, "fixed point did not converge", res);
  if (!(g.imag() < 0.0)) throw SolverError(where, "Herglotz condition violated", res);
  sol.g = g;
  sol.residual = res;
  return sol;
}

std::pair<double, double> BurgersSolver::support(double t) const {
  const char* where = "stieltjes-burgers/support";
  if (t <= 0.0) return {bulk_lo_, bulk_hi_};
  const std::size_t nb = options_.finite_n ? a_.size() - model_.spike_count() : a_.size();
  double wsum = 0.0;
  for (std::size_t k = 0; k < nb; ++k) wsum += w_[k];
  auto edge = [&](double sign) {
    const double amax = sign > 0 ? bulk_hi_ : bulk_lo_;
    double wend = 0.0;
    for (std::size_t k = 0; k < nb; ++k)
      if (a_[k] == amax) wend += w_[k];
    auto f = [&](double d) {
      double omega = amax + sign * d;
      double s = 0.0;
      for (std::size_t k = 0; k < nb; ++k) s += w_[k] / ((omega - a_[k]) * (omega - a_[k]));
      return t * s - 1.0;
    };
    double dlo = 0.5 * std::sqrt(t * wend);
    double dhi = std::sqrt(t * wsum) * 1.0000001;
    double d = bracket_root(f, dlo, dhi, where);
    double omega = amax + sign * d;
    double g = 0.0;
    for (std::size_t k = 0; k < nb; ++k) g += w_[k] / (omega - a_[k]);
    return omega + t * g;
  };
  return {edge(-1.0), edge(1.0)};
}

RealPoint BurgersSolver::subordination_at(double omega) const {
  RealPoint p;
  p.omega = omega;
  for (std::size_t k = 0; k < a_.size(); ++k) {
    double r = 1.0 / (omega - a_[k]);
    double r2 = r * r;
    p.g += w_[k] * r;
    p.i2 += w_[k] * r2;
    p.i3 += w_[k] * r2 * r;
    p.i4 += w_[k] * r2 * r2;
  }
  return p;
}

RealPoint BurgersSolver::real_point(double lambda, double t) const {
  const char* where = "stieltjes-burgers/real_point";
  // lambda is outside the support exactly when its subordination point omega
  // lies outside the grid support with 1 - t * I2(omega) > 0.
  double sign = lambda > a_max_ ? 1.0 : (lambda < a_min_ ? -1.0 : 0.0);
  if (sign == 0.0) throw DomainError(where, "lambda lies inside the support");
  double g = 0.0;
  for (std::size_t k = 0; k < a_.size(); ++k) g += w_[k] / (lambda - a_[k]);
  bool converged = false;
  for (int it = 0; it < 200; ++it) {
    double omega = lambda - t * g;
    if (!(sign * (omega - (sign > 0 ? a_max_ : a_min_)) > 0.0)) break;
    RealPoint p = subordination_at(omega);
    double f = g - p.g;
    double fp = 1.0 - t * p.i2;
    double step = f / fp;
    g -= step;
    if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(g))) {
      converged = true;
      break;
    }
  }
  double omega = lambda - t * g;
  if (!(sign * (omega - (sign > 0 ? a_max_ : a_min_)) > 0.0))
    throw DomainError(where, "lambda lies inside the support");
  RealPoint p = subordination_at(omega);
  if (!(1.0 - t * p.i2 > 0.0)) throw DomainError(where, "lambda lies inside the support");
  if (!converged && std::abs(p.g - g) > 1e-12 * std::max(1.0, std::abs(g)))
    throw SolverError(where, "Newton iteration on the real axis did not converge", std::abs(p.g - g));
  return p;
}

BoundaryValue BurgersSolver::boundary_G(double lambda, double t) const {
  const char* where = "stieltjes-burgers/boundary_G";
  if (!(t > 0.0)) throw DomainError(where, "t must be > 0");
  auto [lo, hi] = support(t);
  BoundaryValue out;
  if (lambda > hi || lambda < lo) {
    out.g = real_point(lambda, t).g;
    return out;
  }
  double d = std::max(0.0, std::min(lambda - lo, hi - lambda));
  out.low_confidence = d < 1e-3;
  double scale = d < 4e-3 ? std::max(d / 4.0, 1e-8) / kEps[0] : 1.0;
  double eps[3];
  cplx g[3];
  std::size_t ok = 0;
  std::optional<cplx> guess;
  double last_res = 0.0;
  for (double e : kEps) {
    try {
      auto sol = solve_G(cplx(lambda, e * scale), t, guess);
      eps[ok] = e * scale;
      g[ok] = sol.g;
      guess = sol.g;
      ++ok;
    } catch (const SolverError& err) {
      last_res = err.residual();
    }
  }
  if (ok == 0) throw SolverError(where, "no epsilon in the ladder converged", last_res);
  out.g = linear_intercept(eps, g, ok);
  if (ok < 3) out.low_confidence = true;
  return out;
}

double BurgersSolver::density(double lambda, double t) const {
  double r = -boundary_G(lambda, t).g.imag() / kPi;
  if (r < 0.0 && r > -1e-8) r = 0.0;
  return r;
}

double BurgersSolver::velocity(double lambda, double t) const { return boundary_G(lambda, t).g.real(); }

QuantileFunction BurgersSolver::quantile_function(double t, std::size_t nodes) const {
  auto [lo, hi] = support(t);
  const std::size_t m = std::max<std::size_t>(nodes, 8);
  std::vector<double> f(m + 1, 0.0);
  const double mid = 0.5 * (lo + hi);
  const double hw = 0.5 * (hi - lo);
  if (hw <= 0.0) return QuantileFunction(lo, hi, {2.0 / kPi});
  for (std::size_t k = 1; k < m; ++k) {
    double th = kPi * static_cast<double>(k) / static_cast<double>(m);
    double lam = mid + hw * std::cos(th);
    double rho = t > 0.0 ? density(lam, t) : pdf(model_.bulk(), lam);
    f[k] = rho * hw * std::sin(th);
  }
  std::vector<double> a(m + 1, 0.0);
  for (std::size_t j = 0; j <= m; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k <= m; ++k) {
      double wk = (k == 0 || k == m) ? 0.5 : 1.0;
      s += wk * f[k] * std::cos(kPi * static_cast<double>(j * k) / static_cast<double>(m));
    }
    a[j] = 2.0 * s / static_cast<double>(m);
  }
  a[m] *= 0.5;
  return QuantileFunction(lo, hi, std::move(a));
}

double BurgersSolver::quantile(double x, double t) const {
  if (!(x > 0.0 && x < 1.0)) throw DomainError("stieltjes-burgers/quantile_lambda", "x must lie in (0,1)");
  if (!(t >= 0.0)) throw DomainError("stieltjes-burgers/quantile_lambda", "t must be >= 0");
  if (t == 0.0) return bulk_quantile(model_.bulk(), x);
  return quantile_function(t)(x);
}

cplx BurgersSolver::local_resolvent(cplx z, double a, double t) const {
  cplx g = solve_G(z, t).g;
  return 1.0 / (z - a - t * g);
}

double BurgersSolver::overlap_kernel(double lambda, double mu, double t) const {
  const char* where = "stieltjes-burgers/overlap_kernel_w";
  if (!(t > 0.0)) throw DomainError(where, "t must be > 0");
  auto [lo, hi] = support(t);
  if (!(lambda > lo && lambda < hi)) throw DomainError(where, "lambda outside the time-t support");
  if (mu < bulk_lo_ || mu > bulk_hi_) throw DomainError(where, "mu outside the time-0 support");
  cplx g = boundary_G(lambda, t).g;
  double v = g.real();
  double pr = std::max(0.0, -g.imag());
  double d = lambda - t * v - mu;
  return t / (d * d + t * t * pr * pr);
}

BulkState BurgersSolver::bulk_state(double t, std::size_t nodes, std::size_t x_points) const {
  BulkState s;
  s.t = t;
  auto q = quantile_function(t, nodes);
  auto [lo, hi] = q.support();
  const double mid = 0.5 * (lo + hi);
  const double hw = 0.5 * (hi - lo);
  const std::size_t m = std::max<std::size_t>(nodes, 8);
  double mass = 0.0;
  for (std::size_t kk = 0; kk <= m; ++kk) {
    std::size_t k = m - kk;
    double th = kPi * static_cast<double>(k) / static_cast<double>(m);
    double lam = mid + hw * std::cos(th);
    double rho = 0.0, v = 0.0;
    if (k != 0 && k != m) {
      if (t > 0.0) {
        cplx g = boundary_G(lam, t).g;
        rho = std::max(0.0, -g.imag() / kPi);
        v = g.real();
      } else {
        rho = pdf(model_.bulk(), lam);
      }
      mass += rho * hw * std::sin(th) * kPi / static_cast<double>(m);
    } else if (t > 0.0) {
      v = real_point(lam + (k == 0 ? 1e-9 : -1e-9) * std::max(1.0, hw), t).g;
    }
    s.lambda_grid.push_back(lam);
    s.rho.push_back(rho);
    s.v.push_back(v);
  }
  s.mass = mass;
  for (std::size_t i = 0; i < x_points; ++i) {
    double x = static_cast<double>(i + 1) / static_cast<double>(x_points + 1);
    s.x_grid.push_back(x);
    s.lambda_of_x.push_back(t > 0.0 ? q(x) : bulk_quantile(model_.bulk(), x));
  }
  return s;
}

double stationary_overlap_kernel(const BurgersSolver& semicircle, double lambda, double mu, double t) {
  if (!(t > 0.0)) throw DomainError("stieltjes-burgers/stationary_overlap_kernel", "t must be > 0");
  return semicircle.overlap_kernel(std::exp(0.5 * t) * lambda, mu, std::expm1(t));
}

}  // namespace rml::burgers
