#include "rml/stationary_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rml/error.hpp"

namespace rml::kernel {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTermTol = 1e-14;
}  // namespace

double chebyshev_u(std::size_t n, double x) {
  double prev = 1.0;
  if (n == 0) return prev;
  double cur = 2.0 * x;
  for (std::size_t k = 1; k < n; ++k) {
    double next = 2.0 * x * cur - prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

ChebyshevJet chebyshev_u_jet(std::size_t n, double x) {
  ChebyshevJet prev{1.0, 0.0, 0.0, 0.0};
  if (n == 0) return prev;
  ChebyshevJet cur{2.0 * x, 2.0, 0.0, 0.0};
  for (std::size_t k = 1; k < n; ++k) {
    ChebyshevJet next;
    next.u = 2.0 * x * cur.u - prev.u;
    next.d1 = 2.0 * cur.u + 2.0 * x * cur.d1 - prev.d1;
    next.d2 = 4.0 * cur.d1 + 2.0 * x * cur.d2 - prev.d2;
    next.d3 = 6.0 * cur.d2 + 2.0 * x * cur.d3 - prev.d3;
    prev = cur;
    cur = next;
  }
  return cur;
}

void KernelQuery::validate() const {
  const char* where = "stationary-kernel/KernelQuery";
  if (!(std::abs(lambda) <= 2.0) || !(std::abs(mu) <= 2.0)) throw DomainError(where, "|lambda|, |mu| must be <= 2");
  if (!(t > 0.0)) throw DomainError(where, "t must be > 0 (the series diverges otherwise)");
  if (n_terms && *n_terms < 1) throw DomainError(where, "n_terms must be >= 1");
}

std::size_t auto_terms(double t) {
  // |U_n(x)| <= n + 1 on [-1,1], so e^{-nt/2}(n+1)^2 bounds each term.
  std::size_t n = 0;
  while (std::exp(-0.5 * static_cast<double>(n) * t) * std::pow(static_cast<double>(n) + 1.0, 2) >= kTermTol) ++n;
  return n;
}

double kernel_series(const KernelQuery& q) {
  q.validate();
  const std::size_t terms = q.n_terms ? *q.n_terms : auto_terms(q.t);
  const double x = 0.5 * q.lambda;
  const double y = 0.5 * q.mu;
  double ux_prev = 1.0, ux = 2.0 * x;
  double uy_prev = 1.0, uy = 2.0 * y;
  // Neumaier summation.
  double sum = 0.0, comp = 0.0;
  for (std::size_t n = 0; n < terms; ++n) {
    double un_x, un_y;
    if (n == 0) {
      un_x = 1.0;
      un_y = 1.0;
    } else if (n == 1) {
      un_x = ux;
      un_y = uy;
    } else {
      double nx = 2.0 * x * ux - ux_prev;
      double ny = 2.0 * y * uy - uy_prev;
      ux_prev = ux;
      ux = nx;
      uy_prev = uy;
      uy = ny;
      un_x = ux;
      un_y = uy;
    }
    double term = std::exp(-0.5 * static_cast<double>(n) * q.t) * un_x * un_y;
    double s = sum + term;
    if (std::abs(sum) >= std::abs(term)) {
      comp += (sum - s) + term;
    } else {
      comp += (term - s) + sum;
    }
    sum = s;
  }
  return sum + comp;
}

double kernel_closed(const KernelQuery& q) {
  q.validate();
  // The denominator 1 - q lm + q^2 (l^2 + m^2 - 2) - q^3 lm + q^4 with q = e^{-t/2}
  // factors as prod over +/- of (1-q)^2 + 4q sin^2((a +/- b)/2), l = 2cos a, m = 2cos b.
  const double qq = std::exp(-0.5 * q.t);
  const double omq = -std::expm1(-0.5 * q.t);
  const double a = std::acos(std::clamp(0.5 * q.lambda, -1.0, 1.0));
  const double b = std::acos(std::clamp(0.5 * q.mu, -1.0, 1.0));
  const double sp = std::sin(0.5 * (a + b));
  const double sm = std::sin(0.5 * (a - b));
  const double den = (omq * omq + 4.0 * qq * sp * sp) * (omq * omq + 4.0 * qq * sm * sm);
  if (den < 1e-300) throw SingularKernelError("stationary-kernel/kernel_closed", "denominator vanishes");
  return -std::expm1(-q.t) / den;
}

double verify_eigenrelation(std::size_t n, double lambda, std::size_t quad_points) {
  const char* where = "stationary-kernel/verify_eigenrelation";
  if (!(std::abs(lambda) < 2.0)) throw DomainError(where, "|lambda| must be < 2");
  if (n > 30) throw DomainError(where, "n must be <= 30");
  if (quad_points < 16) throw DomainError(where, "need at least 16 quadrature points");
  if (n == 0) return 0.0;
  // f(mu) = U_n(mu/2). With the semicircle weight w(mu) = sqrt(4 - mu^2)/(2 pi):
  // PV int (f(l) - f(m))/(l - m)^2 w dm = f'(l) l/2 - int R(m)/(m - l)^2 w dm,
  // R(m) = f(m) - f(l) - f'(l)(m - l), since PV int w/(m - l) dm = -l/2.
  auto jl = chebyshev_u_jet(n, 0.5 * lambda);
  const double f0 = jl.u, f1 = 0.5 * jl.d1, f2 = 0.25 * jl.d2, f3 = 0.125 * jl.d3;
  // mu = 2 cos(theta), w dmu = (2/pi) sin^2(theta) dtheta; midpoint rule in theta.
  double integral = 0.0;
  const double h = kPi / static_cast<double>(quad_points);
  for (std::size_t k = 0; k < quad_points; ++k) {
    double th = (static_cast<double>(k) + 0.5) * h;
    double mu = 2.0 * std::cos(th);
    double d = mu - lambda;
    double ratio;
    if (std::abs(d) < 1e-4) {
      ratio = 0.5 * f2 + f3 * d / 6.0;
    } else {
      ratio = (chebyshev_u(n, 0.5 * mu) - f0 - f1 * d) / (d * d);
    }
    integral += ratio * (2.0 / kPi) * std::sin(th) * std::sin(th) * h;
  }
  double result = f1 * 0.5 * lambda - integral;
  double res = std::abs(result - 0.5 * static_cast<double>(n) * f0);
  if (!std::isfinite(res)) throw NumericError(where, "quadrature produced a non-finite value");
  return res;
}

double chebyshev_inner_product(std::size_t m, std::size_t n, std::size_t points) {
  double s = 0.0;
  const double np1 = static_cast<double>(points) + 1.0;
  for (std::size_t k = 1; k <= points; ++k) {
    double th = static_cast<double>(k) * kPi / np1;
    double w = kPi / np1 * std::sin(th) * std::sin(th);
    double x = std::cos(th);
    s += w * chebyshev_u(m, x) * chebyshev_u(n, x);
  }
  // (1/2pi) int U_m U_n sqrt(4 - l^2) dl = (2/pi) int U_m U_n sqrt(1 - x^2) dx.
  return 2.0 / kPi * s;
}

}  // namespace rml::kernel
