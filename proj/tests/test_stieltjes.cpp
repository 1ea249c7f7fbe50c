#include <doctest.h>

#include <numbers>

#include "rml/error.hpp"
#include "rml/stationary_kernel.hpp"
#include "rml/stieltjes.hpp"
#include "support.hpp"

using namespace rml;
using burgers::cplx;
using std::numbers::pi;

namespace {

// Closed-form semicircle Stieltjes transform, branch with Im G < 0 for Im z > 0.
cplx semicircle_g(cplx z, double t) {
  cplx r = std::sqrt(z * z - 4.0 * t);
  cplx g = (z - r) / (2.0 * t);
  if (g.imag() > 0.0) g = (z + r) / (2.0 * t);
  return g;
}

const burgers::BurgersSolver& semicircle_solver() {
  static burgers::BurgersSolver s(SpectralModel(Semicircle{2.0}));
  return s;
}

}  // namespace

TEST_CASE("solve_G at t = 0") {
  burgers::BurgersSolver zero{SpectralModel(ZeroBulk{})};
  cplx z(0.4, 0.7);
  CHECK(std::abs(zero.solve_G(z, 0.0).g - 1.0 / z) < 1e-15);
  // Semicircle at t = 0 is the Stieltjes transform of the bulk itself.
  CHECK(std::abs(semicircle_solver().solve_G(z, 0.0).g - semicircle_g(z, 1.0)) < 1e-6);
}

TEST_CASE("semicircle oracle") {
  burgers::BurgersSolver zero{SpectralModel(ZeroBulk{})};
  auto sol = zero.solve_G(cplx(0, 1), 1.0);
  CHECK(std::abs(sol.g - cplx(0.0, (1.0 - std::sqrt(5.0)) / 2.0)) < 1e-10);
  for (double t : {0.25, 1.0})
    for (int k = 0; k < 20; ++k) {
      cplx z(-3.0 + 6.0 * k / 19.0, 0.05 + 0.95 * ((k * 7) % 20) / 19.0);
      auto s = zero.solve_G(z, t);
      CHECK(std::abs(s.g - semicircle_g(z, t)) < 1e-10);
    }
}

TEST_CASE("solver contract: residual and Herglotz") {
  const auto& s = semicircle_solver();
  auto sol = s.solve_G(cplx(0.3, 0.05), 0.5);
  CHECK(sol.residual < 1e-12);
  CHECK(s.residual(sol.g, cplx(0.3, 0.05), 0.5) < 1e-12);
  for (double x : {-3.0, -1.0, 0.0, 0.5, 2.5})
    for (double y : {0.01, 0.3, 2.0}) CHECK(s.solve_G(cplx(x, y), 0.7).g.imag() < 0.0);
  CHECK_THROWS_AS(s.solve_G(cplx(0.0, 0.0), 1.0), DomainError);
  CHECK_THROWS_AS(s.solve_G(cplx(0.0, 1.0), -1.0), DomainError);
}

TEST_CASE("property: large-z decay") {
  const auto& s = semicircle_solver();
  const double t = 1.0, r = 10.0 * (2.0 + 2.0 * std::sqrt(t));
  for (int k = 0; k < 12; ++k) {
    double th = 0.1 + (pi - 0.2) * k / 11.0;
    cplx z = std::polar(1.3 * r, th);
    CHECK(std::abs(z * s.solve_G(z, t).g - 1.0) < 2.0 / std::abs(z));
  }
}

TEST_CASE("density examples") {
  burgers::BurgersSolver zero{SpectralModel(ZeroBulk{})};
  CHECK(std::abs(zero.density(0.0, 1.0) - 1.0 / pi) < 1e-6);
  CHECK(std::abs(zero.density(3.0, 1.0)) < 1e-6);
  // Semicircle radius 2 sqrt(t) at an interior point.
  double l = 0.8;
  CHECK(std::abs(zero.density(l, 1.0) - std::sqrt(4.0 - l * l) / (2 * pi)) < 1e-6);
  auto st = semicircle_solver().bulk_state(0.5, 96, 21);
  CHECK(std::abs(st.mass - 1.0) < 1e-6);
}

TEST_CASE("velocity examples") {
  burgers::BurgersSolver zero{SpectralModel(ZeroBulk{})};
  CHECK(std::abs(zero.velocity(1.0, 1.0) - 0.5) < 1e-6);
  CHECK(std::abs(zero.velocity(-0.6, 2.0) + 0.15) < 1e-6);
  CHECK(std::abs(semicircle_solver().velocity(0.0, 0.5)) < 1e-6);
}

TEST_CASE("quantile flow speed equals the velocity field") {
  const auto& s = semicircle_solver();
  const double x = 0.3, t = 0.5, h = 1e-3;
  double dl = (s.quantile(x, t + h) - s.quantile(x, t - h)) / (2 * h);
  double l = s.quantile(x, t);
  CHECK(std::abs(dl - s.velocity(l, t)) < 1e-3);
}

TEST_CASE("quantile examples") {
  const auto& s = semicircle_solver();
  CHECK(std::abs(s.quantile(0.5, 0.7)) < 1e-6);
  burgers::BurgersSolver zero{SpectralModel(ZeroBulk{})};
  CHECK(std::abs(zero.quantile(1e-7, 1.0) - 2.0) < 1e-3);
  // Radius grows to sqrt(r^2 + 4t) for the semicircle; compare with the closed-form quantile.
  double r = std::sqrt(4.0 + 4.0 * 0.7);
  for (double x : {0.1, 0.25, 0.9}) {
    double q = s.quantile(x, 0.7);
    CHECK(std::abs(1.0 - test::semicircle_cdf(q, r) - x) < 1e-6);
  }
  SpectralModel u(Uniform{-1.0, 1.0});
  burgers::BurgersSolver us(u);
  CHECK(us.quantile(0.2, 0.0) == quantile_a(u, 0.2));
  CHECK_THROWS_AS(s.quantile(0.0, 1.0), DomainError);
}

TEST_CASE("support edges") {
  burgers::BurgersSolver zero{SpectralModel(ZeroBulk{})};
  for (double t : {0.5, 1.0, 9.0}) {
    auto [lo, hi] = zero.support(t);
    CHECK(std::abs(hi - 2.0 * std::sqrt(t)) < 1e-9);
    CHECK(std::abs(lo + 2.0 * std::sqrt(t)) < 1e-9);
  }
  // Edge of the 4096-point quantile grid, not of the continuum density.
  auto [lo, hi] = semicircle_solver().support(1.0);
  CHECK(std::abs(hi - std::sqrt(8.0)) < 1e-4);
  CHECK(std::abs(lo + std::sqrt(8.0)) < 1e-4);
}

TEST_CASE("real point outside the support") {
  burgers::BurgersSolver zero{SpectralModel(ZeroBulk{})};
  auto p = zero.real_point(3.0, 1.0);
  CHECK(std::abs(p.g - (3.0 - std::sqrt(5.0)) / 2.0) < 1e-13);
  CHECK_THROWS_AS(zero.real_point(1.0, 1.0), DomainError);
}

TEST_CASE("local resolvent") {
  const auto& s = semicircle_solver();
  cplx z(0.2, 0.1);
  CHECK(std::abs(s.local_resolvent(z, 0.5, 0.0) - 1.0 / (z - 0.5)) < 1e-14);
  cplx integral = 0.0;
  for (std::size_t k = 0; k < s.grid_a().size(); ++k) integral += s.grid_w()[k] * s.local_resolvent(z, s.grid_a()[k], 0.3);
  CHECK(std::abs(integral - s.solve_G(z, 0.3).g) < 1e-8);
  burgers::BurgersSolver zero{SpectralModel(ZeroBulk{})};
  cplx w(0.4, 0.2);
  CHECK(std::abs(zero.local_resolvent(w, 0.0, 0.8) - zero.solve_G(w, 0.8).g) < 1e-11);
}

TEST_CASE("overlap kernel normalization") {
  const auto& s = semicircle_solver();
  const double t = 0.25;
  auto [lo, hi] = s.support(t);
  // Gauss-Chebyshev (second kind) in lambda absorbs the square-root edges.
  const int m = 400;
  double acc = 0.0;
  const double mid = 0.5 * (lo + hi), hw = 0.5 * (hi - lo);
  for (int k = 1; k <= m; ++k) {
    double th = pi * k / (m + 1);
    double l = mid + hw * std::cos(th);
    double rho = s.density(l, t);
    acc += s.overlap_kernel(l, 0.0, t) * rho * hw * std::sin(th) * pi / (m + 1);
  }
  CHECK(std::abs(acc - 1.0) < 1e-4);
  CHECK_THROWS_AS(s.overlap_kernel(hi + 0.1, 0.0, t), DomainError);
  CHECK_THROWS_AS(s.overlap_kernel(0.0, 2.5, t), DomainError);
}

TEST_CASE("stationary OU kernel through the time change matches the closed form") {
  const auto& s = semicircle_solver();
  const double t = 0.25;
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 5; ++b) {
      double l = -1.6 + 0.8 * a, m = -1.6 + 0.8 * b;
      double w = burgers::stationary_overlap_kernel(s, l, m, t);
      double k = kernel::kernel_closed({l, m, t, std::nullopt});
      CHECK(std::abs(w - k) < 1e-3);
    }
}

TEST_CASE("bulk state invariants") {
  const auto& s = semicircle_solver();
  auto st = s.bulk_state(0.5, 96, 41);
  for (double r : st.rho) CHECK(r >= 0.0);
  for (std::size_t k = 0; k + 1 < st.lambda_of_x.size(); ++k) CHECK(st.lambda_of_x[k] >= st.lambda_of_x[k + 1]);
  // d lambda / dx * rho(lambda) = -1 at interior points.
  for (std::size_t k = 5; k + 5 < st.x_grid.size(); k += 5) {
    double dx = st.x_grid[k + 1] - st.x_grid[k - 1];
    double dl = (st.lambda_of_x[k + 1] - st.lambda_of_x[k - 1]) / dx;
    CHECK(std::abs(dl * s.density(st.lambda_of_x[k], 0.5) + 1.0) < 5e-3);
  }
}

TEST_CASE("finite-N mode includes spikes as atoms") {
  burgers::SolverOptions opt;
  opt.finite_n = 100;
  burgers::BurgersSolver fin(SpectralModel(ZeroBulk{}, {5.0}), opt);
  cplx z(1.0, 0.5);
  cplx g = fin.solve_G(z, 0.0).g;
  CHECK(std::abs(g - (0.99 / z + 0.01 / (z - 5.0))) < 1e-14);
}
