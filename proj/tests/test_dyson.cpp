#include <doctest.h>

#include "rml/dyson.hpp"
#include "rml/error.hpp"
#include "rml/matrix_mc.hpp"
#include "support.hpp"

using namespace rml;
using rml::test::MeanVar;

TEST_CASE("N = 1 is a Brownian motion of variance (2/beta) t / N") {
  for (double beta : {1.0, 2.0}) {
    MeanVar m;
    for (std::size_t s = 0; s < 4000; ++s) {
      Rng rng = substream(31, Stream::DysonNoise, s);
      auto p = dyson::integrate_dyson({{0.5}}, beta, 2.0, 0.25, rng);
      m.add(p.values(0, static_cast<Eigen::Index>(p.times.size() - 1)));
    }
    double var = 2.0 / beta * 2.0;
    CHECK(std::abs(m.mean - 0.5) < 3 * m.std_err());
    CHECK(std::abs(m.variance() - var) < 3 * var * std::sqrt(2.0 / 3999.0));
  }
}

TEST_CASE("A = 0, N = 200: spectrum at t = 1 is the radius-2 semicircle") {
  Rng rng = substream(4, Stream::DysonNoise, 0);
  dyson::DysonOptions opt;
  opt.store_all_steps = false;
  auto p = dyson::integrate_dyson({std::vector<double>(200, 0.0)}, 1.0, 1.0, 1e-2, rng, opt);
  CHECK(p.warm_start > 0.0);
  auto last = p.values.col(p.values.cols() - 1);
  CHECK(test::kolmogorov(test::to_vector(last), [](double l) { return test::semicircle_cdf(l); }) < 0.05);
}

TEST_CASE("factor model: mean spike position follows 5 + t/5") {
  DiscreteSpectrum spec;
  spec.values.assign(200, 0.0);
  spec.values[0] = 5.0;
  std::vector<double> marks{5.0, 10.0, 20.0};
  std::vector<MeanVar> m(3);
  // N = 200 paths cost minutes each on one core; two paths with the analytic
  // per-path spread as the error floor.
  const std::size_t paths = 2;
  for (std::size_t s = 0; s < paths; ++s) {
    Rng rng = substream(17, Stream::DysonNoise, s);
    dyson::DysonOptions opt;
    opt.landmarks = marks;
    opt.store_all_steps = false;
    opt.warm_start_time = 1.0;
    auto p = dyson::integrate_dyson(spec, 1.0, 20.0, 5e-2, rng, opt);
    for (std::size_t k = 0; k < 3; ++k) m[k].add(p.values(0, static_cast<Eigen::Index>(p.index_of(marks[k]))));
  }
  for (std::size_t k = 0; k < 3; ++k) {
    double expect = 5.0 + marks[k] / 5.0;
    // Per-path sd of the spike is about sqrt(2 t / N).
    double se = std::max(m[k].std_err(), std::sqrt(2.0 * marks[k] / 200.0 / static_cast<double>(paths)));
    CHECK(std::abs(m[k].mean - expect) < 3 * se);
  }
}

TEST_CASE("ordering, landmarks and determinism") {
  auto spec = discretize(SpectralModel(Semicircle{2.0}), 30);
  dyson::DysonOptions opt;
  opt.landmarks = {0.1, 0.25};
  Rng r1 = substream(9, Stream::DysonNoise, 0), r2 = substream(9, Stream::DysonNoise, 0);
  auto a = dyson::integrate_dyson(spec, 2.0, 0.5, 1e-3, r1, opt);
  auto b = dyson::integrate_dyson(spec, 2.0, 0.5, 1e-3, r2, opt);
  CHECK((a.values - b.values).norm() == 0.0);
  CHECK(a.times.back() == 0.5);
  CHECK_NOTHROW(a.index_of(0.1));
  CHECK_NOTHROW(a.index_of(0.25));
  CHECK(a.values.allFinite());
  for (Eigen::Index k = 0; k < a.values.cols(); ++k)
    for (Eigen::Index i = 0; i + 1 < a.values.rows(); ++i) CHECK(a.values(i, k) > a.values(i + 1, k));
  CHECK(a.jump_flags == 0);
}

TEST_CASE("stiffness error after too many consecutive rejections") {
  auto spec = discretize(SpectralModel(Semicircle{2.0}), 20);
  dyson::DysonOptions opt;
  opt.kappa = 1e6;
  opt.max_consecutive_rejections = 0;
  Rng rng(1);
  CHECK_THROWS_AS(dyson::integrate_dyson(spec, 1.0, 1.0, 1.0, rng, opt), StiffnessError);
}

TEST_CASE("input errors") {
  Rng rng(1);
  CHECK_THROWS_AS(dyson::integrate_dyson({{0.0, 1.0}}, 1.0, 1.0, 0.1, rng), InputError);
  CHECK_THROWS_AS(dyson::integrate_dyson({{1.0, 0.0}}, 1.0, 1.0, 0.0, rng), DomainError);
}

TEST_CASE("overlap ODE: initial condition, mass and positivity") {
  auto spec = discretize(SpectralModel(Semicircle{2.0}), 12);
  Rng rng = substream(3, Stream::DysonNoise, 0);
  auto p = dyson::integrate_dyson(spec, 1.0, 1.0, 1e-3, rng);
  auto ov = dyson::integrate_overlap_ode(p, 4);
  for (Eigen::Index i = 0; i < 12; ++i) CHECK(ov.u(i, 0) == (i == 4 ? 1.0 : 0.0));
  for (Eigen::Index k = 0; k < ov.u.cols(); ++k) {
    CHECK(std::abs(ov.u.col(k).sum() - 1.0) < 1e-8);
    CHECK(ov.u.col(k).minCoeff() >= -1e-12);
  }
  CHECK(ov.max_mass_error < 1e-8);
  CHECK(ov.max_rhs_sum < 1e-12);
  CHECK(ov.clipped == 0);
}

TEST_CASE("property: overlap right-hand side sums to zero") {
  Rng rng(123);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 2 + rep % 30;
    Eigen::VectorXd lam(n), u(n), out;
    double x = 0.0;
    for (int i = n - 1; i >= 0; --i) {
      x += 0.01 + rng.uniform();
      lam(i) = x;
    }
    for (int i = 0; i < n; ++i) u(i) = rng.uniform();
    u /= u.sum();
    dyson::overlap_rhs(lam, u, out);
    CHECK(std::abs(out.sum()) < 1e-12 * (1.0 + out.cwiseAbs().sum()));
  }
}

TEST_CASE("overlap ODE rejects coincident stored eigenvalues") {
  dyson::EigenvaluePath p;
  p.times = {0.0, 0.1};
  p.values.resize(3, 2);
  p.values << 1.0, 1.0, 0.0, 1.0, -1.0, -1.0;
  CHECK_THROWS_AS(dyson::integrate_overlap_ode(p, 0), SingularKernelError);
}

TEST_CASE("overlap ODE near a collision: two levels relax to equal overlap") {
  // Exact two-level solution: u_0 - u_1 decays like exp(-2 t / (N d^2)).
  for (double d : {1e-6, 0.3}) {
    dyson::EigenvaluePath p;
    p.times = {0.0, 0.01};
    p.values.resize(2, 2);
    p.values << d, d, 0.0, 0.0;
    auto ov = dyson::integrate_overlap_ode(p, 0);
    double diff = std::exp(-2.0 * 0.01 / (2.0 * d * d));
    CHECK(ov.implicit_steps == (d < 1e-3 ? 1u : 0u));
    CHECK(std::abs(ov.u(0, 1) - ov.u(1, 1) - diff) < 1e-2 * diff + 1e-9);
    CHECK(std::abs(ov.u.col(1).sum() - 1.0) < 1e-14);
    CHECK(ov.u.col(1).minCoeff() >= 0.0);
  }
}

TEST_CASE("N = 10: overlap ODE agrees with matrix Monte Carlo (reduced sample)") {
  const std::size_t n = 10, j = 4, samples = 600;
  auto spec = discretize(SpectralModel(Semicircle{2.0}), n);
  const std::vector<double> times{0.1, 0.5};
  std::vector<std::vector<MeanVar>> dy(times.size(), std::vector<MeanVar>(n));
  for (std::size_t s = 0; s < samples; ++s) {
    Rng rng = substream(5, Stream::DysonNoise, s);
    dyson::DysonOptions opt;
    opt.landmarks = times;
    auto p = dyson::integrate_dyson(spec, 1.0, times.back(), 1e-3, rng, opt);
    auto ov = dyson::integrate_overlap_ode(p, j, times);
    for (std::size_t k = 0; k < times.size(); ++k)
      for (std::size_t i = 0; i < n; ++i) dy[k][i].add(ov.u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
  }
  mc::MatrixPathConfig cfg;
  cfg.n = n;
  cfg.t_max = times.back();
  cfg.checkpoints = times;
  cfg.n_samples = samples;
  cfg.seed = 6;
  auto mo = mc::mc_mean_overlaps_diag(spec.values, cfg, j);
  std::size_t bad = 0;
  for (std::size_t k = 0; k < times.size(); ++k)
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i), kk = static_cast<Eigen::Index>(k);
      double se = std::hypot(dy[k][i].std_err(), mo.std_err(ii, kk));
      if (std::abs(dy[k][i].mean - mo.mean(ii, kk)) > 3 * se) ++bad;
    }
  // 20 comparisons at 3 combined SE: allow one statistical miss.
  CHECK(bad <= 1);
}
