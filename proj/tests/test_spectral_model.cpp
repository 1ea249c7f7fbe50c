#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rml/error.hpp"
#include "rml/spectral_model.hpp"

using namespace rml;

namespace {

// Radius-2 semicircle mass above lambda, in closed form.
double semicircle_tail(double l) {
  double below = (l * std::sqrt(4.0 - l * l) / 2.0 + 2.0 * std::asin(l / 2.0) + std::numbers::pi) / (2.0 * std::numbers::pi);
  return 1.0 - below;
}

}  // namespace

TEST_CASE("quantile_a examples") {
  CHECK(std::abs(quantile_a(SpectralModel(Semicircle{2.0}), 0.5)) < 1e-12);
  CHECK(std::abs(quantile_a(SpectralModel(Uniform{-1.0, 1.0}), 0.25) - 0.5) < 1e-14);
  CHECK(quantile_a(SpectralModel(ZeroBulk{}), 0.37) == 0.0);
  CHECK_THROWS_AS(quantile_a(SpectralModel(Semicircle{2.0}), 0.0), DomainError);
  CHECK_THROWS_AS(quantile_a(SpectralModel(Semicircle{2.0}), 1.0), DomainError);
  CHECK_THROWS_AS(quantile_a(SpectralModel(Semicircle{2.0}), -0.2), DomainError);
}

TEST_CASE("semicircle quantile against the closed-form tail") {
  SpectralModel m(Semicircle{2.0});
  for (double x : {0.01, 0.1, 0.3, 0.5, 0.77, 0.99}) {
    double a = quantile_a(m, x);
    CHECK(std::abs(semicircle_tail(a) - x) < 1e-11);
  }
}

TEST_CASE("triangular quantile inverts its tail") {
  Triangular tri{-1.0, 0.5, 2.0};
  SpectralModel m(tri);
  for (double x : {0.05, 0.2, 0.5, 0.8, 0.95}) {
    double a = quantile_a(m, x);
    // Closed-form tail of the triangle.
    double tail = a >= tri.peak ? (tri.hi - a) * (tri.hi - a) / ((tri.hi - tri.lo) * (tri.hi - tri.peak))
                                : 1.0 - (a - tri.lo) * (a - tri.lo) / ((tri.hi - tri.lo) * (tri.peak - tri.lo));
    CHECK(std::abs(tail - x) < 1e-12);
  }
}

TEST_CASE("discretize examples") {
  auto d = discretize(SpectralModel(ZeroBulk{}, {5.0}), 3);
  REQUIRE(d.size() == 3);
  CHECK(d.values[0] == 5.0);
  CHECK(d.values[1] == 0.0);
  CHECK(d.values[2] == 0.0);

  auto s = discretize(SpectralModel(Semicircle{2.0}), 2);
  CHECK(std::abs(s.values[0]) < 1e-12);
  // x = 1 is clamped to 1 - 1/(2N) = 0.75.
  CHECK(std::abs(semicircle_tail(s.values[1]) - 0.75) < 1e-11);

  auto u = discretize(SpectralModel(Uniform{-1.0, 1.0}), 4);
  CHECK(std::abs(u.values[0] - 0.5) < 1e-14);
  CHECK(std::abs(u.values[1]) < 1e-14);
  CHECK(std::abs(u.values[2] + 0.5) < 1e-14);
  CHECK(std::abs(u.values[3] + 0.75) < 1e-14);

  CHECK_THROWS_AS(discretize(SpectralModel(ZeroBulk{}, {5.0, 3.0}), 2), ConfigError);
}

TEST_CASE("discretize puts spikes first and orders the output") {
  auto d = discretize(SpectralModel(Semicircle{2.0}, {6.0, 4.0}), 50);
  CHECK(d.values[0] == 6.0);
  CHECK(d.values[1] == 4.0);
  for (std::size_t k = 0; k + 1 < d.size(); ++k) CHECK(d.values[k] >= d.values[k + 1]);
}

TEST_CASE("bulk support") {
  auto s = bulk_support(SpectralModel(Semicircle{2.0}));
  CHECK(s.first == -2.0);
  CHECK(s.second == 2.0);
  auto z = bulk_support(SpectralModel(ZeroBulk{}));
  CHECK(z.first == 0.0);
  CHECK(z.second == 0.0);
}

TEST_CASE("model validation") {
  CHECK_THROWS_AS(SpectralModel(Semicircle{2.0}, {1.0}), ConfigError);       // below the edge
  CHECK_THROWS_AS(SpectralModel(Semicircle{2.0}, {3.0, 4.0}), ConfigError);  // not decreasing
  CHECK_THROWS_AS(SpectralModel(Semicircle{2.0}, {3.0, 3.0}), ConfigError);
  CHECK_THROWS_AS(SpectralModel(Uniform{1.0, -1.0}), ConfigError);
  CHECK_THROWS_AS(SpectralModel(Triangular{0.0, 2.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(SpectralModel(Tabulated{{0.0, 1.0}}), ConfigError);  // increasing samples
  CHECK_THROWS_AS(SpectralModel(Semicircle{-1.0}), ConfigError);
}

TEST_CASE("tabulated from semicircle samples") {
  const std::size_t m = 257;
  Tabulated tab;
  for (std::size_t k = 0; k < m; ++k)
    tab.quantiles.push_back(bulk_quantile(Semicircle{2.0}, static_cast<double>(k) / static_cast<double>(m - 1)));
  SpectralModel model(tab);
  auto s = bulk_support(model);
  CHECK(std::abs(s.first + 2.0) < 1e-9);
  CHECK(std::abs(s.second - 2.0) < 1e-9);
  // Interpolated quantiles stay close to the exact ones.
  for (double x : {0.1, 0.4, 0.6})
    CHECK(std::abs(quantile_a(model, x) - bulk_quantile(Semicircle{2.0}, x)) < 2e-3);
}

TEST_CASE("property: quantile_a is non-increasing") {
  std::vector<SpectralModel> models{SpectralModel(Semicircle{1.5}), SpectralModel(Uniform{-2.0, 3.0}),
                                    SpectralModel(Triangular{-1.0, 0.2, 1.0})};
  for (const auto& m : models) {
    double prev = quantile_a(m, 1e-4);
    for (int k = 1; k < 400; ++k) {
      double x = 1e-4 + (1.0 - 2e-4) * k / 400.0;
      double a = quantile_a(m, x);
      CHECK(a <= prev + 1e-14);
      prev = a;
    }
  }
}

TEST_CASE("property: parametric densities integrate to one") {
  for (const DensitySpec& s : std::vector<DensitySpec>{Semicircle{2.0}, Semicircle{0.7}, Uniform{-1.0, 4.0},
                                                       Triangular{-1.0, 0.0, 1.0}, Triangular{0.0, 0.9, 1.0}})
    CHECK(std::abs(density_mass(s) - 1.0) < 1e-10);
}

TEST_CASE("property: discretized bulk is within 2/N of the model CDF") {
  for (std::size_t n : {10u, 50u, 200u, 1000u}) {
    for (const DensitySpec& s : std::vector<DensitySpec>{Semicircle{2.0}, Uniform{-1.0, 1.0}, Triangular{-1.0, 0.3, 1.0}}) {
      auto d = discretize(SpectralModel(s), n);
      // Kolmogorov distance of the empirical tail measure: check both sides of every jump.
      double ks = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        double model_tail = tail_cdf(s, d.values[k]);
        double before = static_cast<double>(k) / static_cast<double>(n);
        double after = static_cast<double>(k + 1) / static_cast<double>(n);
        ks = std::max({ks, std::abs(model_tail - before), std::abs(model_tail - after)});
      }
      CHECK(ks <= 2.0 / static_cast<double>(n));
    }
  }
}

TEST_CASE("variant names") {
  CHECK(variant_name(Semicircle{}) == "semicircle");
  CHECK(variant_name(ZeroBulk{}) == "zero");
  CHECK(variant_name(Tabulated{{1.0, 0.0}}) == "tabulated");
}
