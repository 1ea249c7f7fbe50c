#include <doctest.h>

#include "rml/error.hpp"
#include "rml/spike.hpp"
#include "rml/rng.hpp"
#include "support.hpp"

using namespace rml;

namespace {

const spike::SpikeLab& factor_lab() {
  static spike::SpikeLab lab(SpectralModel(ZeroBulk{}, {5.0}), 0, 20.0);
  return lab;
}

const spike::SpikeLab& semicircle_lab() {
  static spike::SpikeLab lab = [] {
    spike::SpikeOptions o;
    o.pde_x_points = 128;
    o.quantile_snapshots = 8;
    return spike::SpikeLab(SpectralModel(Semicircle{2.0}, {4.0}), 0, 2.0, o);
  }();
  return lab;
}

}  // namespace

TEST_CASE("factor model trajectory") {
  spike::SpikeLab lab(SpectralModel(ZeroBulk{}, {5.0}), 0, 30.0);
  for (double t : {0.0, 1.0, 7.5, 12.5, 20.0}) CHECK(std::abs(lab.position(t) - (5.0 + t / 5.0)) < 1e-4);
  REQUIRE(lab.critical_time().has_value());
  CHECK(std::abs(*lab.critical_time() - 25.0) < 0.1);
  const auto& tr = lab.trajectory();
  // alive switches once, from true to false.
  std::size_t switches = 0;
  for (std::size_t k = 1; k < tr.alive.size(); ++k) {
    CHECK(!(tr.alive[k] && !tr.alive[k - 1]));
    if (tr.alive[k] != tr.alive[k - 1]) ++switches;
  }
  CHECK(switches == 1);
  for (std::size_t k = 0; k < tr.times.size(); ++k) CHECK(std::abs(tr.edge[k] - 2.0 * std::sqrt(tr.times[k])) < 1e-9);
}

TEST_CASE("trajectory with t_max = 0") {
  burgers::BurgersSolver s(SpectralModel(ZeroBulk{}, {5.0}));
  auto tr = spike::spike_trajectory(s, 0, 0.0);
  REQUIRE(tr.times.size() == 1);
  CHECK(tr.position[0] == 5.0);
  CHECK(tr.alive[0]);
  CHECK_THROWS_AS(spike::spike_trajectory(s, 1, 1.0), DomainError);
}

TEST_CASE("phi and the principal overlap for the factor model") {
  const auto& lab = factor_lab();
  CHECK(std::abs(lab.phi(0.0) - 0.04) < 1e-12);
  CHECK(std::abs(lab.phi(12.5) - 0.08) < 1e-9);
  for (double s : {0.5, 3.0, 9.0, 17.0}) {
    CHECK(lab.phi(s) > 0.0);
    CHECK(std::abs(lab.phi(s) - 1.0 / (25.0 - s)) < 1e-9);
  }
  CHECK(lab.principal_overlap_f(0.0) == 1.0);
  CHECK(std::abs(lab.principal_overlap_f(12.5) - 0.5) < 1e-4);
  CHECK(std::abs(lab.mean_overlap(12.5) - std::sqrt(0.5)) < 1e-4);
  spike::SpikeLab longer(SpectralModel(ZeroBulk{}, {5.0}), 0, 30.0);
  CHECK(longer.principal_overlap_f(25.5) == 0.0);
  CHECK(longer.principal_overlap_f(30.0) == 0.0);
  CHECK_THROWS_AS(longer.phi(26.0), DomainError);
  CHECK_THROWS_AS(longer.phi(*longer.critical_time() - 5e-4), DomainError);
}

TEST_CASE("property: f exp(int phi) = 1 and the mean overlap is sqrt(f)") {
  for (const auto* lab : {&factor_lab(), &semicircle_lab()}) {
    for (double t = 0.0; t <= lab->horizon() * 0.9; t += lab->horizon() / 7.0) {
      double f = lab->principal_overlap_f(t);
      CHECK(std::abs(f * std::exp(lab->integrated_phi(t)) - 1.0) < 1e-12);
      CHECK(std::abs(lab->mean_overlap(t) - std::sqrt(f)) < 1e-10);
      if (t > 0) CHECK(f <= lab->principal_overlap_f(t - lab->horizon() / 14.0));
    }
  }
}

TEST_CASE("factor-model oracle: f = max(1 - t/a^2, 0)") {
  const auto& lab = factor_lab();
  for (double t : {1.0, 5.0, 10.0, 15.0, 20.0}) CHECK(std::abs(lab.principal_overlap_f(t) - (1.0 - t / 25.0)) < 1e-4);
}

TEST_CASE("semicircle bulk: f against the subordination closed form") {
  const auto& lab = semicircle_lab();
  for (double t : {0.3, 1.0, 2.0}) CHECK(std::abs(lab.principal_overlap_f(t) - lab.principal_overlap_subordination(t)) < 1e-6);
  // The spike velocity is G_t at the spike.
  const double h = 1e-3;
  for (double t : {0.5, 1.5}) {
    double slope = (lab.position(t + h) - lab.position(t - h)) / (2 * h);
    CHECK(std::abs(slope - lab.solver().real_point(lab.position(t), t).g) < 1e-6);
  }
}

TEST_CASE("transverse PDE: initial state, positivity and mass balance") {
  const auto& lab = factor_lab();
  auto st0 = lab.transverse_pde(0.0, 128);
  CHECK(st0.u.cwiseAbs().maxCoeff() == 0.0);
  CHECK(st0.times.size() == 1);
  CHECK_THROWS_AS(lab.transverse_pde(1.0, 64), DomainError);

  const auto& st = lab.transverse();
  CHECK(st.u.minCoeff() >= 0.0);
  CHECK(st.clipped == 0);
  CHECK(st.max_mass_error < 1e-3);
  for (std::size_t k = 0; k < st.times.size(); ++k)
    if (std::abs(st.times[k] - 10.0) < 0.05) CHECK(std::abs(st.mass_error[k]) < 1e-3);
}

TEST_CASE("transverse PDE on a semicircle bulk keeps its mass balance") {
  const auto& st = semicircle_lab().transverse();
  CHECK(st.max_mass_error < 1e-3);
  CHECK(st.u.minCoeff() >= 0.0);
}

TEST_CASE("transverse PDE: fixed step above the stability bound") {
  spike::SpikeOptions o;
  o.pde_fixed_dt = 1.0;
  spike::SpikeLab lab(SpectralModel(ZeroBulk{}, {5.0}), 0, 5.0, o);
  CHECK_THROWS_AS(lab.transverse_pde(5.0, 128), StepSizeError);
}

TEST_CASE("h from the PDE against the local resolvent") {
  const auto& lab = factor_lab();
  for (double s : {1.0, 5.0, 10.0, 15.0}) {
    // Factor-model closed form s a^2 / (a^2 - s)^3.
    CHECK(std::abs(lab.h_resolvent(s) - s * 25.0 / std::pow(25.0 - s, 3)) < 1e-10);
    CHECK(std::abs(lab.h(s) / lab.h_resolvent(s) - 1.0) < 0.01);
  }
  const auto& sc = semicircle_lab();
  for (double s : {0.5, 1.5}) CHECK(std::abs(sc.h(s) / sc.h_resolvent(s) - 1.0) < 0.03);
}

TEST_CASE("variance g2") {
  const auto& lab = factor_lab();
  CHECK(lab.variance_g2(0.0) == 0.0);
  for (double t : {1.0, 10.0, 19.0}) CHECK(lab.variance_g2(t) > 0.0);
  // Against the closed form obtained with h = s a^2/(a^2 - s)^3 and phi = 1/(a^2 - s).
  auto closed = [](double t) {
    const double a2 = 25.0;
    // g2(t) = int_0^t ((a2 - t)/(a2 - s)) s a2 / (a2 - s)^3 ds
    double u0 = a2, u1 = a2 - t;
    auto prim = [&](double u) { return a2 * (a2 / (3 * u * u * u) - 1.0 / (2 * u * u)); };
    return u1 * (prim(u1) - prim(u0));
  };
  for (double t : {2.0, 10.0}) CHECK(std::abs(lab.variance_g2(t) / closed(t) - 1.0) < 0.01);
  spike::SpikeOptions o;
  o.h_source = spike::HSource::LocalResolvent;
  spike::SpikeLab res(SpectralModel(ZeroBulk{}, {5.0}), 0, 20.0, o);
  for (double t : {2.0, 10.0, 18.0}) CHECK(std::abs(res.variance_g2(t) / closed(t) - 1.0) < 1e-8);
}

TEST_CASE("Gaussian moment ladder") {
  const auto& lab = factor_lab();
  for (double t : {5.0, 10.0, 20.0}) {
    auto g = lab.moment_ladder(6, t);
    CHECK(std::abs(g[4] / (3 * g[2] * g[2]) - 1.0) < 1e-8);
    CHECK(std::abs(g[6] / (15 * g[2] * g[2] * g[2]) - 1.0) < 1e-6);
    CHECK(std::abs(g[6] / (5 * g[2] * g[4]) - 1.0) < 1e-6);
  }
  CHECK(lab.moments_gn(3, 10.0) == 0.0);
  CHECK(lab.moments_gn(0, 10.0) == 1.0);
  CHECK(std::abs(lab.moments_gn(4, 10.0) - 3 * std::pow(lab.variance_g2(10.0), 2)) < 1e-8 * lab.moments_gn(4, 10.0));
  const auto& sc = semicircle_lab();
  auto g = sc.moment_ladder(6, 1.5);
  CHECK(std::abs(g[4] / (3 * g[2] * g[2]) - 1.0) < 1e-8);
  CHECK(std::abs(g[6] / (15 * g[2] * g[2] * g[2]) - 1.0) < 1e-6);
}

TEST_CASE("sample statistics") {
  auto s = spike::sample_stats({1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == 2.5);
  CHECK(std::abs(s.variance - 5.0 / 3.0) < 1e-15);
  CHECK(std::abs(s.skewness) < 1e-15);
  Rng rng(4);
  std::vector<double> xs(20000);
  for (auto& x : xs) x = rng.gaussian();
  auto n = spike::sample_stats(xs);
  CHECK(std::abs(n.skewness) < 0.06);
  CHECK(std::abs(n.excess_kurtosis) < 0.12);
  CHECK(n.ks_normal < 0.015);
}

TEST_CASE("clt_report at t = 0 is degenerate") {
  mc::MatrixPathConfig cfg;
  cfg.n = 20;
  cfg.t_max = 0.0;
  cfg.n_samples = 30;
  auto r = spike::clt_report(SpectralModel(ZeroBulk{}, {5.0}), cfg);
  CHECK(r.unconditional.variance == 0.0);
  CHECK(r.mean_overlap_mc == 1.0);
  CHECK(r.g2 == 0.0);
  CHECK(r.to_text().find("conditional_variance_ratio") != std::string::npos);
}

TEST_CASE("clt_report preconditions") {
  mc::MatrixPathConfig cfg;
  cfg.n = 20;
  cfg.t_max = 30.0;
  cfg.n_samples = 2;
  CHECK_THROWS_AS(spike::clt_report(SpectralModel(ZeroBulk{}, {5.0}), cfg), DomainError);
  cfg.t_max = 1.0;
  CHECK_THROWS_AS(spike::clt_report(SpectralModel(ZeroBulk{}, {5.0, 4.0}), cfg), DomainError);
}

TEST_CASE("clt_report on a small factor model") {
  mc::MatrixPathConfig cfg;
  cfg.n = 100;
  cfg.t_max = 5.0;
  cfg.n_samples = 300;
  cfg.seed = 12;
  auto r = spike::clt_report(SpectralModel(ZeroBulk{}, {5.0}), cfg);
  MESSAGE(r.to_text());
  CHECK(std::abs(r.mean_overlap_mc - r.mean_overlap_theory) < 0.02);
  CHECK(r.ratio_conditional() > 0.7);
  CHECK(r.ratio_conditional() < 1.3);
}
