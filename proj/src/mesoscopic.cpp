#include "rml/mesoscopic.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/polygamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "rml/error.hpp"

namespace rml::dyson {

namespace {

constexpr double kPi = std::numbers::pi;

// int_a^b exp(-c xi (1 - xi)) cos(2 pi n xi) dxi over one panel between cosine
// zeros. The cosine is evaluated in the local coordinate s = xi - a so its
// argument stays below pi (large n would otherwise lose digits).
double cosine_panel_integral(double c, long n, long m, double a, double b) {
  const double k = 2.0 * kPi * static_cast<double>(n);
  // For m >= 1, a = (2m - 1)/(4n) and cos(k (a + s)) = (-1)^m sin(k s).
  const double sign = (m % 2 == 0) ? 1.0 : -1.0;
  auto f = [&](double s) {
    double xi = a + s;
    double trig = m == 0 ? std::cos(k * s) : sign * std::sin(k * s);
    return std::exp(-c * xi * (1.0 - xi)) * trig;
  };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, b - a, 15, 1e-11);
}

// Taylor coefficients of exp(-c x + c x^2) at 0.
std::vector<double> exp_quadratic_taylor(double c, std::size_t order) {
  std::vector<double> g(order + 1, 0.0);
  g[0] = 1.0;
  for (std::size_t k = 1; k <= order; ++k) {
    double s = -c * g[k - 1];
    if (k >= 2) s += 2.0 * c * g[k - 2];
    g[k] = s / static_cast<double>(k);
  }
  return g;
}

}  // namespace

double fekete_v(long n, double tau, double rho) {
  if (!(rho > 0.0)) throw DomainError("dyson-sde/fekete_v", "rho_j must be > 0");
  if (!(tau >= 0.0)) throw DomainError("dyson-sde/fekete_v", "tau must be >= 0");
  n = std::labs(n);
  const double c = 2.0 * kPi * kPi * rho * tau;
  if (n == 0 && c == 0.0) return 1.0;
  if (c == 0.0) return 0.0;
  // Symmetric about xi = 1/2: integrate [0,1/2] split at the cosine zeros.
  double total = 0.0;
  if (n == 0) {
    total = cosine_panel_integral(c, 0, 0, 0.0, 0.5);
  } else {
    double a = 0.0;
    for (long m = 0;; ++m) {
      double b = std::min(0.5, (2.0 * static_cast<double>(m) + 1.0) / (4.0 * static_cast<double>(n)));
      if (b > a) total += cosine_panel_integral(c, n, m, a, b);
      a = b;
      if (a >= 0.5) break;
    }
  }
  return 2.0 * total;
}

double cauchy_profile(long n, double tau, double rho) {
  if (!(tau > 0.0) || !(rho > 0.0)) throw DomainError("dyson-sde/cauchy_profile", "tau and rho must be > 0");
  double nn = static_cast<double>(n);
  return tau * rho / (nn * nn + kPi * kPi * tau * tau * rho * rho);
}

double fekete_tail_sum(long m, double tau, double rho) {
  // v_n = sum_k (-1)^k 2 g^{(2k-1)}(0) / (2 pi n)^{2k} for integer n != 0.
  const double c = 2.0 * kPi * kPi * rho * tau;
  const std::size_t kmax = 12;
  auto taylor = exp_quadratic_taylor(c, 2 * kmax);
  double total = 0.0;
  double fact = 1.0;  // (2k-1)!
  for (std::size_t k = 1; k <= kmax; ++k) {
    const std::size_t d = 2 * k - 1;
    if (k > 1) fact *= static_cast<double>(d - 1) * static_cast<double>(d);
    double deriv = fact * taylor[d];
    double sign = (k % 2 == 0) ? 1.0 : -1.0;
    double coef = sign * 2.0 * deriv / std::pow(2.0 * kPi, 2.0 * static_cast<double>(k));
    // sum_{n > m} n^{-2k} = psi^{(2k-1)}(m+1) / (2k-1)!
    double zeta_tail = boost::math::polygamma(static_cast<int>(d), static_cast<double>(m + 1)) / fact;
    double term = coef * zeta_tail;
    total += term;
    if (std::abs(term) < 1e-18) break;
  }
  return 2.0 * total;
}

double cauchy_tail_sum(long m, double tau, double rho) {
  // The sum over all n is coth(pi^2 tau rho).
  double full = 1.0 / std::tanh(kPi * kPi * tau * rho);
  double partial = 0.0;
  for (long n = -m; n <= m; ++n) partial += cauchy_profile(n, tau, rho);
  return full - partial;
}

MesoscopicRun simulate_mesoscopic(std::size_t K, double tau_max, double rho_j, double beta, Rng& rng,
                                  const MesoscopicOptions& options) {
  const char* where = "dyson-sde/simulate_mesoscopic";
  if (K < 32) throw DomainError(where, "K must be >= 32");
  if (!(rho_j > 0.0) || !(beta > 0.0) || !(tau_max >= 0.0)) throw DomainError(where, "invalid rho, beta or tau");
  const std::size_t m = 2 * K + 1;
  const double kk = static_cast<double>(K);
  std::vector<double> x(m), v(m, 0.0), drift(m), trial(m), flow(m), flow_mid(m), v_mid(m), absorb(m);
  for (std::size_t i = 0; i < m; ++i) x[i] = static_cast<double>(i) - kk;
  v[K] = 1.0;

  std::vector<double> records = options.record_taus;
  records.erase(std::remove_if(records.begin(), records.end(), [&](double r) { return r < 0.0 || r > tau_max; }),
                records.end());
  std::sort(records.begin(), records.end());
  if (records.empty() || records.back() < tau_max) records.push_back(tau_max);

  MesoscopicRun run;
  auto snapshot = [&](double tau) {
    MesoscopicState s;
    s.rho_j = rho_j;
    s.tau = tau;
    s.K = K;
    s.x = x;
    s.v = v;
    double mass = 0.0;
    for (double w : v) mass += w;
    s.leakage = 1.0 - mass;
    run.states.push_back(std::move(s));
  };

  const double noise_sd = options.noise ? std::sqrt(2.0 * rho_j / beta) : 0.0;
  struct Inc {
    double dt;
    std::vector<double> db;
  };
  std::vector<Inc> pending;
  std::size_t next = 0;
  double tau = 0.0;
  while (next < records.size() && records[next] <= 0.0) {
    snapshot(0.0);
    ++next;
  }
  std::size_t consecutive = 0;
  while (next < records.size()) {
    const double target = records[next];
    double gmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < m; ++i) gmin = std::min(gmin, x[i + 1] - x[i]);
    // Interior Coulomb drift, frozen exterior drift and exterior absorption rate.
    std::fill(drift.begin(), drift.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = i + 1; k < m; ++k) {
        double d = x[i] - x[k];
        drift[i] += rho_j / d;
        drift[k] -= rho_j / d;
      }
      drift[i] += rho_j * (boost::math::digamma(kk + 1.0 - x[i]) - boost::math::digamma(kk + 1.0 + x[i]));
    }
    double cap = std::min({options.dt_cap, target - tau, options.kappa * gmin * gmin / rho_j});
    cap = std::max(cap, std::min(options.dt_floor, target - tau));

    Inc inc;
    if (pending.empty()) {
      inc.dt = cap;
      inc.db.assign(m, 0.0);
      if (options.noise) {
        double sd = std::sqrt(cap);
        for (auto& b : inc.db) b = sd * rng.gaussian();
      }
    } else {
      inc = std::move(pending.back());
      pending.pop_back();
    }
    for (std::size_t i = 0; i < m; ++i) trial[i] = x[i] + noise_sd * inc.db[i] + inc.dt * drift[i];
    bool ordered = true;
    for (std::size_t i = 0; i + 1 < m; ++i) ordered = ordered && trial[i] < trial[i + 1];
    if (!ordered && inc.dt > options.dt_floor) {
      ++run.rejections;
      if (++consecutive > options.max_consecutive_rejections)
        throw StiffnessError(where, "particle collision could not be resolved at tau=" + std::to_string(tau));
      Inc first{0.5 * inc.dt, inc.db}, second{0.5 * inc.dt, inc.db};
      double sd = std::sqrt(0.25 * inc.dt);
      for (std::size_t i = 0; i < m; ++i) {
        first.db[i] = 0.5 * inc.db[i] + (options.noise ? sd * rng.gaussian() : 0.0);
        second.db[i] = inc.db[i] - first.db[i];
      }
      pending.push_back(std::move(second));
      pending.push_back(std::move(first));
      continue;
    }
    if (!ordered) std::sort(trial.begin(), trial.end());
    consecutive = 0;

    // Overlap weights on the current positions: Heun step of the graph
    // Laplacian plus absorption into the frozen exterior.
    auto rates = [&](const std::vector<double>& u, std::vector<double>& out) {
      std::fill(out.begin(), out.end(), 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = i + 1; k < m; ++k) {
          double d = x[i] - x[k];
          double f = rho_j * (u[k] - u[i]) / (d * d);
          out[i] += f;
          out[k] -= f;
        }
        out[i] -= absorb[i] * u[i];
      }
    };
    for (std::size_t i = 0; i < m; ++i)
      absorb[i] = rho_j * (boost::math::trigamma(kk + 1.0 - x[i]) + boost::math::trigamma(kk + 1.0 + x[i]));
    rates(v, flow);
    for (std::size_t i = 0; i < m; ++i) v_mid[i] = v[i] + inc.dt * flow[i];
    rates(v_mid, flow_mid);
    for (std::size_t i = 0; i < m; ++i) v[i] = std::max(0.0, v[i] + 0.5 * inc.dt * (flow[i] + flow_mid[i]));
    x = trial;
    tau += inc.dt;
    ++run.steps;
    if (pending.empty() && std::abs(tau - target) <= 1e-12 * std::max(1.0, target)) {
      tau = target;
      snapshot(tau);
      ++next;
    }
  }
  return run;
}

}  // namespace rml::dyson
