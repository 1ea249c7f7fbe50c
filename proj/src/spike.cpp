#include "rml/spike.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rml/error.hpp"
#include "rml/panel.hpp"

namespace rml::spike {

namespace {

double hermite(double t0, double t1, double y0, double y1, double d0, double d1, double t) {
  double h = t1 - t0;
  double s = (t - t0) / h;
  double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * d1;
}

double hermite_slope(double t0, double t1, double y0, double y1, double d0, double d1, double t) {
  double h = t1 - t0;
  double s = (t - t0) / h;
  double s2 = s * s;
  return ((6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * h * d0 + (-6 * s2 + 6 * s) * y1 + (3 * s2 - 2 * s) * h * d1) /
         h;
}

// Stieltjes transform at a real point above the bulk.
double spike_velocity(const burgers::BurgersSolver& solver, double lambda, double t) {
  if (solver.model().zero_bulk() && !solver.options().finite_n) {
    double r = std::sqrt(lambda * lambda - 4.0 * t);
    return 2.0 / (lambda + r);
  }
  return solver.real_point(lambda, t).g;
}

template <class F>
double root_in(F f, double lo, double hi) {
  double flo = f(lo), fhi = f(hi);
  if ((flo > 0) == (fhi > 0)) return fhi <= 0 ? hi : lo;
  std::uintmax_t iters = 200;
  auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-14 * std::max(1.0, std::abs(a)); };
  auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
  return 0.5 * (r.first + r.second);
}

}  // namespace

SpikeTrajectory spike_trajectory(const burgers::BurgersSolver& solver, std::size_t j, double t_max,
                                 const SpikeOptions& options) {
  const char* where = "spike-lab/spike_trajectory";
  const auto& spikes = solver.model().spikes();
  if (j >= spikes.size()) throw DomainError(where, "spike index out of range");
  if (!(t_max >= 0.0)) throw DomainError(where, "t_max must be >= 0");
  SpikeTrajectory tr;
  double lam = spikes[j];
  auto edge_at = [&](double t) { return solver.support(t).second; };
  auto rhs = [&](double l, double t) -> std::optional<double> {
    if (!(l > edge_at(t))) return std::nullopt;
    try {
      return spike_velocity(solver, l, t);
    } catch (const DomainError&) {
      return std::nullopt;
    }
  };
  auto record = [&](double t, double pos, double edge, bool alive, double slope) {
    tr.times.push_back(t);
    tr.position.push_back(pos);
    tr.edge.push_back(edge);
    tr.alive.push_back(alive);
    tr.slope.push_back(slope);
  };
  double e0 = edge_at(0.0);
  auto s0 = rhs(lam, 0.0);
  record(0.0, lam, e0, lam - e0 >= options.alive_margin, s0.value_or(0.0));
  if (t_max == 0.0) return tr;
  const std::size_t steps = std::max<std::size_t>(options.rk_steps, 1);
  const double dt = t_max / static_cast<double>(steps);
  bool alive = tr.alive.back();
  double slope = tr.slope.back();
  for (std::size_t k = 1; k <= steps; ++k) {
    double t0 = dt * static_cast<double>(k - 1);
    double t1 = dt * static_cast<double>(k);
    if (!alive) {
      double e = edge_at(t1);
      record(t1, e, e, false, 0.0);
      continue;
    }
    auto k1 = rhs(lam, t0);
    std::optional<double> k2, k3, k4;
    if (k1) k2 = rhs(lam + 0.5 * dt * *k1, t0 + 0.5 * dt);
    if (k2) k3 = rhs(lam + 0.5 * dt * *k2, t0 + 0.5 * dt);
    if (k3) k4 = rhs(lam + dt * *k3, t1);
    double e1 = edge_at(t1);
    double next = k4 ? lam + dt / 6.0 * (*k1 + 2.0 * *k2 + 2.0 * *k3 + *k4) : lam;
    std::optional<double> s1 = k4 ? rhs(next, t1) : std::nullopt;
    bool alive1 = k4 && s1 && (next - e1 >= options.alive_margin);
    if (!alive1) {
      const double l0 = lam, d0 = slope;
      auto gap = [&](double t) {
        double p = (k4 && s1) ? hermite(t0, t1, l0, next, d0, *s1, t) : l0 + d0 * (t - t0);
        return p - edge_at(t) - options.alive_margin;
      };
      tr.death_time = root_in(gap, t0, t1);
      alive = false;
      record(t1, e1, e1, false, 0.0);
      continue;
    }
    lam = next;
    slope = *s1;
    record(t1, lam, e1, true, slope);
  }
  return tr;
}

SpikeLab::SpikeLab(SpectralModel model, std::size_t j, double horizon, SpikeOptions options)
    : model_(std::move(model)),
      j_(j),
      horizon_(horizon),
      options_(std::move(options)),
      solver_(model_, options_.solver) {
  if (j_ >= model_.spike_count()) throw DomainError("spike-lab/SpikeLab", "spike index out of range");
  if (!(horizon_ >= 0.0)) throw DomainError("spike-lab/SpikeLab", "horizon must be >= 0");
  a_j_ = model_.spikes()[j_];
  traj_ = spike_trajectory(solver_, j_, horizon_, options_);
}

double SpikeLab::position(double t) const {
  if (t < 0.0 || t > horizon_ * (1.0 + 1e-12)) throw DomainError("spike-lab/position", "t outside [0, horizon]");
  if (traj_.times.size() == 1) return traj_.position[0];
  if (traj_.death_time && t >= *traj_.death_time) return solver_.support(t).second;
  const double dt = traj_.times[1] - traj_.times[0];
  auto k = std::min(static_cast<std::size_t>(t / dt), traj_.times.size() - 2);
  if (!traj_.alive[k + 1]) {
    return traj_.position[k] + traj_.slope[k] * (t - traj_.times[k]);
  }
  return hermite(traj_.times[k], traj_.times[k + 1], traj_.position[k], traj_.position[k + 1], traj_.slope[k],
                 traj_.slope[k + 1], t);
}

void SpikeLab::check_evaluable(double t, const char* where) const {
  if (t < 0.0) throw DomainError(where, "time must be >= 0");
  if (t > horizon_ * (1.0 + 1e-12)) throw DomainError(where, "time beyond the integrated horizon");
  if (traj_.death_time && t > *traj_.death_time - options_.critical_guard)
    throw DomainError(where, "spike is dead or within the critical guard of t_c=" + std::to_string(*traj_.death_time));
}

double SpikeLab::phi_unchecked(double s) const {
  double z = position(s);
  if (model_.zero_bulk() && !options_.solver.finite_n) {
    double r = std::sqrt(z * z - 4.0 * s);
    return 2.0 / (r * (z + r));
  }
  auto p = solver_.real_point(z, s);
  return p.i2 / (1.0 - s * p.i2);
}

double SpikeLab::phi(double s) const {
  check_evaluable(s, "spike-lab/phi");
  return phi_unchecked(s);
}

double SpikeLab::integrated_phi(double t) const {
  if (t <= 0.0) return 0.0;
  auto f = [this](double s) { return phi_unchecked(s); };
  return boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, 0.0, t, 15, 1e-14);
}

double SpikeLab::principal_overlap_f(double t) const {
  if (t < 0.0) throw DomainError("spike-lab/principal_overlap_f", "t must be >= 0");
  if (traj_.death_time && t >= *traj_.death_time) return 0.0;
  if (t > horizon_ * (1.0 + 1e-12)) throw DomainError("spike-lab/principal_overlap_f", "t beyond horizon");
  return std::exp(-integrated_phi(t));
}

double SpikeLab::mean_overlap(double t) const {
  if (traj_.death_time && t >= *traj_.death_time) return 0.0;
  if (t > horizon_ * (1.0 + 1e-12)) throw DomainError("spike-lab/mean_overlap", "t beyond horizon");
  return std::exp(-0.5 * integrated_phi(t));
}

double SpikeLab::principal_overlap_subordination(double t) const {
  if (traj_.death_time && t >= *traj_.death_time) return 0.0;
  return std::max(0.0, 1.0 - t * solver_.subordination_at(a_j_).i2);
}

double SpikeLab::pde_horizon() const {
  double h = horizon_;
  if (traj_.death_time) h = std::min(h, *traj_.death_time - options_.critical_guard);
  return std::max(h, 0.0);
}

SpikeOverlapState SpikeLab::transverse_pde(double t_max, std::size_t m) const {
  const char* where = "spike-lab/transverse_pde";
  if (m < 128) throw DomainError(where, "x_points must be >= 128");
  if (!(options_.pde_grading >= 1.0 && options_.pde_grading <= 3.0)) throw ConfigError(where, "pde_grading must be in [1, 3]");
  check_evaluable(t_max, where);
  const auto mi = static_cast<Eigen::Index>(m);
  SpikeOverlapState st;
  // Cells are uniform in s with x = s^p, refining toward the upper edge where
  // the source and h kernels peak; wx holds the exact cell widths.
  const double p = options_.pde_grading;
  Eigen::VectorXd wx(mi);
  for (std::size_t k = 0; k < m; ++k) {
    double s0 = static_cast<double>(k) / static_cast<double>(m), s1 = static_cast<double>(k + 1) / static_cast<double>(m);
    st.x_grid.push_back(std::pow(0.5 * (s0 + s1), p));
    wx(static_cast<Eigen::Index>(k)) = std::pow(s1, p) - std::pow(s0, p);
  }
  st.x_weights.assign(wx.data(), wx.data() + mi);

  // Positions lambda(x_k, t) and their time derivative.
  const bool scaling = model_.zero_bulk();
  Eigen::VectorXd q0(mi);
  std::vector<double> snap_t;
  std::vector<Eigen::VectorXd> snap_l, snap_v;
  if (scaling) {
    for (std::size_t k = 0; k < m; ++k) q0(static_cast<Eigen::Index>(k)) = bulk_quantile(Semicircle{2.0}, st.x_grid[k]);
  } else if (t_max > 0.0) {
    const std::size_t s = std::max<std::size_t>(options_.quantile_snapshots, 2);
    for (std::size_t i = 0; i <= s; ++i) {
      double ti = t_max * std::pow(static_cast<double>(i) / static_cast<double>(s), 2);
      Eigen::VectorXd l(mi), v(mi);
      if (i == 0) {
        for (std::size_t k = 0; k < m; ++k) l(static_cast<Eigen::Index>(k)) = bulk_quantile(model_.bulk(), st.x_grid[k]);
        v.setZero();
      } else {
        auto qf = solver_.quantile_function(ti);
        for (std::size_t k = 0; k < m; ++k) {
          double lk = qf(st.x_grid[k]);
          l(static_cast<Eigen::Index>(k)) = lk;
          v(static_cast<Eigen::Index>(k)) = solver_.velocity(lk, ti);
        }
      }
      snap_t.push_back(ti);
      snap_l.push_back(l);
      snap_v.push_back(v);
    }
    snap_v[0] = (snap_l[1] - snap_l[0]) / snap_t[1];
  }
  auto track = [&](double t, Eigen::VectorXd& lam, Eigen::VectorXd& vel) {
    if (scaling) {
      double r = std::sqrt(t);
      lam = r * q0;
      vel = lam / (2.0 * t);
      return;
    }
    auto it = std::upper_bound(snap_t.begin(), snap_t.end(), t);
    std::size_t i = it == snap_t.begin() ? 0 : static_cast<std::size_t>(it - snap_t.begin()) - 1;
    i = std::min(i, snap_t.size() - 2);
    lam.resize(mi);
    vel.resize(mi);
    for (Eigen::Index k = 0; k < mi; ++k) {
      lam(k) = hermite(snap_t[i], snap_t[i + 1], snap_l[i](k), snap_l[i + 1](k), snap_v[i](k), snap_v[i + 1](k), t);
      vel(k) = hermite_slope(snap_t[i], snap_t[i + 1], snap_l[i](k), snap_l[i + 1](k), snap_v[i](k),
                             snap_v[i + 1](k), t);
    }
  };

  Eigen::MatrixXd op(mi, mi);
  Eigen::VectorXd src(mi), lam(mi), vel(mi);
  // Builds the discrete operator at time t; returns the Gershgorin bound.
  auto assemble = [&](double t, double f, double lam1) {
    track(t, lam, vel);
    op.setZero();
    for (Eigen::Index i = 0; i < mi; ++i) {
      double hilbert = 0.0;
      for (Eigen::Index k = 0; k < mi; ++k) {
        if (k == i) continue;
        double d = lam(k) - lam(i);
        double wgt = wx(k) / (d * d);
        op(i, k) += wgt;
        op(i, i) -= wgt;
        hilbert += wx(k) / d;
      }
      // Singularity subtraction: -w'(l_i)(v_i + sum_k c/(l_k - l_i)) + c w''(l_i)/2.
      Eigen::Index i0 = std::clamp<Eigen::Index>(i - 1, 0, mi - 3);
      Eigen::Index idx[3] = {i0, i0 + 1, i0 + 2};
      double x0 = lam(i);
      for (int a = 0; a < 3; ++a) {
        double pa = lam(idx[a]);
        double den = 1.0, d1 = 0.0, d2 = 0.0;
        double others[2];
        int n = 0;
        for (int b = 0; b < 3; ++b)
          if (b != a) others[n++] = lam(idx[b]);
        den = (pa - others[0]) * (pa - others[1]);
        d1 = ((x0 - others[0]) + (x0 - others[1])) / den;
        d2 = 2.0 / den;
        op(i, idx[a]) += -d1 * (vel(i) + hilbert) + 0.5 * wx(i) * d2;
      }
      double gap = lam1 - lam(i);
      src(i) = f / (gap * gap);
    }
    double g = 0.0;
    for (Eigen::Index i = 0; i < mi; ++i) g = std::max(g, op.row(i).cwiseAbs().sum());
    return g;
  };

  auto push = [&](double t, const Eigen::VectorXd& u, double f, double lam1, const Eigen::VectorXd& l) {
    st.times.push_back(t);
    st.f.push_back(f);
    st.lambda1.push_back(lam1);
    double hsum = 0.0;
    for (Eigen::Index k = 0; k < mi; ++k) hsum += wx(k) * u(k) / std::pow(lam1 - l(k), 2);
    st.h.push_back(hsum);
    double me = f + wx.dot(u) - 1.0;
    st.mass_error.push_back(me);
    st.max_mass_error = std::max(st.max_mass_error, std::abs(me));
  };

  std::vector<Eigen::VectorXd> ucols, lcols;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(mi);
  Eigen::VectorXd l0(mi);
  if (scaling) {
    l0.setZero();
  } else if (t_max > 0.0) {
    l0 = snap_l[0];
  } else {
    for (std::size_t k = 0; k < m; ++k) l0(static_cast<Eigen::Index>(k)) = bulk_quantile(model_.bulk(), st.x_grid[k]);
  }
  push(0.0, u, 1.0, a_j_, l0);
  ucols.push_back(u);
  lcols.push_back(l0);

  double t = 0.0;
  if (scaling && t_max > 0.0) {
    // The scaling start is degenerate at t = 0; the mass entering before t0 is O(t0).
    t = 1e-6 * t_max;
    Eigen::VectorXd lt, vt;
    track(t, lt, vt);
    push(t, u, std::exp(-integrated_phi(t)), position(t), lt);
    ucols.push_back(u);
    lcols.push_back(lt);
  }
  double phi_int = integrated_phi(t);
  double phi_now = t_max > 0.0 ? phi_unchecked(t) : 0.0;
  Eigen::VectorXd k1(mi), k2(mi), ustar(mi);
  st.min_u = 0.0;
  while (t < t_max) {
    double f = std::exp(-phi_int);
    double lam1 = position(t);
    double g = assemble(t, f, lam1);
    double dt = std::min(1.0 / g, t_max - t);
    if (options_.pde_fixed_dt) {
      if (*options_.pde_fixed_dt > 2.0 / g)
        throw StepSizeError(where, "fixed dt " + std::to_string(*options_.pde_fixed_dt) +
                                       " exceeds the stability bound " + std::to_string(2.0 / g));
      dt = std::min(*options_.pde_fixed_dt, t_max - t);
    }
    if (t_max - t - dt < 1e-9 * dt) dt = t_max - t;
    k1 = op * u + src;
    ustar = u + dt * k1;
    double t1 = t + dt;
    double phi_next = phi_unchecked(t1);
    double phi_int1 = phi_int + 0.5 * dt * (phi_now + phi_next);
    double f1 = std::exp(-phi_int1);
    double lam1n = position(t1);
    assemble(t1, f1, lam1n);
    k2 = op * ustar + src;
    u += 0.5 * dt * (k1 + k2);
    double mn = u.minCoeff();
    st.min_u = std::min(st.min_u, mn);
    for (Eigen::Index k = 0; k < mi; ++k) {
      if (u(k) < -1e-12) {
        ++st.clipped;
        u(k) = 0.0;
      }
    }
    t = t1;
    phi_int = phi_int1;
    phi_now = phi_next;
    ++st.steps;
    push(t, u, f1, lam1n, lam);
    ucols.push_back(u);
    lcols.push_back(lam);
  }
  st.u.resize(mi, static_cast<Eigen::Index>(ucols.size()));
  st.lambda_of_x.resize(mi, static_cast<Eigen::Index>(lcols.size()));
  for (std::size_t k = 0; k < ucols.size(); ++k) {
    st.u.col(static_cast<Eigen::Index>(k)) = ucols[k];
    st.lambda_of_x.col(static_cast<Eigen::Index>(k)) = lcols[k];
  }
  return st;
}

const SpikeOverlapState& SpikeLab::transverse() const {
  std::call_once(pde_once_, [this] {
    pde_ = std::make_unique<SpikeOverlapState>(transverse_pde(pde_horizon(), options_.pde_x_points));
  });
  return *pde_;
}

double SpikeLab::h_resolvent(double s) const {
  if (s <= 0.0) return 0.0;
  // h = -B'(lambda_1), B the regular part of U = 1/(omega(z) - a_j) at the pole;
  // omega(z) inverts z = omega + s G_A(omega).
  auto p = solver_.real_point(position(s), s);
  double zp = 1.0 - s * p.i2;
  double zpp = 2.0 * s * p.i3;
  double zppp = -6.0 * s * p.i4;
  double d1 = 1.0 / zp;
  double d2 = -zpp / (zp * zp * zp);
  double d3 = -zppp / std::pow(zp, 4) + 3.0 * zpp * zpp / std::pow(zp, 5);
  return (d3 / (6.0 * d1) - d2 * d2 / (4.0 * d1 * d1)) / d1;
}

double SpikeLab::h(double s) const {
  if (options_.h_source == HSource::LocalResolvent) return h_resolvent(s);
  if (s <= 0.0) return 0.0;
  const auto& st = transverse();
  if (s > st.times.back() * (1.0 + 1e-12)) throw DomainError("spike-lab/h", "s beyond the transverse solution");
  auto it = std::upper_bound(st.times.begin(), st.times.end(), s);
  if (it == st.times.end()) return st.h.back();
  std::size_t k = static_cast<std::size_t>(it - st.times.begin());
  double w = (s - st.times[k - 1]) / (st.times[k] - st.times[k - 1]);
  return (1.0 - w) * st.h[k - 1] + w * st.h[k];
}

std::vector<double> SpikeLab::moment_ladder(std::size_t n_max, double t) const {
  check_evaluable(t, "spike-lab/moments_gn");
  std::vector<double> g(n_max + 1, 0.0);
  g[0] = 1.0;
  if (t == 0.0 || n_max < 2) return g;
  std::vector<double> breaks{0.0};
  if (options_.h_source == HSource::TransversePde) {
    for (double s : transverse().times)
      if (s > breaks.back() * (1.0 + 1e-12) + 1e-300 && s < t * (1.0 - 1e-12)) breaks.push_back(s);
  } else {
    const std::size_t panels = 32;
    for (std::size_t k = 1; k < panels; ++k) breaks.push_back(t * static_cast<double>(k) / panels);
  }
  breaks.push_back(t);
  PanelGrid grid(breaks, options_.panel_order);
  const auto& nodes = grid.nodes();
  std::vector<double> ph(nodes.size()), hh(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    ph[i] = phi_unchecked(nodes[i]);
    hh[i] = h(nodes[i]);
  }
  auto big_phi = grid.cumulative(ph);
  std::vector<double> prev(nodes.size(), 1.0), cur(nodes.size()), integrand(nodes.size());
  for (std::size_t n = 2; n <= n_max; n += 2) {
    double half = 0.5 * static_cast<double>(n);
    for (std::size_t i = 0; i < nodes.size(); ++i) integrand[i] = std::exp(half * big_phi[i]) * prev[i] * hh[i];
    auto cum = grid.cumulative(integrand);
    double pref = 0.5 * static_cast<double>(n * (n - 1));
    for (std::size_t i = 0; i < nodes.size(); ++i) cur[i] = pref * std::exp(-half * big_phi[i]) * cum[i];
    g[n] = cur.back();
    prev = cur;
  }
  return g;
}

double SpikeLab::variance_g2(double t) const { return moment_ladder(2, t)[2]; }

double SpikeLab::moments_gn(std::size_t n, double t) const {
  if (n % 2 == 1) return 0.0;
  return moment_ladder(n, t)[n];
}

SampleStats sample_stats(const std::vector<double>& xs) {
  SampleStats s;
  const double n = static_cast<double>(xs.size());
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : xs) {
    double d = x - s.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  s.variance = xs.size() > 1 ? m2 * n / (n - 1.0) : 0.0;
  if (m2 > 0.0) {
    s.skewness = m3 / std::pow(m2, 1.5);
    s.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    double sd = std::sqrt(s.variance);
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      double cdf = 0.5 * std::erfc(-(sorted[i] - s.mean) / (sd * std::sqrt(2.0)));
      double lo = static_cast<double>(i) / n, hi = static_cast<double>(i + 1) / n;
      s.ks_normal = std::max({s.ks_normal, std::abs(cdf - lo), std::abs(hi - cdf)});
    }
  }
  return s;
}

std::string CltSummary::to_text() const {
  std::ostringstream os;
  os.precision(10);
  auto stats = [&](const char* tag, const SampleStats& s, double ratio) {
    os << tag << "_mean=" << s.mean << "\n"
       << tag << "_variance=" << s.variance << "\n"
       << tag << "_variance_ratio=" << ratio << "\n"
       << tag << "_skewness=" << s.skewness << "\n"
       << tag << "_excess_kurtosis=" << s.excess_kurtosis << "\n"
       << tag << "_ks_normal=" << s.ks_normal << "\n";
  };
  os << "N=" << n << "\n"
     << "n_samples=" << n_samples << "\n"
     << "t=" << t << "\n"
     << "g2=" << g2 << "\n"
     << "mean_overlap_mc=" << mean_overlap_mc << "\n"
     << "mean_overlap_theory=" << mean_overlap_theory << "\n";
  stats("conditional", conditional, ratio_conditional());
  stats("unconditional", unconditional, ratio_unconditional());
  return os.str();
}

CltSummary clt_report(const SpectralModel& model, const mc::MatrixPathConfig& cfg_in, const SpikeOptions& options,
                      std::size_t path_points) {
  const char* where = "spike-lab/clt_report";
  if (model.spike_count() != 1) throw DomainError(where, "exactly one spike is required");
  mc::MatrixPathConfig cfg = cfg_in;
  cfg.validate();
  CltSummary out;
  out.n = cfg.n;
  out.n_samples = cfg.n_samples;
  out.t = cfg.t_max;
  SpikeLab lab(model, 0, cfg.t_max, options);
  if (lab.critical_time()) throw DomainError(where, "spike is not alive at t_max");
  out.g2 = lab.variance_g2(cfg.t_max);
  out.mean_overlap_theory = lab.mean_overlap(cfg.t_max);

  std::size_t intervals = std::max<std::size_t>(path_points, 2);
  if (intervals % 2) ++intervals;
  cfg.checkpoints.clear();
  if (cfg.t_max > 0.0) {
    for (std::size_t k = 0; k <= intervals; ++k)
      cfg.checkpoints.push_back(cfg.t_max * static_cast<double>(k) / static_cast<double>(intervals));
  } else {
    cfg.checkpoints = {0.0};
  }
  const std::size_t nt = cfg.checkpoints.size();
  std::vector<char> vectors(nt, 0);
  vectors.back() = 1;
  std::vector<double> overlap(cfg.n_samples), cond(cfg.n_samples);
  std::vector<std::vector<double>> phin(cfg.n_samples, std::vector<double>(nt));
  auto spectrum = discretize(model, cfg.n);
  auto on_record = [&](std::size_t s, std::size_t k, const mc::OverlapRecord& rec) {
    const auto& l = rec.eigenvalues;
    double acc = 0.0;
    for (Eigen::Index i = 1; i < l.size(); ++i) acc += 1.0 / std::pow(l(0) - l(i), 2);
    phin[s][k] = acc / static_cast<double>(cfg.n);
    if (k + 1 == nt) overlap[s] = std::sqrt(rec.squared_overlaps(0, 0));
  };
  if (cfg.beta == 1) {
    mc::for_each_sample(mc::diagonal_source<double>(spectrum.values), cfg, on_record, vectors);
  } else {
    mc::for_each_sample(mc::diagonal_source<mc::Complex>(spectrum.values), cfg, on_record, vectors);
  }
  const double sq = std::sqrt(static_cast<double>(cfg.n));
  double mean = std::accumulate(overlap.begin(), overlap.end(), 0.0) / static_cast<double>(cfg.n_samples);
  out.mean_overlap_mc = mean;
  std::vector<double> unc(cfg.n_samples);
  for (std::size_t s = 0; s < cfg.n_samples; ++s) {
    double integral = 0.0;
    if (nt > 1) {
      double h = cfg.checkpoints[1] - cfg.checkpoints[0];
      for (std::size_t k = 0; k + 2 < nt; k += 2)
        integral += h / 3.0 * (phin[s][k] + 4.0 * phin[s][k + 1] + phin[s][k + 2]);
    }
    cond[s] = sq * (overlap[s] - std::exp(-0.5 * integral));
    unc[s] = sq * (overlap[s] - mean);
  }
  out.unconditional = sample_stats(unc);
  out.conditional = sample_stats(cond);
  return out;
}

}  // namespace rml::spike
