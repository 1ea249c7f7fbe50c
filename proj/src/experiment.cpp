#include "rml/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

#include "rml/dyson.hpp"
#include "rml/error.hpp"
#include "rml/mesoscopic.hpp"
#include "rml/rng.hpp"
#include "rml/spike.hpp"
#include "rml/stationary_kernel.hpp"
#include "rml/stieltjes.hpp"
#include "rml/svg.hpp"

namespace rml::exp {

using nlohmann::json;

namespace {

constexpr const char* kWhere = "experiments-cli/config";

const std::map<std::string, Kind>& kinds() {
  static const std::map<std::string, Kind> m{{"density", Kind::Density},
                                             {"paths", Kind::Paths},
                                             {"overlaps-bulk", Kind::OverlapsBulk},
                                             {"overlaps-crossover", Kind::OverlapsCrossover},
                                             {"spike", Kind::Spike},
                                             {"clt", Kind::Clt},
                                             {"figure2", Kind::Figure2},
                                             {"figure3", Kind::Figure3},
                                             {"figure4", Kind::Figure4}};
  return m;
}

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw ConfigError(kWhere, "field '" + field + "': " + what);
}

const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) field_error(path + key, "missing");
  return j.at(key);
}

double get_number(const json& j, const std::string& key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_number()) field_error(path + key, "must be a number");
  return v.get<double>();
}

std::size_t get_count(const json& j, const std::string& key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_number_integer() || v.get<long long>() <= 0) field_error(path + key, "must be a positive integer");
  return v.get<std::size_t>();
}

double param(const json& params, const char* key, double dflt) {
  if (!params.contains(key)) return dflt;
  if (!params.at(key).is_number()) field_error(std::string("params.") + key, "must be a number");
  return params.at(key).get<double>();
}

std::size_t param_count(const json& params, const char* key, std::size_t dflt) {
  if (!params.contains(key)) return dflt;
  const json& v = params.at(key);
  if (!v.is_number_integer() || v.get<long long>() <= 0)
    field_error(std::string("params.") + key, "must be a positive integer");
  return v.get<std::size_t>();
}

std::string utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

struct Emitter {
  const ExperimentConfig& cfg;
  std::string hash;
  RunRecord& record;

  io::CsvTable table(std::vector<std::string> columns) const {
    io::CsvTable t;
    t.comments = {"config_hash=" + hash, "experiment=" + std::string(kind_name(cfg.experiment)),
                  "seed=" + std::to_string(cfg.seed)};
    t.columns = std::move(columns);
    return t;
  }
  void write(const std::string& name, const std::string& content) {
    io::write_atomic(cfg.output_dir / name, content);
    record.manifest.push_back({name, sha256_hex(content), content.size()});
  }
  void write(const std::string& name, const io::CsvTable& t) { write(name, io::to_string(t)); }
};

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_err_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v), s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

template <class Fn>
void dispatch_beta(int beta, const std::vector<double>& diag, const mc::MatrixPathConfig& cfg, Fn&& fn,
                   const std::vector<char>& vectors) {
  if (beta == 1)
    mc::for_each_sample(mc::diagonal_source<double>(diag), cfg, fn, vectors);
  else
    mc::for_each_sample(mc::diagonal_source<mc::Complex>(diag), cfg, fn, vectors);
}

mc::MatrixPathConfig path_config(const ExperimentConfig& cfg, std::vector<double> checkpoints) {
  mc::MatrixPathConfig p;
  p.n = cfg.n;
  p.beta = cfg.beta;
  p.dynamics = cfg.dynamics;
  p.seed = cfg.seed;
  p.n_samples = cfg.n_samples;
  p.t_max = checkpoints.empty() ? 0.0 : checkpoints.back();
  p.checkpoints = std::move(checkpoints);
  return p;
}

std::string verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

// ---- experiments ----

void run_density(const ExperimentConfig& cfg, Emitter& em) {
  burgers::BurgersSolver solver(cfg.spectral_model());
  std::size_t nodes = param_count(cfg.params, "nodes", 128);
  std::size_t xp = param_count(cfg.params, "x_points", 101);
  auto dens = em.table({"t", "lambda", "rho", "v"});
  auto quant = em.table({"t", "x", "lambda"});
  for (double t : cfg.times) {
    if (!(t > 0.0)) field_error("times", "density needs t > 0");
    auto st = solver.bulk_state(t, nodes, xp);
    for (std::size_t k = 0; k < st.lambda_grid.size(); ++k)
      dens.add_row({io::fmt(t), io::fmt(st.lambda_grid[k]), io::fmt(st.rho[k]), io::fmt(st.v[k])});
    for (std::size_t k = 0; k < st.x_grid.size(); ++k)
      quant.add_row({io::fmt(t), io::fmt(st.x_grid[k]), io::fmt(st.lambda_of_x[k])});
  }
  em.write("density.csv", dens);
  em.write("quantiles.csv", quant);
}

void run_paths(const ExperimentConfig& cfg, Emitter& em) {
  auto spectrum = discretize(cfg.spectral_model(), cfg.n);
  auto pc = path_config(cfg, cfg.times);
  const std::size_t nt = pc.effective_checkpoints().size();
  std::vector<Eigen::MatrixXd> paths(cfg.n_samples, Eigen::MatrixXd(cfg.n, nt));
  dispatch_beta(
      cfg.beta, spectrum.values, pc,
      [&](std::size_t s, std::size_t k, const mc::OverlapRecord& rec) { paths[s].col(static_cast<Eigen::Index>(k)) = rec.eigenvalues; },
      std::vector<char>(nt, 0));
  auto times = pc.effective_checkpoints();
  auto mt = em.table({"sample", "t", "i", "lambda"});
  for (std::size_t s = 0; s < cfg.n_samples; ++s)
    for (std::size_t k = 0; k < nt; ++k)
      for (std::size_t i = 0; i < cfg.n; ++i)
        mt.add_row({io::fmt(s), io::fmt(times[k]), io::fmt(i + 1),
                    io::fmt(paths[s](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)))});
  em.write("paths_matrix.csv", mt);

  if (cfg.dynamics != mc::Dynamics::Additive) return;
  double dt_cap = param(cfg.params, "dt_cap", 1e-3);
  auto dt = em.table({"sample", "t", "i", "lambda"});
  std::vector<dyson::EigenvaluePath> dp(cfg.n_samples);
  parallel_for(cfg.n_samples, [&](std::size_t s) {
    Rng rng = substream(cfg.seed, Stream::DysonNoise, s);
    dyson::DysonOptions opt;
    opt.landmarks = cfg.times;
    opt.store_all_steps = false;
    dp[s] = dyson::integrate_dyson(spectrum, cfg.beta, cfg.times.back(), dt_cap, rng, opt);
  });
  for (std::size_t s = 0; s < cfg.n_samples; ++s)
    for (double t : times) {
      auto k = static_cast<Eigen::Index>(dp[s].index_of(t));
      for (std::size_t i = 0; i < cfg.n; ++i)
        dt.add_row({io::fmt(s), io::fmt(t), io::fmt(i + 1), io::fmt(dp[s].values(static_cast<Eigen::Index>(i), k))});
    }
  em.write("paths_dyson.csv", dt);
}

bool run_overlaps_bulk(const ExperimentConfig& cfg, Emitter& em) {
  auto model = cfg.spectral_model();
  auto spectrum = discretize(model, cfg.n);
  std::size_t j1 = param_count(cfg.params, "j", std::max<std::size_t>(cfg.n / 2, 1));
  if (j1 > cfg.n) field_error("params.j", "must be <= N");
  const std::size_t j = j1 - 1;
  for (double t : cfg.times)
    if (!(t > 0.0)) field_error("times", "overlaps-bulk needs t > 0");
  auto pc = path_config(cfg, cfg.times);
  auto mo = mc::mc_mean_overlaps_diag(spectrum.values, pc, j);

  auto mct = em.table({"t", "i", "mean", "std_err"});
  auto tht = em.table({"t", "i", "lambda", "value"});
  std::unique_ptr<burgers::BurgersSolver> solver;
  if (cfg.dynamics == mc::Dynamics::OrnsteinUhlenbeck) {
    auto* sc = std::get_if<Semicircle>(&model.bulk());
    if (!sc || sc->radius != 2.0 || model.spike_count() != 0)
      field_error("model", "OU overlaps need the radius-2 semicircle without spikes");
  }
  solver = std::make_unique<burgers::BurgersSolver>(model);
  const double mu = spectrum.values[j];
  const double nd = static_cast<double>(cfg.n);
  for (std::size_t k = 0; k < mo.times.size(); ++k) {
    const double t = mo.times[k];
    std::optional<burgers::QuantileFunction> qf;
    if (cfg.dynamics == mc::Dynamics::Additive) qf = solver->quantile_function(t);
    for (std::size_t i = 0; i < cfg.n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i), kk = static_cast<Eigen::Index>(k);
      mct.add_row({io::fmt(t), io::fmt(i + 1), io::fmt(mo.mean(ii, kk)), io::fmt(mo.std_err(ii, kk))});
      double x = (static_cast<double>(i) + 0.5) / nd;
      double lam = 0.0, val = std::numeric_limits<double>::quiet_NaN();
      try {
        if (cfg.dynamics == mc::Dynamics::Additive) {
          lam = (*qf)(x);
          val = solver->overlap_kernel(lam, mu, t) / nd;
        } else {
          lam = bulk_quantile(Semicircle{2.0}, x);
          val = kernel::kernel_closed({lam, mu, t, std::nullopt}) / nd;
        }
      } catch (const DomainError&) {
      }
      tht.add_row({io::fmt(t), io::fmt(i + 1), io::fmt(lam), io::fmt(val)});
    }
  }
  em.write("overlaps_mc.csv", mct);
  em.write("overlaps_theory.csv", tht);
  auto rep = compare(tht, mct, Tolerance::parse(cfg.params.value("tol", std::string("z=3,frac=0.9"))));
  em.write("report.txt", rep.to_text());
  return rep.pass;
}

bool run_crossover(const ExperimentConfig& cfg, Emitter& em) {
  std::size_t K = param_count(cfg.params, "K", 128);
  double rho = param(cfg.params, "rho", 1.0);
  long nmax = static_cast<long>(param_count(cfg.params, "n_max", 10));
  double dt_cap = param(cfg.params, "dt_cap", 1e-3);
  if (static_cast<std::size_t>(nmax) > K) field_error("params.n_max", "must be <= K");
  for (double t : cfg.times)
    if (!(t > 0.0)) field_error("times", "crossover taus must be > 0");
  std::vector<dyson::MesoscopicRun> runs(cfg.n_samples);
  parallel_for(cfg.n_samples, [&](std::size_t s) {
    Rng rng = substream(cfg.seed, Stream::Mesoscopic, s);
    dyson::MesoscopicOptions opt;
    opt.record_taus = cfg.times;
    opt.dt_cap = dt_cap;
    runs[s] = dyson::simulate_mesoscopic(K, cfg.times.back(), rho, cfg.beta, rng, opt);
  });
  auto mct = em.table({"tau", "n", "mean", "std_err"});
  auto tht = em.table({"tau", "n", "value", "cauchy"});
  for (std::size_t k = 0; k < cfg.times.size(); ++k) {
    double tau = cfg.times[k];
    for (long n = -nmax; n <= nmax; ++n) {
      std::vector<double> v(cfg.n_samples);
      for (std::size_t s = 0; s < cfg.n_samples; ++s) v[s] = runs[s].states[k].v_at(n);
      mct.add_row({io::fmt(tau), io::fmt(static_cast<long long>(n)), io::fmt(mean_of(v)), io::fmt(std_err_of(v))});
      tht.add_row({io::fmt(tau), io::fmt(static_cast<long long>(n)), io::fmt(dyson::fekete_v(n, tau, rho)),
                   io::fmt(dyson::cauchy_profile(n, tau, rho))});
    }
  }
  em.write("crossover_mc.csv", mct);
  em.write("crossover_theory.csv", tht);
  auto rep = compare(tht, mct, Tolerance::parse(cfg.params.value("tol", std::string("z=3,frac=0.9"))));
  em.write("report.txt", rep.to_text());
  return rep.pass;
}

bool run_spike(const ExperimentConfig& cfg, Emitter& em) {
  auto model = cfg.spectral_model();
  if (model.spike_count() == 0) field_error("model.spikes", "spike experiment needs at least one spike");
  std::size_t j1 = param_count(cfg.params, "j", 1);
  if (j1 > model.spike_count()) field_error("params.j", "must be <= number of spikes");
  const std::size_t j = j1 - 1;
  spike::SpikeOptions opt;
  if (cfg.params.value("h_source", std::string("pde")) == "resolvent") opt.h_source = spike::HSource::LocalResolvent;
  spike::SpikeLab lab(model, j, cfg.times.back(), opt);
  auto tht = em.table({"t", "position", "edge", "f", "value", "g2"});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (double t : cfg.times) {
    double edge = lab.solver().support(t).second;
    double pos = lab.position(t);
    bool alive = !lab.critical_time() || t < *lab.critical_time() - opt.critical_guard;
    double g2 = nan;
    if (alive) {
      try {
        g2 = lab.variance_g2(t);
      } catch (const DomainError&) {
      }
    }
    tht.add_row({io::fmt(t), io::fmt(pos), io::fmt(edge), io::fmt(lab.principal_overlap_f(t)),
                 io::fmt(lab.mean_overlap(t)), io::fmt(g2)});
  }
  em.write("spike_theory.csv", tht);

  auto spectrum = discretize(model, cfg.n);
  auto pc = path_config(cfg, cfg.times);
  const std::size_t nt = cfg.times.size();
  std::vector<std::vector<double>> ov(nt, std::vector<double>(cfg.n_samples)), pos(nt, std::vector<double>(cfg.n_samples));
  dispatch_beta(
      cfg.beta, spectrum.values, pc,
      [&](std::size_t s, std::size_t k, const mc::OverlapRecord& rec) {
        ov[k][s] = std::sqrt(rec.squared_overlaps(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)));
        pos[k][s] = rec.eigenvalues(static_cast<Eigen::Index>(j));
      },
      {});
  auto mct = em.table({"t", "mean", "std_err", "position_mean"});
  for (std::size_t k = 0; k < nt; ++k)
    mct.add_row({io::fmt(cfg.times[k]), io::fmt(mean_of(ov[k])), io::fmt(std_err_of(ov[k])), io::fmt(mean_of(pos[k]))});
  em.write("spike_mc.csv", mct);
  auto rep = compare(tht, mct, Tolerance::parse(cfg.params.value("tol", std::string("z=3"))));
  em.write("report.txt", rep.to_text());
  return rep.pass;
}

bool run_clt(const ExperimentConfig& cfg, Emitter& em) {
  auto model = cfg.spectral_model();
  auto pc = path_config(cfg, {cfg.times.back()});
  auto sum = spike::clt_report(model, pc, {}, param_count(cfg.params, "path_points", 40));
  bool ok = sum.ratio_conditional() >= 0.85 && sum.ratio_conditional() <= 1.15 &&
            std::abs(sum.conditional.skewness) < 0.2 && std::abs(sum.conditional.excess_kurtosis) < 0.5;
  std::ostringstream os;
  os << sum.to_text();
  os << "criterion: conditional variance ratio in [0.85, 1.15], |skewness| < 0.2, |excess kurtosis| < 0.5\n";
  os << "verdict=" << verdict(ok) << "\n";
  em.write("clt_report.txt", os.str());
  return ok;
}

bool run_figure2(const ExperimentConfig& cfg, Emitter& em) {
  auto model = cfg.spectral_model();
  if (!model.zero_bulk() || model.spike_count() != 1) field_error("model", "figure2 needs the zero bulk with one spike");
  const double a1 = model.spikes()[0];
  std::size_t intervals = param_count(cfg.params, "intervals", 100);
  auto d = figure2_data(cfg.n, a1, cfg.times.back(), intervals, cfg.seed, cfg.beta);
  auto paths = em.table({"t", "i", "lambda"});
  for (std::size_t k = 0; k < d.times.size(); ++k)
    for (std::size_t i = 0; i < d.n; ++i)
      paths.add_row({io::fmt(d.times[k]), io::fmt(i + 1),
                     io::fmt(d.lambda(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)))});
  em.write("figure2_paths.csv", paths);
  auto th = em.table({"t", "spike_line", "spike_solver", "edge_upper", "edge_lower"});
  for (std::size_t k = 0; k < d.times.size(); ++k) {
    double t = d.times[k];
    th.add_row({io::fmt(t), io::fmt(a1 + t / a1), io::fmt(d.spike_theory[k]), io::fmt(d.edge_theory[k]),
                io::fmt(-d.edge_theory[k])});
  }
  em.write("figure2_theory.csv", th);

  double tmax = d.times.back();
  io::SvgPlot plot("Eigenvalue trajectories, N=" + std::to_string(d.n), "t", "lambda", {0.0, tmax},
                   {-2.2 * std::sqrt(tmax) - 0.5, a1 + tmax / a1 + 1.5});
  const std::size_t stride = std::max<std::size_t>(d.n / 40, 1);
  for (std::size_t i = 0; i < d.n; i += (i == 0 ? 1 : stride)) {
    io::Series s;
    s.color = i == 0 ? "#1f77b4" : "#9a9a9a";
    s.width = i == 0 ? 1.5 : 0.6;
    s.label = i == 0 ? "lambda_1(t)" : (i == 1 ? "bulk eigenvalues" : "");
    s.x = d.times;
    for (std::size_t k = 0; k < d.times.size(); ++k)
      s.y.push_back(d.lambda(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
    plot.add(s);
  }
  io::Series line{"a_1 + t/a_1", "#d62728", d.times, {}, false, true, 1.5, {}};
  for (double t : d.times) line.y.push_back(a1 + t / a1);
  plot.add(line);
  io::Series up{"+-2 sqrt(t)", "#2ca02c", d.times, d.edge_theory, false, true, 1.2, {}};
  io::Series lo{"", "#2ca02c", d.times, {}, false, true, 1.2, {}};
  for (double e : d.edge_theory) lo.y.push_back(-e);
  plot.add(up);
  plot.add(lo);
  em.write("figure2.svg", plot.render());

  bool spike_ok = d.max_spike_dev_ratio <= 1.0;
  bool edge_ok = d.max_edge_dev <= 0.15;
  std::ostringstream os;
  os << "max |lambda_1 - (a1 + t/a1)| / (3 sqrt(2t/N)) = " << d.max_spike_dev_ratio << " (<= 1) " << verdict(spike_ok)
     << "\n";
  os << "max edge deviation from +-2 sqrt(t) = " << d.max_edge_dev << " (<= 0.15) " << verdict(edge_ok) << "\n";
  em.write("report.txt", os.str());
  return spike_ok && edge_ok;
}

bool run_figure3(const ExperimentConfig& cfg, Emitter& em) {
  auto model = cfg.spectral_model();
  auto* sc = std::get_if<Semicircle>(&model.bulk());
  if (!sc || sc->radius != 2.0 || model.spike_count() != 0)
    field_error("model", "figure3 needs the radius-2 semicircle without spikes");
  if (cfg.dynamics != mc::Dynamics::OrnsteinUhlenbeck) field_error("dynamics", "figure3 uses OU dynamics");
  std::size_t nb = param_count(cfg.params, "bins", 20);
  auto d = figure3_data(cfg.n, cfg.times.front(), cfg.n_samples, cfg.seed, nb, cfg.beta);
  auto mct = em.table({"bin", "lo", "hi", "count", "mean", "std_err"});
  auto tht = em.table({"bin", "lo", "hi", "value"});
  for (std::size_t b = 0; b < d.bins.size(); ++b) {
    const auto& x = d.bins[b];
    mct.add_row({io::fmt(b + 1), io::fmt(x.lo), io::fmt(x.hi), io::fmt(x.count), io::fmt(x.mc), io::fmt(x.std_err)});
    tht.add_row({io::fmt(b + 1), io::fmt(x.lo), io::fmt(x.hi), io::fmt(x.theory)});
  }
  em.write("figure3_mc.csv", mct);
  em.write("figure3_theory.csv", tht);
  auto cv = em.table({"t", "lambda", "K"});
  for (Eigen::Index c = 0; c < d.curve.cols(); ++c)
    for (Eigen::Index r = 0; r < d.curve.rows(); ++r)
      cv.add_row({io::fmt(d.curve_t[static_cast<std::size_t>(c)]), io::fmt(d.curve_lambda[static_cast<std::size_t>(r)]),
                  io::fmt(d.curve(r, c))});
  em.write("figure3_curves.csv", cv);

  double ymax = std::max(d.curve.maxCoeff(), 1.0) * 1.1;
  io::SvgPlot plot("Rescaled overlaps, N=" + std::to_string(d.n) + ", OU", "lambda", "N E|<psi_i^t|psi_j^0>|^2",
                   {-2.5, 2.5}, {0.0, ymax});
  const char* colors[] = {"#d62728", "#ff7f0e", "#2ca02c", "#9467bd"};
  for (Eigen::Index c = 0; c < d.curve.cols(); ++c) {
    io::Series s;
    std::ostringstream lab;
    lab << "K_t(lambda,0), t=" << d.curve_t[static_cast<std::size_t>(c)];
    s.label = lab.str();
    s.color = colors[c % 4];
    s.x = d.curve_lambda;
    for (Eigen::Index r = 0; r < d.curve.rows(); ++r) s.y.push_back(d.curve(r, c));
    plot.add(s);
  }
  io::Series pts;
  pts.label = "Monte Carlo bins";
  pts.points = true;
  pts.color = "#000000";
  for (const auto& b : d.bins) {
    pts.x.push_back(0.5 * (b.lo + b.hi));
    pts.y.push_back(b.mc);
    pts.err.push_back(b.std_err);
  }
  plot.add(pts);
  em.write("figure3.svg", plot.render());

  auto rep = compare(tht, mct, Tolerance{3.0, 0.9});
  std::ostringstream os;
  os << rep.to_text();
  os << "bins within 3 SE: " << d.bins_within_3se << "/" << d.bins.size() << " (need >= 90%)\n";
  em.write("report.txt", os.str());
  return rep.pass;
}

bool run_figure4(const ExperimentConfig& cfg, Emitter& em) {
  auto model = cfg.spectral_model();
  if (!model.zero_bulk() || model.spike_count() != 1) field_error("model", "figure4 needs the zero bulk with one spike");
  const double a1 = model.spikes()[0];
  auto d = figure4_data(cfg.n, a1, cfg.times, cfg.n_samples, cfg.seed, cfg.beta);
  const double ref = 1.0 / std::sqrt(static_cast<double>(d.n));
  auto mct = em.table({"t", "mean", "std_err"});
  auto tht = em.table({"t", "value", "spike_lab", "inv_sqrt_n"});
  for (std::size_t k = 0; k < d.times.size(); ++k) {
    mct.add_row({io::fmt(d.times[k]), io::fmt(d.mean[k]), io::fmt(d.std_err[k])});
    tht.add_row({io::fmt(d.times[k]), io::fmt(d.sqrt_law[k]), io::fmt(d.spike_lab[k]), io::fmt(ref)});
  }
  em.write("figure4_mc.csv", mct);
  em.write("figure4_theory.csv", tht);

  io::SvgPlot plot("Spike overlap, a_1=" + io::fmt(a1) + ", N=" + std::to_string(d.n), "t", "|<psi_1^t|psi_1^0>|",
                   {0.0, d.times.back()}, {0.0, 1.05});
  plot.add(io::Series{"Monte Carlo mean", "#1f77b4", d.times, d.mean, false, false, 1.5, {}});
  plot.add(io::Series{"sqrt(1 - t/a_1^2)", "#d62728", d.times, d.sqrt_law, false, false, 1.5, {}});
  plot.add(io::Series{"1/sqrt(N)", "#2ca02c", {0.0, d.times.back()}, {ref, ref}, false, true, 1.2, {}});
  em.write("figure4.svg", plot.render());

  bool ok = true;
  std::ostringstream os;
  const double tol = 5.0 / std::sqrt(static_cast<double>(d.n));
  for (std::size_t k = 0; k < d.times.size(); ++k) {
    double t = d.times[k];
    if (t >= a1 * a1) continue;
    bool pass = std::abs(d.mean[k] - d.sqrt_law[k]) <= tol;
    ok = ok && pass;
    os << "t=" << t << " mc=" << d.mean[k] << " theory=" << d.sqrt_law[k] << " tol=" << tol << " " << verdict(pass)
       << "\n";
  }
  if (d.death_time) {
    bool pass = std::abs(*d.death_time - a1 * a1) <= 0.1;
    ok = ok && pass;
    os << "death time " << *d.death_time << " vs " << a1 * a1 << " +- 0.1 " << verdict(pass) << "\n";
  } else {
    os << "death time not reached on the time grid\n";
  }
  em.write("report.txt", os.str());
  return ok;
}

}  // namespace

const char* kind_name(Kind k) {
  for (const auto& [name, kind] : kinds())
    if (kind == k) return name.c_str();
  return "?";
}

SpectralModel parse_model(const json& j) {
  if (!j.is_object()) field_error("model", "must be an object");
  const json& var = require(j, "variant", "model.");
  if (!var.is_string()) field_error("model.variant", "must be a string");
  const std::string v = var.get<std::string>();
  json p = j.value("params", json::object());
  if (!p.is_object()) field_error("model.params", "must be an object");
  DensitySpec spec;
  if (v == "semicircle") {
    spec = Semicircle{p.contains("radius") ? get_number(p, "radius", "model.params.") : 2.0};
  } else if (v == "uniform") {
    spec = Uniform{get_number(p, "lo", "model.params."), get_number(p, "hi", "model.params.")};
  } else if (v == "triangular") {
    spec = Triangular{get_number(p, "lo", "model.params."), get_number(p, "peak", "model.params."),
                      get_number(p, "hi", "model.params.")};
  } else if (v == "zero") {
    spec = ZeroBulk{};
  } else if (v == "tabulated") {
    const json& q = require(p, "quantiles", "model.params.");
    if (!q.is_array()) field_error("model.params.quantiles", "must be an array");
    Tabulated tab;
    for (const auto& x : q) {
      if (!x.is_number()) field_error("model.params.quantiles", "must contain numbers");
      tab.quantiles.push_back(x.get<double>());
    }
    spec = tab;
  } else {
    field_error("model.variant", "unknown variant '" + v + "'");
  }
  std::vector<double> spikes;
  if (j.contains("spikes")) {
    if (!j.at("spikes").is_array()) field_error("model.spikes", "must be an array");
    for (const auto& x : j.at("spikes")) {
      if (!x.is_number()) field_error("model.spikes", "must contain numbers");
      spikes.push_back(x.get<double>());
    }
  }
  try {
    return SpectralModel(spec, spikes);
  } catch (const Error& e) {
    field_error("model", e.what());
  }
}

SpectralModel ExperimentConfig::spectral_model() const { return parse_model(model); }

json ExperimentConfig::to_json() const {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["model"] = model;
  j["dynamics"] = dynamics == mc::Dynamics::Additive ? "additive" : "ou";
  j["N"] = n;
  j["beta"] = beta;
  j["times"] = times;
  j["n_samples"] = n_samples;
  j["seed"] = seed;
  j["experiment"] = kind_name(experiment);
  j["output_dir"] = output_dir.string();
  j["params"] = params;
  return j;
}

std::string ExperimentConfig::hash() const {
  // output_dir does not change the data, so it is left out of the hash.
  json j = to_json();
  j.erase("output_dir");
  return sha256_hex(j.dump());
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError(kWhere, "config must be a JSON object");
  ExperimentConfig c;
  const json& sv = require(j, "schema_version", "");
  if (!sv.is_number_integer() || sv.get<int>() != kSchemaVersion)
    field_error("schema_version", "expected " + std::to_string(kSchemaVersion));
  static const std::vector<std::string> known{"schema_version", "model",      "dynamics", "N",
                                              "beta",           "times",      "n_samples", "seed",
                                              "experiment",     "output_dir", "params"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) field_error(key, "unknown field");
  c.model = require(j, "model", "");
  parse_model(c.model);
  const std::string dyn = j.value("dynamics", std::string("additive"));
  if (dyn == "additive")
    c.dynamics = mc::Dynamics::Additive;
  else if (dyn == "ou")
    c.dynamics = mc::Dynamics::OrnsteinUhlenbeck;
  else
    field_error("dynamics", "must be 'additive' or 'ou'");
  c.n = get_count(j, "N", "");
  const json& b = require(j, "beta", "");
  if (!b.is_number_integer() || (b.get<int>() != 1 && b.get<int>() != 2)) field_error("beta", "must be 1 or 2");
  c.beta = b.get<int>();
  const json& ts = require(j, "times", "");
  if (!ts.is_array() || ts.empty()) field_error("times", "must be a non-empty array");
  for (const auto& t : ts) {
    if (!t.is_number() || !(t.get<double>() >= 0.0) || !std::isfinite(t.get<double>()))
      field_error("times", "entries must be finite numbers >= 0");
    c.times.push_back(t.get<double>());
  }
  if (!std::is_sorted(c.times.begin(), c.times.end()) ||
      std::adjacent_find(c.times.begin(), c.times.end()) != c.times.end())
    field_error("times", "must be strictly increasing");
  c.n_samples = get_count(j, "n_samples", "");
  const json& sd = require(j, "seed", "");
  if (!sd.is_number_integer() || sd.get<long long>() < 0) field_error("seed", "must be a non-negative integer");
  c.seed = sd.get<std::uint64_t>();
  const json& ex = require(j, "experiment", "");
  if (!ex.is_string() || !kinds().count(ex.get<std::string>()))
    field_error("experiment", "must be one of density, paths, overlaps-bulk, overlaps-crossover, spike, clt, "
                              "figure2, figure3, figure4");
  c.experiment = kinds().at(ex.get<std::string>());
  const json& od = require(j, "output_dir", "");
  if (!od.is_string() || od.get<std::string>().empty()) field_error("output_dir", "must be a non-empty string");
  c.output_dir = od.get<std::string>();
  if (j.contains("params")) {
    if (!j.at("params").is_object()) field_error("params", "must be an object");
    c.params = j.at("params");
  }
  if (c.model.value("spikes", json::array()).size() >= c.n) field_error("N", "must exceed the number of spikes");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error& e) {
    throw ConfigError(kWhere, e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(kWhere, std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("experiments-cli/sha256", "digest failed");
  std::ostringstream os;
  for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[k]);
  return os.str();
}

json RunRecord::to_json() const {
  json j;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["started"] = started;
  j["finished"] = finished;
  j["passed"] = passed;
  j["config"] = config;
  j["manifest"] = json::array();
  for (const auto& m : manifest) j["manifest"].push_back({{"file", m.file}, {"sha256", m.sha256}, {"bytes", m.bytes}});
  return j;
}

RunRecord RunRecord::from_json(const json& j) {
  RunRecord r;
  try {
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.started = j.at("started").get<std::string>();
    r.finished = j.at("finished").get<std::string>();
    r.passed = j.value("passed", true);
    r.config = j.at("config");
    for (const auto& m : j.at("manifest"))
      r.manifest.push_back({m.at("file").get<std::string>(), m.at("sha256").get<std::string>(),
                            m.at("bytes").get<std::size_t>()});
  } catch (const json::exception& e) {
    throw InputError("experiments-cli/run_record", e.what());
  }
  return r;
}

RunRecord run(const ExperimentConfig& cfg) {
  RunRecord rec;
  rec.config_hash = cfg.hash();
  rec.seed = cfg.seed;
  rec.config = cfg.to_json();
  rec.started = utc_now();
  std::filesystem::create_directories(cfg.output_dir);
  Emitter em{cfg, rec.config_hash, rec};
  switch (cfg.experiment) {
    case Kind::Density: run_density(cfg, em); break;
    case Kind::Paths: run_paths(cfg, em); break;
    case Kind::OverlapsBulk: rec.passed = run_overlaps_bulk(cfg, em); break;
    case Kind::OverlapsCrossover: rec.passed = run_crossover(cfg, em); break;
    case Kind::Spike: rec.passed = run_spike(cfg, em); break;
    case Kind::Clt: rec.passed = run_clt(cfg, em); break;
    case Kind::Figure2: rec.passed = run_figure2(cfg, em); break;
    case Kind::Figure3: rec.passed = run_figure3(cfg, em); break;
    case Kind::Figure4: rec.passed = run_figure4(cfg, em); break;
  }
  rec.finished = utc_now();
  io::write_atomic(cfg.output_dir / "run_record.json", rec.to_json().dump(2) + "\n");
  return rec;
}

std::vector<std::string> verify_manifest(const RunRecord& rec, const std::filesystem::path& dir) {
  std::vector<std::string> bad;
  for (const auto& m : rec.manifest) {
    try {
      if (sha256_hex(io::read_file(dir / m.file)) != m.sha256) bad.push_back(m.file);
    } catch (const Error&) {
      bad.push_back(m.file);
    }
  }
  return bad;
}

Tolerance Tolerance::parse(const std::string& spec) {
  Tolerance t;
  std::istringstream is(spec);
  std::string part;
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("experiments-cli/tolerance", "not a number: '" + s + "'");
    }
  };
  while (std::getline(is, part, ',')) {
    auto eq = part.find('=');
    if (eq == std::string::npos) {
      t.z = number(part);
      continue;
    }
    std::string key = part.substr(0, eq), val = part.substr(eq + 1);
    if (key == "z")
      t.z = number(val);
    else if (key == "frac")
      t.min_pass_fraction = number(val);
    else
      throw ConfigError("experiments-cli/tolerance", "unknown key '" + key + "'");
  }
  if (!(t.z > 0.0) || !(t.min_pass_fraction > 0.0 && t.min_pass_fraction <= 1.0))
    throw ConfigError("experiments-cli/tolerance", "need z > 0 and frac in (0, 1]");
  return t;
}

CompareReport compare(const io::CsvTable& theory, const io::CsvTable& mc, const Tolerance& tol) {
  const char* where = "experiments-cli/compare";
  std::string tcol = theory.has_column("value") ? "value" : "mean";
  if (!theory.has_column(tcol)) throw InputError(where, "theory file needs a 'value' or 'mean' column");
  if (!mc.has_column("mean") || !mc.has_column("std_err"))
    throw InputError(where, "MC file needs 'mean' and 'std_err' columns");
  if (theory.rows.size() != mc.rows.size())
    throw InputError(where, "row counts differ: " + std::to_string(theory.rows.size()) + " vs " +
                                std::to_string(mc.rows.size()));
  std::vector<std::string> keys;
  for (const auto& c : mc.columns)
    if (c != "mean" && c != "std_err" && c != "value" && theory.has_column(c)) keys.push_back(c);
  CompareReport rep;
  std::size_t evaluated = 0;
  for (std::size_t r = 0; r < mc.rows.size(); ++r) {
    CompareRow row;
    for (const auto& k : keys) {
      const std::string& a = theory.rows[r][theory.column(k)];
      const std::string& b = mc.rows[r][mc.column(k)];
      if (a != b && std::abs(theory.number(r, k) - mc.number(r, k)) > 1e-12 * std::max(1.0, std::abs(mc.number(r, k))))
        throw InputError(where, "row " + std::to_string(r + 1) + ": key '" + k + "' differs (" + a + " vs " + b + ")");
      row.key += (row.key.empty() ? "" : " ") + k + "=" + b;
    }
    if (row.key.empty()) row.key = "row=" + std::to_string(r + 1);
    row.theory = theory.number(r, tcol);
    row.mc = mc.number(r, "mean");
    row.std_err = mc.number(r, "std_err");
    if (!std::isfinite(row.theory) || !std::isfinite(row.mc)) {
      row.z = std::numeric_limits<double>::quiet_NaN();
      rep.rows.push_back(row);
      continue;
    }
    double dev = row.mc - row.theory;
    ++evaluated;
    if (row.std_err > 0.0)
      row.z = dev / row.std_err;
    else
      row.z = std::abs(dev) <= 1e-12 * std::max(1.0, std::abs(row.theory)) ? 0.0
                                                                           : std::copysign(std::numeric_limits<double>::infinity(), dev);
    row.pass = std::abs(row.z) <= tol.z;
    if (!row.pass) ++rep.failures;
    rep.max_abs_z = std::max(rep.max_abs_z, std::abs(row.z));
    rep.max_deviation = std::max(rep.max_deviation, std::abs(dev));
    rep.rows.push_back(row);
  }
  double passed = static_cast<double>(evaluated - rep.failures);
  rep.pass = evaluated > 0 && passed >= tol.min_pass_fraction * static_cast<double>(evaluated) - 1e-9;
  return rep;
}

std::string CompareReport::to_text() const {
  std::ostringstream os;
  os << "key,theory,mc,std_err,z,status\n";
  for (const auto& r : rows) {
    os << r.key << "," << io::fmt(r.theory) << "," << io::fmt(r.mc) << "," << io::fmt(r.std_err) << "," << io::fmt(r.z)
       << "," << (std::isnan(r.z) ? "skipped" : (r.pass ? "ok" : "FAIL")) << "\n";
  }
  os << "max_abs_z=" << io::fmt(max_abs_z) << "\n";
  os << "max_deviation=" << io::fmt(max_deviation) << "\n";
  os << "failures=" << failures << "\n";
  os << "verdict=" << (pass ? "PASS" : "FAIL") << "\n";
  return os.str();
}

Figure2Data figure2_data(std::size_t n, double a1, double t_max, std::size_t intervals, std::uint64_t seed,
                         int beta) {
  Figure2Data d;
  d.n = n;
  d.a1 = a1;
  for (std::size_t k = 0; k <= intervals; ++k)
    d.times.push_back(t_max * static_cast<double>(k) / static_cast<double>(intervals));
  SpectralModel model(ZeroBulk{}, {a1});
  auto spectrum = discretize(model, n);
  mc::MatrixPathConfig pc;
  pc.n = n;
  pc.beta = beta;
  pc.t_max = t_max;
  pc.checkpoints = d.times;
  pc.seed = seed;
  pc.n_samples = 1;
  d.lambda.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d.times.size()));
  dispatch_beta(
      beta, spectrum.values, pc,
      [&](std::size_t, std::size_t k, const mc::OverlapRecord& rec) { d.lambda.col(static_cast<Eigen::Index>(k)) = rec.eigenvalues; },
      std::vector<char>(d.times.size(), 0));
  burgers::BurgersSolver solver(model);
  auto tr = spike::spike_trajectory(solver, 0, t_max, {});
  const double dt = tr.times.size() > 1 ? tr.times[1] - tr.times[0] : 1.0;
  const double nd = static_cast<double>(n);
  for (std::size_t k = 0; k < d.times.size(); ++k) {
    double t = d.times[k];
    auto idx = std::min(static_cast<std::size_t>(std::lround(t / dt)), tr.times.size() - 1);
    d.spike_theory.push_back(tr.position[idx]);
    d.edge_theory.push_back(2.0 * std::sqrt(t));
    if (t <= 0.0) continue;
    const auto kk = static_cast<Eigen::Index>(k);
    double dev = std::abs(d.lambda(0, kk) - (a1 + t / a1)) / (3.0 * std::sqrt(2.0 * t / nd));
    d.max_spike_dev_ratio = std::max(d.max_spike_dev_ratio, dev);
    double e = std::max(std::abs(d.lambda(1, kk) - 2.0 * std::sqrt(t)),
                        std::abs(d.lambda(static_cast<Eigen::Index>(n) - 1, kk) + 2.0 * std::sqrt(t)));
    d.max_edge_dev = std::max(d.max_edge_dev, e);
  }
  return d;
}

Figure3Data figure3_data(std::size_t n, double t, std::size_t samples, std::uint64_t seed, std::size_t nbins,
                         int beta) {
  const char* where = "experiments-cli/figure3";
  if (n < 2) throw ConfigError(where, "N must be >= 2");
  if (!(t > 0.0)) throw ConfigError(where, "t must be > 0");
  if (samples < 2) throw ConfigError(where, "need at least 2 samples");
  Figure3Data d;
  d.n = n;
  d.t = t;
  d.samples = samples;
  d.j = n / 2 - 1;
  auto spectrum = discretize(SpectralModel(Semicircle{2.0}), n);
  d.mu = spectrum.values[d.j];
  const double nd = static_cast<double>(n);
  const double lo = -2.0, hi = 2.0, width = (hi - lo) / static_cast<double>(nbins);
  // Per-sample, per-bin sums of N o, K and their count.
  Eigen::MatrixXd smc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(nbins));
  Eigen::MatrixXd sth = smc, cnt = smc;
  mc::MatrixPathConfig pc;
  pc.n = n;
  pc.beta = beta;
  pc.t_max = t;
  pc.checkpoints = {t};
  pc.dynamics = mc::Dynamics::OrnsteinUhlenbeck;
  pc.seed = seed;
  pc.n_samples = samples;
  dispatch_beta(
      beta, spectrum.values, pc,
      [&](std::size_t s, std::size_t, const mc::OverlapRecord& rec) {
        const auto si = static_cast<Eigen::Index>(s);
        for (Eigen::Index i = 0; i < rec.eigenvalues.size(); ++i) {
          double lam = rec.eigenvalues(i);
          auto b = static_cast<Eigen::Index>(
              std::clamp(std::floor((lam - lo) / width), 0.0, static_cast<double>(nbins - 1)));
          double lq = std::clamp(lam, -2.0, 2.0);
          smc(si, b) += nd * rec.squared_overlaps(i, static_cast<Eigen::Index>(d.j));
          sth(si, b) += kernel::kernel_closed({lq, d.mu, t, std::nullopt});
          cnt(si, b) += 1.0;
        }
      },
      {});
  for (std::size_t b = 0; b < nbins; ++b) {
    const auto bi = static_cast<Eigen::Index>(b);
    Figure3Bin bin;
    bin.lo = lo + width * static_cast<double>(b);
    bin.hi = bin.lo + width;
    double total = cnt.col(bi).sum();
    bin.count = static_cast<std::size_t>(total);
    if (total > 0) {
      bin.mc = smc.col(bi).sum() / total;
      bin.theory = sth.col(bi).sum() / total;
      double dbar = bin.mc - bin.theory, ss = 0.0;
      for (std::size_t s = 0; s < samples; ++s) {
        const auto si = static_cast<Eigen::Index>(s);
        double r = (smc(si, bi) - sth(si, bi)) - dbar * cnt(si, bi);
        ss += r * r;
      }
      double sd = static_cast<double>(samples);
      bin.std_err = std::sqrt(ss * sd / (sd - 1.0)) / total;
      bin.z = bin.std_err > 0 ? dbar / bin.std_err : 0.0;
      if (std::abs(bin.z) <= 3.0) ++d.bins_within_3se;
    } else {
      bin.mc = bin.theory = std::numeric_limits<double>::quiet_NaN();
    }
    d.bins.push_back(bin);
  }
  d.curve_t = {0.125, 0.25, 0.5, 1.0};
  const std::size_t pts = 401;
  d.curve.resize(static_cast<Eigen::Index>(pts), 4);
  for (std::size_t r = 0; r < pts; ++r) {
    double lam = -2.0 + 4.0 * static_cast<double>(r) / static_cast<double>(pts - 1);
    d.curve_lambda.push_back(lam);
    for (std::size_t c = 0; c < 4; ++c)
      d.curve(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          kernel::kernel_closed({lam, 0.0, d.curve_t[c], std::nullopt});
  }
  return d;
}

Figure4Data figure4_data(std::size_t n, double a1, const std::vector<double>& times, std::size_t samples,
                         std::uint64_t seed, int beta) {
  Figure4Data d;
  d.n = n;
  d.samples = samples;
  d.a1 = a1;
  d.times = times;
  SpectralModel model(ZeroBulk{}, {a1});
  auto spectrum = discretize(model, n);
  mc::MatrixPathConfig pc;
  pc.n = n;
  pc.beta = beta;
  pc.t_max = times.back();
  pc.checkpoints = times;
  pc.seed = seed;
  pc.n_samples = samples;
  std::vector<std::vector<double>> ov(times.size(), std::vector<double>(samples));
  dispatch_beta(
      beta, spectrum.values, pc,
      [&](std::size_t s, std::size_t k, const mc::OverlapRecord& rec) { ov[k][s] = std::sqrt(rec.squared_overlaps(0, 0)); },
      {});
  spike::SpikeLab lab(model, 0, times.back());
  d.death_time = lab.critical_time();
  for (std::size_t k = 0; k < times.size(); ++k) {
    d.mean.push_back(mean_of(ov[k]));
    d.std_err.push_back(std_err_of(ov[k]));
    double t = times[k];
    d.sqrt_law.push_back(t < a1 * a1 ? std::sqrt(1.0 - t / (a1 * a1)) : 0.0);
    double sl = 0.0;
    if (!d.death_time || t < *d.death_time) {
      try {
        sl = lab.mean_overlap(t);
      } catch (const Error&) {
        sl = std::numeric_limits<double>::quiet_NaN();
      }
    }
    d.spike_lab.push_back(sl);
  }
  return d;
}

}  // namespace rml::exp
