#include "rml/spectral_model.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numbers>

#include "rml/error.hpp"

namespace rml {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double semicircle_tail(double radius, double lambda) {
  double u = std::clamp(lambda / radius, -1.0, 1.0);
  return 0.5 - (u * std::sqrt(1.0 - u * u) + std::asin(u)) / std::numbers::pi;
}

double semicircle_quantile(double radius, double x) {
  if (x <= 0.0) return radius;
  if (x >= 1.0) return -radius;
  auto f = [&](double lam) { return semicircle_tail(radius, lam) - x; };
  std::uintmax_t iters = 200;
  auto tol = [radius](double a, double b) { return std::abs(b - a) <= 1e-12 * radius; };
  auto r = boost::math::tools::toms748_solve(f, -radius, radius, 1.0 - x, -x, tol, iters);
  return 0.5 * (r.first + r.second);
}

double tabulated_quantile(const std::vector<double>& q, double x) {
  double pos = std::clamp(x, 0.0, 1.0) * static_cast<double>(q.size() - 1);
  auto k = std::min(static_cast<std::size_t>(pos), q.size() - 2);
  double frac = pos - static_cast<double>(k);
  return q[k] + frac * (q[k + 1] - q[k]);
}

}  // namespace

void validate(const DensitySpec& spec) {
  std::visit(overloaded{
                 [](const Semicircle& s) {
                   if (!(s.radius > 0.0) || !std::isfinite(s.radius))
                     throw ConfigError("spectral-model/validate", "semicircle radius must be > 0");
                 },
                 [](const Uniform& u) {
                   if (!(u.hi > u.lo) || !std::isfinite(u.lo) || !std::isfinite(u.hi))
                     throw ConfigError("spectral-model/validate", "uniform requires lo < hi");
                 },
                 [](const Triangular& t) {
                   if (!(t.lo <= t.peak && t.peak <= t.hi && t.lo < t.hi))
                     throw ConfigError("spectral-model/validate",
                                       "triangular requires lo <= peak <= hi, lo < hi");
                 },
                 [](const ZeroBulk&) {},
                 [](const Tabulated& t) {
                   if (t.quantiles.size() < 2)
                     throw ConfigError("spectral-model/validate",
                                       "tabulated density needs at least 2 quantile samples");
                   for (std::size_t k = 0; k + 1 < t.quantiles.size(); ++k) {
                     if (!std::isfinite(t.quantiles[k]) || t.quantiles[k + 1] > t.quantiles[k])
                       throw ConfigError("spectral-model/validate",
                                         "tabulated quantiles must be finite and non-increasing");
                   }
                   if (!(t.quantiles.front() > t.quantiles.back()))
                     throw ConfigError("spectral-model/validate",
                                       "tabulated quantiles must span a non-empty interval");
                 },
             },
             spec);
}

std::string variant_name(const DensitySpec& spec) {
  return std::visit(overloaded{
                        [](const Semicircle&) { return std::string("semicircle"); },
                        [](const Uniform&) { return std::string("uniform"); },
                        [](const Triangular&) { return std::string("triangular"); },
                        [](const ZeroBulk&) { return std::string("zero"); },
                        [](const Tabulated&) { return std::string("tabulated"); },
                    },
                    spec);
}

std::pair<double, double> support(const DensitySpec& spec) {
  return std::visit(
      overloaded{
          [](const Semicircle& s) { return std::pair{-s.radius, s.radius}; },
          [](const Uniform& u) { return std::pair{u.lo, u.hi}; },
          [](const Triangular& t) { return std::pair{t.lo, t.hi}; },
          [](const ZeroBulk&) { return std::pair{0.0, 0.0}; },
          [](const Tabulated& t) { return std::pair{t.quantiles.back(), t.quantiles.front()}; },
      },
      spec);
}

double pdf(const DensitySpec& spec, double lambda) {
  return std::visit(
      overloaded{
          [&](const Semicircle& s) {
            double r2 = s.radius * s.radius;
            if (std::abs(lambda) >= s.radius) return 0.0;
            return 2.0 * std::sqrt(r2 - lambda * lambda) / (std::numbers::pi * r2);
          },
          [&](const Uniform& u) { return (lambda >= u.lo && lambda <= u.hi) ? 1.0 / (u.hi - u.lo) : 0.0; },
          [&](const Triangular& t) {
            if (lambda < t.lo || lambda > t.hi) return 0.0;
            double w = t.hi - t.lo;
            if (lambda <= t.peak) return t.peak > t.lo ? 2.0 * (lambda - t.lo) / (w * (t.peak - t.lo)) : 2.0 / w;
            return t.hi > t.peak ? 2.0 * (t.hi - lambda) / (w * (t.hi - t.peak)) : 2.0 / w;
          },
          [&](const ZeroBulk&) -> double {
            throw DomainError("spectral-model/pdf", "zero bulk is a point mass with no density");
          },
          [&](const Tabulated& t) {
            const auto& q = t.quantiles;
            if (lambda > q.front() || lambda < q.back()) return 0.0;
            double h = 1.0 / static_cast<double>(q.size() - 1);
            for (std::size_t k = 0; k + 1 < q.size(); ++k) {
              if (lambda <= q[k] && lambda >= q[k + 1] && q[k] > q[k + 1]) return h / (q[k] - q[k + 1]);
            }
            return 0.0;
          },
      },
      spec);
}

double tail_cdf(const DensitySpec& spec, double lambda) {
  return std::visit(
      overloaded{
          [&](const Semicircle& s) { return semicircle_tail(s.radius, lambda); },
          [&](const Uniform& u) { return std::clamp((u.hi - lambda) / (u.hi - u.lo), 0.0, 1.0); },
          [&](const Triangular& t) {
            if (lambda <= t.lo) return 1.0;
            if (lambda >= t.hi) return 0.0;
            double w = t.hi - t.lo;
            if (lambda <= t.peak) return 1.0 - (lambda - t.lo) * (lambda - t.lo) / (w * (t.peak - t.lo));
            return (t.hi - lambda) * (t.hi - lambda) / (w * (t.hi - t.peak));
          },
          [&](const ZeroBulk&) { return lambda < 0.0 ? 1.0 : 0.0; },
          [&](const Tabulated& t) {
            const auto& q = t.quantiles;
            if (lambda >= q.front()) return 0.0;
            if (lambda <= q.back()) return 1.0;
            double h = 1.0 / static_cast<double>(q.size() - 1);
            for (std::size_t k = 0; k + 1 < q.size(); ++k) {
              if (lambda <= q[k] && lambda >= q[k + 1]) {
                double frac = q[k] > q[k + 1] ? (q[k] - lambda) / (q[k] - q[k + 1]) : 0.0;
                return h * (static_cast<double>(k) + frac);
              }
            }
            return 1.0;
          },
      },
      spec);
}

double bulk_quantile(const DensitySpec& spec, double x) {
  x = std::clamp(x, 0.0, 1.0);
  return std::visit(overloaded{
                        [&](const Semicircle& s) { return semicircle_quantile(s.radius, x); },
                        [&](const Uniform& u) { return u.hi - x * (u.hi - u.lo); },
                        [&](const Triangular& t) {
                          double w = t.hi - t.lo;
                          double f = 1.0 - x;
                          if (f <= (t.peak - t.lo) / w) return t.lo + std::sqrt(f * w * (t.peak - t.lo));
                          return t.hi - std::sqrt(x * w * (t.hi - t.peak));
                        },
                        [&](const ZeroBulk&) { return 0.0; },
                        [&](const Tabulated& t) { return tabulated_quantile(t.quantiles, x); },
                    },
                    spec);
}

double density_mass(const DensitySpec& spec) {
  using boost::math::quadrature::gauss_kronrod;
  auto f = [&](double l) { return pdf(spec, l); };
  return std::visit(
      overloaded{
          [&](const Semicircle& s) {
            boost::math::quadrature::tanh_sinh<double> ts;
            return ts.integrate(f, -s.radius, s.radius, 1e-14);
          },
          [&](const Uniform& u) { return gauss_kronrod<double, 15>::integrate(f, u.lo, u.hi, 0, 1e-14); },
          [&](const Triangular& t) {
            double m = 0.0;
            if (t.peak > t.lo) m += gauss_kronrod<double, 15>::integrate(f, t.lo, t.peak, 0, 1e-14);
            if (t.hi > t.peak) m += gauss_kronrod<double, 15>::integrate(f, t.peak, t.hi, 0, 1e-14);
            return m;
          },
          [&](const ZeroBulk&) { return 1.0; },
          [&](const Tabulated& t) {
            const auto& q = t.quantiles;
            double m = 0.0;
            for (std::size_t k = 0; k + 1 < q.size(); ++k) {
              if (q[k] > q[k + 1]) m += pdf(spec, 0.5 * (q[k] + q[k + 1])) * (q[k] - q[k + 1]);
            }
            return m;
          },
      },
      spec);
}

SpectralModel::SpectralModel(DensitySpec bulk, std::vector<double> spikes)
    : bulk_(std::move(bulk)), spikes_(std::move(spikes)) {
  validate(bulk_);
  double edge = support(bulk_).second;
  for (std::size_t k = 0; k < spikes_.size(); ++k) {
    if (!std::isfinite(spikes_[k]))
      throw ConfigError("spectral-model/SpectralModel", "spike values must be finite");
    if (k > 0 && !(spikes_[k] < spikes_[k - 1]))
      throw ConfigError("spectral-model/SpectralModel", "spikes must be strictly decreasing");
    if (!(spikes_[k] > edge))
      throw ConfigError("spectral-model/SpectralModel",
                        "spike " + std::to_string(spikes_[k]) + " is not above the bulk edge " +
                            std::to_string(edge));
  }
}

double quantile_a(const SpectralModel& model, double x) {
  if (!(x > 0.0 && x < 1.0))
    throw DomainError("spectral-model/quantile_a", "x must lie in (0,1), got " + std::to_string(x));
  return bulk_quantile(model.bulk(), x);
}

DiscreteSpectrum discretize(const SpectralModel& model, std::size_t n) {
  std::size_t ell = model.spike_count();
  if (n <= ell)
    throw ConfigError("spectral-model/discretize",
                      "N=" + std::to_string(n) + " must exceed the spike count " + std::to_string(ell));
  DiscreteSpectrum out;
  out.values.reserve(n);
  for (double s : model.spikes()) out.values.push_back(s);
  double nn = static_cast<double>(n);
  double lo = 1.0 / (2.0 * nn);
  double hi = 1.0 - lo;
  for (std::size_t k = ell + 1; k <= n; ++k) {
    double x = std::clamp(static_cast<double>(k) / nn, lo, hi);
    out.values.push_back(bulk_quantile(model.bulk(), x));
  }
  return out;
}

std::pair<double, double> bulk_support(const SpectralModel& model) { return support(model.bulk()); }

}  // namespace rml
