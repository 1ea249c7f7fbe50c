#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace rml {

struct Semicircle {
  double radius = 2.0;
};

struct Uniform {
  double lo = -1.0;
  double hi = 1.0;
};

struct Triangular {
  double lo = -1.0;
  double peak = 0.0;
  double hi = 1.0;
};

// Point mass at zero: the factor model.
struct ZeroBulk {};

// Quantile samples a(x_k) at x_k = k/(M-1), k = 0..M-1, non-increasing.
struct Tabulated {
  std::vector<double> quantiles;
};

using DensitySpec = std::variant<Semicircle, Uniform, Triangular, ZeroBulk, Tabulated>;

void validate(const DensitySpec& spec);
std::string variant_name(const DensitySpec& spec);

std::pair<double, double> support(const DensitySpec& spec);

// Density of the bulk. ZeroBulk has no density and throws DomainError.
double pdf(const DensitySpec& spec, double lambda);

// Mass above lambda.
double tail_cdf(const DensitySpec& spec, double lambda);

// a(x) with x = tail_cdf(a(x)); x in [0,1], endpoints give the support edges.
double bulk_quantile(const DensitySpec& spec, double x);

// Quadrature of the density over its support (1 for a valid parametric spec).
double density_mass(const DensitySpec& spec);

class SpectralModel {
 public:
  explicit SpectralModel(DensitySpec bulk, std::vector<double> spikes = {});

  const DensitySpec& bulk() const { return bulk_; }
  const std::vector<double>& spikes() const { return spikes_; }
  std::size_t spike_count() const { return spikes_.size(); }
  bool zero_bulk() const { return std::holds_alternative<ZeroBulk>(bulk_); }

 private:
  DensitySpec bulk_;
  std::vector<double> spikes_;
};

struct DiscreteSpectrum {
  std::vector<double> values;
  std::size_t size() const { return values.size(); }
};

double quantile_a(const SpectralModel& model, double x);
DiscreteSpectrum discretize(const SpectralModel& model, std::size_t n);
std::pair<double, double> bulk_support(const SpectralModel& model);

}  // namespace rml
