#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace rml::test {

// Radius-r semicircle mass below lambda.
inline double semicircle_cdf(double l, double r = 2.0) {
  double x = std::clamp(l / r, -1.0, 1.0);
  return 0.5 + (x * std::sqrt(1.0 - x * x) + std::asin(x)) / std::numbers::pi;
}

// Kolmogorov distance between the empirical CDF of xs and a model CDF.
template <class Cdf>
double kolmogorov(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    double f = cdf(xs[k]);
    d = std::max({d, std::abs(f - static_cast<double>(k) / n), std::abs(static_cast<double>(k + 1) / n - f)});
  }
  return d;
}

inline std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

struct MeanVar {
  double mean = 0.0, var = 0.0;
  std::size_t n = 0;
  void add(double x) {
    ++n;
    double d = x - mean;
    mean += d / static_cast<double>(n);
    var += d * (x - mean);
  }
  double variance() const { return n > 1 ? var / static_cast<double>(n - 1) : 0.0; }
  double std_err() const { return std::sqrt(variance() / static_cast<double>(n)); }
};

}  // namespace rml::test
