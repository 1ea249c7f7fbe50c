#pragma once

#include <cstddef>
#include <optional>

namespace rml::kernel {

double chebyshev_u(std::size_t n, double x);

// U_n and its first three derivatives at x, by the differentiated recurrence.
struct ChebyshevJet {
  double u = 0.0, d1 = 0.0, d2 = 0.0, d3 = 0.0;
};
ChebyshevJet chebyshev_u_jet(std::size_t n, double x);

struct KernelQuery {
  double lambda = 0.0;
  double mu = 0.0;
  double t = 1.0;
  std::optional<std::size_t> n_terms;  // nullopt: adaptive truncation

  void validate() const;
};

double kernel_series(const KernelQuery& q);
double kernel_closed(const KernelQuery& q);

// Terms used by the adaptive series for the given t (independent of lambda, mu).
std::size_t auto_terms(double t);

double verify_eigenrelation(std::size_t n, double lambda, std::size_t quad_points = 2000);

// (1/2pi) int U_m(l/2) U_n(l/2) sqrt(4 - l^2) dl by Gauss quadrature for the
// weight sqrt(1 - x^2); exact for m + n < 2 * points.
double chebyshev_inner_product(std::size_t m, std::size_t n, std::size_t points = 64);

}  // namespace rml::kernel
