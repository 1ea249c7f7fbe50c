#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

namespace rml {

// Composite Chebyshev-Lobatto collocation on [b_0, b_1, ..., b_P]. Each panel
// owns order+1 nodes (shared endpoints are duplicated); cumulative() returns
// the antiderivative from b_0 at every node, exact for piecewise polynomials
// of degree <= order.
class PanelGrid {
 public:
  PanelGrid(std::vector<double> breakpoints, std::size_t order = 12);

  const std::vector<double>& nodes() const { return nodes_; }
  std::size_t panels() const { return breaks_.size() - 1; }
  std::size_t per_panel() const { return order_ + 1; }
  std::vector<double> cumulative(const std::vector<double>& f) const;

 private:
  std::vector<double> breaks_;
  std::size_t order_;
  std::vector<double> nodes_;
  Eigen::MatrixXd q_;  // reference integration matrix on [-1, 1]
};

}  // namespace rml
