#include "rml/panel.hpp"

#include <cmath>
#include <numbers>

#include "rml/error.hpp"

namespace rml {

namespace {

double cheb_t(std::size_t j, double x) { return std::cos(static_cast<double>(j) * std::acos(x)); }

// int_{-1}^{x} T_j(s) ds
double cheb_t_integral(std::size_t j, double x) {
  auto anti = [](std::size_t k, double y) {
    if (k == 0) return y;
    if (k == 1) return 0.5 * y * y;
    double kk = static_cast<double>(k);
    return 0.5 * (cheb_t(k + 1, y) / (kk + 1.0) - cheb_t(k - 1, y) / (kk - 1.0));
  };
  return anti(j, x) - anti(j, -1.0);
}

}  // namespace

PanelGrid::PanelGrid(std::vector<double> breakpoints, std::size_t order)
    : breaks_(std::move(breakpoints)), order_(order) {
  if (breaks_.size() < 2 || order_ < 1) throw DomainError("panel/PanelGrid", "need >= 1 panel and order >= 1");
  for (std::size_t k = 0; k + 1 < breaks_.size(); ++k)
    if (!(breaks_[k + 1] > breaks_[k])) throw DomainError("panel/PanelGrid", "breakpoints must increase");
  const std::size_t p = order_ + 1;
  std::vector<double> ref(p);
  for (std::size_t i = 0; i < p; ++i)
    ref[i] = -std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(order_));
  Eigen::MatrixXd v(p, p), a(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cheb_t(j, ref[i]);
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cheb_t_integral(j, ref[i]);
    }
  }
  q_ = a * v.inverse();
  for (std::size_t k = 0; k + 1 < breaks_.size(); ++k) {
    double mid = 0.5 * (breaks_[k] + breaks_[k + 1]);
    double hw = 0.5 * (breaks_[k + 1] - breaks_[k]);
    for (double r : ref) nodes_.push_back(mid + hw * r);
    nodes_[nodes_.size() - p] = breaks_[k];
    nodes_.back() = breaks_[k + 1];
  }
}

std::vector<double> PanelGrid::cumulative(const std::vector<double>& f) const {
  const std::size_t p = order_ + 1;
  if (f.size() != nodes_.size()) throw DomainError("panel/cumulative", "size mismatch");
  std::vector<double> out(f.size());
  double carry = 0.0;
  for (std::size_t k = 0; k + 1 < breaks_.size(); ++k) {
    double hw = 0.5 * (breaks_[k + 1] - breaks_[k]);
    Eigen::Map<const Eigen::VectorXd> fk(f.data() + k * p, static_cast<Eigen::Index>(p));
    Eigen::VectorXd ik = hw * (q_ * fk);
    for (std::size_t i = 0; i < p; ++i) out[k * p + i] = carry + ik(static_cast<Eigen::Index>(i));
    carry = out[k * p + p - 1];
  }
  return out;
}

}  // namespace rml
