#include "rml/matrix_mc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rml/error.hpp"

namespace rml::mc {

void MatrixPathConfig::validate() const {
  const char* where = "matrix-mc/MatrixPathConfig";
  if (n == 0) throw ConfigError(where, "N must be positive");
  if (beta != 1 && beta != 2) throw ConfigError(where, "beta must be 1 or 2");
  if (!(t_max >= 0.0) || !std::isfinite(t_max)) throw ConfigError(where, "t_max must be >= 0");
  if (n_samples == 0) throw ConfigError(where, "n_samples must be >= 1");
  for (std::size_t k = 0; k < checkpoints.size(); ++k) {
    if (checkpoints[k] < 0.0 || checkpoints[k] > t_max)
      throw ConfigError(where, "checkpoints must lie in [0, t_max]");
    if (k > 0 && checkpoints[k] < checkpoints[k - 1]) throw ConfigError(where, "checkpoints must be sorted");
  }
}

std::vector<double> MatrixPathConfig::effective_checkpoints() const {
  if (checkpoints.empty()) return {t_max};
  return checkpoints;
}

template <class Scalar>
void check_hermitian(const Matrix<Scalar>& a, const char* where) {
  if (a.rows() != a.cols()) throw InputError(where, "source matrix is not square");
  double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  double asym = (a - a.adjoint()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) throw InputError(where, "source matrix is not Hermitian");
}

template <class Scalar>
Matrix<Scalar> sample_hermitian_increment(std::size_t n, double dt, Rng& rng) {
  const double nn = static_cast<double>(n);
  const double off = std::sqrt(dt / nn);
  constexpr int beta = beta_of<Scalar>();
  const double diag = std::sqrt(2.0 * dt / (beta * nn));
  Matrix<Scalar> h(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    h(i, i) = Scalar(diag * rng.gaussian());
    for (std::size_t j = i + 1; j < n; ++j) {
      Scalar v;
      if constexpr (std::is_same_v<Scalar, double>) {
        v = off * rng.gaussian();
      } else {
        double re = rng.gaussian();
        double im = rng.gaussian();
        v = Scalar(re, im) * (off / std::sqrt(2.0));
      }
      h(i, j) = v;
      if constexpr (std::is_same_v<Scalar, double>) {
        h(j, i) = v;
      } else {
        h(j, i) = std::conj(v);
      }
    }
  }
  return h;
}

template <class Scalar>
std::vector<Matrix<Scalar>> evolve(const Matrix<Scalar>& a, const MatrixPathConfig& cfg, Rng& rng) {
  check_hermitian(a, "matrix-mc/evolve");
  if (static_cast<std::size_t>(a.rows()) != cfg.n)
    throw InputError("matrix-mc/evolve", "source size does not match N");
  std::vector<Matrix<Scalar>> out;
  Matrix<Scalar> x = a;
  double t = 0.0;
  for (double tk : cfg.effective_checkpoints()) {
    double dt = tk - t;
    if (dt > 0.0) {
      if (cfg.dynamics == Dynamics::Additive) {
        x += sample_hermitian_increment<Scalar>(cfg.n, dt, rng);
      } else {
        x *= std::exp(-0.5 * dt);
        x += sample_hermitian_increment<Scalar>(cfg.n, -std::expm1(-dt), rng);
      }
    }
    t = tk;
    out.push_back(x);
  }
  return out;
}

namespace {

template <class Scalar>
void fix_phase(Matrix<Scalar>& v) {
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    Eigen::Index r = 0;
    v.col(c).cwiseAbs().maxCoeff(&r);
    Scalar p = v(r, c);
    if constexpr (std::is_same_v<Scalar, double>) {
      if (p < 0) v.col(c) = -v.col(c);
    } else {
      v.col(c) *= std::conj(p) / std::abs(p);
    }
  }
}

template <class Scalar>
const char* eigen_failure_text(Eigen::ComputationInfo info) {
  switch (info) {
    case Eigen::NumericalIssue:
      return "numerical issue";
    case Eigen::NoConvergence:
      return "no convergence";
    default:
      return "invalid input";
  }
}

template <class Scalar>
std::string condition_report(const Matrix<Scalar>& x) {
  std::ostringstream os;
  os << "N=" << x.rows() << " max|x_ij|=" << x.cwiseAbs().maxCoeff()
     << " finite=" << (x.allFinite() ? "yes" : "no");
  return os.str();
}

}  // namespace

template <class Scalar>
Matrix<Scalar> eigenbasis(const Matrix<Scalar>& a) {
  const Eigen::Index n = a.rows();
  Matrix<Scalar> off = a;
  off.diagonal().setZero();
  if (off.cwiseAbs().maxCoeff() == 0.0 || n == 1) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index p, Eigen::Index q) {
      return std::real(a(p, p)) > std::real(a(q, q));
    });
    Matrix<Scalar> v = Matrix<Scalar>::Zero(n, n);
    for (Eigen::Index c = 0; c < n; ++c) v(order[static_cast<std::size_t>(c)], c) = Scalar(1.0);
    return v;
  }
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(a);
  if (es.info() != Eigen::Success)
    throw NumericError("matrix-mc/eigenbasis", std::string("eigendecomposition failed: ") +
                                                   eigen_failure_text<Scalar>(es.info()) + ", " +
                                                   condition_report(a));
  Matrix<Scalar> v = es.eigenvectors().rowwise().reverse();
  fix_phase(v);
  return v;
}

template <class Scalar>
OverlapRecord eigen_overlaps(const Matrix<Scalar>& x, const Matrix<Scalar>& basis, bool with_vectors) {
  OverlapRecord rec;
  const Eigen::Index n = x.rows();
  if (!with_vectors) {
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(x, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
      throw NumericError("matrix-mc/eigen_overlaps", std::string("eigendecomposition failed: ") +
                                                         eigen_failure_text<Scalar>(es.info()) + ", " +
                                                         condition_report(x));
    rec.eigenvalues = es.eigenvalues().reverse();
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(x);
    if (es.info() != Eigen::Success)
      throw NumericError("matrix-mc/eigen_overlaps", std::string("eigendecomposition failed: ") +
                                                         eigen_failure_text<Scalar>(es.info()) + ", " +
                                                         condition_report(x));
    rec.eigenvalues = es.eigenvalues().reverse();
    Matrix<Scalar> v = es.eigenvectors().rowwise().reverse();
    fix_phase(v);
    Matrix<Scalar> proj = v.adjoint() * basis;
    rec.squared_overlaps = proj.cwiseAbs2();
  }
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    if (rec.eigenvalues(i) - rec.eigenvalues(i + 1) < 1e-12) rec.degenerate.push_back(static_cast<std::size_t>(i));
  }
  return rec;
}

template <class Scalar>
MeanOverlaps mc_mean_overlaps(const Matrix<Scalar>& a, const MatrixPathConfig& cfg, std::size_t j) {
  if (j >= cfg.n) throw DomainError("matrix-mc/mc_mean_overlaps", "reference index j out of range");
  auto times = cfg.effective_checkpoints();
  const std::size_t nt = times.size();
  std::vector<Eigen::MatrixXd> per_sample(cfg.n_samples);
  for_each_sample(a, cfg, [&](std::size_t s, std::size_t k, const OverlapRecord& rec) {
    auto& m = per_sample[s];
    if (m.size() == 0) m.resize(static_cast<Eigen::Index>(cfg.n), static_cast<Eigen::Index>(nt));
    m.col(static_cast<Eigen::Index>(k)) = rec.squared_overlaps.col(static_cast<Eigen::Index>(j));
  });
  MeanOverlaps out;
  out.j = j;
  out.times = times;
  out.n_samples = cfg.n_samples;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cfg.n), static_cast<Eigen::Index>(nt));
  for (const auto& m : per_sample) sum += m;
  const double ns = static_cast<double>(cfg.n_samples);
  out.mean = sum / ns;
  Eigen::MatrixXd ss = Eigen::MatrixXd::Zero(sum.rows(), sum.cols());
  for (const auto& m : per_sample) ss += (m - out.mean).cwiseAbs2();
  if (cfg.n_samples > 1) {
    out.std_err = (ss / (ns - 1.0) / ns).cwiseSqrt();
  } else {
    out.std_err = Eigen::MatrixXd::Zero(sum.rows(), sum.cols());
  }
  return out;
}

template <class Scalar>
Matrix<Scalar> diagonal_source(const std::vector<double>& values) {
  const auto n = static_cast<Eigen::Index>(values.size());
  Matrix<Scalar> a = Matrix<Scalar>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) a(i, i) = Scalar(values[static_cast<std::size_t>(i)]);
  return a;
}

MeanOverlaps mc_mean_overlaps_diag(const std::vector<double>& diag, const MatrixPathConfig& cfg, std::size_t j) {
  if (cfg.beta == 1) return mc_mean_overlaps(diagonal_source<double>(diag), cfg, j);
  return mc_mean_overlaps(diagonal_source<Complex>(diag), cfg, j);
}

#define RML_INSTANTIATE(S)                                                                               \
  template void check_hermitian<S>(const Matrix<S>&, const char*);                                       \
  template Matrix<S> sample_hermitian_increment<S>(std::size_t, double, Rng&);                           \
  template std::vector<Matrix<S>> evolve<S>(const Matrix<S>&, const MatrixPathConfig&, Rng&);            \
  template Matrix<S> eigenbasis<S>(const Matrix<S>&);                                                    \
  template OverlapRecord eigen_overlaps<S>(const Matrix<S>&, const Matrix<S>&, bool);                    \
  template MeanOverlaps mc_mean_overlaps<S>(const Matrix<S>&, const MatrixPathConfig&, std::size_t);     \
  template Matrix<S> diagonal_source<S>(const std::vector<double>&);

RML_INSTANTIATE(double)
RML_INSTANTIATE(Complex)

#undef RML_INSTANTIATE

}  // namespace rml::mc
