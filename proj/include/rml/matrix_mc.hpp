#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <type_traits>
#include <vector>

#include "rml/error.hpp"
#include "rml/parallel.hpp"
#include "rml/rng.hpp"

namespace rml::mc {

enum class Dynamics { Additive, OrnsteinUhlenbeck };

struct MatrixPathConfig {
  std::size_t n = 0;
  int beta = 1;
  double t_max = 0.0;
  std::vector<double> checkpoints;  // empty means {t_max}
  Dynamics dynamics = Dynamics::Additive;
  std::uint64_t seed = 0;
  std::size_t n_samples = 1;

  void validate() const;
  std::vector<double> effective_checkpoints() const;
};

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Complex = std::complex<double>;

// beta is encoded in the scalar: double -> beta=1, complex<double> -> beta=2.
template <class Scalar>
constexpr int beta_of() {
  return std::is_same_v<Scalar, double> ? 1 : 2;
}

// Off-diagonal variance dt/N (real+imaginary for beta=2), diagonal 2dt/(beta N).
template <class Scalar>
Matrix<Scalar> sample_hermitian_increment(std::size_t n, double dt, Rng& rng);

// Matrices at each checkpoint. Additive increments are sampled directly per
// checkpoint gap; OU uses the exact transition so no step bias enters.
template <class Scalar>
std::vector<Matrix<Scalar>> evolve(const Matrix<Scalar>& a, const MatrixPathConfig& cfg, Rng& rng);

struct OverlapRecord {
  double time = 0.0;
  std::size_t sample_index = 0;
  Eigen::VectorXd eigenvalues;       // non-increasing
  Eigen::MatrixXd squared_overlaps;  // (i,j) = |<psi_i^t|psi_j^0>|^2; empty if not requested
  std::vector<std::size_t> degenerate;  // i such that lambda_i - lambda_{i+1} < 1e-12
};

// Orthonormal eigenbasis of a Hermitian matrix, columns ordered by
// non-increasing eigenvalue, phase fixed (largest component real positive).
template <class Scalar>
Matrix<Scalar> eigenbasis(const Matrix<Scalar>& a);

template <class Scalar>
OverlapRecord eigen_overlaps(const Matrix<Scalar>& x, const Matrix<Scalar>& basis, bool with_vectors = true);

template <class Scalar>
void check_hermitian(const Matrix<Scalar>& a, const char* where);

// Runs cfg.n_samples independent paths; on_record(sample, checkpoint, record)
// is called from worker threads, so it must only touch per-sample state.
// vectors_wanted[k] == 0 skips the eigenvector work at checkpoint k.
template <class Scalar, class Fn>
void for_each_sample(const Matrix<Scalar>& a, const MatrixPathConfig& cfg, Fn&& on_record,
                     const std::vector<char>& vectors_wanted = {}) {
  cfg.validate();
  if (cfg.beta != beta_of<Scalar>())
    throw ConfigError("matrix-mc/for_each_sample", "beta does not match the matrix scalar type");
  check_hermitian(a, "matrix-mc/for_each_sample");
  Matrix<Scalar> basis = eigenbasis(a);
  auto times = cfg.effective_checkpoints();
  parallel_for(cfg.n_samples, [&](std::size_t s) {
    Rng rng = substream(cfg.seed, Stream::MatrixNoise, s);
    auto path = evolve(a, cfg, rng);
    for (std::size_t k = 0; k < path.size(); ++k) {
      bool vec = vectors_wanted.empty() || vectors_wanted[k];
      OverlapRecord rec = eigen_overlaps(path[k], basis, vec);
      rec.time = times[k];
      rec.sample_index = s;
      on_record(s, k, rec);
    }
  });
}

struct MeanOverlaps {
  std::size_t j = 0;  // 0-based reference index
  std::vector<double> times;
  Eigen::MatrixXd mean;     // N x T
  Eigen::MatrixXd std_err;  // N x T
  std::size_t n_samples = 0;
};

template <class Scalar>
MeanOverlaps mc_mean_overlaps(const Matrix<Scalar>& a, const MatrixPathConfig& cfg, std::size_t j);

// Dispatches on cfg.beta for a real diagonal source.
MeanOverlaps mc_mean_overlaps_diag(const std::vector<double>& diag, const MatrixPathConfig& cfg, std::size_t j);

template <class Scalar>
Matrix<Scalar> diagonal_source(const std::vector<double>& values);

}  // namespace rml::mc
