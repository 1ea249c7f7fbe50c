#pragma once

#include <cstdint>
#include <random>

namespace rml {

// Purposes used to split the master seed. Values are part of the
// reproducibility contract; do not renumber.
enum class Stream : std::uint64_t {
  MatrixNoise = 1,
  DysonNoise = 2,
  Mesoscopic = 3,
  Clt = 4,
  Experiment = 5,
};

std::uint64_t splitmix64(std::uint64_t x);

// Counter-based derivation: the same (master, purpose, index) always yields
// the same seed, independent of which worker asks for it.
std::uint64_t derive_seed(std::uint64_t master, Stream purpose, std::uint64_t index);

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  double gaussian() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

Rng substream(std::uint64_t master, Stream purpose, std::uint64_t index);

}  // namespace rml
