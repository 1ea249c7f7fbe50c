#include "rml/rng.hpp"

namespace rml {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, Stream purpose, std::uint64_t index) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  return splitmix64(h ^ index);
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

Rng substream(std::uint64_t master, Stream purpose, std::uint64_t index) {
  return Rng(derive_seed(master, purpose, index));
}

}  // namespace rml
