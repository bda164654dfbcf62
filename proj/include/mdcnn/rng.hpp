#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "mdcnn/tensor.hpp"

namespace mdcnn {

/// Deterministic pseudo-random generator with a fixed, documented recurrence
/// (SplitMix64). Never the platform default: the same seed produces the same
/// stream on every platform and in every run.
///
/// Recurrence, per 64-bit draw:
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   output = z ^ (z >> 31)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Draw in [0, bound) by the multiply-high reduction
  /// floor(next_u64() * bound / 2^64).
  std::uint64_t next_index(std::uint64_t bound) {
    const auto wide = static_cast<unsigned __int128>(next_u64()) *
                      static_cast<unsigned __int128>(bound);
    return static_cast<std::uint64_t>(wide >> 64);
  }

  /// Uniform in [0, 1) with 53 bits of precision: (next_u64() >> 11) * 2^-53.
  double next_real() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t state_ = 0;
};

/// In-place Fisher-Yates shuffle in the documented order:
///   for i = n-1 down to 1: j = next_index(i + 1); swap(items[i], items[j]).
template <typename Item>
void rng_shuffle(Rng& rng, std::vector<Item>& items) {
  for (std::size_t i = items.size(); i-- > 1;) {
    const auto j = static_cast<std::size_t>(rng.next_index(i + 1));
    using std::swap;
    swap(items[i], items[j]);
  }
}

/// He-uniform initialization: samples in [-b, b] with b = sqrt(6 / fan_in),
/// drawn in row-major order. Chosen to match ReLU hidden activations.
template <typename T = float>
TensorT<T> rng_init_weights(Rng& rng, std::vector<int> shape, std::int64_t fan_in) {
  if (fan_in < 1) {
    throw std::invalid_argument("fan_in must be at least 1");
  }
  TensorT<T> out(std::move(shape), T(0));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (T& v : out.values()) {
    v = static_cast<T>((2.0 * rng.next_real() - 1.0) * bound);
  }
  return out;
}

}  // namespace mdcnn
