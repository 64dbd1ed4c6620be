#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace ersft {

/// Seeded random stream. Streams are derived from a master seed and a
/// purpose label so that stages never share draws.
class Rng {
 public:
  explicit Rng(std::uint64_t state) : engine_(state) {}

  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double normal(double mean = 0.0, double stddev = 1.0);
  std::size_t index(std::size_t n);  // uniform in [0, n)

  /// Inverse-CDF draw from an (unnormalized, nonnegative) weight vector.
  std::size_t categorical(std::span<const double> weights);

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Derives an independent stream from (seed, label, index).
Rng make_stream(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);

/// Child seed for handing a stage its own master seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);

}  // namespace ersft
