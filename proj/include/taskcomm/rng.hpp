#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include <Eigen/Core>

namespace taskcomm {

// Stateless counter-based generator. Every variate is a pure function of
// (seed, stream, index), so a fill is reproducible regardless of evaluation
// order, chunking, or thread scheduling.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(mix(seed + kSeedSalt) ^ mix(stream + kStreamSalt))) {}

  // Uniform on (0, 1); never returns 0 or 1 exactly.
  double uniform(std::uint64_t index) const {
    const std::uint64_t bits = mix(key_ ^ mix(index + kIndexSalt));
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal, one variate per index (Box-Muller, cosine branch).
  double normal(std::uint64_t index) const {
    const double u1 = uniform(2 * index);
    const double u2 = uniform(2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols,
                                std::uint64_t offset = 0) const {
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        out(r, c) = normal(offset + static_cast<std::uint64_t>(r) *
                                        static_cast<std::uint64_t>(cols) +
                           static_cast<std::uint64_t>(c));
      }
    }
    return out;
  }

  Eigen::VectorXd normal_vector(Eigen::Index size,
                                std::uint64_t offset = 0) const {
    Eigen::VectorXd out(size);
    for (Eigen::Index i = 0; i < size; ++i) {
      out(i) = normal(offset + static_cast<std::uint64_t>(i));
    }
    return out;
  }

 private:
  static constexpr std::uint64_t kSeedSalt = 0x243f6a8885a308d3ull;
  static constexpr std::uint64_t kStreamSalt = 0x13198a2e03707344ull;
  static constexpr std::uint64_t kIndexSalt = 0xa4093822299f31d0ull;

  // splitmix64 finalizer
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
};

}  // namespace taskcomm
