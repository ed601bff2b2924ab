#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace hover {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// Every stochastic component draws from its own engine seeded through mix_seed,
// so results never depend on scheduling order.
using Rng = std::mt19937_64;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegToRad = kPi / 180.0;

/// Closed interval [min, max] used for every randomized parameter.
struct Range {
  double min = 0.0;
  double max = 0.0;

  [[nodiscard]] bool valid() const { return min <= max; }
  [[nodiscard]] bool contains(double x) const { return x >= min && x <= max; }
  [[nodiscard]] double span() const { return max - min; }
  friend bool operator==(const Range&, const Range&) = default;
};

/// Raised for configurations that violate documented ranges.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Uniform draw on [r.min, r.max]; a degenerate range returns r.min exactly.
inline double draw_uniform(Rng& rng, const Range& r) {
  if (r.min == r.max) return r.min;
  std::uniform_real_distribution<double> dist(r.min, r.max);
  return dist(rng);
}

/// SplitMix64 finalizer; combines a base seed with a stream index.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ConfigError(message);
}

}  // namespace hover
