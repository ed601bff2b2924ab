#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "hover/common.hpp"
#include "hover/geometry.hpp"

namespace hover::lidar {

inline constexpr double kMaxRange = 2000.0;  // m, returned on a miss
inline constexpr int kGridSize = 8;

using RangeMatrix = Eigen::Matrix<double, kGridSize, kGridSize>;
using HitMask = Eigen::Matrix<bool, kGridSize, kGridSize>;

/// One flash-LIDAR exposure. Row index follows the sensor y axis, column index
/// the sensor x axis.
struct LidarFrame {
  RangeMatrix ranges = RangeMatrix::Constant(kMaxRange);
  HitMask hit = HitMask::Constant(false);

  [[nodiscard]] bool all_miss() const { return !hit.any(); }
  [[nodiscard]] int hit_count() const { return static_cast<int>(hit.count()); }
  friend bool operator==(const LidarFrame& a, const LidarFrame& b) {
    return a.ranges == b.ranges && a.hit == b.hit;
  }
};

struct SensorConfig {
  double field_of_view = 30.0 * kDegToRad;  // full angle per axis
  double max_range = kMaxRange;
  Range noise_bias{0.0, 0.0};  // drawn once per episode
  double noise_sigma = 0.0;    // per-sample Gaussian std, m

  void validate() const;
};

/// Front-face Moller-Trumbore. Returns the ray parameter t > 0 when `dir`
/// enters the triangle from its outward side; back faces, parallel rays and
/// degenerate triangles (area < 1e-12 m^2) yield nullopt.
std::optional<double> ray_triangle_intersect(const Vec3& origin, const Vec3& dir, const Vec3& v0,
                                             const Vec3& v1, const Vec3& v2);

/// Nearest front-face hit over all triangles, or max_range when nothing is hit
/// within max_range.
double cast_ray(const geometry::TriMesh& mesh, const Vec3& origin, const Vec3& dir,
                double max_range = kMaxRange);

/// Mesh with per-triangle edge data cached and a bounding-sphere early out.
/// Produces exactly the same ranges as cast_ray over the source mesh.
class MeshIntersector {
 public:
  explicit MeshIntersector(const geometry::TriMesh& mesh);

  [[nodiscard]] double cast(const Vec3& origin, const Vec3& dir, double max_range = kMaxRange) const;
  [[nodiscard]] std::size_t face_count() const { return v0_.size(); }

 private:
  std::vector<Vec3> v0_, v1_, v2_;
  Vec3 center_ = Vec3::Zero();
  double radius_ = 0.0;
};

/// Unit beam direction (i, j) in the sensor frame. Boresight is -Z; beams sit
/// at the centers of a grid of equal angular offsets across the FOV.
Vec3 beam_direction(int row, int col, const SensorConfig& cfg);

/// Scan from a platform whose attitude maps sensor-frame vectors into the
/// asteroid frame. Callers pass the attitude frozen at hover initiation.
LidarFrame scan(const MeshIntersector& target, const Vec3& platform_position,
                const Quat& platform_attitude, const SensorConfig& cfg);
LidarFrame scan(const geometry::TriMesh& mesh, const Vec3& platform_position,
                const Quat& platform_attitude, const SensorConfig& cfg);

/// Adds bias + N(0, sigma^2) to hit entries and clamps to (0, max_range].
/// Entries pushed to max_range are reported as misses.
LidarFrame apply_sensor_noise(const LidarFrame& frame, double bias, double sigma, Rng& rng,
                              double max_range = kMaxRange);

}  // namespace hover::lidar
