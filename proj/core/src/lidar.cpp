#include "hover/lidar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hover::lidar {

namespace {

constexpr double kDeterminantEpsilon = 1e-12;
constexpr double kMinDoubleArea = 2e-12;  // |e1 x e2| for area 1e-12 m^2
constexpr double kMinNoisyRange = 1e-6;

// Moller-Trumbore with back-face culling: det = -dir . (e1 x e2), so a
// positive determinant means the ray enters the outward side.
inline std::optional<double> intersect(const Vec3& origin, const Vec3& dir, const Vec3& v0,
                                       const Vec3& e1, const Vec3& e2) {
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (det <= kDeterminantEpsilon) return std::nullopt;
  const double inv_det = 1.0 / det;
  const Vec3 tvec = origin - v0;
  const double u = tvec.dot(pvec) * inv_det;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv_det;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(qvec) * inv_det;
  if (t <= 0.0) return std::nullopt;
  return t;
}

}  // namespace

void SensorConfig::validate() const {
  require(field_of_view > 0.0 && field_of_view < kPi, "sensor field_of_view must be in (0, pi)");
  require(max_range > 0.0, "sensor max_range must be positive");
  require(noise_bias.valid(), "sensor noise_bias range must satisfy min <= max");
  require(noise_sigma >= 0.0, "sensor noise_sigma must be nonnegative");
}

std::optional<double> ray_triangle_intersect(const Vec3& origin, const Vec3& dir, const Vec3& v0,
                                             const Vec3& v1, const Vec3& v2) {
  const Vec3 e1 = v1 - v0;
  const Vec3 e2 = v2 - v0;
  if (e1.cross(e2).norm() < kMinDoubleArea) return std::nullopt;
  return intersect(origin, dir, v0, e1, e2);
}

double cast_ray(const geometry::TriMesh& mesh, const Vec3& origin, const Vec3& dir,
                double max_range) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& f : mesh.faces) {
    const auto t = ray_triangle_intersect(origin, dir, mesh.vertices[f[0]], mesh.vertices[f[1]],
                                          mesh.vertices[f[2]]);
    if (t && *t < best) best = *t;
  }
  return best <= max_range ? best : max_range;
}

MeshIntersector::MeshIntersector(const geometry::TriMesh& mesh) {
  v0_.reserve(mesh.faces.size());
  v1_.reserve(mesh.faces.size());
  v2_.reserve(mesh.faces.size());
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3 e1 = mesh.vertices[f[1]] - a;
    const Vec3 e2 = mesh.vertices[f[2]] - a;
    if (e1.cross(e2).norm() < kMinDoubleArea) continue;
    v0_.push_back(a);
    v1_.push_back(e1);
    v2_.push_back(e2);
  }
  if (!mesh.vertices.empty()) {
    Vec3 lo = mesh.vertices.front();
    Vec3 hi = lo;
    for (const auto& v : mesh.vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    center_ = 0.5 * (lo + hi);
    for (const auto& v : mesh.vertices) radius_ = std::max(radius_, (v - center_).norm());
    radius_ *= 1.0 + 1e-9;
  }
}

double MeshIntersector::cast(const Vec3& origin, const Vec3& dir, double max_range) const {
  // Bounding-sphere rejection: skip when the ray line misses the sphere or the
  // sphere lies entirely behind the origin.
  const Vec3 oc = center_ - origin;
  const double along = oc.dot(dir);
  const double dist2 = oc.squaredNorm() - along * along;
  const double r2 = radius_ * radius_;
  if (dist2 > r2) return max_range;
  if (along < 0.0 && oc.squaredNorm() > r2) return max_range;

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < v0_.size(); ++k) {
    const auto t = intersect(origin, dir, v0_[k], v1_[k], v2_[k]);
    if (t && *t < best) best = *t;
  }
  return best <= max_range ? best : max_range;
}

Vec3 beam_direction(int row, int col, const SensorConfig& cfg) {
  const double step = cfg.field_of_view / kGridSize;
  const double ax = -0.5 * cfg.field_of_view + (col + 0.5) * step;
  const double ay = -0.5 * cfg.field_of_view + (row + 0.5) * step;
  return Vec3(std::tan(ax), std::tan(ay), -1.0).normalized();
}

LidarFrame scan(const MeshIntersector& target, const Vec3& platform_position,
                const Quat& platform_attitude, const SensorConfig& cfg) {
  const Mat3 rot = platform_attitude.normalized().toRotationMatrix();
  LidarFrame frame;
  for (int i = 0; i < kGridSize; ++i) {
    for (int j = 0; j < kGridSize; ++j) {
      const Vec3 dir = rot * beam_direction(i, j, cfg);
      const double range = target.cast(platform_position, dir, cfg.max_range);
      frame.ranges(i, j) = range;
      frame.hit(i, j) = range < cfg.max_range;
    }
  }
  return frame;
}

LidarFrame scan(const geometry::TriMesh& mesh, const Vec3& platform_position,
                const Quat& platform_attitude, const SensorConfig& cfg) {
  return scan(MeshIntersector(mesh), platform_position, platform_attitude, cfg);
}

LidarFrame apply_sensor_noise(const LidarFrame& frame, double bias, double sigma, Rng& rng,
                              double max_range) {
  LidarFrame out = frame;
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int i = 0; i < kGridSize; ++i) {
    for (int j = 0; j < kGridSize; ++j) {
      if (!frame.hit(i, j)) continue;
      double r = frame.ranges(i, j) + bias;
      if (sigma > 0.0) r += sigma * noise(rng);
      r = std::clamp(r, kMinNoisyRange, max_range);
      out.ranges(i, j) = r;
      out.hit(i, j) = r < max_range;
    }
  }
  return out;
}

}  // namespace hover::lidar
