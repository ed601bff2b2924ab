#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "hover/common.hpp"

namespace hover::geometry {

/// Triangle mesh in meters. Faces are wound counter-clockwise when viewed
/// from outside, so (v1 - v0) x (v2 - v0) is the outward normal.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;

  [[nodiscard]] std::size_t vertex_count() const { return vertices.size(); }
  [[nodiscard]] std::size_t face_count() const { return faces.size(); }
  [[nodiscard]] Vec3 face_normal(std::size_t f) const;
  [[nodiscard]] Vec3 centroid() const;
  [[nodiscard]] double bounding_radius() const;

  /// Every edge shared by exactly two faces with opposite orientation.
  [[nodiscard]] bool is_closed() const;
  [[nodiscard]] std::size_t edge_count() const;
};

inline constexpr int kMaxSubdivisionLevel = 5;

/// Unit icosphere: icosahedron with `level` rounds of 4-way face splitting,
/// new vertices projected back onto the unit sphere.
TriMesh generate_icosphere(int level);

/// Six independently drawn half-axes; +x uses a_pos, -x uses a_neg, etc.
struct HalfAxes {
  double a_pos = 1.0, a_neg = 1.0;
  double b_pos = 1.0, b_neg = 1.0;
  double c_pos = 1.0, c_neg = 1.0;
};

struct AsteroidGenConfig {
  int subdivision_level = 2;
  Range perturbation{0.005, 0.05};  // p, applied on the unit sphere
  Range half_axis{300.0, 600.0};    // m
  // Draw one half-axis and use it for all six (spherical bodies).
  bool uniform_axes = false;

  void validate() const;
};

struct AsteroidDynamicsRanges {
  Range mass{1.0e10, 1.5e12};                      // kg
  Range spin_rate{1.0e-6, 5.0e-4};                 // rad/s
  Range nutation{45.0 * kDegToRad, 90.0 * kDegToRad};  // rad
  Range srp_accel{-100.0e-6, 100.0e-6};            // m/s^2, per component

  void validate() const;
};

inline constexpr double kGravitationalConstant = 6.674e-11;  // m^3/(kg s^2)

struct AsteroidModel {
  TriMesh mesh;
  HalfAxes half_axes;
  double perturbation = 0.0;
  double mass = 0.0;        // kg
  double spin_rate = 0.0;   // omega_0, rad/s
  double nutation = 0.0;    // theta, rad
  double phase = 0.0;       // phi, rad
  double a = 1.0, b = 1.0, c = 1.0;  // effective ellipsoid axes, m
  double inertia_ratio = 1.0;        // J_xy / J_z
  double sigma = 0.0;                // (J_z - J_x) / J_x
  Vec3 srp_accel = Vec3::Zero();     // m/s^2

  [[nodiscard]] double gm() const { return kGravitationalConstant * mass; }
  /// Precession rate omega_n = sigma * omega_0 * cos(theta).
  [[nodiscard]] double precession_rate() const;
};

/// Perturbed, per-octant scaled icosphere plus dynamics parameters, all drawn
/// from one engine seeded with `seed`.
AsteroidModel synthesize_asteroid(std::uint64_t seed, const AsteroidGenConfig& cfg,
                                  const AsteroidDynamicsRanges& ranges);

/// Attach dynamics parameters to an externally supplied mesh. Effective axes
/// come from the mesh's axis-aligned extents.
AsteroidModel asteroid_from_mesh(TriMesh mesh, std::uint64_t seed,
                                 const AsteroidDynamicsRanges& ranges);

struct RotationParams {
  double inertia_ratio;  // J_xy / J_z = (b^2 + c^2) / (a^2 + b^2)
  double sigma;          // 1 / ratio - 1
};

/// Throws std::domain_error on a nonpositive axis.
RotationParams ellipsoid_rotation_params(double a, double b, double c);

class MeshLoadError : public std::runtime_error {
 public:
  MeshLoadError(const std::string& what, std::size_t line);
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Plain-text `v x y z` / `f i j k` mesh (1-based indices, `#` comments,
/// unknown records ignored). `scale` multiplies every coordinate.
TriMesh read_mesh(std::istream& in, double scale = 1.0);
TriMesh load_mesh_file(const std::filesystem::path& path, double scale = 1.0);

void write_mesh(std::ostream& out, const TriMesh& mesh);
void save_mesh_file(const std::filesystem::path& path, const TriMesh& mesh);

/// Closed two-lobed body used as a stand-in for contact-binary shape models.
/// Dimensions roughly follow a 535 x 294 x 209 m peanut.
TriMesh generate_peanut(int level = 3, double length = 535.0, double width = 294.0,
                        double height = 209.0, double waist = 0.35);

}  // namespace hover::geometry
