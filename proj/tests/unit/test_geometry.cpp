#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hover/geometry.hpp"
#include "support.hpp"

using namespace hover;
using namespace hover::geometry;

namespace {

AsteroidGenConfig fixed_axes(double p, double axis) {
  AsteroidGenConfig cfg;
  cfg.perturbation = {p, p};
  cfg.half_axis = {axis, axis};
  return cfg;
}

}  // namespace

TEST(Icosphere, CountsForEveryLevel) {
  for (int level = 0; level <= kMaxSubdivisionLevel; ++level) {
    const TriMesh m = generate_icosphere(level);
    const std::size_t p = std::size_t{1} << (2 * level);
    EXPECT_EQ(m.face_count(), 20 * p) << level;
    EXPECT_EQ(m.vertex_count(), 10 * p + 2) << level;
  }
}

TEST(Icosphere, PaperLevels) {
  EXPECT_EQ(generate_icosphere(0).face_count(), 20u);
  EXPECT_EQ(generate_icosphere(0).vertex_count(), 12u);
  EXPECT_EQ(generate_icosphere(2).face_count(), 320u);
  EXPECT_EQ(generate_icosphere(2).vertex_count(), 162u);
  EXPECT_EQ(generate_icosphere(3).face_count(), 1280u);
  EXPECT_EQ(generate_icosphere(3).vertex_count(), 642u);
}

TEST(Icosphere, UnitRadiusClosedOutward) {
  for (int level = 0; level <= 4; ++level) {
    const TriMesh m = generate_icosphere(level);
    for (const auto& v : m.vertices) EXPECT_NEAR(v.norm(), 1.0, 1e-12);
    EXPECT_TRUE(m.is_closed());
    const auto V = static_cast<long>(m.vertex_count());
    const auto E = static_cast<long>(m.edge_count());
    const auto F = static_cast<long>(m.face_count());
    EXPECT_EQ(V - E + F, 2);
    for (std::size_t f = 0; f < m.face_count(); ++f) {
      const auto& t = m.faces[f];
      const Vec3 c = (m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]) / 3.0;
      EXPECT_GT(m.face_normal(f).dot(c), 0.0);
    }
  }
}

TEST(Icosphere, RejectsLevelOutsideRange) {
  EXPECT_THROW(generate_icosphere(-1), ConfigError);
  EXPECT_THROW(generate_icosphere(kMaxSubdivisionLevel + 1), ConfigError);
}

TEST(Synthesis, ZeroPerturbationGivesSphere) {
  const auto model = synthesize_asteroid(3, fixed_axes(0.0, 300.0), {});
  double worst = 0.0;
  for (const auto& v : model.mesh.vertices) worst = std::max(worst, std::abs(v.norm() - 300.0));
  EXPECT_LT(worst, 1e-9);
  EXPECT_DOUBLE_EQ(model.a, 300.0);
  EXPECT_DOUBLE_EQ(model.b, 300.0);
  EXPECT_DOUBLE_EQ(model.c, 300.0);
  EXPECT_DOUBLE_EQ(model.sigma, 0.0);
}

TEST(Synthesis, SameSeedIsBitIdentical) {
  const AsteroidGenConfig cfg;
  const auto a = synthesize_asteroid(42, cfg, {});
  const auto b = synthesize_asteroid(42, cfg, {});
  ASSERT_EQ(a.mesh.vertex_count(), b.mesh.vertex_count());
  for (std::size_t i = 0; i < a.mesh.vertex_count(); ++i) {
    EXPECT_EQ(a.mesh.vertices[i], b.mesh.vertices[i]);
  }
  EXPECT_EQ(a.mesh.faces, b.mesh.faces);
  EXPECT_EQ(a.mass, b.mass);
  EXPECT_EQ(a.spin_rate, b.spin_rate);
  EXPECT_EQ(a.nutation, b.nutation);
  EXPECT_EQ(a.srp_accel, b.srp_accel);
  EXPECT_EQ(a.perturbation, b.perturbation);
}

TEST(Synthesis, DifferentSeedsDiffer) {
  const auto a = synthesize_asteroid(1, {}, {});
  const auto b = synthesize_asteroid(2, {}, {});
  EXPECT_NE(a.mesh.vertices[0], b.mesh.vertices[0]);
}

TEST(Synthesis, PerturbationBound) {
  const double bound = 600.0 * (1.0 + 0.05 * std::sqrt(3.0));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto model = synthesize_asteroid(seed, fixed_axes(0.05, 600.0), {});
    for (const auto& v : model.mesh.vertices) EXPECT_LE(v.norm(), bound + 1e-9);
  }
}

TEST(Synthesis, PerOctantScaling) {
  AsteroidGenConfig cfg;
  cfg.perturbation = {0.0, 0.0};
  const TriMesh unit = generate_icosphere(cfg.subdivision_level);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto model = synthesize_asteroid(seed, cfg, {});
    const auto& h = model.half_axes;
    for (std::size_t i = 0; i < unit.vertex_count(); ++i) {
      const Vec3& u = unit.vertices[i];
      const Vec3 expect(u.x() * (u.x() >= 0 ? h.a_pos : h.a_neg),
                        u.y() * (u.y() >= 0 ? h.b_pos : h.b_neg),
                        u.z() * (u.z() >= 0 ? h.c_pos : h.c_neg));
      EXPECT_LT((model.mesh.vertices[i] - expect).norm(), 1e-9);
    }
    EXPECT_DOUBLE_EQ(model.a, 0.5 * (h.a_pos + h.a_neg));
    EXPECT_DOUBLE_EQ(model.b, 0.5 * (h.b_pos + h.b_neg));
  }
}

TEST(Synthesis, ParametersInsideRanges) {
  const AsteroidGenConfig cfg;
  const AsteroidDynamicsRanges r;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto m = synthesize_asteroid(seed, cfg, r);
    EXPECT_TRUE(cfg.perturbation.contains(m.perturbation));
    for (double axis : {m.half_axes.a_pos, m.half_axes.a_neg, m.half_axes.b_pos, m.half_axes.b_neg,
                        m.half_axes.c_pos, m.half_axes.c_neg}) {
      EXPECT_TRUE(cfg.half_axis.contains(axis));
    }
    EXPECT_TRUE(r.mass.contains(m.mass));
    EXPECT_TRUE(r.spin_rate.contains(m.spin_rate));
    EXPECT_TRUE(r.nutation.contains(m.nutation));
    for (int k = 0; k < 3; ++k) EXPECT_LE(std::abs(m.srp_accel[k]), 100e-6);
    const auto rp = ellipsoid_rotation_params(m.a, m.b, m.c);
    EXPECT_DOUBLE_EQ(m.inertia_ratio, rp.inertia_ratio);
    EXPECT_DOUBLE_EQ(m.sigma, rp.sigma);
    EXPECT_TRUE(m.mesh.is_closed());
  }
}

TEST(Synthesis, SynthesizedFacesPointOutward) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = synthesize_asteroid(seed, {}, {});
    const Vec3 center = m.mesh.centroid();
    for (std::size_t f = 0; f < m.mesh.face_count(); ++f) {
      const auto& t = m.mesh.faces[f];
      const Vec3 c = (m.mesh.vertices[t[0]] + m.mesh.vertices[t[1]] + m.mesh.vertices[t[2]]) / 3.0;
      EXPECT_GT(m.mesh.face_normal(f).dot(c - center), 0.0);
    }
  }
}

TEST(Synthesis, InvalidRangesRejected) {
  AsteroidGenConfig cfg;
  cfg.half_axis = {600.0, 300.0};
  EXPECT_THROW(synthesize_asteroid(1, cfg, {}), ConfigError);
  AsteroidDynamicsRanges r;
  r.mass = {-1.0, 1.0};
  EXPECT_THROW(synthesize_asteroid(1, {}, r), ConfigError);
}

TEST(RotationParams, Sphere) {
  const auto r = ellipsoid_rotation_params(350.0, 350.0, 350.0);
  EXPECT_DOUBLE_EQ(r.inertia_ratio, 1.0);
  EXPECT_DOUBLE_EQ(r.sigma, 0.0);
}

TEST(RotationParams, OblateCase) {
  const auto r = ellipsoid_rotation_params(400.0, 400.0, 300.0);
  EXPECT_NEAR(r.inertia_ratio, 0.78125, 1e-15);
  EXPECT_NEAR(r.sigma, 0.28, 1e-14);
}

TEST(RotationParams, ProlateCase) {
  const auto r = ellipsoid_rotation_params(600.0, 300.0, 300.0);
  EXPECT_NEAR(r.inertia_ratio, 0.4, 1e-15);
  EXPECT_NEAR(r.sigma, 1.5, 1e-14);
}

TEST(RotationParams, NonpositiveAxis) {
  EXPECT_THROW(ellipsoid_rotation_params(0.0, 1.0, 1.0), std::domain_error);
  EXPECT_THROW(ellipsoid_rotation_params(1.0, -1.0, 1.0), std::domain_error);
}

namespace {
const char* kTetra =
    "# tetrahedron\n"
    "v 0 0 0\n"
    "v 1 0 0\n"
    "v 0 1 0\n"
    "v 0 0 1\n"
    "vn 0 0 1\n"
    "f 1 3 2\n"
    "f 1 2 4\n"
    "f 1 4 3\n"
    "f 2/5 3/6 4/7\n";
}

TEST(MeshIO, Tetrahedron) {
  std::istringstream in(kTetra);
  const TriMesh m = read_mesh(in);
  EXPECT_EQ(m.vertex_count(), 4u);
  EXPECT_EQ(m.face_count(), 4u);
  EXPECT_TRUE(m.is_closed());
  EXPECT_EQ(m.faces[0], (std::array<std::uint32_t, 3>{0, 2, 1}));
}

TEST(MeshIO, ScaleIsExact) {
  std::istringstream a(kTetra), b(kTetra);
  const TriMesh one = read_mesh(a, 1.0);
  const TriMesh three = read_mesh(b, 3.0);
  for (std::size_t i = 0; i < one.vertex_count(); ++i) {
    EXPECT_EQ(three.vertices[i], one.vertices[i] * 3.0);
  }
}

TEST(MeshIO, IndexOutOfRange) {
  std::ostringstream s;
  for (int i = 0; i < 10; ++i) s << "v " << i << " 0 0\n";
  s << "f 1 2 999\n";
  std::istringstream in(s.str());
  try {
    read_mesh(in);
    FAIL() << "expected a load error";
  } catch (const MeshLoadError& e) {
    EXPECT_EQ(e.line(), 11u);
    EXPECT_NE(std::string(e.what()).find("line 11"), std::string::npos);
  }
}

TEST(MeshIO, RejectsQuadAndGarbage) {
  std::istringstream quad("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
  EXPECT_THROW(read_mesh(quad), MeshLoadError);
  std::istringstream bad("v 0 0 zero\n");
  EXPECT_THROW(read_mesh(bad), MeshLoadError);
  std::istringstream zero("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n");
  EXPECT_THROW(read_mesh(zero), MeshLoadError);
}

TEST(MeshIO, MissingFile) {
  EXPECT_THROW(load_mesh_file("/nonexistent/shape.obj"), std::runtime_error);
}

TEST(MeshIO, WriteReadRoundTrip) {
  const auto model = synthesize_asteroid(5, {}, {});
  std::stringstream s;
  write_mesh(s, model.mesh);
  const TriMesh back = read_mesh(s);
  ASSERT_EQ(back.vertex_count(), model.mesh.vertex_count());
  for (std::size_t i = 0; i < back.vertex_count(); ++i) {
    EXPECT_EQ(back.vertices[i], model.mesh.vertices[i]);
  }
  EXPECT_EQ(back.faces, model.mesh.faces);
}

TEST(Peanut, ClosedAndOutward) {
  const TriMesh m = generate_peanut();
  EXPECT_TRUE(m.is_closed());
  int inward = 0;
  for (std::size_t f = 0; f < m.face_count(); ++f) {
    const auto& t = m.faces[f];
    const Vec3 c = (m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]) / 3.0;
    // The waist is concave, so test against the local axis point instead.
    const Vec3 axis_point(c.x(), 0.0, 0.0);
    if (m.face_normal(f).dot(c - axis_point) <= 0.0) ++inward;
  }
  EXPECT_EQ(inward, 0);
}

TEST(AsteroidFromMesh, AxesFromExtents) {
  TriMesh m = generate_icosphere(3);
  for (auto& v : m.vertices) v = Vec3(500.0 * v.x(), 400.0 * v.y(), 300.0 * v.z());
  const auto model = asteroid_from_mesh(m, 9, {});
  EXPECT_NEAR(model.a, 500.0, 1e-9);
  EXPECT_NEAR(model.b, 400.0, 1e-9);
  EXPECT_NEAR(model.c, 300.0, 1e-9);
  const auto again = asteroid_from_mesh(m, 9, {});
  EXPECT_EQ(model.mass, again.mass);
}
