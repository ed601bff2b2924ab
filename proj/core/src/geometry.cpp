#include "hover/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <utility>

namespace hover::geometry {

Vec3 TriMesh::face_normal(std::size_t f) const {
  const auto& idx = faces[f];
  const Vec3& v0 = vertices[idx[0]];
  return (vertices[idx[1]] - v0).cross(vertices[idx[2]] - v0);
}

Vec3 TriMesh::centroid() const {
  Vec3 sum = Vec3::Zero();
  for (const auto& v : vertices) sum += v;
  return vertices.empty() ? sum : Vec3(sum / static_cast<double>(vertices.size()));
}

double TriMesh::bounding_radius() const {
  double r = 0.0;
  for (const auto& v : vertices) r = std::max(r, v.norm());
  return r;
}

namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

}  // namespace

bool TriMesh::is_closed() const {
  // Directed edge counts: a closed, consistently wound mesh has each directed
  // edge exactly once and its reverse exactly once.
  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(faces.size() * 3);
  for (const auto& f : faces) {
    for (int k = 0; k < 3; ++k) {
      const auto a = f[k];
      const auto b = f[(k + 1) % 3];
      if (a == b) return false;
      if (++directed[edge_key(a, b)] > 1) return false;
    }
  }
  for (const auto& [key, count] : directed) {
    const auto a = static_cast<std::uint32_t>(key >> 32);
    const auto b = static_cast<std::uint32_t>(key & 0xFFFFFFFFu);
    if (directed.find(edge_key(b, a)) == directed.end()) return false;
  }
  return true;
}

std::size_t TriMesh::edge_count() const {
  std::unordered_map<std::uint64_t, int> undirected;
  for (const auto& f : faces) {
    for (int k = 0; k < 3; ++k) {
      const auto a = f[k];
      const auto b = f[(k + 1) % 3];
      undirected[edge_key(std::min(a, b), std::max(a, b))]++;
    }
  }
  return undirected.size();
}

TriMesh generate_icosphere(int level) {
  if (level < 0 || level > kMaxSubdivisionLevel) {
    throw ConfigError("icosphere level must be in [0, " +
                      std::to_string(kMaxSubdivisionLevel) + "], got " +
                      std::to_string(level));
  }
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh mesh;
  mesh.vertices = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                   {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                   {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : mesh.vertices) v.normalize();
  mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int round = 0; round < level; ++round) {
    std::unordered_map<std::uint64_t, std::uint32_t> midpoint_cache;
    midpoint_cache.reserve(mesh.faces.size() * 2);
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = edge_key(std::min(a, b), std::max(a, b));
      if (auto it = midpoint_cache.find(key); it != midpoint_cache.end()) return it->second;
      const auto index = static_cast<std::uint32_t>(mesh.vertices.size());
      mesh.vertices.push_back((mesh.vertices[a] + mesh.vertices[b]).normalized());
      midpoint_cache.emplace(key, index);
      return index;
    };
    std::vector<std::array<std::uint32_t, 3>> next;
    next.reserve(mesh.faces.size() * 4);
    for (const auto& [a, b, c] : mesh.faces) {
      const auto ab = midpoint(a, b);
      const auto bc = midpoint(b, c);
      const auto ca = midpoint(c, a);
      next.push_back({a, ab, ca});
      next.push_back({b, bc, ab});
      next.push_back({c, ca, bc});
      next.push_back({ab, bc, ca});
    }
    mesh.faces = std::move(next);
  }
  return mesh;
}

void AsteroidGenConfig::validate() const {
  require(subdivision_level >= 0 && subdivision_level <= kMaxSubdivisionLevel,
          "asteroid subdivision_level must be in [0, 5]");
  require(perturbation.valid() && perturbation.min >= 0.0,
          "asteroid perturbation range must satisfy 0 <= min <= max");
  require(half_axis.valid() && half_axis.min > 0.0,
          "asteroid half_axis range must satisfy 0 < min <= max");
}

void AsteroidDynamicsRanges::validate() const {
  require(mass.valid() && mass.min >= 0.0, "asteroid mass range must satisfy 0 <= min <= max");
  require(spin_rate.valid() && spin_rate.min >= 0.0,
          "asteroid spin_rate range must satisfy 0 <= min <= max");
  require(nutation.valid(), "asteroid nutation range must satisfy min <= max");
  require(srp_accel.valid(), "asteroid srp_accel range must satisfy min <= max");
}

double AsteroidModel::precession_rate() const {
  return sigma * spin_rate * std::cos(nutation);
}

RotationParams ellipsoid_rotation_params(double a, double b, double c) {
  if (!(a > 0.0) || !(b > 0.0) || !(c > 0.0)) {
    throw std::domain_error("ellipsoid axes must be positive");
  }
  const double ratio = (b * b + c * c) / (a * a + b * b);
  return {ratio, 1.0 / ratio - 1.0};
}

namespace {

void draw_dynamics(Rng& rng, const AsteroidDynamicsRanges& ranges, AsteroidModel& model) {
  model.mass = draw_uniform(rng, ranges.mass);
  model.spin_rate = draw_uniform(rng, ranges.spin_rate);
  model.nutation = draw_uniform(rng, ranges.nutation);
  for (int k = 0; k < 3; ++k) model.srp_accel[k] = draw_uniform(rng, ranges.srp_accel);
}

void set_axes(AsteroidModel& model, double a, double b, double c) {
  model.a = a;
  model.b = b;
  model.c = c;
  const auto rot = ellipsoid_rotation_params(a, b, c);
  model.inertia_ratio = rot.inertia_ratio;
  model.sigma = rot.sigma;
}

}  // namespace

AsteroidModel synthesize_asteroid(std::uint64_t seed, const AsteroidGenConfig& cfg,
                                  const AsteroidDynamicsRanges& ranges) {
  cfg.validate();
  ranges.validate();
  Rng rng(seed);
  AsteroidModel model;
  model.perturbation = draw_uniform(rng, cfg.perturbation);

  HalfAxes& h = model.half_axes;
  if (cfg.uniform_axes) {
    const double r = draw_uniform(rng, cfg.half_axis);
    h = {r, r, r, r, r, r};
  } else {
    h.a_pos = draw_uniform(rng, cfg.half_axis);
    h.a_neg = draw_uniform(rng, cfg.half_axis);
    h.b_pos = draw_uniform(rng, cfg.half_axis);
    h.b_neg = draw_uniform(rng, cfg.half_axis);
    h.c_pos = draw_uniform(rng, cfg.half_axis);
    h.c_neg = draw_uniform(rng, cfg.half_axis);
  }

  model.mesh = generate_icosphere(cfg.subdivision_level);
  const Range offset{-model.perturbation, model.perturbation};
  for (auto& v : model.mesh.vertices) {
    for (int k = 0; k < 3; ++k) v[k] += draw_uniform(rng, offset);
    v.x() *= v.x() >= 0.0 ? h.a_pos : h.a_neg;
    v.y() *= v.y() >= 0.0 ? h.b_pos : h.b_neg;
    v.z() *= v.z() >= 0.0 ? h.c_pos : h.c_neg;
  }

  set_axes(model, 0.5 * (h.a_pos + h.a_neg), 0.5 * (h.b_pos + h.b_neg),
           0.5 * (h.c_pos + h.c_neg));
  draw_dynamics(rng, ranges, model);
  return model;
}

AsteroidModel asteroid_from_mesh(TriMesh mesh, std::uint64_t seed,
                                 const AsteroidDynamicsRanges& ranges) {
  ranges.validate();
  if (mesh.vertices.empty()) throw ConfigError("asteroid mesh has no vertices");
  Vec3 lo = mesh.vertices.front();
  Vec3 hi = lo;
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  AsteroidModel model;
  model.mesh = std::move(mesh);
  model.half_axes = {hi.x(), -lo.x(), hi.y(), -lo.y(), hi.z(), -lo.z()};
  const Vec3 half = 0.5 * (hi - lo);
  set_axes(model, half.x(), half.y(), half.z());
  Rng rng(seed);
  draw_dynamics(rng, ranges, model);
  return model;
}

MeshLoadError::MeshLoadError(const std::string& what, std::size_t line)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

long parse_index(const std::string& token, std::size_t line) {
  // OBJ face tokens may carry texture/normal indices: "i", "i/j", "i//k".
  const auto slash = token.find('/');
  const std::string head = token.substr(0, slash);
  long value = 0;
  const auto* first = head.data();
  const auto* last = head.data() + head.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw MeshLoadError("malformed face index '" + token + "'", line);
  }
  if (value <= 0) {
    throw MeshLoadError("face indices must be positive (1-based), got " + head, line);
  }
  return value;
}

}  // namespace

TriMesh read_mesh(std::istream& in, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ConfigError("mesh scale must be positive and finite");
  }
  TriMesh mesh;
  std::vector<std::size_t> face_lines;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    const auto hash = text.find('#');
    if (hash != std::string::npos) text.erase(hash);
    std::istringstream row(text);
    std::string tag;
    if (!(row >> tag)) continue;
    if (tag == "v") {
      Vec3 p;
      if (!(row >> p.x() >> p.y() >> p.z())) {
        throw MeshLoadError("vertex record needs three coordinates", line);
      }
      if (!p.allFinite()) throw MeshLoadError("non-finite vertex coordinate", line);
      mesh.vertices.push_back(p * scale);
    } else if (tag == "f") {
      std::vector<std::string> tokens;
      for (std::string tok; row >> tok;) tokens.push_back(tok);
      if (tokens.size() != 3) {
        throw MeshLoadError("face record must have exactly 3 indices, got " +
                                std::to_string(tokens.size()),
                            line);
      }
      std::array<std::uint32_t, 3> face{};
      for (int k = 0; k < 3; ++k) {
        const long idx = parse_index(tokens[k], line);
        if (idx > static_cast<long>(UINT32_MAX)) throw MeshLoadError("face index too large", line);
        face[k] = static_cast<std::uint32_t>(idx - 1);
      }
      mesh.faces.push_back(face);
      face_lines.push_back(line);
    }
  }
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    for (const auto idx : mesh.faces[f]) {
      if (idx >= mesh.vertices.size()) {
        throw MeshLoadError("face index " + std::to_string(idx + 1) + " exceeds vertex count " +
                                std::to_string(mesh.vertices.size()),
                            face_lines[f]);
      }
    }
  }
  return mesh;
}

TriMesh load_mesh_file(const std::filesystem::path& path, double scale) {
  std::ifstream in(path);
  if (!in) throw MeshLoadError("cannot open mesh file " + path.string(), 0);
  return read_mesh(in, scale);
}

void write_mesh(std::ostream& out, const TriMesh& mesh) {
  out << "# vertices " << mesh.vertex_count() << " faces " << mesh.face_count() << '\n';
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
}

void save_mesh_file(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write mesh file " + path.string());
  write_mesh(out, mesh);
}

TriMesh generate_peanut(int level, double length, double width, double height, double waist) {
  require(length > 0 && width > 0 && height > 0, "peanut dimensions must be positive");
  require(waist >= 0.0 && waist < 0.9, "peanut waist must be in [0, 0.9)");
  TriMesh mesh = generate_icosphere(level);
  for (auto& v : mesh.vertices) {
    const double pinch = 1.0 - waist * std::exp(-(v.x() * v.x()) / (0.35 * 0.35));
    v = Vec3(0.5 * length * v.x(), 0.5 * width * pinch * v.y(), 0.5 * height * pinch * v.z());
  }
  return mesh;
}

}  // namespace hover::geometry
