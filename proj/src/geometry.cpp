#include "sqforge/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <limits>
#include <numbers>
#include <random>

namespace sqforge {

namespace {

bool finite3(const Vec3& v) { return v.allFinite(); }

// sgn(c)|c|^e, the closed-surface convention for the parametric form.
double signed_pow(double c, double e) {
  if (c == 0.0) return 0.0;
  return std::copysign(std::pow(std::abs(c), e), c);
}

}  // namespace

void Superquadric::validate() {
  require(finite3(scale) && finite3(translation) && finite3(rotation) && std::isfinite(eps1) &&
              std::isfinite(eps2),
          "superquadric parameters must be finite");
  require(scale.minCoeff() > 0.0, "superquadric scales must be positive");
  eps1 = std::clamp(eps1, kMinExponent, kMaxExponent);
  eps2 = std::clamp(eps2, kMinExponent, kMaxExponent);
}

Mat3 Superquadric::rotation_matrix() const {
  return (Eigen::AngleAxisd(rotation[0], Vec3::UnitZ()) *
          Eigen::AngleAxisd(rotation[1], Vec3::UnitY()) *
          Eigen::AngleAxisd(rotation[2], Vec3::UnitX()))
      .toRotationMatrix();
}

Vec3 Superquadric::to_local(const Vec3& world) const {
  return rotation_matrix().transpose() * (world - translation);
}

Vec3 Superquadric::to_world(const Vec3& local) const {
  return rotation_matrix() * local + translation;
}

std::pair<Vec3, Vec3> Superquadric::bounds() const {
  const Mat3 rot = rotation_matrix();
  // Half-extent of a rotated box along each world axis.
  const Vec3 half = rot.cwiseAbs() * scale;
  return {translation - half, translation + half};
}

void TriangleMesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  for (const auto& f : faces) {
    for (int idx : f) require(idx >= 0 && idx < n, "mesh face index out of range");
  }
  for (const auto& v : vertices) require(finite3(v), "mesh vertices must be finite");
}

void ControlScene::validate() {
  const bool has_mesh = mesh && !mesh->empty();
  require(!primitives.empty() || has_mesh, "control scene needs a primitive or a non-empty mesh");
  for (auto& q : primitives) q.validate();
  require(local_labels.empty() || local_labels.size() == primitives.size(),
          "local labels must cover every primitive");
  if (mesh) mesh->validate();
}

std::pair<Vec3, Vec3> ControlScene::bounds() const {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& q : primitives) {
    auto [a, b] = q.bounds();
    lo = lo.cwiseMin(a);
    hi = hi.cwiseMax(b);
  }
  if (mesh) {
    for (const auto& f : mesh->faces) {
      for (int idx : f) {
        lo = lo.cwiseMin(mesh->vertices[static_cast<std::size_t>(idx)]);
        hi = hi.cwiseMax(mesh->vertices[static_cast<std::size_t>(idx)]);
      }
    }
  }
  return {lo, hi};
}

OccupancyGrid::OccupancyGrid(int resolution)
    : res_(resolution),
      cells_(static_cast<std::size_t>(resolution) * resolution * resolution, 0) {
  require(resolution > 0, "grid resolution must be positive");
}

bool OccupancyGrid::occupied(int x, int y, int z) const {
  if (x < 0 || y < 0 || z < 0 || x >= res_ || y >= res_ || z >= res_) return false;
  return at(x, y, z);
}

Vec3 OccupancyGrid::cell_center(int x, int y, int z) const {
  const double r = res_;
  return {(x + 0.5) / r, (y + 0.5) / r, (z + 0.5) / r};
}

std::size_t OccupancyGrid::count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

std::vector<std::array<int, 3>> OccupancyGrid::active_cells() const {
  std::vector<std::array<int, 3>> out;
  for (int z = 0; z < res_; ++z)
    for (int y = 0; y < res_; ++y)
      for (int x = 0; x < res_; ++x)
        if (at(x, y, z)) out.push_back({x, y, z});
  return out;
}

double inside_outside(const Superquadric& q, const Vec3& p) {
  require(finite3(p), "inside_outside: point must be finite");
  const Vec3 l = q.to_local(p);
  const double ax = std::pow(std::abs(l.x() / q.scale.x()), 2.0 / q.eps2);
  const double ay = std::pow(std::abs(l.y() / q.scale.y()), 2.0 / q.eps2);
  const double az = std::pow(std::abs(l.z() / q.scale.z()), 2.0 / q.eps1);
  return std::pow(ax + ay, q.eps2 / q.eps1) + az;
}

int nearest_primitive(const std::vector<Superquadric>& prims, const Vec3& p) {
  require(!prims.empty(), "nearest_primitive: no primitives");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < prims.size(); ++i) {
    const auto& q = prims[i];
    const double d = std::pow(inside_outside(q, p), q.eps1 / 2.0) * q.scale.minCoeff();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

Vec3 surface_point(const Superquadric& q, double eta, double omega) {
  const double ce = signed_pow(std::cos(eta), q.eps1);
  const Vec3 local{q.scale.x() * ce * signed_pow(std::cos(omega), q.eps2),
                   q.scale.y() * ce * signed_pow(std::sin(omega), q.eps2),
                   q.scale.z() * signed_pow(std::sin(eta), q.eps1)};
  return q.to_world(local);
}

std::vector<Vec3> surface_sample(const Superquadric& q, int n, std::uint64_t seed) {
  require(n >= 1, "surface_sample: n must be at least 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> eta(-std::numbers::pi / 2, std::numbers::pi / 2);
  std::uniform_real_distribution<double> omega(-std::numbers::pi, std::numbers::pi);
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double e = eta(rng);
    out.push_back(surface_point(q, e, omega(rng)));
  }
  return out;
}

std::vector<Vec3> mesh_surface_sample(const TriangleMesh& mesh, int n, std::uint64_t seed) {
  require(n >= 1, "mesh_surface_sample: n must be at least 1");
  std::vector<double> cumulative;
  double total = 0.0;
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(f[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(f[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(f[2])];
    total += 0.5 * (b - a).cross(c - a).norm();
    cumulative.push_back(total);
  }
  require(total > 0.0, "mesh has zero surface area");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double pick = u(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const auto fi = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                                          mesh.faces.size() - 1);
    const auto& f = mesh.faces[fi];
    double r1 = std::sqrt(u(rng));
    double r2 = u(rng);
    out.push_back((1 - r1) * mesh.vertices[static_cast<std::size_t>(f[0])] +
                  r1 * (1 - r2) * mesh.vertices[static_cast<std::size_t>(f[1])] +
                  r1 * r2 * mesh.vertices[static_cast<std::size_t>(f[2])]);
  }
  return out;
}

std::vector<Vec3> scene_surface_sample(const ControlScene& scene, int per_primitive,
                                       std::uint64_t seed) {
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    auto pts = surface_sample(scene.primitives[i], per_primitive, mix_seed(seed, i));
    out.insert(out.end(), pts.begin(), pts.end());
  }
  if (scene.mesh && !scene.mesh->empty()) {
    const int n = scene.primitives.empty() ? 4 * per_primitive : per_primitive;
    auto pts = mesh_surface_sample(*scene.mesh, n, mix_seed(seed, 0xFFFF));
    out.insert(out.end(), pts.begin(), pts.end());
  }
  return out;
}

namespace {

// x coordinates where the line {(s, y, z)} crosses the mesh.
void line_crossings(const TriangleMesh& mesh, double y, double z, std::vector<double>& xs) {
  xs.clear();
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(f[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(f[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(f[2])];
    const double w0 = (b.y() - y) * (c.z() - z) - (b.z() - z) * (c.y() - y);
    const double w1 = (c.y() - y) * (a.z() - z) - (c.z() - z) * (a.y() - y);
    const double w2 = (a.y() - y) * (b.z() - z) - (a.z() - z) * (b.y() - y);
    const bool pos = w0 > 0 && w1 > 0 && w2 > 0;
    const bool neg = w0 < 0 && w1 < 0 && w2 < 0;
    if (!pos && !neg) continue;
    const double sum = w0 + w1 + w2;
    xs.push_back((w0 * a.x() + w1 * b.x() + w2 * c.x()) / sum);
  }
}

bool has_area(const TriangleMesh& mesh) {
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(f[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(f[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(f[2])];
    if ((b - a).cross(c - a).squaredNorm() > 0.0) return true;
  }
  return false;
}

int clamp_cell(double coord, int res) {
  return std::clamp(static_cast<int>(std::floor(coord * res)), 0, res - 1);
}

void fill_primitive(const Superquadric& q, OccupancyGrid& grid) {
  const int res = grid.resolution();
  auto [lo, hi] = q.bounds();
  const int x0 = clamp_cell(lo.x(), res), x1 = clamp_cell(hi.x(), res);
  const int y0 = clamp_cell(lo.y(), res), y1 = clamp_cell(hi.y(), res);
  const int z0 = clamp_cell(lo.z(), res), z1 = clamp_cell(hi.z(), res);
  for (int z = z0; z <= z1; ++z)
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (!grid.at(x, y, z) && inside_outside(q, grid.cell_center(x, y, z)) < 1.0)
          grid.set(x, y, z, true);
}

}  // namespace

bool mesh_contains(const TriangleMesh& mesh, const Vec3& p, double perturb) {
  const Vec3 o = p + Vec3::Constant(perturb);
  std::vector<double> xs;
  line_crossings(mesh, o.y(), o.z(), xs);
  const auto hits = std::count_if(xs.begin(), xs.end(), [&](double x) { return x > o.x(); });
  return (hits % 2) == 1;
}

OccupancyGrid voxelize(const ControlScene& scene, int resolution) {
  require(resolution >= 8 && resolution <= 128, "voxelize: resolution must be in [8, 128]");
  const bool has_mesh = scene.mesh && !scene.mesh->empty();
  require(!scene.primitives.empty() || has_mesh, "voxelize: scene has no geometry");
  OccupancyGrid grid(resolution);
  for (const auto& q : scene.primitives) fill_primitive(q, grid);
  if (has_mesh) {
    const TriangleMesh& mesh = *scene.mesh;
    mesh.validate();
    require(has_area(mesh), "voxelize: mesh is degenerate (no face has area); unusable control");
    const double perturb = 1.0 / (static_cast<double>(resolution) * resolution);
    std::vector<double> xs;
    for (int z = 0; z < resolution; ++z) {
      for (int y = 0; y < resolution; ++y) {
        const Vec3 row = grid.cell_center(0, y, z) + Vec3::Constant(perturb);
        line_crossings(mesh, row.y(), row.z(), xs);
        if (xs.empty()) continue;
        for (int x = 0; x < resolution; ++x) {
          const double ox = grid.cell_center(x, y, z).x() + perturb;
          const auto hits = std::count_if(xs.begin(), xs.end(), [&](double v) { return v > ox; });
          if (hits % 2 == 1) grid.set(x, y, z, true);
        }
      }
    }
  }
  return grid;
}

OccupancyGrid voxelize(const Superquadric& q, int resolution) {
  ControlScene scene;
  scene.primitives.push_back(q);
  return voxelize(scene, resolution);
}

TriangleMesh make_icosphere(const Vec3& center, double radius, int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
                         {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
                         {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<std::array<int, 3>> f = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const int a = midpoint(tri[0], tri[1]);
      const int b = midpoint(tri[1], tri[2]);
      const int c = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  TriangleMesh mesh;
  for (const auto& p : v) mesh.vertices.push_back(center + radius * p);
  mesh.faces = std::move(f);
  return mesh;
}

}  // namespace sqforge
