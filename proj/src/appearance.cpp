#include "sqforge/appearance.hpp"

#include "sqforge/binary_io.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace sqforge {

AppearanceLatents attach_noise(const OccupancyGrid& structure, std::uint64_t seed, int channels) {
  require(channels >= 3, "appearance latents need at least 3 channels");
  AppearanceLatents a;
  a.resolution = structure.resolution();
  a.cells = structure.active_cells();
  require(!a.cells.empty(), "appearance: structure has no occupied cells");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  a.features.resize(a.count(), channels);
  for (Eigen::Index i = 0; i < a.features.size(); ++i) a.features.data()[i] = normal(rng);
  return a;
}

std::vector<TokenId> assign_local_tokens(const OccupancyGrid& structure, const ControlScene& scene) {
  require(!scene.primitives.empty() && scene.local_labels.size() == scene.primitives.size(),
          "local tokens need a labeled primitive per part");
  std::vector<TokenId> out;
  for (const auto& c : structure.active_cells()) {
    const int k = nearest_primitive(scene.primitives, structure.cell_center(c[0], c[1], c[2]));
    out.push_back(scene.local_labels[static_cast<std::size_t>(k)]);
  }
  return out;
}

ColoredVoxels generate_appearance(const OccupancyGrid& structure, std::shared_ptr<const AppearanceNet> net,
                                  const VoxelConditioning& cond, std::uint64_t seed,
                                  const StepSchedule& schedule, const ProgressFn& progress) {
  const int ch = net->dims().channels;
  AppearanceLatents lat = attach_noise(structure, seed, ch);
  require(cond.local.empty() || static_cast<int>(cond.local.size()) == lat.count(),
          "appearance: local tokens must cover every active voxel");
  AppearanceField field(net, make_voxel_context(lat.cells, lat.resolution), cond);
  const Vector z1 = Eigen::Map<const Vector>(lat.features.data(), lat.features.size());
  const Vector z0 = integrate(z1, field, schedule, 0, cond.global, progress);
  ColoredVoxels out;
  out.resolution = lat.resolution;
  out.cells = std::move(lat.cells);
  for (int i = 0; i < static_cast<int>(out.cells.size()); ++i) {
    Vec3 rgb;
    for (int c = 0; c < 3; ++c) rgb[c] = 1.0 / (1.0 + std::exp(-z0[static_cast<Eigen::Index>(i) * ch + c]));
    out.colors.push_back(rgb);
  }
  return out;
}

namespace {

struct FaceDir {
  int dx, dy, dz;
  // Quad corners as unit-cube offsets, counter-clockwise seen from outside.
  int corner[4][3];
};

constexpr FaceDir kFaces[6] = {
    {-1, 0, 0, {{0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {0, 1, 0}}},
    {1, 0, 0, {{1, 0, 0}, {1, 1, 0}, {1, 1, 1}, {1, 0, 1}}},
    {0, -1, 0, {{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1}}},
    {0, 1, 0, {{0, 1, 0}, {0, 1, 1}, {1, 1, 1}, {1, 1, 0}}},
    {0, 0, -1, {{0, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, 0, 0}}},
    {0, 0, 1, {{0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}},
};

}  // namespace

std::size_t exposed_faces(const OccupancyGrid& structure) {
  std::size_t n = 0;
  for (const auto& c : structure.active_cells())
    for (const auto& f : kFaces)
      if (!structure.occupied(c[0] + f.dx, c[1] + f.dy, c[2] + f.dz)) ++n;
  return n;
}

ColoredMesh extract_surface(const OccupancyGrid& structure, const std::vector<Vec3>& colors) {
  const auto cells = structure.active_cells();
  require(!cells.empty(), "extract_surface: structure has no occupied cells");
  require(colors.empty() || colors.size() == cells.size(), "extract_surface: one color per active cell");
  const double r = structure.resolution();
  ColoredMesh m;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    const Vec3 rgb = colors.empty() ? Vec3(0.7, 0.7, 0.7) : colors[i];
    for (const auto& f : kFaces) {
      if (structure.occupied(c[0] + f.dx, c[1] + f.dy, c[2] + f.dz)) continue;
      const int base = static_cast<int>(m.vertices.size());
      for (const auto& k : f.corner) {
        m.vertices.emplace_back((c[0] + k[0]) / r, (c[1] + k[1]) / r, (c[2] + k[2]) / r);
        m.colors.push_back(rgb);
      }
      m.faces.push_back({base, base + 1, base + 2});
      m.faces.push_back({base, base + 2, base + 3});
    }
  }
  return m;
}

std::string mesh_to_obj(const ColoredMesh& mesh) {
  std::string out = "# sqforge voxel surface\n";
  char buf[160];
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    const auto& c = mesh.colors[i];
    std::snprintf(buf, sizeof buf, "v %.6f %.6f %.6f %.4f %.4f %.4f\n", v.x(), v.y(), v.z(), c.x(), c.y(), c.z());
    out += buf;
  }
  for (const auto& f : mesh.faces) {
    std::snprintf(buf, sizeof buf, "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
    out += buf;
  }
  return out;
}

std::string mesh_to_binary(const ColoredMesh& mesh) {
  io::Writer w;
  w.bytes("SCMESH1\n");
  w.u32(static_cast<std::uint32_t>(mesh.vertices.size()));
  w.u32(static_cast<std::uint32_t>(mesh.faces.size()));
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    for (int k = 0; k < 3; ++k) w.f32(static_cast<float>(mesh.vertices[i][k]));
    for (int k = 0; k < 3; ++k) w.f32(static_cast<float>(mesh.colors[i][k]));
  }
  for (const auto& f : mesh.faces)
    for (int k : f) w.u32(static_cast<std::uint32_t>(k));
  return w.take();
}

}  // namespace sqforge
