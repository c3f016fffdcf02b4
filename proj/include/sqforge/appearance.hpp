#pragma once

#include "sqforge/geometry.hpp"
#include "sqforge/nets.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace sqforge {

/// Noisy per-active-voxel features, cells in canonical (z, y, x) order.
struct AppearanceLatents {
  int resolution = 0;
  std::vector<std::array<int, 3>> cells;
  Matrix features;  // L×C
  int count() const { return static_cast<int>(cells.size()); }
};

AppearanceLatents attach_noise(const OccupancyGrid& structure, std::uint64_t seed, int channels = 8);

/// Per active voxel, the local label of the nearest primitive.
std::vector<TokenId> assign_local_tokens(const OccupancyGrid& structure, const ControlScene& scene);

struct ColoredVoxels {
  int resolution = 0;
  std::vector<std::array<int, 3>> cells;
  std::vector<Vec3> colors;
};

/// Full-schedule appearance denoising; RGB = logistic(channels 0..2).
ColoredVoxels generate_appearance(const OccupancyGrid& structure, std::shared_ptr<const AppearanceNet> net,
                                  const VoxelConditioning& cond, std::uint64_t seed,
                                  const StepSchedule& schedule, const ProgressFn& progress = {});

/// Boundary quads of the occupied set, two triangles per exposed face, lattice coordinates in [0,1].
struct ColoredMesh {
  std::vector<Vec3> vertices;
  std::vector<Vec3> colors;  // per vertex
  std::vector<std::array<int, 3>> faces;
};

/// Exposed-face count by direct neighbor scan.
std::size_t exposed_faces(const OccupancyGrid& structure);

/// `colors` is per active cell in canonical order; empty means uniform gray.
ColoredMesh extract_surface(const OccupancyGrid& structure, const std::vector<Vec3>& colors = {});

/// ASCII OBJ with `v x y z r g b` vertices.
std::string mesh_to_obj(const ColoredMesh& mesh);

/// Binary dump: "SCMESH1\n", u32 V, u32 F, V × f32[6] (xyz rgb), F × u32[3], little-endian.
std::string mesh_to_binary(const ColoredMesh& mesh);

}  // namespace sqforge
