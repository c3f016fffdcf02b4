#pragma once

#include "sqforge/common.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace sqforge {

inline constexpr double kMinExponent = 0.05;
inline constexpr double kMaxExponent = 1.95;

/// Posed superquadric: 3 scales, 2 exponents, translation and Z-Y-X Euler rotation.
struct Superquadric {
  Vec3 scale{1.0, 1.0, 1.0};
  double eps1 = 1.0;  // latitude (z) exponent
  double eps2 = 1.0;  // longitude (xy) exponent
  Vec3 translation = Vec3::Zero();
  Vec3 rotation = Vec3::Zero();  // (yaw about z, pitch about y, roll about x), radians

  /// Throws if scales are not positive or any parameter is non-finite.
  /// Exponents are clamped into [kMinExponent, kMaxExponent].
  void validate();

  /// Rotation taking canonical-frame vectors to world vectors.
  Mat3 rotation_matrix() const;
  Vec3 to_local(const Vec3& world) const;
  Vec3 to_world(const Vec3& local) const;

  /// Conservative axis-aligned bounds (posed canonical box corners).
  std::pair<Vec3, Vec3> bounds() const;
};

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  bool empty() const { return faces.empty(); }
  /// Throws on out-of-range indices.
  void validate() const;
};

struct ControlScene {
  std::vector<Superquadric> primitives;
  std::vector<TokenId> local_labels;  // empty, or one per primitive
  TokenId global_label = 0;
  std::optional<TriangleMesh> mesh;

  bool has_local_labels() const { return !local_labels.empty(); }
  void validate();
  std::pair<Vec3, Vec3> bounds() const;
};

/// Binary R³ grid over [0,1]³; cell (x,y,z) sits at index (z*R + y)*R + x.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  explicit OccupancyGrid(int resolution);

  int resolution() const { return res_; }
  std::size_t size() const { return cells_.size(); }

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * res_ + y) * res_ + x;
  }
  bool at(int x, int y, int z) const { return cells_[index(x, y, z)] != 0; }
  void set(int x, int y, int z, bool v) { cells_[index(x, y, z)] = v ? 1 : 0; }
  bool operator[](std::size_t i) const { return cells_[i] != 0; }
  void set(std::size_t i, bool v) { cells_[i] = v ? 1 : 0; }

  /// Is the cell occupied, treating out-of-range coordinates as empty.
  bool occupied(int x, int y, int z) const;

  Vec3 cell_center(int x, int y, int z) const;
  std::size_t count() const;
  std::vector<std::array<int, 3>> active_cells() const;  // lexicographic (z, y, x) order

  const std::vector<std::uint8_t>& cells() const { return cells_; }
  bool operator==(const OccupancyGrid&) const = default;

 private:
  int res_ = 0;
  std::vector<std::uint8_t> cells_;
};

/// Implicit inside-outside function: <1 inside, 1 on the surface, >1 outside.
double inside_outside(const Superquadric& q, const Vec3& p);

/// Surface point for parametric coordinates eta ∈ [-π/2, π/2], omega ∈ [-π, π].
Vec3 surface_point(const Superquadric& q, double eta, double omega);

/// n seeded surface samples on the posed surface.
std::vector<Vec3> surface_sample(const Superquadric& q, int n, std::uint64_t seed);

/// Area-uniform seeded samples over all mesh triangles.
std::vector<Vec3> mesh_surface_sample(const TriangleMesh& mesh, int n, std::uint64_t seed);

/// Surface samples for the whole control: per-primitive samples plus mesh samples.
std::vector<Vec3> scene_surface_sample(const ControlScene& scene, int per_primitive,
                                       std::uint64_t seed);

/// Index of the primitive minimizing F(p)^{ε₁/2}·min(scale), a distance-like proxy.
/// Ties go to the lowest index.
int nearest_primitive(const std::vector<Superquadric>& prims, const Vec3& p);

/// Ray-parity solid membership along +x with a fixed origin perturbation.
bool mesh_contains(const TriangleMesh& mesh, const Vec3& p, double perturb);

OccupancyGrid voxelize(const ControlScene& scene, int resolution);
OccupancyGrid voxelize(const Superquadric& q, int resolution);

/// Closed icosphere, used for mesh controls and tests.
TriangleMesh make_icosphere(const Vec3& center, double radius, int subdivisions);

}  // namespace sqforge
