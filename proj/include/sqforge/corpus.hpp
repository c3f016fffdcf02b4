#pragma once

#include "sqforge/geometry.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace sqforge {

struct Range {
  double lo, hi;
  double draw(std::mt19937_64& rng) const { return std::uniform_real_distribution<double>(lo, hi)(rng); }
};

/// One object category of the toy corpus.
struct CategorySpec {
  TokenId token = 0;
  std::string name;
  std::vector<std::string> parts;
  /// Probability that a part takes a random accent color instead of the shape's main color.
  std::vector<double> accent_prob;
  /// Samples posed parts in world units, z-up, resting on z = 0.
  std::function<std::vector<Superquadric>(std::mt19937_64&)> sample_parts;
};

const CategorySpec& chair_spec();
const CategorySpec& table_spec();
const CategorySpec& rocket_spec();
std::vector<CategorySpec> default_categories();
const CategorySpec& category_by_token(TokenId token);

/// A generated training shape. The scene is normalized into the unit cube and is its own
/// fine control; local labels carry each part's color token.
struct Shape {
  ControlScene scene;
  TokenId main_color = 0;
  OccupancyGrid grid;
  std::vector<TokenId> voxel_labels;  // per active cell, canonical order
  std::vector<Vec3> voxel_colors;     // per active cell, canonical order
};

Shape sample_shape(const CategorySpec& spec, std::uint64_t seed, int resolution = 32);

/// Replaces each part by its axis-aligned bounding cuboid (ε₁ = ε₂ = 0.05).
ControlScene coarsen(const ControlScene& scene);

struct DatasetItem {
  std::string id;
  TokenId category = 0;
  std::uint64_t seed = 0;
  TokenId color = 0;  // main color
  std::string split;  // "train" | "val"
  std::string scene_file;
  std::string grid_file;
};

/// On-disk corpus: scenes/*.json, grids/*.grid and manifest.json.
class Dataset {
 public:
  static Dataset build(const std::vector<CategorySpec>& specs, int n_per_category, std::uint64_t seed,
                       const std::filesystem::path& dir, int resolution = 32);
  static Dataset load(const std::filesystem::path& dir);

  const std::vector<DatasetItem>& items() const { return items_; }
  std::vector<DatasetItem> split(const std::string& name) const;
  int resolution() const { return resolution_; }
  const std::filesystem::path& dir() const { return dir_; }
  /// FNV-1a of manifest.json bytes.
  const std::string& manifest_hash() const { return hash_; }

  ControlScene scene(const DatasetItem& item) const;
  OccupancyGrid grid(const DatasetItem& item) const;
  /// Regenerates the full shape (labels and colors) from the item's seed.
  Shape shape(const DatasetItem& item) const;

 private:
  std::filesystem::path dir_;
  std::vector<DatasetItem> items_;
  int resolution_ = 32;
  std::string hash_;
};

}  // namespace sqforge
