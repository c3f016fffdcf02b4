#include "sqforge/corpus.hpp"

#include "sqforge/binary_io.hpp"
#include "sqforge/codec.hpp"
#include "sqforge/guidance.hpp"
#include "sqforge/scene_io.hpp"
#include "sqforge/vocab.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

namespace sqforge {

namespace fs = std::filesystem;

namespace {

Superquadric part(Vec3 scale, double e1, double e2, Vec3 t, Vec3 rot = Vec3::Zero()) {
  Superquadric q;
  q.scale = scale;
  q.eps1 = e1;
  q.eps2 = e2;
  q.translation = t;
  q.rotation = rot;
  q.validate();
  return q;
}

std::vector<Superquadric> chair_parts(std::mt19937_64& rng) {
  const double w = Range{0.2, 0.26}.draw(rng);
  const double d = Range{0.19, 0.25}.draw(rng);
  const double th = Range{0.045, 0.06}.draw(rng);
  const double seat_h = Range{0.38, 0.48}.draw(rng);
  const double r = Range{0.06, 0.075}.draw(rng);
  std::vector<Superquadric> out;
  out.push_back(part({w, d, th}, Range{0.2, 0.4}.draw(rng), Range{0.3, 0.7}.draw(rng), {0, 0, seat_h}));
  const double leg_half = (seat_h - th) / 2;
  const double leg_e1 = Range{0.1, 0.2}.draw(rng);
  for (int sy : {-1, 1})
    for (int sx : {-1, 1})
      out.push_back(part({r, r, leg_half}, leg_e1, 1.0, {sx * (w - 1.3 * r), sy * (d - 1.3 * r), leg_half}));
  const double tb = Range{0.045, 0.06}.draw(rng);
  const double bh = Range{0.16, 0.22}.draw(rng);
  const double tilt = Range{0.05, 0.25}.draw(rng);
  // Roll about x by +tilt leans the top of the backrest towards -y.
  const Vec3 center{0, -d + tb - bh * std::sin(tilt), seat_h + th + bh * std::cos(tilt)};
  out.push_back(part({w * Range{0.9, 1.0}.draw(rng), tb, bh}, Range{0.2, 0.5}.draw(rng),
                     Range{0.2, 0.4}.draw(rng), center, {0, 0, tilt}));
  return out;
}

std::vector<Superquadric> table_parts(std::mt19937_64& rng) {
  const double w = Range{0.4, 0.5}.draw(rng);
  const double d = Range{0.25, 0.35}.draw(rng);
  const double th = Range{0.045, 0.06}.draw(rng);
  const double h = Range{0.35, 0.45}.draw(rng);
  const double a = Range{0.055, 0.07}.draw(rng);
  const bool round = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  const double top_e2 = round ? Range{0.6, 1.0}.draw(rng) : Range{0.1, 0.3}.draw(rng);
  std::vector<Superquadric> out;
  out.push_back(part({w, d, th}, Range{0.2, 0.35}.draw(rng), top_e2, {0, 0, h}));
  const double leg_half = (h - th) / 2;
  const double inset = round ? 2.2 * a : 1.5 * a;
  const double leg_e2 = Range{0.1, 0.4}.draw(rng);
  for (int sy : {-1, 1})
    for (int sx : {-1, 1})
      out.push_back(part({a, a, leg_half}, 0.1, leg_e2, {sx * (w - inset), sy * (d - inset), leg_half}));
  return out;
}

std::vector<Superquadric> rocket_parts(std::mt19937_64& rng) {
  const double rb = Range{0.1, 0.13}.draw(rng);
  const double hb = Range{0.28, 0.36}.draw(rng);
  const double lift = Range{0.0, 0.04}.draw(rng);
  const double hn = Range{0.12, 0.18}.draw(rng);
  std::vector<Superquadric> out;
  out.push_back(part({rb, rb, hb}, Range{0.15, 0.3}.draw(rng), 1.0, {0, 0, lift + hb}));
  out.push_back(part({rb, rb, hn}, Range{0.6, 1.0}.draw(rng), 1.0, {0, 0, lift + 2 * hb}));
  const double fw = Range{0.08, 0.11}.draw(rng);
  const double ft = Range{0.045, 0.055}.draw(rng);
  const double fh = Range{0.1, 0.14}.draw(rng);
  const double phi0 = Range{0.0, std::numbers::pi / 4}.draw(rng);
  const double fe1 = Range{0.1, 0.3}.draw(rng);
  const double fe2 = Range{0.1, 0.3}.draw(rng);
  for (int k = 0; k < 4; ++k) {
    const double phi = phi0 + k * std::numbers::pi / 2;
    const double radial = rb + 0.8 * fw;
    out.push_back(part({fw, ft, fh}, fe1, fe2, {radial * std::cos(phi), radial * std::sin(phi), fh}, {phi, 0, 0}));
  }
  return out;
}

}  // namespace

const CategorySpec& chair_spec() {
  static const CategorySpec spec{vocab::kChair, "chair",
                                 {"seat", "leg", "leg", "leg", "leg", "back"},
                                 {0.5, 0.3, 0.3, 0.3, 0.3, 0.3},
                                 chair_parts};
  return spec;
}

const CategorySpec& table_spec() {
  static const CategorySpec spec{vocab::kTable, "table",
                                 {"top", "leg", "leg", "leg", "leg"},
                                 {0.4, 0.3, 0.3, 0.3, 0.3},
                                 table_parts};
  return spec;
}

const CategorySpec& rocket_spec() {
  static const CategorySpec spec{vocab::kRocket, "rocket",
                                 {"body", "nose", "fin", "fin", "fin", "fin"},
                                 {0.2, 0.5, 0.4, 0.4, 0.4, 0.4},
                                 rocket_parts};
  return spec;
}

std::vector<CategorySpec> default_categories() { return {chair_spec(), table_spec(), rocket_spec()}; }

const CategorySpec& category_by_token(TokenId token) {
  switch (token) {
    case vocab::kChair: return chair_spec();
    case vocab::kTable: return table_spec();
    case vocab::kRocket: return rocket_spec();
    default: throw Error("unknown category token " + std::to_string(token));
  }
}

Shape sample_shape(const CategorySpec& spec, std::uint64_t seed, int resolution) {
  std::mt19937_64 rng(seed);
  ControlScene world;
  world.primitives = spec.sample_parts(rng);
  require(world.primitives.size() == spec.parts.size(), "category template arity mismatch for " + spec.name);
  world.global_label = spec.token;
  const double floor = world.bounds().first.z();
  if (floor < 0)
    for (auto& q : world.primitives) q.translation.z() -= floor;

  std::uniform_int_distribution<std::size_t> pick_color(0, vocab::kColors.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Shape s;
  s.main_color = vocab::kColors[pick_color(rng)];
  std::map<std::string, TokenId> group_color;
  for (std::size_t i = 0; i < spec.parts.size(); ++i) {
    auto it = group_color.find(spec.parts[i]);
    if (it == group_color.end()) {
      TokenId c = s.main_color;
      if (unit(rng) < spec.accent_prob[i]) c = vocab::kColors[pick_color(rng)];
      it = group_color.emplace(spec.parts[i], c).first;
    }
    world.local_labels.push_back(it->second);
  }
  s.scene = normalize_to_unit_cube(world).first;
  s.grid = voxelize(s.scene, resolution);
  for (const auto& c : s.grid.active_cells()) {
    const int k = nearest_primitive(s.scene.primitives, s.grid.cell_center(c[0], c[1], c[2]));
    const TokenId label = s.scene.local_labels[static_cast<std::size_t>(k)];
    s.voxel_labels.push_back(label);
    s.voxel_colors.push_back(vocab::color_rgb(label));
  }
  return s;
}

ControlScene coarsen(const ControlScene& scene) {
  ControlScene out = scene;
  for (auto& q : out.primitives) {
    const auto [lo, hi] = q.bounds();
    Superquadric box;
    box.scale = (hi - lo) / 2;
    box.translation = (hi + lo) / 2;
    box.eps1 = box.eps2 = kMinExponent;
    q = box;
  }
  return out;
}

namespace {

constexpr std::string_view kManifestFormat = "sqforge-dataset";

DatasetItem item_from_json(const nlohmann::json& j) {
  DatasetItem it;
  it.id = j.at("id").get<std::string>();
  it.category = j.at("category").get<int>();
  it.seed = j.at("seed").get<std::uint64_t>();
  it.color = j.at("color").get<int>();
  it.split = j.at("split").get<std::string>();
  it.scene_file = j.at("scene").get<std::string>();
  it.grid_file = j.at("grid").get<std::string>();
  return it;
}

nlohmann::json item_to_json(const DatasetItem& it) {
  return {{"id", it.id},       {"category", it.category}, {"seed", it.seed},       {"color", it.color},
          {"split", it.split}, {"scene", it.scene_file},  {"grid", it.grid_file}};
}

}  // namespace

Dataset Dataset::build(const std::vector<CategorySpec>& specs, int n_per_category, std::uint64_t seed,
                       const fs::path& dir, int resolution) {
  require(n_per_category >= 1, "corpus build: n per category must be at least 1");
  require(!specs.empty(), "corpus build: no categories");
  std::error_code ec;
  fs::create_directories(dir / "scenes", ec);
  if (!ec) fs::create_directories(dir / "grids", ec);
  require(!ec, "corpus build: cannot create " + dir.string() + ": " + ec.message());

  Dataset ds;
  ds.dir_ = dir;
  ds.resolution_ = resolution;
  const int n_val = n_per_category / 10;
  int n_train_total = 0;
  for (const auto& spec : specs) {
    for (int i = 0; i < n_per_category; ++i) {
      DatasetItem it;
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s-%05d", spec.name.c_str(), i);
      it.id = buf;
      it.category = spec.token;
      it.seed = mix_seed(seed, static_cast<std::uint64_t>(spec.token) * 1000003ULL + static_cast<std::uint64_t>(i));
      it.split = i >= n_per_category - n_val ? "val" : "train";
      it.scene_file = "scenes/" + it.id + ".json";
      it.grid_file = "grids/" + it.id + ".grid";
      const Shape s = sample_shape(spec, it.seed, resolution);
      it.color = s.main_color;
      save_scene(s.scene, dir / it.scene_file);
      io::write_file_atomic(dir / it.grid_file, grid_to_bytes(s.grid));
      if (it.split == "train") ++n_train_total;
      ds.items_.push_back(std::move(it));
    }
  }
  nlohmann::json m;
  m["format"] = kManifestFormat;
  m["version"] = 1;
  m["seed"] = seed;
  m["resolution"] = resolution;
  m["n_per_category"] = n_per_category;
  m["categories"] = nlohmann::json::array();
  for (const auto& spec : specs) m["categories"].push_back({{"token", spec.token}, {"name", spec.name}});
  m["counts"] = {{"total", ds.items_.size()},
                 {"train", n_train_total},
                 {"val", static_cast<int>(ds.items_.size()) - n_train_total}};
  m["items"] = nlohmann::json::array();
  for (const auto& it : ds.items_) m["items"].push_back(item_to_json(it));
  const std::string text = m.dump(1) + "\n";
  io::write_file_atomic(dir / "manifest.json", text);
  ds.hash_ = hex64(fnv1a(text));
  return ds;
}

Dataset Dataset::load(const fs::path& dir) {
  const std::string text = io::read_file(dir / "manifest.json");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error("dataset manifest is not valid JSON: " + std::string(e.what()));
  }
  require(m.value("format", "") == kManifestFormat, "not a dataset manifest: " + (dir / "manifest.json").string());
  Dataset ds;
  ds.dir_ = dir;
  ds.resolution_ = m.at("resolution").get<int>();
  for (const auto& j : m.at("items")) ds.items_.push_back(item_from_json(j));
  ds.hash_ = hex64(fnv1a(text));
  return ds;
}

std::vector<DatasetItem> Dataset::split(const std::string& name) const {
  std::vector<DatasetItem> out;
  for (const auto& it : items_)
    if (it.split == name) out.push_back(it);
  return out;
}

ControlScene Dataset::scene(const DatasetItem& item) const { return load_scene(dir_ / item.scene_file); }

OccupancyGrid Dataset::grid(const DatasetItem& item) const {
  return grid_from_bytes(io::read_file(dir_ / item.grid_file));
}

Shape Dataset::shape(const DatasetItem& item) const {
  return sample_shape(category_by_token(item.category), item.seed, resolution_);
}

}  // namespace sqforge
