#pragma once

#include "sqforge/geometry.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace sqforge {

inline constexpr int kSceneFormatVersion = 1;

/// Scene JSON: {version, global_label, primitives:[{scale, exponents, translation,
/// rotation, local_label?}], mesh?:{vertices, faces}}.
nlohmann::json scene_to_json(const ControlScene& scene);
ControlScene scene_from_json(const nlohmann::json& doc);

ControlScene load_scene(const std::filesystem::path& path);
void save_scene(const ControlScene& scene, const std::filesystem::path& path);

/// ASCII OBJ subset: `v x y z` and triangular `f a b c` (1-based, `a/b/c` and negative indices accepted).
TriangleMesh parse_obj(const std::string& text);
TriangleMesh load_obj(const std::filesystem::path& path);

}  // namespace sqforge
