#include "sqforge/scene_io.hpp"

#include "sqforge/binary_io.hpp"

#include <sstream>

namespace sqforge {

using nlohmann::json;

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j, const char* field) {
  require(j.is_array() && j.size() == 3, std::string("field '") + field + "' must be a 3-array");
  for (const auto& e : j) require(e.is_number(), std::string("field '") + field + "' must be numeric");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

const json& field(const json& obj, const char* name) {
  auto it = obj.find(name);
  require(it != obj.end(), std::string("missing field '") + name + "'");
  return *it;
}

}  // namespace

json scene_to_json(const ControlScene& scene) {
  json prims = json::array();
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    const auto& q = scene.primitives[i];
    json p = {{"scale", vec_json(q.scale)},
              {"exponents", json::array({q.eps1, q.eps2})},
              {"translation", vec_json(q.translation)},
              {"rotation", vec_json(q.rotation)}};
    if (scene.has_local_labels()) p["local_label"] = scene.local_labels[i];
    prims.push_back(std::move(p));
  }
  json doc = {{"version", kSceneFormatVersion},
              {"global_label", scene.global_label},
              {"primitives", std::move(prims)}};
  if (scene.mesh) {
    json verts = json::array();
    for (const auto& v : scene.mesh->vertices) verts.push_back(vec_json(v));
    json faces = json::array();
    for (const auto& f : scene.mesh->faces) faces.push_back(json::array({f[0], f[1], f[2]}));
    doc["mesh"] = {{"vertices", std::move(verts)}, {"faces", std::move(faces)}};
  }
  return doc;
}

ControlScene scene_from_json(const json& doc) {
  require(doc.is_object(), "scene must be a JSON object");
  ControlScene scene;
  if (auto it = doc.find("version"); it != doc.end()) {
    require(it->is_number_integer() && it->get<int>() == kSceneFormatVersion,
            "unsupported scene version");
  }
  const json& gl = field(doc, "global_label");
  require(gl.is_number_integer(), "field 'global_label' must be an integer token id");
  scene.global_label = gl.get<int>();

  const json& prims = field(doc, "primitives");
  require(prims.is_array(), "field 'primitives' must be an array");
  int labelled = 0;
  for (const auto& p : prims) {
    require(p.is_object(), "primitive must be an object");
    Superquadric q;
    q.scale = vec_from(field(p, "scale"), "scale");
    const json& ex = field(p, "exponents");
    require(ex.is_array() && ex.size() == 2 && ex[0].is_number() && ex[1].is_number(),
            "field 'exponents' must be a numeric 2-array");
    q.eps1 = ex[0].get<double>();
    q.eps2 = ex[1].get<double>();
    q.translation = vec_from(field(p, "translation"), "translation");
    q.rotation = vec_from(field(p, "rotation"), "rotation");
    scene.primitives.push_back(q);
    if (auto it = p.find("local_label"); it != p.end()) {
      require(it->is_number_integer(), "field 'local_label' must be an integer token id");
      scene.local_labels.push_back(it->get<int>());
      ++labelled;
    }
  }
  require(labelled == 0 || labelled == static_cast<int>(scene.primitives.size()),
          "local labels must cover every primitive");

  if (auto it = doc.find("mesh"); it != doc.end() && !it->is_null()) {
    TriangleMesh mesh;
    const json& verts = field(*it, "vertices");
    const json& faces = field(*it, "faces");
    require(verts.is_array() && faces.is_array(), "mesh vertices/faces must be arrays");
    for (const auto& v : verts) mesh.vertices.push_back(vec_from(v, "vertices"));
    for (const auto& f : faces) {
      require(f.is_array() && f.size() == 3, "mesh faces must be index triples");
      for (const auto& e : f) require(e.is_number_integer(), "mesh face indices must be integers");
      mesh.faces.push_back({f[0].get<int>(), f[1].get<int>(), f[2].get<int>()});
    }
    scene.mesh = std::move(mesh);
  }
  scene.validate();
  return scene;
}

ControlScene load_scene(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw Error("malformed scene JSON in " + path.string() + ": " + e.what());
  }
  return scene_from_json(doc);
}

void save_scene(const ControlScene& scene, const std::filesystem::path& path) {
  io::write_file_atomic(path, scene_to_json(scene).dump(2) + "\n");
}

TriangleMesh parse_obj(const std::string& text) {
  TriangleMesh mesh;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 v;
      require(static_cast<bool>(ls >> v.x() >> v.y() >> v.z()),
              "OBJ line " + std::to_string(lineno) + ": bad vertex");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const int raw = std::stoi(tok.substr(0, tok.find('/')));
        const int n = static_cast<int>(mesh.vertices.size());
        idx.push_back(raw < 0 ? n + raw : raw - 1);
      }
      require(idx.size() == 3, "OBJ line " + std::to_string(lineno) + ": only triangles are supported");
      mesh.faces.push_back({idx[0], idx[1], idx[2]});
    }
  }
  mesh.validate();
  return mesh;
}

TriangleMesh load_obj(const std::filesystem::path& path) { return parse_obj(io::read_file(path)); }

}  // namespace sqforge
