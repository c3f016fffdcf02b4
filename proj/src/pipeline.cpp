#include "sqforge/pipeline.hpp"

#include "sqforge/binary_io.hpp"
#include "sqforge/scene_io.hpp"
#include "sqforge/vocab.hpp"

#include <chrono>
#include <sstream>

namespace sqforge {

using nlohmann::json;

Models Models::load(const std::string& structure_path, const std::string& appearance_path) {
  Models m;
  m.structure = Checkpoint::load(structure_path);
  require(m.structure.kind == NetKind::Structure, "structure checkpoint holds a " +
                                                      std::string(net_kind_name(m.structure.kind)) + " net");
  m.field = std::make_shared<StructureField>(m.structure.structure());
  if (!appearance_path.empty()) {
    m.appearance = Checkpoint::load(appearance_path);
    require(m.appearance->kind == NetKind::Appearance, "appearance checkpoint holds a " +
                                                           std::string(net_kind_name(m.appearance->kind)) + " net");
    require(m.appearance->codec == m.structure.codec, "structure and appearance checkpoints disagree on the codec");
  }
  return m;
}

namespace {

TokenId token_field(const json& body, const std::string& name, TokenId fallback, bool required) {
  auto it = body.find(name);
  if (it == body.end() || it->is_null()) {
    if (required) throw RequestError(name, "is required");
    return fallback;
  }
  TokenId id = -1;
  try {
    if (it->is_number_integer()) id = it->get<int>();
    else if (it->is_string()) id = vocab::parse(it->get<std::string>());
    else throw RequestError(name, "must be a token name or id");
  } catch (const RequestError&) {
    throw;
  } catch (const std::exception& e) {
    throw RequestError(name, e.what());
  }
  if (id < 0 || id >= vocab::kSize) throw RequestError(name, "unknown token id " + std::to_string(id));
  return id;
}

}  // namespace

GenerateRequest parse_generate_request(const json& body, const StepSchedule& schedule) {
  if (!body.is_object()) throw RequestError("body", "must be a JSON object");
  GenerateRequest req;
  auto scene_it = body.find("scene");
  if (scene_it == body.end()) throw RequestError("scene", "is required");
  try {
    req.scene = scene_from_json(*scene_it);
    req.scene.validate();
  } catch (const std::exception& e) {
    throw RequestError("scene", e.what());
  }
  auto tau_it = body.find("tau0");
  if (tau_it == body.end()) throw RequestError("tau0", "is required");
  if (!tau_it->is_number_integer()) throw RequestError("tau0", "must be an integer");
  req.tau0 = tau_it->get<int>();
  if (req.tau0 < 0 || req.tau0 > schedule.steps())
    throw RequestError("tau0", "must lie in [0, " + std::to_string(schedule.steps()) + "], got " +
                                   std::to_string(req.tau0));
  req.label = token_field(body, "label", vocab::kNull, true);
  if (auto it = body.find("seed"); it != body.end() && !it->is_null()) {
    if (!it->is_number_unsigned()) throw RequestError("seed", "must be a non-negative integer");
    req.seed = it->get<std::uint64_t>();
  }
  if (auto it = body.find("local_labels"); it != body.end() && !it->is_null()) {
    if (!it->is_array()) throw RequestError("local_labels", "must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      json one = {{"v", (*it)[i]}};
      req.local_labels.push_back(token_field(one, "v", 0, true));
    }
    if (req.local_labels.size() != req.scene.primitives.size())
      throw RequestError("local_labels", "need one label per primitive (" +
                                             std::to_string(req.scene.primitives.size()) + ")");
  }
  req.color = token_field(body, "color", vocab::kWhite, false);
  if (auto it = body.find("want_appearance"); it != body.end() && !it->is_null()) {
    if (!it->is_boolean()) throw RequestError("want_appearance", "must be a boolean");
    req.want_appearance = it->get<bool>();
  }
  return req;
}

json generate_request_to_json(const GenerateRequest& req) {
  json j = {{"scene", scene_to_json(req.scene)}, {"tau0", req.tau0},   {"label", req.label},
            {"seed", req.seed},                  {"color", req.color}, {"want_appearance", req.want_appearance}};
  if (!req.local_labels.empty()) j["local_labels"] = req.local_labels;
  return j;
}

GenerateOutput run_generate(const Models& models, const GenerateRequest& req, const ProgressFn& progress) {
  GuidanceConfig cfg;
  cfg.tau0 = req.tau0;
  cfg.label = req.label;
  cfg.seed = req.seed;
  cfg.schedule = models.schedule();
  GenerateOutput out;
  out.structure = generate_structure(req.scene, *models.field, models.codec(), cfg, progress);
  const ControlScene normalized = out.structure.placement.apply(req.scene);
  const OccupancyGrid& s = out.structure.structure;
  out.iou_roundtrip = voxel_iou(s, roundtrip(out.structure.control, models.codec()));
  out.cd_e3 = control_chamfer_e3(normalized, s, req.seed);
  if (s.count() == 0) {
    // Nothing to color or mesh; keep the payload well-formed.
    return out;
  }
  std::vector<Vec3> colors;
  if (req.want_appearance) {
    require(models.appearance.has_value(), "appearance requested but no appearance checkpoint is loaded");
    const auto start = std::chrono::steady_clock::now();
    VoxelConditioning cond;
    cond.global = req.color;
    ControlScene labelled = normalized;
    if (!req.local_labels.empty()) labelled.local_labels = req.local_labels;
    if (labelled.has_local_labels()) cond.local = assign_local_tokens(s, labelled);
    out.appearance = generate_appearance(s, models.appearance->appearance(), cond, mix_seed(req.seed, 7),
                                         models.appearance->schedule);
    colors = out.appearance->colors;
    out.appearance_millis =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  out.mesh = extract_surface(s, colors);
  return out;
}

json generate_result_json(const GenerateOutput& out, const GenerateRequest& req) {
  const auto& r = out.structure;
  json j;
  j["structure"] = {{"format", "SCGRD1"}, {"base64", io::base64_encode(grid_to_bytes(r.structure))},
                    {"occupied", r.structure.count()}};
  j["mesh"] = out.mesh.faces.empty() ? json(nullptr) : json(mesh_to_obj(out.mesh));
  j["metrics"] = {{"cd_e3", out.cd_e3}, {"iou_roundtrip", out.iou_roundtrip}};
  j["config"] = r.config.to_json();
  j["config"]["want_appearance"] = req.want_appearance;
  j["config"]["color"] = req.color;
  j["placement"] = r.placement.to_json();
  j["steps"] = r.steps;
  if (out.appearance) {
    json colors = json::array();
    for (const auto& c : out.appearance->colors) colors.push_back({c.x(), c.y(), c.z()});
    j["appearance"] = {{"colors", colors}};
  }
  return j;
}

json generate_timings_json(const GenerateOutput& out) {
  return {{"structure_ms", out.structure.millis}, {"appearance_ms", out.appearance_millis}};
}

SweepData load_sweep_data(const Dataset& ds, const CodecSpec& spec, int limit) {
  require(ds.resolution() == spec.resolution(), "dataset resolution does not match the checkpoint codec");
  SweepData d;
  for (const auto& item : ds.split("val")) {
    if (limit > 0 && static_cast<int>(d.controls.size()) >= limit) break;
    d.controls.push_back(coarsen(ds.scene(item)));
    d.labels.push_back(item.category);
    d.reference.push_back(encode(ds.grid(item), spec));
  }
  return d;
}

TradeoffReport run_sweep(const Models& models, const Dataset& ds, const std::vector<int>& tau0s,
                         std::uint64_t seed, int limit, const ProgressFn& progress) {
  SweepData data = load_sweep_data(ds, models.codec(), limit);
  SweepInput in;
  in.controls = std::move(data.controls);
  in.labels = std::move(data.labels);
  in.reference_features = feature_matrix(data.reference);
  in.tau0s = tau0s;
  in.seed = seed;
  TradeoffReport rep = sweep_tau(*models.field, models.codec(), models.schedule(), in, progress);
  rep.meta["checkpoint_id"] = models.structure.id();
  rep.meta["dataset_id"] = ds.manifest_hash();
  return rep;
}

std::vector<StructureSample> structure_samples(const Dataset& ds, const std::string& split, const CodecSpec& spec,
                                               bool with_control) {
  require(ds.resolution() == spec.resolution(), "dataset resolution does not match the codec");
  std::vector<StructureSample> out;
  for (const auto& item : ds.split(split)) {
    StructureSample s;
    s.latent = encode(ds.grid(item), spec).values;
    s.label = item.category;
    if (with_control) s.control = encode(voxelize(coarsen(ds.scene(item)), spec.resolution()), spec).values;
    out.push_back(std::move(s));
  }
  require(!out.empty(), "dataset split '" + split + "' is empty");
  return out;
}

std::vector<AppearanceSample> appearance_samples(const Dataset& ds, const std::string& split) {
  std::vector<AppearanceSample> out;
  for (const auto& item : ds.split(split)) {
    const Shape shape = ds.shape(item);
    AppearanceSample s;
    s.cells = shape.grid.active_cells();
    s.resolution = shape.grid.resolution();
    s.colors = shape.voxel_colors;
    s.cond.global = shape.main_color;
    s.cond.local = shape.voxel_labels;
    s.ctx = make_voxel_context(s.cells, s.resolution);
    out.push_back(std::move(s));
  }
  require(!out.empty(), "dataset split '" + split + "' is empty");
  return out;
}

BatchEval evaluate_shape_conditioned(const Checkpoint& ck, const SweepData& data, std::uint64_t seed) {
  const CodecSpec& spec = ck.codec;
  Matrix controls(static_cast<Eigen::Index>(data.controls.size()), spec.latent_size());
  std::vector<LatentGrid> noise;
  for (std::size_t i = 0; i < data.controls.size(); ++i) {
    controls.row(static_cast<Eigen::Index>(i)) =
        encode(voxelize(data.controls[i], spec.resolution()), spec).values.transpose();
    noise.push_back(latent_noise(spec, mix_seed(seed, i)));
  }
  ShapeConditionedField field(ck.shape_conditioned(), std::move(controls));
  const auto gen = denoise_batch(field, spec, ck.schedule, noise, 0, data.labels);
  return evaluate_batch(data.controls, gen, spec, feature_matrix(data.reference), seed);
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(tok, &used));
      require(used == tok.size(), "");
    } catch (const std::exception&) {
      throw Error("expected a comma-separated integer list, got '" + text + "'");
    }
  }
  require(!out.empty(), "empty integer list");
  return out;
}

}  // namespace sqforge
