// forge: dataset, training, generation, evaluation and serving front end.

#include "sqforge/binary_io.hpp"
#include "sqforge/config.hpp"
#include "sqforge/pipeline.hpp"
#include "sqforge/scene_io.hpp"
#include "sqforge/service.hpp"
#include "sqforge/vocab.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>

using namespace sqforge;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Config file values fill any option the command line left unset.
struct Overrides {
  std::vector<std::function<void(const Config&)>> fills;

  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& flag, T& var, const std::string& key, const std::string& help) {
    CLI::Option* opt = app->add_option(flag, var, help);
    if (key.empty()) return opt->capture_default_str();
    fills.push_back([app, opt, &var, key](const Config& cfg) {
      if (app->parsed() && opt->count() == 0 && cfg.has(key)) var = cfg.get(key, var);
    });
    return opt->capture_default_str();
  }
  void apply(const Config& cfg) const {
    for (const auto& f : fills) f(cfg);
  }
};

void progress_line(const std::string& what, int done, int total) {
  if (total <= 0) return;
  if (done == total || done % std::max(1, total / 10) == 0)
    std::fprintf(stderr, "%s %d/%d\n", what.c_str(), done, total);
}

void write_json(const fs::path& path, const json& j) { io::write_file_atomic(path, j.dump(2) + "\n"); }

TrainLog train_log(int iterations, bool quiet) {
  if (quiet) return {};
  const int every = std::max(1, iterations / 20);
  return [every, iterations](int it, double loss) {
    if ((it + 1) % every == 0 || it + 1 == iterations)
      std::fprintf(stderr, "iter %d/%d loss %.5f\n", it + 1, iterations, loss);
  };
}

}  // namespace

int main(int argc, char** argv) {
  keep_heap_warm();
  CLI::App app{"forge: training-free spatial control for two-stage voxel flow models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "forge 0.1.0");

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  bool quiet = false;
  app.add_option("--config", config_path, "key=value config file (falls back to $FORGE_CONFIG)");
  app.add_flag("-q,--quiet", quiet, "suppress progress output");

  Overrides ov;
  std::vector<std::pair<CLI::App*, std::string>> out_defaults;
  auto common = [&](CLI::App* sub, const std::string& section, const std::string& out_default) {
    out_defaults.emplace_back(sub, out_default);
    ov.add(sub, "--seed", seed, section + ".seed", "random seed");
    ov.add(sub, "--out", out, section + ".out", "output path");
  };

  // corpus build
  auto* corpus = app.add_subcommand("corpus", "procedural dataset tools");
  corpus->require_subcommand(1);
  auto* corpus_build = corpus->add_subcommand("build", "sample chairs, tables and rockets into a dataset directory");
  int per_category = 320;
  int resolution = 32;
  common(corpus_build, "corpus", "corpus");
  ov.add(corpus_build, "-n,--per-category", per_category, "corpus.per_category", "shapes per category");
  ov.add(corpus_build, "--resolution", resolution, "corpus.resolution", "voxel grid resolution");

  // train
  auto* train = app.add_subcommand("train", "train a velocity model");
  train->require_subcommand(1);
  std::string data_dir = "corpus";
  std::string init_path;
  TrainConfig tc;
  StructureDims sdims;
  AppearanceDims adims;
  auto train_opts = [&](CLI::App* sub, const std::string& section) {
    ov.add(sub, "--data", data_dir, section + ".data", "dataset directory");
    ov.add(sub, "--iters", tc.iterations, section + ".iterations", "optimizer steps");
    ov.add(sub, "--lr", tc.lr, section + ".lr", "learning rate");
    ov.add(sub, "--batch", tc.batch, section + ".batch", "batch size");
  };
  auto* train_structure_cmd = train->add_subcommand("structure", "unconditional structure flow");
  common(train_structure_cmd, "train", "structure.ckpt");
  train_opts(train_structure_cmd, "train");
  ov.add(train_structure_cmd, "--hidden", sdims.hidden, "train.hidden", "trunk width");
  ov.add(train_structure_cmd, "--depth", sdims.depth, "train.depth", "residual blocks");
  auto* train_spicet_cmd = train->add_subcommand("spicet", "shape-conditioned baseline with a cross-attention control pathway");
  common(train_spicet_cmd, "spicet", "spicet.ckpt");
  train_opts(train_spicet_cmd, "spicet");
  ov.add(train_spicet_cmd, "--init", init_path, "spicet.init", "structure checkpoint to start from");
  ov.add(train_spicet_cmd, "--hidden", sdims.hidden, "spicet.hidden", "trunk width when not initialized");
  ov.add(train_spicet_cmd, "--depth", sdims.depth, "spicet.depth", "residual blocks when not initialized");
  auto* train_appearance_cmd = train->add_subcommand("appearance", "per-voxel color flow (batch defaults to 4)");
  common(train_appearance_cmd, "appearance", "appearance.ckpt");
  train_opts(train_appearance_cmd, "appearance");
  ov.add(train_appearance_cmd, "--hidden", adims.hidden, "appearance.hidden", "per-voxel width");
  ov.add(train_appearance_cmd, "--depth", adims.depth, "appearance.depth", "layers");

  // generate
  auto* generate = app.add_subcommand("generate", "generate a structure (and optionally colors) from a control scene");
  std::string structure_path = "structure.ckpt";
  std::string appearance_path;
  std::string scene_path;
  std::string label_text;
  std::string color_text = "white";
  int tau0 = 6;
  common(generate, "generate", "out");
  ov.add(generate, "--checkpoint", structure_path, "generate.checkpoint", "structure checkpoint");
  ov.add(generate, "--appearance", appearance_path, "generate.appearance", "appearance checkpoint; enables coloring");
  ov.add(generate, "--scene", scene_path, "", "control scene JSON")->required();
  ov.add(generate, "--tau0", tau0, "generate.tau0", "injection step index in [0, T]");
  ov.add(generate, "--label", label_text, "generate.label", "category token (defaults to the scene's global label)");
  ov.add(generate, "--color", color_text, "generate.color", "global color token");

  // sweep-tau
  auto* sweep = app.add_subcommand("sweep-tau", "faithfulness/realism tradeoff over injection steps");
  std::string tau_list = "0,5,10,15,20,25";
  int limit = 0;
  common(sweep, "sweep", "sweep");
  ov.add(sweep, "--checkpoint", structure_path, "sweep.checkpoint", "structure checkpoint");
  ov.add(sweep, "--data", data_dir, "sweep.data", "dataset directory (validation split is used)");
  ov.add(sweep, "--tau0", tau_list, "sweep.tau0", "comma-separated injection steps");
  ov.add(sweep, "--limit", limit, "sweep.limit", "max controls (0 = all)");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the validation split");
  std::string eval_tau_list = "6";
  common(eval, "eval", "eval.json");
  ov.add(eval, "--checkpoint", structure_path, "eval.checkpoint", "structure or spicet checkpoint");
  ov.add(eval, "--data", data_dir, "eval.data", "dataset directory");
  ov.add(eval, "--tau0", eval_tau_list, "eval.tau0", "injection steps (structure checkpoints only)");
  ov.add(eval, "--limit", limit, "eval.limit", "max controls (0 = all)");

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP JSON service");
  ServerConfig sc;
  ov.add(serve, "--host", sc.host, "serve.host", "bind address");
  ov.add(serve, "--port", sc.port, "serve.port", "bind port");
  ov.add(serve, "--checkpoint", sc.structure_checkpoint, "serve.structure", "structure checkpoint");
  ov.add(serve, "--appearance", sc.appearance_checkpoint, "serve.appearance", "appearance checkpoint");
  ov.add(serve, "--data", sc.dataset, "serve.dataset", "default dataset for sweeps");
  ov.add(serve, "--max-concurrent", sc.max_concurrent, "serve.max_concurrent", "worker threads");
  ov.add(serve, "--queue", sc.queue_capacity, "serve.queue_capacity", "max pending jobs");
  serve->add_option("--seed", seed, "unused; accepted for uniformity");

  // export-obj
  auto* export_obj = app.add_subcommand("export-obj", "voxel surface mesh of a grid dump, result JSON or scene");
  std::string input_path;
  common(export_obj, "export", "mesh.obj");
  ov.add(export_obj, "--input", input_path, "", "grid dump (.grid), generate result (.json) or scene (.json)")->required();
  ov.add(export_obj, "--resolution", resolution, "export.resolution", "voxelization resolution for scenes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    ov.apply(Config::resolve(config_path));
    for (const auto& [sub, fallback] : out_defaults)
      if (sub->parsed() && out.empty()) out = fallback;

    if (corpus_build->parsed()) {
      require(per_category >= 10, "corpus build: --per-category must be at least 10");
      Dataset ds = Dataset::build(default_categories(), per_category, seed, out, resolution);
      json summary = {{"dir", out}, {"items", ds.items().size()}, {"manifest_hash", ds.manifest_hash()}};
      std::cout << summary.dump() << "\n";
      return 0;
    }

    if (train->parsed()) {
      if (train_appearance_cmd->parsed() && train_appearance_cmd->get_option("--batch")->count() == 0 &&
          !Config::resolve(config_path).has("appearance.batch"))
        tc.batch = 4;
      tc.seed = seed;
      tc.validate();
      Dataset ds = Dataset::load(data_dir);
      Checkpoint ck;
      ck.config = tc;
      ck.codec = CodecSpec(ds.resolution(), 4, 8);
      const TrainLog log = train_log(tc.iterations, quiet);
      if (train_structure_cmd->parsed()) {
        sdims.latent = ck.codec.latent_size();
        auto net = std::make_shared<StructureNet>(sdims, mix_seed(seed, 1));
        ck.loss_curve = train_structure(*net, structure_samples(ds, "train", ck.codec, false), tc, log);
        ck.kind = NetKind::Structure;
        ck.net = net;
      } else if (train_spicet_cmd->parsed()) {
        ControlDims cd;
        cd.coarse = ck.codec.coarse();
        cd.channels = ck.codec.channels();
        std::shared_ptr<ShapeConditionedNet> net;
        if (!init_path.empty()) {
          Checkpoint base = Checkpoint::load(init_path);
          require(base.kind == NetKind::Structure, "train spicet: --init must be a structure checkpoint");
          require(base.codec == ck.codec, "train spicet: --init codec does not match the dataset");
          net = std::make_shared<ShapeConditionedNet>(*base.structure(), cd, mix_seed(seed, 2));
        } else {
          sdims.latent = ck.codec.latent_size();
          net = std::make_shared<ShapeConditionedNet>(sdims, cd, mix_seed(seed, 2));
        }
        net->zero_control_output();
        ck.loss_curve = train_shape_conditioned(*net, structure_samples(ds, "train", ck.codec, true), tc, log);
        ck.kind = NetKind::ShapeConditioned;
        ck.net = net;
      } else {
        auto net = std::make_shared<AppearanceNet>(adims, mix_seed(seed, 3));
        auto samples = appearance_samples(ds, "train");
        ck.loss_curve = train_appearance(*net, samples, tc, log);
        ck.kind = NetKind::Appearance;
        ck.net = net;
      }
      quantize_f32(*ck.net);
      ck.save(out);
      std::cout << json{{"checkpoint", out}, {"id", ck.id()}, {"kind", net_kind_name(ck.kind)},
                        {"final_loss", ck.loss_curve.empty() ? 0.0 : ck.loss_curve.back()}}
                       .dump()
                << "\n";
      return 0;
    }

    if (generate->parsed()) {
      Models models = Models::load(structure_path, appearance_path);
      json body;
      body["scene"] = json::parse(io::read_file(scene_path));
      body["tau0"] = tau0;
      body["seed"] = seed;
      body["color"] = color_text;
      body["want_appearance"] = !appearance_path.empty();
      if (!label_text.empty()) body["label"] = label_text;
      else body["label"] = body["scene"].value("global_label", json(nullptr));
      const GenerateRequest req = parse_generate_request(body, models.schedule());
      const GenerateOutput res = run_generate(models, req, quiet ? ProgressFn{} : [](int d, int t) {
        progress_line("step", d, t);
      });
      fs::create_directories(out);
      json result = generate_result_json(res, req);
      result["timings"] = generate_timings_json(res);
      write_json(fs::path(out) / "result.json", result);
      io::write_file_atomic(fs::path(out) / "structure.grid", grid_to_bytes(res.structure.structure));
      io::write_file_atomic(fs::path(out) / "mesh.obj", mesh_to_obj(res.mesh));
      std::cout << json{{"out", out}, {"occupied", res.structure.structure.count()}, {"cd_e3", res.cd_e3},
                        {"iou_roundtrip", res.iou_roundtrip}, {"steps", res.structure.steps}}
                       .dump()
                << "\n";
      return 0;
    }

    if (sweep->parsed()) {
      Models models = Models::load(structure_path);
      const Dataset ds = Dataset::load(data_dir);
      const TradeoffReport rep = run_sweep(models, ds, parse_int_list(tau_list), seed, limit,
                                           quiet ? ProgressFn{} : [](int d, int t) { progress_line("sample", d, t); });
      fs::create_directories(out);
      io::write_file_atomic(fs::path(out) / "tradeoff.csv", rep.to_csv());
      write_json(fs::path(out) / "tradeoff.json", rep.to_json());
      std::cout << rep.to_csv();
      return 0;
    }

    if (eval->parsed()) {
      const Checkpoint ck = Checkpoint::load(structure_path);
      const Dataset ds = Dataset::load(data_dir);
      json report = {{"checkpoint_id", ck.id()}, {"kind", net_kind_name(ck.kind)},
                     {"dataset_id", ds.manifest_hash()}, {"seed", seed}};
      if (ck.kind == NetKind::ShapeConditioned) {
        const SweepData data = load_sweep_data(ds, ck.codec, limit);
        const BatchEval e = evaluate_shape_conditioned(ck, data, seed);
        report["n"] = data.controls.size();
        report["cd_e3"] = e.cd_e3;
        report["iou"] = e.iou;
        report["frechet"] = std::isfinite(e.frechet) ? json(e.frechet) : json(nullptr);
      } else {
        require(ck.kind == NetKind::Structure, "eval: appearance checkpoints have no structure metrics");
        Models models = Models::load(structure_path);
        report["sweep"] = run_sweep(models, ds, parse_int_list(eval_tau_list), seed, limit).to_json();
      }
      write_json(out, report);
      std::cout << report.dump() << "\n";
      return 0;
    }

    if (serve->parsed()) {
      Service service(sc);
      service.run();
      return 0;
    }

    if (export_obj->parsed()) {
      OccupancyGrid grid;
      const std::string text = io::read_file(input_path);
      if (text.rfind("SCGRD1", 0) == 0) {
        grid = grid_from_bytes(text);
      } else {
        const json doc = json::parse(text);
        if (doc.contains("structure") && doc["structure"].is_object())
          grid = grid_from_bytes(io::base64_decode(doc["structure"].at("base64").get<std::string>()));
        else
          grid = voxelize(normalize_to_unit_cube(scene_from_json(doc)).first, resolution);
      }
      io::write_file_atomic(out, mesh_to_obj(extract_surface(grid)));
      std::cout << json{{"out", out}, {"occupied", grid.count()}, {"faces", exposed_faces(grid)}}.dump() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n') c = ' ';
    std::fprintf(stderr, "forge: %s\n", msg.c_str());
    return 1;
  }
  return 0;
}
