#include "sqforge/pipeline.hpp"
#include "sqforge/scene_io.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

namespace py = pybind11;
using namespace sqforge;
using nlohmann::json;

namespace {

using GridArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;

// Arrays are indexed [z, y, x], matching the grid's cell order.
GridArray to_array(const OccupancyGrid& g) {
  const auto r = static_cast<py::ssize_t>(g.resolution());
  GridArray a({r, r, r});
  bool* out = a.mutable_data();
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i];
  return a;
}

OccupancyGrid from_array(const GridArray& a) {
  if (a.ndim() != 3 || a.shape(0) != a.shape(1) || a.shape(1) != a.shape(2))
    throw Error("occupancy arrays must be cubic (R, R, R)");
  OccupancyGrid g(static_cast<int>(a.shape(0)));
  const bool* in = a.data();
  for (std::size_t i = 0; i < g.size(); ++i) g.set(i, in[i]);
  return g;
}

ControlScene scene_arg(const std::string& text) { return scene_from_json(json::parse(text)); }

CodecSpec codec_for(int resolution) { return CodecSpec(resolution, 4, 8); }

const CategorySpec& category_named(const std::string& name) {
  for (const auto& c : default_categories())
    if (c.name == name) return category_by_token(c.token);
  throw Error("unknown category: " + name);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spatially controlled voxel generation with rectified flows";

  py::register_exception<Error>(m, "SqforgeError", PyExc_ValueError);

  m.def("sample_shape", [](const std::string& category, std::uint64_t seed, int resolution) {
        const Shape s = sample_shape(category_named(category), seed, resolution);
        return py::make_tuple(scene_to_json(s.scene).dump(), to_array(s.grid));
      },
      py::arg("category"), py::arg("seed"), py::arg("resolution") = 32,
      "Procedural shape as (scene JSON text, occupancy array).");

  m.def("voxelize", [](const std::string& scene, int resolution, bool normalize) {
        ControlScene s = scene_arg(scene);
        if (normalize) s = normalize_to_unit_cube(s).first;
        return to_array(voxelize(s, resolution));
      },
      py::arg("scene"), py::arg("resolution") = 32, py::arg("normalize") = true);

  m.def("encode", [](const GridArray& grid) {
        const OccupancyGrid g = from_array(grid);
        return Vector(encode(g, codec_for(g.resolution())).values);
      },
      py::arg("grid"), "Flattened latent of length (R/4)^3 * 8.");

  m.def("decode", [](const Vector& latent, int resolution) {
        const CodecSpec spec = codec_for(resolution);
        return to_array(decode(LatentGrid(spec.coarse(), spec.channels(), latent), spec));
      },
      py::arg("latent"), py::arg("resolution") = 32);

  m.def("roundtrip", [](const GridArray& grid) {
        const OccupancyGrid g = from_array(grid);
        return to_array(roundtrip(g, codec_for(g.resolution())));
      },
      py::arg("grid"));

  m.def("chamfer", [](const Matrix& a, const Matrix& b) {
        auto pts = [](const Matrix& x) {
          if (x.cols() != 3) throw Error("point arrays must have shape (n, 3)");
          std::vector<Vec3> v;
          for (Eigen::Index i = 0; i < x.rows(); ++i) v.emplace_back(x(i, 0), x(i, 1), x(i, 2));
          return v;
        };
        return chamfer(pts(a), pts(b));
      },
      py::arg("a"), py::arg("b"), "Sum of mean squared nearest-neighbor distances in both directions.");

  m.def("voxel_iou", [](const GridArray& a, const GridArray& b) { return voxel_iou(from_array(a), from_array(b)); },
        py::arg("a"), py::arg("b"));

  m.def("frechet_distance", &frechet_distance, py::arg("a"), py::arg("b"));

  m.def("build_corpus", [](const std::string& dir, int per_category, std::uint64_t seed) {
        return Dataset::build(default_categories(), per_category, seed, dir).manifest_hash();
      },
      py::arg("dir"), py::arg("per_category"), py::arg("seed"), "Writes a dataset and returns its manifest hash.");

  m.def("generate", [](const std::string& checkpoint, const std::string& request, const std::string& appearance) {
        Models models = Models::load(checkpoint, appearance);
        const GenerateRequest req = parse_generate_request(json::parse(request), models.schedule());
        GenerateOutput out;
        {
          py::gil_scoped_release release;
          out = run_generate(models, req);
        }
        return py::make_tuple(to_array(out.structure.structure), generate_result_json(out, req).dump());
      },
      py::arg("checkpoint"), py::arg("request"), py::arg("appearance") = "",
      "Runs one request; returns (structure array, result JSON text).");

  m.def("sweep", [](const std::string& checkpoint, const std::string& dataset, const std::vector<int>& tau0s,
                    std::uint64_t seed, int limit) {
        Models models = Models::load(checkpoint);
        const Dataset ds = Dataset::load(dataset);
        py::gil_scoped_release release;
        return run_sweep(models, ds, tau0s, seed, limit).to_csv();
      },
      py::arg("checkpoint"), py::arg("dataset"), py::arg("tau0s"), py::arg("seed") = 0, py::arg("limit") = 0,
      "Tradeoff table as CSV text.");

  m.def("train_structure", [](const std::string& dataset, const std::string& out, int iterations, int hidden, int depth,
                              std::uint64_t seed) {
        const Dataset ds = Dataset::load(dataset);
        Checkpoint ck;
        ck.codec = codec_for(ds.resolution());
        ck.config.iterations = iterations;
        ck.config.seed = seed;
        StructureDims d;
        d.latent = ck.codec.latent_size();
        d.hidden = hidden;
        d.depth = depth;
        auto net = std::make_shared<StructureNet>(d, mix_seed(seed, 1));
        {
          py::gil_scoped_release release;
          ck.loss_curve = train_structure(*net, structure_samples(ds, "train", ck.codec, false), ck.config);
        }
        quantize_f32(*net);
        ck.net = net;
        ck.save(out);
        return ck.id();
      },
      py::arg("dataset"), py::arg("out"), py::arg("iterations"), py::arg("hidden") = 256, py::arg("depth") = 4,
      py::arg("seed") = 0, "Same recipe as `forge train structure`; returns the checkpoint id.");
}
