#include "sqforge/guidance.hpp"

#include <chrono>
#include <random>

namespace sqforge {

Superquadric PlacementTransform::apply(const Superquadric& q) const {
  Superquadric out = q;
  out.scale = q.scale * scale;
  out.translation = apply(q.translation);
  return out;
}

ControlScene PlacementTransform::apply(const ControlScene& scene) const {
  ControlScene out = scene;
  for (auto& q : out.primitives) q = apply(q);
  if (out.mesh)
    for (auto& v : out.mesh->vertices) v = apply(v);
  return out;
}

nlohmann::json PlacementTransform::to_json() const {
  return {{"scale", scale}, {"offset", {offset.x(), offset.y(), offset.z()}}};
}

std::pair<ControlScene, PlacementTransform> normalize_to_unit_cube(const ControlScene& scene) {
  const auto [lo, hi] = scene.bounds();
  require(lo.allFinite() && hi.allFinite(), "normalize: scene has no geometry");
  const double extent = (hi - lo).maxCoeff();
  require(extent > 1e-12, "normalize: scene has zero extent");
  PlacementTransform tf;
  tf.scale = (1.0 - 2 * kUnitCubeMargin) / extent;
  tf.offset = Vec3::Constant(0.5) - tf.scale * (lo + hi) / 2;
  return {tf.apply(scene), tf};
}

LatentGrid inject(const LatentGrid& z_c0, const LatentGrid& z1, double t0) {
  require(z_c0.coarse == z1.coarse && z_c0.channels == z1.channels && z_c0.values.size() == z1.values.size(),
          "inject: latent shapes differ");
  require(t0 >= 0.0 && t0 <= 1.0, "inject: t0 must lie in [0, 1]");
  LatentGrid out(z_c0.coarse, z_c0.channels);
  out.values = t0 * z1.values + (1.0 - t0) * z_c0.values;
  return out;
}

void GuidanceConfig::validate() const {
  require(tau0 >= 0 && tau0 <= schedule.steps(),
          "tau0 must lie in [0, " + std::to_string(schedule.steps()) + "], got " + std::to_string(tau0));
}

nlohmann::json GuidanceConfig::to_json() const {
  return {{"tau0", tau0}, {"t0", t0()}, {"label", label}, {"seed", seed},
          {"T", schedule.steps()}, {"lambda", schedule.lambda()}};
}

LatentGrid latent_noise(const CodecSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LatentGrid z(spec.coarse(), spec.channels());
  for (Eigen::Index i = 0; i < z.values.size(); ++i) z.values[i] = normal(rng);
  return z;
}

GenerationResult generate_structure(const ControlScene& scene, const VelocityField& field,
                                    const CodecSpec& spec, const GuidanceConfig& config,
                                    const ProgressFn& progress) {
  config.validate();
  require(field.dim() == spec.latent_size(), "generate: field width does not match the codec");
  const auto start = std::chrono::steady_clock::now();
  GenerationResult r;
  r.config = config;
  ControlScene normalized;
  std::tie(normalized, r.placement) = normalize_to_unit_cube(scene);
  r.control = voxelize(normalized, spec.resolution());
  r.t0 = config.t0();
  r.injected = inject(encode(r.control, spec), latent_noise(spec, config.seed), r.t0);
  r.steps = config.schedule.steps() - config.tau0;
  Vector z = integrate(r.injected.values, field, config.schedule, config.tau0, config.label, progress);
  r.denoised = LatentGrid(spec.coarse(), spec.channels(), std::move(z));
  r.structure = decode(r.denoised, spec);
  r.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<SceneObjectResult> generate_scene(const std::vector<ControlScene>& objects,
                                              const VelocityField& field, const CodecSpec& spec,
                                              const GuidanceConfig& config) {
  std::vector<SceneObjectResult> out(objects.size());
  for (std::size_t i = 0; i < objects.size(); ++i) {
    GuidanceConfig c = config;
    c.seed = mix_seed(config.seed, i);
    try {
      out[i].result = generate_structure(objects[i], field, spec, c);
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  }
  return out;
}

std::pair<Vec3, Vec3> placed_bounds(const GenerationResult& r) {
  const int res = r.structure.resolution();
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& c : r.structure.active_cells()) {
    const Vec3 a = Vec3(c[0], c[1], c[2]) / res;
    lo = lo.cwiseMin(a);
    hi = hi.cwiseMax(a + Vec3::Constant(1.0 / res));
  }
  require(lo.allFinite(), "placed_bounds: empty structure");
  return {r.placement.invert(lo), r.placement.invert(hi)};
}

}  // namespace sqforge
