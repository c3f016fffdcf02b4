#pragma once

#include "sqforge/codec.hpp"
#include "sqforge/flow.hpp"
#include "sqforge/geometry.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace sqforge {

/// Isotropic similarity p' = scale·p + offset.
struct PlacementTransform {
  double scale = 1.0;
  Vec3 offset = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return scale * p + offset; }
  Vec3 invert(const Vec3& p) const { return (p - offset) / scale; }
  PlacementTransform inverse() const { return {1.0 / scale, -offset / scale}; }

  Superquadric apply(const Superquadric& q) const;
  ControlScene apply(const ControlScene& scene) const;
  nlohmann::json to_json() const;
};

inline constexpr double kUnitCubeMargin = 0.05;

/// Maps the scene bounds into [0.05, 0.95]³, centered, preserving aspect ratio.
/// Returns the normalized scene and the transform that was applied.
std::pair<ControlScene, PlacementTransform> normalize_to_unit_cube(const ControlScene& scene);

/// t0·z1 + (1 − t0)·z_c0.
LatentGrid inject(const LatentGrid& z_c0, const LatentGrid& z1, double t0);

struct GuidanceConfig {
  int tau0 = 6;
  TokenId label = 0;
  std::uint64_t seed = 0;
  StepSchedule schedule;

  /// Injection time; larger τ₀ means fewer denoising steps and closer adherence.
  double t0() const { return schedule.t(tau0); }
  void validate() const;
  nlohmann::json to_json() const;
};

struct GenerationResult {
  OccupancyGrid control;    // voxelized normalized control
  OccupancyGrid structure;  // decode(denoised)
  LatentGrid injected;
  LatentGrid denoised;
  PlacementTransform placement;  // world → unit cube
  double t0 = 1.0;
  int steps = 0;
  double millis = 0.0;
  GuidanceConfig config;
};

/// Standard-normal latent noise for a seed.
LatentGrid latent_noise(const CodecSpec& spec, std::uint64_t seed);

/// normalize → voxelize → encode → inject at t(τ₀) → integrate to 0 → decode.
GenerationResult generate_structure(const ControlScene& scene, const VelocityField& field,
                                    const CodecSpec& spec, const GuidanceConfig& config,
                                    const ProgressFn& progress = {});

struct SceneObjectResult {
  std::optional<GenerationResult> result;
  std::string error;
};

/// Generates each object independently; object i uses seed mix_seed(config.seed, i).
std::vector<SceneObjectResult> generate_scene(const std::vector<ControlScene>& objects,
                                              const VelocityField& field, const CodecSpec& spec,
                                              const GuidanceConfig& config);

/// World-space bounds of a generated structure's occupied cells (cell-box extents).
std::pair<Vec3, Vec3> placed_bounds(const GenerationResult& r);

}  // namespace sqforge
