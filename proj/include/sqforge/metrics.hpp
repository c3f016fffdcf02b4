#pragma once

#include "sqforge/codec.hpp"
#include "sqforge/flow.hpp"
#include "sqforge/geometry.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace sqforge {

/// Mean squared nearest distance A→B plus B→A. Uses a uniform bucket grid over B and A.
double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b);
/// O(|A||B|) reference scan; equal to chamfer() bit for bit.
double chamfer_brute(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

/// |x ∧ y| / |x ∨ y|, 1 when both are empty.
double voxel_iou(const OccupancyGrid& x, const OccupancyGrid& y);

inline constexpr double kFrechetShrinkage = 1e-6;

/// Fréchet distance between Gaussian fits of the rows of a and b.
double frechet_distance(const Matrix& a, const Matrix& b);

/// Per-row mean and covariance (divisor n − 1).
void gaussian_fit(const Matrix& x, Vector& mean, Matrix& cov);

/// Realism features: per-patch DC channel, 2×2×2 average pooled (64 values at G = 8).
Vector structure_features(const LatentGrid& z);
Matrix feature_matrix(const std::vector<LatentGrid>& zs);

/// Centers of occupied cells with at least one empty 6-neighbor.
std::vector<Vec3> surface_cell_centers(const OccupancyGrid& grid);

/// Control-surface samples per primitive used for faithfulness Chamfer.
inline constexpr int kControlSamplesPerPart = 256;

/// CD×10³ between control surface samples and the structure's surface cells.
double control_chamfer_e3(const ControlScene& normalized_control, const OccupancyGrid& structure,
                          std::uint64_t seed);

struct TradeoffRow {
  int tau0 = 0;
  double t0 = 0;
  double cd_e3 = 0;
  double iou = 0;
  double frechet = 0;
  int n = 0;
};

struct TradeoffReport {
  std::vector<TradeoffRow> rows;
  nlohmann::json meta;

  std::string to_csv() const;
  nlohmann::json to_json() const;
};

/// Summary of a batch of generated structures against their controls and a reference set.
struct BatchEval {
  double cd_e3 = 0;
  double iou = 0;
  double frechet = 0;
  std::vector<double> per_sample_cd_e3;
};

/// Controls must already be normalized into the unit cube.
BatchEval evaluate_batch(const std::vector<ControlScene>& controls, const std::vector<LatentGrid>& generated,
                         const CodecSpec& spec, const Matrix& reference_features, std::uint64_t seed);

struct SweepInput {
  std::vector<ControlScene> controls;  // normalized into the unit cube
  std::vector<TokenId> labels;
  Matrix reference_features;
  std::vector<int> tau0s;
  std::uint64_t seed = 0;
  int min_controls = 32;
};

/// For every τ₀: inject each control at t(τ₀) with a per-control noise fixed across τ₀,
/// denoise, decode and score. Rows come back sorted by τ₀.
TradeoffReport sweep_tau(const VelocityField& field, const CodecSpec& spec, const StepSchedule& schedule,
                         const SweepInput& input, const ProgressFn& progress = {});

/// Batched generation from injected latents, shared by the sweep and baselines.
std::vector<LatentGrid> denoise_batch(const VelocityField& field, const CodecSpec& spec,
                                      const StepSchedule& schedule, const std::vector<LatentGrid>& injected,
                                      int start_index, const std::vector<TokenId>& labels);

}  // namespace sqforge
