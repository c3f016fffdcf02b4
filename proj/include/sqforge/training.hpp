#pragma once

#include "sqforge/nets.hpp"

#include <functional>
#include <vector>

namespace sqforge {

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch = 32;
  int iterations = 20000;
  std::uint64_t seed = 0;

  void validate() const;
};

/// First/second-moment optimizer over a network's parameters.
class Adam {
 public:
  Adam(Network& net, const TrainConfig& cfg);
  void step();

 private:
  std::vector<ad::Parameter*> params_;
  std::vector<Matrix> m_, v_;
  TrainConfig cfg_;
  long long t_ = 0;
};

/// One batch of flow-matching regression pairs; rows are samples.
struct FlowBatch {
  std::vector<int> ids;  // source sample index, used to fix reduction order
  Matrix z0;
  Matrix eps;
  std::vector<double> t;
  std::vector<TokenId> cond;
  Matrix control;  // empty unless the net is shape-conditioned

  /// Sorts rows by id so the loss is independent of the order samples were drawn in.
  void canonicalize();
};

/// ‖net(forward_noise(z0, eps, t), t, c) − (eps − z0)‖² / element count for one sample.
double flow_matching_loss(const StructureNet& net, const Vector& z0, const Vector& eps, double t,
                          TokenId cond);

/// Mean squared velocity error over a canonicalized batch; accumulates gradients when asked.
double batch_loss(StructureNet& net, FlowBatch batch, bool accumulate_grad);
double batch_loss(ShapeConditionedNet& net, FlowBatch batch, bool accumulate_grad);

struct StructureSample {
  Vector latent;
  TokenId label = 0;
  Vector control;  // encoded control, for the shape-conditioned net
};

/// Colored active-voxel set with per-voxel conditioning, for the appearance stage.
struct AppearanceSample {
  std::vector<std::array<int, 3>> cells;
  int resolution = 32;
  std::vector<Vec3> colors;
  VoxelConditioning cond;
  VoxelContext ctx;  // built lazily by the trainer when empty
};

struct AppearanceItem {
  const AppearanceSample* sample;
  Matrix eps;
  double t;
};

/// Per-voxel appearance target: logit(rgb) in channels 0..2, zeros elsewhere.
Matrix appearance_target(const std::vector<Vec3>& colors, int channels);

double appearance_loss(AppearanceNet& net, const std::vector<AppearanceItem>& items, bool accumulate_grad);

using TrainLog = std::function<void(int iteration, double loss)>;

/// Returns the per-iteration loss curve. Throws with the iteration number on divergence.
std::vector<float> train_structure(StructureNet& net, const std::vector<StructureSample>& data,
                                   const TrainConfig& cfg, const TrainLog& log = {});
std::vector<float> train_shape_conditioned(ShapeConditionedNet& net,
                                           const std::vector<StructureSample>& data,
                                           const TrainConfig& cfg, const TrainLog& log = {});
std::vector<float> train_appearance(AppearanceNet& net, std::vector<AppearanceSample>& data,
                                    const TrainConfig& cfg, const TrainLog& log = {});

/// Rounds every parameter to f32 so in-memory nets match their checkpoint exactly.
void quantize_f32(Network& net);

}  // namespace sqforge
