#pragma once

#include "sqforge/autograd.hpp"
#include "sqforge/flow.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace sqforge {

enum class NetKind : std::uint32_t { Structure = 0, ShapeConditioned = 1, Appearance = 2 };

std::string_view net_kind_name(NetKind kind);

/// 16 sinusoidal features of t at 8 geometric frequencies in [1, 10³].
Matrix time_features(const std::vector<double>& t);

/// 12-dim code of a point in [0,1]³: sin/cos of π p and 2π p per axis.
Eigen::Matrix<double, 1, 12> position_features(const Vec3& p);

/// Owner of named trainable tensors.
class Network {
 public:
  virtual ~Network() = default;
  virtual NetKind kind() const = 0;

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
  ad::Parameter& parameter(const std::string& name);
  std::size_t parameter_count() const;
  void zero_grad();
  /// Adds the tape's parameter-leaf gradients for this network into Parameter::grad.
  void accumulate_grads(const ad::Tape& tape);

 protected:
  ad::Parameter& add_param(std::string name, Matrix value);
  const ad::Parameter& get(const std::string& name) const;
  std::vector<std::unique_ptr<ad::Parameter>> params_;
};

struct StructureDims {
  int latent = 4096;  // G³·C
  int hidden = 256;
  int depth = 4;
  int vocab = 9;  // includes the null token
  int cond_width = 32;
};

/// Residual MLP velocity field over flattened structure latents.
class StructureNet : public Network {
 public:
  StructureNet(const StructureDims& dims, std::uint64_t seed);
  NetKind kind() const override { return NetKind::Structure; }
  const StructureDims& dims() const { return dims_; }

  /// z: N×latent, one time and condition per row.
  ad::Var forward(ad::Tape& tape, const Matrix& z, const std::vector<double>& t,
                  const std::vector<TokenId>& cond) const;

 protected:
  // Residual trunk through the output projection; `hook` runs before each block.
  ad::Var run(ad::Tape& tape, const Matrix& z, const std::vector<double>& t,
              const std::vector<TokenId>& cond,
              const std::function<ad::Var(ad::Var, int)>& hook) const;

  StructureDims dims_;
};

struct ControlDims {
  int coarse = 8;
  int channels = 8;
  int token_width = 8;
};

/// StructureNet plus one single-head cross-attention per residual block, attending
/// from the hidden state (as H/token_width tokens) to the encoded control latent.
class ShapeConditionedNet : public StructureNet {
 public:
  ShapeConditionedNet(const StructureDims& dims, const ControlDims& control, std::uint64_t seed);
  /// Copies every shared parameter from `base`; control pathway keeps its own init.
  ShapeConditionedNet(const StructureNet& base, const ControlDims& control, std::uint64_t seed);

  NetKind kind() const override { return NetKind::ShapeConditioned; }
  const ControlDims& control_dims() const { return control_; }

  /// control: N×(G³·C) encoded control latents.
  ad::Var forward(ad::Tape& tape, const Matrix& z, const std::vector<double>& t,
                  const std::vector<TokenId>& cond, const Matrix& control) const;

  /// Zeroes every cross-attention output projection.
  void zero_control_output();

 private:
  void add_control_params(std::uint64_t seed);
  Matrix control_tokens(const Matrix& control) const;

  ControlDims control_;
};

struct AppearanceDims {
  int channels = 8;
  int hidden = 64;
  int depth = 3;
  int vocab = 9;
  int prompt_len = 4;  // embedding vectors per token
  int attn_width = 32;
};

/// Per-voxel blended conditioning: each voxel attends to the global token and to its local token.
struct VoxelConditioning {
  TokenId global = 0;
  std::vector<TokenId> local;  // one per active voxel; empty disables local control
};

/// Per-voxel geometry inputs shared by all denoising steps.
struct VoxelContext {
  Matrix positions;  // L×12 positional features
  std::shared_ptr<const ad::SparseMatrix> neighbor_mean;  // L×L mean over active 6-neighbors
  int count() const { return static_cast<int>(positions.rows()); }
};

VoxelContext make_voxel_context(const std::vector<std::array<int, 3>>& cells, int resolution);

class AppearanceNet : public Network {
 public:
  AppearanceNet(const AppearanceDims& dims, std::uint64_t seed);
  NetKind kind() const override { return NetKind::Appearance; }
  const AppearanceDims& dims() const { return dims_; }

  /// s: L×channels features at time t for one structure.
  ad::Var forward(ad::Tape& tape, const Matrix& s, double t, const VoxelContext& ctx,
                  const VoxelConditioning& cond) const;

  /// 0.5·CA(h, global) + 0.5·CA(h, local_i) for layer `layer`, including the output projection.
  ad::Var blended_attention(ad::Tape& tape, ad::Var hidden, const VoxelConditioning& cond,
                            int layer) const;
  /// Single-token cross-attention CA(h, token) for layer `layer`.
  ad::Var token_attention(ad::Tape& tape, ad::Var hidden, const std::vector<TokenId>& tokens,
                          int layer) const;

 private:
  AppearanceDims dims_;
};

/// Structure-stage field; bound to a network, read-only during evaluation.
class StructureField final : public VelocityField {
 public:
  explicit StructureField(std::shared_ptr<const StructureNet> net) : net_(std::move(net)) {}
  int dim() const override { return net_->dims().latent; }
  Matrix evaluate_batch(const Matrix& z, double t, const std::vector<Condition>& conds) const override;

 private:
  std::shared_ptr<const StructureNet> net_;
};

/// Spice-E-T style field bound to one encoded control latent per batch row.
class ShapeConditionedField final : public VelocityField {
 public:
  ShapeConditionedField(std::shared_ptr<const ShapeConditionedNet> net, Matrix controls)
      : net_(std::move(net)), controls_(std::move(controls)) {}
  int dim() const override { return net_->dims().latent; }
  Matrix evaluate_batch(const Matrix& z, double t, const std::vector<Condition>& conds) const override;

 private:
  std::shared_ptr<const ShapeConditionedNet> net_;
  Matrix controls_;
};

/// Appearance field over flattened L×channels features of one structure.
class AppearanceField final : public VelocityField {
 public:
  AppearanceField(std::shared_ptr<const AppearanceNet> net, VoxelContext ctx, VoxelConditioning cond)
      : net_(std::move(net)), ctx_(std::move(ctx)), cond_(std::move(cond)) {}
  int dim() const override { return ctx_.count() * net_->dims().channels; }
  Vector evaluate(const Vector& z, double t, Condition cond) const override;

 private:
  std::shared_ptr<const AppearanceNet> net_;
  VoxelContext ctx_;
  VoxelConditioning cond_;
};

}  // namespace sqforge
