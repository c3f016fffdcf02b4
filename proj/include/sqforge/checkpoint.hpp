#pragma once

#include "sqforge/codec.hpp"
#include "sqforge/flow.hpp"
#include "sqforge/nets.hpp"
#include "sqforge/training.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace sqforge {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Trained network plus everything needed to sample from it.
///
/// Binary layout (little-endian): "SCCKPT1", u32 version, u32 net kind, kind-specific
/// u32 dims, u32 vocab, u32 T, f64 λ, u32 R/P/C, train config, u32 block count, then
/// named parameter blocks {str name, u32 rows, u32 cols, f32 data row-major}, then
/// u32 n + n f32 loss-curve values.
struct Checkpoint {
  NetKind kind = NetKind::Structure;
  std::shared_ptr<Network> net;
  TrainConfig config;
  CodecSpec codec;
  StepSchedule schedule;
  std::vector<float> loss_curve;

  std::shared_ptr<const StructureNet> structure() const;
  std::shared_ptr<const ShapeConditionedNet> shape_conditioned() const;
  std::shared_ptr<const AppearanceNet> appearance() const;

  std::string to_bytes() const;
  static Checkpoint from_bytes(const std::string& bytes);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  /// FNV-1a of the serialized bytes, hex.
  std::string id() const;
};

}  // namespace sqforge
