#pragma once

#include "sqforge/appearance.hpp"
#include "sqforge/checkpoint.hpp"
#include "sqforge/corpus.hpp"
#include "sqforge/guidance.hpp"
#include "sqforge/metrics.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sqforge {

/// Loaded, read-only models shared by the CLI and the service.
struct Models {
  Checkpoint structure;
  std::optional<Checkpoint> appearance;
  std::shared_ptr<const VelocityField> field;

  static Models load(const std::string& structure_path, const std::string& appearance_path = "");
  const CodecSpec& codec() const { return structure.codec; }
  const StepSchedule& schedule() const { return structure.schedule; }
};

/// Raised for request validation failures; `field` names the offending input.
class RequestError : public Error {
 public:
  RequestError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct GenerateRequest {
  ControlScene scene;
  int tau0 = 6;
  TokenId label = 0;
  std::uint64_t seed = 0;
  std::vector<TokenId> local_labels;  // overrides the scene's labels when non-empty
  TokenId color = 4;                  // global appearance token
  bool want_appearance = false;
};

/// Validates a JSON body: {scene, tau0, label, seed?, local_labels?, color?, want_appearance?}.
GenerateRequest parse_generate_request(const nlohmann::json& body, const StepSchedule& schedule);
nlohmann::json generate_request_to_json(const GenerateRequest& req);

struct GenerateOutput {
  GenerationResult structure;
  std::optional<ColoredVoxels> appearance;
  ColoredMesh mesh;
  double cd_e3 = 0;
  double iou_roundtrip = 0;
  double appearance_millis = 0;
};

GenerateOutput run_generate(const Models& models, const GenerateRequest& req, const ProgressFn& progress = {});

/// Deterministic payload: base64 grid dump, OBJ text, metrics and config echo (no timings).
nlohmann::json generate_result_json(const GenerateOutput& out, const GenerateRequest& req);
nlohmann::json generate_timings_json(const GenerateOutput& out);

/// Controls, labels and reference features drawn from a dataset's validation split.
struct SweepData {
  std::vector<ControlScene> controls;
  std::vector<TokenId> labels;
  std::vector<LatentGrid> reference;
};

/// `limit` ≤ 0 keeps every validation item. Controls are coarsened scenes.
SweepData load_sweep_data(const Dataset& ds, const CodecSpec& spec, int limit = 0);

TradeoffReport run_sweep(const Models& models, const Dataset& ds, const std::vector<int>& tau0s,
                         std::uint64_t seed, int limit = 0, const ProgressFn& progress = {});

/// Encoded training pairs from a split. With `with_control`, each sample also carries the
/// encoded voxelization of its coarsened scene.
std::vector<StructureSample> structure_samples(const Dataset& ds, const std::string& split, const CodecSpec& spec,
                                               bool with_control);

/// Colored voxel sets with per-part local tokens; global token = the shape's main color.
std::vector<AppearanceSample> appearance_samples(const Dataset& ds, const std::string& split);

/// Evaluates a shape-conditioned checkpoint at its single operating point (full denoising
/// from noise, conditioned on each encoded control).
BatchEval evaluate_shape_conditioned(const Checkpoint& ck, const SweepData& data, std::uint64_t seed);

std::vector<int> parse_int_list(const std::string& text);

}  // namespace sqforge
