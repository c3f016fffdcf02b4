#pragma once

#include "sqforge/flow.hpp"

#include <json.hpp>

#include <vector>

namespace sqforge {

/// Isotropic Gaussian mixture prior over d-vectors.
struct MixturePrior {
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<double> stds;

  int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
  int components() const { return static_cast<int>(weights.size()); }
  /// Throws unless weights are positive and sum to 1 within 1e-12, dims agree, stds ≥ 0.
  void validate() const;

  static MixturePrior point_mass(const Vector& mu);
  nlohmann::json to_json() const;
  static MixturePrior from_json(const nlohmann::json& j);
};

/// Exact E[ε - z0 | z_t = z] for rectified-flow interpolation of the prior with N(0, I).
Vector oracle_velocity(const MixturePrior& prior, const Vector& z, double t);

/// Posterior component responsibilities p(k | z_t = z).
std::vector<double> oracle_responsibilities(const MixturePrior& prior, const Vector& z, double t);

std::vector<Vector> exact_sample(const MixturePrior& prior, int n, std::uint64_t seed);

class MixtureOracleField final : public VelocityField {
 public:
  explicit MixtureOracleField(MixturePrior prior);
  int dim() const override { return prior_.dim(); }
  Vector evaluate(const Vector& z, double t, Condition cond) const override;
  const MixturePrior& prior() const { return prior_; }

 private:
  MixturePrior prior_;
};

}  // namespace sqforge
