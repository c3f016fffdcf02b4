#pragma once

#include "sqforge/common.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace sqforge {

using Condition = std::optional<TokenId>;

/// Time-dependent velocity field v(z, t, condition).
///
/// Implementations must be deterministic and safe for concurrent const calls.
class VelocityField {
 public:
  virtual ~VelocityField() = default;

  virtual int dim() const = 0;
  virtual Vector evaluate(const Vector& z, double t, Condition cond) const;
  /// Rows of `z` are independent states; one condition per row.
  virtual Matrix evaluate_batch(const Matrix& z, double t, const std::vector<Condition>& conds) const;
};

/// Discretized λ-rescaled times t(0)=1 > t(1) > ... > t(T)=0.
class StepSchedule {
 public:
  StepSchedule() : StepSchedule(25, 3.0) {}
  StepSchedule(int steps, double lambda);

  int steps() const { return steps_; }
  double lambda() const { return lambda_; }
  double t(int index) const { return times_.at(static_cast<std::size_t>(index)); }
  const std::vector<double>& times() const { return times_; }

  /// Linear time t_lin = 1 - index/T mapped through λ t / (1 + (λ-1) t).
  static double rescale(double t_lin, double lambda);

 private:
  int steps_;
  double lambda_;
  std::vector<double> times_;
};

inline StepSchedule make_schedule(int steps, double lambda) { return StepSchedule(steps, lambda); }

/// (1-t) z0 + t eps.
Vector forward_noise(const Vector& z0, const Vector& eps, double t);

using ProgressFn = std::function<void(int done, int total)>;

/// Euler integration from schedule index `start_index` down to t = 0 (T - start_index steps).
Vector integrate(const Vector& z_start, const VelocityField& field, const StepSchedule& sched,
                 int start_index, Condition cond, const ProgressFn& progress = {});

Matrix integrate_batch(const Matrix& z_start, const VelocityField& field, const StepSchedule& sched,
                       int start_index, const std::vector<Condition>& conds,
                       const ProgressFn& progress = {});

/// v ≡ c, for tests and examples.
class ConstantField final : public VelocityField {
 public:
  explicit ConstantField(Vector c) : c_(std::move(c)) {}
  int dim() const override { return static_cast<int>(c_.size()); }
  Vector evaluate(const Vector& z, double, Condition) const override;

 private:
  Vector c_;
};

}  // namespace sqforge
