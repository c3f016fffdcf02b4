#include "sqforge/flow.hpp"

#include <cmath>
#include <string>

namespace sqforge {

Vector VelocityField::evaluate(const Vector& z, double t, Condition cond) const {
  Matrix row = z.transpose();
  return evaluate_batch(row, t, {cond}).row(0).transpose();
}

Matrix VelocityField::evaluate_batch(const Matrix& z, double t,
                                     const std::vector<Condition>& conds) const {
  require(conds.size() == static_cast<std::size_t>(z.rows()), "one condition per batch row");
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    out.row(i) = evaluate(z.row(i).transpose(), t, conds[static_cast<std::size_t>(i)]).transpose();
  }
  return out;
}

StepSchedule::StepSchedule(int steps, double lambda) : steps_(steps), lambda_(lambda) {
  require(steps >= 1, "schedule: T must be at least 1");
  require(lambda > 0.0 && std::isfinite(lambda), "schedule: lambda must be positive");
  times_.resize(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    times_[static_cast<std::size_t>(i)] = rescale(1.0 - static_cast<double>(i) / steps, lambda);
  }
  times_.front() = 1.0;
  times_.back() = 0.0;
}

double StepSchedule::rescale(double t_lin, double lambda) {
  return lambda * t_lin / (1.0 + (lambda - 1.0) * t_lin);
}

Vector forward_noise(const Vector& z0, const Vector& eps, double t) {
  require(z0.size() == eps.size(), "forward_noise: shape mismatch");
  require(t >= 0.0 && t <= 1.0, "forward_noise: t must be in [0, 1]");
  return (1.0 - t) * z0 + t * eps;
}

Matrix integrate_batch(const Matrix& z_start, const VelocityField& field, const StepSchedule& sched,
                       int start_index, const std::vector<Condition>& conds,
                       const ProgressFn& progress) {
  require(start_index >= 0 && start_index <= sched.steps(), "integrate: start index outside [0, T]");
  require(z_start.allFinite(), "integrate: start state must be finite");
  Matrix z = z_start;
  const int total = sched.steps() - start_index;
  for (int i = start_index; i < sched.steps(); ++i) {
    const double t = sched.t(i);
    const double dt = t - sched.t(i + 1);
    Matrix v = field.evaluate_batch(z, t, conds);
    if (!v.allFinite()) {
      throw Error("integrate: velocity field returned non-finite values at step " + std::to_string(i));
    }
    z -= dt * v;
    if (progress) progress(i - start_index + 1, total);
  }
  return z;
}

Vector integrate(const Vector& z_start, const VelocityField& field, const StepSchedule& sched,
                 int start_index, Condition cond, const ProgressFn& progress) {
  Matrix row = z_start.transpose();
  return integrate_batch(row, field, sched, start_index, {cond}, progress).row(0).transpose();
}

Vector ConstantField::evaluate(const Vector& z, double, Condition) const {
  require(z.size() == c_.size(), "constant field: dimension mismatch");
  return c_;
}

}  // namespace sqforge
