#include "sqforge/gm_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace sqforge {

namespace {
constexpr double kDensityFloor = 1e-300;
}

void MixturePrior::validate() const {
  require(!weights.empty(), "mixture needs at least one component");
  require(weights.size() == means.size() && weights.size() == stds.size(),
          "mixture weights, means and stds must have equal length");
  double sum = 0.0;
  for (double w : weights) {
    require(w > 0.0, "mixture weights must be positive");
    sum += w;
  }
  require(std::abs(sum - 1.0) <= 1e-12, "mixture weights must sum to 1");
  for (const auto& m : means) require(m.size() == means.front().size(), "mixture means differ in dimension");
  for (double s : stds) require(s >= 0.0 && std::isfinite(s), "mixture stds must be non-negative");
}

MixturePrior MixturePrior::point_mass(const Vector& mu) { return {{1.0}, {mu}, {0.0}}; }

nlohmann::json MixturePrior::to_json() const {
  nlohmann::json means_j = nlohmann::json::array();
  for (const auto& m : means) means_j.push_back(std::vector<double>(m.data(), m.data() + m.size()));
  return {{"weights", weights}, {"means", means_j}, {"stds", stds}};
}

MixturePrior MixturePrior::from_json(const nlohmann::json& j) {
  MixturePrior p;
  p.weights = j.at("weights").get<std::vector<double>>();
  for (const auto& m : j.at("means")) {
    auto v = m.get<std::vector<double>>();
    p.means.push_back(Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  p.stds = j.at("stds").get<std::vector<double>>();
  p.validate();
  return p;
}

std::vector<double> oracle_responsibilities(const MixturePrior& prior, const Vector& z, double t) {
  const int k = prior.components();
  const double d = static_cast<double>(z.size());
  std::vector<double> logp(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const double var = (1 - t) * (1 - t) * prior.stds[i] * prior.stds[i] + t * t;
    const double r2 = (z - (1 - t) * prior.means[i]).squaredNorm();
    logp[i] = std::log(prior.weights[i]) - 0.5 * d * std::log(var) - 0.5 * r2 / var;
  }
  const double mx = *std::max_element(logp.begin(), logp.end());
  double total = 0.0;
  for (double& lp : logp) {
    lp = std::max(std::exp(lp - mx), kDensityFloor);
    total += lp;
  }
  for (double& lp : logp) lp /= total;
  return logp;
}

Vector oracle_velocity(const MixturePrior& prior, const Vector& z, double t) {
  require(t > 0.0 && t <= 1.0, "oracle velocity is undefined at t = 0");
  require(z.size() == prior.dim(), "oracle velocity: dimension mismatch");
  const auto resp = oracle_responsibilities(prior, z, t);
  Vector v = Vector::Zero(z.size());
  for (int i = 0; i < prior.components(); ++i) {
    const double s2 = prior.stds[i] * prior.stds[i];
    const double var = (1 - t) * (1 - t) * s2 + t * t;
    const Vector z0 = prior.means[i] + ((1 - t) * s2 / var) * (z - (1 - t) * prior.means[i]);
    const Vector eps = (z - (1 - t) * z0) / t;
    v += resp[static_cast<std::size_t>(i)] * (eps - z0);
  }
  return v;
}

std::vector<Vector> exact_sample(const MixturePrior& prior, int n, std::uint64_t seed) {
  require(n >= 1, "exact_sample: n must be at least 1");
  prior.validate();
  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> pick(prior.weights.begin(), prior.weights.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    const int k = pick(rng);
    Vector x = prior.means[static_cast<std::size_t>(k)];
    for (Eigen::Index j = 0; j < x.size(); ++j) x[j] += prior.stds[static_cast<std::size_t>(k)] * normal(rng);
    out.push_back(std::move(x));
  }
  return out;
}

MixtureOracleField::MixtureOracleField(MixturePrior prior) : prior_(std::move(prior)) { prior_.validate(); }

Vector MixtureOracleField::evaluate(const Vector& z, double t, Condition) const {
  return oracle_velocity(prior_, z, t);
}

}  // namespace sqforge
