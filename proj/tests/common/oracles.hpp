#pragma once
// Independent reference computations shared by the unit and acceptance tests.

#include "sqforge/geometry.hpp"
#include "sqforge/gm_oracle.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

namespace sqforge::oracle {

struct MonteCarloMean {
  Vector mean;
  Vector stderr_;
};

/// Kernel-weighted Monte-Carlo estimate of E[ε − z0 | z_t ≈ z] from forward-noised prior draws.
inline MonteCarloMean conditional_velocity(const MixturePrior& prior, const Vector& z, double t, int draws,
                                           double bandwidth, std::uint64_t seed) {
  const auto x0 = exact_sample(prior, draws, seed);
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index d = z.size();
  Vector sw = Vector::Zero(d), sw2 = Vector::Zero(d);
  double wsum = 0, w2sum = 0;
  std::vector<std::pair<double, Vector>> kept;
  for (const auto& a : x0) {
    Vector eps(d);
    for (Eigen::Index j = 0; j < d; ++j) eps[j] = normal(rng);
    const Vector zt = (1 - t) * a + t * eps;
    const double r2 = (zt - z).squaredNorm();
    const double w = std::exp(-0.5 * r2 / (bandwidth * bandwidth));
    if (w < 1e-12) continue;
    const Vector v = eps - a;
    sw += w * v;
    wsum += w;
    w2sum += w * w;
    kept.emplace_back(w, v);
  }
  MonteCarloMean out;
  out.mean = sw / wsum;
  for (const auto& [w, v] : kept) sw2 += w * (v - out.mean).cwiseAbs2();
  const Vector var = sw2 / wsum;
  const double n_eff = wsum * wsum / w2sum;
  out.stderr_ = (var / n_eff).cwiseSqrt();
  return out;
}

/// Fréchet distance through a general (non-symmetric) eigen-solve of Σ_A Σ_B.
inline double frechet_dense(const Matrix& a, const Matrix& b, double shrink = 1e-6) {
  auto fit = [shrink](const Matrix& x, Vector& mu, Matrix& cov) {
    mu = x.colwise().mean().transpose();
    const Matrix c = x.rowwise() - mu.transpose();
    cov = c.transpose() * c / static_cast<double>(x.rows() - 1);
    cov += shrink * Matrix::Identity(x.cols(), x.cols());
  };
  Vector ma, mb;
  Matrix ca, cb;
  fit(a, ma, ca);
  fit(b, mb, cb);
  Eigen::EigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(ca * cb), false);
  double tr = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) tr += std::sqrt(std::max(0.0, es.eigenvalues()[i].real()));
  return (ma - mb).squaredNorm() + ca.trace() + cb.trace() - 2 * tr;
}

/// Exposed faces by visiting every cell and each of its six neighbors.
inline std::size_t exposed_faces_scan(const OccupancyGrid& g) {
  const int r = g.resolution();
  std::size_t n = 0;
  for (int z = 0; z < r; ++z)
    for (int y = 0; y < r; ++y)
      for (int x = 0; x < r; ++x) {
        if (!g.at(x, y, z)) continue;
        const int nb[6][3] = {{x - 1, y, z}, {x + 1, y, z}, {x, y - 1, z}, {x, y + 1, z}, {x, y, z - 1}, {x, y, z + 1}};
        for (const auto& c : nb) {
          const bool inside = c[0] >= 0 && c[1] >= 0 && c[2] >= 0 && c[0] < r && c[1] < r && c[2] < r;
          if (!inside || !g.at(c[0], c[1], c[2])) ++n;
        }
      }
  return n;
}

inline OccupancyGrid random_grid(int r, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(p);
  OccupancyGrid g(r);
  for (std::size_t i = 0; i < g.size(); ++i) g.set(i, b(rng));
  return g;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

/// Two-component mixture in d dims with means ±sep/2 along the first axis.
inline MixturePrior separated_pair(int d, double sep, double sigma) {
  MixturePrior p;
  Vector a = Vector::Zero(d), b = Vector::Zero(d);
  a[0] = sep / 2;
  b[0] = -sep / 2;
  p.weights = {0.5, 0.5};
  p.means = {a, b};
  p.stds = {sigma, sigma};
  return p;
}

}  // namespace sqforge::oracle
