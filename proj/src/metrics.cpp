#include "sqforge/metrics.hpp"

#include "sqforge/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace sqforge {

namespace {

double sq_dist(const Vec3& p, const Vec3& q) {
  const double dx = p.x() - q.x(), dy = p.y() - q.y(), dz = p.z() - q.z();
  return dx * dx + dy * dy + dz * dz;
}

// Uniform bucket grid for exact nearest-neighbor queries.
class BucketGrid {
 public:
  explicit BucketGrid(const std::vector<Vec3>& pts) : pts_(pts) {
    lo_ = hi_ = pts.front();
    for (const auto& p : pts) {
      lo_ = lo_.cwiseMin(p);
      hi_ = hi_.cwiseMax(p);
    }
    const double extent = std::max((hi_ - lo_).maxCoeff(), 1e-12);
    const int per_axis = std::clamp(static_cast<int>(std::cbrt(static_cast<double>(pts.size()))), 1, 64);
    h_ = extent / per_axis;
    for (int k = 0; k < 3; ++k) n_[k] = std::max(1, static_cast<int>(std::floor((hi_[k] - lo_[k]) / h_)) + 1);
    start_.assign(static_cast<std::size_t>(n_[0]) * n_[1] * n_[2] + 1, 0);
    std::vector<std::size_t> cell_of(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      cell_of[i] = flat(cell(pts[i]));
      ++start_[cell_of[i] + 1];
    }
    for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
    order_.resize(pts.size());
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < pts.size(); ++i) order_[fill[cell_of[i]]++] = i;
  }

  double nearest_sq(const Vec3& q) const {
    std::array<long, 3> qc;
    long k0 = 0;
    for (int a = 0; a < 3; ++a) {
      qc[a] = static_cast<long>(std::floor((q[a] - lo_[a]) / h_));
      // Rings closer than the grid box contain no cells.
      if (qc[a] < 0) k0 = std::max(k0, -qc[a]);
      if (qc[a] >= n_[a]) k0 = std::max(k0, qc[a] - n_[a] + 1);
    }
    double best = std::numeric_limits<double>::infinity();
    const long kmax = std::max({n_[0], n_[1], n_[2]}) + k0 + 1;
    for (long k = k0; k <= kmax; ++k) {
      std::array<long, 3> a0, a1;
      for (int a = 0; a < 3; ++a) {
        a0[a] = std::max(0L, qc[a] - k);
        a1[a] = std::min(static_cast<long>(n_[a]) - 1, qc[a] + k);
      }
      for (long z = a0[2]; z <= a1[2]; ++z)
        for (long y = a0[1]; y <= a1[1]; ++y)
          for (long x = a0[0]; x <= a1[0]; ++x) {
            const long ring = std::max({std::labs(x - qc[0]), std::labs(y - qc[1]), std::labs(z - qc[2])});
            if (ring != k) continue;
            const std::size_t c = flat({static_cast<int>(x), static_cast<int>(y), static_cast<int>(z)});
            for (std::size_t j = start_[c]; j < start_[c + 1]; ++j) best = std::min(best, sq_dist(q, pts_[order_[j]]));
          }
      // Any point outside ring k is at least k·h away along some axis.
      const double bound = static_cast<double>(k) * h_ * (1.0 - 1e-9);
      if (best < bound * bound) break;
    }
    return best;
  }

 private:
  std::array<int, 3> cell(const Vec3& p) const {
    std::array<int, 3> c;
    for (int a = 0; a < 3; ++a) c[a] = std::clamp(static_cast<int>(std::floor((p[a] - lo_[a]) / h_)), 0, n_[a] - 1);
    return c;
  }
  std::size_t flat(const std::array<int, 3>& c) const {
    return (static_cast<std::size_t>(c[2]) * n_[1] + c[1]) * n_[0] + c[0];
  }

  const std::vector<Vec3>& pts_;
  Vec3 lo_, hi_;
  double h_;
  std::array<int, 3> n_;
  std::vector<std::size_t> start_, order_;
};

double directed_mean(const std::vector<Vec3>& from, const std::vector<Vec3>& to, bool brute) {
  double sum = 0;
  if (brute) {
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, sq_dist(p, q));
      sum += best;
    }
  } else {
    BucketGrid grid(to);
    for (const auto& p : from) sum += grid.nearest_sq(p);
  }
  return sum / static_cast<double>(from.size());
}

double chamfer_impl(const std::vector<Vec3>& a, const std::vector<Vec3>& b, bool brute) {
  require(!a.empty() && !b.empty(), "chamfer: point sets must be non-empty");
  const double ab = directed_mean(a, b, brute);
  const double ba = directed_mean(b, a, brute);
  return ab + ba;
}

}  // namespace

double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) { return chamfer_impl(a, b, false); }

double chamfer_brute(const std::vector<Vec3>& a, const std::vector<Vec3>& b) { return chamfer_impl(a, b, true); }

double voxel_iou(const OccupancyGrid& x, const OccupancyGrid& y) {
  require(x.resolution() == y.resolution(), "voxel_iou: resolution mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    inter += (x[i] && y[i]) ? 1 : 0;
    uni += (x[i] || y[i]) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

void gaussian_fit(const Matrix& x, Vector& mean, Matrix& cov) {
  require(x.rows() >= 2, "gaussian_fit: need at least two samples");
  mean = x.colwise().mean().transpose();
  const Matrix c = x.rowwise() - mean.transpose();
  cov = (c.transpose() * c) / static_cast<double>(x.rows() - 1);
}

double frechet_distance(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "frechet: feature widths differ");
  const Eigen::Index d = a.cols();
  require(a.rows() >= d + 1 && b.rows() >= d + 1,
          "frechet: need at least " + std::to_string(d + 1) + " samples per set");
  Vector ma, mb;
  Matrix ca, cb;
  gaussian_fit(a, ma, ca);
  gaussian_fit(b, mb, cb);
  ca += kFrechetShrinkage * Matrix::Identity(d, d);
  cb += kFrechetShrinkage * Matrix::Identity(d, d);
  Eigen::SelfAdjointEigenSolver<Matrix> ea(ca);
  const Vector sa = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Matrix ra = ea.eigenvectors() * sa.asDiagonal() * ea.eigenvectors().transpose();
  Matrix m = ra * cb * ra;
  m = (m + m.transpose()) / 2;
  Eigen::SelfAdjointEigenSolver<Matrix> em(m, Eigen::EigenvaluesOnly);
  const double tr_sqrt = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double fd = (ma - mb).squaredNorm() + ca.trace() + cb.trace() - 2 * tr_sqrt;
  return std::max(fd, 0.0);
}

Vector structure_features(const LatentGrid& z) {
  const int g = z.coarse;
  require(g % 2 == 0, "structure_features: coarse grid must be even");
  const int h = g / 2;
  Vector f = Vector::Zero(static_cast<Eigen::Index>(h) * h * h);
  for (int pz = 0; pz < g; ++pz)
    for (int py = 0; py < g; ++py)
      for (int px = 0; px < g; ++px)
        f[((pz / 2) * h + py / 2) * h + px / 2] += z.at(px, py, pz, 0) / 8.0;
  return f;
}

Matrix feature_matrix(const std::vector<LatentGrid>& zs) {
  require(!zs.empty(), "feature_matrix: no latents");
  const Vector f0 = structure_features(zs.front());
  Matrix m(static_cast<Eigen::Index>(zs.size()), f0.size());
  for (std::size_t i = 0; i < zs.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = structure_features(zs[i]).transpose();
  return m;
}

std::vector<Vec3> surface_cell_centers(const OccupancyGrid& grid) {
  std::vector<Vec3> out;
  for (const auto& c : grid.active_cells()) {
    const int x = c[0], y = c[1], z = c[2];
    if (!grid.occupied(x - 1, y, z) || !grid.occupied(x + 1, y, z) || !grid.occupied(x, y - 1, z) ||
        !grid.occupied(x, y + 1, z) || !grid.occupied(x, y, z - 1) || !grid.occupied(x, y, z + 1))
      out.push_back(grid.cell_center(x, y, z));
  }
  return out;
}

double control_chamfer_e3(const ControlScene& normalized_control, const OccupancyGrid& structure,
                          std::uint64_t seed) {
  const auto surf = surface_cell_centers(structure);
  const auto samples = scene_surface_sample(normalized_control, kControlSamplesPerPart, seed);
  // An empty generation is maximally unfaithful; score it against the cube center.
  if (surf.empty()) return 1e3 * chamfer(samples, {Vec3::Constant(0.5)});
  return 1e3 * chamfer(samples, surf);
}

std::string TradeoffReport::to_csv() const {
  std::ostringstream os;
  os << "tau0,t0,cd_e3,iou,frechet,n\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%d\n", r.tau0, r.t0, r.cd_e3, r.iou, r.frechet, r.n);
    os << buf;
  }
  return os.str();
}

nlohmann::json TradeoffReport::to_json() const {
  nlohmann::json rows_j = nlohmann::json::array();
  for (const auto& r : rows)
    rows_j.push_back({{"tau0", r.tau0}, {"t0", r.t0}, {"cd_e3", r.cd_e3}, {"iou", r.iou}, {"frechet", r.frechet}, {"n", r.n}});
  return {{"rows", rows_j}, {"meta", meta}};
}

BatchEval evaluate_batch(const std::vector<ControlScene>& controls, const std::vector<LatentGrid>& generated,
                         const CodecSpec& spec, const Matrix& reference_features, std::uint64_t seed) {
  require(controls.size() == generated.size() && !controls.empty(), "evaluate: one generation per control");
  BatchEval ev;
  double cd = 0, iou = 0;
  for (std::size_t i = 0; i < controls.size(); ++i) {
    const OccupancyGrid structure = decode(generated[i], spec);
    const double c = control_chamfer_e3(controls[i], structure, mix_seed(seed, 1000 + i));
    ev.per_sample_cd_e3.push_back(c);
    cd += c;
    iou += voxel_iou(structure, voxelize(controls[i], spec.resolution()));
  }
  ev.cd_e3 = cd / static_cast<double>(controls.size());
  ev.iou = iou / static_cast<double>(controls.size());
  const Matrix feats = feature_matrix(generated);
  // Too few samples for a full-rank fit: report no realism score rather than a biased one.
  if (feats.rows() > feats.cols() && reference_features.rows() > reference_features.cols())
    ev.frechet = frechet_distance(feats, reference_features);
  else
    ev.frechet = std::numeric_limits<double>::quiet_NaN();
  return ev;
}

std::vector<LatentGrid> denoise_batch(const VelocityField& field, const CodecSpec& spec,
                                      const StepSchedule& schedule, const std::vector<LatentGrid>& injected,
                                      int start_index, const std::vector<TokenId>& labels) {
  require(injected.size() == labels.size(), "denoise_batch: one label per latent");
  Matrix z(static_cast<Eigen::Index>(injected.size()), spec.latent_size());
  std::vector<Condition> conds;
  for (std::size_t i = 0; i < injected.size(); ++i) {
    z.row(static_cast<Eigen::Index>(i)) = injected[i].values.transpose();
    conds.emplace_back(labels[i]);
  }
  const Matrix out = integrate_batch(z, field, schedule, start_index, conds);
  std::vector<LatentGrid> res;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    res.emplace_back(spec.coarse(), spec.channels(), Vector(out.row(i).transpose()));
  return res;
}

TradeoffReport sweep_tau(const VelocityField& field, const CodecSpec& spec, const StepSchedule& schedule,
                         const SweepInput& input, const ProgressFn& progress) {
  const auto& controls = input.controls;
  require(static_cast<int>(controls.size()) >= input.min_controls,
          "sweep: need at least " + std::to_string(input.min_controls) + " controls");
  require(input.labels.size() == controls.size(), "sweep: one label per control");
  require(!input.tau0s.empty(), "sweep: empty tau0 list");
  for (int tau : input.tau0s)
    require(tau >= 0 && tau <= schedule.steps(), "sweep: tau0 " + std::to_string(tau) + " outside [0, T]");
  std::vector<int> taus = input.tau0s;
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());

  std::vector<LatentGrid> encoded, noise;
  for (std::size_t i = 0; i < controls.size(); ++i) {
    encoded.push_back(encode(voxelize(controls[i], spec.resolution()), spec));
    noise.push_back(latent_noise(spec, mix_seed(input.seed, i)));
  }
  TradeoffReport rep;
  int done = 0;
  for (int tau : taus) {
    const double t0 = schedule.t(tau);
    std::vector<LatentGrid> injected;
    for (std::size_t i = 0; i < controls.size(); ++i) injected.push_back(inject(encoded[i], noise[i], t0));
    const auto gen = denoise_batch(field, spec, schedule, injected, tau, input.labels);
    const BatchEval ev = evaluate_batch(controls, gen, spec, input.reference_features, input.seed);
    rep.rows.push_back({tau, t0, ev.cd_e3, ev.iou, ev.frechet, static_cast<int>(controls.size())});
    if (progress) progress(++done, static_cast<int>(taus.size()));
  }
  rep.meta = {{"seed", input.seed}, {"n", controls.size()}, {"T", schedule.steps()}, {"lambda", schedule.lambda()}};
  return rep;
}

}  // namespace sqforge
