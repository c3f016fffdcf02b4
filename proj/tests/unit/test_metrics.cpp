#include "../common/oracles.hpp"
#include "sqforge/corpus.hpp"
#include "sqforge/guidance.hpp"
#include "sqforge/metrics.hpp"

#include <doctest.h>

#include <sstream>

using namespace sqforge;

namespace {

std::vector<Vec3> random_points(int n, std::uint64_t seed, double spread = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, spread);
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  return pts;
}

Matrix orthogonal(int d, std::uint64_t seed) {
  Eigen::HouseholderQR<Matrix> qr(oracle::random_matrix(d, d, seed));
  return qr.householderQ();
}

struct SweepFixture {
  CodecSpec spec;
  SweepInput input;
  MixturePrior prior;
  SweepFixture() {
    std::vector<LatentGrid> refs;
    const auto cats = default_categories();
    for (int i = 0; i < 40; ++i) {
      const auto& cat = cats[static_cast<std::size_t>(i % 3)];
      const Shape s = sample_shape(cat, 500 + static_cast<std::uint64_t>(i));
      input.controls.push_back(s.scene);
      input.labels.push_back(cat.token);
    }
    for (int i = 0; i < 80; ++i)
      refs.push_back(encode(sample_shape(cats[static_cast<std::size_t>(i % 3)], 900 + static_cast<std::uint64_t>(i)).grid, spec));
    input.reference_features = feature_matrix(refs);
    input.tau0s = {25, 0, 10};
    input.seed = 3;
    input.min_controls = 32;
    prior.weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    for (int k = 0; k < 3; ++k) prior.means.push_back(refs[static_cast<std::size_t>(k)].values);
    prior.stds = {0.2, 0.2, 0.2};
  }
};

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("chamfer trivial cases") {
    const auto a = random_points(50, 1);
    CHECK(chamfer(a, a) == 0.0);
    CHECK(chamfer({Vec3::Zero()}, {Vec3(1, 0, 0)}) == 2.0);
    CHECK_THROWS_AS(chamfer({}, a), Error);
  }

  TEST_CASE("chamfer matches the brute-force scan and is symmetric") {
    for (int k = 0; k < 100; ++k) {
      const auto a = random_points(100, 10 + k, 0.5 + k * 0.01), b = random_points(100, 500 + k);
      CHECK(chamfer(a, b) == chamfer_brute(a, b));
      CHECK(chamfer(a, b) == chamfer(b, a));
      // Independent O(n²) reference.
      auto one_way = [](const std::vector<Vec3>& x, const std::vector<Vec3>& y) {
        double s = 0;
        for (const auto& p : x) {
          double best = 1e300;
          for (const auto& q : y) best = std::min(best, (p - q).squaredNorm());
          s += best;
        }
        return s / static_cast<double>(x.size());
      };
      CHECK(chamfer(a, b) == doctest::Approx(one_way(a, b) + one_way(b, a)).epsilon(1e-12));
    }
  }

  TEST_CASE("voxel IoU cases") {
    OccupancyGrid x(4), y(4);
    CHECK(voxel_iou(x, y) == 1.0);
    x.set(0, 0, 0, true);
    x.set(1, 0, 0, true);
    CHECK(voxel_iou(x, x) == 1.0);
    y.set(3, 3, 3, true);
    CHECK(voxel_iou(x, y) == 0.0);
    OccupancyGrid z(4);
    z.set(1, 0, 0, true);
    z.set(2, 0, 0, true);
    CHECK(voxel_iou(x, z) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(voxel_iou(x, OccupancyGrid(8)), Error);
  }

  TEST_CASE("Frechet distance identities") {
    const Matrix a = oracle::random_matrix(400, 6, 1);
    CHECK(std::abs(frechet_distance(a, a)) <= 1e-8);
    const Vector v = (Vector(6) << 1, -2, 0.5, 0, 3, -1).finished();
    const Matrix b = a.rowwise() + v.transpose();
    CHECK(frechet_distance(a, b) == doctest::Approx(v.squaredNorm()).epsilon(1e-8));
    CHECK_THROWS_AS(frechet_distance(a.topRows(6), a), Error);
    CHECK_THROWS_AS(frechet_distance(a, a.leftCols(5)), Error);
  }

  TEST_CASE("Frechet distance matches a dense non-symmetric eigen-solve") {
    for (int k = 0; k < 20; ++k) {
      const Matrix a = oracle::random_matrix(50, 2, 100 + k, 1.0 + 0.1 * k);
      Matrix b = oracle::random_matrix(60, 2, 200 + k);
      b.col(1) = 0.3 * b.col(0) + 2.0 * b.col(1);
      CHECK(std::abs(frechet_distance(a, b) - oracle::frechet_dense(a, b)) <= 1e-8);
    }
  }

  TEST_CASE("Frechet distance is invariant under a shared rotation") {
    const Matrix a = oracle::random_matrix(200, 8, 3), b = oracle::random_matrix(200, 8, 4, 1.5);
    const Matrix q = orthogonal(8, 5);
    CHECK(std::abs(frechet_distance(a * q, b * q) - frechet_distance(a, b)) <= 1e-6);
  }

  TEST_CASE("pooled features track the DC channel") {
    LatentGrid z(8, 8);
    z.at(0, 0, 0, 0) = 8.0;
    z.at(7, 7, 7, 0) = 16.0;
    z.at(1, 1, 1, 3) = 5.0;  // non-DC channels are ignored
    const Vector f = structure_features(z);
    REQUIRE(f.size() == 64);
    CHECK(f[0] == 1.0);
    CHECK(f[63] == 2.0);
    CHECK(f.sum() == 3.0);
  }

  TEST_CASE("sweep rows are sorted, reproducible and anchored at tau0 = T") {
    SweepFixture fx;
    const MixtureOracleField field(fx.prior);
    const StepSchedule sched;
    std::vector<int> progress;
    const TradeoffReport a = sweep_tau(field, fx.spec, sched, fx.input, [&](int d, int) { progress.push_back(d); });
    const TradeoffReport b = sweep_tau(field, fx.spec, sched, fx.input);
    REQUIRE(a.rows.size() == 3);
    CHECK(a.rows[0].tau0 == 0);
    CHECK(a.rows[1].tau0 == 10);
    CHECK(a.rows[2].tau0 == 25);
    CHECK(progress == std::vector<int>{1, 2, 3});
    CHECK(a.to_csv() == b.to_csv());
    CHECK(a.to_json().dump() == b.to_json().dump());

    // Zero-step row: the codec round-trip of each control, scored the same way.
    double cd = 0, iou = 0;
    for (std::size_t i = 0; i < fx.input.controls.size(); ++i) {
      const OccupancyGrid ctrl = voxelize(fx.input.controls[i], 32);
      const OccupancyGrid rt = roundtrip(ctrl, fx.spec);
      cd += control_chamfer_e3(fx.input.controls[i], rt, mix_seed(fx.input.seed, 1000 + i));
      iou += voxel_iou(rt, ctrl);
    }
    const double n = static_cast<double>(fx.input.controls.size());
    CHECK(a.rows[2].t0 == 0.0);
    CHECK(a.rows[2].cd_e3 == doctest::Approx(cd / n).epsilon(1e-12));
    CHECK(a.rows[2].iou == doctest::Approx(iou / n).epsilon(1e-12));
    CHECK(a.rows[2].n == 40);
    CHECK(std::isnan(a.rows[2].frechet));  // 40 samples cannot fit 64-dim features

    // Unguided generation with the same noise gives the tau0 = 0 row.
    std::vector<LatentGrid> noise;
    for (std::size_t i = 0; i < fx.input.controls.size(); ++i) noise.push_back(latent_noise(fx.spec, mix_seed(fx.input.seed, i)));
    const auto gen = denoise_batch(field, fx.spec, sched, noise, 0, fx.input.labels);
    const BatchEval ev = evaluate_batch(fx.input.controls, gen, fx.spec, fx.input.reference_features, fx.input.seed);
    CHECK(a.rows[0].cd_e3 == ev.cd_e3);
    CHECK(a.rows[0].iou == ev.iou);
  }

  TEST_CASE("sweep CSV format and input validation") {
    SweepFixture fx;
    const MixtureOracleField field(fx.prior);
    fx.input.tau0s = {0, 5, 10, 15, 20, 25};
    const std::string csv = sweep_tau(field, fx.spec, StepSchedule(), fx.input).to_csv();
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "tau0,t0,cd_e3,iou,frechet,n");
    int rows = 0;
    while (std::getline(in, line)) {
      ++rows;
      CHECK(std::count(line.begin(), line.end(), ',') == 5);
    }
    CHECK(rows == 6);

    SweepInput few = fx.input;
    few.controls.resize(10);
    few.labels.resize(10);
    CHECK_THROWS_AS(sweep_tau(field, fx.spec, StepSchedule(), few), Error);
    SweepInput bad = fx.input;
    bad.tau0s = {26};
    CHECK_THROWS_AS(sweep_tau(field, fx.spec, StepSchedule(), bad), Error);
  }
}
