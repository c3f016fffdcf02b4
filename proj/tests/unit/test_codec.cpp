#include "sqforge/codec.hpp"
#include "sqforge/corpus.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace sqforge;

namespace {

OccupancyGrid random_grid(int r, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(p);
  OccupancyGrid g(r);
  for (std::size_t i = 0; i < g.size(); ++i) g.set(i, b(rng));
  return g;
}

// Orthonormal DCT-II written out independently of the codec.
double dct(int k, int n, int p) {
  const double a = k == 0 ? std::sqrt(1.0 / p) : std::sqrt(2.0 / p);
  return a * std::cos(std::numbers::pi * (2 * n + 1) * k / (2.0 * p));
}

}  // namespace

TEST_SUITE("codec") {
  TEST_CASE("basis is orthonormal and starts with the DC term") {
    const CodecSpec spec;
    const Matrix& b = spec.basis();
    CHECK((b.transpose() * b - Matrix::Identity(8, 8)).norm() < 1e-12);
    CHECK(spec.frequencies()[0] == std::array<int, 3>{0, 0, 0});
    for (const auto& f : spec.frequencies())
      for (int k : f) CHECK((k == 0 || k == 1));
  }

  TEST_CASE("zero grid and zero latent") {
    const CodecSpec spec;
    const LatentGrid z = encode(OccupancyGrid(32), spec);
    CHECK(z.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(decode(LatentGrid(8, 8), spec).count() == 0);
  }

  TEST_CASE("one full patch encodes to its DC coefficient") {
    const CodecSpec spec;
    OccupancyGrid g(32);
    for (int z = 4; z < 8; ++z)
      for (int y = 8; y < 12; ++y)
        for (int x = 12; x < 16; ++x) g.set(x, y, z, true);
    const LatentGrid lat = encode(g, spec);
    for (int pz = 0; pz < 8; ++pz)
      for (int py = 0; py < 8; ++py)
        for (int px = 0; px < 8; ++px)
          for (int c = 0; c < 8; ++c) {
            const double want = (px == 3 && py == 2 && pz == 1 && c == 0) ? 8.0 : 0.0;
            CHECK(lat.at(px, py, pz, c) == doctest::Approx(want).epsilon(1e-12));
          }
  }

  TEST_CASE("random grid matches an independent dense projection") {
    const CodecSpec spec;
    const OccupancyGrid g = random_grid(32, 0.3, 1);
    const LatentGrid lat = encode(g, spec);
    for (int pz = 0; pz < 8; pz += 3)
      for (int py = 0; py < 8; py += 2)
        for (int px = 0; px < 8; ++px)
          for (int c = 0; c < 8; ++c) {
            const auto& f = spec.frequencies()[c];
            double acc = 0;
            for (int z = 0; z < 4; ++z)
              for (int y = 0; y < 4; ++y)
                for (int x = 0; x < 4; ++x)
                  if (g.at(px * 4 + x, py * 4 + y, pz * 4 + z)) acc += dct(f[0], x, 4) * dct(f[1], y, 4) * dct(f[2], z, 4);
            CHECK(lat.at(px, py, pz, c) == doctest::Approx(acc).epsilon(1e-12));
          }
  }

  TEST_CASE("patch-constant grids round-trip exactly") {
    const CodecSpec spec;
    std::mt19937_64 rng(2);
    std::bernoulli_distribution b(0.4);
    OccupancyGrid g(32);
    for (int pz = 0; pz < 8; ++pz)
      for (int py = 0; py < 8; ++py)
        for (int px = 0; px < 8; ++px) {
          const bool v = b(rng);
          for (int z = 0; z < 4; ++z)
            for (int y = 0; y < 4; ++y)
              for (int x = 0; x < 4; ++x) g.set(px * 4 + x, py * 4 + y, pz * 4 + z, v);
        }
    CHECK(roundtrip(g, spec) == g);
  }

  TEST_CASE("encode is linear on real fields") {
    const CodecSpec spec;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0, 1);
    Vector a(32 * 32 * 32), b(32 * 32 * 32);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      a[i] = n(rng);
      b[i] = n(rng);
    }
    const Vector lhs = encode_field(2.5 * a - 0.75 * b, spec).values;
    const Vector rhs = 2.5 * encode_field(a, spec).values - 0.75 * encode_field(b, spec).values;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("energy never grows") {
    const CodecSpec spec;
    for (int k = 0; k < 5; ++k) {
      const OccupancyGrid g = random_grid(32, 0.2 + 0.1 * k, 10 + k);
      CHECK(encode(g, spec).values.squaredNorm() <= static_cast<double>(g.count()) + 1e-9);
    }
  }

  TEST_CASE("repeated round-trips settle on a fixed point") {
    // A single re-application is not a fixed point in general; iteration converges quickly.
    const CodecSpec spec;
    for (double p : {0.1, 0.3, 0.5}) {
      OccupancyGrid cur = roundtrip(random_grid(32, p, 4), spec);
      int passes = 0;
      for (; passes < 32; ++passes) {
        OccupancyGrid next = roundtrip(cur, spec);
        if (next == cur) break;
        cur = std::move(next);
      }
      CHECK(passes < 32);
      CHECK(roundtrip(cur, spec) == cur);
    }
  }

  TEST_CASE("corpus round-trip IoU baseline") {
    const CodecSpec spec;
    double total = 0;
    int n = 0;
    for (const auto& cat : default_categories())
      for (int i = 0; i < 86; ++i) {
        const OccupancyGrid g = sample_shape(cat, mix_seed(99, cat.token * 1000 + i)).grid;
        const OccupancyGrid r = roundtrip(g, spec);
        std::size_t inter = 0, uni = 0;
        for (std::size_t j = 0; j < g.size(); ++j) {
          inter += g[j] && r[j];
          uni += g[j] || r[j];
        }
        total += static_cast<double>(inter) / static_cast<double>(uni);
        ++n;
      }
    CHECK(total / n >= 0.85);
  }

  TEST_CASE("binary dumps round-trip and reject garbage") {
    const CodecSpec spec;
    const OccupancyGrid g = random_grid(32, 0.3, 5);
    CHECK(grid_from_bytes(grid_to_bytes(g)) == g);
    const LatentGrid z = encode(g, spec);
    CodecSpec got;
    const LatentGrid back = latent_from_bytes(latent_to_bytes(z, spec), &got);
    CHECK(got == spec);
    CHECK((back.values - z.values).cwiseAbs().maxCoeff() < 1e-6);
    CHECK_THROWS(grid_from_bytes("SCGRD1xx"));
    CHECK_THROWS(latent_from_bytes("nope"));
  }

  TEST_CASE("invalid codec shapes throw") {
    CHECK_THROWS_AS(CodecSpec(30, 4, 8), Error);
    CHECK_THROWS_AS(CodecSpec(32, 4, 65), Error);
  }
}
