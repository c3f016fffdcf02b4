#include "../common/oracles.hpp"
#include "sqforge/corpus.hpp"
#include "sqforge/guidance.hpp"

#include <doctest.h>

using namespace sqforge;

namespace {

ControlScene box_scene(const Vec3& center, double half) {
  Superquadric q;
  q.scale = Vec3::Constant(half);
  q.eps1 = q.eps2 = 0.3;
  q.translation = center;
  ControlScene s;
  s.primitives.push_back(q);
  s.global_label = 1;
  return s;
}

LatentGrid control_latent(const ControlScene& scene, const CodecSpec& spec) {
  return encode(voxelize(normalize_to_unit_cube(scene).first, spec.resolution()), spec);
}

// Two-component mixture whose first mean is the encoded control and whose second is another shape.
MixturePrior control_pair(const ControlScene& a, const ControlScene& b, const CodecSpec& spec, double sigma) {
  MixturePrior p;
  p.weights = {0.5, 0.5};
  p.means = {control_latent(a, spec).values, control_latent(b, spec).values};
  p.stds = {sigma, sigma};
  return p;
}

}  // namespace

TEST_SUITE("guidance") {
  TEST_CASE("normalization of an already normalized scene is the identity") {
    const ControlScene s = box_scene(Vec3::Constant(0.5), 0.45);
    const auto [n, tf] = normalize_to_unit_cube(s);
    CHECK(tf.scale == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(tf.offset.norm() < 1e-12);
  }

  TEST_CASE("normalization of an offset unit scene") {
    const ControlScene s = box_scene(Vec3::Constant(10.5), 0.5);
    const auto [n, tf] = normalize_to_unit_cube(s);
    CHECK(tf.scale == doctest::Approx(0.9).epsilon(1e-12));
    const auto [lo, hi] = n.bounds();
    CHECK((lo - Vec3::Constant(0.05)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((hi - Vec3::Constant(0.95)).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("normalization keeps the aspect ratio and centers the long axis") {
    ControlScene s = box_scene(Vec3(3, 0, 0), 1.0);
    s.primitives[0].scale = Vec3(2, 1, 0.5);
    const auto [n, tf] = normalize_to_unit_cube(s);
    const auto [lo, hi] = n.bounds();
    CHECK(lo.x() == doctest::Approx(0.05));
    CHECK(hi.x() == doctest::Approx(0.95));
    CHECK((hi - lo).y() == doctest::Approx(0.45));
    CHECK((lo + hi).y() / 2 == doctest::Approx(0.5));
  }

  TEST_CASE("normalization round-trips primitive parameters") {
    const ControlScene s = sample_shape(chair_spec(), 3).scene;
    ControlScene world = s;
    const PlacementTransform place{2.75, Vec3(-4, 1.5, 8)};
    world = place.apply(world);
    const auto [n, tf] = normalize_to_unit_cube(world);
    const ControlScene back = tf.inverse().apply(n);
    for (std::size_t i = 0; i < world.primitives.size(); ++i) {
      CHECK((back.primitives[i].translation - world.primitives[i].translation).norm() < 1e-9);
      CHECK((back.primitives[i].scale - world.primitives[i].scale).norm() < 1e-9);
      CHECK(back.primitives[i].rotation == world.primitives[i].rotation);
      CHECK(back.primitives[i].eps1 == world.primitives[i].eps1);
    }
  }

  TEST_CASE("degenerate scenes are rejected") {
    CHECK_THROWS_AS(normalize_to_unit_cube(ControlScene{}), Error);
  }

  TEST_CASE("injection endpoints and midpoint") {
    const CodecSpec spec;
    const LatentGrid c = latent_noise(spec, 1), n = latent_noise(spec, 2);
    CHECK(inject(c, n, 0.0).values == c.values);
    CHECK(inject(c, n, 1.0).values == n.values);
    LatentGrid two(8, 8), zero(8, 8);
    two.values.setConstant(2.0);
    CHECK(inject(two, zero, 0.5).values.cwiseEqual(1.0).all());
    CHECK_THROWS_AS(inject(c, LatentGrid(4, 8), 0.5), Error);
    CHECK_THROWS_AS(inject(c, n, 1.1), Error);
  }

  TEST_CASE("injection stays within the interpolation bound") {
    const CodecSpec spec;
    for (int k = 0; k < 20; ++k) {
      const LatentGrid c = latent_noise(spec, 100 + k), n = latent_noise(spec, 200 + k);
      const double t0 = k / 19.0;
      const double lhs = (inject(c, n, t0).values - c.values).norm();
      CHECK(lhs <= t0 * (n.values.norm() + c.values.norm()));
    }
  }

  TEST_CASE("tau0 = T reproduces the codec round-trip of the control") {
    const CodecSpec spec;
    const ControlScene s = sample_shape(table_spec(), 4).scene;
    const MixtureOracleField field(control_pair(s, box_scene(Vec3::Zero(), 1), spec, 0.3));
    GuidanceConfig cfg;
    cfg.tau0 = 25;
    cfg.seed = 5;
    int calls = 0;
    const GenerationResult r = generate_structure(s, field, spec, cfg, [&](int, int) { ++calls; });
    CHECK(calls == 0);
    CHECK(r.steps == 0);
    CHECK(r.t0 == 0.0);
    CHECK(r.structure == roundtrip(voxelize(normalize_to_unit_cube(s).first, 32), spec));
  }

  TEST_CASE("tau0 = 0 ignores the control geometry") {
    const CodecSpec spec;
    const ControlScene a = sample_shape(chair_spec(), 6).scene, b = sample_shape(rocket_spec(), 7).scene;
    const MixtureOracleField field(control_pair(a, b, spec, 0.3));
    GuidanceConfig cfg;
    cfg.tau0 = 0;
    cfg.seed = 8;
    const GenerationResult ra = generate_structure(a, field, spec, cfg), rb = generate_structure(b, field, spec, cfg);
    CHECK(ra.denoised.values == rb.denoised.values);
    CHECK(ra.structure == rb.structure);
  }

  TEST_CASE("late injection with the exact oracle lands on the control's component") {
    const CodecSpec spec;
    const ControlScene a = sample_shape(chair_spec(), 9).scene, b = sample_shape(table_spec(), 10).scene;
    const MixturePrior prior = control_pair(a, b, spec, 0.5);
    REQUIRE((prior.means[0] - prior.means[1]).norm() >= 6 * 0.5);
    const MixtureOracleField field(prior);
    GuidanceConfig cfg;
    cfg.tau0 = 22;
    REQUIRE(cfg.t0() <= 0.3);
    int nearer = 0;
    for (int seed = 0; seed < 100; ++seed) {
      cfg.seed = static_cast<std::uint64_t>(seed);
      const Vector z = generate_structure(a, field, spec, cfg).denoised.values;
      nearer += (z - prior.means[0]).norm() < (z - prior.means[1]).norm();
    }
    CHECK(nearer >= 95);
  }

  TEST_CASE("generation is stable per seed") {
    const CodecSpec spec;
    const ControlScene a = sample_shape(chair_spec(), 11).scene;
    const MixtureOracleField field(control_pair(a, box_scene(Vec3::Zero(), 1), spec, 0.8));
    GuidanceConfig cfg;
    cfg.tau0 = 6;
    cfg.seed = 12;
    const auto x = generate_structure(a, field, spec, cfg), y = generate_structure(a, field, spec, cfg);
    CHECK(x.denoised.values == y.denoised.values);
    cfg.seed = 13;
    CHECK(generate_structure(a, field, spec, cfg).denoised.values != x.denoised.values);
    cfg.tau0 = 26;
    CHECK_THROWS_AS(generate_structure(a, field, spec, cfg), Error);
    cfg.tau0 = -1;
    CHECK_THROWS_AS(generate_structure(a, field, spec, cfg), Error);
  }

  TEST_CASE("field width must match the codec") {
    const ConstantField field(Vector::Zero(16));
    CHECK_THROWS_AS(generate_structure(box_scene(Vec3::Zero(), 1), field, CodecSpec(), GuidanceConfig{}), Error);
  }

  TEST_CASE("scene generation: single object, independence and placement") {
    const CodecSpec spec;
    const ControlScene a = sample_shape(chair_spec(), 14).scene, b = sample_shape(table_spec(), 15).scene;
    const MixtureOracleField field(control_pair(a, b, spec, 0.5));
    GuidanceConfig cfg;
    cfg.tau0 = 15;
    cfg.seed = 16;

    const PlacementTransform pa{1.5, Vec3(-3, 0, 0)}, pb{0.8, Vec3(4, 0, 1)};
    const ControlScene wa = pa.apply(a), wb = pb.apply(b);

    const auto one = generate_scene({wa}, field, spec, cfg);
    GuidanceConfig direct = cfg;
    direct.seed = mix_seed(cfg.seed, 0);
    REQUIRE(one[0].result);
    CHECK(one[0].result->denoised.values == generate_structure(wa, field, spec, direct).denoised.values);

    // Object 0 is unaffected by whatever sits in slot 1.
    const auto with_b = generate_scene({wa, wb}, field, spec, cfg);
    const auto with_box = generate_scene({wa, box_scene(Vec3(9, 9, 9), 2)}, field, spec, cfg);
    CHECK(with_b[0].result->denoised.values == with_box[0].result->denoised.values);

    // Undoing the normalization puts the control grid's bounds back where the world scene was.
    for (const auto& [r, world] : {std::pair{*with_b[0].result, wa}, std::pair{*with_b[1].result, wb}}) {
      const auto [lo, hi] = world.bounds();
      const auto [nlo, nhi] = normalize_to_unit_cube(world).first.bounds();
      CHECK((r.placement.invert(nlo) - lo).norm() < 1e-6);
      CHECK((r.placement.invert(nhi) - hi).norm() < 1e-6);
      GenerationResult as_control = r;
      as_control.structure = r.control;
      const auto [glo, ghi] = placed_bounds(as_control);
      const double cell = 1.0 / (32 * r.placement.scale);
      CHECK((glo - lo).cwiseAbs().maxCoeff() <= cell);
      CHECK((ghi - hi).cwiseAbs().maxCoeff() <= cell);
    }

    const auto bad = generate_scene({wa, ControlScene{}}, field, spec, cfg);
    CHECK(bad[0].result);
    CHECK_FALSE(bad[1].result);
    CHECK_FALSE(bad[1].error.empty());
  }
}
