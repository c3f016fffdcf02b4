// End-to-end acceptance run: prints one PASS/FAIL line per criterion and exits non-zero on any failure.
#include "../common/oracles.hpp"
#include "sqforge/pipeline.hpp"
#include "sqforge/vocab.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

using namespace sqforge;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

Vector randn(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = n(rng);
  return v;
}

// Everything the trained-model criteria share, built once on first use.
class Workspace {
 public:
  explicit Workspace(fs::path dir) : dir_(std::move(dir)) {}

  const Dataset& dataset() {
    if (!ds_) {
      const auto t = std::chrono::steady_clock::now();
      ds_ = Dataset::build(default_categories(), 320, 7, dir_ / "corpus");
      log("corpus: %zu items in %.1fs", ds_->items().size(), seconds_since(t));
    }
    return *ds_;
  }

  const Checkpoint& structure() {
    if (!structure_) {
      const Dataset& ds = dataset();
      Checkpoint ck;
      ck.codec = CodecSpec(ds.resolution(), 4, 8);
      ck.config.iterations = 3000;
      ck.config.seed = 3;
      StructureDims dims;
      dims.latent = ck.codec.latent_size();
      auto net = std::make_shared<StructureNet>(dims, mix_seed(3, 1));
      const auto t = std::chrono::steady_clock::now();
      ck.loss_curve = train_structure(*net, structure_samples(ds, "train", ck.codec, false), ck.config);
      structure_seconds_ = seconds_since(t);
      quantize_f32(*net);
      ck.net = net;
      structure_ = ck;
      log("structure: %d iterations in %.1fs, final loss %.4f", ck.config.iterations, structure_seconds_,
          static_cast<double>(ck.loss_curve.back()));
    }
    return *structure_;
  }
  double structure_seconds() {
    structure();
    return structure_seconds_;
  }

  const TradeoffReport& sweep() {
    if (!sweep_) {
      Models m;
      m.structure = structure();
      m.field = std::make_shared<StructureField>(m.structure.structure());
      const auto t = std::chrono::steady_clock::now();
      sweep_ = run_sweep(m, dataset(), {0, 5, 10, 15, 20, 25}, 11);
      log("sweep: %.1fs\n%s", seconds_since(t), sweep_->to_csv().c_str());
    }
    return *sweep_;
  }

  const Checkpoint& appearance() {
    if (!appearance_) {
      Checkpoint ck;
      ck.kind = NetKind::Appearance;
      ck.codec = structure().codec;
      ck.config.iterations = 400;
      ck.config.batch = 4;
      ck.config.seed = 5;
      auto net = std::make_shared<AppearanceNet>(AppearanceDims{}, mix_seed(5, 3));
      auto samples = appearance_samples(dataset(), "train");
      const auto t = std::chrono::steady_clock::now();
      ck.loss_curve = train_appearance(*net, samples, ck.config);
      quantize_f32(*net);
      ck.net = net;
      appearance_ = ck;
      log("appearance: %d iterations in %.1fs", ck.config.iterations, seconds_since(t));
    }
    return *appearance_;
  }

  template <class... A>
  static void log(const char* f, A... args) {
    std::fprintf(stderr, "  [info] ");
    std::fprintf(stderr, f, args...);
    std::fprintf(stderr, "\n");
  }

 private:
  fs::path dir_;
  std::optional<Dataset> ds_;
  std::optional<Checkpoint> structure_, appearance_;
  std::optional<TradeoffReport> sweep_;
  double structure_seconds_ = 0;
};

// ---------------------------------------------------------------------------

Outcome equation_identities() {
  std::mt19937_64 rng(1);
  const Vector z0 = randn(64, rng), eps = randn(64, rng);
  double worst = 0;
  worst = std::max(worst, (forward_noise(z0, eps, 0.0) - z0).cwiseAbs().maxCoeff());
  worst = std::max(worst, (forward_noise(z0, eps, 1.0) - eps).cwiseAbs().maxCoeff());
  for (int T : {1, 10, 25, 200}) {
    const StepSchedule s(T, 3.0);
    worst = std::max({worst, std::abs(s.t(0) - 1.0), std::abs(s.t(T))});
  }
  worst = std::max(worst, std::abs(StepSchedule::rescale(0.5, 3.0) - 0.75));
  const CodecSpec spec;
  const LatentGrid c = latent_noise(spec, 2), n = latent_noise(spec, 3);
  worst = std::max(worst, (inject(c, n, 0.0).values - c.values).cwiseAbs().maxCoeff());
  worst = std::max(worst, (inject(c, n, 1.0).values - n.values).cwiseAbs().maxCoeff());
  return {worst <= 1e-12, fmt("max deviation %.3g", worst)};
}

Outcome oracle_exactness() {
  std::mt19937_64 rng(5);
  const MixturePrior pm = MixturePrior::point_mass(randn(8, rng));
  const MixtureOracleField field(pm);
  double worst = 0;
  for (int T : {5, 25, 200})
    for (int k = 0; k < 64; ++k) {
      const Vector out = integrate(3.0 * randn(8, rng), field, StepSchedule(T, 3.0), 0, std::nullopt);
      worst = std::max(worst, (out - pm.means[0]).cwiseAbs().maxCoeff());
    }

  MixturePrior mix;
  mix.weights = {0.6, 0.4};
  mix.means = {Vector::Constant(1, 1.5), Vector::Constant(1, -1.0)};
  mix.stds = {0.4, 0.7};
  std::uniform_real_distribution<double> ut(0.15, 0.95), uz(-1.5, 1.5);
  int within = 0;
  double worst_z = 0;
  for (int probe = 0; probe < 20; ++probe) {
    const double t = ut(rng);
    const Vector z = Vector::Constant(1, uz(rng));
    const auto mc = oracle::conditional_velocity(mix, z, t, 200000, 0.05, 100 + probe);
    const double zscore = std::abs(oracle_velocity(mix, z, t)[0] - mc.mean[0]) / mc.stderr_[0];
    worst_z = std::max(worst_z, zscore);
    within += zscore <= 3.0;
  }
  return {worst < 1e-12 && within == 20,
          fmt("point-mass max error %.2g over 3x64 runs; MC probes within 3 SE: %d/20 (max %.2f SE)", worst, within, worst_z)};
}

Outcome distributional_sanity() {
  MixturePrior p;
  p.weights = {0.5, 0.3, 0.2};
  p.means = {Vector::Constant(2, 2.0), (Vector(2) << -2.0, 1.0).finished(), (Vector(2) << 0.5, -2.5).finished()};
  p.stds = {0.3, 0.5, 0.2};
  const int n = 4096;
  std::mt19937_64 rng(23);
  Matrix start(n, 2);
  for (int i = 0; i < n; ++i) start.row(i) = randn(2, rng).transpose();
  const Matrix gen = integrate_batch(start, MixtureOracleField(p), StepSchedule(100, 3.0), 0, std::vector<Condition>(n));
  auto to_matrix = [](const std::vector<Vector>& xs) {
    Matrix m(static_cast<Eigen::Index>(xs.size()), 2);
    for (std::size_t i = 0; i < xs.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = xs[i].transpose();
    return m;
  };
  const Matrix a = to_matrix(exact_sample(p, n, 21)), b = to_matrix(exact_sample(p, n, 22));
  const double fd = frechet_distance(gen, a), base = frechet_distance(b, a);
  return {fd <= 2 * base, fmt("FD(generated, exact) %.5f vs 2x baseline %.5f", fd, 2 * base)};
}

Outcome guidance_faithfulness() {
  const CodecSpec spec;
  const ControlScene a = sample_shape(chair_spec(), 9).scene, b = sample_shape(table_spec(), 10).scene;
  auto latent = [&](const ControlScene& s) {
    return encode(voxelize(normalize_to_unit_cube(s).first, spec.resolution()), spec).values;
  };
  MixturePrior prior;
  prior.weights = {0.5, 0.5};
  prior.means = {latent(a), latent(b)};
  prior.stds = {0.5, 0.5};
  const double sep = (prior.means[0] - prior.means[1]).norm();
  const MixtureOracleField field(prior);
  GuidanceConfig cfg;
  cfg.tau0 = 22;
  int nearer = 0;
  for (int seed = 0; seed < 100; ++seed) {
    cfg.seed = static_cast<std::uint64_t>(seed);
    const Vector z = generate_structure(a, field, spec, cfg).denoised.values;
    nearer += (z - prior.means[0]).norm() < (z - prior.means[1]).norm();
  }
  const bool ok = sep >= 6 * 0.5 && cfg.t0() <= 0.3 && nearer >= 95;
  return {ok, fmt("t0 %.3f, separation %.1f sigma, nearer the control's component in %d/100 runs", cfg.t0(), sep / 0.5, nearer)};
}

Outcome zero_step(Workspace& ws) {
  const Checkpoint& ck = ws.structure();
  const StructureField field(ck.structure());
  GuidanceConfig cfg;
  cfg.schedule = ck.schedule;
  cfg.tau0 = ck.schedule.steps();
  int exact = 0, n = 0;
  for (const auto& item : ws.dataset().items()) {
    if (n == 32) break;
    const ControlScene scene = ws.dataset().scene(item);
    cfg.label = item.category;
    cfg.seed = item.seed;
    const GenerationResult r = generate_structure(scene, field, ck.codec, cfg);
    exact += r.structure == roundtrip(voxelize(normalize_to_unit_cube(scene).first, ck.codec.resolution()), ck.codec);
    ++n;
  }
  return {exact == 32, fmt("%d/32 grid-exact", exact)};
}

Outcome trend(Workspace& ws) {
  const TradeoffReport& rep = ws.sweep();
  const auto& r = rep.rows;
  double lo = 1e300, hi = -1e300;
  for (const auto& row : r) {
    lo = std::min(lo, row.cd_e3);
    hi = std::max(hi, row.cd_e3);
  }
  int violations = 0;
  bool small = true;
  for (std::size_t i = 1; i < r.size(); ++i)
    if (r[i].cd_e3 > r[i - 1].cd_e3) {
      ++violations;
      small = small && (r[i].cd_e3 - r[i - 1].cd_e3) <= 0.05 * (hi - lo);
    }
  const bool cd_ok = r.size() == 6 && r.front().n >= 64 && (violations == 0 || (violations == 1 && small));
  const bool fd_ok = r.front().frechet <= r.back().frechet;
  const bool budget = ws.structure().config.iterations <= 20000 && ws.structure_seconds() <= 15 * 60;
  std::ostringstream cds;
  for (const auto& row : r) cds << (row.tau0 ? " " : "") << fmt("%.2f", row.cd_e3);
  return {cd_ok && fd_ok && budget,
          fmt("n=%d CD x1e3 by tau0 0..25: %s (%d rises); Frechet %.3f at tau0=0 vs %.3f at tau0=25; trained in %.0fs",
              r.front().n, cds.str().c_str(), violations, r.front().frechet, r.back().frechet, ws.structure_seconds())};
}

Outcome training_correctness() {
  // Gradients on the full-size structure net.
  StructureNet net(StructureDims{}, 1);
  {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 0.05);
    for (auto* p : net.parameters())
      for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += n(rng);
  }
  FlowBatch b;
  b.z0 = oracle::random_matrix(4, 4096, 3);
  b.eps = oracle::random_matrix(4, 4096, 4);
  b.ids = {0, 1, 2, 3};
  b.t = {0.2, 0.4, 0.6, 0.8};
  b.cond = {1, 2, 3, 1};
  net.zero_grad();
  batch_loss(net, b, true);
  auto params = net.parameters();
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> which(0, params.size() - 1);
  double worst = 0;
  for (int k = 0; k < 20; ++k) {
    ad::Parameter* p = params[which(rng)];
    const Eigen::Index i = std::uniform_int_distribution<Eigen::Index>(0, p->value.size() - 1)(rng);
    const double g = p->grad.data()[i], keep = p->value.data()[i], h = 1e-4;
    p->value.data()[i] = keep + h;
    const double up = batch_loss(net, b, false);
    p->value.data()[i] = keep - h;
    const double down = batch_loss(net, b, false);
    p->value.data()[i] = keep;
    const double num = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(g - num) / std::max({std::abs(g), std::abs(num), 1e-6}));
  }

  // Single-sample overfit on fixed evaluation draws.
  const CodecSpec spec;
  const Vector latent = encode(sample_shape(chair_spec(), 5).grid, spec).values;
  std::vector<StructureSample> one{{latent, 1, {}}};
  StructureDims small;
  small.hidden = 64;
  small.depth = 2;
  TrainConfig cfg;
  cfg.iterations = 2000;
  cfg.batch = 4;
  cfg.lr = 2e-3;
  cfg.seed = 7;
  std::mt19937_64 erng(99);
  std::vector<std::pair<Vector, double>> probes;
  for (int k = 0; k < 16; ++k) probes.emplace_back(randn(4096, erng), 0.05 + 0.9 * k / 15.0);
  auto eval = [&](const StructureNet& m) {
    double s = 0;
    for (const auto& [eps, t] : probes) s += flow_matching_loss(m, latent, eps, t, 1);
    return s / static_cast<double>(probes.size());
  };
  auto a = std::make_shared<StructureNet>(small, 3);
  const double before = eval(*a);
  const auto curve = train_structure(*a, one, cfg);
  const double after = eval(*a);

  // Byte reproducibility of the serialized checkpoint.
  auto bytes = [&] {
    auto m = std::make_shared<StructureNet>(small, 3);
    Checkpoint ck;
    ck.net = m;
    TrainConfig c = cfg;
    c.iterations = 300;
    ck.config = c;
    ck.loss_curve = train_structure(*m, one, c);
    quantize_f32(*m);
    return ck.to_bytes();
  };
  const bool same = bytes() == bytes();
  const double reduction = 1.0 - after / before;
  return {worst <= 1e-3 && reduction >= 0.9 && same,
          fmt("max FD rel err %.2e on 20 params; overfit loss %.4f -> %.4f (%.1f%% lower); reruns byte-identical: %s", worst,
              before, after, 100 * reduction, same ? "yes" : "no")};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  int chamfer_ok = 0;
  for (int k = 0; k < 100; ++k) {
    std::vector<Vec3> a, b;
    for (int i = 0; i < 100; ++i) a.emplace_back(u(rng), u(rng), u(rng));
    for (int i = 0; i < 100; ++i) b.emplace_back(u(rng) * 0.7, u(rng), u(rng) * 1.3);
    double brute = 0;
    for (const auto& [x, y] : {std::pair{&a, &b}, std::pair{&b, &a}}) {
      double s = 0;
      for (const auto& p : *x) {
        double best = 1e300;
        for (const auto& q : *y) best = std::min(best, (p - q).squaredNorm());
        s += best;
      }
      brute += s / 100.0;
    }
    chamfer_ok += chamfer(a, b) == chamfer_brute(a, b) && std::abs(chamfer(a, b) - brute) <= 1e-12 * brute;
  }
  double fd_err = 0;
  for (int k = 0; k < 20; ++k) {
    const Matrix a = oracle::random_matrix(50, 2, 100 + k, 1.0 + 0.1 * k);
    Matrix b = oracle::random_matrix(60, 2, 200 + k);
    b.col(1) = 0.3 * b.col(0) + 2.0 * b.col(1);
    fd_err = std::max(fd_err, std::abs(frechet_distance(a, b) - oracle::frechet_dense(a, b)));
  }
  int faces_ok = 0;
  for (int k = 0; k < 50; ++k) {
    const OccupancyGrid g = oracle::random_grid(12, 0.05 + 0.015 * k, 300 + k);
    const std::size_t want = oracle::exposed_faces_scan(g);
    faces_ok += exposed_faces(g) == want && (g.count() == 0 || extract_surface(g).faces.size() == 2 * want);
  }
  return {chamfer_ok == 100 && fd_err <= 1e-8 && faces_ok == 50,
          fmt("Chamfer exact %d/100; Frechet max |diff| %.2e; face counts %d/50", chamfer_ok, fd_err, faces_ok)};
}

Outcome spicet(Workspace& ws) {
  const Checkpoint& base = ws.structure();
  ControlDims cd;
  cd.coarse = base.codec.coarse();
  cd.channels = base.codec.channels();
  auto net = std::make_shared<ShapeConditionedNet>(*base.structure(), cd, mix_seed(4, 2));
  net->zero_control_output();

  // Untrained control pathway is invisible.
  const auto samples = structure_samples(ws.dataset(), "train", base.codec, true);
  Matrix z(8, base.codec.latent_size()), ctrl(8, base.codec.latent_size());
  std::vector<double> t;
  std::vector<TokenId> c;
  for (int i = 0; i < 8; ++i) {
    z.row(i) = samples[static_cast<std::size_t>(i)].latent.transpose() * 0.6 + oracle::random_matrix(1, z.cols(), 40 + i) * 0.4;
    ctrl.row(i) = samples[static_cast<std::size_t>(i)].control.transpose();
    t.push_back(0.1 + 0.1 * i);
    c.push_back(samples[static_cast<std::size_t>(i)].label);
  }
  ad::Tape ta(false), tb(false);
  const bool identical = base.structure()->forward(ta, z, t, c).value() == net->forward(tb, z, t, c, ctrl).value();

  Checkpoint ck;
  ck.kind = NetKind::ShapeConditioned;
  ck.codec = base.codec;
  ck.config.iterations = 1500;
  ck.config.seed = 4;
  const auto start = std::chrono::steady_clock::now();
  ck.loss_curve = train_shape_conditioned(*net, samples, ck.config);
  quantize_f32(*net);
  ck.net = net;
  Workspace::log("spicet: %d iterations in %.1fs", ck.config.iterations, seconds_since(start));
  const BatchEval ev = evaluate_shape_conditioned(ck, load_sweep_data(ws.dataset(), ck.codec), 11);

  const TradeoffReport& rep = ws.sweep();
  const double cd0 = rep.rows.front().cd_e3, cdT = rep.rows.back().cd_e3;
  const bool between = ev.cd_e3 >= std::min(cd0, cdT) && ev.cd_e3 <= std::max(cd0, cdT);
  return {identical && between, fmt("zero-init output identical: %s; CD x1e3 %.2f vs training-free %.2f (tau0=0) .. %.2f (tau0=T)",
                                    identical ? "yes" : "no", ev.cd_e3, cd0, cdT)};
}

Outcome local_conditioning(Workspace& ws) {
  // Exact reduction on the trained network.
  const Checkpoint& ck = ws.appearance();
  auto net = ck.appearance();
  const Matrix h = oracle::random_matrix(16, net->dims().hidden, 7);
  ad::Tape tape(false);
  const ad::Var hv = tape.constant(h);
  bool reduces = true;
  for (int layer = 0; layer < net->dims().depth; ++layer) {
    const Matrix g = net->token_attention(tape, hv, std::vector<TokenId>(16, vocab::kWhite), layer).value();
    const Matrix all = net->blended_attention(tape, hv, {vocab::kWhite, std::vector<TokenId>(16, vocab::kWhite)}, layer).value();
    reduces = reduces && g == all;
  }

  // Blue chair with a red seat, 32 seeds over validation chairs.
  double seat = 0, other = 0;
  int wins = 0, runs = 0;
  std::vector<DatasetItem> chairs;
  for (const auto& item : ws.dataset().split("val"))
    if (item.category == chair_spec().token) chairs.push_back(item);
  for (int k = 0; k < 32; ++k) {
    const Shape sh = ws.dataset().shape(chairs[static_cast<std::size_t>(k) % chairs.size()]);
    ControlScene sc = sh.scene;
    sc.local_labels.assign(sc.primitives.size(), vocab::kBlue);
    sc.local_labels[0] = vocab::kRed;
    const VoxelConditioning cond{vocab::kBlue, assign_local_tokens(sh.grid, sc)};
    const ColoredVoxels cv = generate_appearance(sh.grid, net, cond, mix_seed(3, static_cast<std::uint64_t>(k)), ck.schedule);
    double s = 0, o = 0;
    int ns = 0, no = 0;
    for (std::size_t i = 0; i < cv.colors.size(); ++i) {
      if (cond.local[i] == vocab::kRed) {
        s += cv.colors[i].x();
        ++ns;
      } else {
        o += cv.colors[i].x();
        ++no;
      }
    }
    if (ns == 0 || no == 0) continue;
    seat += s / ns;
    other += o / no;
    wins += s / ns > o / no;
    ++runs;
  }
  seat /= runs;
  other /= runs;
  return {reduces && runs == 32 && seat > other,
          fmt("all-local = global exact: %s; seat mean R %.3f vs other %.3f over %d seeds (%d/%d individually)",
              reduces ? "yes" : "no", seat, other, runs, wins, runs)};
}

}  // namespace

int main(int argc, char** argv) {
  keep_heap_warm();
  fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "sqforge-acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Workspace ws(dir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"equation identities", equation_identities},
      {"oracle exactness", oracle_exactness},
      {"distributional sanity", distributional_sanity},
      {"guidance faithfulness with exact field", guidance_faithfulness},
      {"zero-step contract", [&] { return zero_step(ws); }},
      {"faithfulness/realism trend over tau0", [&] { return trend(ws); }},
      {"training correctness", training_correctness},
      {"metric oracles", metric_oracles},
      {"shape-conditioned baseline sanity", [&] { return spicet(ws); }},
      {"local conditioning", [&] { return local_conditioning(ws); }},
  };
  int passed = 0;
  for (const auto& [name, run] : criteria) {
    const auto t = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    passed += o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail << fmt(" [%.1fs]", seconds_since(t))
              << std::endl;
  }
  std::cout << passed << "/" << criteria.size() << " criteria passed" << std::endl;
  fs::remove_all(dir);
  return passed == static_cast<int>(criteria.size()) ? 0 : 1;
}
