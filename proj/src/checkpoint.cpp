#include "sqforge/checkpoint.hpp"

#include "sqforge/binary_io.hpp"

namespace sqforge {

namespace {

constexpr std::string_view kMagic = "SCCKPT1";

std::uint32_t u32(int v) { return static_cast<std::uint32_t>(v); }

}  // namespace

std::shared_ptr<const StructureNet> Checkpoint::structure() const {
  auto p = std::dynamic_pointer_cast<const StructureNet>(net);
  require(p && kind == NetKind::Structure, "checkpoint does not hold a structure net");
  return p;
}

std::shared_ptr<const ShapeConditionedNet> Checkpoint::shape_conditioned() const {
  auto p = std::dynamic_pointer_cast<const ShapeConditionedNet>(net);
  require(p != nullptr, "checkpoint does not hold a shape-conditioned net");
  return p;
}

std::shared_ptr<const AppearanceNet> Checkpoint::appearance() const {
  auto p = std::dynamic_pointer_cast<const AppearanceNet>(net);
  require(p != nullptr, "checkpoint does not hold an appearance net");
  return p;
}

std::string Checkpoint::to_bytes() const {
  require(net != nullptr, "checkpoint has no network");
  io::Writer w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(kind));
  int vocab = 0;
  if (kind == NetKind::Appearance) {
    const auto& d = appearance()->dims();
    for (int v : {d.channels, d.hidden, d.depth, d.prompt_len, d.attn_width}) w.u32(u32(v));
    vocab = d.vocab;
  } else {
    const auto& d = std::dynamic_pointer_cast<const StructureNet>(net)->dims();
    for (int v : {d.latent, d.hidden, d.depth, d.cond_width}) w.u32(u32(v));
    if (kind == NetKind::ShapeConditioned) {
      const auto& c = shape_conditioned()->control_dims();
      for (int v : {c.coarse, c.channels, c.token_width}) w.u32(u32(v));
    }
    vocab = d.vocab;
  }
  w.u32(u32(vocab));
  w.u32(u32(schedule.steps()));
  w.f64(schedule.lambda());
  w.u32(u32(codec.resolution()));
  w.u32(u32(codec.patch()));
  w.u32(u32(codec.channels()));
  w.f64(config.lr);
  w.f64(config.beta1);
  w.f64(config.beta2);
  w.f64(config.eps);
  w.u32(u32(config.batch));
  w.u32(u32(config.iterations));
  w.u64(config.seed);
  const auto params = std::as_const(*net).parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    w.str(p->name);
    w.u32(static_cast<std::uint32_t>(p->value.rows()));
    w.u32(static_cast<std::uint32_t>(p->value.cols()));
    for (Eigen::Index i = 0; i < p->value.size(); ++i) w.f32(static_cast<float>(p->value.data()[i]));
  }
  w.u32(static_cast<std::uint32_t>(loss_curve.size()));
  for (float l : loss_curve) w.f32(l);
  return w.take();
}

Checkpoint Checkpoint::from_bytes(const std::string& bytes) {
  io::Reader r(bytes);
  require(r.bytes(kMagic.size()) == kMagic, "not a checkpoint (bad magic)");
  require(r.u32() == kCheckpointVersion, "unsupported checkpoint version");
  Checkpoint ck;
  const std::uint32_t kind = r.u32();
  require(kind <= 2, "unknown network kind in checkpoint");
  ck.kind = static_cast<NetKind>(kind);
  auto rd = [&r] { return static_cast<int>(r.u32()); };
  if (ck.kind == NetKind::Appearance) {
    AppearanceDims d;
    d.channels = rd();
    d.hidden = rd();
    d.depth = rd();
    d.prompt_len = rd();
    d.attn_width = rd();
    d.vocab = rd();
    ck.net = std::make_shared<AppearanceNet>(d, 0);
  } else {
    StructureDims d;
    d.latent = rd();
    d.hidden = rd();
    d.depth = rd();
    d.cond_width = rd();
    if (ck.kind == NetKind::ShapeConditioned) {
      ControlDims c;
      c.coarse = rd();
      c.channels = rd();
      c.token_width = rd();
      d.vocab = rd();
      ck.net = std::make_shared<ShapeConditionedNet>(d, c, 0);
    } else {
      d.vocab = rd();
      ck.net = std::make_shared<StructureNet>(d, 0);
    }
  }
  const int steps = rd();
  const double lambda = r.f64();
  ck.schedule = StepSchedule(steps, lambda);
  const int res = rd(), patch = rd(), channels = rd();
  ck.codec = CodecSpec(res, patch, channels);
  ck.config.lr = r.f64();
  ck.config.beta1 = r.f64();
  ck.config.beta2 = r.f64();
  ck.config.eps = r.f64();
  ck.config.batch = rd();
  ck.config.iterations = rd();
  ck.config.seed = r.u64();
  const std::uint32_t nparams = r.u32();
  auto params = ck.net->parameters();
  require(nparams == params.size(), "checkpoint parameter count does not match its net kind");
  for (std::uint32_t i = 0; i < nparams; ++i) {
    const std::string name = r.str();
    ad::Parameter& p = ck.net->parameter(name);
    const auto rows = static_cast<Eigen::Index>(r.u32());
    const auto cols = static_cast<Eigen::Index>(r.u32());
    require(rows == p.value.rows() && cols == p.value.cols(), "checkpoint block '" + name + "' has wrong shape");
    for (Eigen::Index k = 0; k < p.value.size(); ++k) p.value.data()[k] = r.f32();
  }
  const std::uint32_t nloss = r.u32();
  ck.loss_curve.resize(nloss);
  for (auto& l : ck.loss_curve) l = r.f32();
  require(r.done(), "trailing bytes after checkpoint");
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const { io::write_file_atomic(path, to_bytes()); }

Checkpoint Checkpoint::load(const std::filesystem::path& path) { return from_bytes(io::read_file(path)); }

std::string Checkpoint::id() const { return hex64(fnv1a(to_bytes())); }

}  // namespace sqforge
