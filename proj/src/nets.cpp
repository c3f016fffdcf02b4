#include "sqforge/nets.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <unordered_map>

namespace sqforge {

namespace {

constexpr int kTimeFeatures = 16;
constexpr int kPosFeatures = 12;

Matrix glorot(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double gain = 1.0) {
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

Matrix zeros(Eigen::Index rows, Eigen::Index cols) { return Matrix::Zero(rows, cols); }

std::vector<TokenId> tokens_of(const std::vector<Condition>& conds) {
  std::vector<TokenId> out;
  out.reserve(conds.size());
  for (const auto& c : conds) out.push_back(c.value_or(0));
  return out;
}

}  // namespace

std::string_view net_kind_name(NetKind kind) {
  switch (kind) {
    case NetKind::Structure: return "structure";
    case NetKind::ShapeConditioned: return "spicet";
    case NetKind::Appearance: return "appearance";
  }
  return "unknown";
}

Matrix time_features(const std::vector<double>& t) {
  Matrix out(static_cast<Eigen::Index>(t.size()), kTimeFeatures);
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (int k = 0; k < kTimeFeatures / 2; ++k) {
      const double freq = std::pow(10.0, 3.0 * k / (kTimeFeatures / 2 - 1));
      out(static_cast<Eigen::Index>(i), k) = std::sin(freq * t[i]);
      out(static_cast<Eigen::Index>(i), k + kTimeFeatures / 2) = std::cos(freq * t[i]);
    }
  }
  return out;
}

Eigen::Matrix<double, 1, 12> position_features(const Vec3& p) {
  Eigen::Matrix<double, 1, 12> f;
  for (int a = 0; a < 3; ++a) {
    f(4 * a + 0) = std::sin(std::numbers::pi * p[a]);
    f(4 * a + 1) = std::cos(std::numbers::pi * p[a]);
    f(4 * a + 2) = std::sin(2 * std::numbers::pi * p[a]);
    f(4 * a + 3) = std::cos(2 * std::numbers::pi * p[a]);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Network

std::vector<ad::Parameter*> Network::parameters() {
  std::vector<ad::Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const ad::Parameter*> Network::parameters() const {
  std::vector<const ad::Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

ad::Parameter& Network::parameter(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return *p;
  throw Error("no parameter named '" + name + "'");
}

const ad::Parameter& Network::get(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return *p;
  throw Error("no parameter named '" + name + "'");
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void Network::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

void Network::accumulate_grads(const ad::Tape& tape) {
  std::unordered_map<const ad::Parameter*, ad::Parameter*> mine;
  for (auto& p : params_) mine.emplace(p.get(), p.get());
  tape.for_each_param_grad([&](const ad::Parameter& p, const Matrix& g) {
    auto it = mine.find(&p);
    if (it != mine.end()) it->second->grad += g;
  });
}

ad::Parameter& Network::add_param(std::string name, Matrix value) {
  params_.push_back(std::make_unique<ad::Parameter>(std::move(name), std::move(value)));
  return *params_.back();
}

// ---------------------------------------------------------------------------
// StructureNet

StructureNet::StructureNet(const StructureDims& dims, std::uint64_t seed) : dims_(dims) {
  require(dims.latent > 0 && dims.hidden > 0 && dims.depth >= 0 && dims.vocab > 0,
          "structure net dimensions must be positive");
  std::mt19937_64 rng(seed);
  const int h = dims.hidden;
  add_param("in.w", glorot(dims.latent, h, rng));
  add_param("in.t", glorot(kTimeFeatures, h, rng));
  add_param("cond.table", glorot(dims.vocab, dims.cond_width, rng));
  add_param("in.c", glorot(dims.cond_width, h, rng));
  add_param("in.b", zeros(1, h));
  for (int i = 0; i < dims.depth; ++i) {
    const std::string b = "block" + std::to_string(i);
    add_param(b + ".w1", glorot(h, h, rng));
    add_param(b + ".t", glorot(kTimeFeatures, h, rng));
    add_param(b + ".b1", zeros(1, h));
    add_param(b + ".w2", glorot(h, h, rng, 0.5));
    add_param(b + ".b2", zeros(1, h));
  }
  add_param("out.w", glorot(h, dims.latent, rng, 0.5));
  add_param("out.b", zeros(1, dims.latent));
  // Time-dependent gain on the raw input; the trunk alone cannot pass per-dimension noise through.
  add_param("skip.t", zeros(kTimeFeatures, 1));
  add_param("skip.b", zeros(1, 1));
}

ad::Var StructureNet::run(ad::Tape& tape, const Matrix& z, const std::vector<double>& t,
                          const std::vector<TokenId>& cond,
                          const std::function<ad::Var(ad::Var, int)>& hook) const {
  using namespace ad;
  require(z.cols() == dims_.latent, "structure net: latent width mismatch");
  require(static_cast<std::size_t>(z.rows()) == t.size() && t.size() == cond.size(),
          "structure net: one time and condition per row");
  for (TokenId c : cond) require(c >= 0 && c < dims_.vocab, "structure net: condition token out of range");

  Var zin = tape.constant(z);
  Var temb = tape.constant(time_features(t));
  Var cemb = gather_rows(tape.param(get("cond.table")), cond);
  Var h = add(add(matmul(zin, tape.param(get("in.w"))), matmul(temb, tape.param(get("in.t")))),
              matmul(cemb, tape.param(get("in.c"))));
  h = add_row(h, tape.param(get("in.b")));
  for (int i = 0; i < dims_.depth; ++i) {
    if (hook) h = hook(h, i);
    const std::string b = "block" + std::to_string(i);
    Var pre = add(matmul(h, tape.param(get(b + ".w1"))), matmul(temb, tape.param(get(b + ".t"))));
    Var a = ad::tanh(add_row(pre, tape.param(get(b + ".b1"))));
    h = add(h, add_row(matmul(a, tape.param(get(b + ".w2"))), tape.param(get(b + ".b2"))));
  }
  Var gain = add_row(matmul(temb, tape.param(get("skip.t"))), tape.param(get("skip.b")));
  Var skip = mul(matmul(gain, tape.constant(Matrix::Ones(1, dims_.latent))), zin);
  return add(add_row(matmul(h, tape.param(get("out.w"))), tape.param(get("out.b"))), skip);
}

ad::Var StructureNet::forward(ad::Tape& tape, const Matrix& z, const std::vector<double>& t,
                              const std::vector<TokenId>& cond) const {
  return run(tape, z, t, cond, {});
}

// ---------------------------------------------------------------------------
// ShapeConditionedNet

ShapeConditionedNet::ShapeConditionedNet(const StructureDims& dims, const ControlDims& control,
                                         std::uint64_t seed)
    : StructureNet(dims, seed), control_(control) {
  add_control_params(mix_seed(seed, 1));
}

ShapeConditionedNet::ShapeConditionedNet(const StructureNet& base, const ControlDims& control,
                                         std::uint64_t seed)
    : StructureNet(base.dims(), seed), control_(control) {
  for (auto* p : parameters()) {
    for (const auto* q : base.parameters())
      if (q->name == p->name) p->value = q->value;
  }
  add_control_params(mix_seed(seed, 1));
}

void ShapeConditionedNet::add_control_params(std::uint64_t seed) {
  const int h = dims_.hidden, d = control_.token_width;
  require(d > 0 && h % d == 0, "shape-conditioned net: hidden width must be a multiple of token width");
  require(control_.coarse * control_.coarse * control_.coarse * control_.channels == dims_.latent,
          "shape-conditioned net: control dims must match latent width");
  std::mt19937_64 rng(seed);
  const int in = control_.channels + kPosFeatures;
  for (int i = 0; i < dims_.depth; ++i) {
    const std::string b = "ctrl" + std::to_string(i);
    add_param(b + ".q", glorot(h, h, rng));
    add_param(b + ".k", glorot(in, d, rng));
    add_param(b + ".v", glorot(in, d, rng));
    add_param(b + ".o", zeros(h, h));
  }
}

void ShapeConditionedNet::zero_control_output() {
  for (int i = 0; i < dims_.depth; ++i) parameter("ctrl" + std::to_string(i) + ".o").value.setZero();
}

Matrix ShapeConditionedNet::control_tokens(const Matrix& control) const {
  const int g = control_.coarse, c = control_.channels;
  const Eigen::Index cells = static_cast<Eigen::Index>(g) * g * g;
  Matrix x(control.rows() * cells, c + kPosFeatures);
  for (Eigen::Index n = 0; n < control.rows(); ++n) {
    for (int pz = 0; pz < g; ++pz)
      for (int py = 0; py < g; ++py)
        for (int px = 0; px < g; ++px) {
          const Eigen::Index cell = (static_cast<Eigen::Index>(pz) * g + py) * g + px;
          const Eigen::Index row = n * cells + cell;
          x.row(row).head(c) = control.row(n).segment(cell * c, c);
          x.row(row).tail(kPosFeatures) =
              position_features(Vec3((px + 0.5) / g, (py + 0.5) / g, (pz + 0.5) / g));
        }
  }
  return x;
}

ad::Var ShapeConditionedNet::forward(ad::Tape& tape, const Matrix& z, const std::vector<double>& t,
                                     const std::vector<TokenId>& cond, const Matrix& control) const {
  using namespace ad;
  require(control.rows() == z.rows() && control.cols() == dims_.latent,
          "shape-conditioned net: one control latent per row");
  const int h = dims_.hidden, d = control_.token_width;
  const int nq = h / d;
  const int nk = control_.coarse * control_.coarse * control_.coarse;
  const Eigen::Index n = z.rows();
  Var tokens = tape.constant(control_tokens(control));
  auto hook = [&](Var hidden, int i) {
    const std::string b = "ctrl" + std::to_string(i);
    Var q = reshape(matmul(hidden, tape.param(get(b + ".q"))), n * nq, d);
    Var k = matmul(tokens, tape.param(get(b + ".k")));
    Var v = matmul(tokens, tape.param(get(b + ".v")));
    Var att = reshape(attend_blocks(q, k, v, nq, nk), n, h);
    return add(hidden, matmul(att, tape.param(get(b + ".o"))));
  };
  return run(tape, z, t, cond, hook);
}

// ---------------------------------------------------------------------------
// AppearanceNet

VoxelContext make_voxel_context(const std::vector<std::array<int, 3>>& cells, int resolution) {
  VoxelContext ctx;
  const Eigen::Index l = static_cast<Eigen::Index>(cells.size());
  ctx.positions.resize(l, kPosFeatures);
  std::unordered_map<long long, int> row_of;
  auto key = [resolution](int x, int y, int z) {
    return (static_cast<long long>(z) * resolution + y) * resolution + x;
  };
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    ctx.positions.row(static_cast<Eigen::Index>(i)) =
        position_features(Vec3((c[0] + 0.5) / resolution, (c[1] + 0.5) / resolution,
                               (c[2] + 0.5) / resolution));
    row_of.emplace(key(c[0], c[1], c[2]), static_cast<int>(i));
  }
  static constexpr int kOffsets[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                         {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::vector<int> nbrs;
    for (const auto& o : kOffsets) {
      const int x = cells[i][0] + o[0], y = cells[i][1] + o[1], z = cells[i][2] + o[2];
      if (x < 0 || y < 0 || z < 0 || x >= resolution || y >= resolution || z >= resolution) continue;
      auto it = row_of.find(key(x, y, z));
      if (it != row_of.end()) nbrs.push_back(it->second);
    }
    for (int j : nbrs)
      trips.emplace_back(static_cast<int>(i), j, 1.0 / static_cast<double>(nbrs.size()));
  }
  auto p = std::make_shared<ad::SparseMatrix>(l, l);
  p->setFromTriplets(trips.begin(), trips.end());
  ctx.neighbor_mean = std::move(p);
  return ctx;
}

AppearanceNet::AppearanceNet(const AppearanceDims& dims, std::uint64_t seed) : dims_(dims) {
  require(dims.channels > 0 && dims.hidden > 0 && dims.prompt_len > 0 && dims.attn_width > 0,
          "appearance net dimensions must be positive");
  std::mt19937_64 rng(seed);
  const int h = dims.hidden, a = dims.attn_width;
  add_param("in.w", glorot(dims.channels + kPosFeatures + kTimeFeatures, h, rng));
  add_param("in.b", zeros(1, h));
  add_param("embed", glorot(static_cast<Eigen::Index>(dims.vocab) * dims.prompt_len, a, rng, 2.0));
  for (int l = 0; l < dims.depth; ++l) {
    const std::string at = "attn" + std::to_string(l);
    add_param(at + ".q", glorot(h, a, rng));
    add_param(at + ".k", glorot(a, a, rng));
    add_param(at + ".v", glorot(a, a, rng));
    add_param(at + ".o", glorot(a, h, rng));
    const std::string m = "mlp" + std::to_string(l);
    add_param(m + ".w1", glorot(h, h, rng));
    add_param(m + ".t", glorot(kTimeFeatures, h, rng));
    add_param(m + ".b1", zeros(1, h));
    add_param(m + ".w2", glorot(h, h, rng, 0.5));
    add_param(m + ".b2", zeros(1, h));
  }
  add_param("out.w", glorot(h, dims.channels, rng, 0.5));
  add_param("out.b", zeros(1, dims.channels));
  add_param("skip.t", zeros(kTimeFeatures, 1));
  add_param("skip.b", zeros(1, 1));
}

ad::Var AppearanceNet::token_attention(ad::Tape& tape, ad::Var hidden,
                                       const std::vector<TokenId>& tokens, int layer) const {
  using namespace ad;
  for (TokenId tok : tokens) require(tok >= 0 && tok < dims_.vocab, "appearance: missing token embedding");
  const std::string at = "attn" + std::to_string(layer);
  Var embed = tape.param(get("embed"));
  Var q = matmul(hidden, tape.param(get(at + ".q")));
  Var k = matmul(embed, tape.param(get(at + ".k")));
  Var v = matmul(embed, tape.param(get(at + ".v")));
  return matmul(attend_groups(q, k, v, tokens, dims_.prompt_len), tape.param(get(at + ".o")));
}

ad::Var AppearanceNet::blended_attention(ad::Tape& tape, ad::Var hidden, const VoxelConditioning& cond,
                                         int layer) const {
  using namespace ad;
  const std::vector<TokenId> global(static_cast<std::size_t>(hidden.rows()), cond.global);
  Var g = token_attention(tape, hidden, global, layer);
  if (cond.local.empty()) return g;
  require(static_cast<Eigen::Index>(cond.local.size()) == hidden.rows(),
          "appearance: one local token per active voxel");
  Var l = token_attention(tape, hidden, cond.local, layer);
  return add(scale(g, 0.5), scale(l, 0.5));
}

ad::Var AppearanceNet::forward(ad::Tape& tape, const Matrix& s, double t, const VoxelContext& ctx,
                               const VoxelConditioning& cond) const {
  using namespace ad;
  const Eigen::Index l = s.rows();
  require(s.cols() == dims_.channels && l == ctx.count(), "appearance net: feature shape mismatch");
  Matrix temb_rows = time_features(std::vector<double>(static_cast<std::size_t>(l), t));
  Matrix x(l, dims_.channels + kPosFeatures + kTimeFeatures);
  x << s, ctx.positions, temb_rows;
  Var temb = tape.constant(std::move(temb_rows));
  Var h = add_row(matmul(tape.constant(std::move(x)), tape.param(get("in.w"))), tape.param(get("in.b")));
  for (int layer = 0; layer < dims_.depth; ++layer) {
    h = add(h, sparse_left(ctx.neighbor_mean, h));
    h = add(h, blended_attention(tape, h, cond, layer));
    const std::string m = "mlp" + std::to_string(layer);
    Var pre = add(matmul(h, tape.param(get(m + ".w1"))), matmul(temb, tape.param(get(m + ".t"))));
    Var a = ad::tanh(add_row(pre, tape.param(get(m + ".b1"))));
    h = add(h, add_row(matmul(a, tape.param(get(m + ".w2"))), tape.param(get(m + ".b2"))));
  }
  // All rows share t, so the skip gain is one scalar.
  Var gain = add_row(matmul(tape.constant(time_features({t})), tape.param(get("skip.t"))), tape.param(get("skip.b")));
  Var spread = matmul(matmul(tape.constant(Matrix::Ones(l, 1)), gain), tape.constant(Matrix::Ones(1, dims_.channels)));
  Var skip = mul(spread, tape.constant(s));
  return add(add_row(matmul(h, tape.param(get("out.w"))), tape.param(get("out.b"))), skip);
}

// ---------------------------------------------------------------------------
// Fields

Matrix StructureField::evaluate_batch(const Matrix& z, double t, const std::vector<Condition>& conds) const {
  ad::Tape tape(false);
  const std::vector<double> ts(static_cast<std::size_t>(z.rows()), t);
  return net_->forward(tape, z, ts, tokens_of(conds)).value();
}

Matrix ShapeConditionedField::evaluate_batch(const Matrix& z, double t,
                                             const std::vector<Condition>& conds) const {
  require(controls_.rows() == z.rows(), "shape-conditioned field: one control per batch row");
  ad::Tape tape(false);
  const std::vector<double> ts(static_cast<std::size_t>(z.rows()), t);
  return net_->forward(tape, z, ts, tokens_of(conds), controls_).value();
}

Vector AppearanceField::evaluate(const Vector& z, double t, Condition) const {
  const int c = net_->dims().channels;
  require(z.size() == static_cast<Eigen::Index>(ctx_.count()) * c, "appearance field: dimension mismatch");
  ad::Tape tape(false);
  Matrix s = Eigen::Map<const Matrix>(z.data(), ctx_.count(), c);
  Matrix out = net_->forward(tape, s, t, ctx_, cond_).value();
  return Eigen::Map<const Vector>(out.data(), out.size());
}

}  // namespace sqforge
