#include "sqforge/training.hpp"

#include "sqforge/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace sqforge {

void TrainConfig::validate() const {
  require(lr > 0 && beta1 > 0 && beta2 > 0 && eps > 0, "train config: rates must be positive");
  require(beta1 < 1 && beta2 < 1, "train config: betas must be < 1");
  require(batch >= 1 && iterations >= 1, "train config: batch and iterations must be positive");
}

Adam::Adam(Network& net, const TrainConfig& cfg) : params_(net.parameters()), cfg_(cfg) {
  for (auto* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    m_[i] = cfg_.beta1 * m_[i] + (1 - cfg_.beta1) * p.grad;
    v_[i] = cfg_.beta2 * v_[i] + (1 - cfg_.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= cfg_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
  }
}

void FlowBatch::canonicalize() {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  auto permute_rows = [&](Matrix& m) {
    if (m.rows() == 0) return;
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < order.size(); ++i)
      out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(order[i]));
    m = std::move(out);
  };
  permute_rows(z0);
  permute_rows(eps);
  permute_rows(control);
  std::vector<int> ids2;
  std::vector<double> t2;
  std::vector<TokenId> c2;
  for (std::size_t i : order) {
    ids2.push_back(ids[i]);
    t2.push_back(t[i]);
    c2.push_back(cond[i]);
  }
  ids = std::move(ids2);
  t = std::move(t2);
  cond = std::move(c2);
}

namespace {

Matrix noised(const FlowBatch& b) {
  Matrix zt(b.z0.rows(), b.z0.cols());
  for (Eigen::Index i = 0; i < zt.rows(); ++i) {
    const double t = b.t[static_cast<std::size_t>(i)];
    zt.row(i) = (1.0 - t) * b.z0.row(i) + t * b.eps.row(i);
  }
  return zt;
}

template <class Net, class Forward>
double run_loss(Net& net, FlowBatch& batch, bool accumulate_grad, Forward&& fwd) {
  batch.canonicalize();
  ad::Tape tape(accumulate_grad);
  const Matrix target = batch.eps - batch.z0;
  ad::Var pred = fwd(tape, noised(batch));
  ad::Var loss = ad::mse(pred, target);
  const double value = loss.value()(0, 0);
  if (accumulate_grad) {
    tape.backward(loss);
    net.accumulate_grads(tape);
  }
  return value;
}

}  // namespace

double batch_loss(StructureNet& net, FlowBatch batch, bool accumulate_grad) {
  return run_loss(net, batch, accumulate_grad, [&](ad::Tape& tape, const Matrix& zt) {
    return net.forward(tape, zt, batch.t, batch.cond);
  });
}

double batch_loss(ShapeConditionedNet& net, FlowBatch batch, bool accumulate_grad) {
  return run_loss(net, batch, accumulate_grad, [&](ad::Tape& tape, const Matrix& zt) {
    return net.forward(tape, zt, batch.t, batch.cond, batch.control);
  });
}

double flow_matching_loss(const StructureNet& net, const Vector& z0, const Vector& eps, double t,
                          TokenId cond) {
  require(z0.size() == eps.size(), "flow_matching_loss: shape mismatch");
  ad::Tape tape(false);
  Matrix zt = forward_noise(z0, eps, t).transpose();
  const Matrix target = (eps - z0).transpose();
  const double loss = ad::mse(net.forward(tape, zt, {t}, {cond}), target).value()(0, 0);
  require(std::isfinite(loss), "flow_matching_loss: non-finite forward");
  return loss;
}

namespace {

FlowBatch draw_batch(const std::vector<StructureSample>& data, int batch, std::mt19937_64& rng,
                     bool with_control) {
  std::uniform_int_distribution<int> pick(0, static_cast<int>(data.size()) - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index d = data.front().latent.size();
  FlowBatch b;
  b.z0.resize(batch, d);
  b.eps.resize(batch, d);
  if (with_control) b.control.resize(batch, d);
  for (int i = 0; i < batch; ++i) {
    const int idx = pick(rng);
    const auto& s = data[static_cast<std::size_t>(idx)];
    // Ties between duplicate draws keep draw order via stable sort; offset makes ids unique.
    b.ids.push_back(idx * batch + i);
    b.z0.row(i) = s.latent.transpose();
    for (Eigen::Index j = 0; j < d; ++j) b.eps(i, j) = normal(rng);
    b.t.push_back(unit(rng));
    b.cond.push_back(s.label);
    if (with_control) b.control.row(i) = s.control.transpose();
  }
  return b;
}

template <class Net>
std::vector<float> train_flow(Net& net, const std::vector<StructureSample>& data, const TrainConfig& cfg,
                              const TrainLog& log, bool with_control) {
  cfg.validate();
  require(!data.empty(), "train: corpus is empty");
  for (const auto& s : data) {
    require(s.latent.size() == net.dims().latent, "train: latent width does not match the net");
    if (with_control) require(s.control.size() == net.dims().latent, "train: missing control latent");
  }
  std::mt19937_64 rng(cfg.seed);
  Adam opt(net, cfg);
  std::vector<float> curve;
  curve.reserve(static_cast<std::size_t>(cfg.iterations));
  for (int it = 0; it < cfg.iterations; ++it) {
    net.zero_grad();
    const double loss = batch_loss(net, draw_batch(data, cfg.batch, rng, with_control), true);
    if (!std::isfinite(loss)) throw Error("training diverged at iteration " + std::to_string(it));
    opt.step();
    curve.push_back(static_cast<float>(loss));
    if (log) log(it, loss);
  }
  return curve;
}

}  // namespace

std::vector<float> train_structure(StructureNet& net, const std::vector<StructureSample>& data,
                                   const TrainConfig& cfg, const TrainLog& log) {
  return train_flow(net, data, cfg, log, false);
}

std::vector<float> train_shape_conditioned(ShapeConditionedNet& net,
                                           const std::vector<StructureSample>& data,
                                           const TrainConfig& cfg, const TrainLog& log) {
  return train_flow(net, data, cfg, log, true);
}

Matrix appearance_target(const std::vector<Vec3>& colors, int channels) {
  require(channels >= 3, "appearance target needs at least 3 channels");
  Matrix s = Matrix::Zero(static_cast<Eigen::Index>(colors.size()), channels);
  for (std::size_t i = 0; i < colors.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(colors[i][c], 0.02, 0.98);
      s(static_cast<Eigen::Index>(i), c) = std::log(v / (1.0 - v));
    }
  }
  return s;
}

double appearance_loss(AppearanceNet& net, const std::vector<AppearanceItem>& items, bool accumulate_grad) {
  require(!items.empty(), "appearance_loss: empty batch");
  const double w = 1.0 / static_cast<double>(items.size());
  double total = 0;
  // One tape per structure keeps peak memory at a single voxel set.
  for (const auto& item : items) {
    const auto& s = *item.sample;
    const Matrix s0 = appearance_target(s.colors, net.dims().channels);
    require(item.eps.rows() == s0.rows() && item.eps.cols() == s0.cols(), "appearance_loss: noise shape mismatch");
    const Matrix st = (1.0 - item.t) * s0 + item.t * item.eps;
    ad::Tape tape(accumulate_grad);
    ad::Var pred = net.forward(tape, st, item.t, s.ctx, s.cond);
    ad::Var l = ad::scale(ad::mse(pred, item.eps - s0), w);
    total += l.value()(0, 0);
    if (accumulate_grad) {
      tape.backward(l);
      net.accumulate_grads(tape);
    }
  }
  return total;
}

std::vector<float> train_appearance(AppearanceNet& net, std::vector<AppearanceSample>& data,
                                    const TrainConfig& cfg, const TrainLog& log) {
  cfg.validate();
  require(!data.empty(), "train: appearance corpus is empty");
  for (auto& s : data) {
    require(!s.cells.empty() && s.colors.size() == s.cells.size(), "train: appearance sample is malformed");
    if (s.ctx.count() != static_cast<int>(s.cells.size())) s.ctx = make_voxel_context(s.cells, s.resolution);
  }
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(data.size()) - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Adam opt(net, cfg);
  std::vector<float> curve;
  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<int> picks;
    for (int b = 0; b < cfg.batch; ++b) picks.push_back(pick(rng));
    std::vector<AppearanceItem> items;
    for (int idx : picks) {
      const auto& s = data[static_cast<std::size_t>(idx)];
      Matrix eps(static_cast<Eigen::Index>(s.cells.size()), net.dims().channels);
      for (Eigen::Index j = 0; j < eps.size(); ++j) eps.data()[j] = normal(rng);
      items.push_back({&s, std::move(eps), unit(rng)});
    }
    net.zero_grad();
    const double loss = appearance_loss(net, items, true);
    if (!std::isfinite(loss)) throw Error("training diverged at iteration " + std::to_string(it));
    opt.step();
    curve.push_back(static_cast<float>(loss));
    if (log) log(it, loss);
  }
  return curve;
}

void quantize_f32(Network& net) {
  for (auto* p : net.parameters()) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i)
      p->value.data()[i] = static_cast<double>(static_cast<float>(p->value.data()[i]));
  }
}

}  // namespace sqforge
