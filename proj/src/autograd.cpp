#include "sqforge/autograd.hpp"

#include <cmath>

namespace sqforge::ad {

const Matrix& Var::value() const { return tape->value(id); }

Matrix& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) {
    const Matrix& v = n.ref ? *n.ref : n.value;
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

Var Tape::push(Matrix value, bool needs_grad, std::function<void()> backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad && grads_;
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, {}); }

Var Tape::param(const Parameter& p) {
  Node n;
  n.ref = &p.value;
  n.needs_grad = grads_;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(Var root) {
  require(root.tape == this, "backward: variable belongs to another tape");
  require(value(root.id).size() == 1, "backward: root must be a scalar");
  grad(root.id).setOnes();
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward();
  }
}

void Tape::for_each_param_grad(const std::function<void(const Parameter&, const Matrix&)>& fn) const {
  for (const Node& n : nodes_) {
    if (n.param && n.grad.size() != 0) fn(*n.param, n.grad);
  }
}

namespace {

bool either(Var a, Var b) { return a.tape->needs_grad(a.id) || b.tape->needs_grad(b.id); }

void check_same(Var a, Var b, const char* op) {
  require(a.tape == b.tape, std::string(op) + ": variables from different tapes");
  require(a.rows() == b.rows() && a.cols() == b.cols(), std::string(op) + ": shape mismatch");
}

}  // namespace

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Tape* t = a.tape;
  Matrix out = a.value() * b.value();
  Var r{t, t->size()};
  return t->push(std::move(out), either(a, b), [t, a, b, r] {
    const Matrix& g = t->grad(r.id);
    if (t->needs_grad(a.id)) t->grad(a.id).noalias() += g * t->value(b.id).transpose();
    if (t->needs_grad(b.id)) t->grad(b.id).noalias() += t->value(a.id).transpose() * g;
  });
}

Var add(Var a, Var b) {
  check_same(a, b, "add");
  Tape* t = a.tape;
  Var r{t, t->size()};
  return t->push(a.value() + b.value(), either(a, b), [t, a, b, r] {
    const Matrix& g = t->grad(r.id);
    if (t->needs_grad(a.id)) t->grad(a.id) += g;
    if (t->needs_grad(b.id)) t->grad(b.id) += g;
  });
}

Var sub(Var a, Var b) {
  check_same(a, b, "sub");
  Tape* t = a.tape;
  Var r{t, t->size()};
  return t->push(a.value() - b.value(), either(a, b), [t, a, b, r] {
    const Matrix& g = t->grad(r.id);
    if (t->needs_grad(a.id)) t->grad(a.id) += g;
    if (t->needs_grad(b.id)) t->grad(b.id) -= g;
  });
}

Var mul(Var a, Var b) {
  check_same(a, b, "mul");
  Tape* t = a.tape;
  Var r{t, t->size()};
  return t->push(a.value().cwiseProduct(b.value()), either(a, b), [t, a, b, r] {
    const Matrix& g = t->grad(r.id);
    if (t->needs_grad(a.id)) t->grad(a.id) += g.cwiseProduct(t->value(b.id));
    if (t->needs_grad(b.id)) t->grad(b.id) += g.cwiseProduct(t->value(a.id));
  });
}

Var scale(Var a, double s) {
  Tape* t = a.tape;
  Var r{t, t->size()};
  return t->push(a.value() * s, t->needs_grad(a.id), [t, a, r, s] {
    t->grad(a.id) += s * t->grad(r.id);
  });
}

Var add_row(Var a, Var b) {
  require(b.rows() == 1 && b.cols() == a.cols(), "add_row: bias must be 1×F");
  Tape* t = a.tape;
  Matrix out = a.value();
  out.rowwise() += b.value().row(0);
  Var r{t, t->size()};
  return t->push(std::move(out), either(a, b), [t, a, b, r] {
    const Matrix& g = t->grad(r.id);
    if (t->needs_grad(a.id)) t->grad(a.id) += g;
    if (t->needs_grad(b.id)) t->grad(b.id) += g.colwise().sum();
  });
}

Var tanh(Var a) {
  Tape* t = a.tape;
  Matrix out = a.value().array().tanh().matrix();
  Var r{t, t->size()};
  return t->push(std::move(out), t->needs_grad(a.id), [t, a, r] {
    const Matrix& y = t->value(r.id);
    t->grad(a.id).array() += t->grad(r.id).array() * (1.0 - y.array().square());
  });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  require(rows * cols == a.value().size(), "reshape: element count changes");
  Tape* t = a.tape;
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  Var r{t, t->size()};
  return t->push(std::move(out), t->needs_grad(a.id), [t, a, r] {
    Matrix& ga = t->grad(a.id);
    ga += Eigen::Map<const Matrix>(t->grad(r.id).data(), ga.rows(), ga.cols());
  });
}

Var concat_cols(Var a, Var b) {
  require(a.rows() == b.rows(), "concat_cols: row counts differ");
  Tape* t = a.tape;
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  Var r{t, t->size()};
  return t->push(std::move(out), either(a, b), [t, a, b, r] {
    const Matrix& g = t->grad(r.id);
    const Eigen::Index ca = t->value(a.id).cols();
    if (t->needs_grad(a.id)) t->grad(a.id) += g.leftCols(ca);
    if (t->needs_grad(b.id)) t->grad(b.id) += g.rightCols(g.cols() - ca);
  });
}

Var gather_rows(Var table, std::vector<int> index) {
  Tape* t = table.tape;
  const Matrix& tv = table.value();
  Matrix out(static_cast<Eigen::Index>(index.size()), tv.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] >= 0 && index[i] < tv.rows(), "gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = tv.row(index[i]);
  }
  Var r{t, t->size()};
  return t->push(std::move(out), t->needs_grad(table.id), [t, table, r, index = std::move(index)] {
    const Matrix& g = t->grad(r.id);
    Matrix& gt = t->grad(table.id);
    for (std::size_t i = 0; i < index.size(); ++i) gt.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var sparse_left(std::shared_ptr<const SparseMatrix> p, Var a) {
  require(p->cols() == a.rows(), "sparse_left: dimension mismatch");
  Tape* t = a.tape;
  Matrix out = (*p) * a.value();
  Var r{t, t->size()};
  return t->push(std::move(out), t->needs_grad(a.id), [t, a, r, p] {
    t->grad(a.id).noalias() += p->transpose() * t->grad(r.id);
  });
}

namespace {

void softmax_rows(Matrix& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double mx = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - mx).exp().matrix();
    s.row(i) /= s.row(i).sum();
  }
}

// dS = A ⊙ (dA − rowsum(dA ⊙ A))
Matrix softmax_backward(const Matrix& a, const Matrix& da) {
  Matrix ds = da;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double dot = a.row(i).dot(da.row(i));
    ds.row(i) = a.row(i).cwiseProduct((da.row(i).array() - dot).matrix());
  }
  return ds;
}

}  // namespace

Var attend_blocks(Var q, Var k, Var v, int nq, int nk) {
  require(q.cols() == k.cols(), "attend_blocks: query/key widths differ");
  require(k.rows() == v.rows(), "attend_blocks: key/value counts differ");
  require(q.rows() % nq == 0 && k.rows() % nk == 0 && q.rows() / nq == k.rows() / nk,
          "attend_blocks: block structure mismatch");
  Tape* t = q.tape;
  const Eigen::Index blocks = q.rows() / nq;
  const double inv = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  auto probs = std::make_shared<std::vector<Matrix>>(static_cast<std::size_t>(blocks));
  Matrix out(q.rows(), v.cols());
  for (Eigen::Index b = 0; b < blocks; ++b) {
    Matrix s = inv * q.value().middleRows(b * nq, nq) * k.value().middleRows(b * nk, nk).transpose();
    softmax_rows(s);
    out.middleRows(b * nq, nq).noalias() = s * v.value().middleRows(b * nk, nk);
    (*probs)[static_cast<std::size_t>(b)] = std::move(s);
  }
  const bool ng = t->needs_grad(q.id) || t->needs_grad(k.id) || t->needs_grad(v.id);
  Var r{t, t->size()};
  return t->push(std::move(out), ng, [t, q, k, v, r, nq, nk, blocks, inv, probs] {
    const Matrix& g = t->grad(r.id);
    for (Eigen::Index b = 0; b < blocks; ++b) {
      const Matrix& a = (*probs)[static_cast<std::size_t>(b)];
      const auto gb = g.middleRows(b * nq, nq);
      if (t->needs_grad(v.id)) t->grad(v.id).middleRows(b * nk, nk).noalias() += a.transpose() * gb;
      const Matrix da = gb * t->value(v.id).middleRows(b * nk, nk).transpose();
      const Matrix ds = softmax_backward(a, da) * inv;
      if (t->needs_grad(q.id))
        t->grad(q.id).middleRows(b * nq, nq).noalias() += ds * t->value(k.id).middleRows(b * nk, nk);
      if (t->needs_grad(k.id))
        t->grad(k.id).middleRows(b * nk, nk).noalias() += ds.transpose() * t->value(q.id).middleRows(b * nq, nq);
    }
  });
}

Var attend_groups(Var q, Var k, Var v, std::vector<int> group, int m) {
  require(q.cols() == k.cols(), "attend_groups: query/key widths differ");
  require(k.rows() == v.rows() && k.rows() % m == 0, "attend_groups: key/value group mismatch");
  require(static_cast<Eigen::Index>(group.size()) == q.rows(), "attend_groups: one group per query row");
  const int ngroups = static_cast<int>(k.rows() / m);
  for (int gidx : group) require(gidx >= 0 && gidx < ngroups, "attend_groups: group index out of range");
  Tape* t = q.tape;
  const double inv = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  auto probs = std::make_shared<Matrix>(q.rows(), m);
  Matrix out(q.rows(), v.cols());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const int g = group[static_cast<std::size_t>(i)];
    Matrix s = inv * q.value().row(i) * k.value().middleRows(static_cast<Eigen::Index>(g) * m, m).transpose();
    softmax_rows(s);
    out.row(i).noalias() = s * v.value().middleRows(static_cast<Eigen::Index>(g) * m, m);
    probs->row(i) = s.row(0);
  }
  const bool ng = t->needs_grad(q.id) || t->needs_grad(k.id) || t->needs_grad(v.id);
  Var r{t, t->size()};
  return t->push(std::move(out), ng, [t, q, k, v, r, m, inv, probs, group = std::move(group)] {
    const Matrix& g = t->grad(r.id);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const Eigen::Index off = static_cast<Eigen::Index>(group[static_cast<std::size_t>(i)]) * m;
      const Matrix a = probs->row(i);
      if (t->needs_grad(v.id)) t->grad(v.id).middleRows(off, m).noalias() += a.transpose() * g.row(i);
      const Matrix da = g.row(i) * t->value(v.id).middleRows(off, m).transpose();
      const Matrix ds = softmax_backward(a, da) * inv;
      if (t->needs_grad(q.id)) t->grad(q.id).row(i).noalias() += ds * t->value(k.id).middleRows(off, m);
      if (t->needs_grad(k.id)) t->grad(k.id).middleRows(off, m).noalias() += ds.transpose() * t->value(q.id).row(i);
    }
  });
}

Var mse(Var a, const Matrix& target) {
  require(a.rows() == target.rows() && a.cols() == target.cols(), "mse: shape mismatch");
  Tape* t = a.tape;
  const double n = static_cast<double>(target.size());
  Matrix diff = a.value() - target;
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / n;
  Var r{t, t->size()};
  return t->push(std::move(out), t->needs_grad(a.id), [t, a, r, n, diff = std::move(diff)] {
    t->grad(a.id) += (2.0 * t->grad(r.id)(0, 0) / n) * diff;
  });
}

}  // namespace sqforge::ad
