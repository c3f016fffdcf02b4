#pragma once

#include "sqforge/common.hpp"

#include <Eigen/SparseCore>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace sqforge::ad {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Trainable tensor with an accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Records a forward computation for reverse-mode differentiation.
///
/// Parameter leaves reference the parameter's storage and collect their gradient on the
/// tape; Network::accumulate_grads moves them into Parameter::grad. A tape built with
/// `grads = false` records values only.
class Tape {
 public:
  explicit Tape(bool grads = true) : grads_(grads) {}

  Var constant(Matrix value);
  Var param(const Parameter& p);

  /// Seeds d(root)/d(root) = 1 on a 1×1 root and runs the recorded closures in reverse.
  void backward(Var root);

  const Matrix& value(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.ref ? *n.ref : n.value;
  }
  Matrix& grad(int id);
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

  Var push(Matrix value, bool needs_grad, std::function<void()> backward);
  int size() const { return static_cast<int>(nodes_.size()); }

  /// Visits (parameter, gradient) for every parameter leaf that received a gradient.
  void for_each_param_grad(const std::function<void(const Parameter&, const Matrix&)>& fn) const;

 private:
  struct Node {
    Matrix value;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool needs_grad = false;
    const Parameter* param = nullptr;
    std::function<void()> backward;
  };
  bool grads_;
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// a (N×F) plus row vector b (1×F) on every row.
Var add_row(Var a, Var b);
Var tanh(Var a);
/// Row-major reinterpretation.
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);
Var concat_cols(Var a, Var b);
/// out.row(i) = table.row(index[i]).
Var gather_rows(Var table, std::vector<int> index);
/// Constant sparse left multiply: P * a.
Var sparse_left(std::shared_ptr<const SparseMatrix> p, Var a);

/// Block-diagonal single-head attention. Block b uses query rows [b*nq, (b+1)*nq)
/// and key/value rows [b*nk, (b+1)*nk); scores are scaled by 1/sqrt(d).
Var attend_blocks(Var q, Var k, Var v, int nq, int nk);

/// Row i of q attends over key/value rows [group[i]*m, (group[i]+1)*m).
Var attend_groups(Var q, Var k, Var v, std::vector<int> group, int m);

/// Mean over all elements of (a - target)², target constant.
Var mse(Var a, const Matrix& target);

}  // namespace sqforge::ad
