#pragma once

// Reverse-mode differentiation over dense matrices. A Tape records one
// forward pass; backward() walks it in reverse and accumulates gradients
// into leaves and bound Parameters.

#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace urlcomsum::ad {

using Mat = Eigen::MatrixXd;

struct Parameter {
  Mat value;
  Mat grad;

  void zero_grad() { grad = Mat::Zero(value.rows(), value.cols()); }
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

// Row gradients for an embedding lookup, keyed by vocabulary id.
using RowGradSink = std::unordered_map<int, Eigen::RowVectorXd>;

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Mat& grad)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Mat value);
  /// A differentiable input; read its gradient with grad() after backward().
  Var leaf(Mat value);
  /// Binds a Parameter: backward() adds into param.grad.
  Var param(Parameter& p);

  const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  /// Zero matrix if no gradient reached the node.
  Mat grad(Var v) const;
  /// Accumulator for a node; allocated on first use.
  Mat& grad_ref(int id);

  /// Seeds d(root)/d(root) = 1 for a 1x1 root.
  void backward(Var root);

  Var push(Mat value, bool needs_grad, Backward fn);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward backward;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  bool record_;
};

inline const Mat& Var::value() const { return tape->value(id); }

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
/// Adds a 1 x n row to every row of a.
Var add_row(Var a, Var row);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var tanh(Var a);
Var sum(Var a);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var row(Var a, Eigen::Index r);
Var pick(Var a, Eigen::Index r, Eigen::Index c);

/// Row-wise softmax. Columns with col_mask[c] == false get probability 0.
Var softmax_rows(Var a, const std::vector<bool>& col_mask);
/// Log-softmax of a 1 x n row; masked entries are -inf.
Var log_softmax_row(Var a, const std::vector<bool>& mask);

/// One LSTM step. xw is the precomputed input projection (1 x 4h); hc is
/// [h, c] (1 x 2h); u is h x 4h; b is 1 x 4h. Gate order i, f, g, o.
/// Returns the new [h, c].
Var lstm_step(Var xw, Var hc, Var u, Var b);

/// Rows of table for ids; with a sink, row gradients are accumulated there.
Var gather_rows(Tape& tape, const Mat& table, std::span<const int> ids,
                RowGradSink* sink = nullptr);

}  // namespace urlcomsum::ad
