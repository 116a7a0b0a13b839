#include "urlcomsum/autodiff.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace urlcomsum::ad {

namespace {

void check_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::logic_error("autodiff: vars from different tapes");
}

void check_shape(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("autodiff: shape mismatch in ") + what);
}

Mat sigmoid(const Mat& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

}  // namespace

Var Tape::constant(Mat value) { return push(std::move(value), false, nullptr); }

Var Tape::leaf(Mat value) {
  return push(std::move(value), true, [](Tape&, const Mat&) {});
}

Var Tape::param(Parameter& p) {
  if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) p.zero_grad();
  Parameter* ptr = &p;
  return push(p.value, true, [ptr](Tape&, const Mat& g) { ptr->grad += g; });
}

Mat Tape::grad(Var v) const {
  const auto& n = nodes_.at(static_cast<std::size_t>(v.id));
  if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Mat& Tape::grad_ref(int id) {
  auto& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::push(Mat value, bool needs_grad, Backward fn) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad && record_;
  if (n.needs_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

void Tape::backward(Var root) {
  if (!record_) throw std::logic_error("autodiff: backward on a non-recording tape");
  if (root.tape != this || root.rows() != 1 || root.cols() != 1)
    throw std::invalid_argument("autodiff: backward root must be a 1x1 node of this tape");
  grad_ref(root.id)(0, 0) += 1.0;
  for (int i = root.id; i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (n.backward && n.grad.size() != 0) n.backward(*this, n.grad);
  }
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.cols() == b.rows(), "matmul");
  Tape& t = *a.tape;
  const int ia = a.id, ib = b.id;
  return t.push(a.value() * b.value(), t.needs_grad(ia) || t.needs_grad(ib),
                [ia, ib](Tape& tp, const Mat& g) {
                  if (tp.needs_grad(ia)) tp.grad_ref(ia).noalias() += g * tp.value(ib).transpose();
                  if (tp.needs_grad(ib)) tp.grad_ref(ib).noalias() += tp.value(ia).transpose() * g;
                });
}

Var matmul_nt(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.cols() == b.cols(), "matmul_nt");
  Tape& t = *a.tape;
  const int ia = a.id, ib = b.id;
  return t.push(a.value() * b.value().transpose(), t.needs_grad(ia) || t.needs_grad(ib),
                [ia, ib](Tape& tp, const Mat& g) {
                  if (tp.needs_grad(ia)) tp.grad_ref(ia).noalias() += g * tp.value(ib);
                  if (tp.needs_grad(ib)) tp.grad_ref(ib).noalias() += g.transpose() * tp.value(ia);
                });
}

Var add(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  Tape& t = *a.tape;
  const int ia = a.id, ib = b.id;
  return t.push(a.value() + b.value(), t.needs_grad(ia) || t.needs_grad(ib),
                [ia, ib](Tape& tp, const Mat& g) {
                  if (tp.needs_grad(ia)) tp.grad_ref(ia) += g;
                  if (tp.needs_grad(ib)) tp.grad_ref(ib) += g;
                });
}

Var add_row(Var a, Var r) {
  check_same_tape(a, r);
  check_shape(r.rows() == 1 && r.cols() == a.cols(), "add_row");
  Tape& t = *a.tape;
  const int ia = a.id, ir = r.id;
  Mat out = a.value();
  out.rowwise() += r.value().row(0);
  return t.push(std::move(out), t.needs_grad(ia) || t.needs_grad(ir),
                [ia, ir](Tape& tp, const Mat& g) {
                  if (tp.needs_grad(ia)) tp.grad_ref(ia) += g;
                  if (tp.needs_grad(ir)) tp.grad_ref(ir) += g.colwise().sum();
                });
}

Var mul(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "mul");
  Tape& t = *a.tape;
  const int ia = a.id, ib = b.id;
  return t.push(a.value().cwiseProduct(b.value()), t.needs_grad(ia) || t.needs_grad(ib),
                [ia, ib](Tape& tp, const Mat& g) {
                  if (tp.needs_grad(ia)) tp.grad_ref(ia) += g.cwiseProduct(tp.value(ib));
                  if (tp.needs_grad(ib)) tp.grad_ref(ib) += g.cwiseProduct(tp.value(ia));
                });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  const int ia = a.id;
  return t.push(a.value() * s, t.needs_grad(ia),
                [ia, s](Tape& tp, const Mat& g) { tp.grad_ref(ia) += g * s; });
}

Var tanh(Var a) {
  Tape& t = *a.tape;
  const int ia = a.id;
  Mat out = a.value().array().tanh().matrix();
  const int self = static_cast<int>(t.size());
  return t.push(std::move(out), t.needs_grad(ia), [ia, self](Tape& tp, const Mat& g) {
    const Mat& y = tp.value(self);
    tp.grad_ref(ia).array() += g.array() * (1.0 - y.array().square());
  });
}

Var sum(Var a) {
  Tape& t = *a.tape;
  const int ia = a.id;
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  return t.push(std::move(out), t.needs_grad(ia),
                [ia](Tape& tp, const Mat& g) { tp.grad_ref(ia).array() += g(0, 0); });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("autodiff: concat_cols of nothing");
  Tape& t = *parts.front().tape;
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  bool needs = false;
  std::vector<int> ids;
  for (const auto& p : parts) {
    check_same_tape(parts.front(), p);
    check_shape(p.rows() == rows, "concat_cols");
    cols += p.cols();
    needs = needs || t.needs_grad(p.id);
    ids.push_back(p.id);
  }
  Mat out(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return t.push(std::move(out), needs, [ids](Tape& tp, const Mat& g) {
    Eigen::Index o = 0;
    for (int id : ids) {
      const Eigen::Index c = tp.value(id).cols();
      if (tp.needs_grad(id)) tp.grad_ref(id) += g.middleCols(o, c);
      o += c;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("autodiff: concat_rows of nothing");
  Tape& t = *parts.front().tape;
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  bool needs = false;
  std::vector<int> ids;
  for (const auto& p : parts) {
    check_same_tape(parts.front(), p);
    check_shape(p.cols() == cols, "concat_rows");
    rows += p.rows();
    needs = needs || t.needs_grad(p.id);
    ids.push_back(p.id);
  }
  Mat out(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  return t.push(std::move(out), needs, [ids](Tape& tp, const Mat& g) {
    Eigen::Index o = 0;
    for (int id : ids) {
      const Eigen::Index r = tp.value(id).rows();
      if (tp.needs_grad(id)) tp.grad_ref(id) += g.middleRows(o, r);
      o += r;
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  check_shape(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols");
  Tape& t = *a.tape;
  const int ia = a.id;
  return t.push(a.value().middleCols(start, count), t.needs_grad(ia),
                [ia, start, count](Tape& tp, const Mat& g) {
                  tp.grad_ref(ia).middleCols(start, count) += g;
                });
}

Var row(Var a, Eigen::Index r) {
  check_shape(r >= 0 && r < a.rows(), "row");
  Tape& t = *a.tape;
  const int ia = a.id;
  return t.push(a.value().row(r), t.needs_grad(ia),
                [ia, r](Tape& tp, const Mat& g) { tp.grad_ref(ia).row(r) += g; });
}

Var pick(Var a, Eigen::Index r, Eigen::Index c) {
  check_shape(r >= 0 && r < a.rows() && c >= 0 && c < a.cols(), "pick");
  Tape& t = *a.tape;
  const int ia = a.id;
  Mat out(1, 1);
  out(0, 0) = a.value()(r, c);
  return t.push(std::move(out), t.needs_grad(ia),
                [ia, r, c](Tape& tp, const Mat& g) { tp.grad_ref(ia)(r, c) += g(0, 0); });
}

Var softmax_rows(Var a, const std::vector<bool>& col_mask) {
  check_shape(col_mask.size() == static_cast<std::size_t>(a.cols()), "softmax_rows");
  Tape& t = *a.tape;
  const int ia = a.id;
  const Mat& x = a.value();
  Mat y = Mat::Zero(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      if (col_mask[static_cast<std::size_t>(c)]) mx = std::max(mx, x(r, c));
    if (!std::isfinite(mx)) throw std::invalid_argument("autodiff: softmax over empty mask");
    double z = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (!col_mask[static_cast<std::size_t>(c)]) continue;
      y(r, c) = std::exp(x(r, c) - mx);
      z += y(r, c);
    }
    y.row(r) /= z;
  }
  const int self = static_cast<int>(t.size());
  return t.push(std::move(y), t.needs_grad(ia), [ia, self](Tape& tp, const Mat& g) {
    const Mat& p = tp.value(self);
    const Eigen::VectorXd dot = (g.cwiseProduct(p)).rowwise().sum();
    Mat dx = p.cwiseProduct(g);
    dx -= p.cwiseProduct(dot.replicate(1, p.cols()));
    tp.grad_ref(ia) += dx;
  });
}

Var log_softmax_row(Var a, const std::vector<bool>& mask) {
  check_shape(a.rows() == 1 && mask.size() == static_cast<std::size_t>(a.cols()),
              "log_softmax_row");
  Tape& t = *a.tape;
  const int ia = a.id;
  const Mat& x = a.value();
  const double ninf = -std::numeric_limits<double>::infinity();
  double mx = ninf;
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    if (mask[static_cast<std::size_t>(c)]) mx = std::max(mx, x(0, c));
  if (!std::isfinite(mx)) throw std::invalid_argument("autodiff: log-softmax over empty mask");
  double z = 0.0;
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    if (mask[static_cast<std::size_t>(c)]) z += std::exp(x(0, c) - mx);
  const double lse = mx + std::log(z);
  Mat y(1, x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    y(0, c) = mask[static_cast<std::size_t>(c)] ? x(0, c) - lse : ninf;
  const int self = static_cast<int>(t.size());
  return t.push(std::move(y), t.needs_grad(ia), [ia, self, mask](Tape& tp, const Mat& g) {
    const Mat& ly = tp.value(self);
    double gsum = 0.0;
    for (Eigen::Index c = 0; c < ly.cols(); ++c)
      if (mask[static_cast<std::size_t>(c)]) gsum += g(0, c);
    Mat& dx = tp.grad_ref(ia);
    for (Eigen::Index c = 0; c < ly.cols(); ++c)
      if (mask[static_cast<std::size_t>(c)]) dx(0, c) += g(0, c) - std::exp(ly(0, c)) * gsum;
  });
}

Var lstm_step(Var xw, Var hc, Var u, Var b) {
  check_same_tape(xw, hc);
  check_same_tape(xw, u);
  check_same_tape(xw, b);
  const Eigen::Index h = u.rows();
  check_shape(u.cols() == 4 * h && xw.rows() == 1 && xw.cols() == 4 * h && hc.rows() == 1 &&
                  hc.cols() == 2 * h && b.rows() == 1 && b.cols() == 4 * h,
              "lstm_step");
  Tape& t = *xw.tape;
  const int ix = xw.id, ihc = hc.id, iu = u.id, ib = b.id;

  auto gates = [h](const Mat& xwv, const Mat& hcv, const Mat& uv, const Mat& bv) {
    Mat z = xwv + bv;
    z.noalias() += hcv.leftCols(h) * uv;
    Mat act(1, 4 * h);
    act.middleCols(0, h) = sigmoid(z.middleCols(0, h));
    act.middleCols(h, h) = sigmoid(z.middleCols(h, h));
    act.middleCols(2 * h, h) = z.middleCols(2 * h, h).array().tanh().matrix();
    act.middleCols(3 * h, h) = sigmoid(z.middleCols(3 * h, h));
    return act;
  };

  const Mat act = gates(xw.value(), hc.value(), u.value(), b.value());
  const Mat c_prev = hc.value().rightCols(h);
  Mat out(1, 2 * h);
  const Mat c = act.middleCols(h, h).cwiseProduct(c_prev) +
                act.middleCols(0, h).cwiseProduct(act.middleCols(2 * h, h));
  out.rightCols(h) = c;
  out.leftCols(h) = act.middleCols(3 * h, h).cwiseProduct(Mat(c.array().tanh()));

  const bool needs = t.needs_grad(ix) || t.needs_grad(ihc) || t.needs_grad(iu) || t.needs_grad(ib);
  const int self = static_cast<int>(t.size());
  return t.push(std::move(out), needs, [=](Tape& tp, const Mat& g) {
    const Mat& hcv = tp.value(ihc);
    const Mat a = gates(tp.value(ix), hcv, tp.value(iu), tp.value(ib));
    const Mat cp = hcv.rightCols(h);
    const Mat cn = tp.value(self).rightCols(h);
    const Mat tc = cn.array().tanh().matrix();
    const auto i = a.middleCols(0, h).array();
    const auto f = a.middleCols(h, h).array();
    const auto gg = a.middleCols(2 * h, h).array();
    const auto o = a.middleCols(3 * h, h).array();
    const auto dh = g.leftCols(h).array();
    const Eigen::ArrayXXd dc = g.rightCols(h).array() + dh * o * (1.0 - tc.array().square());
    Mat dz(1, 4 * h);
    dz.middleCols(0, h) = (dc * gg * i * (1.0 - i)).matrix();
    dz.middleCols(h, h) = (dc * cp.array() * f * (1.0 - f)).matrix();
    dz.middleCols(2 * h, h) = (dc * i * (1.0 - gg.square())).matrix();
    dz.middleCols(3 * h, h) = (dh * tc.array() * o * (1.0 - o)).matrix();
    if (tp.needs_grad(ix)) tp.grad_ref(ix) += dz;
    if (tp.needs_grad(ib)) tp.grad_ref(ib) += dz;
    if (tp.needs_grad(iu)) tp.grad_ref(iu).noalias() += hcv.leftCols(h).transpose() * dz;
    if (tp.needs_grad(ihc)) {
      Mat& dhc = tp.grad_ref(ihc);
      dhc.leftCols(h).noalias() += dz * tp.value(iu).transpose();
      dhc.rightCols(h) += (dc * f).matrix();
    }
  });
}

Var gather_rows(Tape& tape, const Mat& table, std::span<const int> ids, RowGradSink* sink) {
  Mat out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= table.rows())
      throw std::out_of_range("autodiff: gather_rows id out of range");
    out.row(static_cast<Eigen::Index>(r)) = table.row(ids[r]);
  }
  if (sink == nullptr) return tape.constant(std::move(out));
  std::vector<int> idv(ids.begin(), ids.end());
  return tape.push(std::move(out), true, [idv, sink](Tape&, const Mat& g) {
    for (std::size_t r = 0; r < idv.size(); ++r) {
      auto [it, inserted] = sink->try_emplace(idv[r], Eigen::RowVectorXd::Zero(g.cols()));
      it->second += g.row(static_cast<Eigen::Index>(r));
    }
  });
}

}  // namespace urlcomsum::ad
