#include "neilf/autodiff.hpp"

#include <cmath>

namespace neilf::ad {

template <typename Real>
Var Tape<Real>::constant(Mat value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename Real>
Var Tape<Real>::variable(Mat value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename Real>
Var Tape<Real>::param(ParamTensor<Real>& p) {
  Node n;
  n.value = p.values;
  n.requires_grad = true;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename Real>
Var Tape<Real>::record(Mat value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(fn));
}

template <typename Real>
Var Tape<Real>::record(Mat value, const std::vector<Var>& inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (Var in : inputs) {
    if (in.valid() && requires_grad(in)) n.requires_grad = true;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename Real>
typename Tape<Real>::Mat Tape<Real>::grad(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.has_grad) return n.grad;
  return Mat::Zero(n.value.rows(), n.value.cols());
}

template <typename Real>
typename Tape<Real>::Mat& Tape<Real>::grad_ref(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.has_grad) {
    n.grad.setZero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

template <typename Real>
void Tape<Real>::backward(Var loss) {
  if (value(loss).size() != 1) fail(Error::Kind::kInternal, "backward: loss must be a 1x1 node");
  for (Node& n : nodes_) {
    n.has_grad = false;
  }
  if (!requires_grad(loss)) return;
  grad_ref(loss.id)(0, 0) = Real(1);
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, id);
  }
  for (const Node& n : nodes_) {
    if (n.param && n.has_grad && !n.grad.allFinite()) {
      fail(Error::Kind::kNumerical, "non-finite gradient for parameter '" + n.param->name + "'");
    }
  }
}

template <typename Real>
void Tape<Real>::accumulate_param_grads() const {
  for (const Node& n : nodes_) {
    if (n.param && n.has_grad) n.param->grads += n.grad;
  }
}

template <typename Real>
std::vector<std::pair<ParamTensor<Real>*, typename Tape<Real>::Mat>> Tape<Real>::param_grads() const {
  std::vector<std::pair<ParamTensor<Real>*, Mat>> out;
  for (const Node& n : nodes_) {
    if (n.param && n.has_grad) out.emplace_back(n.param, n.grad);
  }
  return out;
}

namespace {

template <typename Real>
void check_same_shape(const Matrix<Real>& a, const Matrix<Real>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(Error::Kind::kInternal, std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                     std::to_string(b.cols()));
  }
}

}  // namespace

template <typename Real>
Var linear(Tape<Real>& tape, Var x, Var w, Var b) {
  const auto& xv = tape.value(x);
  const auto& wv = tape.value(w);
  if (xv.cols() != wv.cols()) {
    fail(Error::Kind::kInternal, "linear: input width " + std::to_string(xv.cols()) + " does not match weight " +
                                     std::to_string(wv.rows()) + "x" + std::to_string(wv.cols()));
  }
  Matrix<Real> out(xv.rows(), wv.rows());
  out.noalias() = xv * wv.transpose();
  if (b.valid()) {
    const auto& bv = tape.value(b);
    if (bv.rows() != 1 || bv.cols() != wv.rows()) fail(Error::Kind::kInternal, "linear: bias shape mismatch");
    out.rowwise() += bv.row(0);
  }
  return tape.record(std::move(out), {x, w, b}, [x, w, b](Tape<Real>& t, int self) {
    const Matrix<Real>& g = t.grad_ref(self);
    if (t.requires_grad(x)) t.grad_ref(x.id).noalias() += g * t.value(w);
    if (t.requires_grad(w)) t.grad_ref(w.id).noalias() += g.transpose() * t.value(x);
    if (b.valid() && t.requires_grad(b)) t.grad_ref(b.id) += g.colwise().sum();
  });
}

template <typename Real>
Var add(Tape<Real>& tape, Var a, Var b) {
  check_same_shape(tape.value(a), tape.value(b), "add");
  Matrix<Real> out = tape.value(a) + tape.value(b);
  return tape.record(std::move(out), {a, b}, [a, b](Tape<Real>& t, int self) {
    const Matrix<Real>& g = t.grad_ref(self);
    if (t.requires_grad(a)) t.grad_ref(a.id) += g;
    if (t.requires_grad(b)) t.grad_ref(b.id) += g;
  });
}

template <typename Real>
Var mul(Tape<Real>& tape, Var a, Var b) {
  check_same_shape(tape.value(a), tape.value(b), "mul");
  Matrix<Real> out = tape.value(a).cwiseProduct(tape.value(b));
  return tape.record(std::move(out), {a, b}, [a, b](Tape<Real>& t, int self) {
    const Matrix<Real>& g = t.grad_ref(self);
    if (t.requires_grad(a)) t.grad_ref(a.id) += g.cwiseProduct(t.value(b));
    if (t.requires_grad(b)) t.grad_ref(b.id) += g.cwiseProduct(t.value(a));
  });
}

template <typename Real>
Var scale(Tape<Real>& tape, Var a, Real s) {
  Matrix<Real> out = tape.value(a) * s;
  return tape.record(std::move(out), {a}, [a, s](Tape<Real>& t, int self) {
    t.grad_ref(a.id) += t.grad_ref(self) * s;
  });
}

template <typename Real>
Var sin(Tape<Real>& tape, Var a) {
  Matrix<Real> out = tape.value(a).array().sin().matrix();
  return tape.record(std::move(out), {a}, [a](Tape<Real>& t, int self) {
    t.grad_ref(a.id).array() += t.grad_ref(self).array() * t.value(a).array().cos();
  });
}

template <typename Real>
Var cos(Tape<Real>& tape, Var a) {
  Matrix<Real> out = tape.value(a).array().cos().matrix();
  return tape.record(std::move(out), {a}, [a](Tape<Real>& t, int self) {
    t.grad_ref(a.id).array() -= t.grad_ref(self).array() * t.value(a).array().sin();
  });
}

template <typename Real>
Var exp(Tape<Real>& tape, Var a) {
  Matrix<Real> out = tape.value(a).array().exp().matrix();
  return tape.record(std::move(out), {a}, [a](Tape<Real>& t, int self) {
    t.grad_ref(a.id).array() += t.grad_ref(self).array() * t.value(self).array();
  });
}

template <typename Real>
Var sigmoid(Tape<Real>& tape, Var a) {
  Matrix<Real> out = (Real(1) / (Real(1) + (-tape.value(a).array()).exp())).matrix();
  return tape.record(std::move(out), {a}, [a](Tape<Real>& t, int self) {
    const auto s = t.value(self).array();
    t.grad_ref(a.id).array() += t.grad_ref(self).array() * s * (Real(1) - s);
  });
}

template <typename Real>
Var concat_cols(Tape<Real>& tape, const std::vector<Var>& parts) {
  if (parts.empty()) fail(Error::Kind::kInternal, "concat_cols: no inputs");
  const Eigen::Index rows = tape.value(parts.front()).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (tape.value(p).rows() != rows) fail(Error::Kind::kInternal, "concat_cols: row count mismatch");
    cols += tape.value(p).cols();
  }
  Matrix<Real> out(rows, cols);
  Eigen::Index offset = 0;
  for (Var p : parts) {
    const auto& v = tape.value(p);
    out.middleCols(offset, v.cols()) = v;
    offset += v.cols();
  }
  return tape.record(std::move(out), parts, [parts](Tape<Real>& t, int self) {
    const Matrix<Real>& g = t.grad_ref(self);
    Eigen::Index off = 0;
    for (Var p : parts) {
      const Eigen::Index c = t.value(p).cols();
      if (t.requires_grad(p)) t.grad_ref(p.id) += g.middleCols(off, c);
      off += c;
    }
  });
}

template <typename Real>
Var slice_cols(Tape<Real>& tape, Var a, int begin, int count) {
  const auto& v = tape.value(a);
  if (begin < 0 || count < 0 || begin + count > v.cols()) fail(Error::Kind::kInternal, "slice_cols: out of range");
  Matrix<Real> out = v.middleCols(begin, count);
  return tape.record(std::move(out), {a}, [a, begin, count](Tape<Real>& t, int self) {
    t.grad_ref(a.id).middleCols(begin, count) += t.grad_ref(self);
  });
}

template <typename Real>
Var sum(Tape<Real>& tape, Var a) {
  Matrix<Real> out(1, 1);
  out(0, 0) = tape.value(a).sum();
  return tape.record(std::move(out), {a}, [a](Tape<Real>& t, int self) {
    t.grad_ref(a.id).array() += t.grad_ref(self)(0, 0);
  });
}

template <typename Real>
Var weighted_sum(Tape<Real>& tape, const std::vector<Var>& terms, const std::vector<Real>& weights) {
  if (terms.size() != weights.size()) fail(Error::Kind::kInternal, "weighted_sum: term/weight count mismatch");
  Matrix<Real> out = Matrix<Real>::Zero(1, 1);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (tape.value(terms[k]).size() != 1) fail(Error::Kind::kInternal, "weighted_sum: terms must be 1x1");
    out(0, 0) += weights[k] * tape.value(terms[k])(0, 0);
  }
  return tape.record(std::move(out), terms, [terms, weights](Tape<Real>& t, int self) {
    const Real g = t.grad_ref(self)(0, 0);
    for (std::size_t k = 0; k < terms.size(); ++k) {
      if (t.requires_grad(terms[k])) t.grad_ref(terms[k].id)(0, 0) += weights[k] * g;
    }
  });
}

template <typename Real>
Matrix<Real> encode_positions(const Matrix<Real>& v, int frequencies) {
  const Eigen::Index k = v.cols();
  Matrix<Real> out(v.rows(), k * (2 * frequencies + 1));
  out.leftCols(k) = v;
  Real freq = Real(kPi);
  for (int l = 0; l < frequencies; ++l) {
    const Eigen::Index base = k * (1 + 2 * l);
    out.middleCols(base, k) = (v.array() * freq).sin().matrix();
    out.middleCols(base + k, k) = (v.array() * freq).cos().matrix();
    freq *= Real(2);
  }
  return out;
}

template <typename Real>
Matrix<Real> encode_positions_tangent(const Matrix<Real>& v, int frequencies, int dim) {
  const Eigen::Index k = v.cols();
  Matrix<Real> out = Matrix<Real>::Zero(v.rows(), k * (2 * frequencies + 1));
  out.col(dim).setOnes();
  Real freq = Real(kPi);
  for (int l = 0; l < frequencies; ++l) {
    const Eigen::Index base = k * (1 + 2 * l);
    out.col(base + dim) = ((v.col(dim).array() * freq).cos() * freq).matrix();
    out.col(base + k + dim) = (-(v.col(dim).array() * freq).sin() * freq).matrix();
    freq *= Real(2);
  }
  return out;
}

template <typename Real>
Var positional_encoding(Tape<Real>& tape, Var v, int frequencies) {
  if (frequencies < 0) fail(Error::Kind::kInvalidArgument, "positional_encoding: negative frequency count");
  Matrix<Real> out = encode_positions(tape.value(v), frequencies);
  return tape.record(std::move(out), {v}, [v, frequencies](Tape<Real>& t, int self) {
    const Matrix<Real>& g = t.grad_ref(self);
    const Matrix<Real>& x = t.value(v);
    const Eigen::Index k = x.cols();
    Matrix<Real>& gx = t.grad_ref(v.id);
    gx += g.leftCols(k);
    Real freq = Real(kPi);
    for (int l = 0; l < frequencies; ++l) {
      const Eigen::Index base = k * (1 + 2 * l);
      const auto arg = (x.array() * freq).eval();
      gx.array() += g.middleCols(base, k).array() * arg.cos() * freq;
      gx.array() -= g.middleCols(base + k, k).array() * arg.sin() * freq;
      freq *= Real(2);
    }
  });
}

#define NEILF_INSTANTIATE_AD(Real)                                                                   \
  template class Tape<Real>;                                                                         \
  template Var linear<Real>(Tape<Real>&, Var, Var, Var);                                             \
  template Var add<Real>(Tape<Real>&, Var, Var);                                                     \
  template Var mul<Real>(Tape<Real>&, Var, Var);                                                     \
  template Var scale<Real>(Tape<Real>&, Var, Real);                                                  \
  template Var sin<Real>(Tape<Real>&, Var);                                                          \
  template Var cos<Real>(Tape<Real>&, Var);                                                          \
  template Var exp<Real>(Tape<Real>&, Var);                                                          \
  template Var sigmoid<Real>(Tape<Real>&, Var);                                                      \
  template Var concat_cols<Real>(Tape<Real>&, const std::vector<Var>&);                              \
  template Var slice_cols<Real>(Tape<Real>&, Var, int, int);                                         \
  template Var sum<Real>(Tape<Real>&, Var);                                                          \
  template Var weighted_sum<Real>(Tape<Real>&, const std::vector<Var>&, const std::vector<Real>&);   \
  template Var positional_encoding<Real>(Tape<Real>&, Var, int);                                     \
  template Matrix<Real> encode_positions<Real>(const Matrix<Real>&, int);                            \
  template Matrix<Real> encode_positions_tangent<Real>(const Matrix<Real>&, int, int);

NEILF_INSTANTIATE_AD(float)
NEILF_INSTANTIATE_AD(double)

}  // namespace neilf::ad
