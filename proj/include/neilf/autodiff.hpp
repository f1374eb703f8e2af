#pragma once

// Minimal tape-based reverse-mode differentiation over row-major matrices.
//
// Every node holds a [rows x cols] value. Rows index independent samples (pixels, or
// pixel/direction pairs) and columns index features, so a dense layer is one matrix product.
// Nodes are appended in evaluation order, which is already a topological order; backward()
// walks the tape once in reverse.
//
// Gradients of parameter leaves stay on the tape until the caller collects them, which keeps a
// tape confined to one worker and lets the trainer reduce per-chunk gradients in a fixed order.

#include "neilf/types.hpp"

#include <Eigen/Core>

#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

namespace neilf::ad {

template <typename Real>
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Trainable weights with a same-shape gradient accumulator.
template <typename Real>
struct ParamTensor {
  std::string name;
  Matrix<Real> values;
  Matrix<Real> grads;

  ParamTensor() = default;
  ParamTensor(std::string tensor_name, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(tensor_name)), values(Matrix<Real>::Zero(rows, cols)), grads(Matrix<Real>::Zero(rows, cols)) {}

  Eigen::Index size() const { return values.size(); }
  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  void zero_grad() { grads.setZero(values.rows(), values.cols()); }

  template <typename Other>
  ParamTensor<Other> cast() const {
    ParamTensor<Other> out;
    out.name = name;
    out.values = values.template cast<Other>();
    out.grads = grads.template cast<Other>();
    return out;
  }
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

template <typename Real>
class Tape {
 public:
  using Mat = Matrix<Real>;
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Mat value);
  // Leaf that receives a gradient; used for inputs whose sensitivity is queried.
  Var variable(Mat value);
  Var param(ParamTensor<Real>& p);

  // Appends an op node. `fn` runs during backward() only if the node requires a gradient.
  Var record(Mat value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Mat value, const std::vector<Var>& inputs, BackwardFn fn);

  const Mat& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  // Gradient of a node after backward(); a zero matrix when nothing flowed into it.
  Mat grad(Var v) const;

  // Accumulation target for backward functions. Allocates zeros on first touch.
  Mat& grad_ref(int id);
  bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].has_grad; }

  // Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be 1x1. Throws Error(kNumerical) when a
  // parameter gradient is non-finite.
  void backward(Var loss);

  // Adds every parameter leaf's gradient into ParamTensor::grads. Not thread-safe with respect to
  // other tapes sharing the same parameters.
  void accumulate_param_grads() const;

  // Parameter gradients in tape order, for deferred reduction.
  std::vector<std::pair<ParamTensor<Real>*, Mat>> param_grads() const;

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
    ParamTensor<Real>* param = nullptr;
  };

  std::vector<Node> nodes_;
};

// x [n, in], w [out, in], b [1, out] (b may be invalid) -> x w^T + b.
template <typename Real>
Var linear(Tape<Real>& tape, Var x, Var w, Var b = {});

template <typename Real>
Var add(Tape<Real>& tape, Var a, Var b);

// Elementwise product of same-shape operands.
template <typename Real>
Var mul(Tape<Real>& tape, Var a, Var b);

template <typename Real>
Var scale(Tape<Real>& tape, Var a, Real s);

template <typename Real>
Var sin(Tape<Real>& tape, Var a);

template <typename Real>
Var cos(Tape<Real>& tape, Var a);

template <typename Real>
Var exp(Tape<Real>& tape, Var a);

template <typename Real>
Var sigmoid(Tape<Real>& tape, Var a);

template <typename Real>
Var concat_cols(Tape<Real>& tape, const std::vector<Var>& parts);

template <typename Real>
Var slice_cols(Tape<Real>& tape, Var a, int begin, int count);

// Sum of all entries -> 1x1.
template <typename Real>
Var sum(Tape<Real>& tape, Var a);

// sum_k weight_k * term_k over 1x1 terms -> 1x1.
template <typename Real>
Var weighted_sum(Tape<Real>& tape, const std::vector<Var>& terms, const std::vector<Real>& weights);

// Per-row encoding [v, sin(2^0 pi v), cos(2^0 pi v), ..., sin(2^(F-1) pi v), cos(2^(F-1) pi v)];
// each block spans all k input columns. Output width k * (2F + 1).
template <typename Real>
Var positional_encoding(Tape<Real>& tape, Var v, int frequencies);

// Value-only encoding and its derivative with respect to input column `dim`, for forward-mode
// tangent propagation.
template <typename Real>
Matrix<Real> encode_positions(const Matrix<Real>& v, int frequencies);
template <typename Real>
Matrix<Real> encode_positions_tangent(const Matrix<Real>& v, int frequencies, int dim);

inline int encoded_width(int input_dims, int frequencies) { return input_dims * (2 * frequencies + 1); }

}  // namespace neilf::ad
