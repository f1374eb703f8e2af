#include "doctest.h"
#include "test_support.hpp"

#include "neilf/autodiff.hpp"
#include "neilf/sampling.hpp"

#include <functional>

using namespace neilf;
using namespace neilf::ad;
using doctest::Approx;

namespace {

using Mat = Matrix<double>;
using Op = std::function<Var(Tape<double>&, Var)>;

Mat random_matrix(Rng& rng, int rows, int cols, double lo = -1.0, double hi = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

// Projects the op output onto fixed random weights so every output entry contributes.
double project(Tape<double>& tape, Var y, const Mat& w) { return (tape.value(y).array() * w.array()).sum(); }

void check_gradient(const Op& op, const Mat& x0, std::uint64_t seed, double tol = 1e-7) {
  Rng rng(seed);
  Tape<double> probe;
  const Mat y0 = probe.value(op(probe, probe.constant(x0)));
  const Mat w = random_matrix(rng, static_cast<int>(y0.rows()), static_cast<int>(y0.cols()));

  Tape<double> tape;
  Var x = tape.variable(x0);
  Var y = op(tape, x);
  Var loss = sum(tape, mul(tape, y, tape.constant(w)));
  tape.backward(loss);
  const Mat g = tape.grad(x);

  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    Mat xp = x0, xm = x0;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    Tape<double> tp, tm;
    const double fp = project(tp, op(tp, tp.constant(xp)), w);
    const double fm = project(tm, op(tm, tm.constant(xm)), w);
    const double fd = (fp - fm) / (2 * h);
    CHECK(std::abs(g.data()[i] - fd) <= tol * std::max(1.0, std::abs(fd)));
  }
}

}  // namespace

TEST_CASE("elementwise ops match finite differences") {
  Rng rng(1);
  const Mat x = random_matrix(rng, 3, 4);
  check_gradient([](Tape<double>& t, Var v) { return ad::sin(t, v); }, x, 2);
  check_gradient([](Tape<double>& t, Var v) { return ad::cos(t, v); }, x, 3);
  check_gradient([](Tape<double>& t, Var v) { return ad::exp(t, v); }, x, 4);
  check_gradient([](Tape<double>& t, Var v) { return ad::sigmoid(t, v); }, x, 5);
  check_gradient([](Tape<double>& t, Var v) { return ad::scale(t, v, 2.5); }, x, 6);
  check_gradient([](Tape<double>& t, Var v) { return ad::add(t, v, v); }, x, 7);
  check_gradient([](Tape<double>& t, Var v) { return ad::mul(t, v, v); }, x, 8);
}

TEST_CASE("linear op gradients for input, weights and bias") {
  Rng rng(11);
  const Mat x = random_matrix(rng, 5, 3);
  const Mat w = random_matrix(rng, 4, 3);
  const Mat b = random_matrix(rng, 1, 4);
  check_gradient([&](Tape<double>& t, Var v) { return linear(t, v, t.constant(w), t.constant(b)); }, x, 12);
  check_gradient([&](Tape<double>& t, Var v) { return linear(t, t.constant(x), v, t.constant(b)); }, w, 13);
  check_gradient([&](Tape<double>& t, Var v) { return linear(t, t.constant(x), t.constant(w), v); }, b, 14);
  check_gradient([&](Tape<double>& t, Var v) { return linear(t, v, t.constant(w)); }, x, 15);
}

TEST_CASE("structural ops") {
  Rng rng(21);
  const Mat x = random_matrix(rng, 4, 5);
  check_gradient([](Tape<double>& t, Var v) { return slice_cols(t, v, 1, 3); }, x, 22);
  check_gradient([](Tape<double>& t, Var v) { return concat_cols(t, {v, ad::sin(t, v), slice_cols(t, v, 0, 2)}); }, x,
                 23);
  check_gradient([](Tape<double>& t, Var v) { return sum(t, ad::exp(t, v)); }, x, 24);
  check_gradient(
      [](Tape<double>& t, Var v) {
        return weighted_sum(t, {sum(t, v), sum(t, ad::mul(t, v, v))}, std::vector<double>{0.3, -1.7});
      },
      x, 25);
}

TEST_CASE("positional encoding layout and gradient") {
  Tape<double> tape;
  Mat zero = Mat::Zero(1, 3);
  const Mat enc = tape.value(positional_encoding(tape, tape.constant(zero), 4));
  REQUIRE(enc.cols() == encoded_width(3, 4));
  for (int f = 0; f < 4; ++f) {
    for (int k = 0; k < 3; ++k) {
      CHECK(enc(0, 3 + 6 * f + k) == 0.0);
      CHECK(enc(0, 3 + 6 * f + 3 + k) == 1.0);
    }
  }
  Mat v(1, 3);
  v << 0.5, -0.25, 0.8;
  const Mat pass = tape.value(positional_encoding(tape, tape.constant(v), 0));
  CHECK((pass - v).norm() == 0.0);

  Mat half(1, 1);
  half << 0.5;
  const Mat e = tape.value(positional_encoding(tape, tape.constant(half), 2));
  REQUIRE(e.cols() == 5);
  CHECK(e(0, 0) == 0.5);
  CHECK(e(0, 1) == Approx(std::sin(kPi * 0.5)));
  CHECK(e(0, 2) == Approx(std::cos(kPi * 0.5)));
  CHECK(e(0, 3) == Approx(std::sin(2 * kPi * 0.5)));
  CHECK(e(0, 4) == Approx(std::cos(2 * kPi * 0.5)));

  Rng rng(31);
  check_gradient([](Tape<double>& t, Var x) { return positional_encoding(t, x, 3); }, random_matrix(rng, 4, 3), 32);

  // Value-only helpers agree with the op and with a numerical tangent.
  const Mat x = random_matrix(rng, 2, 3);
  CHECK((encode_positions(x, 3) - tape.value(positional_encoding(tape, tape.constant(x), 3))).norm() < 1e-15);
  for (int dim = 0; dim < 3; ++dim) {
    Mat xp = x, xm = x;
    xp.col(dim).array() += 1e-6;
    xm.col(dim).array() -= 1e-6;
    const Mat fd = (encode_positions(xp, 3) - encode_positions(xm, 3)) / 2e-6;
    CHECK((encode_positions_tangent(x, 3, dim) - fd).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("parameter leaves") {
  ParamTensor<double> p("p", 2, 3);
  p.values.setConstant(0.7);
  Tape<double> tape;
  Var v = tape.param(p);
  tape.backward(sum(tape, v));
  auto grads = tape.param_grads();
  REQUIRE(grads.size() == 1);
  CHECK(grads[0].first == &p);
  CHECK((grads[0].second.array() == 1.0).all());
  tape.accumulate_param_grads();
  CHECK((p.grads.array() == 1.0).all());

  ParamTensor<double> q("q", 2, 2);
  q.values.setRandom();
  Tape<double> t2;
  Var z = ad::scale(t2, ad::sin(t2, t2.param(q)), 0.0);
  t2.backward(sum(t2, z));
  for (auto& [ptr, g] : t2.param_grads()) CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward rejects non-scalar loss and non-finite parameter gradients") {
  Tape<double> tape;
  Var x = tape.variable(Mat::Ones(2, 2));
  CHECK_THROWS_AS(tape.backward(x), Error);

  ParamTensor<double> p("p", 1, 1);
  p.values(0, 0) = 1000.0;
  Tape<double> t2;
  Var e = ad::exp(t2, ad::exp(t2, t2.param(p)));
  CHECK_THROWS_AS(t2.backward(sum(t2, e)), Error);
}

TEST_CASE("float and double tapes agree") {
  Rng rng(41);
  const Mat x = random_matrix(rng, 3, 3);
  Tape<double> td;
  Tape<float> tf;
  const Mat yd = td.value(ad::sigmoid(td, ad::sin(td, td.constant(x))));
  const Matrix<float> yf = tf.value(ad::sigmoid(tf, ad::sin(tf, tf.constant(x.cast<float>()))));
  CHECK((yd.cast<float>() - yf).cwiseAbs().maxCoeff() < 1e-6f);
}
