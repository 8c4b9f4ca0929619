#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "doctest.h"
#include "rotamatch/rng.hpp"
#include "rotamatch/tensor.hpp"

using namespace rotamatch;

TEST_CASE("matmul matches a hand computation") {
  Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b = Tensor::from({3, 2}, {7, 8, 9, 10, 11, 12});
  Tensor c = ops::matmul(nullptr, a, b);
  CHECK(c.at(0, 0) == 58.0);
  CHECK(c.at(0, 1) == 64.0);
  CHECK(c.at(1, 0) == 139.0);
  CHECK(c.at(1, 1) == 154.0);
}

TEST_CASE("softmax rows sums to one and matches closed form") {
  Tensor x = Tensor::from({2, 2}, {0.0, std::log(3.0), 5.0, 5.0});
  Tensor p = ops::softmax_rows(nullptr, x);
  CHECK(p.at(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p.at(0, 1) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(p.at(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.at(0, 0) + p.at(0, 1) == doctest::Approx(1.0).epsilon(1e-14));

  // invariance to a constant row shift
  Tensor y = Tensor::from({2, 2}, {100.0, 100.0 + std::log(3.0), 0.0, 0.0});
  Tensor q = ops::softmax_rows(nullptr, y);
  CHECK(q.at(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("layer_norm zero-centers rows with unit variance up to eps") {
  Tensor x = Tensor::from({2, 4}, {1, 2, 3, 10, -5, 0, 5, 20});
  Tensor y = ops::layer_norm(nullptr, x);
  for (int i = 0; i < 2; ++i) {
    double mean = 0, var = 0;
    for (int j = 0; j < 4; ++j) mean += y.at(i, j);
    mean /= 4;
    for (int j = 0; j < 4; ++j) var += (y.at(i, j) - mean) * (y.at(i, j) - mean);
    var /= 4;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-5));
  }
  // constant rows stay finite because of the eps floor
  Tensor c = Tensor::from({1, 3}, {7, 7, 7});
  Tensor yc = ops::layer_norm(nullptr, c);
  for (int j = 0; j < 3; ++j) CHECK(yc.at(0, j) == 0.0);
}

TEST_CASE("strided slice picks the right elements and concat restores splits") {
  Tensor x = Tensor::from({2, 6}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  Tensor even = ops::slice(nullptr, x, 1, 0, 6, 2);
  Tensor odd = ops::slice(nullptr, x, 1, 1, 6, 2);
  CHECK(even.cols() == 3);
  CHECK(even.at(0, 0) == 0.0);
  CHECK(even.at(0, 2) == 4.0);
  CHECK(odd.at(1, 1) == 9.0);

  Tensor top = ops::slice(nullptr, x, 0, 0, 1);
  Tensor bot = ops::slice(nullptr, x, 0, 1, 2);
  Tensor back = ops::concat(nullptr, {top, bot}, 0);
  REQUIRE(back.numel() == x.numel());
  for (int64_t i = 0; i < x.rows(); ++i)
    for (int64_t j = 0; j < x.cols(); ++j) CHECK(back.at(i, j) == x.at(i, j));
}

TEST_CASE("transpose and reductions") {
  Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor t = ops::transpose(nullptr, x);
  CHECK(t.rows() == 3);
  CHECK(t.at(2, 1) == 6.0);

  CHECK(ops::reduce_sum(nullptr, x).item() == 21.0);
  CHECK(ops::reduce_mean(nullptr, x).item() == doctest::Approx(3.5));
  Tensor rs = ops::reduce_sum(nullptr, x, 1);
  REQUIRE(rs.rows() == 2);
  REQUIRE(rs.cols() == 1);
  CHECK(rs.at(0, 0) == 6.0);
  CHECK(rs.at(1, 0) == 15.0);
  Tensor cm = ops::reduce_mean(nullptr, x, 0);
  REQUIRE(cm.rows() == 1);
  CHECK(cm.at(0, 2) == doctest::Approx(4.5));
}

TEST_CASE("row broadcast helpers") {
  Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor v = Tensor::from({1, 3}, {10, 20, 30});
  Tensor s = Tensor::from({2, 1}, {2, -1});
  Tensor a = ops::add_rowvec(nullptr, x, v);
  CHECK(a.at(1, 2) == 36.0);
  Tensor mth = ops::mul_rowvec(nullptr, x, v);
  CHECK(mth.at(0, 1) == 40.0);
  Tensor r = ops::rowwise_scale(nullptr, x, s);
  CHECK(r.at(0, 2) == 6.0);
  CHECK(r.at(1, 0) == -4.0);
}

TEST_CASE("gradients accumulate when a tensor feeds two consumers") {
  Tape tape;
  Tensor x = Tensor::from({1, 3}, {1.0, -2.0, 0.5}, true);
  Tensor y = ops::mul(&tape, x, x);
  Tensor z = ops::add(&tape, y, x);
  Tensor loss = ops::reduce_sum(&tape, z);
  tape.backward(loss);
  auto g = x.grad();
  CHECK(g[0] == doctest::Approx(2 * 1.0 + 1));
  CHECK(g[1] == doctest::Approx(2 * -2.0 + 1));
  CHECK(g[2] == doctest::Approx(2 * 0.5 + 1));
}

TEST_CASE("null tape runs inference without recording") {
  Tensor x = Tensor::from({1, 2}, {1, 2}, true);
  Tensor y = ops::relu(nullptr, ops::scale(nullptr, x, 3.0));
  CHECK(y.at(0, 1) == 6.0);
  CHECK_FALSE(y.requires_grad());
}

namespace {

// One forward through a graph exercising every op, as a plain function of the
// parameter buffers so finite differences can re-run it.
double graph_loss(const std::vector<double>& av, const std::vector<double>& bv,
                  const std::vector<double>& vv, const std::vector<double>& sv,
                  Tape* tape, Tensor* pa = nullptr, Tensor* pb = nullptr,
                  Tensor* pv = nullptr, Tensor* ps = nullptr) {
  bool g = tape != nullptr;
  Tensor a = Tensor::from({3, 4}, av, g);
  Tensor b = Tensor::from({4, 5}, bv, g);
  Tensor v = Tensor::from({1, 5}, vv, g);
  Tensor s = Tensor::from({3, 1}, sv, g);
  if (pa) *pa = a;
  if (pb) *pb = b;
  if (pv) *pv = v;
  if (ps) *ps = s;

  Tensor x = ops::layer_norm(tape, ops::add_rowvec(tape, ops::matmul(tape, a, b), v));
  Tensor p = ops::softmax_rows(tape, x);
  Tensor q = ops::mul(tape, p, ops::relu(tape, x));
  Tensor r = ops::rowwise_scale(tape, q, s);
  Tensor t = ops::transpose(tape, r);
  Tensor u = ops::concat(
      tape, {ops::slice(tape, t, 0, 0, 5, 2), ops::slice(tape, t, 0, 1, 5, 2)}, 0);
  Tensor w = ops::reshape(tape, u, {3, 5});
  Tensor e = ops::exp(tape, ops::scale(tape, w, 0.3));
  Tensor l = ops::log(tape, ops::add(tape, e, Tensor::full({3, 5}, 1.0)));
  Tensor lv = ops::mul_rowvec(tape, l, v);
  Tensor loss =
      ops::add(tape, ops::reduce_mean(tape, lv), ops::reduce_sum(tape, ops::mul(tape, w, w)));
  if (tape) tape->backward(loss);
  return loss.item();
}

void check_fd(std::vector<double>& param, std::span<double> grad,
              const std::function<double()>& reeval) {
  // Near-zero pairs are verified absolutely: relative error there only
  // measures FD cancellation noise.
  for (size_t i = 0; i < param.size(); ++i) {
    const double h = 1e-5;
    double saved = param[i];
    param[i] = saved + h;
    double up = reeval();
    param[i] = saved - h;
    double dn = reeval();
    param[i] = saved;
    double fd = (up - dn) / (2 * h);
    double g = grad[i];
    if (std::abs(fd) < 1e-6 && std::abs(g) < 1e-6) {
      CHECK(std::abs(fd - g) < 1e-6);
    } else {
      double rel = std::abs(fd - g) / std::max(1e-6, std::abs(fd) + std::abs(g));
      CHECK(rel < 1e-4);
    }
  }
}

}  // namespace

TEST_CASE("finite differences validate the full op suite") {
  Rng rng(991);
  auto draw = [&](size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal() * 0.7;
    return v;
  };
  std::vector<double> av = draw(12), bv = draw(20), vv = draw(5), sv = draw(3);

  Tape tape;
  Tensor a, b, v, s;
  graph_loss(av, bv, vv, sv, &tape, &a, &b, &v, &s);
  auto reeval = [&] { return graph_loss(av, bv, vv, sv, nullptr); };
  check_fd(av, a.grad(), reeval);
  check_fd(bv, b.grad(), reeval);
  check_fd(vv, v.grad(), reeval);
  check_fd(sv, s.grad(), reeval);
}

TEST_CASE("AdamW reproduces a hand-stepped reference") {
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, wd = 0.01, eps = 1e-8;
  Tensor p = Tensor::from({2}, {1.0, -3.0}, true);
  AdamW opt({p}, lr, {b1, b2}, wd, eps);

  double ref[2] = {1.0, -3.0};
  double m[2] = {0, 0}, v2[2] = {0, 0};
  for (int t = 1; t <= 5; ++t) {
    double g[2] = {0.3 * t, -0.2 * t};
    p.zero_grad();
    auto gr = p.grad();
    gr[0] = g[0];
    gr[1] = g[1];
    opt.step();
    for (int k = 0; k < 2; ++k) {
      ref[k] -= lr * wd * ref[k];  // decoupled decay before the moment update
      m[k] = b1 * m[k] + (1 - b1) * g[k];
      v2[k] = b2 * v2[k] + (1 - b2) * g[k] * g[k];
      double mh = m[k] / (1 - std::pow(b1, t));
      double vh = v2[k] / (1 - std::pow(b2, t));
      ref[k] -= lr * mh / (std::sqrt(vh) + eps);
    }
    auto pd = p.data();
    CHECK(pd[0] == doctest::Approx(ref[0]).epsilon(1e-12));
    CHECK(pd[1] == doctest::Approx(ref[1]).epsilon(1e-12));
  }
  CHECK(opt.step_count() == 5);
}

TEST_CASE("reshape is a free layout change with identity gradient") {
  Tape tape;
  Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  Tensor y = ops::reshape(&tape, x, {3, 2});
  CHECK(y.at(2, 1) == 6.0);
  Tensor loss = ops::reduce_sum(&tape, y);
  tape.backward(loss);
  for (double g : x.grad()) CHECK(g == 1.0);
}
