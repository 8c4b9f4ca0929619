#include "rotamatch/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rotamatch {

namespace {

int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw std::invalid_argument("tensor: negative dimension");
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<int64_t>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

[[noreturn]] void dim_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                              shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void require_rank2(const char* op, const Tensor& x) {
  if (x.rank() != 2)
    throw std::invalid_argument(std::string(op) + ": expected rank-2, got " +
                                shape_str(x.shape()));
}

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace

Tensor make_like(const Tensor& ref, std::vector<int64_t> shape) {
  (void)ref;
  return Tensor::zeros(std::move(shape));
}

Tensor Tensor::zeros(std::vector<int64_t> shape, bool requires_grad) {
  auto d = std::make_shared<TensorData>();
  int64_t n = shape_numel(shape);
  d->shape = std::move(shape);
  d->value.assign(static_cast<size_t>(n), 0.0);
  d->requires_grad = requires_grad;
  return Tensor(std::move(d));
}

Tensor Tensor::full(std::vector<int64_t> shape, double fill, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (double& v : t.data()) v = fill;
  return t;
}

Tensor Tensor::from(std::vector<int64_t> shape, std::vector<double> data,
                    bool requires_grad) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    throw std::invalid_argument("tensor: data length does not match shape " +
                                shape_str(shape));
  auto d = std::make_shared<TensorData>();
  d->shape = std::move(shape);
  d->value = std::move(data);
  d->requires_grad = requires_grad;
  return Tensor(std::move(d));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from({1}, {v}, requires_grad);
}

double Tensor::item() const {
  if (numel() != 1) throw std::logic_error("item(): tensor is not scalar");
  return d_->value[0];
}

std::span<double> Tensor::grad() const {
  if (d_->grad.empty()) d_->grad.assign(d_->value.size(), 0.0);
  return d_->grad;
}

void Tensor::zero_grad() {
  if (!d_->grad.empty()) std::fill(d_->grad.begin(), d_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  return Tensor::from(d_->shape, d_->value, d_->requires_grad);
}

void Tape::backward(Tensor loss) {
  if (loss.numel() != 1)
    throw std::logic_error("backward: loss must be scalar, got numel=" +
                           std::to_string(loss.numel()));
  loss.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

namespace ops {

namespace {

// Shared recording helper: out is differentiable iff some input needs grad
// and a tape is present.
bool live(Tape* tape, std::initializer_list<const Tensor*> ins) {
  if (!tape) return false;
  for (const Tensor* t : ins)
    if (t->requires_grad()) return true;
  return false;
}

void mark(Tape* tape, Tensor& out, std::initializer_list<const Tensor*> ins,
          std::function<void()> fn) {
  if (live(tape, ins)) {
    out.set_requires_grad(true);
    tape->record(std::move(fn));
  }
}

}  // namespace

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  if (a.cols() != b.rows()) dim_error("matmul", a, b);
  const int64_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = Tensor::zeros({m, n});
  {
    ConstMatMap A(a.data().data(), m, k), B(b.data().data(), k, n);
    MatMap O(out.data().data(), m, n);
    O.noalias() = A * B;
  }
  mark(tape, out, {&a, &b}, [a, b, out, m, k, n]() mutable {
    ConstMatMap A(a.data().data(), m, k), B(b.data().data(), k, n);
    ConstMatMap G(out.grad().data(), m, n);
    if (a.requires_grad()) {
      MatMap GA(a.grad().data(), m, k);
      GA.noalias() += G * B.transpose();
    }
    if (b.requires_grad()) {
      MatMap GB(b.grad().data(), k, n);
      GB.noalias() += A.transpose() * G;
    }
  });
  return out;
}

Tensor softmax_rows(Tape* tape, const Tensor& x) {
  require_rank2("softmax_rows", x);
  const int64_t m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros({m, n});
  for (int64_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t j = 0; j < n; ++j) {
      double v = x.at(i, j);
      if (std::isnan(v)) throw std::domain_error("softmax_rows: NaN input");
      mx = std::max(mx, v);
    }
    double s = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      double e = std::exp(x.at(i, j) - mx);
      out.at(i, j) = e;
      s += e;
    }
    for (int64_t j = 0; j < n; ++j) out.at(i, j) /= s;
  }
  mark(tape, out, {&x}, [x, out, m, n]() mutable {
    auto g = out.grad();
    auto y = out.data();
    auto gx = x.grad();
    for (int64_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (int64_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
      for (int64_t j = 0; j < n; ++j)
        gx[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
    }
  });
  return out;
}

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) dim_error("add", a, b);
  Tensor out = Tensor::zeros(a.shape());
  auto av = a.data(), bv = b.data();
  auto ov = out.data();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  mark(tape, out, {&a, &b}, [a, b, out]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) {
      auto ga = a.grad();
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad();
      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
  return out;
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) dim_error("mul", a, b);
  Tensor out = Tensor::zeros(a.shape());
  auto av = a.data(), bv = b.data();
  auto ov = out.data();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  mark(tape, out, {&a, &b}, [a, b, out]() mutable {
    auto g = out.grad();
    auto av = a.data(), bv = b.data();
    if (a.requires_grad()) {
      auto ga = a.grad();
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad();
      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
  return out;
}

Tensor scale(Tape* tape, const Tensor& x, double c) {
  Tensor out = Tensor::zeros(x.shape());
  auto xv = x.data();
  auto ov = out.data();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = c * xv[i];
  mark(tape, out, {&x}, [x, out, c]() mutable {
    auto g = out.grad();
    auto gx = x.grad();
    for (size_t i = 0; i < g.size(); ++i) gx[i] += c * g[i];
  });
  return out;
}

Tensor exp(Tape* tape, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto xv = x.data();
  auto ov = out.data();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = std::exp(xv[i]);
  mark(tape, out, {&x}, [x, out]() mutable {
    auto g = out.grad();
    auto y = out.data();
    auto gx = x.grad();
    for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i];
  });
  return out;
}

Tensor log(Tape* tape, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto xv = x.data();
  auto ov = out.data();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = std::log(xv[i]);
  mark(tape, out, {&x}, [x, out]() mutable {
    auto g = out.grad();
    auto xv = x.data();
    auto gx = x.grad();
    for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / xv[i];
  });
  return out;
}

Tensor relu(Tape* tape, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto xv = x.data();
  auto ov = out.data();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  mark(tape, out, {&x}, [x, out]() mutable {
    auto g = out.grad();
    auto xv = x.data();
    auto gx = x.grad();
    for (size_t i = 0; i < g.size(); ++i)
      if (xv[i] > 0.0) gx[i] += g[i];
  });
  return out;
}

Tensor layer_norm(Tape* tape, const Tensor& x) {
  require_rank2("layer_norm", x);
  const int64_t m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros({m, n});
  std::vector<double> inv_std(static_cast<size_t>(m));
  for (int64_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (int64_t j = 0; j < n; ++j) mean += x.at(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      double d = x.at(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    double is = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std[static_cast<size_t>(i)] = is;
    for (int64_t j = 0; j < n; ++j) out.at(i, j) = (x.at(i, j) - mean) * is;
  }
  mark(tape, out, {&x}, [x, out, inv_std = std::move(inv_std), m, n]() mutable {
    auto g = out.grad();
    auto y = out.data();
    auto gx = x.grad();
    for (int64_t i = 0; i < m; ++i) {
      double gm = 0.0, gym = 0.0;
      for (int64_t j = 0; j < n; ++j) {
        gm += g[i * n + j];
        gym += g[i * n + j] * y[i * n + j];
      }
      gm /= static_cast<double>(n);
      gym /= static_cast<double>(n);
      double is = inv_std[static_cast<size_t>(i)];
      for (int64_t j = 0; j < n; ++j)
        gx[i * n + j] += is * (g[i * n + j] - gm - y[i * n + j] * gym);
    }
  });
  return out;
}

namespace {

struct SliceSpec {
  std::vector<int64_t> out_shape;
  std::vector<int64_t> in_strides;
  std::vector<int64_t> out_dims;
  int axis;
  int64_t start, step;
};

// Maps flat output index -> flat input index for a strided single-axis slice.
int64_t slice_src_index(const SliceSpec& s, int64_t flat) {
  int64_t src = 0;
  for (int r = static_cast<int>(s.out_dims.size()) - 1; r >= 0; --r) {
    int64_t idx = flat % s.out_dims[static_cast<size_t>(r)];
    flat /= s.out_dims[static_cast<size_t>(r)];
    int64_t in_idx = (r == s.axis) ? s.start + idx * s.step : idx;
    src += in_idx * s.in_strides[static_cast<size_t>(r)];
  }
  return src;
}

}  // namespace

Tensor slice(Tape* tape, const Tensor& x, int axis, int64_t start, int64_t stop,
             int64_t step) {
  const auto& sh = x.shape();
  if (axis < 0 || axis >= x.rank())
    throw std::invalid_argument("slice: bad axis " + std::to_string(axis));
  int64_t len = sh[static_cast<size_t>(axis)];
  if (step <= 0) throw std::invalid_argument("slice: step must be positive");
  if (start < 0 || stop > len || start > stop)
    throw std::invalid_argument("slice: range [" + std::to_string(start) + "," +
                                std::to_string(stop) + ") out of bounds for axis of size " +
                                std::to_string(len));
  SliceSpec spec;
  spec.axis = axis;
  spec.start = start;
  spec.step = step;
  spec.out_shape = sh;
  spec.out_shape[static_cast<size_t>(axis)] = (stop - start + step - 1) / step;
  spec.out_dims = spec.out_shape;
  spec.in_strides.assign(sh.size(), 1);
  for (int r = static_cast<int>(sh.size()) - 2; r >= 0; --r)
    spec.in_strides[static_cast<size_t>(r)] =
        spec.in_strides[static_cast<size_t>(r + 1)] * sh[static_cast<size_t>(r + 1)];

  Tensor out = Tensor::zeros(spec.out_shape);
  auto xv = x.data();
  auto ov = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) ov[static_cast<size_t>(i)] = xv[static_cast<size_t>(slice_src_index(spec, i))];
  mark(tape, out, {&x}, [x, out, spec]() mutable {
    auto g = out.grad();
    auto gx = x.grad();
    for (int64_t i = 0; i < out.numel(); ++i)
      gx[static_cast<size_t>(slice_src_index(spec, i))] += g[static_cast<size_t>(i)];
  });
  return out;
}

Tensor concat(Tape* tape, const std::vector<Tensor>& xs, int axis) {
  if (xs.empty()) throw std::invalid_argument("concat: empty input list");
  const int rank = xs[0].rank();
  if (axis < 0 || axis >= rank) throw std::invalid_argument("concat: bad axis");
  std::vector<int64_t> out_shape = xs[0].shape();
  int64_t axis_total = 0;
  for (const Tensor& t : xs) {
    if (t.rank() != rank) dim_error("concat", xs[0], t);
    for (int r = 0; r < rank; ++r)
      if (r != axis && t.shape()[static_cast<size_t>(r)] != out_shape[static_cast<size_t>(r)])
        dim_error("concat", xs[0], t);
    axis_total += t.shape()[static_cast<size_t>(axis)];
  }
  out_shape[static_cast<size_t>(axis)] = axis_total;

  // outer = product of dims before axis, inner = product after.
  int64_t outer = 1, inner = 1;
  for (int r = 0; r < axis; ++r) outer *= out_shape[static_cast<size_t>(r)];
  for (int r = axis + 1; r < rank; ++r) inner *= out_shape[static_cast<size_t>(r)];

  Tensor out = Tensor::zeros(out_shape);
  auto ov = out.data();
  int64_t offset = 0;
  for (const Tensor& t : xs) {
    int64_t a = t.shape()[static_cast<size_t>(axis)];
    auto tv = t.data();
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t i = 0; i < a * inner; ++i)
        ov[static_cast<size_t>(o * axis_total * inner + offset * inner + i)] =
            tv[static_cast<size_t>(o * a * inner + i)];
    offset += a;
  }
  std::vector<const Tensor*> ptrs;
  for (const Tensor& t : xs) ptrs.push_back(&t);
  bool any = false;
  for (const Tensor* p : ptrs) any = any || p->requires_grad();
  if (tape && any) {
    out.set_requires_grad(true);
    std::vector<Tensor> inputs = xs;
    tape->record([inputs, out, outer, inner, axis_total, axis]() mutable {
      auto g = out.grad();
      int64_t offset = 0;
      for (Tensor& t : inputs) {
        int64_t a = t.shape()[static_cast<size_t>(axis)];
        if (t.requires_grad()) {
          auto gt = t.grad();
          for (int64_t o = 0; o < outer; ++o)
            for (int64_t i = 0; i < a * inner; ++i)
              gt[static_cast<size_t>(o * a * inner + i)] +=
                  g[static_cast<size_t>(o * axis_total * inner + offset * inner + i)];
        }
        offset += a;
      }
    });
  }
  return out;
}

Tensor transpose(Tape* tape, const Tensor& x) {
  require_rank2("transpose", x);
  const int64_t m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros({n, m});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out.at(j, i) = x.at(i, j);
  mark(tape, out, {&x}, [x, out, m, n]() mutable {
    auto g = out.grad();
    auto gx = x.grad();
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) gx[i * n + j] += g[j * m + i];
  });
  return out;
}

Tensor reduce_sum(Tape* tape, const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  Tensor out = Tensor::scalar(s);
  mark(tape, out, {&x}, [x, out]() mutable {
    double g = out.grad()[0];
    auto gx = x.grad();
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
  return out;
}

Tensor reduce_sum(Tape* tape, const Tensor& x, int axis) {
  require_rank2("reduce_sum", x);
  const int64_t m = x.rows(), n = x.cols();
  if (axis == 0) {
    Tensor out = Tensor::zeros({1, n});
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) out.at(0, j) += x.at(i, j);
    mark(tape, out, {&x}, [x, out, m, n]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) gx[i * n + j] += g[static_cast<size_t>(j)];
    });
    return out;
  }
  if (axis == 1) {
    Tensor out = Tensor::zeros({m, 1});
    for (int64_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (int64_t j = 0; j < n; ++j) s += x.at(i, j);
      out.at(i, 0) = s;
    }
    mark(tape, out, {&x}, [x, out, m, n]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) gx[i * n + j] += g[static_cast<size_t>(i)];
    });
    return out;
  }
  throw std::invalid_argument("reduce_sum: axis must be 0 or 1");
}

Tensor reduce_mean(Tape* tape, const Tensor& x) {
  Tensor s = reduce_sum(tape, x);
  return scale(tape, s, 1.0 / static_cast<double>(x.numel()));
}

Tensor reduce_mean(Tape* tape, const Tensor& x, int axis) {
  require_rank2("reduce_mean", x);
  int64_t count = axis == 0 ? x.rows() : x.cols();
  Tensor s = reduce_sum(tape, x, axis);
  return scale(tape, s, 1.0 / static_cast<double>(count));
}

Tensor add_rowvec(Tape* tape, const Tensor& x, const Tensor& b) {
  require_rank2("add_rowvec", x);
  if (b.rank() != 2 || b.rows() != 1 || b.cols() != x.cols()) dim_error("add_rowvec", x, b);
  const int64_t m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros({m, n});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out.at(i, j) = x.at(i, j) + b.at(0, j);
  mark(tape, out, {&x, &b}, [x, b, out, m, n]() mutable {
    auto g = out.grad();
    if (x.requires_grad()) {
      auto gx = x.grad();
      for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad();
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) gb[static_cast<size_t>(j)] += g[i * n + j];
    }
  });
  return out;
}

Tensor mul_rowvec(Tape* tape, const Tensor& x, const Tensor& v) {
  require_rank2("mul_rowvec", x);
  if (v.rank() != 2 || v.rows() != 1 || v.cols() != x.cols()) dim_error("mul_rowvec", x, v);
  const int64_t m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros({m, n});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out.at(i, j) = x.at(i, j) * v.at(0, j);
  mark(tape, out, {&x, &v}, [x, v, out, m, n]() mutable {
    auto g = out.grad();
    if (x.requires_grad()) {
      auto gx = x.grad();
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) gx[i * n + j] += g[i * n + j] * v.at(0, j);
    }
    if (v.requires_grad()) {
      auto gv = v.grad();
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) gv[static_cast<size_t>(j)] += g[i * n + j] * x.at(i, j);
    }
  });
  return out;
}

Tensor rowwise_scale(Tape* tape, const Tensor& x, const Tensor& s) {
  require_rank2("rowwise_scale", x);
  if (s.rank() != 2 || s.cols() != 1 || s.rows() != x.rows()) dim_error("rowwise_scale", x, s);
  const int64_t m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros({m, n});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out.at(i, j) = x.at(i, j) * s.at(i, 0);
  mark(tape, out, {&x, &s}, [x, s, out, m, n]() mutable {
    auto g = out.grad();
    if (x.requires_grad()) {
      auto gx = x.grad();
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) gx[i * n + j] += g[i * n + j] * s.at(i, 0);
    }
    if (s.requires_grad()) {
      auto gs = s.grad();
      for (int64_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int64_t j = 0; j < n; ++j) acc += g[i * n + j] * x.at(i, j);
        gs[static_cast<size_t>(i)] += acc;
      }
    }
  });
  return out;
}

Tensor reshape(Tape* tape, const Tensor& x, std::vector<int64_t> shape) {
  Tensor out = Tensor::from(shape, std::vector<double>(x.data().begin(), x.data().end()));
  if (out.numel() != x.numel())
    throw std::invalid_argument("reshape: element count mismatch");
  mark(tape, out, {&x}, [x, out]() mutable {
    auto g = out.grad();
    auto gx = x.grad();
    for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
  return out;
}

}  // namespace ops

AdamW::AdamW(std::vector<Tensor> params, double lr, std::pair<double, double> betas,
             double weight_decay, double eps)
    : lr_(lr), beta1_(betas.first), beta2_(betas.second),
      weight_decay_(weight_decay), eps_(eps) {
  for (Tensor& p : params) {
    Slot s;
    s.param = p;
    s.m.assign(static_cast<size_t>(p.numel()), 0.0);
    s.v.assign(static_cast<size_t>(p.numel()), 0.0);
    slots_.push_back(std::move(s));
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Slot& s : slots_) {
    if (!s.param.has_grad())
      throw std::logic_error("adamw_step: parameter has no gradient");
    auto p = s.param.data();
    auto g = s.param.grad();
    for (size_t i = 0; i < p.size(); ++i) {
      p[i] -= lr_ * weight_decay_ * p[i];  // decoupled decay first
      s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g[i];
      s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * g[i] * g[i];
      double mhat = s.m[i] / bc1;
      double vhat = s.v[i] / bc2;
      p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void AdamW::zero_grad() {
  for (Slot& s : slots_) s.param.zero_grad();
}

}  // namespace rotamatch
