#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rotamatch {

// Dense 64-bit real tensor, row-major flat storage. Gradients live next to
// the values; graph structure lives on the Tape, not in the tensor.
struct TensorData {
  std::vector<int64_t> shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on first accumulation
  bool requires_grad = false;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int64_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<int64_t> shape, double fill,
                     bool requires_grad = false);
  static Tensor from(std::vector<int64_t> shape, std::vector<double> data,
                     bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return d_ != nullptr; }
  const std::vector<int64_t>& shape() const { return d_->shape; }
  int64_t numel() const { return static_cast<int64_t>(d_->value.size()); }
  int64_t dim(int i) const { return d_->shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(d_->shape.size()); }

  // 2-D accessors; valid only for rank-2 tensors.
  int64_t rows() const { return d_->shape[0]; }
  int64_t cols() const { return d_->shape[1]; }
  double& at(int64_t i, int64_t j) { return d_->value[static_cast<size_t>(i * cols() + j)]; }
  double at(int64_t i, int64_t j) const { return d_->value[static_cast<size_t>(i * cols() + j)]; }

  std::span<double> data() { return d_->value; }
  std::span<const double> data() const { return d_->value; }
  double item() const;  // requires numel() == 1

  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool b) { d_->requires_grad = b; }

  // Grad buffer, zero-initialized on first use. Handle semantics: the buffer
  // lives in the shared node, so a const handle still exposes a writable view.
  std::span<double> grad() const;
  bool has_grad() const { return !d_->grad.empty(); }
  void zero_grad();

  TensorData* node() const { return d_.get(); }

  Tensor clone() const;  // deep copy of values (grad not copied)

 private:
  explicit Tensor(std::shared_ptr<TensorData> d) : d_(std::move(d)) {}
  std::shared_ptr<TensorData> d_;
  friend Tensor make_like(const Tensor&, std::vector<int64_t>);
};

// Reverse-mode tape. Ops append one node each in execution order, which is a
// valid topological order by construction; backward() replays it in reverse,
// visiting each node exactly once. Grads accumulate, so a tensor feeding two
// consumers receives the sum of both path gradients.
class Tape {
 public:
  void record(std::function<void()> back_fn) { nodes_.push_back(std::move(back_fn)); }
  size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and runs all recorded backward rules in
  // reverse. Throws if loss is not a scalar produced on this tape.
  void backward(Tensor loss);

 private:
  std::vector<std::function<void()>> nodes_;
};

// Differentiable kernels. Pass tape == nullptr for inference-only forwards
// (nothing is recorded and outputs carry requires_grad = false).
namespace ops {

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor softmax_rows(Tape* tape, const Tensor& x);

Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape* tape, const Tensor& x, double c);
Tensor exp(Tape* tape, const Tensor& x);
Tensor log(Tape* tape, const Tensor& x);
Tensor relu(Tape* tape, const Tensor& x);
Tensor layer_norm(Tape* tape, const Tensor& x);  // last-axis, eps = 1e-6, no affine
Tensor slice(Tape* tape, const Tensor& x, int axis, int64_t start, int64_t stop,
             int64_t step = 1);
Tensor concat(Tape* tape, const std::vector<Tensor>& xs, int axis);
Tensor transpose(Tape* tape, const Tensor& x);  // rank-2
Tensor reduce_sum(Tape* tape, const Tensor& x);                // -> [1]
Tensor reduce_sum(Tape* tape, const Tensor& x, int axis);      // rank-2, keepdim
Tensor reduce_mean(Tape* tape, const Tensor& x);               // -> [1]
Tensor reduce_mean(Tape* tape, const Tensor& x, int axis);     // rank-2, keepdim

// Row-broadcast helpers; the general suite stays broadcast-free so every
// backward rule is a plain loop.
Tensor add_rowvec(Tape* tape, const Tensor& x, const Tensor& b);       // (n,d)+(1,d)
Tensor mul_rowvec(Tape* tape, const Tensor& x, const Tensor& v);       // (n,d)*(1,d)
Tensor rowwise_scale(Tape* tape, const Tensor& x, const Tensor& s);    // (n,d)*(n,1)

// Free layout change; gradient is the identity.
Tensor reshape(Tape* tape, const Tensor& x, std::vector<int64_t> shape);

constexpr double kLayerNormEps = 1e-6;

}  // namespace ops

// AdamW with decoupled weight decay: p -= lr*wd*p before the bias-corrected
// moment update. Moment state is keyed by parameter identity.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, double lr, std::pair<double, double> betas,
        double weight_decay, double eps = 1e-8);

  void step();       // throws if any parameter is missing its gradient
  void zero_grad();
  int64_t step_count() const { return t_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  struct Slot {
    Tensor param;
    std::vector<double> m, v;
  };
  std::vector<Slot> slots_;
  double lr_, beta1_, beta2_, weight_decay_, eps_;
  int64_t t_ = 0;
};

}  // namespace rotamatch
