#pragma once

#include <Eigen/Core>

#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "hibert/rng.hpp"

namespace hibert {

using Scalar = double;
using Index = Eigen::Index;
using Shape = std::vector<Index>;
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

Index shape_size(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorImpl {
  Shape shape;
  ArrayX data;
  ArrayX grad;  // empty until first backward touches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  // Accumulates this node's grad into parents' grads.
  std::function<void(TensorImpl&)> backward_fn;

  void ensure_grad();
};

/// Dense n-d double tensor with reverse-mode autodiff. Copies are shallow
/// (shared storage); each op allocates a fresh node referencing its inputs.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Scalar value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<Scalar> values, bool requires_grad = false);
  static Tensor scalar(Scalar value, bool requires_grad = false);
  static Tensor randn(Shape shape, Rng& rng, Scalar stddev, bool requires_grad = false);
  static Tensor xavier_uniform(Shape shape, Rng& rng, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  Index dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
  Index size() const { return impl_->data.size(); }
  bool requires_grad() const { return impl_->requires_grad; }

  ArrayX& data() { return impl_->data; }
  const ArrayX& data() const { return impl_->data; }
  bool has_grad() const { return impl_->grad.size() > 0; }
  ArrayX& grad();
  const ArrayX& grad() const;
  void zero_grad();

  Scalar item() const;                  // scalar tensors only
  Scalar at(Index i) const { return impl_->data[i]; }
  Scalar at(Index i, Index j) const;    // rank-2 only
  Scalar& mut(Index i) { return impl_->data[i]; }

  /// Rows-by-cols matrix view of the flat storage (rank 1 maps to [1, n]).
  ConstMatMap mat() const;
  MatMap mat();

  bool all_finite() const { return impl_->data.isFinite().all(); }

  std::shared_ptr<TensorImpl> impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// ---- ops ------------------------------------------------------------------

/// Matrix product. Ranks 2 and 3 supported; a rank-2 operand broadcasts over
/// the other's batch dimension. Contraction accumulates in ascending-k order,
/// so zero-weighted trailing terms are bitwise no-ops.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Elementwise sum; `b` may also be a row vector ([c] or [1, c]) broadcast
/// over every row of `a`.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise, equal shapes
Tensor scale(const Tensor& a, Scalar c);

Tensor relu(const Tensor& x);
Tensor softmax(const Tensor& x, int axis);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Scalar eps = 1e-6);
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);
Tensor nll_loss(const Tensor& logits, const std::vector<int>& targets,
                const std::vector<bool>& mask);
Tensor dropout(const Tensor& x, Scalar p, bool training, Rng& rng);

Tensor transpose(const Tensor& x);  // rank 2
Tensor slice_cols(const Tensor& x, Index c0, Index c1);
Tensor slice_rows(const Tensor& x, Index r0, Index r1);
Tensor concat_cols(const std::vector<Tensor>& xs);
Tensor concat_rows(const std::vector<Tensor>& xs);
Tensor reshape(const Tensor& x, Shape shape);
Tensor sum(const Tensor& x);   // scalar
Tensor mean(const Tensor& x);  // scalar

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, Scalar c) { return scale(a, c); }

/// Reverse-mode pass from a scalar loss. Gradients accumulate into every
/// reachable requires_grad tensor; call zero_grad between passes.
void backward(const Tensor& loss);

}  // namespace hibert
