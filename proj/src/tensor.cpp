#include "hibert/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace hibert {

Index shape_size(const Shape& s) {
  Index n = 1;
  for (Index d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

namespace {

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(op + ": incompatible shapes " + shape_str(a) + " and " +
                              shape_str(b));
}

std::shared_ptr<TensorImpl> make_impl(Shape shape, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->data = ArrayX::Zero(shape_size(shape));
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return impl;
}

bool any_requires_grad(const std::vector<Tensor>& parents) {
  for (const auto& p : parents)
    if (p.requires_grad()) return true;
  return false;
}

Tensor make_op(Shape shape, ArrayX data, const std::vector<Tensor>& parents,
               std::function<void(TensorImpl&)> fn) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = any_requires_grad(parents);
  if (impl->requires_grad) {
    for (const auto& p : parents) impl->parents.push_back(p.impl());
    impl->backward_fn = std::move(fn);
  }
  return Tensor(impl);
}

// Matrix layout helpers: rank 1 is a single row, rank 2 is [rows, cols],
// rank 3 is [batch, rows, cols].
Index mat_rows(const Shape& s) {
  return s.size() <= 1 ? 1 : s[s.size() - 2];
}
Index mat_cols(const Shape& s) {
  return s.empty() ? 1 : s.back();
}
Index mat_batch(const Shape& s) {
  Index b = 1;
  for (size_t i = 0; i + 2 < s.size(); ++i) b *= s[i];
  return b;
}

// C += A * B with the k-contraction accumulated in ascending order; adding a
// zero-weighted row is bitwise a no-op, which the decoder's incremental
// equivalence relies on.
void mm_acc(const Scalar* A, const Scalar* B, Scalar* C, Index m, Index k, Index n) {
  for (Index i = 0; i < m; ++i) {
    const Scalar* a = A + i * k;
    Eigen::Map<ArrayX> c(C + i * n, n);
    for (Index kk = 0; kk < k; ++kk) {
      Scalar av = a[kk];
      if (av == 0.0) continue;
      c += av * Eigen::Map<const ArrayX>(B + kk * n, n);
    }
  }
}

// dB += A^T * D   (A: [m,k], D: [m,n], dB: [k,n])
void mm_acc_at(const Scalar* A, const Scalar* D, Scalar* dB, Index m, Index k, Index n) {
  for (Index i = 0; i < m; ++i) {
    const Scalar* a = A + i * k;
    Eigen::Map<const ArrayX> d(D + i * n, n);
    for (Index kk = 0; kk < k; ++kk) {
      if (a[kk] == 0.0) continue;
      Eigen::Map<ArrayX>(dB + kk * n, n) += a[kk] * d;
    }
  }
}

// dA += D * B^T   (D: [m,n], B: [k,n], dA: [m,k])
void mm_acc_bt(const Scalar* D, const Scalar* B, Scalar* dA, Index m, Index k, Index n) {
  for (Index i = 0; i < m; ++i) {
    Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> d(D + i * n, n);
    for (Index kk = 0; kk < k; ++kk) {
      Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> b(B + kk * n, n);
      dA[i * k + kk] += d.dot(b);
    }
  }
}

}  // namespace

void TensorImpl::ensure_grad() {
  if (grad.size() == 0) grad = ArrayX::Zero(data.size());
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(make_impl(std::move(shape), requires_grad));
}

Tensor Tensor::full(Shape shape, Scalar value, bool requires_grad) {
  auto impl = make_impl(std::move(shape), requires_grad);
  impl->data.setConstant(value);
  return Tensor(impl);
}

Tensor Tensor::from(Shape shape, std::vector<Scalar> values, bool requires_grad) {
  if (shape_size(shape) != static_cast<Index>(values.size()))
    throw std::invalid_argument("Tensor::from: " + shape_str(shape) + " needs " +
                                std::to_string(shape_size(shape)) + " values, got " +
                                std::to_string(values.size()));
  auto impl = make_impl(std::move(shape), requires_grad);
  for (Index i = 0; i < impl->data.size(); ++i) impl->data[i] = values[static_cast<size_t>(i)];
  return Tensor(impl);
}

Tensor Tensor::scalar(Scalar value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, Scalar stddev, bool requires_grad) {
  auto impl = make_impl(std::move(shape), requires_grad);
  for (Index i = 0; i < impl->data.size(); ++i) impl->data[i] = stddev * rng.normal();
  return Tensor(impl);
}

Tensor Tensor::xavier_uniform(Shape shape, Rng& rng, bool requires_grad) {
  auto impl = make_impl(std::move(shape), requires_grad);
  Index fan_in = mat_rows(impl->shape);
  Index fan_out = mat_cols(impl->shape);
  Scalar bound = std::sqrt(6.0 / static_cast<Scalar>(fan_in + fan_out));
  for (Index i = 0; i < impl->data.size(); ++i) impl->data[i] = rng.uniform(-bound, bound);
  return Tensor(impl);
}

ArrayX& Tensor::grad() {
  impl_->ensure_grad();
  return impl_->grad;
}

const ArrayX& Tensor::grad() const {
  if (impl_->grad.size() == 0) throw std::runtime_error("Tensor::grad: no gradient present");
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_->grad.size() > 0) impl_->grad.setZero();
}

Scalar Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("Tensor::item: tensor has " +
                                               std::to_string(size()) + " elements");
  return impl_->data[0];
}

Scalar Tensor::at(Index i, Index j) const {
  if (rank() != 2) throw std::invalid_argument("Tensor::at(i,j): rank-2 only");
  return impl_->data[i * dim(1) + j];
}

ConstMatMap Tensor::mat() const {
  return ConstMatMap(impl_->data.data(), mat_rows(impl_->shape) * mat_batch(impl_->shape),
                     mat_cols(impl_->shape));
}

MatMap Tensor::mat() {
  return MatMap(impl_->data.data(), mat_rows(impl_->shape) * mat_batch(impl_->shape),
                mat_cols(impl_->shape));
}

// ---- matmul ---------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sa.size() > 3 || sb.size() < 2 || sb.size() > 3)
    shape_error("matmul", sa, sb);
  Index m = mat_rows(sa), ka = mat_cols(sa);
  Index kb = mat_rows(sb), n = mat_cols(sb);
  Index ba = mat_batch(sa), bb = mat_batch(sb);
  if (ka != kb) shape_error("matmul", sa, sb);
  if (sa.size() == 3 && sb.size() == 3 && ba != bb) shape_error("matmul", sa, sb);
  Index batch = std::max(ba, bb);

  Shape out_shape = (sa.size() == 3 || sb.size() == 3) ? Shape{batch, m, n} : Shape{m, n};
  ArrayX out = ArrayX::Zero(batch * m * n);
  Index stride_a = sa.size() == 3 ? m * ka : 0;
  Index stride_b = sb.size() == 3 ? ka * n : 0;
  for (Index t = 0; t < batch; ++t)
    mm_acc(a.data().data() + t * stride_a, b.data().data() + t * stride_b,
           out.data() + t * m * n, m, ka, n);

  Index k = ka;
  return make_op(std::move(out_shape), std::move(out), {a, b},
                 [m, k, n, batch, stride_a, stride_b](TensorImpl& node) {
                   auto& pa = *node.parents[0];
                   auto& pb = *node.parents[1];
                   for (Index t = 0; t < batch; ++t) {
                     const Scalar* g = node.grad.data() + t * m * n;
                     if (pa.requires_grad) {
                       pa.ensure_grad();
                       mm_acc_bt(g, pb.data.data() + t * stride_b,
                                 pa.grad.data() + t * stride_a, m, k, n);
                     }
                     if (pb.requires_grad) {
                       pb.ensure_grad();
                       mm_acc_at(pa.data.data() + t * stride_a, g,
                                 pb.grad.data() + t * stride_b, m, k, n);
                     }
                   }
                 });
}

// ---- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) {
    ArrayX out = a.data() + b.data();
    return make_op(sa, std::move(out), {a, b}, [](TensorImpl& node) {
      for (auto& p : node.parents) {
        if (!p->requires_grad) continue;
        p->ensure_grad();
        p->grad += node.grad;
      }
    });
  }
  // Row-vector broadcast: b is [c] or [1, c], added to every row of a.
  Index c = mat_cols(sa);
  if (b.size() == c && (sb.size() == 1 || (sb.size() == 2 && sb[0] == 1))) {
    Index rows = a.size() / c;
    ArrayX out(a.size());
    for (Index r = 0; r < rows; ++r)
      out.segment(r * c, c) = a.data().segment(r * c, c) + b.data();
    return make_op(sa, std::move(out), {a, b}, [rows, c](TensorImpl& node) {
      auto& pa = *node.parents[0];
      auto& pb = *node.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        pa.grad += node.grad;
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (Index r = 0; r < rows; ++r) pb.grad += node.grad.segment(r * c, c);
      }
    });
  }
  shape_error("add", sa, sb);
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
  ArrayX out = a.data() * b.data();
  return make_op(a.shape(), std::move(out), {a, b}, [](TensorImpl& node) {
    auto& pa = *node.parents[0];
    auto& pb = *node.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      pa.grad += node.grad * pb.data;
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      pb.grad += node.grad * pa.data;
    }
  });
}

Tensor scale(const Tensor& a, Scalar c) {
  ArrayX out = a.data() * c;
  return make_op(a.shape(), std::move(out), {a}, [c](TensorImpl& node) {
    auto& p = *node.parents[0];
    p.ensure_grad();
    p.grad += c * node.grad;
  });
}

Tensor relu(const Tensor& x) {
  ArrayX out = x.data().max(0.0);
  return make_op(x.shape(), std::move(out), {x}, [](TensorImpl& node) {
    auto& p = *node.parents[0];
    p.ensure_grad();
    // Subgradient at 0 is 0.
    p.grad += node.grad * (p.data > 0.0).cast<Scalar>();
  });
}

// ---- softmax --------------------------------------------------------------

namespace {
struct AxisView {
  Index outer, len, inner;
};

AxisView axis_view(const Shape& s, int axis) {
  if (axis < 0 || axis >= static_cast<int>(s.size()))
    throw std::invalid_argument("softmax: axis " + std::to_string(axis) +
                                " invalid for shape " + shape_str(s));
  AxisView v{1, s[static_cast<size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) v.outer *= s[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}
}  // namespace

Tensor softmax(const Tensor& x, int axis) {
  AxisView v = axis_view(x.shape(), axis);
  ArrayX out(x.size());
  const ArrayX& in = x.data();
  for (Index o = 0; o < v.outer; ++o) {
    for (Index i = 0; i < v.inner; ++i) {
      Index base = o * v.len * v.inner + i;
      Scalar mx = -std::numeric_limits<Scalar>::infinity();
      for (Index t = 0; t < v.len; ++t) mx = std::max(mx, in[base + t * v.inner]);
      Scalar z = 0.0;
      for (Index t = 0; t < v.len; ++t) {
        Scalar e = std::exp(in[base + t * v.inner] - mx);
        out[base + t * v.inner] = e;
        z += e;
      }
      for (Index t = 0; t < v.len; ++t) out[base + t * v.inner] /= z;
    }
  }
  return make_op(x.shape(), std::move(out), {x}, [v](TensorImpl& node) {
    auto& p = *node.parents[0];
    p.ensure_grad();
    for (Index o = 0; o < v.outer; ++o) {
      for (Index i = 0; i < v.inner; ++i) {
        Index base = o * v.len * v.inner + i;
        Scalar s = 0.0;
        for (Index t = 0; t < v.len; ++t)
          s += node.grad[base + t * v.inner] * node.data[base + t * v.inner];
        for (Index t = 0; t < v.len; ++t) {
          Index ix = base + t * v.inner;
          p.grad[ix] += node.data[ix] * (node.grad[ix] - s);
        }
      }
    }
  });
}

// ---- layer norm -----------------------------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Scalar eps) {
  Index c = mat_cols(x.shape());
  if (c == 0) throw std::invalid_argument("layer_norm: zero-length last dimension");
  if (gain.size() != c || bias.size() != c)
    throw std::invalid_argument("layer_norm: gain/bias size must be " + std::to_string(c));
  if (eps <= 0.0) throw std::invalid_argument("layer_norm: eps must be positive");
  Index rows = x.size() / c;
  ArrayX out(x.size());
  ArrayX inv_std(rows);
  ArrayX xhat(x.size());
  for (Index r = 0; r < rows; ++r) {
    Scalar mu = 0.0;
    for (Index j = 0; j < c; ++j) mu += x.data()[r * c + j];
    mu /= static_cast<Scalar>(c);
    Scalar var = 0.0;
    for (Index j = 0; j < c; ++j) {
      Scalar d = x.data()[r * c + j] - mu;
      var += d * d;
    }
    var /= static_cast<Scalar>(c);
    Scalar inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (Index j = 0; j < c; ++j) {
      Scalar xh = (x.data()[r * c + j] - mu) * inv;
      xhat[r * c + j] = xh;
      out[r * c + j] = gain.data()[j] * xh + bias.data()[j];
    }
  }
  return make_op(x.shape(), std::move(out), {x, gain, bias},
                 [rows, c, inv_std = std::move(inv_std), xhat = std::move(xhat)](TensorImpl& node) {
                   auto& px = *node.parents[0];
                   auto& pg = *node.parents[1];
                   auto& pb = *node.parents[2];
                   for (Index r = 0; r < rows; ++r) {
                     Scalar sum_dxh = 0.0, sum_dxh_xh = 0.0;
                     for (Index j = 0; j < c; ++j) {
                       Index ix = r * c + j;
                       Scalar dy = node.grad[ix];
                       Scalar dxh = dy * pg.data[j];
                       sum_dxh += dxh;
                       sum_dxh_xh += dxh * xhat[ix];
                       if (pg.requires_grad) {
                         pg.ensure_grad();
                         pg.grad[j] += dy * xhat[ix];
                       }
                       if (pb.requires_grad) {
                         pb.ensure_grad();
                         pb.grad[j] += dy;
                       }
                     }
                     if (px.requires_grad) {
                       px.ensure_grad();
                       Scalar n = static_cast<Scalar>(c);
                       for (Index j = 0; j < c; ++j) {
                         Index ix = r * c + j;
                         Scalar dxh = node.grad[ix] * pg.data[j];
                         px.grad[ix] += inv_std[r] *
                                        (dxh - sum_dxh / n - xhat[ix] * sum_dxh_xh / n);
                       }
                     }
                   }
                 });
}

// ---- embedding ------------------------------------------------------------

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  if (table.rank() != 2) throw std::invalid_argument("embedding_lookup: table must be rank 2");
  Index v = table.dim(0), d = table.dim(1);
  Index n = static_cast<Index>(ids.size());
  ArrayX out(n * d);
  for (Index i = 0; i < n; ++i) {
    int id = ids[static_cast<size_t>(i)];
    if (id < 0 || id >= v)
      throw std::out_of_range("embedding_lookup: id " + std::to_string(id) +
                              " outside vocabulary of size " + std::to_string(v));
    out.segment(i * d, d) = table.data().segment(id * d, d);
  }
  return make_op({n, d}, std::move(out), {table}, [ids, d](TensorImpl& node) {
    auto& p = *node.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < ids.size(); ++i)
      p.grad.segment(ids[i] * d, d) += node.grad.segment(static_cast<Index>(i) * d, d);
  });
}

// ---- nll loss -------------------------------------------------------------

Tensor nll_loss(const Tensor& logits, const std::vector<int>& targets,
                const std::vector<bool>& mask) {
  if (logits.rank() != 2) throw std::invalid_argument("nll_loss: logits must be rank 2");
  Index n = logits.dim(0), v = logits.dim(1);
  if (static_cast<Index>(targets.size()) != n || static_cast<Index>(mask.size()) != n)
    throw std::invalid_argument("nll_loss: got " + std::to_string(n) + " logit rows, " +
                                std::to_string(targets.size()) + " targets, " +
                                std::to_string(mask.size()) + " mask entries");
  Index count = 0;
  for (bool m : mask) count += m ? 1 : 0;
  if (count == 0) return Tensor::scalar(0.0);

  Scalar total = 0.0;
  ArrayX lse(n);
  for (Index i = 0; i < n; ++i) {
    if (!mask[static_cast<size_t>(i)]) continue;
    int t = targets[static_cast<size_t>(i)];
    if (t < 0 || t >= v)
      throw std::out_of_range("nll_loss: target " + std::to_string(t) +
                              " outside vocabulary of size " + std::to_string(v));
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < v; ++j) mx = std::max(mx, logits.data()[i * v + j]);
    Scalar z = 0.0;
    for (Index j = 0; j < v; ++j) z += std::exp(logits.data()[i * v + j] - mx);
    lse[i] = mx + std::log(z);
    total += lse[i] - logits.data()[i * v + t];
  }
  total /= static_cast<Scalar>(count);

  ArrayX out(1);
  out[0] = total;
  return make_op({1}, std::move(out), {logits},
                 [targets, mask, count, lse = std::move(lse), v](TensorImpl& node) {
                   auto& p = *node.parents[0];
                   p.ensure_grad();
                   Scalar g = node.grad[0] / static_cast<Scalar>(count);
                   Index n = static_cast<Index>(targets.size());
                   for (Index i = 0; i < n; ++i) {
                     if (!mask[static_cast<size_t>(i)]) continue;
                     for (Index j = 0; j < v; ++j)
                       p.grad[i * v + j] += g * std::exp(p.data[i * v + j] - lse[i]);
                     p.grad[i * v + targets[static_cast<size_t>(i)]] -= g;
                   }
                 });
}

// ---- dropout --------------------------------------------------------------

Tensor dropout(const Tensor& x, Scalar p, bool training, Rng& rng) {
  if (p < 0.0 || p >= 1.0)
    throw std::invalid_argument("dropout: p must be in [0, 1), got " + std::to_string(p));
  if (!training || p == 0.0) return x;
  Scalar keep_scale = 1.0 / (1.0 - p);
  ArrayX keep(x.size());
  for (Index i = 0; i < x.size(); ++i) keep[i] = rng.uniform() >= p ? keep_scale : 0.0;
  ArrayX out = x.data() * keep;
  return make_op(x.shape(), std::move(out), {x}, [keep = std::move(keep)](TensorImpl& node) {
    auto& px = *node.parents[0];
    px.ensure_grad();
    px.grad += node.grad * keep;
  });
}

// ---- structural ops -------------------------------------------------------

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw std::invalid_argument("transpose: rank-2 only");
  Index r = x.dim(0), c = x.dim(1);
  ArrayX out(x.size());
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) out[j * r + i] = x.data()[i * c + j];
  return make_op({c, r}, std::move(out), {x}, [r, c](TensorImpl& node) {
    auto& p = *node.parents[0];
    p.ensure_grad();
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) p.grad[i * c + j] += node.grad[j * r + i];
  });
}

Tensor slice_cols(const Tensor& x, Index c0, Index c1) {
  if (x.rank() != 2) throw std::invalid_argument("slice_cols: rank-2 only");
  Index r = x.dim(0), c = x.dim(1);
  if (c0 < 0 || c1 > c || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range [" + std::to_string(c0) + "," +
                                std::to_string(c1) + ") for " + shape_str(x.shape()));
  Index w = c1 - c0;
  ArrayX out(r * w);
  for (Index i = 0; i < r; ++i) out.segment(i * w, w) = x.data().segment(i * c + c0, w);
  return make_op({r, w}, std::move(out), {x}, [r, c, c0, w](TensorImpl& node) {
    auto& p = *node.parents[0];
    p.ensure_grad();
    for (Index i = 0; i < r; ++i)
      p.grad.segment(i * c + c0, w) += node.grad.segment(i * w, w);
  });
}

Tensor slice_rows(const Tensor& x, Index r0, Index r1) {
  if (x.rank() != 2) throw std::invalid_argument("slice_rows: rank-2 only");
  Index r = x.dim(0), c = x.dim(1);
  if (r0 < 0 || r1 > r || r0 >= r1)
    throw std::invalid_argument("slice_rows: bad range [" + std::to_string(r0) + "," +
                                std::to_string(r1) + ") for " + shape_str(x.shape()));
  Index h = r1 - r0;
  ArrayX out = x.data().segment(r0 * c, h * c);
  return make_op({h, c}, std::move(out), {x}, [r0, c, h](TensorImpl& node) {
    auto& p = *node.parents[0];
    p.ensure_grad();
    p.grad.segment(r0 * c, h * c) += node.grad;
  });
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: empty input");
  Index r = xs[0].dim(0);
  Index total = 0;
  std::vector<Index> widths;
  for (const auto& x : xs) {
    if (x.rank() != 2 || x.dim(0) != r) shape_error("concat_cols", xs[0].shape(), x.shape());
    widths.push_back(x.dim(1));
    total += x.dim(1);
  }
  ArrayX out(r * total);
  Index off = 0;
  for (size_t t = 0; t < xs.size(); ++t) {
    Index w = widths[t];
    for (Index i = 0; i < r; ++i)
      out.segment(i * total + off, w) = xs[t].data().segment(i * w, w);
    off += w;
  }
  return make_op({r, total}, std::move(out), xs, [r, total, widths](TensorImpl& node) {
    Index off = 0;
    for (size_t t = 0; t < node.parents.size(); ++t) {
      Index w = widths[t];
      auto& p = *node.parents[t];
      if (p.requires_grad) {
        p.ensure_grad();
        for (Index i = 0; i < r; ++i)
          p.grad.segment(i * w, w) += node.grad.segment(i * total + off, w);
      }
      off += w;
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_rows: empty input");
  Index c = mat_cols(xs[0].shape());
  Index rows = 0;
  std::vector<Index> heights;
  for (const auto& x : xs) {
    if (x.rank() > 2 || mat_cols(x.shape()) != c)
      shape_error("concat_rows", xs[0].shape(), x.shape());
    heights.push_back(x.size() / c);
    rows += x.size() / c;
  }
  ArrayX out(rows * c);
  Index off = 0;
  for (size_t t = 0; t < xs.size(); ++t) {
    out.segment(off, xs[t].size()) = xs[t].data();
    off += xs[t].size();
  }
  return make_op({rows, c}, std::move(out), xs, [heights, c](TensorImpl& node) {
    Index off = 0;
    for (size_t t = 0; t < node.parents.size(); ++t) {
      auto& p = *node.parents[t];
      Index sz = heights[t] * c;
      if (p.requires_grad) {
        p.ensure_grad();
        p.grad += node.grad.segment(off, sz);
      }
      off += sz;
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) shape_error("reshape", x.shape(), shape);
  ArrayX out = x.data();
  return make_op(std::move(shape), std::move(out), {x}, [](TensorImpl& node) {
    auto& p = *node.parents[0];
    p.ensure_grad();
    p.grad += node.grad;
  });
}

Tensor sum(const Tensor& x) {
  Scalar s = 0.0;
  for (Index i = 0; i < x.size(); ++i) s += x.data()[i];
  ArrayX out(1);
  out[0] = s;
  return make_op({1}, std::move(out), {x}, [](TensorImpl& node) {
    auto& p = *node.parents[0];
    p.ensure_grad();
    p.grad += node.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw std::invalid_argument("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<Scalar>(x.size()));
}

// ---- backward -------------------------------------------------------------

void backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                shape_str(loss.shape()));
  // Iterative post-order over the graph.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, size_t>> stack;
  stack.emplace_back(loss.impl().get(), 0);
  visited.insert(loss.impl().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorImpl* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.impl()->ensure_grad();
  loss.impl()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* node = *it;
    if (node->backward_fn && node->grad.size() > 0) node->backward_fn(*node);
  }
}

}  // namespace hibert
