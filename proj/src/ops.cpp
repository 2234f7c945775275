#include "aat/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <memory>
#include <string>

#include "aat/errors.hpp"

namespace aat::ops {

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Map = Eigen::Map<MatR<T>>;
template <typename T>
using ConstMap = Eigen::Map<const MatR<T>>;

template <typename T>
using NodeT = detail::Node<T>;

template <typename T>
using BackwardFn = std::function<void(NodeT<T>&)>;

// Wraps a freshly computed value as a graph node. The backward rule is only
// attached when some input participates in differentiation.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> value, std::initializer_list<const Tensor<T>*> inputs,
                      BackwardFn<T> rule) {
  Tensor<T> out(std::move(shape), std::move(value), false);
  if (!grad_enabled()) return out;
  bool any = false;
  for (const auto* in : inputs) any = any || in->requires_grad();
  if (!any) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  for (const auto* in : inputs) node.inputs.push_back(in->node());
  node.backward = std::move(rule);
  return out;
}

template <typename T>
NodeT<T>* grad_target(NodeT<T>& self, std::size_t i) {
  NodeT<T>* in = self.inputs[i].get();
  if (!in->requires_grad) return nullptr;
  in->ensure_grad();
  return in;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw DimensionError(message);
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.ndim() == 2 && b.ndim() == 2 && a.size(1) == b.size(0),
          "matmul: cannot multiply " + shape_string(a.shape()) + " by " + shape_string(b.shape()));
  const auto m = static_cast<Eigen::Index>(a.size(0));
  const auto k = static_cast<Eigen::Index>(a.size(1));
  const auto n = static_cast<Eigen::Index>(b.size(1));
  std::vector<T> out(static_cast<std::size_t>(m * n));
  Map<T>(out.data(), m, n).noalias() = ConstMap<T>(a.values().data(), m, k) * ConstMap<T>(b.values().data(), k, n);
  return make_result<T>({a.size(0), b.size(1)}, std::move(out), {&a, &b}, [m, k, n](NodeT<T>& self) {
    ConstMap<T> dc(self.grad.data(), m, n);
    if (auto* in = grad_target(self, 0)) {
      ConstMap<T> bm(self.inputs[1]->value.data(), k, n);
      Map<T>(in->grad.data(), m, k).noalias() += dc * bm.transpose();
    }
    if (auto* in = grad_target(self, 1)) {
      ConstMap<T> am(self.inputs[0]->value.data(), m, k);
      Map<T>(in->grad.data(), k, n).noalias() += am.transpose() * dc;
    }
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require(x.ndim() == 2 && weight.ndim() == 2 && bias.ndim() == 1 && x.size(1) == weight.size(1) &&
              bias.size(0) == weight.size(0),
          "linear: input " + shape_string(x.shape()) + " incompatible with weight " + shape_string(weight.shape()) +
              " and bias " + shape_string(bias.shape()));
  const auto batch = static_cast<Eigen::Index>(x.size(0));
  const auto in_dim = static_cast<Eigen::Index>(x.size(1));
  const auto out_dim = static_cast<Eigen::Index>(weight.size(0));
  std::vector<T> out(static_cast<std::size_t>(batch * out_dim));
  Map<T> y(out.data(), batch, out_dim);
  y.noalias() = ConstMap<T>(x.values().data(), batch, in_dim) *
                ConstMap<T>(weight.values().data(), out_dim, in_dim).transpose();
  y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.values().data(), out_dim);
  return make_result<T>({x.size(0), weight.size(0)}, std::move(out), {&x, &weight, &bias},
                        [batch, in_dim, out_dim](NodeT<T>& self) {
                          ConstMap<T> dy(self.grad.data(), batch, out_dim);
                          if (auto* in = grad_target(self, 0)) {
                            ConstMap<T> w(self.inputs[1]->value.data(), out_dim, in_dim);
                            Map<T>(in->grad.data(), batch, in_dim).noalias() += dy * w;
                          }
                          if (auto* in = grad_target(self, 1)) {
                            ConstMap<T> xm(self.inputs[0]->value.data(), batch, in_dim);
                            Map<T>(in->grad.data(), out_dim, in_dim).noalias() += dy.transpose() * xm;
                          }
                          if (auto* in = grad_target(self, 2)) {
                            // Fixed summation order keeps runs bitwise reproducible.
                            for (Eigen::Index i = 0; i < batch; ++i) {
                              for (Eigen::Index j = 0; j < out_dim; ++j) in->grad[static_cast<std::size_t>(j)] += dy(i, j);
                            }
                          }
                        });
}

namespace {

struct ConvGeometry {
  std::size_t n, cin, h, w, cout, kh, kw, stride, pad, ho, wo;
  std::size_t k() const { return cin * kh * kw; }
  std::size_t p() const { return ho * wo; }
};

// cols is [K x (N*P)] row-major.
template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* cols) {
  const std::size_t np = g.n * g.p();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* row = cols + ((c * g.kh + ki) * g.kw + kj) * np;
        for (std::size_t b = 0; b < g.n; ++b) {
          const T* plane = x + (b * g.cin + c) * g.h * g.w;
          T* dst = row + b * g.p();
          for (std::size_t oh = 0; oh < g.ho; ++oh) {
            const long ih = static_cast<long>(oh * g.stride + ki) - static_cast<long>(g.pad);
            for (std::size_t ow = 0; ow < g.wo; ++ow) {
              const long iw = static_cast<long>(ow * g.stride + kj) - static_cast<long>(g.pad);
              const bool inside = ih >= 0 && iw >= 0 && ih < static_cast<long>(g.h) && iw < static_cast<long>(g.w);
              dst[oh * g.wo + ow] = inside ? plane[ih * static_cast<long>(g.w) + iw] : T(0);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const T* cols, T* dx) {
  const std::size_t np = g.n * g.p();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* row = cols + ((c * g.kh + ki) * g.kw + kj) * np;
        for (std::size_t b = 0; b < g.n; ++b) {
          T* plane = dx + (b * g.cin + c) * g.h * g.w;
          const T* src = row + b * g.p();
          for (std::size_t oh = 0; oh < g.ho; ++oh) {
            const long ih = static_cast<long>(oh * g.stride + ki) - static_cast<long>(g.pad);
            if (ih < 0 || ih >= static_cast<long>(g.h)) continue;
            for (std::size_t ow = 0; ow < g.wo; ++ow) {
              const long iw = static_cast<long>(ow * g.stride + kj) - static_cast<long>(g.pad);
              if (iw < 0 || iw >= static_cast<long>(g.w)) continue;
              plane[ih * static_cast<long>(g.w) + iw] += src[oh * g.wo + ow];
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, std::size_t stride,
                 std::size_t pad) {
  require(x.ndim() == 4 && weight.ndim() == 4 && bias.ndim() == 1,
          "conv2d: expected 4-d input and weight, 1-d bias, got " + shape_string(x.shape()) + ", " +
              shape_string(weight.shape()) + ", " + shape_string(bias.shape()));
  require(stride > 0, "conv2d: stride must be positive");
  require(x.size(1) == weight.size(1) && bias.size(0) == weight.size(0),
          "conv2d: input " + shape_string(x.shape()) + " incompatible with weight " + shape_string(weight.shape()));
  ConvGeometry g{x.size(0), x.size(1), x.size(2), x.size(3), weight.size(0), weight.size(2), weight.size(3),
                 stride,    pad,       0,         0};
  const std::size_t span_h = g.h + 2 * pad;
  const std::size_t span_w = g.w + 2 * pad;
  require(span_h >= g.kh && span_w >= g.kw && (span_h - g.kh) % stride == 0 && (span_w - g.kw) % stride == 0,
          "conv2d: output extent not integral for input " + shape_string(x.shape()) + ", kernel " +
              shape_string(weight.shape()) + ", stride " + std::to_string(stride) + ", pad " + std::to_string(pad));
  g.ho = (span_h - g.kh) / stride + 1;
  g.wo = (span_w - g.kw) / stride + 1;

  const auto K = static_cast<Eigen::Index>(g.k());
  const auto P = static_cast<Eigen::Index>(g.p());
  const auto NP = static_cast<Eigen::Index>(g.n * g.p());
  const auto O = static_cast<Eigen::Index>(g.cout);

  auto cols = std::make_shared<std::vector<T>>(static_cast<std::size_t>(K * NP));
  im2col(g, x.values().data(), cols->data());
  MatR<T> out_mat(O, NP);
  out_mat.noalias() = ConstMap<T>(weight.values().data(), O, K) * ConstMap<T>(cols->data(), K, NP);

  std::vector<T> out(g.n * g.cout * g.p());
  const auto b = bias.values();
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t o = 0; o < g.cout; ++o) {
      const T* src = out_mat.data() + o * NP + n * P;
      T* dst = out.data() + (n * g.cout + o) * g.p();
      for (std::size_t p = 0; p < g.p(); ++p) dst[p] = src[p] + b[o];
    }
  }
  if (!weight.requires_grad()) cols.reset();  // only dW needs the unfolded input
  return make_result<T>({g.n, g.cout, g.ho, g.wo}, std::move(out), {&x, &weight, &bias},
                        [g, cols, K, P, NP, O](NodeT<T>& self) {
                          MatR<T> dmat(O, NP);
                          for (std::size_t n = 0; n < g.n; ++n) {
                            for (std::size_t o = 0; o < g.cout; ++o) {
                              const T* src = self.grad.data() + (n * g.cout + o) * g.p();
                              std::copy(src, src + g.p(), dmat.data() + o * NP + n * P);
                            }
                          }
                          if (auto* in = grad_target(self, 0)) {
                            ConstMap<T> w(self.inputs[1]->value.data(), O, K);
                            MatR<T> dcols(K, NP);
                            dcols.noalias() = w.transpose() * dmat;
                            col2im_add(g, dcols.data(), in->grad.data());
                          }
                          if (auto* in = grad_target(self, 1)) {
                            Map<T>(in->grad.data(), O, K).noalias() +=
                                dmat * ConstMap<T>(cols->data(), K, NP).transpose();
                          }
                          if (auto* in = grad_target(self, 2)) {
                            for (Eigen::Index o = 0; o < O; ++o) {
                              T acc = 0;
                              for (Eigen::Index p = 0; p < NP; ++p) acc += dmat(o, p);
                              in->grad[static_cast<std::size_t>(o)] += acc;
                            }
                          }
                        });
}

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x) {
  require(x.ndim() == 4 && x.size(2) >= 2 && x.size(3) >= 2,
          "max_pool2d: expected NCHW with spatial extents >= 2, got " + shape_string(x.shape()));
  const std::size_t planes = x.size(0) * x.size(1);
  const std::size_t h = x.size(2), w = x.size(3);
  const std::size_t ho = h / 2, wo = w / 2;
  std::vector<T> out(planes * ho * wo);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  const auto in = x.values();
  for (std::size_t pl = 0; pl < planes; ++pl) {
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j) {
        std::size_t best = pl * h * w + (2 * i) * w + 2 * j;
        for (std::size_t di = 0; di < 2; ++di) {
          for (std::size_t dj = 0; dj < 2; ++dj) {
            const std::size_t idx = pl * h * w + (2 * i + di) * w + (2 * j + dj);
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = (pl * ho + i) * wo + j;
        out[o] = in[best];
        (*argmax)[o] = best;
      }
    }
  }
  return make_result<T>({x.size(0), x.size(1), ho, wo}, std::move(out), {&x}, [argmax](NodeT<T>& self) {
    if (auto* in = grad_target(self, 0)) {
      for (std::size_t o = 0; o < argmax->size(); ++o) in->grad[(*argmax)[o]] += self.grad[o];
    }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.values().begin(), x.values().end());
  for (auto& v : out) v = v > T(0) ? v : T(0);
  return make_result<T>(x.shape(), std::move(out), {&x}, [](NodeT<T>& self) {
    if (auto* in = grad_target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        if (in->value[i] > T(0)) in->grad[i] += self.grad[i];
      }
    }
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [](NodeT<T>& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* in = grad_target(self, k)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i];
      }
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [](NodeT<T>& self) {
    if (auto* in = grad_target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i];
    }
    if (auto* in = grad_target(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [](NodeT<T>& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    if (auto* in = grad_target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i] * bv[i];
    }
    if (auto* in = grad_target(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i] * av[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> out(x.values().begin(), x.values().end());
  for (auto& v : out) v *= factor;
  return make_result<T>(x.shape(), std::move(out), {&x}, [factor](NodeT<T>& self) {
    if (auto* in = grad_target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += factor * self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = 0;
  for (T v : x.values()) total += v;
  return make_result<T>({1}, {total}, {&x}, [](NodeT<T>& self) {
    if (auto* in = grad_target(self, 0)) {
      for (auto& g : in->grad) g += self.grad[0];
    }
  });
}

template <typename T>
Tensor<T> squared_distance(const Tensor<T>& a, const Tensor<T>& b) {
  const auto diff = sub(a, b);
  return sum(mul(diff, diff));
}

template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b) {
  Shape lead_a(a.shape().begin(), a.shape().end() - 1);
  Shape lead_b(b.shape().begin(), b.shape().end() - 1);
  require(lead_a == lead_b, "concat: leading extents differ " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  const std::size_t wa = a.shape().back(), wb = b.shape().back();
  const std::size_t rows = a.numel() / wa;
  std::vector<T> out(rows * (wa + wb));
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data() + r * wa, wa, out.data() + r * (wa + wb));
    std::copy_n(bv.data() + r * wb, wb, out.data() + r * (wa + wb) + wa);
  }
  Shape shape = lead_a;
  shape.push_back(wa + wb);
  return make_result<T>(std::move(shape), std::move(out), {&a, &b}, [rows, wa, wb](NodeT<T>& self) {
    if (auto* in = grad_target(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < wa; ++j) in->grad[r * wa + j] += self.grad[r * (wa + wb) + j];
      }
    }
    if (auto* in = grad_target(self, 1)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < wb; ++j) in->grad[r * wb + j] += self.grad[r * (wa + wb) + wa + j];
      }
    }
  });
}

template <typename T>
std::vector<Tensor<T>> split(const Tensor<T>& x, std::span<const std::size_t> widths) {
  const std::size_t width = x.shape().back();
  std::size_t total = 0;
  for (auto w : widths) {
    require(w > 0, "split: zero-width piece");
    total += w;
  }
  require(total == width, "split: widths sum to " + std::to_string(total) + " but last axis of " +
                              shape_string(x.shape()) + " is " + std::to_string(width));
  const std::size_t rows = x.numel() / width;
  std::vector<Tensor<T>> pieces;
  std::size_t offset = 0;
  for (auto w : widths) {
    std::vector<T> out(rows * w);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(x.values().data() + r * width + offset, w, out.data() + r * w);
    }
    Shape shape(x.shape().begin(), x.shape().end() - 1);
    shape.push_back(w);
    pieces.push_back(make_result<T>(std::move(shape), std::move(out), {&x}, [rows, w, offset, width](NodeT<T>& self) {
      if (auto* in = grad_target(self, 0)) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < w; ++j) in->grad[r * width + offset + j] += self.grad[r * w + j];
        }
      }
    }));
    offset += w;
  }
  return pieces;
}

template <typename T>
Tensor<T> zeros_like(const Tensor<T>& x) {
  return Tensor<T>::zeros(x.shape());
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& x) {
  require(x.ndim() >= 1, "flatten: scalar input");
  const std::size_t n = x.size(0);
  std::vector<T> out(x.values().begin(), x.values().end());
  return make_result<T>({n, x.numel() / n}, std::move(out), {&x}, [](NodeT<T>& self) {
    if (auto* in = grad_target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> scale_features(const Tensor<T>& x, std::span<const T> factors) {
  const std::size_t width = x.shape().back();
  require(factors.size() == width, "scale_features: " + std::to_string(factors.size()) +
                                       " factors for last axis of " + shape_string(x.shape()));
  std::vector<T> f(factors.begin(), factors.end());
  std::vector<T> out(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= f[i % width];
  return make_result<T>(x.shape(), std::move(out), {&x}, [f = std::move(f), width](NodeT<T>& self) {
    if (auto* in = grad_target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i] * f[i % width];
    }
  });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels, Reduction reduction) {
  require(logits.ndim() == 2, "cross_entropy: expected [N x C] logits, got " + shape_string(logits.shape()));
  const std::size_t n = logits.size(0), c = logits.size(1);
  if (labels.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                          std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw ValidationError("cross_entropy: label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                            " outside [0, " + std::to_string(c) + ")");
    }
  }
  auto probs = std::make_shared<std::vector<T>>(n * c);
  const auto z = logits.values();
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = z.data() + i * c;
    const T top = *std::max_element(row, row + c);
    T denom = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const T e = std::exp(row[j] - top);
      (*probs)[i * c + j] = e;
      denom += e;
    }
    for (std::size_t j = 0; j < c; ++j) (*probs)[i * c + j] /= denom;
    total += std::log(denom) - (row[labels[i]] - top);
  }
  const T norm = reduction == Reduction::kMean ? T(1) / static_cast<T>(n) : T(1);
  std::vector<int> y(labels.begin(), labels.end());
  return make_result<T>({1}, {total * norm}, {&logits}, [probs, y = std::move(y), n, c, norm](NodeT<T>& self) {
    if (auto* in = grad_target(self, 0)) {
      const T g = self.grad[0] * norm;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
          const T onehot = static_cast<std::size_t>(y[i]) == j ? T(1) : T(0);
          in->grad[i * c + j] += g * ((*probs)[i * c + j] - onehot);
        }
      }
    }
  });
}

template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& logits) {
  require(logits.ndim() == 2, "argmax_rows: expected [N x C], got " + shape_string(logits.shape()));
  const std::size_t n = logits.size(0), c = logits.size(1);
  std::vector<int> out(n);
  const auto z = logits.values();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (z[i * c + j] > z[i * c + best]) best = j;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

#define AAT_INSTANTIATE_OPS(T)                                                                            \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t,         \
                               std::size_t);                                                              \
  template Tensor<T> max_pool2d<T>(const Tensor<T>&);                                                     \
  template Tensor<T> relu<T>(const Tensor<T>&);                                                           \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                                       \
  template Tensor<T> sum<T>(const Tensor<T>&);                                                            \
  template Tensor<T> squared_distance<T>(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> concat<T>(const Tensor<T>&, const Tensor<T>&);                                       \
  template std::vector<Tensor<T>> split<T>(const Tensor<T>&, std::span<const std::size_t>);               \
  template Tensor<T> zeros_like<T>(const Tensor<T>&);                                                     \
  template Tensor<T> flatten<T>(const Tensor<T>&);                                                        \
  template Tensor<T> scale_features<T>(const Tensor<T>&, std::span<const T>);                             \
  template Tensor<T> cross_entropy<T>(const Tensor<T>&, std::span<const int>, Reduction);                 \
  template std::vector<int> argmax_rows<T>(const Tensor<T>&);

AAT_INSTANTIATE_OPS(float)
AAT_INSTANTIATE_OPS(double)

#undef AAT_INSTANTIATE_OPS

}  // namespace aat::ops
