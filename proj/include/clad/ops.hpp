#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "clad/tensor.hpp"

namespace clad {

namespace detail {

struct BroadcastPlan {
  Shape out;
  std::vector<std::size_t> a_index;  // flat index into a for each output element
  std::vector<std::size_t> b_index;
};

inline BroadcastPlan plan_broadcast(const char* op, const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  auto extent = [rank](const Shape& s, std::size_t i) -> std::size_t {
    const std::size_t offset = rank - s.size();
    return i < offset ? 1 : s[i - offset];
  };
  BroadcastPlan plan;
  plan.out.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t ea = extent(a, i), eb = extent(b, i);
    if (ea != eb && ea != 1 && eb != 1) {
      throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    plan.out[i] = std::max(ea, eb);
  }
  // Strides of a and b expressed in output coordinates (0 on broadcast axes).
  std::vector<std::size_t> sa(rank, 0), sb(rank, 0);
  std::size_t stride_a = 1, stride_b = 1;
  for (std::size_t i = rank; i-- > 0;) {
    const std::size_t ea = extent(a, i), eb = extent(b, i);
    sa[i] = ea == 1 ? 0 : stride_a;
    sb[i] = eb == 1 ? 0 : stride_b;
    stride_a *= ea;
    stride_b *= eb;
  }
  const std::size_t total = numel_of(plan.out);
  plan.a_index.resize(total);
  plan.b_index.resize(total);
  std::vector<std::size_t> counter(rank, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    plan.a_index[flat] = ia;
    plan.b_index[flat] = ib;
    for (std::size_t i = rank; i-- > 0;) {
      ++counter[i];
      ia += sa[i];
      ib += sb[i];
      if (counter[i] < plan.out[i]) break;
      ia -= sa[i] * counter[i];
      ib -= sb[i] * counter[i];
      counter[i] = 0;
    }
  }
  return plan;
}

template <typename Forward, typename Backward>
Tensor unary(const char* op, const Tensor& x, Forward f, Backward df) {
  const auto& in = x.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result(op, x.shape(), std::move(out), {x}, [df](TensorImpl& self) {
    TensorImpl& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(p.data[i], self.data[i]);
  });
}

}  // namespace detail

/// Elementwise sum with right-aligned broadcasting.
inline Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.values());
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return detail::make_result("add", a.shape(), std::move(out), {a, b}, [](detail::TensorImpl& self) {
      for (auto& p : self.parents) {
        if (!p->requires_grad) continue;
        auto& g = p->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
    });
  }
  auto plan = std::make_shared<detail::BroadcastPlan>(detail::plan_broadcast("add", a.shape(), b.shape()));
  std::vector<double> out(plan->a_index.size());
  const auto &av = a.values(), &bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[plan->a_index[i]] + bv[plan->b_index[i]];
  return detail::make_result("add", plan->out, std::move(out), {a, b}, [plan](detail::TensorImpl& self) {
    detail::TensorImpl &pa = *self.parents[0], &pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[plan->a_index[i]] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[plan->b_index[i]] += self.grad[i];
    }
  });
}

/// Elementwise product with right-aligned broadcasting.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  auto plan = std::make_shared<detail::BroadcastPlan>(detail::plan_broadcast("mul", a.shape(), b.shape()));
  std::vector<double> out(plan->a_index.size());
  const auto &av = a.values(), &bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[plan->a_index[i]] * bv[plan->b_index[i]];
  return detail::make_result("mul", plan->out, std::move(out), {a, b}, [plan](detail::TensorImpl& self) {
    detail::TensorImpl &pa = *self.parents[0], &pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        g[plan->a_index[i]] += self.grad[i] * pb.data[plan->b_index[i]];
      }
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        g[plan->b_index[i]] += self.grad[i] * pa.data[plan->a_index[i]];
      }
    }
  });
}

inline Tensor scale(const Tensor& x, double k) {
  return detail::unary("scale", x, [k](double v) { return k * v; }, [k](double, double) { return k; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

/// [..., K] x [K, N] -> [..., N]. Leading axes of `a` are treated as rows.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (b.rank() != 2) throw DimensionError("matmul: right operand must be rank 2, got " + shape_str(b.shape()));
  const std::size_t k_dim = b.dim(0), n_dim = b.dim(1);
  if (a.shape().back() != k_dim) {
    throw DimensionError("matmul: inner dimensions differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t m_dim = a.numel() / k_dim;
  Shape out_shape = a.shape();
  out_shape.back() = n_dim;
  std::vector<double> out(m_dim * n_dim, 0.0);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  for (std::size_t m = 0; m < m_dim; ++m) {
    double* row = out.data() + m * n_dim;
    for (std::size_t k = 0; k < k_dim; ++k) {
      const double s = av[m * k_dim + k];
      const double* brow = bv + k * n_dim;
      for (std::size_t n = 0; n < n_dim; ++n) row[n] += s * brow[n];
    }
  }
  return detail::make_result("matmul", std::move(out_shape), std::move(out), {a, b},
                             [m_dim, k_dim, n_dim](detail::TensorImpl& self) {
    detail::TensorImpl &pa = *self.parents[0], &pb = *self.parents[1];
    const double* gy = self.grad.data();
    if (pa.requires_grad) {
      auto& ga = pa.ensure_grad();
      for (std::size_t m = 0; m < m_dim; ++m) {
        for (std::size_t k = 0; k < k_dim; ++k) {
          const double* brow = pb.data.data() + k * n_dim;
          const double* grow = gy + m * n_dim;
          double acc = 0.0;
          for (std::size_t n = 0; n < n_dim; ++n) acc += grow[n] * brow[n];
          ga[m * k_dim + k] += acc;
        }
      }
    }
    if (pb.requires_grad) {
      auto& gb = pb.ensure_grad();
      for (std::size_t m = 0; m < m_dim; ++m) {
        const double* grow = gy + m * n_dim;
        for (std::size_t k = 0; k < k_dim; ++k) {
          const double s = pa.data[m * k_dim + k];
          double* gbrow = gb.data() + k * n_dim;
          for (std::size_t n = 0; n < n_dim; ++n) gbrow[n] += s * grow[n];
        }
      }
    }
  });
}

/// Zero-padded, stride-1 convolution over the time axis.
/// x: [B, T, Cin] (or [T, Cin]), weight: [K, Cin, Cout] with K odd.
/// Output has the input's temporal length.
inline Tensor conv1d_same(const Tensor& x, const Tensor& weight) {
  if (weight.rank() != 3) throw DimensionError("conv1d_same: weight must be [K, Cin, Cout], got " + shape_str(weight.shape()));
  if (x.rank() != 2 && x.rank() != 3) throw DimensionError("conv1d_same: input must be [B, T, C] or [T, C], got " + shape_str(x.shape()));
  const std::size_t kernel = weight.dim(0), c_in = weight.dim(1), c_out = weight.dim(2);
  if (kernel % 2 == 0) throw DimensionError("conv1d_same: kernel size must be odd, got " + std::to_string(kernel));
  if (x.shape().back() != c_in) {
    throw DimensionError("conv1d_same: input channels " + std::to_string(x.shape().back()) +
                         " do not match weight " + shape_str(weight.shape()));
  }
  const std::size_t batch = x.rank() == 3 ? x.dim(0) : 1;
  const std::size_t steps = x.rank() == 3 ? x.dim(1) : x.dim(0);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(kernel / 2);
  Shape out_shape = x.shape();
  out_shape.back() = c_out;
  std::vector<double> out(batch * steps * c_out, 0.0);
  const double* xv = x.values().data();
  const double* wv = weight.values().data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < steps; ++t) {
      double* orow = out.data() + (b * steps + t) * c_out;
      for (std::size_t k = 0; k < kernel; ++k) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(k) - pad;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) continue;
        const double* xrow = xv + (b * steps + static_cast<std::size_t>(src)) * c_in;
        const double* wk = wv + k * c_in * c_out;
        for (std::size_t c = 0; c < c_in; ++c) {
          const double s = xrow[c];
          const double* wrow = wk + c * c_out;
          for (std::size_t o = 0; o < c_out; ++o) orow[o] += s * wrow[o];
        }
      }
    }
  }
  return detail::make_result("conv1d_same", std::move(out_shape), std::move(out), {x, weight},
                             [=](detail::TensorImpl& self) {
    detail::TensorImpl &px = *self.parents[0], &pw = *self.parents[1];
    std::vector<double>* gx = px.requires_grad ? &px.ensure_grad() : nullptr;
    std::vector<double>* gw = pw.requires_grad ? &pw.ensure_grad() : nullptr;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < steps; ++t) {
        const double* grow = self.grad.data() + (b * steps + t) * c_out;
        for (std::size_t k = 0; k < kernel; ++k) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(k) - pad;
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) continue;
          const std::size_t xoff = (b * steps + static_cast<std::size_t>(src)) * c_in;
          const std::size_t woff = k * c_in * c_out;
          for (std::size_t c = 0; c < c_in; ++c) {
            const double* wrow = pw.data.data() + woff + c * c_out;
            if (gx) {
              double acc = 0.0;
              for (std::size_t o = 0; o < c_out; ++o) acc += grow[o] * wrow[o];
              (*gx)[xoff + c] += acc;
            }
            if (gw) {
              const double s = px.data[xoff + c];
              double* gwrow = gw->data() + woff + c * c_out;
              for (std::size_t o = 0; o < c_out; ++o) gwrow[o] += s * grow[o];
            }
          }
        }
      }
    }
  });
}

/// Concatenates along `axis`; all other extents must agree.
inline Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw DimensionError("concat: axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) throw DimensionError("concat: incompatible shapes " + shape_str(first) + " and " + shape_str(s));
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  std::vector<std::size_t> chunk;
  for (const Tensor& p : parts) chunk.push_back(p.dim(axis) * inner);
  const std::size_t row = out_shape[axis] * inner;
  std::vector<double> out(outer * row);
  std::size_t offset = 0;
  for (std::size_t j = 0; j < parts.size(); ++j) {
    const auto& v = parts[j].values();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(o * chunk[j]), chunk[j],
                  out.begin() + static_cast<std::ptrdiff_t>(o * row + offset));
    }
    offset += chunk[j];
  }
  return detail::make_result("concat", std::move(out_shape), std::move(out), parts,
                             [outer, row, chunk](detail::TensorImpl& self) {
    std::size_t off = 0;
    for (std::size_t j = 0; j < self.parents.size(); ++j) {
      detail::TensorImpl& p = *self.parents[j];
      if (p.requires_grad) {
        auto& g = p.ensure_grad();
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t i = 0; i < chunk[j]; ++i) g[o * chunk[j] + i] += self.grad[o * row + off + i];
        }
      }
      off += chunk[j];
    }
  });
}

/// Takes [begin, end) along `axis`.
inline Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = x.shape();
  if (axis >= s.size() || begin >= end || end > s[axis]) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid on axis " + std::to_string(axis) + " of " + shape_str(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t in_row = s[axis] * inner, out_row = (end - begin) * inner, skip = begin * inner;
  Shape out_shape = s;
  out_shape[axis] = end - begin;
  std::vector<double> out(outer * out_row);
  const auto& v = x.values();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(o * in_row + skip), out_row,
                out.begin() + static_cast<std::ptrdiff_t>(o * out_row));
  }
  return detail::make_result("slice", std::move(out_shape), std::move(out), {x},
                             [outer, in_row, out_row, skip](detail::TensorImpl& self) {
    detail::TensorImpl& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < out_row; ++i) g[o * in_row + skip + i] += self.grad[o * out_row + i];
    }
  });
}

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (numel_of(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape) + " changes element count");
  }
  return detail::make_result("reshape", std::move(shape), x.values(), {x}, [](detail::TensorImpl& self) {
    detail::TensorImpl& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

inline Tensor relu(const Tensor& x) {
  return detail::unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
                       [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

/// Exact (erf-based) GELU.
inline Tensor gelu(const Tensor& x) {
  return detail::unary(
      "gelu", x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); },
      [](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
        const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + v * pdf;
      });
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary(
      "sigmoid", x,
      [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor exp(const Tensor& x) {
  return detail::unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

/// Clamps into [lo, hi]; gradient is zero outside the interval.
inline Tensor clamp(const Tensor& x, double lo, double hi) {
  return detail::unary("clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
                       [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

inline Tensor softmax_lastdim(const Tensor& x) {
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.numel() / width;
  const auto& v = x.values();
  std::vector<double> out(v.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = v.data() + r * width;
    double* o = out.data() + r * width;
    const double peak = *std::max_element(in, in + width);
    double total = 0.0;
    for (std::size_t i = 0; i < width; ++i) total += (o[i] = std::exp(in[i] - peak));
    for (std::size_t i = 0; i < width; ++i) o[i] /= total;
  }
  return detail::make_result("softmax_lastdim", x.shape(), std::move(out), {x},
                             [rows, width](detail::TensorImpl& self) {
    detail::TensorImpl& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.data.data() + r * width;
      const double* gy = self.grad.data() + r * width;
      double dot = 0.0;
      for (std::size_t i = 0; i < width; ++i) dot += gy[i] * y[i];
      for (std::size_t i = 0; i < width; ++i) g[r * width + i] += y[i] * (gy[i] - dot);
    }
  });
}

/// Normalizes each last-axis row to zero mean and unit variance (no affine).
inline Tensor layer_norm(const Tensor& x, double eps = 1e-5) {
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.numel() / width;
  const auto& v = x.values();
  std::vector<double> out(v.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = v.data() + r * width;
    double mean = 0.0;
    for (std::size_t i = 0; i < width; ++i) mean += in[i];
    mean /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t i = 0; i < width; ++i) var += (in[i] - mean) * (in[i] - mean);
    var /= static_cast<double>(width);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < width; ++i) out[r * width + i] = (in[i] - mean) * inv_std[r];
  }
  return detail::make_result("layer_norm", x.shape(), std::move(out), {x},
                             [rows, width, inv_std](detail::TensorImpl& self) {
    detail::TensorImpl& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    const double n = static_cast<double>(width);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.data.data() + r * width;
      const double* gy = self.grad.data() + r * width;
      double mean_g = 0.0, mean_gy = 0.0;
      for (std::size_t i = 0; i < width; ++i) {
        mean_g += gy[i];
        mean_gy += gy[i] * y[i];
      }
      mean_g /= n;
      mean_gy /= n;
      for (std::size_t i = 0; i < width; ++i) {
        g[r * width + i] += inv_std[r] * (gy[i] - mean_g - y[i] * mean_gy);
      }
    }
  });
}

/// Sum of all elements, shape [1].
inline Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  return detail::make_result("sum", {1}, {total}, {x}, [](detail::TensorImpl& self) {
    detail::TensorImpl& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (double& gi : g) gi += self.grad[0];
  });
}

/// Mean of all elements, shape [1].
inline Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

enum class PrimitiveKind {
  Matmul,
  Conv1dSame,
  Add,
  Mul,
  Concat,
  Relu,
  Gelu,
  SoftmaxLastdim,
  LayerNorm,
  Mean,
  Sum,
};

inline const char* to_string(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::Matmul: return "matmul";
    case PrimitiveKind::Conv1dSame: return "conv1d_same";
    case PrimitiveKind::Add: return "add";
    case PrimitiveKind::Mul: return "mul";
    case PrimitiveKind::Concat: return "concat";
    case PrimitiveKind::Relu: return "relu";
    case PrimitiveKind::Gelu: return "gelu";
    case PrimitiveKind::SoftmaxLastdim: return "softmax_lastdim";
    case PrimitiveKind::LayerNorm: return "layer_norm";
    case PrimitiveKind::Mean: return "mean";
    case PrimitiveKind::Sum: return "sum";
  }
  return "unknown";
}

inline constexpr PrimitiveKind kAllPrimitives[] = {
    PrimitiveKind::Matmul, PrimitiveKind::Conv1dSame, PrimitiveKind::Add,
    PrimitiveKind::Mul,    PrimitiveKind::Concat,     PrimitiveKind::Relu,
    PrimitiveKind::Gelu,   PrimitiveKind::SoftmaxLastdim, PrimitiveKind::LayerNorm,
    PrimitiveKind::Mean,   PrimitiveKind::Sum,
};

/// Uniform dispatch over the primitive set. Concat joins along the last axis.
inline Tensor apply_primitive(PrimitiveKind kind, const std::vector<Tensor>& inputs) {
  auto need = [&](std::size_t n) {
    if (inputs.size() != n) {
      throw DimensionError(std::string(to_string(kind)) + ": expected " + std::to_string(n) + " inputs, got " +
                           std::to_string(inputs.size()));
    }
  };
  switch (kind) {
    case PrimitiveKind::Matmul: need(2); return matmul(inputs[0], inputs[1]);
    case PrimitiveKind::Conv1dSame: need(2); return conv1d_same(inputs[0], inputs[1]);
    case PrimitiveKind::Add: need(2); return add(inputs[0], inputs[1]);
    case PrimitiveKind::Mul: need(2); return mul(inputs[0], inputs[1]);
    case PrimitiveKind::Concat:
      if (inputs.empty()) throw DimensionError("concat: no inputs");
      return concat(inputs, inputs[0].rank() - 1);
    case PrimitiveKind::Relu: need(1); return relu(inputs[0]);
    case PrimitiveKind::Gelu: need(1); return gelu(inputs[0]);
    case PrimitiveKind::SoftmaxLastdim: need(1); return softmax_lastdim(inputs[0]);
    case PrimitiveKind::LayerNorm: need(1); return layer_norm(inputs[0]);
    case PrimitiveKind::Mean: need(1); return mean(inputs[0]);
    case PrimitiveKind::Sum: need(1); return sum(inputs[0]);
  }
  throw PreconditionError("unknown primitive");
}

}  // namespace clad
