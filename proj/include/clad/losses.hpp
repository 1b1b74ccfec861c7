#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "clad/tensor.hpp"

namespace clad {

namespace detail {

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

inline std::size_t leading_rows(const Tensor& x) { return x.numel() / x.shape().back(); }

}  // namespace detail

/// Mean squared error over all elements.
inline Tensor mse(const Tensor& pred, const Tensor& target) {
  detail::require_same_shape("mse", pred, target);
  const auto &p = pred.values(), &t = target.values();
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += (p[i] - t[i]) * (p[i] - t[i]);
  const double n = static_cast<double>(p.size());
  return detail::make_result("mse", {1}, {total / n}, {pred, target}, [n](detail::TensorImpl& self) {
    detail::TensorImpl &pp = *self.parents[0], &pt = *self.parents[1];
    const double g = self.grad[0] * 2.0 / n;
    if (pp.requires_grad) {
      auto& gp = pp.ensure_grad();
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g * (pp.data[i] - pt.data[i]);
    }
    if (pt.requires_grad) {
      auto& gt = pt.ensure_grad();
      for (std::size_t i = 0; i < gt.size(); ++i) gt[i] -= g * (pp.data[i] - pt.data[i]);
    }
  });
}

/// Binary cross entropy on logits, summed over the last axis and averaged
/// over leading rows. Targets must lie in [0, 1].
inline Tensor bce_with_logits(const Tensor& logits, const Tensor& target) {
  detail::require_same_shape("bce_with_logits", logits, target);
  const auto &l = logits.values(), &t = target.values();
  for (double v : t) {
    if (!(v >= 0.0 && v <= 1.0)) throw PreconditionError("bce_with_logits: target outside [0, 1]");
  }
  const double rows = static_cast<double>(detail::leading_rows(logits));
  double total = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    total += std::max(l[i], 0.0) - l[i] * t[i] + std::log1p(std::exp(-std::abs(l[i])));
  }
  return detail::make_result("bce_with_logits", {1}, {total / rows}, {logits, target},
                             [rows](detail::TensorImpl& self) {
    detail::TensorImpl &pl = *self.parents[0], &pt = *self.parents[1];
    const double g = self.grad[0] / rows;
    if (pl.requires_grad) {
      auto& gl = pl.ensure_grad();
      for (std::size_t i = 0; i < gl.size(); ++i) {
        const double v = pl.data[i];
        const double sig = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        gl[i] += g * (sig - pt.data[i]);
      }
    }
    if (pt.requires_grad) {
      auto& gt = pt.ensure_grad();
      for (std::size_t i = 0; i < gt.size(); ++i) gt[i] -= g * pl.data[i];
    }
  });
}

/// Softmax cross entropy over the last axis, averaged over rows.
inline Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
  const std::size_t classes = logits.shape().back();
  const std::size_t rows = detail::leading_rows(logits);
  if (labels.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(rows) + " rows");
  }
  for (std::size_t label : labels) {
    if (label >= classes) {
      throw LabelError("cross_entropy: label " + std::to_string(label) + " out of range [0, " + std::to_string(classes) + ")");
    }
  }
  const auto& l = logits.values();
  std::vector<double> probs(l.size());
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = l.data() + r * classes;
    double* pr = probs.data() + r * classes;
    const double peak = *std::max_element(in, in + classes);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += (pr[c] = std::exp(in[c] - peak));
    for (std::size_t c = 0; c < classes; ++c) pr[c] /= z;
    total += peak + std::log(z) - in[labels[r]];
  }
  const double n = static_cast<double>(rows);
  return detail::make_result("cross_entropy", {1}, {total / n}, {logits},
                             [probs = std::move(probs), labels, classes, n](detail::TensorImpl& self) {
    detail::TensorImpl& pl = *self.parents[0];
    if (!pl.requires_grad) return;
    auto& g = pl.ensure_grad();
    const double scale_by = self.grad[0] / n;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale_by * probs[i];
    for (std::size_t r = 0; r < labels.size(); ++r) g[r * classes + labels[r]] -= scale_by;
  });
}

/// KL(N(mu, exp(logvar)) || N(0, I)), summed over the last axis and averaged
/// over leading rows.
inline Tensor gaussian_kl_to_std_normal(const Tensor& mu, const Tensor& logvar) {
  detail::require_same_shape("gaussian_kl_to_std_normal", mu, logvar);
  const auto &m = mu.values(), &lv = logvar.values();
  const double rows = static_cast<double>(detail::leading_rows(mu));
  double total = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) total += 0.5 * (m[i] * m[i] + std::exp(lv[i]) - 1.0 - lv[i]);
  return detail::make_result("gaussian_kl_to_std_normal", {1}, {total / rows}, {mu, logvar},
                             [rows](detail::TensorImpl& self) {
    detail::TensorImpl &pm = *self.parents[0], &pv = *self.parents[1];
    const double g = self.grad[0] / rows;
    if (pm.requires_grad) {
      auto& gm = pm.ensure_grad();
      for (std::size_t i = 0; i < gm.size(); ++i) gm[i] += g * pm.data[i];
    }
    if (pv.requires_grad) {
      auto& gv = pv.ensure_grad();
      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += g * 0.5 * (std::exp(pv.data[i]) - 1.0);
    }
  });
}

enum class LossKind { Mse, BceWithLogits, CrossEntropy, GaussianKl };

inline const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Mse: return "mse";
    case LossKind::BceWithLogits: return "bce_with_logits";
    case LossKind::CrossEntropy: return "cross_entropy";
    case LossKind::GaussianKl: return "gaussian_kl_to_std_normal";
  }
  return "unknown";
}

/// Uniform dispatch. For CrossEntropy `target` carries one integer label per
/// row; for GaussianKl `pred` is mu and `target` is log-variance.
inline Tensor apply_loss(LossKind kind, const Tensor& pred, const Tensor& target) {
  switch (kind) {
    case LossKind::Mse: return mse(pred, target);
    case LossKind::BceWithLogits: return bce_with_logits(pred, target);
    case LossKind::GaussianKl: return gaussian_kl_to_std_normal(pred, target);
    case LossKind::CrossEntropy: {
      std::vector<std::size_t> labels;
      for (double v : target.values()) {
        if (v < 0.0 || v != std::floor(v)) throw LabelError("cross_entropy: label must be a non-negative integer");
        labels.push_back(static_cast<std::size_t>(v));
      }
      return cross_entropy(pred, labels);
    }
  }
  throw PreconditionError("unknown loss kind");
}

}  // namespace clad
