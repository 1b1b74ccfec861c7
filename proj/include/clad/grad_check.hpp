#pragma once

#include <cmath>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "clad/param_store.hpp"
#include "clad/rng.hpp"
#include "clad/tensor.hpp"

namespace clad {

namespace detail {

inline bool bitwise_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

}  // namespace detail

/// Compares backward() against central differences at every coordinate of
/// `point`. Returns max |a - n| / max(1, |a|).
inline double grad_check(const std::function<Tensor(const Tensor&)>& fn, const Tensor& point, double eps = 1e-6) {
  if (!(eps > 0.0 && eps <= 1e-2)) throw PreconditionError("grad_check: eps must lie in (0, 1e-2]");

  Tensor x = point.detach();
  x.set_requires_grad(true);
  const Tensor loss = fn(x);
  if (loss.numel() != 1) throw PreconditionError("grad_check: function must be scalar-valued");
  {
    NoGradGuard no_grad;
    const double probe = fn(x).item();
    if (!detail::bitwise_equal(probe, loss.item())) {
      throw PreconditionError("grad_check: function is not deterministic across probe calls");
    }
  }
  backward(loss);
  const std::vector<double> analytic(x.grad().begin(), x.grad().end());

  NoGradGuard no_grad;
  auto values = x.mutable_data();
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + eps;
    const double up = fn(x).item();
    values[i] = saved - eps;
    const double down = fn(x).item();
    values[i] = saved;
    worst = std::max(worst, detail::relative_error(analytic[i], (up - down) / (2.0 * eps)));
  }
  return worst;
}

struct ParamCheckOptions {
  double eps = 1e-6;
  /// Coordinates probed per tensor; tensors at or below this size are checked
  /// exhaustively, larger ones on a seeded random subset.
  std::size_t max_coords_per_tensor = 24;
  std::uint64_t seed = 0;
};

struct ParamCheckResult {
  double max_error = 0.0;
  std::string worst_parameter;
  std::size_t coordinates_checked = 0;
};

/// Gradient check of a scalar loss w.r.t. every parameter in `store`.
/// `fn` must rebuild the loss from current parameter values on each call.
inline ParamCheckResult grad_check_params(const std::function<Tensor()>& fn, ParamStore& store,
                                          ParamCheckOptions options = {}) {
  if (!(options.eps > 0.0 && options.eps <= 1e-2)) throw PreconditionError("grad_check: eps must lie in (0, 1e-2]");
  store.zero_grads();
  const Tensor loss = fn();
  if (loss.numel() != 1) throw PreconditionError("grad_check: function must be scalar-valued");
  {
    NoGradGuard no_grad;
    if (!detail::bitwise_equal(fn().item(), loss.item())) {
      throw PreconditionError("grad_check: function is not deterministic across probe calls");
    }
  }
  backward(loss);

  NoGradGuard no_grad;
  Rng rng(options.seed);
  ParamCheckResult result;
  for (const auto& [name, param] : store) {
    Tensor handle = param;
    const std::vector<double> analytic(handle.grad().begin(), handle.grad().end());
    auto values = handle.mutable_data();
    std::vector<std::size_t> coords;
    if (values.size() <= options.max_coords_per_tensor) {
      for (std::size_t i = 0; i < values.size(); ++i) coords.push_back(i);
    } else {
      for (std::size_t i = 0; i < options.max_coords_per_tensor; ++i) coords.push_back(rng.uniform_int(values.size()));
    }
    for (std::size_t i : coords) {
      const double saved = values[i];
      values[i] = saved + options.eps;
      const double up = fn().item();
      values[i] = saved - options.eps;
      const double down = fn().item();
      values[i] = saved;
      const double err = detail::relative_error(analytic[i], (up - down) / (2.0 * options.eps));
      if (err > result.max_error) {
        result.max_error = err;
        result.worst_parameter = name;
      }
      ++result.coordinates_checked;
    }
  }
  return result;
}

}  // namespace clad
