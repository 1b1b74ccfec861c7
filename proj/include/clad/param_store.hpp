#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "clad/tensor.hpp"

namespace clad {

struct AdamMoments {
  std::vector<double> first;
  std::vector<double> second;
};

/// Named parameters plus the AdamW state that belongs to them.
class ParamStore {
 public:
  using Map = std::map<std::string, Tensor>;

  Tensor& add(const std::string& name, Tensor value) {
    if (params_.count(name)) throw StateError("duplicate parameter name '" + name + "'");
    value.set_requires_grad(true);
    return params_.emplace(name, std::move(value)).first->second;
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  const Tensor& get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw StateError("no parameter named '" + name + "'");
    return it->second;
  }

  std::size_t size() const { return params_.size(); }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_) n += t.numel();
    return n;
  }
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

  void zero_grads() {
    for (auto& [name, t] : params_) t.zero_grad();
  }

  void set_requires_grad(bool flag) {
    for (auto& [name, t] : params_) t.set_requires_grad(flag);
  }

  /// Replaces values in place, keeping the handles other code may hold.
  void assign(const std::string& name, std::span<const double> values, const Shape& shape) {
    const Tensor& t = get(name);
    if (t.shape() != shape) {
      throw DimensionError("parameter '" + name + "' has shape " + shape_str(t.shape()) + ", checkpoint has " +
                           shape_str(shape));
    }
    auto dst = Tensor(t).mutable_data();
    std::copy(values.begin(), values.end(), dst.begin());
  }

  /// FNV-1a over names, shapes and raw value bits.
  std::uint64_t checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* bytes, std::size_t n) {
      const auto* p = static_cast<const unsigned char*>(bytes);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
      }
    };
    for (const auto& [name, t] : params_) {
      feed(name.data(), name.size());
      for (std::size_t e : t.shape()) feed(&e, sizeof e);
      feed(t.values().data(), t.numel() * sizeof(double));
    }
    return h;
  }

  std::uint64_t step() const { return step_; }
  std::map<std::string, AdamMoments>& moments() { return moments_; }

  friend void adamw_step(ParamStore&, double, double, std::pair<double, double>, double);

 private:
  Map params_;
  std::map<std::string, AdamMoments> moments_;
  std::uint64_t step_ = 0;
};

/// One AdamW update (decoupled weight decay). Gradients are read, not
/// cleared; the caller zeroes them before the next backward pass.
inline void adamw_step(ParamStore& store, double lr, double weight_decay,
                       std::pair<double, double> betas = {0.9, 0.999}, double eps = 1e-8) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw PreconditionError("adamw_step: learning rate must be non-negative");
  for (const auto& [name, t] : store.params_) {
    if (!t.has_grad()) throw StateError("adamw_step: parameter '" + name + "' has no gradient");
  }
  const auto [beta1, beta2] = betas;
  ++store.step_;
  const double t = static_cast<double>(store.step_);
  const double correction1 = 1.0 - std::pow(beta1, t);
  const double correction2 = 1.0 - std::pow(beta2, t);
  for (auto& [name, param] : store.params_) {
    AdamMoments& state = store.moments_[name];
    const std::size_t n = param.numel();
    if (state.first.size() != n) {
      state.first.assign(n, 0.0);
      state.second.assign(n, 0.0);
    }
    auto values = param.mutable_data();
    auto grad = param.grad();
    for (std::size_t i = 0; i < n; ++i) {
      const double g = grad[i];
      state.first[i] = beta1 * state.first[i] + (1.0 - beta1) * g;
      state.second[i] = beta2 * state.second[i] + (1.0 - beta2) * g * g;
      const double m_hat = state.first[i] / correction1;
      const double v_hat = state.second[i] / correction2;
      values[i] -= lr * (m_hat / (std::sqrt(v_hat) + eps) + weight_decay * values[i]);
    }
  }
}

}  // namespace clad
