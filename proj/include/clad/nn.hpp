#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "clad/ops.hpp"
#include "clad/param_store.hpp"
#include "clad/rng.hpp"

namespace clad::nn {

inline Tensor uniform_tensor(const Shape& shape, double bound, Rng& rng) {
  std::vector<double> values(numel_of(shape));
  for (double& v : values) v = rng.uniform(-bound, bound);
  return Tensor(shape, std::move(values));
}

/// Registers `<prefix>.weight` [in, out] and `<prefix>.bias` [out].
inline void add_linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  store.add(prefix + ".weight", uniform_tensor({in, out}, bound, rng));
  store.add(prefix + ".bias", Tensor::zeros({out}));
}

inline Tensor linear(const ParamStore& store, const std::string& prefix, const Tensor& x) {
  return add(matmul(x, store.get(prefix + ".weight")), store.get(prefix + ".bias"));
}

/// Registers `<prefix>.weight` [kernel, in, out] and `<prefix>.bias` [out].
inline void add_conv1d(ParamStore& store, const std::string& prefix, std::size_t kernel, std::size_t in,
                       std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in * kernel));
  store.add(prefix + ".weight", uniform_tensor({kernel, in, out}, bound, rng));
  store.add(prefix + ".bias", Tensor::zeros({out}));
}

inline Tensor conv1d(const ParamStore& store, const std::string& prefix, const Tensor& x) {
  return add(conv1d_same(x, store.get(prefix + ".weight")), store.get(prefix + ".bias"));
}

/// Sets every parameter under the store to zero (test helper for affine identities).
inline void zero_all(ParamStore& store) {
  for (const auto& [name, t] : store) {
    Tensor handle = t;
    for (double& v : handle.mutable_data()) v = 0.0;
  }
}

}  // namespace clad::nn
