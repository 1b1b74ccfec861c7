#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "clad/nn.hpp"
#include "clad/vae.hpp"

namespace clad {

inline constexpr std::size_t kTimestepDim = 64;

/// Sinusoidal features of diffusion step n (1 <= n <= total_steps).
inline std::vector<double> timestep_embedding(std::size_t n, std::size_t total_steps, std::size_t dim = kTimestepDim) {
  if (n < 1 || n > total_steps) {
    throw PreconditionError("timestep_embedding: step " + std::to_string(n) + " outside [1, " +
                            std::to_string(total_steps) + "]");
  }
  const std::size_t half = dim / 2;
  std::vector<double> out(dim, 0.0);
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
    out[i] = std::sin(static_cast<double>(n) * freq);
    out[half + i] = std::cos(static_cast<double>(n) * freq);
  }
  return out;
}

struct DenoiserConfig {
  std::size_t feature_dim = 0;  // D = C + A + d_o
  std::size_t total_steps = 200;
  std::size_t kernel = 3;
  std::size_t hidden = 64;
  std::size_t bottleneck = 128;
  std::size_t latent = 2;

  /// Width of the fusion input [z_s, eps_s, z_g, eps_g].
  std::size_t fusion_input() const { return 4 * latent; }
};

/// Fused constraint code z_c, one row per batch item: [B, bottleneck].
struct ConstraintCode {
  Tensor z_c;
};

/// Temporal U-Net predicting x0 from x_n.
///
///   enc1: conv D -> 64, enc2: conv 64 -> 128
///   bottleneck: conv 128 -> 128 on (enc2 + time embedding + z_c)
///   dec2: conv [bottleneck, enc2] -> 64, dec1: conv [dec2, enc1] -> 64
///   out: 1x1 conv 64 -> D
///
/// All stages keep full temporal resolution. The time embedding and z_c are
/// broadcast over the time axis and added to the bottleneck block's input.
class Denoiser {
 public:
  Denoiser() = default;
  Denoiser(DenoiserConfig config, std::uint64_t seed) : config_(config) {
    if (config.feature_dim == 0) throw PreconditionError("denoiser: feature_dim must be positive");
    Rng rng(derive_seed(seed, 0xDE));
    const std::size_t k = config.kernel, d = config.feature_dim, h = config.hidden, b = config.bottleneck;
    nn::add_linear(params_, "denoiser.time.fc1", kTimestepDim, b, rng);
    nn::add_linear(params_, "denoiser.time.fc2", b, b, rng);
    nn::add_linear(params_, "denoiser.fusion", config.fusion_input(), b, rng);
    nn::add_conv1d(params_, "denoiser.enc1", k, d, h, rng);
    nn::add_conv1d(params_, "denoiser.enc2", k, h, b, rng);
    nn::add_conv1d(params_, "denoiser.mid", k, b, b, rng);
    nn::add_conv1d(params_, "denoiser.dec2", k, 2 * b, h, rng);
    nn::add_conv1d(params_, "denoiser.dec1", k, 2 * h, h, rng);
    nn::add_conv1d(params_, "denoiser.out", 1, h, d, rng);
  }

  const DenoiserConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// z_c = f(z_s ++ eps_s ++ z_g ++ eps_g). Without use_eps both eps slots are zero.
  ConstraintCode fuse(const std::vector<std::pair<LatentCode, LatentCode>>& codes, bool use_eps) const {
    const std::size_t width = config_.fusion_input();
    std::vector<double> input;
    input.reserve(codes.size() * width);
    for (const auto& [start, goal] : codes) {
      for (const LatentCode* code : {&start, &goal}) {
        if (code->z.size() != config_.latent || code->eps.size() != config_.latent) {
          throw DimensionError("fuse_constraints: latent codes must have dim " + std::to_string(config_.latent));
        }
        input.insert(input.end(), code->z.begin(), code->z.end());
        if (use_eps) {
          input.insert(input.end(), code->eps.begin(), code->eps.end());
        } else {
          input.insert(input.end(), config_.latent, 0.0);
        }
      }
    }
    if (codes.empty()) throw DimensionError("fuse_constraints: empty batch");
    return {nn::linear(params_, "denoiser.fusion", Tensor({codes.size(), width}, std::move(input)))};
  }

  /// x_n: [B, T, D]; steps: one n per batch item; z_c: [B, bottleneck] or
  /// nullptr for the constraint-free network.
  Tensor forward(const Tensor& x_n, const std::vector<std::size_t>& steps, const Tensor* z_c) const {
    if (x_n.rank() != 3 || x_n.dim(2) != config_.feature_dim) {
      throw DimensionError("denoiser: expected [B, T, " + std::to_string(config_.feature_dim) + "], got " +
                           shape_str(x_n.shape()));
    }
    const std::size_t batch = x_n.dim(0), b = config_.bottleneck;
    if (steps.size() != batch) throw DimensionError("denoiser: need one diffusion step per batch item");

    std::vector<double> sinus;
    sinus.reserve(batch * kTimestepDim);
    for (std::size_t n : steps) {
      auto e = timestep_embedding(n, config_.total_steps);
      sinus.insert(sinus.end(), e.begin(), e.end());
    }
    Tensor t_emb = Tensor({batch, kTimestepDim}, std::move(sinus));
    t_emb = nn::linear(params_, "denoiser.time.fc2", gelu(nn::linear(params_, "denoiser.time.fc1", t_emb)));

    const Tensor h1 = gelu(nn::conv1d(params_, "denoiser.enc1", x_n));
    const Tensor h2 = gelu(nn::conv1d(params_, "denoiser.enc2", h1));
    Tensor mid_in = add(h2, reshape(t_emb, {batch, 1, b}));
    if (z_c) {
      if (z_c->shape() != Shape{batch, b}) {
        throw DimensionError("denoiser: z_c must be [" + std::to_string(batch) + ", " + std::to_string(b) + "], got " +
                             shape_str(z_c->shape()));
      }
      mid_in = add(mid_in, reshape(*z_c, {batch, 1, b}));
    }
    const Tensor mid = gelu(nn::conv1d(params_, "denoiser.mid", mid_in));
    const Tensor d2 = gelu(nn::conv1d(params_, "denoiser.dec2", concat({mid, h2}, 2)));
    const Tensor d1 = gelu(nn::conv1d(params_, "denoiser.dec1", concat({d2, h1}, 2)));
    return nn::conv1d(params_, "denoiser.out", d1);
  }

  /// Architecture record stored next to the weights for load-time validation.
  std::vector<double> arch_record() const {
    return {static_cast<double>(config_.feature_dim), static_cast<double>(config_.total_steps),
            static_cast<double>(config_.kernel),      static_cast<double>(config_.hidden),
            static_cast<double>(config_.bottleneck),  static_cast<double>(config_.latent)};
  }

 private:
  DenoiserConfig config_;
  ParamStore params_;
};

}  // namespace clad
