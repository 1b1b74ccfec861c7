#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "clad/dataset.hpp"
#include "clad/losses.hpp"
#include "clad/nn.hpp"

namespace clad {

/// Reparameterized latent draw; z = mu + exp(logvar / 2) * eps.
struct LatentCode {
  std::vector<double> mu;
  std::vector<double> logvar;
  std::vector<double> z;
  std::vector<double> eps;
};

/// Builds a LatentCode. Draws eps from `rng` when `eps` is not supplied.
/// logvar is used as given (the encoder clamps it), so logvar = -inf gives z = mu.
inline LatentCode reparameterize(std::vector<double> mu, std::vector<double> logvar,
                                 std::optional<std::vector<double>> eps, Rng* rng = nullptr) {
  if (mu.size() != logvar.size()) throw DimensionError("reparameterize: mu/logvar size mismatch");
  LatentCode code;
  if (eps) {
    if (eps->size() != mu.size()) throw DimensionError("reparameterize: eps size mismatch");
    code.eps = std::move(*eps);
  } else {
    if (!rng) throw PreconditionError("reparameterize: no eps and no random source");
    code.eps.resize(mu.size());
    for (double& e : code.eps) e = rng->normal();
  }
  code.z.resize(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) code.z[i] = mu[i] + std::exp(0.5 * logvar[i]) * code.eps[i];
  code.mu = std::move(mu);
  code.logvar = std::move(logvar);
  return code;
}

struct VaeConfig {
  std::size_t input_dim = 48;
  std::size_t hidden = 512;
  std::size_t latent = 2;
  double logvar_min = -10.0;
  double logvar_max = 10.0;
};

struct VaeLoss {
  double recon_bce = 0.0;
  double kl = 0.0;
  double total() const { return recon_bce + kl; }
};

/// Fully connected VAE over (observation ++ language) state vectors.
///   encoder: input -> hidden (GELU) -> {mu, logvar} (latent each)
///   decoder: latent -> hidden (GELU) -> input logits, sigmoid output
class Vae {
 public:
  Vae() = default;
  Vae(VaeConfig config, std::uint64_t seed) : config_(config) {
    Rng rng(derive_seed(seed, 0x7AE));
    nn::add_linear(params_, "vae.enc.hidden", config.input_dim, config.hidden, rng);
    nn::add_linear(params_, "vae.enc.mu", config.hidden, config.latent, rng);
    nn::add_linear(params_, "vae.enc.logvar", config.hidden, config.latent, rng);
    nn::add_linear(params_, "vae.dec.hidden", config.latent, config.hidden, rng);
    nn::add_linear(params_, "vae.dec.out", config.hidden, config.input_dim, rng);
  }

  const VaeConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  struct Encoding {
    Tensor mu;
    Tensor logvar;
  };

  /// x: [B, input_dim] or [input_dim].
  Encoding encode(const Tensor& x) const {
    if (x.shape().back() != config_.input_dim) {
      throw DimensionError("vae encode: expected input dim " + std::to_string(config_.input_dim) + ", got " +
                           shape_str(x.shape()));
    }
    const Tensor h = gelu(nn::linear(params_, "vae.enc.hidden", x));
    return {nn::linear(params_, "vae.enc.mu", h),
            clamp(nn::linear(params_, "vae.enc.logvar", h), config_.logvar_min, config_.logvar_max)};
  }

  Tensor decode_logits(const Tensor& z) const {
    if (z.shape().back() != config_.latent) throw DimensionError("vae decode: latent dim mismatch " + shape_str(z.shape()));
    return nn::linear(params_, "vae.dec.out", gelu(nn::linear(params_, "vae.dec.hidden", z)));
  }

  /// Reconstruction in (0, 1).
  Tensor decode(const Tensor& z) const { return sigmoid(decode_logits(z)); }

  /// L = BCE(recon, x) + KL(q(z|x) || N(0, I)); one AdamW step.
  VaeLoss train_step(const Tensor& batch, double lr, Rng& rng, double weight_decay = 0.0) {
    if (frozen_) throw StateError("vae: train_step on frozen parameters");
    for (double v : batch.values()) {
      if (!(v >= 0.0 && v <= 1.0)) throw PreconditionError("vae: training batch values must lie in [0, 1]");
    }
    auto [recon, kl] = loss(batch, rng);
    VaeLoss out{recon.item(), kl.item()};
    params_.zero_grads();
    backward(add(recon, kl));
    adamw_step(params_, lr, weight_decay);
    return out;
  }

  /// Loss terms as graph nodes, with fresh eps per row.
  std::pair<Tensor, Tensor> loss(const Tensor& batch, Rng& rng) const {
    const Encoding enc = encode(batch);
    std::vector<double> eps(enc.mu.numel());
    for (double& e : eps) e = rng.normal();
    const Tensor z = add(enc.mu, mul(exp(scale(enc.logvar, 0.5)), Tensor(enc.mu.shape(), std::move(eps))));
    return {bce_with_logits(decode_logits(z), batch), gaussian_kl_to_std_normal(enc.mu, enc.logvar)};
  }

  void freeze() {
    frozen_ = true;
    params_.set_requires_grad(false);
  }
  bool frozen() const { return frozen_; }

  /// x = o ++ N_e for the start and goal of `sample`.
  static std::vector<double> state_vector(const std::vector<double>& obs, const std::vector<double>& text) {
    std::vector<double> x(obs);
    x.insert(x.end(), text.begin(), text.end());
    return x;
  }

  /// Latent codes of several state vectors at once. eps for row i is drawn
  /// from Rng(seeds[i]) when use_eps, else zero.
  std::vector<LatentCode> encode_states(const std::vector<std::vector<double>>& states, bool use_eps,
                                        const std::vector<std::uint64_t>& seeds) const {
    if (!frozen_) throw StateError("vae: constraint encoding requires frozen parameters");
    if (states.empty()) return {};
    std::vector<double> flat;
    for (const auto& s : states) {
      if (s.size() != config_.input_dim) throw DimensionError("vae: state vector has wrong dimension");
      flat.insert(flat.end(), s.begin(), s.end());
    }
    NoGradGuard no_grad;
    const Encoding enc = encode(Tensor({states.size(), config_.input_dim}, std::move(flat)));
    const std::size_t latent = config_.latent;
    std::vector<LatentCode> out;
    for (std::size_t i = 0; i < states.size(); ++i) {
      std::vector<double> mu(enc.mu.values().begin() + static_cast<std::ptrdiff_t>(i * latent),
                             enc.mu.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * latent));
      std::vector<double> logvar(enc.logvar.values().begin() + static_cast<std::ptrdiff_t>(i * latent),
                                 enc.logvar.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * latent));
      std::vector<double> eps(latent, 0.0);
      if (use_eps) {
        Rng rng(seeds.at(i));
        for (double& e : eps) e = rng.normal();
      }
      out.push_back(reparameterize(std::move(mu), std::move(logvar), std::move(eps)));
    }
    return out;
  }

  /// (z_s, z_g) for one sample. With use_eps = false both eps are zero and z = mu.
  std::pair<LatentCode, LatentCode> encode_constraints(const Sample& sample, bool use_eps, std::uint64_t seed) const {
    auto codes = encode_states({state_vector(sample.obs_start, sample.text_start),
                                state_vector(sample.obs_goal, sample.text_goal)},
                               use_eps, {derive_seed(seed, 0xE5, 0), derive_seed(seed, 0xE5, 1)});
    return {std::move(codes[0]), std::move(codes[1])};
  }

 private:
  VaeConfig config_;
  ParamStore params_;
  bool frozen_ = false;
};

}  // namespace clad
