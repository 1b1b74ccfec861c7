#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "clad/classifier.hpp"
#include "clad/denoiser.hpp"
#include "clad/vae.hpp"

namespace clad {

/// Linear-beta DDPM schedule with cumulative products precomputed.
struct NoiseSchedule {
  std::vector<double> betas;       // index n-1 holds beta_n
  std::vector<double> alpha_bars;  // index n holds prod_{i<=n} (1 - beta_i); alpha_bars[0] = 1

  std::size_t steps() const { return betas.size(); }
  double beta(std::size_t n) const { return betas.at(n - 1); }
  double alpha(std::size_t n) const { return 1.0 - beta(n); }
  double alpha_bar(std::size_t n) const { return alpha_bars.at(n); }
};

inline NoiseSchedule schedule_from_betas(std::vector<double> betas) {
  if (betas.empty()) throw PreconditionError("noise schedule needs at least one step");
  NoiseSchedule s;
  s.alpha_bars.push_back(1.0);
  for (double b : betas) {
    if (!(b > 0.0 && b < 1.0)) throw PreconditionError("noise schedule: beta must lie in (0, 1)");
    s.alpha_bars.push_back(s.alpha_bars.back() * (1.0 - b));
  }
  s.betas = std::move(betas);
  return s;
}

inline NoiseSchedule make_schedule(std::size_t steps, double beta_start, double beta_end) {
  if (steps < 1) throw PreconditionError("make_schedule: need at least one step");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw PreconditionError("make_schedule: require 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    betas[i] = beta_start + (beta_end - beta_start) * frac;
  }
  return schedule_from_betas(std::move(betas));
}

/// Column layout of a diffusion state row: [task one-hot | action one-hot | observation].
struct StateLayout {
  std::size_t num_tasks = 0;
  std::size_t num_actions = 0;
  std::size_t obs_dim = 0;

  std::size_t width() const { return num_tasks + num_actions + obs_dim; }
  std::size_t action_begin() const { return num_tasks; }
  std::size_t obs_begin() const { return num_tasks + num_actions; }
};

/// [T x D] matrix, row-major.
struct DiffusionState {
  StateLayout layout;
  std::size_t horizon = 0;
  std::size_t step = 0;
  std::vector<double> values;

  double at(std::size_t t, std::size_t col) const { return values.at(t * layout.width() + col); }
  std::span<const double> row(std::size_t t) const {
    return std::span<const double>(values).subspan(t * layout.width(), layout.width());
  }
};

/// Writes the task block (every row) and observation block (o_s in the first
/// row, o_g in the last, zeros between) into a [T x D] buffer.
inline void impose_conditions(std::span<double> values, const StateLayout& layout, std::size_t horizon,
                              std::size_t task, const std::vector<double>& obs_start,
                              const std::vector<double>& obs_goal, double onehot_scale) {
  const std::size_t w = layout.width();
  if (task >= layout.num_tasks) throw LabelError("task label " + std::to_string(task) + " out of range");
  if (obs_start.size() != layout.obs_dim || obs_goal.size() != layout.obs_dim) {
    throw DimensionError("observation dim does not match state layout");
  }
  for (std::size_t t = 0; t < horizon; ++t) {
    double* row = values.data() + t * w;
    for (std::size_t c = 0; c < layout.num_tasks; ++c) row[c] = c == task ? onehot_scale : 0.0;
    const std::vector<double>* obs = t == 0 ? &obs_start : (t + 1 == horizon ? &obs_goal : nullptr);
    for (std::size_t d = 0; d < layout.obs_dim; ++d) row[layout.obs_begin() + d] = obs ? (*obs)[d] : 0.0;
  }
}

inline DiffusionState build_x0(const Sample& sample, std::size_t task_label, const StateLayout& layout,
                               double onehot_scale = 1.0) {
  const std::size_t horizon = sample.actions.size();
  if (horizon < 2) throw PreconditionError("build_x0: horizon must be at least 2");
  DiffusionState x;
  x.layout = layout;
  x.horizon = horizon;
  x.values.assign(horizon * layout.width(), 0.0);
  impose_conditions(x.values, layout, horizon, task_label, sample.obs_start, sample.obs_goal, onehot_scale);
  for (std::size_t t = 0; t < horizon; ++t) {
    const std::size_t a = sample.actions[t];
    if (a >= layout.num_actions) throw LabelError("action label " + std::to_string(a) + " out of range");
    x.values[t * layout.width() + layout.action_begin() + a] = onehot_scale;
  }
  return x;
}

/// Per-row argmax over the action block; ties resolve to the lowest label.
inline std::vector<std::size_t> decode_plan(const DiffusionState& x) {
  std::vector<std::size_t> plan;
  for (std::size_t t = 0; t < x.horizon; ++t) {
    plan.push_back(argmax_lowest(x.row(t).subspan(x.layout.action_begin(), x.layout.num_actions)));
  }
  return plan;
}

/// x_n = sqrt(abar_n) x0 + sqrt(1 - abar_n) eps. `noise` may be empty, in
/// which case eps is drawn from `rng`.
inline std::vector<double> q_forward(std::span<const double> x0, std::size_t n, const NoiseSchedule& schedule,
                                     std::span<const double> noise, Rng* rng = nullptr) {
  if (n < 1 || n > schedule.steps()) {
    throw PreconditionError("q_forward: step " + std::to_string(n) + " outside [1, " + std::to_string(schedule.steps()) + "]");
  }
  if (!noise.empty() && noise.size() != x0.size()) throw DimensionError("q_forward: noise size mismatch");
  if (noise.empty() && !rng) throw PreconditionError("q_forward: no noise and no random source");
  const double signal = std::sqrt(schedule.alpha_bar(n));
  const double spread = std::sqrt(1.0 - schedule.alpha_bar(n));
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const double eps = noise.empty() ? rng->normal() : noise[i];
    out[i] = signal * x0[i] + spread * eps;
  }
  return out;
}

enum class FusionNoise { Reuse, Fresh };

struct DiffusionOptions {
  bool use_eps = true;
  bool inject_constraints = true;
  bool mask_conditions = true;
  double onehot_scale = 1.0;
  /// Reuse: the fusion input's eps slots are the reparameterization draws.
  /// Fresh: independent draws fill those slots.
  FusionNoise fusion_noise = FusionNoise::Reuse;
};

/// Callable (x_n [B, T, D], steps) -> predicted x0 [B, T, D].
template <typename P>
concept X0Predictor = requires(P p, const Tensor& x, const std::vector<std::size_t>& steps) {
  { p(x, steps) } -> std::convertible_to<Tensor>;
};

namespace detail {

inline Tensor stack_states(const std::vector<std::vector<double>>& rows, std::size_t horizon, std::size_t width) {
  std::vector<double> flat;
  flat.reserve(rows.size() * horizon * width);
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return Tensor({rows.size(), horizon, width}, std::move(flat));
}

inline std::size_t common_horizon(const std::vector<Sample>& batch) {
  if (batch.empty()) throw PreconditionError("empty batch");
  const std::size_t horizon = batch.front().actions.size();
  for (const Sample& s : batch) {
    if (s.actions.size() != horizon) throw DimensionError("batch mixes horizons");
  }
  return horizon;
}

}  // namespace detail

/// Squared error between predicted and true x0, restricted to the action
/// block when `mask_conditions` is set.
inline Tensor x0_loss(const Tensor& pred, const Tensor& x0, const StateLayout& layout, bool mask_conditions) {
  if (!mask_conditions) return mse(pred, x0);
  const std::size_t lo = layout.action_begin(), hi = lo + layout.num_actions;
  return mse(slice(pred, 2, lo, hi), slice(x0, 2, lo, hi));
}

/// Training loss with an arbitrary x0 predictor. Each item gets a uniform
/// step n, noised x_n with condition blocks re-imposed, and the ground-truth
/// task label in x0.
template <X0Predictor Predict>
Tensor diffusion_loss_with(const std::vector<Sample>& batch, const StateLayout& layout, const NoiseSchedule& schedule,
                           const DiffusionOptions& options, Rng& rng, Predict&& predict) {
  const std::size_t horizon = detail::common_horizon(batch);
  std::vector<std::vector<double>> clean, noised;
  std::vector<std::size_t> steps;
  for (const Sample& s : batch) {
    DiffusionState x0 = build_x0(s, s.task, layout, options.onehot_scale);
    const std::size_t n = 1 + rng.uniform_int(schedule.steps());
    std::vector<double> x_n = q_forward(x0.values, n, schedule, {}, &rng);
    impose_conditions(x_n, layout, horizon, s.task, s.obs_start, s.obs_goal, options.onehot_scale);
    clean.push_back(std::move(x0.values));
    noised.push_back(std::move(x_n));
    steps.push_back(n);
  }
  const Tensor x0 = detail::stack_states(clean, horizon, layout.width());
  const Tensor pred = predict(detail::stack_states(noised, horizon, layout.width()), steps);
  return x0_loss(pred, x0, layout, options.mask_conditions);
}

/// z_c for a batch: frozen VAE codes of start/goal fused by the denoiser's
/// fusion net, or zeros when injection is disabled. Item i uses seeds[i].
inline Tensor constraint_codes(const std::vector<Sample>& batch, const std::vector<std::uint64_t>& seeds,
                               const Denoiser& denoiser, const Vae& vae, const DiffusionOptions& options) {
  if (!vae.frozen()) throw StateError("diffusion requires a frozen VAE");
  if (seeds.size() != batch.size()) throw DimensionError("constraint_codes: one seed per item required");
  if (!options.inject_constraints) return Tensor::zeros({batch.size(), denoiser.config().bottleneck});
  std::vector<std::vector<double>> states;
  std::vector<std::uint64_t> state_seeds;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    states.push_back(Vae::state_vector(batch[i].obs_start, batch[i].text_start));
    states.push_back(Vae::state_vector(batch[i].obs_goal, batch[i].text_goal));
    state_seeds.push_back(derive_seed(seeds[i], 0xE5, 0));
    state_seeds.push_back(derive_seed(seeds[i], 0xE5, 1));
  }
  auto codes = vae.encode_states(states, options.use_eps, state_seeds);
  std::vector<std::pair<LatentCode, LatentCode>> pairs;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    pairs.emplace_back(std::move(codes[2 * i]), std::move(codes[2 * i + 1]));
    if (options.fusion_noise == FusionNoise::Fresh) {
      Rng fresh(derive_seed(seeds[i], 0xF5));
      for (double& e : pairs.back().first.eps) e = fresh.normal();
      for (double& e : pairs.back().second.eps) e = fresh.normal();
    }
  }
  return denoiser.fuse(pairs, options.use_eps).z_c;
}

/// Training loss through the real denoiser and frozen VAE.
inline Tensor diffusion_loss(const std::vector<Sample>& batch, const StateLayout& layout,
                             const NoiseSchedule& schedule, const Denoiser& denoiser, const Vae& vae,
                             const DiffusionOptions& options, Rng& rng) {
  if (!vae.frozen()) throw StateError("diffusion_loss requires a frozen VAE");
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < batch.size(); ++i) seeds.push_back(rng.next_u64());
  const Tensor z_c = constraint_codes(batch, seeds, denoiser, vae, options);
  return diffusion_loss_with(batch, layout, schedule, options, rng,
                             [&](const Tensor& x, const std::vector<std::size_t>& steps) {
                               return denoiser.forward(x, steps, &z_c);
                             });
}

/// One plan to generate: conditions come from `sample` (its actions are not
/// read), `task` is the predicted class, `seed` drives every random draw.
struct PlanRequest {
  Sample conditions;
  std::size_t task = 0;
  std::uint64_t seed = 0;
};

using StepObserver = std::function<void(std::size_t step, const std::vector<DiffusionState>&)>;

/// Reverse DDPM sampling with an arbitrary predictor. Starts from Gaussian
/// noise on the action block, and at each step forms the posterior mean from
/// the predicted x0, adds sqrt(beta_n) noise (except at n = 1) and
/// re-imposes the condition blocks.
template <X0Predictor Predict>
std::vector<DiffusionState> sample_with(const std::vector<PlanRequest>& requests, std::size_t horizon,
                                        const StateLayout& layout, const NoiseSchedule& schedule,
                                        const DiffusionOptions& options, Predict&& predict,
                                        const StepObserver& observer = {}) {
  if (horizon < 2) throw PreconditionError("sample: horizon must be at least 2");
  const std::size_t w = layout.width(), total = schedule.steps();
  const std::size_t lo = layout.action_begin(), hi = lo + layout.num_actions;
  std::vector<DiffusionState> states;
  std::vector<Rng> rngs;
  for (const PlanRequest& r : requests) {
    DiffusionState x;
    x.layout = layout;
    x.horizon = horizon;
    x.step = total;
    x.values.assign(horizon * w, 0.0);
    rngs.emplace_back(derive_seed(r.seed, 0x5A));
    for (std::size_t t = 0; t < horizon; ++t) {
      for (std::size_t c = lo; c < hi; ++c) x.values[t * w + c] = rngs.back().normal();
    }
    impose_conditions(x.values, layout, horizon, r.task, r.conditions.obs_start, r.conditions.obs_goal,
                      options.onehot_scale);
    states.push_back(std::move(x));
  }
  if (states.empty()) return states;
  if (observer) observer(total, states);

  NoGradGuard no_grad;
  for (std::size_t n = total; n >= 1; --n) {
    std::vector<std::vector<double>> rows;
    for (const auto& s : states) rows.push_back(s.values);
    const Tensor pred = predict(detail::stack_states(rows, horizon, w), std::vector<std::size_t>(states.size(), n));
    const auto& x0_hat = pred.values();
    const double abar = schedule.alpha_bar(n), abar_prev = schedule.alpha_bar(n - 1);
    const double coef_x0 = std::sqrt(abar_prev) * schedule.beta(n) / (1.0 - abar);
    const double coef_xn = std::sqrt(schedule.alpha(n)) * (1.0 - abar_prev) / (1.0 - abar);
    const double sigma = std::sqrt(schedule.beta(n));
    for (std::size_t i = 0; i < states.size(); ++i) {
      auto& v = states[i].values;
      const double* p = x0_hat.data() + i * horizon * w;
      for (std::size_t j = 0; j < v.size(); ++j) v[j] = coef_x0 * p[j] + coef_xn * v[j];
      if (n > 1) {
        for (std::size_t t = 0; t < horizon; ++t) {
          for (std::size_t c = lo; c < hi; ++c) v[t * w + c] += sigma * rngs[i].normal();
        }
      }
      impose_conditions(v, layout, horizon, requests[i].task, requests[i].conditions.obs_start,
                        requests[i].conditions.obs_goal, options.onehot_scale);
      states[i].step = n - 1;
    }
    if (observer) observer(n - 1, states);
  }
  return states;
}

/// Batched sampling through the trained denoiser and frozen VAE.
inline std::vector<DiffusionState> sample_plans(const std::vector<PlanRequest>& requests, std::size_t horizon,
                                                const StateLayout& layout, const NoiseSchedule& schedule,
                                                const Denoiser& denoiser, const Vae& vae,
                                                const DiffusionOptions& options, const StepObserver& observer = {}) {
  if (requests.empty()) return {};
  if (denoiser.config().feature_dim != layout.width()) {
    throw DimensionError("sample: denoiser width " + std::to_string(denoiser.config().feature_dim) +
                         " does not match layout width " + std::to_string(layout.width()));
  }
  if (denoiser.config().total_steps != schedule.steps()) {
    throw DimensionError("sample: denoiser was built for " + std::to_string(denoiser.config().total_steps) +
                         " steps, schedule has " + std::to_string(schedule.steps()));
  }
  std::vector<Sample> conditions;
  std::vector<std::uint64_t> seeds;
  for (const auto& r : requests) {
    conditions.push_back(r.conditions);
    seeds.push_back(r.seed);
  }
  Tensor z_c;
  {
    NoGradGuard no_grad;
    z_c = constraint_codes(conditions, seeds, denoiser, vae, options);
  }
  return sample_with(requests, horizon, layout, schedule, options,
                     [&](const Tensor& x, const std::vector<std::size_t>& steps) {
                       return denoiser.forward(x, steps, &z_c);
                     },
                     observer);
}

/// Single-plan convenience wrapper.
inline DiffusionState sample(const std::vector<double>& obs_start, const std::vector<double>& obs_goal,
                             const std::vector<double>& text_start, const std::vector<double>& text_goal,
                             std::size_t task_hat, std::size_t horizon, const StateLayout& layout,
                             const NoiseSchedule& schedule, const Denoiser& denoiser, const Vae& vae,
                             const DiffusionOptions& options, std::uint64_t seed) {
  PlanRequest r;
  r.conditions.obs_start = obs_start;
  r.conditions.obs_goal = obs_goal;
  r.conditions.text_start = text_start;
  r.conditions.text_goal = text_goal;
  r.task = task_hat;
  r.seed = seed;
  return sample_plans({r}, horizon, layout, schedule, denoiser, vae, options).front();
}

}  // namespace clad
