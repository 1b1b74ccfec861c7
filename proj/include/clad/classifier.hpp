#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "clad/dataset.hpp"
#include "clad/losses.hpp"
#include "clad/nn.hpp"

namespace clad {

struct ClassifierConfig {
  std::size_t obs_dim = 32;
  std::size_t hidden = 256;
  std::size_t num_tasks = 5;
};

struct TaskPrediction {
  std::size_t task = 0;
  std::vector<double> probabilities;
};

/// Index of the largest value; ties go to the lowest index.
inline std::size_t argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

/// Task classifier over concat(o_s, o_g): 2*d_o -> 256 (GELU) -> C logits.
class TaskClassifier {
 public:
  TaskClassifier() = default;
  TaskClassifier(ClassifierConfig config, std::uint64_t seed) : config_(config) {
    Rng rng(derive_seed(seed, 0xC1A));
    nn::add_linear(params_, "classifier.hidden", 2 * config.obs_dim, config.hidden, rng);
    nn::add_linear(params_, "classifier.out", config.hidden, config.num_tasks, rng);
  }

  const ClassifierConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  Tensor logits(const Tensor& inputs) const {
    return nn::linear(params_, "classifier.out", gelu(nn::linear(params_, "classifier.hidden", inputs)));
  }

  Tensor batch_inputs(const std::vector<Sample>& batch) const {
    std::vector<double> flat;
    flat.reserve(batch.size() * 2 * config_.obs_dim);
    for (const Sample& s : batch) {
      if (s.obs_start.size() != config_.obs_dim || s.obs_goal.size() != config_.obs_dim) {
        throw DimensionError("classifier: observation dim mismatch");
      }
      flat.insert(flat.end(), s.obs_start.begin(), s.obs_start.end());
      flat.insert(flat.end(), s.obs_goal.begin(), s.obs_goal.end());
    }
    return Tensor({batch.size(), 2 * config_.obs_dim}, std::move(flat));
  }

  TaskPrediction predict(const std::vector<double>& obs_start, const std::vector<double>& obs_goal) const {
    Sample s;
    s.obs_start = obs_start;
    s.obs_goal = obs_goal;
    return predict_batch({s}).front();
  }

  std::vector<TaskPrediction> predict_batch(const std::vector<Sample>& batch) const {
    if (batch.empty()) return {};
    NoGradGuard no_grad;
    const Tensor probs = softmax_lastdim(logits(batch_inputs(batch)));
    std::vector<TaskPrediction> out;
    const std::size_t c = config_.num_tasks;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      TaskPrediction p;
      p.probabilities.assign(probs.values().begin() + static_cast<std::ptrdiff_t>(i * c),
                             probs.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * c));
      p.task = argmax_lowest(p.probabilities);
      out.push_back(std::move(p));
    }
    return out;
  }

  /// One AdamW step on cross entropy; returns the pre-step loss.
  double train_step(const std::vector<Sample>& batch, double lr, double weight_decay = 0.0) {
    std::vector<std::size_t> labels;
    for (const Sample& s : batch) labels.push_back(s.task);
    const Tensor loss = cross_entropy(logits(batch_inputs(batch)), labels);
    params_.zero_grads();
    backward(loss);
    adamw_step(params_, lr, weight_decay);
    return loss.item();
  }

  std::vector<double> arch_record() const {
    return {static_cast<double>(config_.obs_dim), static_cast<double>(config_.hidden),
            static_cast<double>(config_.num_tasks)};
  }

 private:
  ClassifierConfig config_;
  ParamStore params_;
};

}  // namespace clad
