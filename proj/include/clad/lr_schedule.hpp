#pragma once

#include <cmath>
#include <cstddef>

#include "clad/error.hpp"

namespace clad {

/// Linear warmup to `peak`, hold, then multiply by `decay_factor` every
/// `decay_every` epochs during the final `decay_window` epochs.
struct LRSchedule {
  double peak = 5e-4;
  std::size_t steps_per_epoch = 1;
  std::size_t total_epochs = 1;
  std::size_t warmup_epochs = 0;
  std::size_t decay_window = 0;
  std::size_t decay_every = 1;
  double decay_factor = 0.5;

  std::size_t warmup_steps() const { return warmup_epochs * steps_per_epoch; }
};

inline double lr_at(std::size_t step, const LRSchedule& s) {
  if (s.steps_per_epoch == 0 || s.decay_every == 0) throw ConfigError("lr schedule: zero steps_per_epoch or decay_every");
  const std::size_t warmup = s.warmup_steps();
  if (step < warmup) return s.peak * static_cast<double>(step) / static_cast<double>(warmup);
  const std::size_t epoch = step / s.steps_per_epoch;
  if (s.decay_window > 0 && s.decay_window <= s.total_epochs) {
    const std::size_t decay_start = s.total_epochs - s.decay_window;
    if (epoch >= decay_start) {
      const std::size_t times = (epoch - decay_start) / s.decay_every + 1;
      return s.peak * std::pow(s.decay_factor, static_cast<double>(times));
    }
  }
  return s.peak;
}

}  // namespace clad
