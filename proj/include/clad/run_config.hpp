#pragma once

#include <cstdio>
#include <set>
#include <string>

#include "clad/config.hpp"
#include "clad/dataset.hpp"
#include "clad/diffusion.hpp"
#include "clad/lr_schedule.hpp"
#include "clad/metrics.hpp"

namespace clad {

struct StageParams {
  std::size_t epochs = 10;
  std::size_t steps_per_epoch = 20;
  std::size_t batch = 32;
  double peak_lr = 1e-3;
  std::size_t warmup_epochs = 0;
  std::size_t decay_window = 0;
  std::size_t decay_every = 1;
  double decay_factor = 0.5;
  double weight_decay = 0.0;

  std::size_t total_steps() const { return epochs * steps_per_epoch; }

  LRSchedule lr_schedule() const {
    LRSchedule s;
    s.peak = peak_lr;
    s.steps_per_epoch = steps_per_epoch;
    s.total_epochs = epochs;
    s.warmup_epochs = warmup_epochs;
    s.decay_window = decay_window;
    s.decay_every = decay_every;
    s.decay_factor = decay_factor;
    return s;
  }
};

enum class Stage { Vae, Classifier, Diffusion };

inline const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::Vae: return "vae";
    case Stage::Classifier: return "classifier";
    case Stage::Diffusion: return "diffusion";
  }
  return "unknown";
}

inline Stage parse_stage(const std::string& s) {
  if (s == "vae") return Stage::Vae;
  if (s == "classifier") return Stage::Classifier;
  if (s == "diffusion") return Stage::Diffusion;
  throw ConfigError("unknown stage '" + s + "' (expected vae, classifier or diffusion)");
}

/// Diffusion-stage training profiles. `desk` is the default laptop-sized
/// profile; the others reproduce the published per-dataset schedules.
inline StageParams diffusion_preset(const std::string& name) {
  StageParams p;
  p.weight_decay = 0.01;
  if (name == "desk") {
    p.epochs = 40;
    p.steps_per_epoch = 50;
    p.batch = 32;
    p.peak_lr = 1e-3;
    p.warmup_epochs = 4;
    p.decay_window = 10;
    p.decay_every = 2;
    p.decay_factor = 0.5;
  } else if (name == "crosstask") {
    p.epochs = 120;
    p.steps_per_epoch = 200;
    p.batch = 128;
    p.peak_lr = 5e-4;
    p.warmup_epochs = 20;
    p.decay_window = 30;
    p.decay_every = 5;
    p.decay_factor = 0.5;
  } else if (name == "coin") {
    p.epochs = 800;
    p.steps_per_epoch = 200;
    p.batch = 128;
    p.peak_lr = 1e-4;
    p.warmup_epochs = 20;
    p.decay_window = 50;
    p.decay_every = 5;
    p.decay_factor = 0.5;
  } else if (name == "niv") {
    // Warmup over 90 of 130 epochs, then held constant.
    p.epochs = 130;
    p.steps_per_epoch = 50;
    p.batch = 128;
    p.peak_lr = 3e-4;
    p.warmup_epochs = 90;
    p.decay_window = 0;
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected desk, crosstask, coin or niv)");
  }
  return p;
}

struct RunConfig {
  std::string dataset = "synthetic";
  CorpusConfig data;
  CurationMode curation = CurationMode::Pdpp;
  std::size_t horizon = 3;
  double split_ratio = 0.7;
  std::uint64_t split_seed = 0;

  std::size_t diffusion_steps = 200;
  double beta_start = 1e-4;
  double beta_end = 0.05;
  double onehot_scale = 1.0;

  std::string preset = "desk";
  StageParams vae{10, 20, 64, 1e-3, 0, 0, 1, 0.5, 0.0};
  StageParams classifier{40, 20, 32, 3e-3, 0, 0, 1, 0.5, 0.0};
  StageParams diffusion = diffusion_preset("desk");

  bool use_eps = true;
  bool inject_constraints = true;
  bool gt_boundary_eval = false;
  bool loss_masking = true;
  MaccMode macc_mode = MaccMode::Positional;
  FusionNoise fusion_noise = FusionNoise::Reuse;

  std::uint64_t seed = 0;

  DiffusionOptions diffusion_options() const {
    DiffusionOptions o;
    o.use_eps = use_eps;
    o.inject_constraints = inject_constraints;
    o.mask_conditions = loss_masking;
    o.onehot_scale = onehot_scale;
    o.fusion_noise = fusion_noise;
    return o;
  }

  NoiseSchedule schedule() const { return make_schedule(diffusion_steps, beta_start, beta_end); }

  static RunConfig from(const KeyValueConfig& kv) {
    validate_keys(kv);
    RunConfig c;
    c.dataset = kv.get_string("dataset", c.dataset);
    c.data = CorpusConfig::from(kv);
    c.curation = parse_curation_mode(kv.get_string("curation", to_string(c.curation)));
    c.horizon = kv.get_uint("horizon", c.horizon);
    c.split_ratio = kv.get_double("split.ratio", c.split_ratio);
    c.split_seed = kv.get_uint("split.seed", c.split_seed);
    c.diffusion_steps = kv.get_uint("schedule.steps", c.diffusion_steps);
    c.beta_start = kv.get_double("schedule.beta_start", c.beta_start);
    c.beta_end = kv.get_double("schedule.beta_end", c.beta_end);
    c.onehot_scale = kv.get_double("schedule.onehot_scale", c.onehot_scale);
    c.preset = kv.get_string("preset", c.preset);
    c.diffusion = diffusion_preset(c.preset);
    read_stage(kv, "vae.", c.vae);
    read_stage(kv, "classifier.", c.classifier);
    read_stage(kv, "diffusion.", c.diffusion);
    c.use_eps = kv.get_bool("flags.use_eps", c.use_eps);
    c.inject_constraints = kv.get_bool("flags.inject_constraints", c.inject_constraints);
    c.gt_boundary_eval = kv.get_bool("flags.gt_boundary_eval", c.gt_boundary_eval);
    c.loss_masking = kv.get_bool("flags.loss_masking", c.loss_masking);
    c.macc_mode = parse_macc_mode(kv.get_string("flags.macc_mode", to_string(c.macc_mode)));
    const std::string fusion = kv.get_string("flags.fusion_eps", "reuse");
    if (fusion != "reuse" && fusion != "fresh") throw ConfigError("flags.fusion_eps must be reuse or fresh");
    c.fusion_noise = fusion == "fresh" ? FusionNoise::Fresh : FusionNoise::Reuse;
    c.seed = kv.get_uint("seed", c.seed);
    c.validate();
    return c;
  }

  KeyValueConfig to_kv() const {
    KeyValueConfig kv;
    kv.set("dataset", dataset);
    data.write_to(kv);
    kv.set("curation", to_string(curation));
    kv.set("horizon", std::to_string(horizon));
    kv.set("split.ratio", CorpusConfig::format_double(split_ratio));
    kv.set("split.seed", std::to_string(split_seed));
    kv.set("schedule.steps", std::to_string(diffusion_steps));
    kv.set("schedule.beta_start", CorpusConfig::format_double(beta_start));
    kv.set("schedule.beta_end", CorpusConfig::format_double(beta_end));
    kv.set("schedule.onehot_scale", CorpusConfig::format_double(onehot_scale));
    kv.set("preset", preset);
    write_stage(kv, "vae.", vae);
    write_stage(kv, "classifier.", classifier);
    write_stage(kv, "diffusion.", diffusion);
    kv.set("flags.use_eps", use_eps ? "true" : "false");
    kv.set("flags.inject_constraints", inject_constraints ? "true" : "false");
    kv.set("flags.gt_boundary_eval", gt_boundary_eval ? "true" : "false");
    kv.set("flags.loss_masking", loss_masking ? "true" : "false");
    kv.set("flags.macc_mode", to_string(macc_mode));
    kv.set("flags.fusion_eps", fusion_noise == FusionNoise::Fresh ? "fresh" : "reuse");
    kv.set("seed", std::to_string(seed));
    return kv;
  }

  /// FNV-1a of the canonical key=value rendering, as 16 hex digits.
  std::string fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_kv().to_string()) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  void validate() const {
    if (horizon < 2) throw ConfigError("horizon must be at least 2");
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split.ratio must lie in (0, 1)");
    if (diffusion_steps < 1) throw ConfigError("schedule.steps must be positive");
    if (!(onehot_scale > 0.0)) throw ConfigError("schedule.onehot_scale must be positive");
    for (const StageParams* s : {&vae, &classifier, &diffusion}) {
      if (s->epochs == 0 || s->steps_per_epoch == 0 || s->batch == 0 || s->decay_every == 0) {
        throw ConfigError("stage epochs, steps_per_epoch, batch and decay_every must be positive");
      }
      if (!(s->peak_lr >= 0.0)) throw ConfigError("stage peak_lr must be non-negative");
    }
  }

 private:
  static constexpr const char* kStageKeys[] = {"epochs",       "steps_per_epoch", "batch",
                                               "peak_lr",      "warmup_epochs",   "decay_window",
                                               "decay_every",  "decay_factor",    "weight_decay"};

  static void read_stage(const KeyValueConfig& kv, const std::string& prefix, StageParams& p) {
    p.epochs = kv.get_uint(prefix + "epochs", p.epochs);
    p.steps_per_epoch = kv.get_uint(prefix + "steps_per_epoch", p.steps_per_epoch);
    p.batch = kv.get_uint(prefix + "batch", p.batch);
    p.peak_lr = kv.get_double(prefix + "peak_lr", p.peak_lr);
    p.warmup_epochs = kv.get_uint(prefix + "warmup_epochs", p.warmup_epochs);
    p.decay_window = kv.get_uint(prefix + "decay_window", p.decay_window);
    p.decay_every = kv.get_uint(prefix + "decay_every", p.decay_every);
    p.decay_factor = kv.get_double(prefix + "decay_factor", p.decay_factor);
    p.weight_decay = kv.get_double(prefix + "weight_decay", p.weight_decay);
  }

  static void write_stage(KeyValueConfig& kv, const std::string& prefix, const StageParams& p) {
    kv.set(prefix + "epochs", std::to_string(p.epochs));
    kv.set(prefix + "steps_per_epoch", std::to_string(p.steps_per_epoch));
    kv.set(prefix + "batch", std::to_string(p.batch));
    kv.set(prefix + "peak_lr", CorpusConfig::format_double(p.peak_lr));
    kv.set(prefix + "warmup_epochs", std::to_string(p.warmup_epochs));
    kv.set(prefix + "decay_window", std::to_string(p.decay_window));
    kv.set(prefix + "decay_every", std::to_string(p.decay_every));
    kv.set(prefix + "decay_factor", CorpusConfig::format_double(p.decay_factor));
    kv.set(prefix + "weight_decay", CorpusConfig::format_double(p.weight_decay));
  }

  static void validate_keys(const KeyValueConfig& kv) {
    std::set<std::string> known = {"dataset",          "curation",          "horizon",
                                   "split.ratio",      "split.seed",        "schedule.steps",
                                   "schedule.beta_start", "schedule.beta_end", "schedule.onehot_scale",
                                   "preset",           "flags.use_eps",     "flags.inject_constraints",
                                   "flags.gt_boundary_eval", "flags.loss_masking", "flags.macc_mode",
                                   "flags.fusion_eps", "seed"};
    for (const char* k : {"num_tasks", "num_actions", "obs_dim", "text_dim", "videos_per_task", "noise_sd", "seed",
                          "min_chain", "max_chain", "branch_prob"}) {
      known.insert(std::string("data.") + k);
    }
    for (const char* stage : {"vae.", "classifier.", "diffusion."}) {
      for (const char* k : kStageKeys) known.insert(std::string(stage) + k);
    }
    for (const auto& [key, value] : kv.entries()) {
      if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
    }
  }
};

}  // namespace clad
