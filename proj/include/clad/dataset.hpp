#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "clad/config.hpp"
#include "clad/error.hpp"
#include "clad/rng.hpp"

namespace clad {

enum class CurationMode { Pdpp, Kepp };

inline const char* to_string(CurationMode mode) { return mode == CurationMode::Pdpp ? "pdpp" : "kepp"; }

inline CurationMode parse_curation_mode(const std::string& s) {
  if (s == "pdpp") return CurationMode::Pdpp;
  if (s == "kepp") return CurationMode::Kepp;
  throw ConfigError("unknown curation mode '" + s + "' (expected pdpp or kepp)");
}

struct CorpusConfig {
  std::size_t num_tasks = 5;
  std::size_t num_actions = 12;
  std::size_t obs_dim = 32;
  std::size_t text_dim = 16;
  std::size_t videos_per_task = 30;
  double noise_sd = 0.02;
  std::uint64_t seed = 0;
  std::size_t min_chain = 6;
  std::size_t max_chain = 10;
  /// Probability that a video swaps in its task's alternative action at the
  /// task's branch position. Zero keeps the grammar deterministic.
  double branch_prob = 0.0;

  static CorpusConfig from(const KeyValueConfig& kv, const std::string& prefix = "data.") {
    CorpusConfig c;
    c.num_tasks = kv.get_uint(prefix + "num_tasks", c.num_tasks);
    c.num_actions = kv.get_uint(prefix + "num_actions", c.num_actions);
    c.obs_dim = kv.get_uint(prefix + "obs_dim", c.obs_dim);
    c.text_dim = kv.get_uint(prefix + "text_dim", c.text_dim);
    c.videos_per_task = kv.get_uint(prefix + "videos_per_task", c.videos_per_task);
    c.noise_sd = kv.get_double(prefix + "noise_sd", c.noise_sd);
    c.seed = kv.get_uint(prefix + "seed", c.seed);
    c.min_chain = kv.get_uint(prefix + "min_chain", c.min_chain);
    c.max_chain = kv.get_uint(prefix + "max_chain", c.max_chain);
    c.branch_prob = kv.get_double(prefix + "branch_prob", c.branch_prob);
    return c;
  }

  void write_to(KeyValueConfig& kv, const std::string& prefix = "data.") const {
    kv.set(prefix + "num_tasks", std::to_string(num_tasks));
    kv.set(prefix + "num_actions", std::to_string(num_actions));
    kv.set(prefix + "obs_dim", std::to_string(obs_dim));
    kv.set(prefix + "text_dim", std::to_string(text_dim));
    kv.set(prefix + "videos_per_task", std::to_string(videos_per_task));
    kv.set(prefix + "noise_sd", format_double(noise_sd));
    kv.set(prefix + "seed", std::to_string(seed));
    kv.set(prefix + "min_chain", std::to_string(min_chain));
    kv.set(prefix + "max_chain", std::to_string(max_chain));
    kv.set(prefix + "branch_prob", format_double(branch_prob));
  }

  static std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
};

struct Step {
  std::size_t action = 0;
  double start_sec = 0.0;
  double end_sec = 0.0;
};

/// One instructional video: ordered steps plus 1 Hz frame features.
struct Video {
  std::size_t task = 0;
  std::vector<Step> steps;
  std::size_t obs_dim = 0;
  std::vector<double> frames;  // [num_frames x obs_dim], frame s covers second s

  std::size_t num_frames() const { return obs_dim == 0 ? 0 : frames.size() / obs_dim; }
  std::span<const double> frame(std::size_t second) const {
    if (second >= num_frames()) throw PreconditionError("frame index out of range");
    return std::span<const double>(frames).subspan(second * obs_dim, obs_dim);
  }
};

struct Corpus {
  CorpusConfig config;
  std::vector<double> action_table;    // [A x d_o]
  std::vector<double> language_table;  // [A x d_t]
  std::vector<std::vector<std::size_t>> chains;
  std::vector<Video> videos;

  std::span<const double> action_row(std::size_t a) const {
    return std::span<const double>(action_table).subspan(a * config.obs_dim, config.obs_dim);
  }
  std::span<const double> language_row(std::size_t a) const {
    return std::span<const double>(language_table).subspan(a * config.text_dim, config.text_dim);
  }
};

/// One curated example: task, T actions, start/goal observations and the
/// language embeddings of the first and last action.
struct Sample {
  std::size_t task = 0;
  std::vector<std::size_t> actions;
  std::vector<double> obs_start;
  std::vector<double> obs_goal;
  std::vector<double> text_start;
  std::vector<double> text_goal;

  std::size_t horizon() const { return actions.size(); }
  bool operator==(const Sample&) const = default;
};

namespace detail {

// Windows of length 3..6 that the grammar keeps identifiable.
inline constexpr std::size_t kMinIdentifiableHorizon = 3;
inline constexpr std::size_t kMaxIdentifiableHorizon = 6;

// A goal window straddles the last step's start, so its mean mixes the last
// two actions. Windows are therefore keyed both by (first, last) and by
// (first, {penultimate, last}).
struct WindowKey {
  bool blended;
  std::size_t horizon, first, lo, hi;
  auto operator<=>(const WindowKey&) const = default;
};

struct WindowValue {
  std::size_t task;
  std::vector<std::size_t> actions;
};

inline std::array<WindowKey, 2> window_keys(const std::vector<std::size_t>& window) {
  const std::size_t h = window.size();
  const std::size_t first = window.front(), last = window.back(), pen = window[h - 2];
  return {WindowKey{false, h, first, last, last}, WindowKey{true, h, first, std::min(pen, last), std::max(pen, last)}};
}

/// Draws C action chains such that, for every horizon in 3..6, a window's
/// first action plus its last action (alone or blended with the one before)
/// maps to a single task and a single intermediate sequence. Returns false
/// when the random construction fails.
inline bool build_chains(const CorpusConfig& cfg, Rng& rng, std::vector<std::vector<std::size_t>>& chains) {
  const std::size_t actions = cfg.num_actions;
  std::vector<std::size_t> starts(actions);
  for (std::size_t i = 0; i < actions; ++i) starts[i] = i;
  rng.shuffle(starts);

  std::map<WindowKey, WindowValue> seen;
  chains.assign(cfg.num_tasks, {});
  for (std::size_t task = 0; task < cfg.num_tasks; ++task) {
    const std::size_t span_len = cfg.max_chain - cfg.min_chain + 1;
    const std::size_t length = std::min(actions, cfg.min_chain + rng.uniform_int(span_len));
    auto& chain = chains[task];
    chain.push_back(starts[task]);
    while (chain.size() < length) {
      std::vector<std::size_t> candidates;
      for (std::size_t a = 0; a < actions; ++a) {
        if (std::find(chain.begin(), chain.end(), a) != chain.end()) continue;
        bool ok = true;
        for (std::size_t h = kMinIdentifiableHorizon; ok && h <= kMaxIdentifiableHorizon; ++h) {
          if (chain.size() + 1 < h) break;
          const std::size_t begin = chain.size() + 1 - h;
          std::vector<std::size_t> window(chain.begin() + static_cast<std::ptrdiff_t>(begin), chain.end());
          window.push_back(a);
          for (const WindowKey& key : window_keys(window)) {
            auto it = seen.find(key);
            if (it != seen.end() && !(it->second.task == task && it->second.actions == window)) ok = false;
          }
        }
        if (ok) candidates.push_back(a);
      }
      if (candidates.empty()) return false;
      const std::size_t next = candidates[rng.uniform_int(candidates.size())];
      chain.push_back(next);
      for (std::size_t h = kMinIdentifiableHorizon; h <= kMaxIdentifiableHorizon && h <= chain.size(); ++h) {
        const std::size_t begin = chain.size() - h;
        std::vector<std::size_t> window(chain.begin() + static_cast<std::ptrdiff_t>(begin), chain.end());
        for (const WindowKey& key : window_keys(window)) seen[key] = {task, window};
      }
    }
  }
  return true;
}

}  // namespace detail

/// Synthetic instructional-video corpus. Each task owns a canonical action
/// chain; videos cover a contiguous stretch of it with random step durations
/// and background gaps, and frames carry the active action's embedding plus
/// Gaussian noise (background frames are zero plus noise).
inline Corpus generate_corpus(const CorpusConfig& cfg) {
  if (cfg.num_tasks < 1) throw ConfigError("generate_corpus: num_tasks must be at least 1");
  if (cfg.num_actions < 2) throw ConfigError("generate_corpus: num_actions must be at least 2");
  if (cfg.num_actions < cfg.num_tasks) {
    throw ConfigError("generate_corpus: infeasible config, " + std::to_string(cfg.num_actions) +
                      " actions cannot give " + std::to_string(cfg.num_tasks) + " tasks distinct starting actions");
  }
  if (cfg.videos_per_task < 1) throw ConfigError("generate_corpus: videos_per_task must be at least 1");
  if (cfg.obs_dim < 1 || cfg.text_dim < 1) throw ConfigError("generate_corpus: feature dims must be positive");
  if (cfg.min_chain < 2 || cfg.max_chain < cfg.min_chain) throw ConfigError("generate_corpus: bad chain length range");
  if (!(cfg.noise_sd >= 0.0)) throw ConfigError("generate_corpus: noise_sd must be non-negative");
  if (!(cfg.branch_prob >= 0.0 && cfg.branch_prob <= 1.0)) throw ConfigError("generate_corpus: branch_prob outside [0, 1]");

  Corpus corpus;
  corpus.config = cfg;

  Rng table_rng(derive_seed(cfg.seed, 1));
  corpus.action_table.resize(cfg.num_actions * cfg.obs_dim);
  for (double& v : corpus.action_table) v = table_rng.uniform();
  Rng language_rng(derive_seed(cfg.seed, 2));
  corpus.language_table.resize(cfg.num_actions * cfg.text_dim);
  for (double& v : corpus.language_table) v = language_rng.uniform();

  Rng chain_rng(derive_seed(cfg.seed, 3));
  bool built = false;
  for (int attempt = 0; attempt < 2000 && !built; ++attempt) built = detail::build_chains(cfg, chain_rng, corpus.chains);
  if (!built) {
    throw ConfigError("generate_corpus: infeasible config, could not build " + std::to_string(cfg.num_tasks) +
                      " identifiable chains over " + std::to_string(cfg.num_actions) + " actions");
  }

  // One branch point and alternative action per task.
  std::vector<std::pair<std::size_t, std::size_t>> branches;
  for (const auto& chain : corpus.chains) {
    std::size_t position = chain.size() > 2 ? 1 + chain_rng.uniform_int(chain.size() - 2) : 0;
    std::size_t alt = chain[position];
    for (std::size_t tries = 0; tries < 64 && alt == chain[position]; ++tries) alt = chain_rng.uniform_int(cfg.num_actions);
    branches.emplace_back(position, alt);
  }

  Rng video_rng(derive_seed(cfg.seed, 4));
  for (std::size_t task = 0; task < cfg.num_tasks; ++task) {
    const auto& chain = corpus.chains[task];
    for (std::size_t v = 0; v < cfg.videos_per_task; ++v) {
      Video video;
      video.task = task;
      video.obs_dim = cfg.obs_dim;
      const std::size_t max_trim = chain.size() >= 6 ? 2 : 0;
      const std::size_t head = video_rng.uniform_int(max_trim + 1);
      const std::size_t tail = video_rng.uniform_int(max_trim + 1);
      std::vector<std::size_t> sequence(chain.begin() + static_cast<std::ptrdiff_t>(head),
                                        chain.end() - static_cast<std::ptrdiff_t>(tail));
      const bool branch = cfg.branch_prob > 0.0 && video_rng.uniform() < cfg.branch_prob;
      if (branch) {
        const auto [position, alt] = branches[task];
        if (position >= head && position < chain.size() - tail) sequence[position - head] = alt;
      }
      double t = static_cast<double>(2 + video_rng.uniform_int(4));
      for (std::size_t action : sequence) {
        const double duration = static_cast<double>(4 + video_rng.uniform_int(5));
        video.steps.push_back({action, t, t + duration});
        t += duration + static_cast<double>(video_rng.uniform_int(3));
      }
      const std::size_t frames = static_cast<std::size_t>(t) + 2 + video_rng.uniform_int(4);
      video.frames.assign(frames * cfg.obs_dim, 0.0);
      Rng noise_rng(derive_seed(cfg.seed, 5, task * cfg.videos_per_task + v));
      std::size_t step = 0;
      for (std::size_t s = 0; s < frames; ++s) {
        const double sec = static_cast<double>(s);
        while (step < video.steps.size() && video.steps[step].end_sec <= sec) ++step;
        const bool active = step < video.steps.size() && video.steps[step].start_sec <= sec;
        for (std::size_t d = 0; d < cfg.obs_dim; ++d) {
          const double base = active ? corpus.action_table[video.steps[step].action * cfg.obs_dim + d] : 0.0;
          video.frames[s * cfg.obs_dim + d] = cfg.noise_sd > 0.0 ? base + noise_rng.normal(0.0, cfg.noise_sd) : base;
        }
      }
      corpus.videos.push_back(std::move(video));
    }
  }
  return corpus;
}

/// Closed interval in seconds.
struct TimeWindow {
  double begin = 0.0;
  double end = 0.0;
  bool operator==(const TimeWindow&) const = default;
};

/// Start/goal observation windows for a window whose first action starts at
/// `t_first` and whose last action starts at `t_last`.
inline std::pair<TimeWindow, TimeWindow> observation_windows(double t_first, double t_last, CurationMode mode) {
  if (mode == CurationMode::Pdpp) return {{t_first, t_first + 3.0}, {t_last - 2.0, t_last + 1.0}};
  return {{t_first - 1.0, t_first + 2.0}, {t_last - 1.0, t_last + 2.0}};
}

/// Mean of the 1 Hz frames inside `window`, clamped to the video.
inline std::vector<double> window_mean(const Video& video, TimeWindow window) {
  const double last_frame = static_cast<double>(video.num_frames()) - 1.0;
  const double lo = std::max(0.0, std::ceil(window.begin));
  const double hi = std::min(last_frame, std::floor(window.end));
  if (video.num_frames() == 0 || lo > hi) {
    throw PreconditionError("curate_windows: window [" + std::to_string(window.begin) + ", " +
                            std::to_string(window.end) + "] is empty after clamping to the video");
  }
  const auto first = static_cast<std::size_t>(lo);
  const auto last = static_cast<std::size_t>(hi);
  const std::size_t count = last - first + 1;
  // Shifted mean: identical frames average back to the frame bit-exactly.
  auto anchor = video.frame(first);
  std::vector<double> offset(video.obs_dim, 0.0);
  for (std::size_t s = first + 1; s <= last; ++s) {
    auto f = video.frame(s);
    for (std::size_t d = 0; d < video.obs_dim; ++d) offset[d] += f[d] - anchor[d];
  }
  std::vector<double> mean(video.obs_dim);
  for (std::size_t d = 0; d < video.obs_dim; ++d) mean[d] = anchor[d] + offset[d] / static_cast<double>(count);
  return mean;
}

/// (o_s, o_g) for the steps [first_step, last_step] of `video`.
inline std::pair<std::vector<double>, std::vector<double>> curate_windows(const Video& video, std::size_t first_step,
                                                                          std::size_t last_step, CurationMode mode) {
  if (first_step >= video.steps.size() || last_step >= video.steps.size() || first_step > last_step) {
    throw PreconditionError("curate_windows: step range out of bounds");
  }
  const auto [start, goal] =
      observation_windows(video.steps[first_step].start_sec, video.steps[last_step].start_sec, mode);
  return {window_mean(video, start), window_mean(video, goal)};
}

/// One sample per contiguous window of `horizon` steps.
inline std::vector<Sample> slide_horizon(const Corpus& corpus, const Video& video, std::size_t horizon,
                                         CurationMode mode) {
  if (horizon < 2) throw PreconditionError("slide_horizon: horizon must be at least 2");
  std::vector<Sample> out;
  if (video.steps.size() < horizon) return out;
  for (std::size_t i = 0; i + horizon <= video.steps.size(); ++i) {
    Sample s;
    s.task = video.task;
    for (std::size_t k = 0; k < horizon; ++k) s.actions.push_back(video.steps[i + k].action);
    std::tie(s.obs_start, s.obs_goal) = curate_windows(video, i, i + horizon - 1, mode);
    auto ls = corpus.language_row(s.actions.front());
    auto lg = corpus.language_row(s.actions.back());
    s.text_start.assign(ls.begin(), ls.end());
    s.text_goal.assign(lg.begin(), lg.end());
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<Sample> curate_corpus(const Corpus& corpus, std::size_t horizon, CurationMode mode) {
  std::vector<Sample> out;
  for (const Video& video : corpus.videos) {
    auto part = slide_horizon(corpus, video, horizon, mode);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

struct Split {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

/// Seeded shuffle, then the first round(ratio * n) samples go to train.
inline Split split(const std::vector<Sample>& samples, double ratio, std::uint64_t seed) {
  if (samples.empty()) throw PreconditionError("split: no samples");
  if (!(ratio > 0.0 && ratio < 1.0)) throw PreconditionError("split: ratio must lie in (0, 1)");
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, 6));
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(samples.size())));
  Split out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? out.train : out.test).push_back(samples[order[i]]);
  }
  return out;
}

/// Per-dimension min-max scaling fit on one split and applied to others.
/// Values outside the fitted range are clipped so every output lies in [0, 1].
class MinMaxNormalizer {
 public:
  static MinMaxNormalizer fit(const std::vector<Sample>& samples) {
    if (samples.empty()) throw PreconditionError("normalizer: no samples to fit");
    MinMaxNormalizer n;
    n.obs_ = Range::over(samples, [](const Sample& s) { return std::vector{&s.obs_start, &s.obs_goal}; });
    n.text_ = Range::over(samples, [](const Sample& s) { return std::vector{&s.text_start, &s.text_goal}; });
    return n;
  }

  Sample apply(const Sample& s) const {
    Sample out = s;
    obs_.scale(out.obs_start);
    obs_.scale(out.obs_goal);
    text_.scale(out.text_start);
    text_.scale(out.text_goal);
    return out;
  }

  std::vector<Sample> apply(const std::vector<Sample>& samples) const {
    std::vector<Sample> out;
    out.reserve(samples.size());
    for (const Sample& s : samples) out.push_back(apply(s));
    return out;
  }

 private:
  struct Range {
    std::vector<double> lo, hi;

    template <typename Fields>
    static Range over(const std::vector<Sample>& samples, Fields fields) {
      Range r;
      for (const Sample& s : samples) {
        for (const std::vector<double>* v : fields(s)) {
          if (r.lo.empty()) {
            r.lo = *v;
            r.hi = *v;
          }
          if (v->size() != r.lo.size()) throw DimensionError("normalizer: inconsistent feature dims");
          for (std::size_t d = 0; d < v->size(); ++d) {
            r.lo[d] = std::min(r.lo[d], (*v)[d]);
            r.hi[d] = std::max(r.hi[d], (*v)[d]);
          }
        }
      }
      return r;
    }

    void scale(std::vector<double>& v) const {
      if (v.size() != lo.size()) throw DimensionError("normalizer: feature dim mismatch");
      for (std::size_t d = 0; d < v.size(); ++d) {
        const double width = hi[d] - lo[d];
        v[d] = width > 0.0 ? std::clamp((v[d] - lo[d]) / width, 0.0, 1.0) : 0.0;
      }
    }
  };

  Range obs_, text_;
};

}  // namespace clad
