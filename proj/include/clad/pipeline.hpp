#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <string>
#include <thread>
#include <vector>

#include "clad/checkpoint.hpp"
#include "clad/classifier.hpp"
#include "clad/dataset.hpp"
#include "clad/denoiser.hpp"
#include "clad/diffusion.hpp"
#include "clad/manifest.hpp"
#include "clad/metrics.hpp"
#include "clad/report.hpp"
#include "clad/run_config.hpp"
#include "clad/vae.hpp"

namespace clad {

using LogFn = std::function<void(const std::string&)>;

/// Generates the synthetic corpus described by `config` and curates it.
inline ManifestData synthesize(const RunConfig& config) {
  const Corpus corpus = generate_corpus(config.data);
  ManifestData out;
  out.header.num_tasks = config.data.num_tasks;
  out.header.num_actions = config.data.num_actions;
  out.header.obs_dim = config.data.obs_dim;
  out.header.text_dim = config.data.text_dim;
  out.header.horizon = config.horizon;
  out.header.curation = to_string(config.curation);
  out.header.source = "synthetic";
  out.samples = curate_corpus(corpus, config.horizon, config.curation);
  return out;
}

/// Train/test split with min-max scaling fit on the training half.
struct PreparedData {
  ManifestHeader header;
  StateLayout layout;
  std::vector<Sample> train;
  std::vector<Sample> test;

  std::size_t horizon() const { return header.horizon; }
};

inline PreparedData prepare(const ManifestData& data, const RunConfig& config) {
  PreparedData out;
  out.header = data.header;
  if (out.header.horizon == 0 && !data.samples.empty()) out.header.horizon = data.samples.front().actions.size();
  out.layout = {data.header.num_tasks, data.header.num_actions, data.header.obs_dim};
  Split parts = split(data.samples, config.split_ratio, config.split_seed);
  if (parts.train.empty()) throw PreconditionError("prepare: training split is empty");
  const auto normalizer = MinMaxNormalizer::fit(parts.train);
  out.train = normalizer.apply(parts.train);
  out.test = normalizer.apply(parts.test);
  return out;
}

/// File locations for one run. Stages read and write checkpoints here.
struct Workspace {
  std::filesystem::path vae_ckpt;
  std::filesystem::path classifier_ckpt;
  std::filesystem::path denoiser_ckpt;
  std::filesystem::path out_dir;

  static Workspace in(const std::filesystem::path& dir) {
    return {dir / "vae.ckpt", dir / "classifier.ckpt", dir / "denoiser.ckpt", dir};
  }
  std::filesystem::path curve(Stage stage) const { return out_dir / (std::string(to_string(stage)) + "_loss.csv"); }
  std::filesystem::path checkpoint(Stage stage) const {
    switch (stage) {
      case Stage::Vae: return vae_ckpt;
      case Stage::Classifier: return classifier_ckpt;
      case Stage::Diffusion: return denoiser_ckpt;
    }
    return {};
  }
  std::filesystem::path report_json() const { return out_dir / "report.json"; }
  std::filesystem::path report_csv() const { return out_dir / "report.csv"; }
};

struct LossRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double recon = 0.0;  // VAE only
  double kl = 0.0;     // VAE only
};

struct StageResult {
  Stage stage = Stage::Vae;
  std::vector<LossRecord> curve;
  std::filesystem::path checkpoint;
  std::uint64_t vae_checksum_before = 0;
  std::uint64_t vae_checksum_after = 0;
};

// ---------------------------------------------------------------------------
// Checkpoint persistence with architecture records

inline void save_vae(const std::filesystem::path& path, const Vae& vae) {
  auto tensors = to_named(vae.params());
  const auto& c = vae.config();
  tensors.push_back({"vae.meta.arch", Tensor::vector({static_cast<double>(c.input_dim), static_cast<double>(c.hidden),
                                                      static_cast<double>(c.latent)})});
  save_checkpoint(path, tensors);
}

inline void save_classifier(const std::filesystem::path& path, const TaskClassifier& classifier) {
  auto tensors = to_named(classifier.params());
  tensors.push_back({"classifier.meta.arch", Tensor::vector(classifier.arch_record())});
  save_checkpoint(path, tensors);
}

inline void save_denoiser(const std::filesystem::path& path, const Denoiser& denoiser, const RunConfig& config,
                          const StateLayout& layout) {
  auto tensors = to_named(denoiser.params());
  tensors.push_back({"denoiser.meta.arch", Tensor::vector(denoiser.arch_record())});
  tensors.push_back({"denoiser.meta.layout", Tensor::vector({static_cast<double>(layout.num_tasks),
                                                             static_cast<double>(layout.num_actions),
                                                             static_cast<double>(layout.obs_dim)})});
  tensors.push_back({"denoiser.meta.schedule",
                     Tensor::vector({static_cast<double>(config.diffusion_steps), config.beta_start, config.beta_end,
                                     config.onehot_scale})});
  save_checkpoint(path, tensors);
}

namespace detail {

inline std::vector<NamedTensor> load_required(const std::filesystem::path& path, const char* what) {
  if (!std::filesystem::exists(path)) {
    throw PrerequisiteError(std::string(what) + " checkpoint '" + path.string() + "' not found; train that stage first");
  }
  return load_checkpoint(path);
}

inline void expect_record(const std::vector<NamedTensor>& tensors, const std::string& name,
                          const std::vector<double>& expected, const std::string& path) {
  const Tensor& record = find_tensor(tensors, name);
  if (std::vector<double>(record.values()) != expected) {
    throw DimensionError(path + ": '" + name + "' does not match the current configuration");
  }
}

}  // namespace detail

inline Vae load_vae(const std::filesystem::path& path, std::size_t input_dim) {
  const auto tensors = detail::load_required(path, "vae");
  VaeConfig cfg;
  cfg.input_dim = input_dim;
  detail::expect_record(tensors, "vae.meta.arch",
                        {static_cast<double>(cfg.input_dim), static_cast<double>(cfg.hidden),
                         static_cast<double>(cfg.latent)},
                        path.string());
  Vae vae(cfg, 0);
  restore_params(vae.params(), tensors);
  return vae;
}

inline TaskClassifier load_classifier(const std::filesystem::path& path, const ClassifierConfig& cfg) {
  const auto tensors = detail::load_required(path, "classifier");
  TaskClassifier classifier(cfg, 0);
  detail::expect_record(tensors, "classifier.meta.arch", classifier.arch_record(), path.string());
  restore_params(classifier.params(), tensors);
  return classifier;
}

inline Denoiser load_denoiser(const std::filesystem::path& path, const RunConfig& config, const StateLayout& layout) {
  const auto tensors = detail::load_required(path, "denoiser");
  DenoiserConfig cfg;
  cfg.feature_dim = layout.width();
  cfg.total_steps = config.diffusion_steps;
  Denoiser denoiser(cfg, 0);
  detail::expect_record(tensors, "denoiser.meta.arch", denoiser.arch_record(), path.string());
  detail::expect_record(tensors, "denoiser.meta.layout",
                        {static_cast<double>(layout.num_tasks), static_cast<double>(layout.num_actions),
                         static_cast<double>(layout.obs_dim)},
                        path.string());
  detail::expect_record(tensors, "denoiser.meta.schedule",
                        {static_cast<double>(config.diffusion_steps), config.beta_start, config.beta_end,
                         config.onehot_scale},
                        path.string());
  restore_params(denoiser.params(), tensors);
  return denoiser;
}

inline VaeConfig vae_config_for(const PreparedData& data) {
  VaeConfig cfg;
  cfg.input_dim = data.header.obs_dim + data.header.text_dim;
  return cfg;
}

inline ClassifierConfig classifier_config_for(const PreparedData& data) {
  ClassifierConfig cfg;
  cfg.obs_dim = data.header.obs_dim;
  cfg.num_tasks = data.header.num_tasks;
  return cfg;
}

inline void write_curve(const std::filesystem::path& path, Stage stage, const std::vector<LossRecord>& curve) {
  std::string out = stage == Stage::Vae ? "step,epoch,lr,loss,recon_bce,kl\n" : "step,epoch,lr,loss\n";
  char buf[160];
  for (const auto& r : curve) {
    if (stage == Stage::Vae) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g,%.17g\n", r.step, r.epoch, r.lr, r.loss, r.recon, r.kl);
    } else {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g\n", r.step, r.epoch, r.lr, r.loss);
    }
    out += buf;
  }
  write_file_atomic(path, out);
}

namespace detail {

template <typename T>
std::vector<T> draw_batch(const std::vector<T>& pool, std::size_t size, Rng& rng) {
  std::vector<T> out;
  out.reserve(size);
  for (std::size_t i = 0; i < size; ++i) out.push_back(pool[rng.uniform_int(pool.size())]);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stages

/// Trains one stage and writes its checkpoint and loss curve. The diffusion
/// stage loads and freezes the VAE first and verifies it is untouched after.
inline StageResult run_stage(Stage stage, const RunConfig& config, const PreparedData& data, const Workspace& ws,
                             const LogFn& log = {}) {
  if (data.train.empty()) throw PreconditionError("run_stage: empty training split");
  StageResult result;
  result.stage = stage;
  result.checkpoint = ws.checkpoint(stage);
  const StageParams& params = stage == Stage::Vae          ? config.vae
                              : stage == Stage::Classifier ? config.classifier
                                                           : config.diffusion;
  const LRSchedule schedule = params.lr_schedule();
  Rng rng(derive_seed(config.seed, 0x57A6E, static_cast<std::uint64_t>(stage)));
  auto report_epoch = [&](std::size_t step) {
    if (log && (step + 1) % params.steps_per_epoch == 0) {
      const auto& r = result.curve.back();
      log(std::string(to_string(stage)) + " epoch " + std::to_string(r.epoch + 1) + "/" +
          std::to_string(params.epochs) + " loss " + std::to_string(r.loss));
    }
  };

  if (stage == Stage::Vae) {
    Vae vae(vae_config_for(data), derive_seed(config.seed, 0x7AE));
    std::vector<std::vector<double>> states;
    for (const Sample& s : data.train) {
      states.push_back(Vae::state_vector(s.obs_start, s.text_start));
      states.push_back(Vae::state_vector(s.obs_goal, s.text_goal));
    }
    const std::size_t dim = vae.config().input_dim;
    for (std::size_t step = 0; step < params.total_steps(); ++step) {
      const auto rows = detail::draw_batch(states, params.batch, rng);
      std::vector<double> flat;
      for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
      const double lr = lr_at(step, schedule);
      const VaeLoss l = vae.train_step(Tensor({rows.size(), dim}, std::move(flat)), lr, rng, params.weight_decay);
      result.curve.push_back({step, step / params.steps_per_epoch, lr, l.total(), l.recon_bce, l.kl});
      report_epoch(step);
    }
    save_vae(result.checkpoint, vae);
  } else if (stage == Stage::Classifier) {
    TaskClassifier classifier(classifier_config_for(data), derive_seed(config.seed, 0xC1A));
    for (std::size_t step = 0; step < params.total_steps(); ++step) {
      const double lr = lr_at(step, schedule);
      const double loss = classifier.train_step(detail::draw_batch(data.train, params.batch, rng), lr,
                                                params.weight_decay);
      result.curve.push_back({step, step / params.steps_per_epoch, lr, loss, 0.0, 0.0});
      report_epoch(step);
    }
    save_classifier(result.checkpoint, classifier);
  } else {
    Vae vae = load_vae(ws.vae_ckpt, data.header.obs_dim + data.header.text_dim);
    vae.freeze();
    result.vae_checksum_before = vae.params().checksum();
    DenoiserConfig dcfg;
    dcfg.feature_dim = data.layout.width();
    dcfg.total_steps = config.diffusion_steps;
    Denoiser denoiser(dcfg, derive_seed(config.seed, 0xDE));
    const NoiseSchedule noise = config.schedule();
    const DiffusionOptions options = config.diffusion_options();
    for (std::size_t step = 0; step < params.total_steps(); ++step) {
      const double lr = lr_at(step, schedule);
      const Tensor loss = diffusion_loss(detail::draw_batch(data.train, params.batch, rng), data.layout, noise,
                                         denoiser, vae, options, rng);
      denoiser.params().zero_grads();
      backward(loss);
      adamw_step(denoiser.params(), lr, params.weight_decay);
      result.curve.push_back({step, step / params.steps_per_epoch, lr, loss.item(), 0.0, 0.0});
      report_epoch(step);
    }
    result.vae_checksum_after = vae.params().checksum();
    if (result.vae_checksum_after != result.vae_checksum_before) {
      throw StateError("frozen VAE parameters changed during diffusion training");
    }
    save_denoiser(result.checkpoint, denoiser, config, data.layout);
  }
  write_curve(ws.curve(stage), stage, result.curve);
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

/// Uniformly random plans, one per test sample.
inline double random_planner_sr(const std::vector<Sample>& test, std::size_t num_actions, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x8A2D));
  std::vector<PlanPair> pairs;
  for (const Sample& s : test) {
    Plan p;
    for (std::size_t t = 0; t < s.actions.size(); ++t) p.push_back(rng.uniform_int(num_actions));
    pairs.push_back({std::move(p), s.actions});
  }
  return success_rate(pairs);
}

struct EvaluationDetail {
  PlanReport report;
  std::vector<PlanPair> pairs;           // raw predictions
  std::vector<std::size_t> predicted_tasks;
  MetricSet raw;
  MetricSet boundary;
};

/// Predicts the task, samples a plan per test sample, scores it. Plans are
/// scored as generated unless gt_boundary_eval is set.
inline EvaluationDetail evaluate_detailed(const RunConfig& config, const PreparedData& data, const Workspace& ws,
                                          const LogFn& log = {}) {
  if (data.test.empty()) throw PreconditionError("evaluate: empty test split");
  Vae vae = load_vae(ws.vae_ckpt, data.header.obs_dim + data.header.text_dim);
  vae.freeze();
  const TaskClassifier classifier = load_classifier(ws.classifier_ckpt, classifier_config_for(data));
  const Denoiser denoiser = load_denoiser(ws.denoiser_ckpt, config, data.layout);
  const NoiseSchedule noise = config.schedule();
  const DiffusionOptions options = config.diffusion_options();
  const std::size_t horizon = data.test.front().actions.size();

  EvaluationDetail out;
  const auto predictions = classifier.predict_batch(data.test);
  std::size_t task_hits = 0;
  std::vector<PlanRequest> requests;
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    out.predicted_tasks.push_back(predictions[i].task);
    task_hits += predictions[i].task == data.test[i].task ? 1 : 0;
    requests.push_back({data.test[i], predictions[i].task, derive_seed(config.seed, 0xE7A1, i)});
  }
  // Chunks are independent (per-request seeds), so they run concurrently.
  const std::size_t workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  const std::size_t chunk = std::max<std::size_t>(1, (requests.size() + workers - 1) / workers);
  std::vector<std::future<std::vector<DiffusionState>>> jobs;
  for (std::size_t begin = 0; begin < requests.size(); begin += chunk) {
    const std::size_t end = std::min(requests.size(), begin + chunk);
    std::vector<PlanRequest> part(requests.begin() + static_cast<std::ptrdiff_t>(begin),
                                  requests.begin() + static_cast<std::ptrdiff_t>(end));
    jobs.push_back(std::async(std::launch::async, [&, part = std::move(part)] {
      return sample_plans(part, horizon, data.layout, noise, denoiser, vae, options);
    }));
  }
  for (auto& job : jobs) {
    for (const auto& state : job.get()) {
      const std::size_t i = out.pairs.size();
      out.pairs.push_back({decode_plan(state), data.test[i].actions});
    }
  }
  if (log) log("eval sampled " + std::to_string(out.pairs.size()) + " plans");

  out.raw = compute_metrics(out.pairs, config.macc_mode);
  out.boundary = compute_metrics(apply_gt_boundary(out.pairs), config.macc_mode);
  if (out.boundary.sr < out.raw.sr) throw StateError("ground-truth boundary protocol lowered SR");

  PlanReport& r = out.report;
  r.dataset = config.dataset;
  r.curation = data.header.curation;
  r.horizon = horizon;
  r.metrics = config.gt_boundary_eval ? out.boundary : out.raw;
  r.num_plans = out.pairs.size();
  const auto scored = config.gt_boundary_eval ? apply_gt_boundary(out.pairs) : out.pairs;
  r.num_success = 0;
  for (const auto& p : scored) r.num_success += p.predicted == p.truth ? 1 : 0;
  r.gt_boundary = config.gt_boundary_eval;
  r.macc_mode = to_string(config.macc_mode);
  r.fingerprint = config.fingerprint();
  r.task_accuracy = static_cast<double>(task_hits) / static_cast<double>(data.test.size());
  r.random_planner_sr = random_planner_sr(data.test, data.header.num_actions, config.seed);
  r.use_eps = config.use_eps;
  r.inject_constraints = config.inject_constraints;
  write_report(ws.report_json(), ws.report_csv(), r);
  return out;
}

inline PlanReport evaluate(const RunConfig& config, const PreparedData& data, const Workspace& ws,
                           const LogFn& log = {}) {
  return evaluate_detailed(config, data, ws, log).report;
}

/// Trains VAE, classifier and diffusion in order, then evaluates.
inline PlanReport run_pipeline(const RunConfig& config, const PreparedData& data, const Workspace& ws,
                               const LogFn& log = {}) {
  run_stage(Stage::Vae, config, data, ws, log);
  run_stage(Stage::Classifier, config, data, ws, log);
  run_stage(Stage::Diffusion, config, data, ws, log);
  return evaluate(config, data, ws, log);
}

// ---------------------------------------------------------------------------
// Ablations

struct AblationVariant {
  std::string name;
  bool use_eps;
  bool inject_constraints;
};

inline const std::vector<AblationVariant>& ablation_variants() {
  static const std::vector<AblationVariant> variants = {
      {"full", true, true},
      {"no_eps", false, true},
      {"no_injection", true, false},
  };
  return variants;
}

/// Per seed: VAE and classifier are trained once and shared; each variant
/// retrains only the diffusion stage. Rows per (variant, seed) plus medians.
inline AblationTable ablation_suite(const RunConfig& base, const PreparedData& data,
                                    const std::filesystem::path& dir, const std::vector<std::uint64_t>& seeds,
                                    const LogFn& log = {}) {
  if (seeds.empty()) throw PreconditionError("ablation_suite: no seeds");
  AblationTable table;
  for (std::uint64_t seed : seeds) {
    RunConfig cfg = base;
    cfg.seed = seed;
    const std::filesystem::path seed_dir = dir / ("seed_" + std::to_string(seed));
    const Workspace shared = Workspace::in(seed_dir);
    run_stage(Stage::Vae, cfg, data, shared, log);
    run_stage(Stage::Classifier, cfg, data, shared, log);
    for (const auto& variant : ablation_variants()) {
      RunConfig vcfg = cfg;
      vcfg.use_eps = variant.use_eps;
      vcfg.inject_constraints = variant.inject_constraints;
      Workspace ws = shared;
      ws.out_dir = seed_dir / variant.name;
      ws.denoiser_ckpt = ws.out_dir / "denoiser.ckpt";
      run_stage(Stage::Diffusion, vcfg, data, ws, log);
      const PlanReport report = evaluate(vcfg, data, ws, log);
      table.rows.push_back({variant.name, seed, report.metrics});
      if (log) log("ablation " + variant.name + " seed " + std::to_string(seed) + " SR " + std::to_string(report.metrics.sr));
    }
  }
  for (const auto& variant : ablation_variants()) {
    std::vector<double> sr, macc, miou;
    for (const auto& r : table.rows) {
      if (r.variant != variant.name) continue;
      sr.push_back(r.metrics.sr);
      macc.push_back(r.metrics.macc);
      miou.push_back(r.metrics.msiou);
    }
    AblationRow m;
    m.variant = variant.name;
    m.metrics.sr = median_of(sr);
    m.metrics.macc = median_of(macc);
    m.metrics.msiou = median_of(miou);
    table.medians.push_back(m);
  }
  write_file_atomic(dir / "ablation.csv", to_csv(table));
  write_file_atomic(dir / "ablation.json", to_json(table).dump(2) + "\n");
  return table;
}

}  // namespace clad
