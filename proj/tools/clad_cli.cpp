// clad command line: gen-data, train, eval, ablate, inspect-checkpoint.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clad/clad.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kOther = 1,
  kUsage = 2,
  kConfig = 3,
  kPrerequisite = 4,
  kCheckpoint = 5,
  kData = 6,
  kNumeric = 7,
};

int exit_code_for(clad::ErrorKind kind) {
  using clad::ErrorKind;
  switch (kind) {
    case ErrorKind::Config: return kConfig;
    case ErrorKind::Prerequisite: return kPrerequisite;
    case ErrorKind::Format:
    case ErrorKind::Dimension: return kCheckpoint;
    case ErrorKind::Io:
    case ErrorKind::Label:
    case ErrorKind::Precondition: return kData;
    case ErrorKind::Numeric: return kNumeric;
    case ErrorKind::State: return kOther;
  }
  return kOther;
}

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  bool quiet = false;
};

clad::RunConfig load_config(const CommonArgs& args) {
  clad::KeyValueConfig kv;
  if (!args.config_path.empty()) kv = clad::KeyValueConfig::load(args.config_path);
  for (const auto& o : args.overrides) kv.set_override(o);
  return clad::RunConfig::from(kv);
}

// Data dimensions come from the manifest; the config only supplies training knobs.
clad::PreparedData load_data(clad::RunConfig& config, const std::string& data_dir) {
  const clad::ManifestData manifest = clad::read_manifest(data_dir);
  config.horizon = manifest.header.horizon;
  config.data.num_tasks = manifest.header.num_tasks;
  config.data.num_actions = manifest.header.num_actions;
  config.data.obs_dim = manifest.header.obs_dim;
  config.data.text_dim = manifest.header.text_dim;
  config.curation = clad::parse_curation_mode(manifest.header.curation);
  config.dataset = manifest.header.source;
  return clad::prepare(manifest, config);
}

clad::LogFn logger(const CommonArgs& args) {
  if (args.quiet) return {};
  return [](const std::string& line) { std::cerr << line << "\n"; };
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", args.overrides, "override a config key (key=value), repeatable");
  cmd->add_flag("-q,--quiet", args.quiet, "suppress progress output");
}

std::string shape_text(const clad::Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
  return s + "]";
}

void print_metrics(const clad::PlanReport& r) {
  std::printf("SR %.4f  mAcc %.4f  mSIoU %.4f  (plans %zu, task acc %.4f, random SR %.4f%s)\n", r.metrics.sr,
              r.metrics.macc, r.metrics.msiou, r.num_plans, r.task_accuracy, r.random_planner_sr,
              r.gt_boundary ? ", gt boundary" : "");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clad: latent-constrained diffusion for procedure planning"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string out_dir, data_dir, work_dir, stage_name = "all", ckpt_path;
  std::uint64_t seed = 0;
  bool gt_boundary = false;
  std::vector<std::uint64_t> seeds{0, 1, 2};

  auto* gen = app.add_subcommand("gen-data", "generate and curate a synthetic corpus");
  add_common(gen, common);
  gen->add_option("-o,--out", out_dir, "output directory")->required();
  auto* seed_opt = gen->add_option("--seed", seed, "corpus seed (overrides data.seed)");

  auto* train = app.add_subcommand("train", "train one stage or all stages");
  add_common(train, common);
  train->add_option("-d,--data", data_dir, "corpus directory or manifest.json")->required();
  train->add_option("-w,--workdir", work_dir, "checkpoint and report directory")->required();
  train->add_option("-s,--stage", stage_name, "vae | classifier | diffusion | all")
      ->check(CLI::IsMember({"vae", "classifier", "diffusion", "all"}));

  auto* eval = app.add_subcommand("eval", "evaluate trained checkpoints on the test split");
  add_common(eval, common);
  eval->add_option("-d,--data", data_dir, "corpus directory or manifest.json")->required();
  eval->add_option("-w,--workdir", work_dir, "checkpoint and report directory")->required();
  eval->add_flag("--gt-boundary", gt_boundary, "score with ground-truth first/last actions");

  auto* ablate = app.add_subcommand("ablate", "full / no_eps / no_injection comparison over seeds");
  add_common(ablate, common);
  ablate->add_option("-d,--data", data_dir, "corpus directory or manifest.json")->required();
  ablate->add_option("-w,--workdir", work_dir, "output directory")->required();
  ablate->add_option("--seeds", seeds, "seeds")->delimiter(',');

  auto* inspect = app.add_subcommand("inspect-checkpoint", "list tensor names and shapes");
  inspect->add_option("path", ckpt_path, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) {
      clad::RunConfig config = load_config(common);
      if (*seed_opt) config.data.seed = seed;
      const clad::ManifestData data = clad::synthesize(config);
      clad::write_manifest(out_dir, data);
      if (!common.quiet) std::fprintf(stderr, "wrote %zu samples to %s\n", data.samples.size(), out_dir.c_str());
    } else if (train->parsed()) {
      clad::RunConfig config = load_config(common);
      const clad::PreparedData data = load_data(config, data_dir);
      const clad::Workspace ws = clad::Workspace::in(work_dir);
      const auto log = logger(common);
      if (stage_name == "all") {
        for (clad::Stage s : {clad::Stage::Vae, clad::Stage::Classifier, clad::Stage::Diffusion}) {
          clad::run_stage(s, config, data, ws, log);
        }
      } else {
        clad::run_stage(clad::parse_stage(stage_name), config, data, ws, log);
      }
    } else if (eval->parsed()) {
      clad::RunConfig config = load_config(common);
      if (gt_boundary) config.gt_boundary_eval = true;
      const clad::PreparedData data = load_data(config, data_dir);
      print_metrics(clad::evaluate(config, data, clad::Workspace::in(work_dir), logger(common)));
    } else if (ablate->parsed()) {
      clad::RunConfig config = load_config(common);
      const clad::PreparedData data = load_data(config, data_dir);
      const auto table = clad::ablation_suite(config, data, work_dir, seeds, logger(common));
      std::fputs(clad::to_csv(table).c_str(), stdout);
    } else if (inspect->parsed()) {
      for (const auto& t : clad::load_checkpoint(ckpt_path)) {
        std::printf("%s %s\n", t.name.c_str(), shape_text(t.value.shape()).c_str());
      }
    }
  } catch (const clad::Error& e) {
    std::fprintf(stderr, "error[%s]: %s\n", clad::to_string(e.kind()), e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error[internal]: %s\n", e.what());
    return kOther;
  }
  return kOk;
}
