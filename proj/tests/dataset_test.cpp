#include <fstream>
#include <map>
#include <set>

#include "test_util.hpp"

namespace clad {
namespace {

using testing::TempDir;

// Video with constant per-step frames: step k shows value (k + 1) in every
// dimension, background is zero. Steps start at the given seconds.
Video fixture_video(const std::vector<double>& starts, double duration, std::size_t obs_dim = 2) {
  Video v;
  v.obs_dim = obs_dim;
  const auto frames = static_cast<std::size_t>(starts.back() + duration + 5);
  v.frames.assign(frames * obs_dim, 0.0);
  for (std::size_t k = 0; k < starts.size(); ++k) {
    v.steps.push_back({k, starts[k], starts[k] + duration});
    for (auto s = static_cast<std::size_t>(starts[k]); s < static_cast<std::size_t>(starts[k] + duration); ++s) {
      for (std::size_t d = 0; d < obs_dim; ++d) v.frames[s * obs_dim + d] = static_cast<double>(k + 1);
    }
  }
  return v;
}

TEST(Curation, PdppWindowsAroundFirstAndLastAction) {
  const auto [start, goal] = observation_windows(10.0, 50.0, CurationMode::Pdpp);
  EXPECT_EQ(start, (TimeWindow{10.0, 13.0}));
  EXPECT_EQ(goal, (TimeWindow{48.0, 51.0}));
}

TEST(Curation, KeppWindowsAroundFirstAndLastAction) {
  const auto [start, goal] = observation_windows(10.0, 50.0, CurationMode::Kepp);
  EXPECT_EQ(start, (TimeWindow{9.0, 12.0}));
  EXPECT_EQ(goal, (TimeWindow{49.0, 52.0}));
}

TEST(Curation, WindowMeanAveragesInclusiveSeconds) {
  // first step frames 10..15 hold 1, second step (start 50) frames 50..55 hold 2.
  const Video v = fixture_video({10.0, 50.0}, 6.0);
  const auto [pdpp_s, pdpp_g] = curate_windows(v, 0, 1, CurationMode::Pdpp);
  EXPECT_EQ(pdpp_s[0], 1.0);                // seconds 10..13 all inside step 0
  EXPECT_DOUBLE_EQ(pdpp_g[0], 2.0 * 2 / 4);  // seconds 48,49 background; 50,51 step 1
  const auto [kepp_s, kepp_g] = curate_windows(v, 0, 1, CurationMode::Kepp);
  EXPECT_DOUBLE_EQ(kepp_s[0], 3.0 / 4);      // second 9 background, 10..12 step 0
  EXPECT_DOUBLE_EQ(kepp_g[0], 2.0 * 3 / 4);  // second 49 background, 50..52 step 1
  EXPECT_NE(pdpp_s, kepp_s);
}

TEST(Curation, WindowsClampToVideoAndRejectEmpty) {
  const Video v = fixture_video({0.0, 8.0}, 4.0);
  const auto [s, g] = curate_windows(v, 0, 1, CurationMode::Kepp);  // start window begins at -1
  EXPECT_EQ(s[0], 1.0);
  EXPECT_THROW(window_mean(v, {500.0, 503.0}), PreconditionError);
  EXPECT_THROW(curate_windows(v, 1, 0, CurationMode::Pdpp), PreconditionError);
}

TEST(Corpus, NiveScaleVideoCount) {
  CorpusConfig cfg;
  cfg.num_tasks = 5;
  cfg.num_actions = 12;
  cfg.videos_per_task = 30;
  const Corpus corpus = generate_corpus(cfg);
  EXPECT_EQ(corpus.videos.size(), 150u);
}

TEST(Corpus, NoiseFreeFramesEqualActionRows) {
  CorpusConfig cfg;
  cfg.noise_sd = 0.0;
  cfg.videos_per_task = 3;
  const Corpus corpus = generate_corpus(cfg);
  for (const Video& v : corpus.videos) {
    for (const Step& step : v.steps) {
      for (auto s = static_cast<std::size_t>(step.start_sec); s < static_cast<std::size_t>(step.end_sec); ++s) {
        const auto frame = v.frame(s);
        const auto row = corpus.action_row(step.action);
        ASSERT_TRUE(std::equal(frame.begin(), frame.end(), row.begin()));
      }
    }
  }
}

TEST(Corpus, NoiseFreeSingleActionWindowReturnsRowExactly) {
  CorpusConfig cfg;
  cfg.noise_sd = 0.0;
  cfg.videos_per_task = 2;
  const Corpus corpus = generate_corpus(cfg);
  for (const Video& v : corpus.videos) {
    // PDPP start window [t, t+3] lies inside a step lasting at least 4 s.
    for (std::size_t k = 0; k + 1 < v.steps.size(); ++k) {
      const auto [start, goal] = curate_windows(v, k, k + 1, CurationMode::Pdpp);
      const auto row = corpus.action_row(v.steps[k].action);
      ASSERT_TRUE(std::equal(start.begin(), start.end(), row.begin()));
    }
  }
}

TEST(Corpus, SameSeedIsIdentical) {
  CorpusConfig cfg;
  cfg.videos_per_task = 5;
  const Corpus a = generate_corpus(cfg);
  const Corpus b = generate_corpus(cfg);
  EXPECT_EQ(a.action_table, b.action_table);
  EXPECT_EQ(a.chains, b.chains);
  ASSERT_EQ(a.videos.size(), b.videos.size());
  for (std::size_t i = 0; i < a.videos.size(); ++i) EXPECT_EQ(a.videos[i].frames, b.videos[i].frames);
  cfg.seed = 1;
  EXPECT_NE(generate_corpus(cfg).action_table, a.action_table);
}

TEST(Corpus, InfeasibleConfigIsReported) {
  CorpusConfig cfg;
  cfg.num_tasks = 8;
  cfg.num_actions = 5;
  EXPECT_THROW(generate_corpus(cfg), ConfigError);
}

TEST(Corpus, GrammarIsIdentifiable) {
  // For every horizon 3..6, the first action plus either the last action or
  // the unordered {penultimate, last} pair determines task and middle actions.
  const Corpus corpus = generate_corpus(CorpusConfig{});
  std::set<std::size_t> starts;
  for (const auto& chain : corpus.chains) starts.insert(chain.front());
  EXPECT_EQ(starts.size(), corpus.chains.size());
  for (std::size_t h = 3; h <= 6; ++h) {
    std::map<std::pair<std::size_t, std::size_t>, std::pair<std::size_t, std::vector<std::size_t>>> by_last;
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::pair<std::size_t, std::vector<std::size_t>>> by_blend;
    for (std::size_t task = 0; task < corpus.chains.size(); ++task) {
      const auto& chain = corpus.chains[task];
      for (std::size_t i = 0; i + h <= chain.size(); ++i) {
        const std::vector<std::size_t> window(chain.begin() + static_cast<long>(i), chain.begin() + static_cast<long>(i + h));
        const std::pair value{task, window};
        const auto pen = window[h - 2], last = window[h - 1];
        auto [it, fresh] = by_last.emplace(std::pair{window.front(), last}, value);
        if (!fresh) EXPECT_EQ(it->second, value);
        auto [jt, fresh2] = by_blend.emplace(std::tuple{window.front(), std::min(pen, last), std::max(pen, last)}, value);
        if (!fresh2) EXPECT_EQ(jt->second, value);
      }
    }
  }
}

TEST(Slide, CountsAndContents) {
  CorpusConfig cfg;
  cfg.videos_per_task = 4;
  const Corpus corpus = generate_corpus(cfg);
  std::size_t expected = 0;
  for (const Video& v : corpus.videos) expected += v.steps.size() >= 3 ? v.steps.size() - 2 : 0;
  EXPECT_EQ(curate_corpus(corpus, 3, CurationMode::Pdpp).size(), expected);

  const Video& v = corpus.videos.front();
  const auto samples = slide_horizon(corpus, v, 3, CurationMode::Pdpp);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(samples[k].actions[j], v.steps[k + j].action);
    EXPECT_EQ(samples[k].task, v.task);
  }
}

TEST(Slide, FiveStepsGiveThreeAndTwoStepsGiveNone) {
  Corpus corpus;
  corpus.config.obs_dim = 2;
  corpus.config.text_dim = 1;
  corpus.language_table.assign(8, 0.5);
  const Video five = fixture_video({0, 6, 12, 18, 24}, 5.0);
  const Video two = fixture_video({0, 6}, 5.0);
  EXPECT_EQ(slide_horizon(corpus, five, 3, CurationMode::Pdpp).size(), 3u);
  EXPECT_EQ(slide_horizon(corpus, two, 3, CurationMode::Pdpp).size(), 0u);
  EXPECT_THROW(slide_horizon(corpus, five, 1, CurationMode::Pdpp), PreconditionError);
}

std::vector<Sample> numbered_samples(std::size_t n) {
  std::vector<Sample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].task = i % 3;
    out[i].actions = {i, i + 1, i + 2};
    out[i].obs_start = {static_cast<double>(i)};
    out[i].obs_goal = {static_cast<double>(2 * i)};
    out[i].text_start = {0.0};
    out[i].text_goal = {1.0};
  }
  return out;
}

TEST(Split, SeventyThirtyDeterministicAndComplete) {
  const auto samples = numbered_samples(100);
  const Split a = split(samples, 0.7, 3);
  const Split b = split(samples, 0.7, 3);
  EXPECT_EQ(a.train.size(), 70u);
  EXPECT_EQ(a.test.size(), 30u);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  std::multiset<std::size_t> seen;
  for (const auto* part : {&a.train, &a.test}) {
    for (const Sample& s : *part) seen.insert(s.actions.front());
  }
  std::multiset<std::size_t> all;
  for (const Sample& s : samples) all.insert(s.actions.front());
  EXPECT_EQ(seen, all);
}

TEST(Normalizer, OutputsLieInUnitInterval) {
  RunConfig cfg;
  cfg.data.videos_per_task = 6;
  cfg.data.noise_sd = 0.1;
  const PreparedData data = prepare(synthesize(cfg), cfg);
  for (const auto* part : {&data.train, &data.test}) {
    for (const Sample& s : *part) {
      for (const auto* vec : {&s.obs_start, &s.obs_goal, &s.text_start, &s.text_goal}) {
        for (double v : *vec) {
          ASSERT_GE(v, 0.0);
          ASSERT_LE(v, 1.0);
        }
      }
    }
  }
}

ManifestData ten_samples() {
  RunConfig cfg;
  cfg.data.videos_per_task = 1;
  ManifestData data = synthesize(cfg);
  data.samples.resize(10);
  return data;
}

TEST(Manifest, RoundTripWithinFloatPrecision) {
  TempDir dir;
  const ManifestData data = ten_samples();
  write_manifest(dir.path(), data);
  const ManifestData back = read_manifest(dir.path());
  ASSERT_EQ(back.samples.size(), 10u);
  EXPECT_EQ(back.header.horizon, data.header.horizon);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(back.samples[i].task, data.samples[i].task);
    EXPECT_EQ(back.samples[i].actions, data.samples[i].actions);
    for (std::size_t d = 0; d < data.samples[i].obs_start.size(); ++d) {
      EXPECT_NEAR(back.samples[i].obs_start[d], data.samples[i].obs_start[d], 1e-6);
      EXPECT_NEAR(back.samples[i].obs_goal[d], data.samples[i].obs_goal[d], 1e-6);
    }
    for (std::size_t d = 0; d < data.samples[i].text_goal.size(); ++d) {
      EXPECT_NEAR(back.samples[i].text_goal[d], data.samples[i].text_goal[d], 1e-6);
    }
  }
}

TEST(Manifest, TruncatedFeatureFileIsFormatError) {
  TempDir dir;
  write_manifest(dir.path(), ten_samples());
  const auto features = dir / kFeatureFileName;
  std::filesystem::resize_file(features, std::filesystem::file_size(features) - 8);
  EXPECT_THROW(read_manifest(dir.path()), FormatError);
}

TEST(Manifest, EmptyManifestGivesNoSamples) {
  TempDir dir;
  ManifestData data = ten_samples();
  data.samples.clear();
  write_manifest(dir.path(), data);
  EXPECT_TRUE(read_manifest(dir.path()).samples.empty());
}

TEST(Manifest, MalformedJsonIsFormatError) {
  TempDir dir;
  std::ofstream(dir / "manifest.json") << "{ not json";
  EXPECT_THROW(read_manifest(dir.path()), FormatError);
}

TEST(Config, ParsesOverridesAndRejectsUnknownKeys) {
  KeyValueConfig kv = KeyValueConfig::parse("# comment\nhorizon = 4\ndiffusion.epochs = 7  # trailing\n");
  kv.set_override("seed=5");
  const RunConfig c = RunConfig::from(kv);
  EXPECT_EQ(c.horizon, 4u);
  EXPECT_EQ(c.diffusion.epochs, 7u);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_THROW(RunConfig::from(KeyValueConfig::parse("no_such_key = 1\n")), ConfigError);
  EXPECT_THROW(RunConfig::from(KeyValueConfig::parse("horizon = three\n")), ConfigError);
  EXPECT_THROW(RunConfig::from(KeyValueConfig::parse("curation = other\n")), ConfigError);
  EXPECT_THROW(KeyValueConfig::load("/nonexistent/clad.cfg"), ConfigError);
}

TEST(Config, RoundTripPreservesFingerprint) {
  RunConfig c;
  c.horizon = 5;
  c.use_eps = false;
  c.diffusion.peak_lr = 2.5e-4;
  const RunConfig back = RunConfig::from(c.to_kv());
  EXPECT_EQ(back.fingerprint(), c.fingerprint());
  c.seed = 1;
  EXPECT_NE(back.fingerprint(), c.fingerprint());
}

}  // namespace
}  // namespace clad
