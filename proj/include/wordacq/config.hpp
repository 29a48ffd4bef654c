#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wordacq/models.hpp"
#include "wordacq/trajectory.hpp"

namespace wordacq {

// Pipeline configuration: one INI-style file with five sections plus the
// top-level run_dir / seed. Unknown sections or keys are rejected; every run
// writes a resolved copy into the run directory.
struct PipelineConfig {
  std::filesystem::path run_dir = "runs/default";
  uint64_t seed = 1;

  struct CorpusSection {
    std::filesystem::path input;          // one sentence per line
    std::filesystem::path words;          // one target word per line
    std::filesystem::path concreteness;   // optional CSV word,score
    std::filesystem::path lexical_class;  // optional CSV word,class
    uint32_t vocab_max = 8200;
    uint64_t min_count = 1;
    uint32_t max_len = 64;
    double eval_fraction = 0.25;
  } corpus;

  struct ModelSection {
    int hidden = 64;
    int layers = 2;
    int heads = 4;
    int intermediate = 256;
    double dropout = 0.0;
    double mask_proportion = 0.15;
    double init_scale = 0.02;
    std::string init_dist = "normal";
  } model;

  struct TrainingSection {
    int batch = 16;
    int64_t steps = 20000;
    double learning_rate = 1e-4;
    int64_t warmup = 1000;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-6;
    double clip_norm = 1.0;
    int64_t log_every = 100;
  } training;

  struct CheckpointsSection {
    std::vector<ScheduleTier> tiers = {{100, 1000}, {500, 10000}, {1000, 20000}};
  } checkpoints;

  struct AnalysisSection {
    size_t max_samples = 512;
    size_t min_context = 8;
    size_t min_samples = 100;
    double proportion = 0.5;
    double smoothing_alpha = 0.01;
    size_t kl_sample = 16000;
    double phase_margin = 0.05;
    int threads = 0;  // 0: hardware concurrency
    bool quadratic_log_frequency = false;
  } analysis;

  ModelConfig model_config(Architecture arch, uint32_t vocab_size) const;
  TrainConfig train_config() const;

  std::string render() const;  // resolved copy, reparsable

  static PipelineConfig load(const std::filesystem::path& file,
                             const std::vector<std::string>& overrides = {});
  static PipelineConfig parse(const std::string& text,
                              const std::vector<std::string>& overrides = {},
                              const std::filesystem::path& base_dir = ".");
};

}  // namespace wordacq
