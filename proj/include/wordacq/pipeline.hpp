#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wordacq/config.hpp"

namespace wordacq {

// Exclusive access to a run directory via an O_EXCL lock file.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path lock_path_;
  bool held_ = false;
};

struct StageResult {
  bool skipped = false;  // inputs and outputs matched the recorded manifest
  std::vector<std::string> outputs;
};

// Stage orchestration over one run directory. Every stage records a manifest
// (input hashes, config fingerprint, output hashes); rerunning with matching
// hashes is a no-op, and downstream stages refuse to run without their
// upstream manifests.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  const PipelineConfig& config() const { return config_; }

  StageResult prepare(bool dump_ngram_tables = false);
  StageResult train(Architecture arch);
  StageResult curves(Architecture arch);
  StageResult fit_aoa(Architecture arch);
  StageResult regress(Architecture arch, bool sweep_cutoff_proportions = false);
  StageResult kl_trace_stage(Architecture arch);

  // Read-only commands.
  std::string report_first_last(const std::vector<Architecture>& archs,
                                double percentile = 0.05) const;
  std::vector<std::filesystem::path> plot_curves(Architecture arch,
                                                 const std::vector<std::string>& words) const;
  std::filesystem::path plot_kl(Architecture arch) const;

  // Artifact paths.
  std::filesystem::path vocab_path() const;
  std::filesystem::path train_corpus_path() const;
  std::filesystem::path eval_corpus_path() const;
  std::filesystem::path predictors_path() const;
  std::filesystem::path ngram_path() const;
  std::filesystem::path model_dir(Architecture arch) const;
  std::filesystem::path curves_path(Architecture arch) const;
  std::filesystem::path aoa_path(Architecture arch) const;
  std::filesystem::path regression_report_path(Architecture arch) const;
  std::filesystem::path sweep_report_path(Architecture arch) const;
  std::filesystem::path kl_trace_path(Architecture arch) const;
  std::filesystem::path phase_summary_path(Architecture arch) const;

 private:
  std::filesystem::path manifest_path(const std::string& stage) const;
  void require_manifest(const std::string& stage) const;
  bool manifest_matches(const std::string& stage,
                        const std::vector<std::filesystem::path>& inputs,
                        const std::string& config_fingerprint,
                        const std::vector<std::filesystem::path>& outputs) const;
  void write_manifest(const std::string& stage,
                      const std::vector<std::filesystem::path>& inputs,
                      const std::string& config_fingerprint,
                      const std::vector<std::filesystem::path>& outputs) const;

  PipelineConfig config_;
};

}  // namespace wordacq
