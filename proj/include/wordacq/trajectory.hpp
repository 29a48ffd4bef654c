#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "wordacq/corpus.hpp"
#include "wordacq/models.hpp"

namespace wordacq {

struct ScheduleTier {
  int64_t every;
  int64_t until;
};

struct CheckpointSchedule {
  std::vector<ScheduleTier> tiers;
  int64_t total_steps = 0;
  std::vector<int64_t> steps;  // sorted, unique, last == total_steps
};

// Union of {every, 2*every, ..., until} over the tiers, deduplicated. Tiers
// must be ordered by bound, intervals must divide their bounds, and the last
// bound must equal total.
CheckpointSchedule build_checkpoint_schedule(const std::vector<ScheduleTier>& tiers,
                                             int64_t total_steps);

// The four-tier schedule from the training recipe (208 steps at 1M total).
std::vector<ScheduleTier> paper_schedule_tiers(int64_t total_steps);

struct CurvePoint {
  int64_t step;
  double mean_surprisal_bits;
  int64_t n_samples;
};

struct LearningCurve {
  std::string word;
  Direction direction = Direction::Unidirectional;
  bool under_sampled = false;
  std::vector<CurvePoint> points;  // strictly increasing steps
};

void save_learning_curves_csv(const std::vector<LearningCurve>& curves,
                              const std::filesystem::path& p);
std::vector<LearningCurve> load_learning_curves_csv(const std::filesystem::path& p);

// ---- batched evaluation over (sequence, position) items ---------------------

struct EvalItem {
  uint32_t sequence_index;
  int pos;
};

// Precomputed batching of eval items for one corpus + architecture; reusable
// across checkpoints (read-only once built).
class EvalPlan {
 public:
  EvalPlan(const TokenizedCorpus& corpus, const std::vector<EvalItem>& items,
           Architecture arch, int max_rows_per_batch = 128);

  // fn(item_index, logits) invoked once per item (logits = one contiguous
  // column); item order within a batch is fixed, and batches run in plan
  // order (deterministic reductions).
  void run(const LMParameters& params,
           const std::function<void(size_t, const Eigen::Ref<const Vec>&)>& fn) const;

  size_t item_count() const { return n_items_; }

 private:
  struct PlannedBatch {
    TokenBatch tokens;
    std::vector<PredictRequest> requests;
    std::vector<size_t> item_index;
  };
  std::vector<PlannedBatch> batches_;
  size_t n_items_ = 0;
};

// Mean of -log2 P(true token) over the set's occurrences for one checkpoint.
std::pair<double, int64_t> evaluate_word_surprisal(const LMParameters& params,
                                                   const TokenizedCorpus& eval_corpus,
                                                   const OccurrenceSet& occurrences);

// One curve per occurrence set with a point at every archived step (step 0
// included when present), evaluated in parallel across checkpoints.
std::vector<LearningCurve> build_learning_curves(const CheckpointArchive& archive,
                                                 const TokenizedCorpus& eval_corpus,
                                                 const std::vector<OccurrenceSet>& sets,
                                                 int n_threads = 0);

}  // namespace wordacq
