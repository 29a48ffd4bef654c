#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wordacq/ngram.hpp"
#include "wordacq/trajectory.hpp"

namespace wordacq {

// KL(ref || pred) in bits with the 0 log 0 convention; throws when the
// reference puts mass where the prediction has none.
double kl_divergence_bits(const std::vector<double>& reference,
                          const std::vector<double>& predicted);

struct EvalSampleEntry {
  uint32_t sequence_index;
  int pos;          // valid for both direction modes: 1 <= pos <= len - 2
  uint32_t truth;   // token originally at pos
};

struct EvalSample {
  std::vector<EvalSampleEntry> entries;
  uint64_t seed = 0;
};

// One uniformly chosen interior position for each of `size` sequences sampled
// without replacement; deterministic in the seed.
EvalSample build_eval_sample(const TokenizedCorpus& eval_corpus, size_t size, uint64_t seed);

struct MeanKL {
  double uniform = 0.0;
  double unigram = 0.0;
  double bigram = 0.0;
  double onehot = 0.0;  // equals mean surprisal of the true tokens
};

// Precomputed per-item reference data shared by every checkpoint: the n-gram
// context ids and the (checkpoint-independent) reference entropies.
struct KLRefData {
  const NGramTable* ngram = nullptr;
  Direction direction = Direction::Unidirectional;
  uint32_t vocab = 0;
  std::vector<double> unigram_dist;
  double h_unigram = 0.0;
  double log2_vocab = 0.0;
  std::vector<uint32_t> prev, next, truth;
  std::vector<double> h_bigram;

  static KLRefData build(const TokenizedCorpus& corpus, const EvalSample& sample,
                         const NGramTable& ngram, Direction direction);
};

// Streams per-item log2-softmax rows into the four KL accumulators; one
// instance per checkpoint evaluation (fixed accumulation order).
class KLAccumulator {
 public:
  explicit KLAccumulator(const KLRefData& refs);
  void add(size_t item, const Eigen::Ref<const Vec>& logits);
  MeanKL mean() const;

 private:
  const KLRefData& refs_;
  Vec log2p_;
  std::vector<double> scratch_;
  MeanKL sums_;
  size_t count_ = 0;
};

// Test helper: the mean KL profile of a model frozen at one fixed
// distribution (e.g. exactly the unigram distribution).
MeanKL mean_kl_for_fixed_distribution(const std::vector<double>& dist, const KLRefData& refs);

struct KLTrace {
  std::string model;
  std::vector<int64_t> steps;
  std::vector<MeanKL> values;  // aligned with steps
};

KLTrace kl_trace(const CheckpointArchive& archive, const TokenizedCorpus& eval_corpus,
                 const EvalSample& sample, const NGramTable& ngram, int n_threads = 0);

void save_kl_trace_csv(const KLTrace& trace, const std::filesystem::path& p);
KLTrace load_kl_trace_csv(const std::filesystem::path& p);

struct PhaseStats {
  int64_t dip_step = 0;   // step of the global minimum
  double dip_depth = 0.0; // first value - min value
  double rise = 0.0;      // last value - min value
  bool phase = false;     // dip_depth > 0 and rise > margin
};

struct PhaseSummary {
  PhaseStats unigram;
  PhaseStats bigram;
  bool unigram_dip_before_bigram = false;
  double margin = 0.05;
};

PhaseSummary detect_phases(const KLTrace& trace, double rise_margin = 0.05);

std::string phase_summary_json(const PhaseSummary& s, const std::string& model);

}  // namespace wordacq
