#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wordacq/corpus.hpp"
#include "wordacq/numerics.hpp"
#include "wordacq/rng.hpp"

namespace wordacq {

enum class Architecture { Lstm, BiLstm, CausalTransformer, MaskedTransformer };

std::string architecture_name(Architecture a);
Architecture architecture_from_name(const std::string& s);

struct ModelConfig {
  Architecture architecture = Architecture::Lstm;
  uint32_t vocab_size = 0;
  int hidden_size = 64;
  int embedding_size = 64;  // tied head: must equal hidden_size
  int layers = 2;
  int heads = 4;                // transformers
  int intermediate_size = 256;  // transformer feed-forward width
  int max_seq_len = 64;         // transformer position table
  double dropout = 0.0;
  double mask_proportion = 0.15;  // masked LM only
  double init_scale = 0.02;
  std::string init_dist = "normal";  // normal | uniform
  uint64_t seed = 1;

  bool is_transformer() const {
    return architecture == Architecture::CausalTransformer ||
           architecture == Architecture::MaskedTransformer;
  }
  Direction direction() const {
    return (architecture == Architecture::Lstm || architecture == Architecture::CausalTransformer)
               ? Direction::Unidirectional
               : Direction::Bidirectional;
  }
  void validate() const;
};

struct LstmLayerParams {
  Tensor wx;  // 4h x in
  Tensor wh;  // 4h x h
  Tensor b;   // 1 x 4h, gate order [i f g o]; forget bias initialized to 1
};

struct TransformerLayerParams {
  Tensor ln1_g, ln1_b;
  Tensor wq, wk, wv, wo;  // h x h
  Tensor bq, bv, bo;      // 1 x h (keys take no bias: softmax cancels it)
  Tensor ln2_g, ln2_b;
  Tensor w1;  // h x ff
  Tensor b1;  // 1 x ff
  Tensor w2;  // ff x h
  Tensor b2;  // 1 x h
};

// Weight container for one model. The output head reuses tok_embed (single
// storage) plus a learned per-token bias.
struct LMParameters {
  ModelConfig config;

  Tensor tok_embed;  // V x h
  Tensor out_bias;   // 1 x V
  Tensor pos_embed;  // max_seq_len x h (transformers only)
  Tensor final_ln_g, final_ln_b;          // transformers only
  std::vector<LstmLayerParams> forward_stack;
  std::vector<LstmLayerParams> backward_stack;  // BiLSTM only
  std::vector<TransformerLayerParams> blocks;

  // Stable enumeration; defines init draw order and the checkpoint layout.
  std::vector<NamedParam> all();
  std::vector<NamedParam> all() const;  // const_cast escape for read paths

  void ensure_grads();
  void zero_grads();
  int64_t parameter_count() const;

  void save(const std::filesystem::path& p) const;
  // Loads values into an existing shell with matching config (no allocation
  // churn in checkpoint loops).
  void load_values(const std::filesystem::path& p);
};

// Allocates zeroed tensors of the right shapes without random init.
LMParameters make_parameter_shell(const ModelConfig& config);

// Zero-mean random init (normal with std init_scale, or uniform over
// +-init_scale); deterministic in config.seed. Gate biases start at zero
// except the LSTM forget gate (+1); norms start at (1, 0).
LMParameters init_model(const ModelConfig& config);

// A batch of same-length sequences, row-major ids (b * time + t).
struct TokenBatch {
  int batch = 0;
  int time = 0;
  std::vector<int32_t> ids;

  int32_t id(int b, int t) const { return ids[static_cast<size_t>(b) * time + t]; }
  int32_t& id(int b, int t) { return ids[static_cast<size_t>(b) * time + t]; }
};

struct TrainStepStats {
  double loss_sum_nats = 0.0;
  int64_t predictions = 0;
  double mean_loss() const {
    return predictions > 0 ? loss_sum_nats / static_cast<double>(predictions) : 0.0;
  }
};

// One optimization-ready pass: accumulates gradients of the mean prediction
// loss into params.grad. rng drives masked-LM corruption and dropout.
TrainStepStats train_step_forward_backward(LMParameters& params, const TokenBatch& batch,
                                           Rng& rng);

// (row in batch, position in sequence). Position semantics per architecture:
// unidirectional models return next-token logits for `pos` computed from the
// prefix [0, pos); bidirectional models return logits for `pos` from both
// sides. For the masked transformer the caller must already have substituted
// MASK at `pos`.
struct PredictRequest {
  int row;
  int pos;
};

// Returns logits laid out vocab_size x n_requests (each request's logits are
// one contiguous column).
Mat predict_logits(const LMParameters& params, const TokenBatch& batch,
                   const std::vector<PredictRequest>& requests);

// Single-sequence convenience; performs the MASK substitution itself for
// masked models. Returns the softmax distribution at `position`.
Vec predict_distribution(const LMParameters& params, const std::vector<uint32_t>& sequence,
                         int position);

// ---- training loop ---------------------------------------------------------

struct TrainConfig {
  int batch_size = 16;
  int64_t total_steps = 20000;
  double learning_rate = 1e-4;
  int64_t warmup_steps = 10000;
  AdamConfig adam;
  double clip_norm = 1.0;
  int64_t log_every = 100;
  uint64_t seed = 1;
};

struct TrainingRun {
  ModelConfig model_config;
  TrainConfig train_config;
  std::vector<int64_t> checkpoint_steps;
  std::vector<std::pair<int64_t, double>> loss_history;  // (step, mean loss nats)
  std::filesystem::path archive_dir;
};

// Trains from scratch, snapshotting parameters exactly at the scheduled steps
// (step 0 = initialization is always archived as the leading point). Writes
// manifest.json, index.json, loss.csv and per-step parameter blobs under
// archive_dir. Deterministic for a fixed seed.
TrainingRun train_model(const ModelConfig& model_config, const TrainConfig& train_config,
                        const TokenizedCorpus& train_corpus,
                        const std::vector<int64_t>& checkpoint_steps,
                        const std::filesystem::path& archive_dir,
                        const std::string& corpus_hash = "");

// Archive access for downstream stages.
struct CheckpointEntry {
  int64_t step;
  std::string file;
  std::string hash;
};

struct CheckpointArchive {
  std::filesystem::path dir;
  ModelConfig model_config;
  std::vector<CheckpointEntry> entries;

  static CheckpointArchive open(const std::filesystem::path& dir);
  LMParameters load_step(int64_t step) const;
  const CheckpointEntry& entry_for(int64_t step) const;
};

}  // namespace wordacq
