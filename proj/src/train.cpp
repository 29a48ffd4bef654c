#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unordered_set>

#include "model_internal.hpp"
#include "wordacq/errors.hpp"
#include "wordacq/io_util.hpp"
#include "wordacq/models.hpp"

namespace wordacq {

using nlohmann::json;

namespace {

json model_config_json(const ModelConfig& c) {
  return json{{"architecture", architecture_name(c.architecture)},
              {"vocab_size", c.vocab_size},
              {"hidden_size", c.hidden_size},
              {"embedding_size", c.embedding_size},
              {"layers", c.layers},
              {"heads", c.heads},
              {"intermediate_size", c.intermediate_size},
              {"max_seq_len", c.max_seq_len},
              {"dropout", c.dropout},
              {"mask_proportion", c.mask_proportion},
              {"init_scale", c.init_scale},
              {"init_dist", c.init_dist},
              {"seed", c.seed}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.architecture = architecture_from_name(j.at("architecture").get<std::string>());
  c.vocab_size = j.at("vocab_size").get<uint32_t>();
  c.hidden_size = j.at("hidden_size").get<int>();
  c.embedding_size = j.at("embedding_size").get<int>();
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.intermediate_size = j.at("intermediate_size").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.mask_proportion = j.at("mask_proportion").get<double>();
  c.init_scale = j.at("init_scale").get<double>();
  c.init_dist = j.at("init_dist").get<std::string>();
  c.seed = j.at("seed").get<uint64_t>();
  return c;
}

json train_config_json(const TrainConfig& c) {
  return json{{"batch_size", c.batch_size},
              {"total_steps", c.total_steps},
              {"learning_rate", c.learning_rate},
              {"warmup_steps", c.warmup_steps},
              {"adam_beta1", c.adam.beta1},
              {"adam_beta2", c.adam.beta2},
              {"adam_eps", c.adam.eps},
              {"clip_norm", c.clip_norm},
              {"log_every", c.log_every},
              {"seed", c.seed},
              {"masked_lm_policy", "80/10/10 mask/random/keep"}};
}

// Groups same-length sequences into deterministic shuffled batches; reshuffles
// every epoch from the ongoing stream.
class Batcher {
 public:
  Batcher(const TokenizedCorpus& corpus, int batch_size, int min_len, int max_len, Rng rng)
      : corpus_(corpus), batch_size_(batch_size), rng_(rng) {
    for (size_t i = 0; i < corpus.sequences.size(); ++i) {
      const int len = static_cast<int>(corpus.sequences[i].size());
      if (len >= min_len && len <= max_len) buckets_[len].push_back(i);
    }
    if (buckets_.empty())
      throw ConfigError("no trainable sequences in corpus for this architecture");
  }

  TokenBatch next() {
    if (cursor_ >= plan_.size()) build_epoch();
    const auto& [len, start, count] = plan_[cursor_++];
    TokenBatch batch;
    batch.batch = count;
    batch.time = len;
    batch.ids.resize(static_cast<size_t>(count) * len);
    const auto& bucket = order_.at(len);
    for (int b = 0; b < count; ++b) {
      const auto& seq = corpus_.sequences[bucket[start + b]];
      for (int t = 0; t < len; ++t) batch.id(b, t) = static_cast<int32_t>(seq[t]);
    }
    return batch;
  }

 private:
  void build_epoch() {
    plan_.clear();
    cursor_ = 0;
    for (auto& [len, indices] : buckets_) {
      auto& ord = order_[len];
      ord = indices;
      rng_.shuffle(ord);
      for (size_t s = 0; s < ord.size(); s += batch_size_) {
        const int count = static_cast<int>(std::min<size_t>(batch_size_, ord.size() - s));
        plan_.emplace_back(len, s, count);
      }
    }
    rng_.shuffle(plan_);
  }

  const TokenizedCorpus& corpus_;
  size_t batch_size_;
  Rng rng_;
  std::map<int, std::vector<size_t>> buckets_;
  std::map<int, std::vector<size_t>> order_;
  std::vector<std::tuple<int, size_t, int>> plan_;  // (len, start, count)
  size_t cursor_ = 0;
};

}  // namespace

TrainStepStats train_step_forward_backward(LMParameters& p, const TokenBatch& batch, Rng& rng) {
  switch (p.config.architecture) {
    case Architecture::Lstm:
    case Architecture::BiLstm:
      return lstm_train_step(p, batch, rng);
    case Architecture::CausalTransformer: {
      const int B = batch.batch, T = batch.time;
      if (T < 2) throw ConfigError("sequence too short for causal LM step");
      std::vector<Eigen::Index> head_rows;
      std::vector<int32_t> targets;
      head_rows.reserve(static_cast<size_t>(B) * (T - 1));
      targets.reserve(head_rows.capacity());
      for (int b = 0; b < B; ++b)
        for (int t = 1; t < T; ++t) {
          head_rows.push_back(static_cast<Eigen::Index>(b) * T + t - 1);
          targets.push_back(batch.id(b, t));
        }
      return transformer_train_step_rows(p, batch, head_rows, targets, rng);
    }
    case Architecture::MaskedTransformer: {
      const int B = batch.batch, T = batch.time;
      TokenBatch corrupted = batch;
      std::vector<Eigen::Index> head_rows;
      std::vector<int32_t> targets;
      const uint32_t v = p.config.vocab_size;
      for (int b = 0; b < B; ++b) {
        int selected = 0;
        for (int t = 0; t < T; ++t)
          if (rng.next_bernoulli(p.config.mask_proportion)) {
            head_rows.push_back(static_cast<Eigen::Index>(b) * T + t);
            targets.push_back(batch.id(b, t));
            const double r = rng.next_double();
            if (r < 0.8)
              corrupted.id(b, t) = static_cast<int32_t>(Vocabulary::kMask);
            else if (r < 0.9)
              corrupted.id(b, t) = static_cast<int32_t>(
                  Vocabulary::kNumSpecials +
                  rng.next_below(v - Vocabulary::kNumSpecials));
            ++selected;
          }
        if (selected == 0) {  // guarantee at least one prediction per sequence
          const int t = static_cast<int>(rng.next_below(static_cast<uint64_t>(T)));
          head_rows.push_back(static_cast<Eigen::Index>(b) * T + t);
          targets.push_back(batch.id(b, t));
          corrupted.id(b, t) = static_cast<int32_t>(Vocabulary::kMask);
        }
      }
      return transformer_train_step_rows(p, corrupted, head_rows, targets, rng);
    }
  }
  throw ConfigError("unknown architecture");
}

Mat predict_logits(const LMParameters& p, const TokenBatch& batch,
                   const std::vector<PredictRequest>& requests) {
  if (p.config.is_transformer()) return transformer_predict_logits(p, batch, requests);
  return lstm_predict_logits(p, batch, requests);
}

namespace {

std::string step_file_name(int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "step_%08lld.bin", static_cast<long long>(step));
  return buf;
}

void write_index(const std::filesystem::path& dir, const std::vector<CheckpointEntry>& entries) {
  json idx = json::array();
  for (const auto& e : entries)
    idx.push_back({{"step", e.step}, {"file", e.file}, {"hash", e.hash}});
  write_text_file(dir / "index.json", idx.dump(2) + "\n");
}

}  // namespace

TrainingRun train_model(const ModelConfig& model_config, const TrainConfig& train_config,
                        const TokenizedCorpus& train_corpus,
                        const std::vector<int64_t>& checkpoint_steps,
                        const std::filesystem::path& archive_dir,
                        const std::string& corpus_hash) {
  model_config.validate();
  if (train_corpus.sequences.empty()) throw ConfigError("train: empty corpus");
  for (size_t i = 1; i < checkpoint_steps.size(); ++i)
    if (checkpoint_steps[i] <= checkpoint_steps[i - 1])
      throw ConfigError("checkpoint steps must be strictly increasing");
  if (!checkpoint_steps.empty() && checkpoint_steps.back() != train_config.total_steps)
    throw ConfigError("last checkpoint step must equal total_steps");

  std::filesystem::create_directories(archive_dir);

  TrainingRun run;
  run.model_config = model_config;
  run.train_config = train_config;
  run.checkpoint_steps = checkpoint_steps;
  run.archive_dir = archive_dir;

  json manifest{{"model", model_config_json(model_config)},
                {"train", train_config_json(train_config)},
                {"checkpoint_steps", checkpoint_steps},
                {"corpus_hash", corpus_hash},
                {"format", "wordacq-archive-v1"}};
  write_text_file(archive_dir / "manifest.json", manifest.dump(2) + "\n");

  LMParameters params = init_model(model_config);
  params.ensure_grads();
  auto named = params.all();
  Adam adam(named, train_config.adam);
  LrSchedule schedule{train_config.learning_rate, train_config.warmup_steps,
                      train_config.total_steps};

  const int min_len = model_config.architecture == Architecture::BiLstm ? 3 : 2;
  const int max_len =
      model_config.is_transformer() ? model_config.max_seq_len : std::numeric_limits<int>::max();
  Rng rng(train_config.seed);
  Batcher batcher(train_corpus, train_config.batch_size, min_len, max_len, rng.derive(1));
  Rng step_rng = rng.derive(2);

  std::vector<CheckpointEntry> entries;
  auto snapshot = [&](int64_t step) {
    const std::string file = step_file_name(step);
    params.save(archive_dir / file);
    entries.push_back({step, file, hash_hex(hash_file(archive_dir / file))});
    write_index(archive_dir, entries);
  };
  snapshot(0);  // pre-training weights anchor the random-chance baseline

  std::unordered_set<int64_t> snap_at(checkpoint_steps.begin(), checkpoint_steps.end());
  std::ostringstream loss_csv;
  loss_csv << "step,mean_loss_nats\n";

  double window_loss = 0.0;
  int64_t window_preds = 0;
  for (int64_t step = 1; step <= train_config.total_steps; ++step) {
    TokenBatch batch = batcher.next();
    params.zero_grads();
    TrainStepStats stats = train_step_forward_backward(params, batch, step_rng);
    if (!std::isfinite(stats.loss_sum_nats)) {
      write_text_file(archive_dir / "loss.csv", loss_csv.str());
      throw NumericalError("training diverged (non-finite loss) at step " +
                           std::to_string(step) + "; manifest at " +
                           (archive_dir / "manifest.json").string());
    }
    clip_global_norm(named, train_config.clip_norm);
    adam.step(named, lr_at(step, schedule));

    window_loss += stats.loss_sum_nats;
    window_preds += stats.predictions;
    if (step % train_config.log_every == 0 || step == train_config.total_steps) {
      const double mean = window_loss / static_cast<double>(std::max<int64_t>(window_preds, 1));
      run.loss_history.emplace_back(step, mean);
      loss_csv << step << ',' << format_double(mean) << '\n';
      window_loss = 0.0;
      window_preds = 0;
    }
    if (snap_at.count(step)) snapshot(step);
  }
  write_text_file(archive_dir / "loss.csv", loss_csv.str());
  return run;
}

CheckpointArchive CheckpointArchive::open(const std::filesystem::path& dir) {
  CheckpointArchive a;
  a.dir = dir;
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path))
    throw MissingUpstreamError("missing archive manifest: " + manifest_path.string());
  json manifest = json::parse(read_text_file(manifest_path));
  a.model_config = model_config_from_json(manifest.at("model"));
  json idx = json::parse(read_text_file(dir / "index.json"));
  for (const auto& e : idx)
    a.entries.push_back({e.at("step").get<int64_t>(), e.at("file").get<std::string>(),
                         e.at("hash").get<std::string>()});
  return a;
}

const CheckpointEntry& CheckpointArchive::entry_for(int64_t step) const {
  for (const auto& e : entries)
    if (e.step == step) return e;
  throw MissingUpstreamError("missing checkpoint for step " + std::to_string(step) + " in " +
                             dir.string());
}

LMParameters CheckpointArchive::load_step(int64_t step) const {
  const auto& e = entry_for(step);
  LMParameters p = make_parameter_shell(model_config);
  p.load_values(dir / e.file);
  return p;
}

}  // namespace wordacq
