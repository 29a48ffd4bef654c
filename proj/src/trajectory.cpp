#include "wordacq/trajectory.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <set>
#include <sstream>
#include <mutex>
#include <thread>

#include "wordacq/errors.hpp"
#include "wordacq/io_util.hpp"

namespace wordacq {

CheckpointSchedule build_checkpoint_schedule(const std::vector<ScheduleTier>& tiers,
                                             int64_t total_steps) {
  if (tiers.empty()) throw ConfigError("checkpoint schedule needs at least one tier");
  int64_t prev_until = 0;
  for (const auto& t : tiers) {
    if (t.every <= 0) throw ConfigError("checkpoint tier interval must be positive");
    if (t.until <= prev_until) throw ConfigError("checkpoint tiers must be ordered by bound");
    if (t.until % t.every != 0)
      throw ConfigError("checkpoint tier interval must divide its bound");
    prev_until = t.until;
  }
  if (tiers.back().until != total_steps)
    throw ConfigError("last checkpoint tier bound must equal total steps");

  std::set<int64_t> steps;
  for (const auto& t : tiers)
    for (int64_t s = t.every; s <= t.until; s += t.every) steps.insert(s);

  CheckpointSchedule sched;
  sched.tiers = tiers;
  sched.total_steps = total_steps;
  sched.steps.assign(steps.begin(), steps.end());
  return sched;
}

std::vector<ScheduleTier> paper_schedule_tiers(int64_t total_steps) {
  // Every 100 steps to 1K, every 500 to 10K, every 1000 to 100K, every 10K to
  // the end of training.
  return {{100, 1000}, {500, 10000}, {1000, 100000}, {10000, total_steps}};
}

void save_learning_curves_csv(const std::vector<LearningCurve>& curves,
                              const std::filesystem::path& p) {
  std::ostringstream out;
  out << "word,step,mean_surprisal_bits,n_samples,flags\n";
  for (const auto& c : curves) {
    const std::string flags = c.under_sampled ? "under_sampled" : "";
    for (const auto& pt : c.points)
      out << csv_escape(c.word) << ',' << pt.step << ',' << format_double(pt.mean_surprisal_bits)
          << ',' << pt.n_samples << ',' << flags << '\n';
  }
  write_text_file(p, out.str());
}

std::vector<LearningCurve> load_learning_curves_csv(const std::filesystem::path& p) {
  auto lines = read_lines(p);
  if (lines.empty()) throw MissingUpstreamError("empty curves file: " + p.string());
  std::vector<LearningCurve> curves;
  std::map<std::string, size_t> index;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = split_csv_line(lines[i]);
    if (f.size() != 5) throw ConfigError("malformed curve row: " + lines[i]);
    auto it = index.find(f[0]);
    if (it == index.end()) {
      index.emplace(f[0], curves.size());
      curves.push_back({f[0], Direction::Unidirectional, f[4].find("under_sampled") != std::string::npos, {}});
      it = index.find(f[0]);
    }
    curves[it->second].points.push_back(
        {std::stoll(f[1]), std::stod(f[2]), std::stoll(f[3])});
  }
  return curves;
}

EvalPlan::EvalPlan(const TokenizedCorpus& corpus, const std::vector<EvalItem>& items,
                   Architecture arch, int max_rows_per_batch) {
  n_items_ = items.size();
  const bool masked = arch == Architecture::MaskedTransformer;

  if (masked) {
    // One batch row per item with MASK substituted at the target position.
    std::map<int, std::vector<size_t>> by_len;
    for (size_t i = 0; i < items.size(); ++i)
      by_len[static_cast<int>(corpus.sequences[items[i].sequence_index].size())].push_back(i);
    for (auto& [len, idxs] : by_len) {
      for (size_t start = 0; start < idxs.size();
           start += static_cast<size_t>(max_rows_per_batch)) {
        const size_t count = std::min<size_t>(max_rows_per_batch, idxs.size() - start);
        PlannedBatch pb;
        pb.tokens.batch = static_cast<int>(count);
        pb.tokens.time = len;
        pb.tokens.ids.resize(count * static_cast<size_t>(len));
        for (size_t r = 0; r < count; ++r) {
          const auto& item = items[idxs[start + r]];
          const auto& seq = corpus.sequences[item.sequence_index];
          for (int t = 0; t < len; ++t)
            pb.tokens.id(static_cast<int>(r), t) = static_cast<int32_t>(seq[t]);
          pb.tokens.id(static_cast<int>(r), item.pos) =
              static_cast<int32_t>(Vocabulary::kMask);
          pb.requests.push_back({static_cast<int>(r), item.pos});
          pb.item_index.push_back(idxs[start + r]);
        }
        batches_.push_back(std::move(pb));
      }
    }
    return;
  }

  // Group items by sequence so each unique sequence is forwarded once.
  std::map<uint32_t, std::vector<size_t>> by_seq;
  for (size_t i = 0; i < items.size(); ++i) by_seq[items[i].sequence_index].push_back(i);
  std::map<int, std::vector<uint32_t>> seqs_by_len;
  for (const auto& [seq_idx, _] : by_seq)
    seqs_by_len[static_cast<int>(corpus.sequences[seq_idx].size())].push_back(seq_idx);

  for (auto& [len, seq_ids] : seqs_by_len) {
    for (size_t start = 0; start < seq_ids.size();
         start += static_cast<size_t>(max_rows_per_batch)) {
      const size_t count = std::min<size_t>(max_rows_per_batch, seq_ids.size() - start);
      PlannedBatch pb;
      pb.tokens.batch = static_cast<int>(count);
      pb.tokens.time = len;
      pb.tokens.ids.resize(count * static_cast<size_t>(len));
      for (size_t r = 0; r < count; ++r) {
        const auto& seq = corpus.sequences[seq_ids[start + r]];
        for (int t = 0; t < len; ++t)
          pb.tokens.id(static_cast<int>(r), t) = static_cast<int32_t>(seq[t]);
        for (size_t item_idx : by_seq[seq_ids[start + r]]) {
          pb.requests.push_back({static_cast<int>(r), items[item_idx].pos});
          pb.item_index.push_back(item_idx);
        }
      }
      batches_.push_back(std::move(pb));
    }
  }
}

void EvalPlan::run(const LMParameters& params,
                   const std::function<void(size_t, const Eigen::Ref<const Vec>&)>& fn) const {
  for (const auto& pb : batches_) {
    Mat logits = predict_logits(params, pb.tokens, pb.requests);
    for (size_t i = 0; i < pb.item_index.size(); ++i)
      fn(pb.item_index[i], logits.col(static_cast<Eigen::Index>(i)));
  }
}

std::pair<double, int64_t> evaluate_word_surprisal(const LMParameters& params,
                                                   const TokenizedCorpus& eval_corpus,
                                                   const OccurrenceSet& occurrences) {
  if (occurrences.occurrences.empty())
    throw ConfigError("evaluate_word_surprisal: empty occurrence set for '" +
                      occurrences.word + "'");
  std::vector<EvalItem> items;
  items.reserve(occurrences.occurrences.size());
  for (const auto& o : occurrences.occurrences)
    items.push_back({o.sequence_index, static_cast<int>(o.position)});
  EvalPlan plan(eval_corpus, items, params.config.architecture);

  const int32_t target = static_cast<int32_t>(occurrences.word_id);
  double sum = 0.0;
  plan.run(params, [&](size_t, const Eigen::Ref<const Vec>& logits) {
    sum += surprisal_bits(logits, target);
  });
  return {sum / static_cast<double>(items.size()), static_cast<int64_t>(items.size())};
}

std::vector<LearningCurve> build_learning_curves(const CheckpointArchive& archive,
                                                 const TokenizedCorpus& eval_corpus,
                                                 const std::vector<OccurrenceSet>& sets,
                                                 int n_threads) {
  if (archive.entries.empty()) throw MissingUpstreamError("empty checkpoint archive");

  // Merge every occurrence into one plan; remember each item's word.
  std::vector<EvalItem> items;
  std::vector<uint32_t> item_word;  // index into sets
  std::vector<int32_t> item_target;
  for (size_t w = 0; w < sets.size(); ++w) {
    if (sets[w].occurrences.empty())
      throw ConfigError("build_learning_curves: no occurrences for '" + sets[w].word + "'");
    for (const auto& o : sets[w].occurrences) {
      items.push_back({o.sequence_index, static_cast<int>(o.position)});
      item_word.push_back(static_cast<uint32_t>(w));
      item_target.push_back(static_cast<int32_t>(sets[w].word_id));
    }
  }
  EvalPlan plan(eval_corpus, items, archive.model_config.architecture);

  const size_t n_ckpt = archive.entries.size();
  std::vector<std::vector<double>> sums(n_ckpt, std::vector<double>(sets.size(), 0.0));
  std::vector<std::vector<int64_t>> counts(n_ckpt, std::vector<int64_t>(sets.size(), 0));

  if (n_threads <= 0)
    n_threads = std::max(1u, std::thread::hardware_concurrency());
  std::atomic<size_t> next_ckpt{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    try {
      LMParameters params = make_parameter_shell(archive.model_config);
      for (;;) {
        const size_t c = next_ckpt.fetch_add(1);
        if (c >= n_ckpt) break;
        params.load_values(archive.dir / archive.entries[c].file);
        auto& sum_row = sums[c];
        auto& count_row = counts[c];
        plan.run(params, [&](size_t item, const Eigen::Ref<const Vec>& logits) {
          sum_row[item_word[item]] += surprisal_bits(logits, item_target[item]);
          ++count_row[item_word[item]];
        });
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next_ckpt.store(n_ckpt);  // drain remaining work
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<LearningCurve> curves(sets.size());
  for (size_t w = 0; w < sets.size(); ++w) {
    curves[w].word = sets[w].word;
    curves[w].direction = sets[w].direction;
    curves[w].under_sampled = sets[w].under_sampled;
    for (size_t c = 0; c < n_ckpt; ++c)
      curves[w].points.push_back({archive.entries[c].step,
                                  sums[c][w] / static_cast<double>(counts[c][w]),
                                  counts[c][w]});
  }
  return curves;
}

}  // namespace wordacq
