#include "wordacq/distributional.hpp"

#include <atomic>
#include <cmath>
#include <json.hpp>
#include <sstream>
#include <mutex>
#include <thread>

#include "wordacq/errors.hpp"
#include "wordacq/io_util.hpp"
#include "wordacq/rng.hpp"

namespace wordacq {

double kl_divergence_bits(const std::vector<double>& reference,
                          const std::vector<double>& predicted) {
  if (reference.size() != predicted.size())
    throw ConfigError("kl_divergence: dimension mismatch");
  double ref_sum = 0.0, pred_sum = 0.0, kl = 0.0;
  for (size_t i = 0; i < reference.size(); ++i) {
    const double r = reference[i], q = predicted[i];
    if (r < 0.0 || q < 0.0) throw ConfigError("kl_divergence: negative probability");
    ref_sum += r;
    pred_sum += q;
    if (r > 0.0) {
      if (q <= 0.0)
        throw NumericalError("kl_divergence: reference mass on zero prediction at index " +
                             std::to_string(i));
      kl += r * std::log2(r / q);
    }
  }
  if (std::abs(ref_sum - 1.0) > 1e-6 || std::abs(pred_sum - 1.0) > 1e-6)
    throw ConfigError("kl_divergence: inputs are not probability distributions");
  return kl;
}

EvalSample build_eval_sample(const TokenizedCorpus& eval_corpus, size_t size, uint64_t seed) {
  if (size == 0) throw ConfigError("build_eval_sample: size must be positive");
  std::vector<uint32_t> eligible;
  for (size_t i = 0; i < eval_corpus.sequences.size(); ++i)
    if (eval_corpus.sequences[i].size() >= 3) eligible.push_back(static_cast<uint32_t>(i));
  if (eligible.size() < size)
    throw ConfigError("build_eval_sample: only " + std::to_string(eligible.size()) +
                      " sequences with interior positions; need " + std::to_string(size));

  EvalSample sample;
  sample.seed = seed;
  Rng rng(seed);
  std::vector<size_t> chosen = rng.sample_indices(eligible.size(), size);
  for (size_t idx : chosen) {
    const uint32_t s = eligible[idx];
    const auto& seq = eval_corpus.sequences[s];
    const int pos = 1 + static_cast<int>(rng.next_below(seq.size() - 2));
    sample.entries.push_back({s, pos, seq[static_cast<size_t>(pos)]});
  }
  return sample;
}

KLRefData KLRefData::build(const TokenizedCorpus& corpus, const EvalSample& sample,
                           const NGramTable& ngram, Direction direction) {
  KLRefData d;
  d.ngram = &ngram;
  d.direction = direction;
  d.vocab = ngram.vocab_size();
  d.unigram_dist = ngram.unigram_distribution();
  d.h_unigram = distribution_entropy_bits(d.unigram_dist);
  d.log2_vocab = std::log2(static_cast<double>(d.vocab));

  std::vector<double> ref;
  for (const auto& e : sample.entries) {
    const auto& seq = corpus.sequences[e.sequence_index];
    if (e.pos < 1 || e.pos + 1 >= static_cast<int>(seq.size()))
      throw ConfigError("eval sample position invalid for both direction modes");
    const uint32_t prev = seq[static_cast<size_t>(e.pos) - 1];
    const uint32_t next = seq[static_cast<size_t>(e.pos) + 1];
    d.prev.push_back(prev);
    d.next.push_back(next);
    d.truth.push_back(e.truth);
    if (direction == Direction::Unidirectional)
      ngram.bigram_conditional_into(prev, ref);
    else
      ngram.bidirectional_bigram_into(prev, next, ref);
    d.h_bigram.push_back(distribution_entropy_bits(ref));
  }
  return d;
}

KLAccumulator::KLAccumulator(const KLRefData& refs) : refs_(refs) {}

void KLAccumulator::add(size_t item, const Eigen::Ref<const Vec>& logits) {
  log2_softmax(logits, log2p_);
  const double mean_l2p = log2p_.mean();
  sums_.onehot += -log2p_(refs_.truth[item]);
  sums_.uniform += -refs_.log2_vocab - mean_l2p;
  double dot_uni = 0.0;
  for (uint32_t w = 0; w < refs_.vocab; ++w) dot_uni += refs_.unigram_dist[w] * log2p_(w);
  sums_.unigram += -refs_.h_unigram - dot_uni;

  if (refs_.direction == Direction::Unidirectional)
    refs_.ngram->bigram_conditional_into(refs_.prev[item], scratch_);
  else
    refs_.ngram->bidirectional_bigram_into(refs_.prev[item], refs_.next[item], scratch_);
  double dot_bi = 0.0;
  for (uint32_t w = 0; w < refs_.vocab; ++w) dot_bi += scratch_[w] * log2p_(w);
  sums_.bigram += -refs_.h_bigram[item] - dot_bi;
  ++count_;
}

MeanKL KLAccumulator::mean() const {
  if (count_ == 0) throw NumericalError("KLAccumulator: no items accumulated");
  const double n = static_cast<double>(count_);
  return {sums_.uniform / n, sums_.unigram / n, sums_.bigram / n, sums_.onehot / n};
}

MeanKL mean_kl_for_fixed_distribution(const std::vector<double>& dist, const KLRefData& refs) {
  // softmax(ln p) = p, so feeding ln p as logits evaluates the frozen model.
  Vec logits(dist.size());
  for (size_t i = 0; i < dist.size(); ++i)
    logits(static_cast<Eigen::Index>(i)) = std::log(std::max(dist[i], 1e-300));
  KLAccumulator acc(refs);
  for (size_t i = 0; i < refs.truth.size(); ++i) acc.add(i, logits);
  return acc.mean();
}

KLTrace kl_trace(const CheckpointArchive& archive, const TokenizedCorpus& eval_corpus,
                 const EvalSample& sample, const NGramTable& ngram, int n_threads) {
  if (archive.entries.empty()) throw MissingUpstreamError("empty checkpoint archive");
  if (sample.entries.empty()) throw ConfigError("kl_trace: empty eval sample");
  const Direction dir = archive.model_config.direction();
  KLRefData refs = KLRefData::build(eval_corpus, sample, ngram, dir);

  std::vector<EvalItem> items;
  items.reserve(sample.entries.size());
  for (const auto& e : sample.entries) items.push_back({e.sequence_index, e.pos});
  EvalPlan plan(eval_corpus, items, archive.model_config.architecture);

  KLTrace trace;
  trace.model = architecture_name(archive.model_config.architecture);
  trace.steps.resize(archive.entries.size());
  trace.values.resize(archive.entries.size());

  if (n_threads <= 0) n_threads = std::max(1u, std::thread::hardware_concurrency());
  std::atomic<size_t> next_ckpt{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    try {
      LMParameters params = make_parameter_shell(archive.model_config);
      for (;;) {
        const size_t c = next_ckpt.fetch_add(1);
        if (c >= archive.entries.size()) break;
        params.load_values(archive.dir / archive.entries[c].file);
        KLAccumulator acc(refs);
        plan.run(params, [&](size_t item, const Eigen::Ref<const Vec>& logits) {
          acc.add(item, logits);
        });
        trace.steps[c] = archive.entries[c].step;
        trace.values[c] = acc.mean();
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next_ckpt.store(archive.entries.size());
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return trace;
}

void save_kl_trace_csv(const KLTrace& trace, const std::filesystem::path& p) {
  std::ostringstream out;
  out << "model,step,ref,kl_bits\n";
  for (size_t i = 0; i < trace.steps.size(); ++i) {
    out << trace.model << ',' << trace.steps[i] << ",uniform,"
        << format_double(trace.values[i].uniform) << '\n';
    out << trace.model << ',' << trace.steps[i] << ",unigram,"
        << format_double(trace.values[i].unigram) << '\n';
    out << trace.model << ',' << trace.steps[i] << ",bigram,"
        << format_double(trace.values[i].bigram) << '\n';
    out << trace.model << ',' << trace.steps[i] << ",onehot,"
        << format_double(trace.values[i].onehot) << '\n';
  }
  write_text_file(p, out.str());
}

KLTrace load_kl_trace_csv(const std::filesystem::path& p) {
  auto lines = read_lines(p);
  if (lines.empty()) throw MissingUpstreamError("empty KL trace file: " + p.string());
  KLTrace trace;
  std::map<int64_t, size_t> index;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = split_csv_line(lines[i]);
    if (f.size() != 4) throw ConfigError("malformed KL trace row: " + lines[i]);
    trace.model = f[0];
    const int64_t step = std::stoll(f[1]);
    auto it = index.find(step);
    if (it == index.end()) {
      index.emplace(step, trace.steps.size());
      trace.steps.push_back(step);
      trace.values.push_back({});
      it = index.find(step);
    }
    const double v = std::stod(f[3]);
    if (f[2] == "uniform") trace.values[it->second].uniform = v;
    else if (f[2] == "unigram") trace.values[it->second].unigram = v;
    else if (f[2] == "bigram") trace.values[it->second].bigram = v;
    else if (f[2] == "onehot") trace.values[it->second].onehot = v;
    else throw ConfigError("unknown KL reference: " + f[2]);
  }
  return trace;
}

namespace {

PhaseStats analyze(const std::vector<int64_t>& steps, const std::vector<double>& v,
                   double margin) {
  PhaseStats s;
  size_t argmin = 0;
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[argmin]) argmin = i;
  s.dip_step = steps[argmin];
  s.dip_depth = v.front() - v[argmin];
  s.rise = v.back() - v[argmin];
  s.phase = s.dip_depth > 0.0 && s.rise > margin;
  return s;
}

}  // namespace

PhaseSummary detect_phases(const KLTrace& trace, double rise_margin) {
  if (trace.steps.size() < 5)
    throw ConfigError("detect_phases: need at least 5 checkpoints");
  std::vector<double> uni, bi;
  for (const auto& v : trace.values) {
    uni.push_back(v.unigram);
    bi.push_back(v.bigram);
  }
  PhaseSummary s;
  s.margin = rise_margin;
  s.unigram = analyze(trace.steps, uni, rise_margin);
  s.bigram = analyze(trace.steps, bi, rise_margin);
  s.unigram_dip_before_bigram = s.unigram.dip_step < s.bigram.dip_step;
  return s;
}

std::string phase_summary_json(const PhaseSummary& s, const std::string& model) {
  nlohmann::json j;
  j["model"] = model;
  j["margin_bits"] = s.margin;
  j["unigram"] = {{"dip_step", s.unigram.dip_step},
                  {"dip_depth_bits", s.unigram.dip_depth},
                  {"rise_bits", s.unigram.rise},
                  {"phase", s.unigram.phase}};
  j["bigram"] = {{"dip_step", s.bigram.dip_step},
                 {"dip_depth_bits", s.bigram.dip_depth},
                 {"rise_bits", s.bigram.rise},
                 {"phase", s.bigram.phase}};
  j["unigram_dip_before_bigram"] = s.unigram_dip_before_bigram;
  return j.dump(2) + "\n";
}

}  // namespace wordacq
