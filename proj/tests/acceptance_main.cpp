// Acceptance suite: runs every release criterion end to end and prints one
// pass/fail line per criterion. The distributional-phase and regression
// criteria share one desk-scale training run over all four architectures
// (stage outputs are hash-gated, so reruns resume instead of retraining).
//
// Usage: acceptance [--work-dir DIR] [--threads N]

#include <atomic>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <thread>

#include "wordacq/acquisition.hpp"
#include "wordacq/config.hpp"
#include "wordacq/distributional.hpp"
#include "wordacq/errors.hpp"
#include "wordacq/fixtures.hpp"
#include "wordacq/io_util.hpp"
#include "wordacq/models.hpp"
#include "wordacq/ngram.hpp"
#include "wordacq/pipeline.hpp"
#include "wordacq/special_functions.hpp"
#include "wordacq/stats.hpp"
#include "wordacq/trajectory.hpp"

using namespace wordacq;
using nlohmann::json;

namespace {

std::filesystem::path g_work = "acceptance_work";
int g_threads = 0;
std::string g_only;  // comma-separated criterion ids; empty = all

int hardware_threads() {
  return g_threads > 0 ? g_threads
                       : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

const Architecture kArchs[] = {Architecture::Lstm, Architecture::BiLstm,
                               Architecture::CausalTransformer,
                               Architecture::MaskedTransformer};

// ---- criterion 1: checkpoint schedule ---------------------------------------

bool criterion_schedule(std::string& detail) {
  auto sched = build_checkpoint_schedule(paper_schedule_tiers(1000000), 1000000);
  detail = std::to_string(sched.steps.size()) + " checkpoint steps";
  return sched.steps.size() == 208;
}

// ---- criterion 2: random-chance baseline -------------------------------------

bool criterion_baseline(std::string& detail) {
  const double baseline = chance_baseline_bits(30004);
  std::ostringstream ss;
  ss << "log2(30004) = " << baseline << " bits";
  detail = ss.str();
  return std::abs(baseline - 14.87) <= 0.05;
}

// ---- criterion 3: gradient correctness ---------------------------------------

bool criterion_gradients(std::string& detail) {
  struct Spec {
    Architecture arch;
    uint32_t vocab;
    int hidden;
    int layers;
  };
  const Spec specs[] = {{Architecture::Lstm, 50, 16, 2},
                        {Architecture::BiLstm, 20, 8, 3},
                        {Architecture::CausalTransformer, 100, 32, 2},
                        {Architecture::MaskedTransformer, 500, 64, 2}};
  std::ostringstream ss;
  bool ok = true;
  for (const auto& spec : specs) {
    ModelConfig cfg;
    cfg.architecture = spec.arch;
    cfg.vocab_size = spec.vocab;
    cfg.hidden_size = spec.hidden;
    cfg.embedding_size = spec.hidden;
    cfg.layers = spec.layers;
    cfg.heads = spec.hidden >= 16 ? 4 : 2;
    cfg.intermediate_size = spec.hidden * 4;
    cfg.max_seq_len = 16;
    cfg.init_scale = 0.4;
    cfg.seed = 11;
    LMParameters p = init_model(cfg);
    p.ensure_grads();
    Rng brng(31);
    TokenBatch batch;
    batch.batch = 3;
    batch.time = 9;
    batch.ids.resize(27);
    for (auto& id : batch.ids)
      id = static_cast<int32_t>(Vocabulary::kNumSpecials +
                                brng.next_below(cfg.vocab_size - Vocabulary::kNumSpecials));
    auto loss_fn = [&]() {
      Rng rng(17);
      p.zero_grads();
      TrainStepStats s = train_step_forward_backward(p, batch, rng);
      return s.loss_sum_nats / static_cast<double>(s.predictions);
    };
    auto grad_fn = [&]() {
      Rng rng(17);
      p.zero_grads();
      train_step_forward_backward(p, batch, rng);
    };
    const double err = gradient_check(loss_fn, grad_fn, p.all(), 2e-4, 240, 7);
    ss << architecture_name(spec.arch) << "=" << err << " ";
    ok = ok && err < 1e-4;
  }
  detail = "max relative errors: " + ss.str();
  return ok;
}

// ---- criterion 4: information-flow invariants ---------------------------------

bool criterion_information_flow(std::string& detail) {
  std::ostringstream ss;
  bool ok = true;
  for (Architecture arch : kArchs) {
    ModelConfig cfg;
    cfg.architecture = arch;
    cfg.vocab_size = 60;
    cfg.hidden_size = 24;
    cfg.embedding_size = 24;
    cfg.layers = 2;
    cfg.heads = 4;
    cfg.intermediate_size = 96;
    cfg.max_seq_len = 24;
    cfg.seed = 23;
    LMParameters p = init_model(cfg);
    Rng rng(41);
    int exact = 0;
    const int trials = 100;
    const bool causal =
        arch == Architecture::Lstm || arch == Architecture::CausalTransformer;
    for (int t = 0; t < trials; ++t) {
      std::vector<uint32_t> seq(16);
      for (auto& id : seq)
        id = Vocabulary::kNumSpecials +
             static_cast<uint32_t>(rng.next_below(cfg.vocab_size - Vocabulary::kNumSpecials));
      const int pos = 2 + static_cast<int>(rng.next_below(12));
      Vec base = predict_distribution(p, seq, pos);
      std::vector<uint32_t> perturbed = seq;
      if (causal) {
        for (size_t i = static_cast<size_t>(pos); i < seq.size(); ++i)
          perturbed[i] =
              Vocabulary::kNumSpecials +
              static_cast<uint32_t>(rng.next_below(cfg.vocab_size - Vocabulary::kNumSpecials));
      } else {
        perturbed[static_cast<size_t>(pos)] =
            Vocabulary::kNumSpecials +
            static_cast<uint32_t>(rng.next_below(cfg.vocab_size - Vocabulary::kNumSpecials));
      }
      Vec moved = predict_distribution(p, perturbed, pos);
      exact += (base - moved).cwiseAbs().maxCoeff() == 0.0;
    }
    ss << architecture_name(arch) << "=" << exact << "/100 ";
    ok = ok && exact == trials;
  }
  detail = "bitwise-equal trials: " + ss.str();
  return ok;
}

// ---- criterion 5: sigmoid recovery --------------------------------------------

bool criterion_sigmoid_recovery(std::string& detail) {
  const double L = 4.2, U = 14.8, x0 = 3.7, k = -2.6;
  int recovered = 0;
  for (int t = 0; t < 100; ++t) {
    Rng rng(9000 + t);
    LearningCurve curve;
    curve.word = "synthetic";
    for (int i = 0; i < 200; ++i) {
      const double x = 2.0 + 4.0 * i / 199.0;
      const int64_t step = static_cast<int64_t>(std::llround(std::pow(10.0, x)));
      const double y = L + (U - L) / (1.0 + std::exp(-k * (x - x0))) +
                       0.05 * rng.next_gaussian();
      curve.points.push_back({step, y, 100});
    }
    SigmoidFit fit = fit_sigmoid(curve, 14.87);
    const bool ok = std::abs(fit.lower - L) / L < 0.01 && std::abs(fit.upper - U) / U < 0.01 &&
                    std::abs(fit.midpoint - x0) / x0 < 0.01 &&
                    std::abs(fit.slope - k) / std::abs(k) < 0.01;
    recovered += ok;
  }
  detail = std::to_string(recovered) + "/100 curves recovered within 1%";
  return recovered >= 95;
}

// ---- criterion 6: n-gram oracle equivalence -------------------------------------

bool criterion_ngram_oracle(std::string& detail) {
  size_t corpora = 0, failures = 0;
  auto check_corpus = [&](const TokenizedCorpus& corpus, uint32_t vocab, double alpha) {
    ++corpora;
    auto table = NGramTable::count_ngrams(corpus, vocab, alpha);
    // independent naive recount
    std::map<uint32_t, uint64_t> uni;
    std::map<std::pair<uint32_t, uint32_t>, uint64_t> bi;
    std::map<uint32_t, uint64_t> as_prev;
    uint64_t total = 0;
    for (const auto& seq : corpus.sequences)
      for (size_t i = 0; i < seq.size(); ++i) {
        ++uni[seq[i]];
        ++total;
        if (i + 1 < seq.size()) {
          ++bi[{seq[i], seq[i + 1]}];
          ++as_prev[seq[i]];
        }
      }
    bool ok = table.total_tokens() == total;
    for (uint32_t w = 0; w < vocab && ok; ++w)
      ok = table.unigram_count(w) == (uni.count(w) ? uni[w] : 0);
    for (const auto& [pair, c] : bi)
      ok = ok && table.bigram_count(pair.first, pair.second) == c;
    uint64_t nnz = 0;
    for (const auto& row : table.rows()) nnz += row.size();
    ok = ok && nnz == bi.size();

    // smoothed distributions against the closed formulas
    auto p = table.unigram_distribution();
    for (uint32_t w = 0; w < vocab && ok; ++w) {
      const double expect =
          ((uni.count(w) ? static_cast<double>(uni[w]) : 0.0) + alpha) /
          (static_cast<double>(total) + alpha * vocab);
      ok = std::abs(p[w] - expect) <= 1e-12;
    }
    for (uint32_t prev = 0; prev < vocab && ok; ++prev) {
      const double denom =
          (as_prev.count(prev) ? static_cast<double>(as_prev[prev]) : 0.0) + alpha * vocab;
      if (denom <= 0.0) continue;
      auto cond = table.bigram_conditional(prev);
      for (uint32_t w = 0; w < vocab && ok; ++w) {
        const double c = bi.count({prev, w}) ? static_cast<double>(bi[{prev, w}]) : 0.0;
        ok = std::abs(cond[w] - (c + alpha) / denom) <= 1e-12;
      }
      if (alpha > 0.0) {
        auto mid = table.bidirectional_bigram(prev, 1);
        std::vector<double> expect(vocab);
        double z = 0.0;
        for (uint32_t w = 0; w < vocab; ++w) {
          const double left =
              ((bi.count({prev, w}) ? static_cast<double>(bi[{prev, w}]) : 0.0) + alpha) / denom;
          const double denom_w =
              (as_prev.count(w) ? static_cast<double>(as_prev[w]) : 0.0) + alpha * vocab;
          const double right =
              ((bi.count({w, 1}) ? static_cast<double>(bi[{w, 1}]) : 0.0) + alpha) / denom_w;
          expect[w] = left * right;
          z += expect[w];
        }
        for (uint32_t w = 0; w < vocab && ok; ++w)
          ok = std::abs(mid[w] - expect[w] / z) <= 1e-12;
      }
    }
    failures += !ok;
  };

  // fixture suite: random corpora, markov chains, and edge shapes, all <= 1K tokens
  for (uint64_t seed : {1, 2, 3, 4, 5}) {
    Rng rng(seed);
    TokenizedCorpus corpus;
    std::vector<uint32_t> seq;
    for (int i = 0; i < 940; ++i) {
      seq.push_back(static_cast<uint32_t>(rng.next_below(17)));
      if (rng.next_bernoulli(0.15)) {
        corpus.sequences.push_back(seq);
        seq.clear();
      }
    }
    if (!seq.empty()) corpus.sequences.push_back(seq);
    check_corpus(corpus, 17, 0.0);
    check_corpus(corpus, 17, 0.01);
    check_corpus(corpus, 17, 1.0);
  }
  for (uint64_t seed : {7, 8}) {
    auto mk = synthesize_markov_corpus(9, 0.2, 1000, seed);
    TokenizedCorpus corpus;
    for (const auto& line : mk.sentences) {
      std::vector<uint32_t> seq;
      size_t i = 0;
      while (i < line.size()) {
        size_t j = line.find(' ', i);
        if (j == std::string::npos) j = line.size();
        seq.push_back(static_cast<uint32_t>(std::stoul(line.substr(i + 1, j - i - 1))));
        i = j + 1;
      }
      corpus.sequences.push_back(std::move(seq));
    }
    check_corpus(corpus, 9, 0.01);
  }
  TokenizedCorpus edge;
  edge.sequences = {{0}, {1}, {2, 2}, {0, 1, 0, 1}};
  check_corpus(edge, 3, 0.5);

  detail = std::to_string(corpora) + " corpora checked, " + std::to_string(failures) +
           " mismatches";
  return failures == 0;
}

// ---- criterion 7: statistics oracle suite ----------------------------------------

bool criterion_stats_oracles(std::string& detail) {
  std::ostringstream ss;
  bool ok = true;

  {  // OLS vs long-double normal equations
    Rng rng(70);
    const Eigen::Index n = 30, p = 5;
    DesignMatrix d;
    d.X.resize(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
      d.names.push_back("c" + std::to_string(j));
      for (Eigen::Index i = 0; i < n; ++i)
        d.X(i, j) = j == 0 ? 1.0 : rng.next_gaussian();
    }
    Vec y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = rng.next_gaussian();
    auto fit = ols_fit(d, y);
    long double xtx[5][5] = {}, xty[5] = {};
    for (Eigen::Index i = 0; i < n; ++i)
      for (int a = 0; a < 5; ++a) {
        xty[a] += static_cast<long double>(d.X(i, a)) * y(i);
        for (int b = 0; b < 5; ++b)
          xtx[a][b] += static_cast<long double>(d.X(i, a)) * d.X(i, b);
      }
    for (int col = 0; col < 5; ++col) {
      int pivot = col;
      for (int r = col + 1; r < 5; ++r)
        if (fabsl(xtx[r][col]) > fabsl(xtx[pivot][col])) pivot = r;
      std::swap(xtx[col], xtx[pivot]);
      std::swap(xty[col], xty[pivot]);
      for (int r = 0; r < 5; ++r) {
        if (r == col) continue;
        const long double f = xtx[r][col] / xtx[col][col];
        for (int c = 0; c < 5; ++c) xtx[r][c] -= f * xtx[col][c];
        xty[r] -= f * xty[col];
      }
    }
    double worst = 0.0;
    for (int j = 0; j < 5; ++j)
      worst = std::max(worst,
                       std::abs(fit.coefficients(j) - static_cast<double>(xty[j] / xtx[j][j])));
    ss << "ols=" << worst << " ";
    ok = ok && worst <= 1e-9;
  }

  {  // LRT worked example
    RegressionResult full, reduced;
    full.names = {"(intercept)", "a"};
    full.n = 10;
    full.p = 2;
    full.rss = 1.0;
    reduced.names = {"(intercept)"};
    reduced.n = 10;
    reduced.p = 1;
    reduced.rss = 2.0;
    TestResult t = likelihood_ratio_test(full, reduced);
    ss << "lrt_p=" << t.p_value << " ";
    ok = ok && std::abs(t.statistic - 10.0 * std::log(2.0)) < 1e-9 &&
         std::abs(t.p_value - 0.0085) <= 1e-4;
  }

  {  // VIF = 4 construction
    Rng rng(71);
    Vec x1(64), e(64);
    for (int i = 0; i < 64; ++i) {
      x1(i) = rng.next_gaussian();
      e(i) = rng.next_gaussian();
    }
    x1.array() -= x1.mean();
    e.array() -= e.mean();
    e -= x1 * (x1.dot(e) / x1.squaredNorm());
    Vec x2 = x1 + (x1.norm() / (std::sqrt(3.0) * e.norm())) * e;
    DesignMatrix d;
    d.names = {"(intercept)", "x1", "x2"};
    d.X.resize(64, 3);
    d.X.col(0).setOnes();
    d.X.col(1) = x1;
    d.X.col(2) = x2;
    auto v = vif(d);
    ss << "vif=" << v[1].second << " ";
    ok = ok && std::abs(v[1].second - 4.0) <= 1e-6;
  }

  {  // studentized range critical value
    const double q = studentized_range_quantile(0.95, 3, 10.0);
    ss << "q(0.05,3,10)=" << q << " ";
    ok = ok && std::abs(q - 3.88) <= 0.01;
  }

  {  // Pearson closed form
    Rng rng(72);
    Vec a(20), b(20);
    for (int i = 0; i < 20; ++i) {
      a(i) = rng.next_gaussian();
      b(i) = rng.next_gaussian();
    }
    const double ma = a.mean(), mb = b.mean();
    double sab = 0, saa = 0, sbb = 0;
    for (int i = 0; i < 20; ++i) {
      sab += (a(i) - ma) * (b(i) - mb);
      saa += (a(i) - ma) * (a(i) - ma);
      sbb += (b(i) - mb) * (b(i) - mb);
    }
    const double direct = sab / std::sqrt(saa * sbb);
    const double err = std::abs(pearson(a, b) - direct);
    ss << "pearson_err=" << err;
    ok = ok && err <= 1e-12;
  }

  detail = ss.str();
  return ok;
}

// ---- criteria 8-11: the shared desk-scale run --------------------------------------

struct DeskRun {
  bool ready = false;
  std::string error;
  PipelineConfig cfg;
};

DeskRun prepare_desk_run() {
  DeskRun run;
  const auto fixture_dir = g_work / "fixture";
  if (!std::filesystem::exists(fixture_dir / "corpus.txt")) {
    NaturalCorpusSpec spec;  // ~5M tokens, ~8K word types
    spec.n_tokens = 5000000;
    spec.seed = 42;
    NaturalCorpus corpus = synthesize_natural_corpus(spec);
    std::ostringstream text;
    for (const auto& s : corpus.sentences) text << s << '\n';
    write_text_file(fixture_dir / "corpus.txt", text.str());
    std::ostringstream words;
    for (const auto& w : corpus.target_words) words << w << '\n';
    write_text_file(fixture_dir / "words.txt", words.str());
    std::ostringstream classes;
    classes << "word,class\n";
    for (const auto& [w, c] : corpus.lexical_classes) classes << w << ',' << c << '\n';
    write_text_file(fixture_dir / "lexical_class.csv", classes.str());
    std::ostringstream conc;
    conc << "word,score\n";
    for (const auto& [w, v] : corpus.concreteness) conc << w << ',' << format_double(v) << '\n';
    write_text_file(fixture_dir / "concreteness.csv", conc.str());
  }

  PipelineConfig& cfg = run.cfg;
  cfg.run_dir = g_work / "run";
  cfg.seed = 20260809;
  cfg.corpus.input = fixture_dir / "corpus.txt";
  cfg.corpus.words = fixture_dir / "words.txt";
  cfg.corpus.concreteness = fixture_dir / "concreteness.csv";
  cfg.corpus.lexical_class = fixture_dir / "lexical_class.csv";
  cfg.corpus.vocab_max = 8200;
  cfg.corpus.max_len = 64;
  cfg.corpus.eval_fraction = 0.25;
  cfg.model.hidden = 64;
  cfg.model.layers = 2;
  cfg.model.heads = 4;
  cfg.model.intermediate = 256;
  cfg.training.batch = 16;
  cfg.training.steps = 20000;  // the floor for this criterion
  cfg.training.learning_rate = 3e-4;
  cfg.training.warmup = 1000;
  cfg.training.log_every = 200;
  cfg.checkpoints.tiers = {{100, 1000}, {500, 10000}, {1000, 20000}};
  cfg.analysis.max_samples = 192;
  cfg.analysis.min_samples = 64;
  cfg.analysis.kl_sample = 4000;
  cfg.analysis.threads = 2;

  try {
    Pipeline pipeline(cfg);
    pipeline.prepare();

    // two concurrent per-architecture chains
    std::atomic<size_t> next{0};
    std::vector<std::string> errors(4);
    auto worker = [&]() {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= 4) break;
        const Architecture arch = kArchs[i];
        try {
          Pipeline p(run.cfg);
          p.train(arch);
          p.curves(arch);
          p.fit_aoa(arch);
          p.regress(arch, /*sweep=*/true);
          p.kl_trace_stage(arch);
        } catch (const std::exception& e) {
          errors[i] = architecture_name(arch) + std::string(": ") + e.what();
        }
      }
    };
    const int n_workers = std::min(2, hardware_threads());
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
      if (!e.empty()) {
        run.error = e;
        return run;
      }
    run.ready = true;
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  return run;
}

bool criterion_phase_signature(const DeskRun& run, std::string& detail) {
  if (!run.ready) {
    detail = "desk run unavailable: " + run.error;
    return false;
  }
  Pipeline pipeline(run.cfg);
  std::ostringstream ss;
  bool ok = true;
  for (Architecture arch : kArchs) {
    KLTrace trace = load_kl_trace_csv(pipeline.kl_trace_path(arch));
    PhaseSummary s = detect_phases(trace, 0.05);
    ss << architecture_name(arch) << "(uni dip " << s.unigram.dip_step << " depth "
       << s.unigram.dip_depth << " rise " << s.unigram.rise << "; bi dip " << s.bigram.dip_step
       << ") ";
    ok = ok && s.unigram.dip_depth > 0.05 && s.unigram.rise > 0.05 &&
         s.bigram.dip_step > s.unigram.dip_step;
  }
  detail = ss.str();
  return ok;
}

bool criterion_frequency_effect(const DeskRun& run, std::string& detail) {
  if (!run.ready) {
    detail = "desk run unavailable: " + run.error;
    return false;
  }
  Pipeline pipeline(run.cfg);
  std::ostringstream ss;
  bool ok = true;
  for (Architecture arch : kArchs) {
    json report = json::parse(read_text_file(pipeline.regression_report_path(arch)));
    double p = 1.0;
    int sign = 0;
    for (const auto& pred : report.at("predictors")) {
      if (pred.at("name") == "log_frequency") {
        p = pred.at("lrt_p").get<double>();
        sign = pred.at("sign").get<int>();
      }
    }
    const double freq_r2 = report.at("freq_only_adj_r2").get<double>();
    ss << architecture_name(arch) << "(sign " << sign << " p " << p << " R2 " << freq_r2
       << ") ";
    ok = ok && sign < 0 && p < 0.001 && freq_r2 > 0.5;
  }
  detail = ss.str();
  return ok;
}

bool criterion_min_surprisal(const DeskRun& run, std::string& detail) {
  if (!run.ready) {
    detail = "desk run unavailable: " + run.error;
    return false;
  }
  Pipeline pipeline(run.cfg);
  std::ostringstream ss;
  bool ok = true;
  for (Architecture arch : kArchs) {
    json report = json::parse(read_text_file(pipeline.regression_report_path(arch)));
    const double raw = report.at("min_surprisal").at("pearson_vs_aoa").get<double>();
    const double adj =
        report.at("min_surprisal").at("pearson_vs_aoa_freq_adjusted").get<double>();
    ss << architecture_name(arch) << "(r " << raw << " adj " << adj << ") ";
    ok = ok && raw > 0.0 && std::abs(adj) < std::abs(raw);
  }
  detail = ss.str();
  return ok;
}

bool criterion_cutoff_sweep(const DeskRun& run, std::string& detail) {
  if (!run.ready) {
    detail = "desk run unavailable: " + run.error;
    return false;
  }
  Pipeline pipeline(run.cfg);
  std::ostringstream ss;
  bool ok = true;
  for (Architecture arch : kArchs) {
    json sweep = json::parse(read_text_file(pipeline.sweep_report_path(arch)));
    int significant = 0, neg_significant = 0;
    for (const auto& entry : sweep) {
      if (entry.contains("error")) continue;
      if (entry.at("significant").get<bool>()) {
        ++significant;
        neg_significant += entry.at("log_frequency_sign").get<int>() < 0;
      }
    }
    ss << architecture_name(arch) << "(" << neg_significant << "/" << significant
       << " significant proportions negative) ";
    ok = ok && significant > 0 && neg_significant == significant;
  }
  detail = ss.str();
  return ok;
}

// ---- criterion 12: markov-fixture optimality ------------------------------------------

bool criterion_markov_optimality(std::string& detail) {
  const uint32_t chain_vocab = 500;
  const double end_prob = 0.1;
  MarkovCorpus corpus = synthesize_markov_corpus(chain_vocab, 0.05, 2000000, 77, end_prob);

  std::string text;
  for (const auto& s : corpus.sentences) text += s + "\n";
  auto sentences = tokenize_text(text);
  Vocabulary vocab = build_vocabulary(sentences, chain_vocab + 10, 1);
  TokenizedCorpus all = make_sequence_pairs(sentences, vocab, 64);
  auto [train_c, eval_c] = split_train_eval(all, 0.1, 3);

  ModelConfig mc;
  mc.architecture = Architecture::CausalTransformer;
  mc.vocab_size = vocab.size();
  mc.hidden_size = 64;
  mc.embedding_size = 64;
  mc.layers = 2;
  mc.heads = 4;
  mc.intermediate_size = 256;
  mc.max_seq_len = 64;
  mc.seed = 5;
  TrainConfig tc;
  tc.batch_size = 16;
  tc.total_steps = 5000;
  tc.learning_rate = 1e-3;
  tc.warmup_steps = 250;
  tc.log_every = 500;
  tc.seed = 5;

  const auto dir = g_work / "markov_run";
  CheckpointSchedule sched = build_checkpoint_schedule({{500, 5000}}, 5000);
  if (!std::filesystem::exists(dir / "index.json"))
    train_model(mc, tc, train_c, sched.steps, dir);
  CheckpointArchive archive = CheckpointArchive::open(dir);

  NGramTable ngram = NGramTable::count_ngrams(train_c, vocab.size(), 0.01);
  EvalSample sample = build_eval_sample(eval_c, 2000, 13);
  KLTrace trace = kl_trace(archive, eval_c, sample, ngram, hardware_threads());

  // Bayes floor: exact conditional entropy of the generating process at each
  // evaluated position (the chain is first-order given the previous token;
  // within the first sentence the next symbol may be SEP with the geometric
  // stop probability, after SEP the law is the stationary restart).
  std::vector<int> vocab_to_state(vocab.size(), -1);
  for (uint32_t id = Vocabulary::kNumSpecials; id < vocab.size(); ++id) {
    const std::string& tok = vocab.tokens[id];
    if (tok.size() > 1 && tok[0] == 'w') vocab_to_state[id] = std::stoi(tok.substr(1));
  }
  const double h_stationary = corpus.chain.stationary_entropy_bits();
  const double h_stop =
      -end_prob * std::log2(end_prob) - (1 - end_prob) * std::log2(1 - end_prob);
  double floor_sum = 0.0;
  for (const auto& e : sample.entries) {
    const auto& seq = eval_c.sequences[e.sequence_index];
    const uint32_t prev = seq[static_cast<size_t>(e.pos) - 1];
    double h;
    if (prev == Vocabulary::kSep) {
      h = h_stationary;
    } else {
      const int state = vocab_to_state[prev];
      const double h_row = corpus.chain.row_entropy_bits(static_cast<uint32_t>(state));
      // before the separator the次 symbol may close the sentence
      bool in_first = false;
      for (size_t i = static_cast<size_t>(e.pos); i < seq.size(); ++i)
        if (seq[i] == Vocabulary::kSep) {
          in_first = true;
          break;
        }
      h = in_first ? h_stop + (1 - end_prob) * h_row : h_row;
    }
    floor_sum += h;
  }
  const double floor_bits = floor_sum / static_cast<double>(sample.entries.size());

  double final_bigram_kl = trace.values.back().bigram;
  double worst_beat = 0.0;  // how far below the floor any checkpoint lands
  for (const auto& v : trace.values)
    worst_beat = std::max(worst_beat, floor_bits - v.onehot);
  const double final_unigram_kl = trace.values.back().unigram;

  std::ostringstream ss;
  ss << "final KL(bigram||model) " << final_bigram_kl << " bits; floor " << floor_bits
     << " bits, max floor-beat " << worst_beat << "; final KL(unigram||model) "
     << final_unigram_kl;
  detail = ss.str();
  return final_bigram_kl < 0.5 && worst_beat <= 0.05 && final_unigram_kl > final_bigram_kl;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--work-dir") == 0 && i + 1 < argc) g_work = argv[++i];
    if (std::strcmp(argv[i], "--threads") == 0 && i + 1 < argc) g_threads = std::atoi(argv[++i]);
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) g_only = argv[++i];
  }
  std::filesystem::create_directories(g_work);

  struct Criterion {
    int id;
    const char* name;
    std::function<bool(std::string&)> run;
  };

  // the desk run backs criteria 8-11; build it lazily on first use
  DeskRun desk;
  bool desk_built = false;
  auto ensure_desk = [&]() -> DeskRun& {
    if (!desk_built) {
      std::cout << "[....] building the shared desk-scale run (4 architectures x 20000 steps)"
                << std::endl;
      desk = prepare_desk_run();
      desk_built = true;
    }
    return desk;
  };

  const std::vector<Criterion> criteria = {
      {1, "checkpoint schedule materializes 208 steps", criterion_schedule},
      {2, "random-chance baseline log2(30004) = 14.87 bits", criterion_baseline},
      {3, "gradient checks below 1e-4 for all architectures", criterion_gradients},
      {4, "information-flow invariants bitwise over 100 trials", criterion_information_flow},
      {5, "sigmoid recovery within 1% on 95 of 100 noisy curves", criterion_sigmoid_recovery},
      {6, "n-gram tables match brute-force enumeration exactly", criterion_ngram_oracle},
      {7, "statistics oracle suite", criterion_stats_oracles},
      {8, "unigram-then-bigram phase signature on the desk run",
       [&](std::string& d) { return criterion_phase_signature(ensure_desk(), d); }},
      {9, "negative log-frequency effect with adjusted R2 > 0.5",
       [&](std::string& d) { return criterion_frequency_effect(ensure_desk(), d); }},
      {10, "min-surprisal vs AoA correlation shrinks when adjusted",
       [&](std::string& d) { return criterion_min_surprisal(ensure_desk(), d); }},
      {11, "log-frequency sign invariant across cutoff proportions",
       [&](std::string& d) { return criterion_cutoff_sweep(ensure_desk(), d); }},
      {12, "markov-fixture optimality and entropy floor", criterion_markov_optimality},
  };

  auto selected = [&](int id) {
    if (g_only.empty()) return true;
    for (const auto& part : split_on(g_only, ','))
      if (!part.empty() && std::stoi(part) == id) return true;
    return false;
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected(c.id)) continue;
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    failures += !ok;
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << c.id << ": " << c.name << " — "
              << detail << std::endl;
  }
  std::cout << (failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES: " + std::to_string(failures))
            << std::endl;
  return failures == 0 ? 0 : 1;
}
