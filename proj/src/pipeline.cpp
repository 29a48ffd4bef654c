#include "wordacq/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <iostream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "wordacq/acquisition.hpp"
#include "wordacq/distributional.hpp"
#include "wordacq/errors.hpp"
#include "wordacq/io_util.hpp"
#include "wordacq/ngram.hpp"
#include "wordacq/stats.hpp"
#include "wordacq/svgplot.hpp"

namespace wordacq {

using nlohmann::json;

RunLock::RunLock(const std::filesystem::path& run_dir) {
  std::filesystem::create_directories(run_dir);
  lock_path_ = run_dir / ".lock";
  const int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0)
    throw ConfigError("run directory is locked by another invocation (" + lock_path_.string() +
                      " exists)");
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] ssize_t n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
  held_ = true;
}

RunLock::~RunLock() {
  if (held_) {
    std::error_code ec;
    std::filesystem::remove(lock_path_, ec);
  }
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  std::filesystem::create_directories(config_.run_dir);
  write_text_file(config_.run_dir / "config_resolved.ini", config_.render());
}

std::filesystem::path Pipeline::vocab_path() const { return config_.run_dir / "vocab.tsv"; }
std::filesystem::path Pipeline::train_corpus_path() const {
  return config_.run_dir / "train_corpus.bin";
}
std::filesystem::path Pipeline::eval_corpus_path() const {
  return config_.run_dir / "eval_corpus.bin";
}
std::filesystem::path Pipeline::predictors_path() const {
  return config_.run_dir / "predictors.csv";
}
std::filesystem::path Pipeline::ngram_path() const { return config_.run_dir / "ngram.bin"; }
std::filesystem::path Pipeline::model_dir(Architecture arch) const {
  return config_.run_dir / "models" / architecture_name(arch);
}
std::filesystem::path Pipeline::curves_path(Architecture arch) const {
  return model_dir(arch) / "learning_curves.csv";
}
std::filesystem::path Pipeline::aoa_path(Architecture arch) const {
  return model_dir(arch) / "aoa.csv";
}
std::filesystem::path Pipeline::regression_report_path(Architecture arch) const {
  return model_dir(arch) / "regression_report.json";
}
std::filesystem::path Pipeline::sweep_report_path(Architecture arch) const {
  return model_dir(arch) / "sweep_report.json";
}
std::filesystem::path Pipeline::kl_trace_path(Architecture arch) const {
  return model_dir(arch) / "kl_trace.csv";
}
std::filesystem::path Pipeline::phase_summary_path(Architecture arch) const {
  return model_dir(arch) / "phase_summary.json";
}

std::filesystem::path Pipeline::manifest_path(const std::string& stage) const {
  return config_.run_dir / "manifests" / (stage + ".json");
}

void Pipeline::require_manifest(const std::string& stage) const {
  if (!std::filesystem::exists(manifest_path(stage)))
    throw MissingUpstreamError("stage '" + stage + "' has not been run for this run directory");
}

namespace {

json hash_map(const std::vector<std::filesystem::path>& files) {
  json j = json::object();
  for (const auto& f : files) j[f.string()] = hash_hex(hash_file(f));
  return j;
}

}  // namespace

bool Pipeline::manifest_matches(const std::string& stage,
                                const std::vector<std::filesystem::path>& inputs,
                                const std::string& config_fingerprint,
                                const std::vector<std::filesystem::path>& outputs) const {
  const auto path = manifest_path(stage);
  if (!std::filesystem::exists(path)) return false;
  for (const auto& f : outputs)
    if (!std::filesystem::exists(f)) return false;
  try {
    json m = json::parse(read_text_file(path));
    if (m.at("config_fingerprint").get<std::string>() !=
        hash_hex(fnv1a64(config_fingerprint)))
      return false;
    if (m.at("inputs") != hash_map(inputs)) return false;
    if (m.at("outputs") != hash_map(outputs)) return false;
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

void Pipeline::write_manifest(const std::string& stage,
                              const std::vector<std::filesystem::path>& inputs,
                              const std::string& config_fingerprint,
                              const std::vector<std::filesystem::path>& outputs) const {
  json m{{"stage", stage},
         {"inputs", hash_map(inputs)},
         {"config_fingerprint", hash_hex(fnv1a64(config_fingerprint))},
         {"outputs", hash_map(outputs)}};
  write_text_file(manifest_path(stage), m.dump(2) + "\n");
}

// ---- prepare ---------------------------------------------------------------

StageResult Pipeline::prepare(bool dump_ngram_tables) {
  const auto& cc = config_.corpus;
  std::vector<std::filesystem::path> inputs;
  std::string missing;
  for (const auto& p : {cc.input, cc.words}) {
    if (p.empty() || !std::filesystem::exists(p)) missing += " " + p.string();
  }
  if (!missing.empty()) throw ConfigError("missing input files:" + missing);
  inputs = {cc.input, cc.words};
  if (!cc.concreteness.empty()) {
    if (!std::filesystem::exists(cc.concreteness))
      throw ConfigError("missing input files: " + cc.concreteness.string());
    inputs.push_back(cc.concreteness);
  }
  if (!cc.lexical_class.empty()) {
    if (!std::filesystem::exists(cc.lexical_class))
      throw ConfigError("missing input files: " + cc.lexical_class.string());
    inputs.push_back(cc.lexical_class);
  }

  std::ostringstream fp;
  fp << "prepare|" << cc.vocab_max << '|' << cc.min_count << '|' << cc.max_len << '|'
     << cc.eval_fraction << '|' << config_.analysis.smoothing_alpha << '|' << config_.seed
     << '|' << dump_ngram_tables;

  std::vector<std::filesystem::path> outputs = {vocab_path(), train_corpus_path(),
                                                eval_corpus_path(), predictors_path(),
                                                ngram_path()};
  if (dump_ngram_tables) {
    outputs.push_back(config_.run_dir / "ngram_unigrams.tsv");
    outputs.push_back(config_.run_dir / "ngram_bigrams.tsv");
  }
  if (manifest_matches("prepare", inputs, fp.str(), outputs)) return {true, {}};

  auto sentences = tokenize_text(read_text_file(cc.input));
  Vocabulary vocab = build_vocabulary(sentences, cc.vocab_max, cc.min_count);
  TokenizedCorpus corpus = make_sequence_pairs(sentences, vocab, cc.max_len);
  auto [train_c, eval_c] =
      split_train_eval(corpus, cc.eval_fraction, Rng(config_.seed).derive(0x5eed).next_u64());

  std::vector<std::string> words = read_lines(cc.words);
  words.erase(std::remove_if(words.begin(), words.end(),
                             [](const std::string& w) { return w.empty(); }),
              words.end());

  std::optional<std::unordered_map<std::string, double>> concreteness;
  if (!cc.concreteness.empty()) concreteness = load_concreteness_csv(cc.concreteness);
  std::optional<std::unordered_map<std::string, std::string>> lexical;
  if (!cc.lexical_class.empty()) lexical = load_lexical_class_csv(cc.lexical_class);

  std::vector<std::string> warnings;
  PredictorTable predictors =
      compute_predictors(train_c, vocab, words, concreteness ? &*concreteness : nullptr,
                         lexical ? &*lexical : nullptr, &warnings);
  for (const auto& w : warnings) std::cerr << "prepare: " << w << "\n";

  NGramTable ngram =
      NGramTable::count_ngrams(train_c, vocab.size(), config_.analysis.smoothing_alpha);

  vocab.save_tsv(vocab_path());
  train_c.save(train_corpus_path());
  eval_c.save(eval_corpus_path());
  predictors.save_csv(predictors_path());
  ngram.save(ngram_path());
  if (dump_ngram_tables) {
    ngram.save_unigrams_tsv(config_.run_dir / "ngram_unigrams.tsv");
    ngram.save_bigrams_tsv(config_.run_dir / "ngram_bigrams.tsv");
  }

  write_manifest("prepare", inputs, fp.str(), outputs);
  StageResult r;
  for (const auto& o : outputs) r.outputs.push_back(o.string());
  return r;
}

// ---- train -----------------------------------------------------------------

StageResult Pipeline::train(Architecture arch) {
  require_manifest("prepare");
  Vocabulary vocab = Vocabulary::load_tsv(vocab_path());
  ModelConfig mc = config_.model_config(arch, vocab.size());
  TrainConfig tc = config_.train_config();
  CheckpointSchedule sched =
      build_checkpoint_schedule(config_.checkpoints.tiers, tc.total_steps);

  std::ostringstream fp;
  fp << "train|" << architecture_name(arch) << '|' << mc.hidden_size << '|' << mc.layers << '|'
     << mc.heads << '|' << mc.intermediate_size << '|' << mc.dropout << '|'
     << mc.mask_proportion << '|' << mc.init_scale << '|' << mc.init_dist << '|' << mc.seed
     << '|' << tc.batch_size << '|' << tc.total_steps << '|' << tc.learning_rate << '|'
     << tc.warmup_steps << '|' << tc.clip_norm << '|' << tc.seed;
  for (int64_t s : sched.steps) fp << ',' << s;

  const auto dir = model_dir(arch);
  std::vector<std::filesystem::path> inputs = {train_corpus_path()};
  std::vector<std::filesystem::path> outputs = {dir / "manifest.json", dir / "index.json"};
  if (manifest_matches("train_" + architecture_name(arch), inputs, fp.str(), outputs))
    return {true, {}};

  TokenizedCorpus train_c = TokenizedCorpus::load(train_corpus_path());
  train_model(mc, tc, train_c, sched.steps, dir, hash_hex(hash_file(train_corpus_path())));
  write_manifest("train_" + architecture_name(arch), inputs, fp.str(), outputs);
  return {false, {dir.string()}};
}

// ---- curves ------------------------------------------------------------------

StageResult Pipeline::curves(Architecture arch) {
  require_manifest("prepare");
  require_manifest("train_" + architecture_name(arch));

  const auto& an = config_.analysis;
  std::ostringstream fp;
  fp << "curves|" << an.max_samples << '|' << an.min_context << '|' << an.min_samples << '|'
     << config_.seed;

  std::vector<std::filesystem::path> inputs = {eval_corpus_path(), predictors_path(),
                                               model_dir(arch) / "index.json"};
  std::vector<std::filesystem::path> outputs = {curves_path(arch)};
  if (manifest_matches("curves_" + architecture_name(arch), inputs, fp.str(), outputs))
    return {true, {}};

  Vocabulary vocab = Vocabulary::load_tsv(vocab_path());
  TokenizedCorpus eval_c = TokenizedCorpus::load(eval_corpus_path());
  PredictorTable predictors = PredictorTable::load_csv(predictors_path());
  CheckpointArchive archive = CheckpointArchive::open(model_dir(arch));
  const Direction dir = archive.model_config.direction();

  SamplingConfig sc;
  sc.max_samples = an.max_samples;
  sc.min_context = an.min_context;
  sc.min_samples = an.min_samples;
  const uint64_t occ_seed =
      Rng(config_.seed).derive(0x0cc + static_cast<uint64_t>(dir)).next_u64();

  std::vector<OccurrenceSet> sets;
  for (const auto& row : predictors.rows) {
    if (row.zero_frequency) continue;
    OccurrenceSet set = sample_occurrences(eval_c, vocab, row.word, sc, dir, occ_seed);
    if (set.occurrences.empty()) {
      std::cerr << "curves: word '" << row.word << "' has no eligible occurrences; skipped\n";
      continue;
    }
    sets.push_back(std::move(set));
  }
  if (sets.empty()) throw ConfigError("curves: no word has eligible occurrences");

  auto curves = build_learning_curves(archive, eval_c, sets, an.threads);
  save_learning_curves_csv(curves, curves_path(arch));
  write_manifest("curves_" + architecture_name(arch), inputs, fp.str(), outputs);
  return {false, {curves_path(arch).string()}};
}

// ---- fit-aoa -------------------------------------------------------------------

StageResult Pipeline::fit_aoa(Architecture arch) {
  require_manifest("curves_" + architecture_name(arch));

  std::ostringstream fp;
  fp << "fit_aoa|" << config_.analysis.proportion;
  std::vector<std::filesystem::path> inputs = {curves_path(arch), vocab_path()};
  std::vector<std::filesystem::path> outputs = {aoa_path(arch)};
  if (manifest_matches("fit_aoa_" + architecture_name(arch), inputs, fp.str(), outputs))
    return {true, {}};

  Vocabulary vocab = Vocabulary::load_tsv(vocab_path());
  const double baseline = chance_baseline_bits(vocab.size());
  auto curves = load_learning_curves_csv(curves_path(arch));

  std::vector<AoAResult> results;
  for (const auto& curve : curves) {
    SigmoidFit fit = fit_sigmoid(curve, baseline);
    MinSurprisal ms = min_surprisal(curve);
    AoAResult aoa = extract_aoa(fit, ms, vocab.size(), config_.analysis.proportion);
    if (fit.hit_bound)
      std::cerr << "fit-aoa: '" << curve.word
                << "' bounded fit pinned at a bound; unbounded upper asymptote "
                << fit.unbounded_upper << " bits, midpoint " << fit.unbounded_midpoint
                << " log10 steps\n";
    if (!fit.degenerate) {
      MidpointAoA mid = midpoint_aoa(fit);
      if (mid.outside_span)
        std::cerr << "fit-aoa: '" << curve.word << "' sigmoid midpoint " << mid.aoa
                  << " lies outside the observed span\n";
    }
    results.push_back(std::move(aoa));
  }
  save_aoa_csv(results, aoa_path(arch));
  write_manifest("fit_aoa_" + architecture_name(arch), inputs, fp.str(), outputs);
  return {false, {aoa_path(arch).string()}};
}

// ---- regress ---------------------------------------------------------------------

namespace {

// Under-sampled flags live in the curves artifact; regressions exclude those
// words.
void apply_under_sampled_flags(PredictorTable& predictors,
                               const std::vector<LearningCurve>& curves) {
  for (const auto& c : curves)
    if (c.under_sampled) {
      if (PredictorRow* row = predictors.find(c.word)) row->under_sampled = true;
    }
}

}  // namespace

StageResult Pipeline::regress(Architecture arch, bool sweep_cutoff_proportions) {
  require_manifest("fit_aoa_" + architecture_name(arch));

  std::ostringstream fp;
  fp << "regress|" << config_.analysis.quadratic_log_frequency << '|'
     << sweep_cutoff_proportions;
  std::vector<std::filesystem::path> inputs = {aoa_path(arch), predictors_path(),
                                               curves_path(arch)};
  std::vector<std::filesystem::path> outputs = {regression_report_path(arch),
                                                model_dir(arch) / "regression_report.txt"};
  if (sweep_cutoff_proportions) outputs.push_back(sweep_report_path(arch));
  if (manifest_matches("regress_" + architecture_name(arch), inputs, fp.str(), outputs))
    return {true, {}};

  PredictorTable predictors = PredictorTable::load_csv(predictors_path());
  apply_under_sampled_flags(predictors, load_learning_curves_csv(curves_path(arch)));
  std::vector<AoAResult> aoa = load_aoa_csv(aoa_path(arch));

  BatteryOptions options;
  options.quadratic_log_frequency = config_.analysis.quadratic_log_frequency;
  RegressionReport report = run_regression_battery(predictors, aoa, options);
  write_text_file(regression_report_path(arch), report.to_json_text());
  write_text_file(model_dir(arch) / "regression_report.txt", report.to_table_text());

  if (sweep_cutoff_proportions) {
    Vocabulary vocab = Vocabulary::load_tsv(vocab_path());
    json sweep = json::array();
    for (double prop : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
      std::vector<AoAResult> column;
      for (const auto& r : aoa) {
        MinSurprisal ms{r.word, r.min_surprisal_bits, r.min_step};
        column.push_back(extract_aoa(r.fit, ms, vocab.size(), prop));
      }
      json entry{{"proportion", prop}};
      try {
        RegressionReport rr = run_regression_battery(predictors, column, options);
        for (const auto& f : rr.predictors)
          if (f.name == "log_frequency") {
            entry["log_frequency_sign"] = f.sign;
            entry["log_frequency_p"] = f.lrt.p_value;
            entry["significant"] = f.significant;
          }
        entry["adj_r_squared"] = rr.overall.adj_r_squared;
        entry["n_used"] = rr.n_used;
      } catch (const std::exception& e) {
        entry["error"] = e.what();
      }
      sweep.push_back(std::move(entry));
    }
    write_text_file(sweep_report_path(arch), sweep.dump(2) + "\n");
  }
  write_manifest("regress_" + architecture_name(arch), inputs, fp.str(), outputs);
  return {false, {regression_report_path(arch).string()}};
}

// ---- kl-trace ----------------------------------------------------------------------

StageResult Pipeline::kl_trace_stage(Architecture arch) {
  require_manifest("prepare");
  require_manifest("train_" + architecture_name(arch));

  const auto& an = config_.analysis;
  std::ostringstream fp;
  fp << "kl|" << an.kl_sample << '|' << an.phase_margin << '|' << config_.seed;
  std::vector<std::filesystem::path> inputs = {eval_corpus_path(), ngram_path(),
                                               model_dir(arch) / "index.json"};
  std::vector<std::filesystem::path> outputs = {kl_trace_path(arch), phase_summary_path(arch)};
  if (manifest_matches("kl_" + architecture_name(arch), inputs, fp.str(), outputs))
    return {true, {}};

  TokenizedCorpus eval_c = TokenizedCorpus::load(eval_corpus_path());
  NGramTable ngram = NGramTable::load(ngram_path());
  CheckpointArchive archive = CheckpointArchive::open(model_dir(arch));
  EvalSample sample = build_eval_sample(eval_c, an.kl_sample,
                                        Rng(config_.seed).derive(0x16b).next_u64());
  KLTrace trace = kl_trace(archive, eval_c, sample, ngram, an.threads);
  save_kl_trace_csv(trace, kl_trace_path(arch));
  PhaseSummary phases = detect_phases(trace, an.phase_margin);
  write_text_file(phase_summary_path(arch), phase_summary_json(phases, trace.model));
  write_manifest("kl_" + architecture_name(arch), inputs, fp.str(), outputs);
  return {false, {kl_trace_path(arch).string(), phase_summary_path(arch).string()}};
}

// ---- report ------------------------------------------------------------------------

std::string Pipeline::report_first_last(const std::vector<Architecture>& archs,
                                        double percentile) const {
  if (archs.empty()) throw ConfigError("report: need at least one architecture");
  PredictorTable predictors = PredictorTable::load_csv(predictors_path());

  // Frequency percentile of each word among the predictor rows (1 = most
  // frequent) for the qualitative frequency check.
  std::vector<std::pair<double, std::string>> by_freq;
  for (const auto& r : predictors.rows)
    if (!r.zero_frequency) by_freq.emplace_back(r.log_frequency, r.word);
  std::sort(by_freq.begin(), by_freq.end(), std::greater<>());
  std::map<std::string, double> freq_rank;  // 0 = most frequent
  for (size_t i = 0; i < by_freq.size(); ++i)
    freq_rank[by_freq[i].second] =
        static_cast<double>(i) / std::max<size_t>(1, by_freq.size() - 1);

  json out;
  out["percentile"] = percentile;
  std::optional<std::set<std::string>> first_inter, last_inter;
  for (Architecture arch : archs) {
    require_manifest("fit_aoa_" + architecture_name(arch));
    std::vector<AoAResult> aoa = load_aoa_csv(aoa_path(arch));
    std::vector<std::pair<double, std::string>> acquired;
    for (const auto& r : aoa)
      if (r.status == AoAStatus::Acquired) acquired.emplace_back(r.aoa, r.word);
    if (acquired.size() < 20)
      throw ConfigError("report: fewer than 20 acquired words for " +
                        architecture_name(arch));
    std::sort(acquired.begin(), acquired.end());
    const size_t k = std::max<size_t>(
        1, static_cast<size_t>(std::floor(percentile * static_cast<double>(acquired.size()))));

    std::set<std::string> first, last;
    for (size_t i = 0; i < k; ++i) first.insert(acquired[i].second);
    for (size_t i = acquired.size() - k; i < acquired.size(); ++i)
      last.insert(acquired[i].second);

    json jm;
    jm["first"] = first;
    jm["last"] = last;
    json fr = json::object();
    for (const auto& w : first)
      if (freq_rank.count(w)) fr[w] = freq_rank[w];
    jm["first_word_frequency_percentile"] = fr;
    out["models"][architecture_name(arch)] = jm;

    auto intersect = [](std::optional<std::set<std::string>>& acc,
                        const std::set<std::string>& s) {
      if (!acc) {
        acc = s;
        return;
      }
      std::set<std::string> merged;
      std::set_intersection(acc->begin(), acc->end(), s.begin(), s.end(),
                            std::inserter(merged, merged.begin()));
      *acc = std::move(merged);
    };
    intersect(first_inter, first);
    intersect(last_inter, last);
  }
  out["first_all_models"] = *first_inter;  // may be empty; that is a result, not an error
  out["last_all_models"] = *last_inter;
  return out.dump(2) + "\n";
}

// ---- plots --------------------------------------------------------------------------

std::vector<std::filesystem::path> Pipeline::plot_curves(
    Architecture arch, const std::vector<std::string>& words) const {
  require_manifest("fit_aoa_" + architecture_name(arch));
  auto curves = load_learning_curves_csv(curves_path(arch));
  auto aoa = load_aoa_csv(aoa_path(arch));
  Vocabulary vocab = Vocabulary::load_tsv(vocab_path());
  NGramTable ngram = NGramTable::load(ngram_path());
  auto unigram = ngram.unigram_distribution();

  const auto plot_dir = config_.run_dir / "plots" / architecture_name(arch);
  std::filesystem::create_directories(plot_dir);
  std::vector<std::filesystem::path> outputs;
  for (const std::string& word : words) {
    const LearningCurve* curve = nullptr;
    for (const auto& c : curves)
      if (c.word == word) curve = &c;
    const AoAResult* result = nullptr;
    for (const auto& r : aoa)
      if (r.word == word) result = &r;
    if (!curve || !result) throw ConfigError("plot: unknown word '" + word + "'");
    const double unigram_surprisal = -std::log2(unigram[vocab.id_of(word)]);
    const auto file = plot_dir / ("curve_" + word + ".svg");
    write_text_file(file, render_learning_curve_svg(*curve, *result, unigram_surprisal));
    outputs.push_back(file);
  }
  return outputs;
}

std::filesystem::path Pipeline::plot_kl(Architecture arch) const {
  require_manifest("kl_" + architecture_name(arch));
  KLTrace trace = load_kl_trace_csv(kl_trace_path(arch));
  const auto plot_dir = config_.run_dir / "plots" / architecture_name(arch);
  std::filesystem::create_directories(plot_dir);
  const auto file = plot_dir / ("kl_" + architecture_name(arch) + ".svg");
  write_text_file(file, render_kl_trace_svg(trace));
  return file;
}

}  // namespace wordacq
