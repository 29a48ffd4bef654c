#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wordacq/errors.hpp"
#include "wordacq/models.hpp"
#include "wordacq/trajectory.hpp"

using namespace wordacq;

TEST_CASE("the four-tier training schedule materializes exactly 208 checkpoints") {
  auto sched = build_checkpoint_schedule(paper_schedule_tiers(1000000), 1000000);
  CHECK(sched.steps.size() == 208);
  CHECK(sched.steps.front() == 100);
  CHECK(sched.steps.back() == 1000000);
  for (size_t i = 1; i < sched.steps.size(); ++i) CHECK(sched.steps[i] > sched.steps[i - 1]);
}

TEST_CASE("single tier and overlap deduplication") {
  auto single = build_checkpoint_schedule({{10, 100}}, 100);
  CHECK(single.steps == std::vector<int64_t>{10, 20, 30, 40, 50, 60, 70, 80, 90, 100});

  auto overlap = build_checkpoint_schedule({{500, 1000}, {1000, 2000}}, 2000);
  int count_1000 = 0;
  for (int64_t s : overlap.steps) count_1000 += s == 1000;
  CHECK(count_1000 == 1);
}

TEST_CASE("schedule materialization is order-independent across equivalent tiers") {
  auto a = build_checkpoint_schedule({{10, 100}, {50, 200}}, 200);
  auto b = build_checkpoint_schedule({{10, 50}, {10, 100}, {50, 200}}, 200);
  CHECK(a.steps == b.steps);
}

TEST_CASE("schedule validation") {
  CHECK_THROWS_AS(build_checkpoint_schedule({{500, 1000}, {100, 900}}, 1000), ConfigError);
  CHECK_THROWS_AS(build_checkpoint_schedule({{3, 100}}, 100), ConfigError);  // 100 % 3 != 0
  CHECK_THROWS_AS(build_checkpoint_schedule({{10, 100}}, 200), ConfigError); // bound != total
  CHECK_THROWS_AS(build_checkpoint_schedule({}, 100), ConfigError);
}

namespace {

// A model whose output distribution is an arbitrary fixed softmax(bias):
// every weight zero, out_bias = ln(p).
LMParameters fixed_distribution_model(const std::vector<double>& p, Architecture arch) {
  ModelConfig cfg;
  cfg.architecture = arch;
  cfg.vocab_size = static_cast<uint32_t>(p.size());
  cfg.hidden_size = 8;
  cfg.embedding_size = 8;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.intermediate_size = 16;
  cfg.max_seq_len = 64;
  cfg.init_scale = 0.0;
  LMParameters params = init_model(cfg);
  for (size_t i = 0; i < p.size(); ++i)
    params.out_bias.value(0, static_cast<Eigen::Index>(i)) = std::log(p[i]);
  return params;
}

TokenizedCorpus constant_corpus(size_t n_seqs, size_t len, uint32_t fill) {
  TokenizedCorpus c;
  for (size_t i = 0; i < n_seqs; ++i)
    c.sequences.push_back(std::vector<uint32_t>(len, fill));
  return c;
}

OccurrenceSet occurrences_at(const std::string& word, uint32_t id, size_t n, uint32_t pos,
                             Direction dir) {
  OccurrenceSet set;
  set.word = word;
  set.word_id = id;
  set.direction = dir;
  for (size_t i = 0; i < n; ++i) set.occurrences.push_back({static_cast<uint32_t>(i), pos});
  return set;
}

}  // namespace

TEST_CASE("evaluate_word_surprisal: two occurrences at probability 1/4 give 2 bits") {
  std::vector<double> dist(8, 0.75 / 7.0);
  dist[6] = 0.25;
  LMParameters p = fixed_distribution_model(dist, Architecture::Lstm);
  TokenizedCorpus eval_c = constant_corpus(2, 20, 6);
  OccurrenceSet set = occurrences_at("w6", 6, 2, 10, Direction::Unidirectional);
  auto [mean, n] = evaluate_word_surprisal(p, eval_c, set);
  CHECK(n == 2);
  CHECK(mean == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("evaluate_word_surprisal is the arithmetic mean over occurrences") {
  // 1-bit and 3-bit occurrences -> 2.0 bits. Craft with a causal LSTM whose
  // prediction depends on nothing, then mix two occurrence sets by hand.
  std::vector<double> half(8, 0.5 / 7.0);
  half[3] = 0.5;  // 1 bit
  std::vector<double> eighth(8, 0.875 / 7.0);
  eighth[3] = 0.125;  // 3 bits
  LMParameters p1 = fixed_distribution_model(half, Architecture::Lstm);
  LMParameters p8 = fixed_distribution_model(eighth, Architecture::Lstm);
  TokenizedCorpus eval_c = constant_corpus(1, 20, 3);
  OccurrenceSet one = occurrences_at("w3", 3, 1, 10, Direction::Unidirectional);
  auto [s1, n1] = evaluate_word_surprisal(p1, eval_c, one);
  auto [s8, n8] = evaluate_word_surprisal(p8, eval_c, one);
  CHECK(s1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s8 == doctest::Approx(3.0).epsilon(1e-12));
  CHECK((s1 * n1 + s8 * n8) / (n1 + n8) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("uniform model over 30004 tokens scores the chance baseline") {
  ModelConfig cfg;
  cfg.architecture = Architecture::Lstm;
  cfg.vocab_size = 30004;
  cfg.hidden_size = 8;
  cfg.embedding_size = 8;
  cfg.layers = 1;
  cfg.init_scale = 0.0;
  LMParameters p = init_model(cfg);
  TokenizedCorpus eval_c = constant_corpus(1, 16, 1234);
  OccurrenceSet set = occurrences_at("w", 1234, 1, 9, Direction::Unidirectional);
  auto [mean, n] = evaluate_word_surprisal(p, eval_c, set);
  CHECK(n == 1);
  CHECK(mean == doctest::Approx(std::log2(30004.0)).epsilon(1e-12));
  CHECK(std::abs(mean - 14.87) < 0.05);
  CHECK_THROWS_AS(evaluate_word_surprisal(p, eval_c, OccurrenceSet{}), ConfigError);
}

TEST_CASE("build_learning_curves covers the whole archive for every word") {
  // tiny real training run: 3 scheduled checkpoints + the step-0 anchor
  ModelConfig mc;
  mc.architecture = Architecture::Lstm;
  mc.vocab_size = 30;
  mc.hidden_size = 8;
  mc.embedding_size = 8;
  mc.layers = 1;
  mc.seed = 4;
  TrainConfig tc;
  tc.batch_size = 4;
  tc.total_steps = 30;
  tc.log_every = 10;
  tc.seed = 4;
  Rng rng(2);
  TokenizedCorpus train_c;
  for (int i = 0; i < 60; ++i) {
    std::vector<uint32_t> seq(12);
    for (auto& id : seq) id = 4 + static_cast<uint32_t>(rng.next_below(26));
    train_c.sequences.push_back(seq);
  }
  const auto dir = std::filesystem::temp_directory_path() / "wordacq_traj_test";
  std::filesystem::remove_all(dir);
  train_model(mc, tc, train_c, {10, 20, 30}, dir);
  CheckpointArchive archive = CheckpointArchive::open(dir);
  REQUIRE(archive.entries.size() == 4);

  TokenizedCorpus eval_c;
  for (int i = 0; i < 20; ++i) {
    std::vector<uint32_t> seq(20, 5);
    seq[9] = 7;
    seq[12] = 8;
    eval_c.sequences.push_back(seq);
  }
  std::vector<OccurrenceSet> sets;
  sets.push_back(occurrences_at("w7", 7, 20, 9, Direction::Unidirectional));
  sets.push_back(occurrences_at("w8", 8, 20, 12, Direction::Unidirectional));
  sets[1].under_sampled = true;  // flag must pass through to the curve

  auto curves = build_learning_curves(archive, eval_c, sets, 2);
  REQUIRE(curves.size() == 2);
  for (const auto& c : curves) {
    CHECK(c.points.size() == 4);  // every archived step, step 0 included
    for (size_t i = 0; i < c.points.size(); ++i) {
      CHECK(c.points[i].step == archive.entries[i].step);
      CHECK(c.points[i].n_samples == 20);
      CHECK(std::isfinite(c.points[i].mean_surprisal_bits));
      CHECK(c.points[i].mean_surprisal_bits >= 0.0);
    }
  }
  CHECK(curves[1].under_sampled);
  CHECK(!curves[0].under_sampled);

  // re-evaluation is bit-identical and thread-count independent
  auto again1 = build_learning_curves(archive, eval_c, sets, 1);
  auto again3 = build_learning_curves(archive, eval_c, sets, 3);
  for (size_t w = 0; w < curves.size(); ++w)
    for (size_t i = 0; i < curves[w].points.size(); ++i) {
      CHECK(curves[w].points[i].mean_surprisal_bits ==
            again1[w].points[i].mean_surprisal_bits);
      CHECK(curves[w].points[i].mean_surprisal_bits ==
            again3[w].points[i].mean_surprisal_bits);
    }

  // per-word mean agrees with an independent per-occurrence oracle
  LMParameters p30 = archive.load_step(30);
  double oracle = 0.0;
  for (const auto& occ : sets[0].occurrences) {
    Vec dist = predict_distribution(p30, eval_c.sequences[occ.sequence_index],
                                    static_cast<int>(occ.position));
    oracle += -std::log2(dist(7));
  }
  oracle /= static_cast<double>(sets[0].occurrences.size());
  CHECK(curves[0].points[3].mean_surprisal_bits == doctest::Approx(oracle).epsilon(1e-9));

  // missing checkpoint -> error naming the step
  std::filesystem::remove(dir / archive.entries[2].file);
  CHECK_THROWS_AS(build_learning_curves(archive, eval_c, sets, 2), std::exception);
  std::filesystem::remove_all(dir);
}

TEST_CASE("learning curves CSV round-trip") {
  std::vector<LearningCurve> curves(2);
  curves[0].word = "alpha";
  curves[0].points = {{0, 5.0, 10}, {100, 4.0, 10}};
  curves[1].word = "beta";
  curves[1].under_sampled = true;
  curves[1].points = {{0, 6.5, 3}, {100, 6.1, 3}};
  const auto file = std::filesystem::temp_directory_path() / "wordacq_curves_test.csv";
  save_learning_curves_csv(curves, file);
  auto loaded = load_learning_curves_csv(file);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].word == "alpha");
  CHECK(loaded[0].points.size() == 2);
  CHECK(loaded[0].points[1].mean_surprisal_bits == doctest::Approx(4.0));
  CHECK(loaded[1].under_sampled);
  std::filesystem::remove(file);
}
