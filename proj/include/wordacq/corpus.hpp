#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "wordacq/rng.hpp"

namespace wordacq {

enum class Direction { Unidirectional, Bidirectional };

std::string direction_name(Direction d);
Direction direction_from_name(const std::string& s);

struct TokenizerConfig {
  bool lowercase = true;
  bool split_punctuation = true;
};

// One vector of tokens per input sentence (line). Validates UTF-8 and throws
// IngestError with the byte offset of the first bad byte.
std::vector<std::vector<std::string>> tokenize_text(std::string_view raw,
                                                    const TokenizerConfig& config = {});

size_t utf8_length(std::string_view s);

struct Vocabulary {
  // Reserved ids; corpus tokens start at 4.
  static constexpr uint32_t kUnk = 0;
  static constexpr uint32_t kPad = 1;
  static constexpr uint32_t kMask = 2;
  static constexpr uint32_t kSep = 3;
  static constexpr uint32_t kNumSpecials = 4;

  std::vector<std::string> tokens;                  // id -> token string
  std::unordered_map<std::string, uint32_t> ids;    // token -> id
  std::vector<uint64_t> counts;                     // id -> training count

  uint32_t size() const { return static_cast<uint32_t>(tokens.size()); }
  uint32_t id_of(const std::string& token) const {
    auto it = ids.find(token);
    return it == ids.end() ? kUnk : it->second;
  }
  bool contains(const std::string& token) const { return ids.count(token) > 0; }
  uint64_t total_count() const;

  void save_tsv(const std::filesystem::path& p) const;
  static Vocabulary load_tsv(const std::filesystem::path& p);
};

// Keeps the most frequent tokens up to max_size entries (reserved ids
// included); ties broken lexicographically. Dropped occurrences are absorbed
// into the UNK count so counts still sum to the stream total.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& sentences,
                            uint32_t max_size, uint64_t min_count = 1);

struct TokenizedCorpus {
  std::vector<std::vector<uint32_t>> sequences;
  std::string split_tag = "all";  // all | train | eval

  uint64_t total_tokens() const;
  void save(const std::filesystem::path& p) const;
  static TokenizedCorpus load(const std::filesystem::path& p);
};

// Consecutive non-overlapping sentence pairs joined by SEP, truncated at the
// tail to max_len. Empty sentences are skipped; a trailing unpaired sentence
// is dropped.
TokenizedCorpus make_sequence_pairs(const std::vector<std::vector<std::string>>& sentences,
                                    const Vocabulary& vocab, uint32_t max_len);

std::vector<std::string> decode_sequence(const std::vector<uint32_t>& seq,
                                         const Vocabulary& vocab);

std::pair<TokenizedCorpus, TokenizedCorpus> split_train_eval(const TokenizedCorpus& corpus,
                                                             double eval_fraction,
                                                             uint64_t seed);

struct PredictorRow {
  std::string word;
  uint32_t id = 0;
  double log_frequency = 0.0;  // ln of per-1000-token count
  double mlu = 0.0;            // mean tokens per containing sequence
  double n_chars = 0.0;
  double concreteness = 0.0;   // 1..5 after imputation
  std::string lexical_class = "Other";
  double aoa = std::numeric_limits<double>::quiet_NaN();  // log10 steps, filled later
  bool zero_frequency = false;
  bool under_sampled = false;

  std::string flags() const;
};

struct PredictorTable {
  std::vector<PredictorRow> rows;
  std::vector<std::string> warnings;

  const PredictorRow* find(const std::string& word) const;
  PredictorRow* find(const std::string& word);
  void save_csv(const std::filesystem::path& p) const;
  static PredictorTable load_csv(const std::filesystem::path& p);
};

// word -> value maps loaded from the optional two-column CSV side files.
std::unordered_map<std::string, double> load_concreteness_csv(const std::filesystem::path& p);
std::unordered_map<std::string, std::string> load_lexical_class_csv(const std::filesystem::path& p);

// Frequencies and MLU are computed over the supplied training corpus; missing
// concreteness is imputed with the mean of present values. Words that do not
// tokenize to a single in-vocabulary token are dropped with a warning; words
// with zero training count are kept but flagged for downstream exclusion.
PredictorTable compute_predictors(const TokenizedCorpus& train, const Vocabulary& vocab,
                                  const std::vector<std::string>& words,
                                  const std::unordered_map<std::string, double>* concreteness,
                                  const std::unordered_map<std::string, std::string>* lexical_class,
                                  std::vector<std::string>* warnings = nullptr);

struct Occurrence {
  uint32_t sequence_index;
  uint32_t position;
};

struct OccurrenceSet {
  std::string word;
  uint32_t word_id = 0;
  Direction direction = Direction::Unidirectional;
  uint64_t seed = 0;
  size_t eligible_count = 0;
  bool under_sampled = false;
  std::vector<Occurrence> occurrences;
};

struct SamplingConfig {
  size_t max_samples = 512;
  size_t min_context = 8;
  size_t min_samples = 100;  // below this the word is flagged under-sampled
};

// Uniform sample without replacement over eligible occurrences. Eligibility
// requires min_context previous tokens (unidirectional) or min_context on
// both sides (bidirectional). Each position of a repeated word within one
// sequence counts as a separate candidate.
OccurrenceSet sample_occurrences(const TokenizedCorpus& eval_corpus, const Vocabulary& vocab,
                                 const std::string& word, const SamplingConfig& config,
                                 Direction direction, uint64_t seed);

// ---- Markov fixture generator ------------------------------------------

struct MarkovChainSpec {
  uint32_t vocab_size = 0;
  double concentration = 1.0;
  double sentence_end_prob = 0.1;
  uint64_t seed = 0;
  std::vector<std::vector<double>> transitions;  // row-stochastic
  std::vector<double> stationary;                // power-iteration fixed point

  // Entropy in bits of the next observed symbol given the previous token,
  // before any sentence-boundary conditioning.
  double row_entropy_bits(uint32_t prev) const;
  double stationary_entropy_bits() const;
};

struct MarkovCorpus {
  std::vector<std::string> sentences;  // one sentence per entry, space-joined
  MarkovChainSpec chain;
};

// Sentences are independent runs of a fixed random bigram chain: rows drawn
// from a symmetric Dirichlet(concentration), first token from the stationary
// distribution, geometric lengths with sentence_end_prob. Deterministic in
// the seed.
MarkovCorpus synthesize_markov_corpus(uint32_t vocab_size, double transition_concentration,
                                      uint64_t n_tokens, uint64_t seed,
                                      double sentence_end_prob = 0.1);

std::vector<double> markov_stationary(const std::vector<std::vector<double>>& transitions,
                                      int max_iters = 10000, double tol = 1e-13);

}  // namespace wordacq
