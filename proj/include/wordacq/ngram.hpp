#pragma once

#include <cstdint>
#include <filesystem>
#include <unordered_map>
#include <vector>

#include "wordacq/corpus.hpp"

namespace wordacq {

// Unigram and within-sequence bigram counts with additive smoothing.
// Immutable after construction; concurrent reads are safe.
class NGramTable {
 public:
  NGramTable() = default;
  NGramTable(uint32_t vocab_size, double alpha);

  static NGramTable count_ngrams(const TokenizedCorpus& train, uint32_t vocab_size,
                                 double alpha = 0.01);

  uint32_t vocab_size() const { return vocab_size_; }
  double alpha() const { return alpha_; }
  uint64_t total_tokens() const { return total_tokens_; }
  uint64_t unigram_count(uint32_t w) const { return unigram_[w]; }
  uint64_t bigram_count(uint32_t prev, uint32_t next) const;
  uint64_t prev_count(uint32_t prev) const { return as_prev_total_[prev]; }
  const std::vector<uint64_t>& unigram_counts() const { return unigram_; }

  // P(w) = (count(w) + a) / (total + a|V|).
  std::vector<double> unigram_distribution() const;

  // P(w | prev) = (count(prev,w) + a) / (count_as_prev(prev) + a|V|).
  // With a = 0 an unseen prev has no defined conditional and throws.
  std::vector<double> bigram_conditional(uint32_t prev) const;
  void bigram_conditional_into(uint32_t prev, std::vector<double>& out) const;

  // Middle-token distribution proportional to P(w|prev) * P(next|w).
  std::vector<double> bidirectional_bigram(uint32_t prev, uint32_t next) const;
  void bidirectional_bigram_into(uint32_t prev, uint32_t next, std::vector<double>& out) const;

  // Sparse accessors used by the brute-force oracles and dumps.
  const std::vector<std::unordered_map<uint32_t, uint64_t>>& rows() const { return bigram_rows_; }
  const std::vector<std::unordered_map<uint32_t, uint64_t>>& cols() const { return bigram_cols_; }

  void save_unigrams_tsv(const std::filesystem::path& p) const;
  void save_bigrams_tsv(const std::filesystem::path& p) const;
  void save(const std::filesystem::path& p) const;
  static NGramTable load(const std::filesystem::path& p);

 private:
  uint32_t vocab_size_ = 0;
  double alpha_ = 0.0;
  uint64_t total_tokens_ = 0;
  std::vector<uint64_t> unigram_;
  std::vector<uint64_t> as_prev_total_;                        // sum_w count(prev, w)
  std::vector<std::unordered_map<uint32_t, uint64_t>> bigram_rows_;  // prev -> (next -> count)
  std::vector<std::unordered_map<uint32_t, uint64_t>> bigram_cols_;  // next -> (prev -> count)
};

double distribution_entropy_bits(const std::vector<double>& p);

}  // namespace wordacq
