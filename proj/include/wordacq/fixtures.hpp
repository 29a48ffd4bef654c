#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace wordacq {

// Synthetic natural-style corpus: a Zipfian lexicon of pseudo-words organized
// into part-of-speech classes and semantic topics, sentences from a small
// stochastic grammar with selectional preferences that span more than one
// token (verb-object topic agreement, topic persistence across the sentence
// pair). That layering gives training runs distinct unigram, bigram, and
// longer-range structure to acquire.
struct NaturalCorpusSpec {
  uint32_t n_nouns = 4600;
  uint32_t n_verbs = 1600;
  uint32_t n_adjectives = 1250;
  uint32_t n_others = 500;
  int n_topics = 24;
  double zipf_exponent = 1.05;
  double topic_persistence = 0.8;  // second sentence keeps the first's topic
  uint64_t n_tokens = 5000000;
  uint64_t seed = 42;

  // Target-word selection for the learning-curve stage.
  uint64_t target_min_count = 1200;
  size_t target_words = 260;
};

struct NaturalCorpus {
  std::vector<std::string> sentences;  // one raw sentence per line
  std::vector<std::pair<std::string, std::string>> lexical_classes;  // word -> class
  std::vector<std::pair<std::string, double>> concreteness;  // 3% withheld for imputation
  std::vector<std::string> target_words;
  uint64_t total_tokens = 0;
};

NaturalCorpus synthesize_natural_corpus(const NaturalCorpusSpec& spec);

}  // namespace wordacq
