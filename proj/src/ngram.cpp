#include "wordacq/ngram.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "wordacq/errors.hpp"
#include "wordacq/io_util.hpp"

namespace wordacq {

NGramTable::NGramTable(uint32_t vocab_size, double alpha)
    : vocab_size_(vocab_size),
      alpha_(alpha),
      unigram_(vocab_size, 0),
      as_prev_total_(vocab_size, 0),
      bigram_rows_(vocab_size),
      bigram_cols_(vocab_size) {
  if (alpha < 0.0) throw ConfigError("smoothing alpha must be >= 0");
}

NGramTable NGramTable::count_ngrams(const TokenizedCorpus& train, uint32_t vocab_size,
                                    double alpha) {
  if (train.sequences.empty()) throw ConfigError("count_ngrams: empty corpus");
  NGramTable t(vocab_size, alpha);
  for (const auto& seq : train.sequences) {
    for (size_t i = 0; i < seq.size(); ++i) {
      if (seq[i] >= vocab_size) throw ConfigError("token id out of range in count_ngrams");
      ++t.unigram_[seq[i]];
      ++t.total_tokens_;
      if (i + 1 < seq.size()) {  // bigrams never cross sequence boundaries
        ++t.bigram_rows_[seq[i]][seq[i + 1]];
        ++t.bigram_cols_[seq[i + 1]][seq[i]];
        ++t.as_prev_total_[seq[i]];
      }
    }
  }
  return t;
}

uint64_t NGramTable::bigram_count(uint32_t prev, uint32_t next) const {
  const auto& row = bigram_rows_[prev];
  auto it = row.find(next);
  return it == row.end() ? 0 : it->second;
}

std::vector<double> NGramTable::unigram_distribution() const {
  const double denom = static_cast<double>(total_tokens_) + alpha_ * vocab_size_;
  if (denom <= 0.0) throw NumericalError("unigram_distribution over empty table with alpha=0");
  std::vector<double> p(vocab_size_);
  for (uint32_t w = 0; w < vocab_size_; ++w)
    p[w] = (static_cast<double>(unigram_[w]) + alpha_) / denom;
  return p;
}

void NGramTable::bigram_conditional_into(uint32_t prev, std::vector<double>& out) const {
  const double denom = static_cast<double>(as_prev_total_[prev]) + alpha_ * vocab_size_;
  if (denom <= 0.0)
    throw NumericalError("bigram conditional undefined: unseen prev id " + std::to_string(prev) +
                         " with alpha=0");
  out.assign(vocab_size_, alpha_ / denom);
  for (const auto& [next, c] : bigram_rows_[prev])
    out[next] = (static_cast<double>(c) + alpha_) / denom;
}

std::vector<double> NGramTable::bigram_conditional(uint32_t prev) const {
  std::vector<double> p;
  bigram_conditional_into(prev, p);
  return p;
}

void NGramTable::bidirectional_bigram_into(uint32_t prev, uint32_t next,
                                           std::vector<double>& out) const {
  // score(w) = P(w | prev) * P(next | w); the second factor has a
  // per-middle-token denominator.
  bigram_conditional_into(prev, out);
  const double av = alpha_ * vocab_size_;
  double total = 0.0;
  for (uint32_t w = 0; w < vocab_size_; ++w) {
    const double denom_w = static_cast<double>(as_prev_total_[w]) + av;
    double p_next_given_w;
    if (denom_w <= 0.0) {
      p_next_given_w = 0.0;  // alpha = 0 and w never seen as a context
    } else {
      const auto& row = bigram_rows_[w];
      auto it = row.find(next);
      const double c = it == row.end() ? 0.0 : static_cast<double>(it->second);
      p_next_given_w = (c + alpha_) / denom_w;
    }
    out[w] *= p_next_given_w;
    total += out[w];
  }
  if (total <= 0.0)
    throw NumericalError("bidirectional bigram has zero mass for pair (" + std::to_string(prev) +
                         "," + std::to_string(next) + ")");
  for (double& v : out) v /= total;
}

std::vector<double> NGramTable::bidirectional_bigram(uint32_t prev, uint32_t next) const {
  std::vector<double> p;
  bidirectional_bigram_into(prev, next, p);
  return p;
}

void NGramTable::save_unigrams_tsv(const std::filesystem::path& p) const {
  std::ostringstream out;
  for (uint32_t w = 0; w < vocab_size_; ++w) out << w << '\t' << unigram_[w] << '\n';
  write_text_file(p, out.str());
}

void NGramTable::save_bigrams_tsv(const std::filesystem::path& p) const {
  std::ostringstream out;
  for (uint32_t prev = 0; prev < vocab_size_; ++prev) {
    std::vector<std::pair<uint32_t, uint64_t>> row(bigram_rows_[prev].begin(),
                                                   bigram_rows_[prev].end());
    std::sort(row.begin(), row.end());
    for (const auto& [next, c] : row) out << prev << '\t' << next << '\t' << c << '\n';
  }
  write_text_file(p, out.str());
}

void NGramTable::save(const std::filesystem::path& p) const {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write ngram table: " + p.string());
  const char magic[8] = {'W', 'A', 'C', 'Q', 'N', 'G', 'R', 'M'};
  out.write(magic, 8);
  out.write(reinterpret_cast<const char*>(&vocab_size_), 4);
  out.write(reinterpret_cast<const char*>(&alpha_), 8);
  out.write(reinterpret_cast<const char*>(&total_tokens_), 8);
  out.write(reinterpret_cast<const char*>(unigram_.data()), 8ll * vocab_size_);
  uint64_t nnz = 0;
  for (const auto& row : bigram_rows_) nnz += row.size();
  out.write(reinterpret_cast<const char*>(&nnz), 8);
  for (uint32_t prev = 0; prev < vocab_size_; ++prev) {
    std::vector<std::pair<uint32_t, uint64_t>> row(bigram_rows_[prev].begin(),
                                                   bigram_rows_[prev].end());
    std::sort(row.begin(), row.end());
    for (const auto& [next, c] : row) {
      out.write(reinterpret_cast<const char*>(&prev), 4);
      out.write(reinterpret_cast<const char*>(&next), 4);
      out.write(reinterpret_cast<const char*>(&c), 8);
    }
  }
  if (!out) throw ConfigError("write failed: " + p.string());
}

NGramTable NGramTable::load(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw MissingUpstreamError("cannot open ngram table: " + p.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string_view(magic, 8) != "WACQNGRM")
    throw ConfigError("bad ngram table header: " + p.string());
  uint32_t vocab = 0;
  double alpha = 0.0;
  in.read(reinterpret_cast<char*>(&vocab), 4);
  in.read(reinterpret_cast<char*>(&alpha), 8);
  NGramTable t(vocab, alpha);
  in.read(reinterpret_cast<char*>(&t.total_tokens_), 8);
  in.read(reinterpret_cast<char*>(t.unigram_.data()), 8ll * vocab);
  uint64_t nnz = 0;
  in.read(reinterpret_cast<char*>(&nnz), 8);
  for (uint64_t i = 0; i < nnz; ++i) {
    uint32_t prev = 0, next = 0;
    uint64_t c = 0;
    in.read(reinterpret_cast<char*>(&prev), 4);
    in.read(reinterpret_cast<char*>(&next), 4);
    in.read(reinterpret_cast<char*>(&c), 8);
    t.bigram_rows_[prev][next] = c;
    t.bigram_cols_[next][prev] = c;
    t.as_prev_total_[prev] += c;
  }
  if (!in) throw ConfigError("truncated ngram table: " + p.string());
  return t;
}

double distribution_entropy_bits(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log2(v);
  return h;
}

}  // namespace wordacq
