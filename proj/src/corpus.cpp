#include "wordacq/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "wordacq/errors.hpp"
#include "wordacq/io_util.hpp"

namespace wordacq {

namespace {

const char* kSpecialTokens[Vocabulary::kNumSpecials] = {"<unk>", "<pad>", "<mask>", "<sep>"};

bool is_ascii_punct(unsigned char c) { return std::ispunct(c) != 0; }

// Returns the length of the UTF-8 sequence starting at p, or 0 if invalid.
size_t utf8_sequence_length(const unsigned char* p, size_t remaining) {
  const unsigned char b = p[0];
  size_t len;
  uint32_t cp_min;
  if (b < 0x80) return 1;
  if ((b & 0xE0) == 0xC0) { len = 2; cp_min = 0x80; }
  else if ((b & 0xF0) == 0xE0) { len = 3; cp_min = 0x800; }
  else if ((b & 0xF8) == 0xF0) { len = 4; cp_min = 0x10000; }
  else return 0;
  if (remaining < len) return 0;
  uint32_t cp = b & (0xFF >> (len + 1));
  for (size_t i = 1; i < len; ++i) {
    if ((p[i] & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (p[i] & 0x3F);
  }
  if (cp < cp_min) return 0;                  // overlong
  if (cp > 0x10FFFF) return 0;
  if (cp >= 0xD800 && cp <= 0xDFFF) return 0; // surrogate
  return len;
}

}  // namespace

std::string direction_name(Direction d) {
  return d == Direction::Unidirectional ? "unidirectional" : "bidirectional";
}

Direction direction_from_name(const std::string& s) {
  if (s == "unidirectional") return Direction::Unidirectional;
  if (s == "bidirectional") return Direction::Bidirectional;
  throw ConfigError("unknown direction mode: " + s);
}

size_t utf8_length(std::string_view s) {
  size_t n = 0;
  const unsigned char* p = reinterpret_cast<const unsigned char*>(s.data());
  size_t i = 0;
  while (i < s.size()) {
    const size_t len = utf8_sequence_length(p + i, s.size() - i);
    if (len == 0) throw IngestError("invalid UTF-8", i);
    i += len;
    ++n;
  }
  return n;
}

std::vector<std::vector<std::string>> tokenize_text(std::string_view raw,
                                                    const TokenizerConfig& config) {
  std::vector<std::vector<std::string>> sentences;
  std::vector<std::string> current;
  std::string word;
  const unsigned char* p = reinterpret_cast<const unsigned char*>(raw.data());
  const size_t n = raw.size();

  auto flush_word = [&]() {
    if (!word.empty()) {
      current.push_back(word);
      word.clear();
    }
  };
  auto flush_sentence = [&]() {
    flush_word();
    sentences.push_back(std::move(current));
    current.clear();
  };

  size_t i = 0;
  while (i < n) {
    const unsigned char b = p[i];
    if (b < 0x80) {
      const char c = static_cast<char>(b);
      if (c == '\n') {
        flush_sentence();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        flush_word();
      } else if (config.split_punctuation && is_ascii_punct(b)) {
        flush_word();
        current.push_back(std::string(1, c));
      } else {
        word += config.lowercase ? static_cast<char>(std::tolower(b)) : c;
      }
      ++i;
    } else {
      const size_t len = utf8_sequence_length(p + i, n - i);
      if (len == 0) throw IngestError("undecodable input byte", i);
      word.append(raw.substr(i, len));
      i += len;
    }
  }
  if (!word.empty() || !current.empty()) flush_sentence();
  return sentences;
}

uint64_t Vocabulary::total_count() const {
  uint64_t sum = 0;
  for (uint64_t c : counts) sum += c;
  return sum;
}

void Vocabulary::save_tsv(const std::filesystem::path& p) const {
  std::ostringstream out;
  for (uint32_t id = 0; id < size(); ++id)
    out << tokens[id] << '\t' << id << '\t' << counts[id] << '\n';
  write_text_file(p, out.str());
}

Vocabulary Vocabulary::load_tsv(const std::filesystem::path& p) {
  Vocabulary v;
  for (const std::string& line : read_lines(p)) {
    if (line.empty()) continue;
    auto fields = split_on(line, '\t');
    if (fields.size() != 3) throw ConfigError("malformed vocabulary line: " + line);
    const uint32_t id = static_cast<uint32_t>(std::stoul(fields[1]));
    if (id != v.tokens.size()) throw ConfigError("vocabulary ids not dense at " + line);
    v.tokens.push_back(fields[0]);
    v.counts.push_back(std::stoull(fields[2]));
    v.ids.emplace(fields[0], id);
  }
  if (v.size() < kNumSpecials) throw ConfigError("vocabulary missing special tokens");
  return v;
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& sentences,
                            uint32_t max_size, uint64_t min_count) {
  if (max_size <= Vocabulary::kNumSpecials)
    throw ConfigError("vocabulary max_size must exceed the special token count");

  std::map<std::string, uint64_t> freq;  // ordered: gives lexicographic ties for free
  uint64_t total = 0;
  for (const auto& sent : sentences)
    for (const auto& tok : sent) {
      ++freq[tok];
      ++total;
    }
  if (total == 0) throw ConfigError("cannot build vocabulary from an empty token stream");

  std::vector<std::pair<std::string, uint64_t>> entries(freq.begin(), freq.end());
  // Count descending, token ascending on ties.
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary v;
  for (uint32_t s = 0; s < Vocabulary::kNumSpecials; ++s) {
    v.tokens.push_back(kSpecialTokens[s]);
    v.counts.push_back(0);
    v.ids.emplace(kSpecialTokens[s], s);
  }
  const size_t keep = max_size - Vocabulary::kNumSpecials;
  uint64_t kept_total = 0;
  for (const auto& [tok, count] : entries) {
    if (v.tokens.size() >= Vocabulary::kNumSpecials + keep) break;
    if (count < min_count) break;  // entries below min_count are all at the tail
    const uint32_t id = static_cast<uint32_t>(v.tokens.size());
    v.tokens.push_back(tok);
    v.counts.push_back(count);
    v.ids.emplace(tok, id);
    kept_total += count;
  }
  v.counts[Vocabulary::kUnk] = total - kept_total;  // dropped mass
  return v;
}

uint64_t TokenizedCorpus::total_tokens() const {
  uint64_t n = 0;
  for (const auto& s : sequences) n += s.size();
  return n;
}

void TokenizedCorpus::save(const std::filesystem::path& p) const {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write corpus file: " + p.string());
  const char magic[8] = {'W', 'A', 'C', 'Q', 'C', 'O', 'R', 'P'};
  out.write(magic, 8);
  uint32_t tag_len = static_cast<uint32_t>(split_tag.size());
  uint64_t n_seqs = sequences.size();
  out.write(reinterpret_cast<const char*>(&tag_len), 4);
  out.write(split_tag.data(), tag_len);
  out.write(reinterpret_cast<const char*>(&n_seqs), 8);
  for (const auto& seq : sequences) {
    uint32_t len = static_cast<uint32_t>(seq.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(reinterpret_cast<const char*>(seq.data()), 4ll * len);
  }
  if (!out) throw ConfigError("write failed: " + p.string());
}

TokenizedCorpus TokenizedCorpus::load(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw MissingUpstreamError("cannot open corpus file: " + p.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "WACQCORP", 8) != 0)
    throw ConfigError("bad corpus file header: " + p.string());
  uint32_t tag_len = 0;
  in.read(reinterpret_cast<char*>(&tag_len), 4);
  TokenizedCorpus c;
  c.split_tag.resize(tag_len);
  in.read(c.split_tag.data(), tag_len);
  uint64_t n_seqs = 0;
  in.read(reinterpret_cast<char*>(&n_seqs), 8);
  c.sequences.resize(n_seqs);
  for (auto& seq : c.sequences) {
    uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    seq.resize(len);
    in.read(reinterpret_cast<char*>(seq.data()), 4ll * len);
  }
  if (!in) throw ConfigError("truncated corpus file: " + p.string());
  return c;
}

TokenizedCorpus make_sequence_pairs(const std::vector<std::vector<std::string>>& sentences,
                                    const Vocabulary& vocab, uint32_t max_len) {
  std::vector<const std::vector<std::string>*> nonempty;
  for (const auto& s : sentences)
    if (!s.empty()) nonempty.push_back(&s);

  TokenizedCorpus corpus;
  for (size_t i = 0; i + 1 < nonempty.size(); i += 2) {
    std::vector<uint32_t> seq;
    seq.reserve(nonempty[i]->size() + nonempty[i + 1]->size() + 1);
    for (const auto& tok : *nonempty[i]) seq.push_back(vocab.id_of(tok));
    seq.push_back(Vocabulary::kSep);
    for (const auto& tok : *nonempty[i + 1]) seq.push_back(vocab.id_of(tok));
    if (seq.size() > max_len) seq.resize(max_len);
    corpus.sequences.push_back(std::move(seq));
  }
  return corpus;
}

std::vector<std::string> decode_sequence(const std::vector<uint32_t>& seq,
                                         const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(seq.size());
  for (uint32_t id : seq) {
    if (id >= vocab.size()) throw ConfigError("token id out of range in decode");
    out.push_back(vocab.tokens[id]);
  }
  return out;
}

std::pair<TokenizedCorpus, TokenizedCorpus> split_train_eval(const TokenizedCorpus& corpus,
                                                             double eval_fraction,
                                                             uint64_t seed) {
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0))
    throw ConfigError("eval_fraction must be in (0,1)");
  const size_t n = corpus.sequences.size();
  const size_t n_eval = static_cast<size_t>(std::llround(eval_fraction * static_cast<double>(n)));
  Rng rng(seed);
  std::vector<size_t> idx = rng.sample_indices(n, n_eval);  // sorted
  std::vector<char> is_eval(n, 0);
  for (size_t i : idx) is_eval[i] = 1;

  TokenizedCorpus train, eval;
  train.split_tag = "train";
  eval.split_tag = "eval";
  for (size_t i = 0; i < n; ++i)
    (is_eval[i] ? eval : train).sequences.push_back(corpus.sequences[i]);
  return {std::move(train), std::move(eval)};
}

std::string PredictorRow::flags() const {
  std::string f;
  if (zero_frequency) f += "zero_frequency";
  if (under_sampled) {
    if (!f.empty()) f += ';';
    f += "under_sampled";
  }
  return f;
}

const PredictorRow* PredictorTable::find(const std::string& word) const {
  for (const auto& r : rows)
    if (r.word == word) return &r;
  return nullptr;
}

PredictorRow* PredictorTable::find(const std::string& word) {
  for (auto& r : rows)
    if (r.word == word) return &r;
  return nullptr;
}

void PredictorTable::save_csv(const std::filesystem::path& p) const {
  std::ostringstream out;
  out << "word,log_frequency,mlu,n_chars,concreteness,lexical_class,flags\n";
  for (const auto& r : rows) {
    out << csv_escape(r.word) << ',' << format_double(r.log_frequency) << ','
        << format_double(r.mlu) << ',' << format_double(r.n_chars) << ','
        << format_double(r.concreteness) << ',' << r.lexical_class << ',' << r.flags() << '\n';
  }
  write_text_file(p, out.str());
}

PredictorTable PredictorTable::load_csv(const std::filesystem::path& p) {
  PredictorTable t;
  auto lines = read_lines(p);
  if (lines.empty()) throw ConfigError("empty predictors file: " + p.string());
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = split_csv_line(lines[i]);
    if (f.size() != 7) throw ConfigError("malformed predictors row: " + lines[i]);
    PredictorRow r;
    r.word = f[0];
    r.log_frequency = std::stod(f[1]);
    r.mlu = std::stod(f[2]);
    r.n_chars = std::stod(f[3]);
    r.concreteness = std::stod(f[4]);
    r.lexical_class = f[5];
    r.zero_frequency = f[6].find("zero_frequency") != std::string::npos;
    r.under_sampled = f[6].find("under_sampled") != std::string::npos;
    t.rows.push_back(std::move(r));
  }
  return t;
}

std::unordered_map<std::string, double> load_concreteness_csv(const std::filesystem::path& p) {
  std::unordered_map<std::string, double> m;
  auto lines = read_lines(p);
  for (size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = split_csv_line(lines[i]);
    if (i == 0 && f.size() >= 2 && f[0] == "word") continue;  // optional header
    if (f.size() < 2) throw ConfigError("malformed concreteness row: " + lines[i]);
    const double v = std::stod(f[1]);
    if (v < 1.0 || v > 5.0)
      throw ConfigError("concreteness outside [1,5] for word '" + f[0] + "'");
    m[f[0]] = v;
  }
  return m;
}

std::unordered_map<std::string, std::string> load_lexical_class_csv(const std::filesystem::path& p) {
  static const char* kClasses[] = {"Noun", "Verb", "Adjective", "FunctionWord", "Other"};
  std::unordered_map<std::string, std::string> m;
  auto lines = read_lines(p);
  for (size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = split_csv_line(lines[i]);
    if (i == 0 && f.size() >= 2 && f[0] == "word") continue;
    if (f.size() < 2) throw ConfigError("malformed lexical class row: " + lines[i]);
    bool known = false;
    for (const char* c : kClasses) known = known || f[1] == c;
    if (!known) throw ConfigError("unknown lexical class '" + f[1] + "' for word '" + f[0] + "'");
    m[f[0]] = f[1];
  }
  return m;
}

PredictorTable compute_predictors(const TokenizedCorpus& train, const Vocabulary& vocab,
                                  const std::vector<std::string>& words,
                                  const std::unordered_map<std::string, double>* concreteness,
                                  const std::unordered_map<std::string, std::string>* lexical_class,
                                  std::vector<std::string>* warnings) {
  PredictorTable table;
  auto warn = [&](const std::string& msg) {
    table.warnings.push_back(msg);
    if (warnings) warnings->push_back(msg);
  };

  // Per-id counts and per-id mean containing-sequence length over the
  // training corpus.
  std::vector<uint64_t> count(vocab.size(), 0);
  std::vector<uint64_t> seq_len_sum(vocab.size(), 0);
  std::vector<uint64_t> seq_count(vocab.size(), 0);
  uint64_t total_tokens = 0;
  std::vector<char> seen(vocab.size(), 0);
  for (const auto& seq : train.sequences) {
    total_tokens += seq.size();
    for (uint32_t id : seq) ++count[id];
    std::fill(seen.begin(), seen.end(), 0);
    for (uint32_t id : seq) {
      if (!seen[id]) {
        seen[id] = 1;
        seq_len_sum[id] += seq.size();
        ++seq_count[id];
      }
    }
  }
  if (total_tokens == 0) throw ConfigError("empty training corpus in compute_predictors");

  if (!concreteness) warn("no concreteness file: all words imputed at scale midpoint 3.0");
  if (!lexical_class) warn("no lexical class file: all words assigned class Other");

  for (const std::string& raw_word : words) {
    if (raw_word.empty()) continue;
    auto toks = tokenize_text(raw_word);
    if (toks.size() != 1 || toks[0].size() != 1) {
      warn("word '" + raw_word + "' is not a single token; dropped");
      continue;
    }
    const std::string word = toks[0][0];
    if (!vocab.contains(word)) {
      warn("word '" + word + "' not in vocabulary; dropped");
      continue;
    }
    if (table.find(word)) continue;  // dedupe

    PredictorRow r;
    r.word = word;
    r.id = vocab.id_of(word);
    const uint64_t c = count[r.id];
    if (c == 0) {
      r.zero_frequency = true;
      r.log_frequency = std::numeric_limits<double>::quiet_NaN();
      r.mlu = 0.0;
    } else {
      const double per_1000 = 1000.0 * static_cast<double>(c) / static_cast<double>(total_tokens);
      r.log_frequency = std::log(per_1000);
      r.mlu = static_cast<double>(seq_len_sum[r.id]) / static_cast<double>(seq_count[r.id]);
    }
    r.n_chars = static_cast<double>(utf8_length(word));
    if (lexical_class) {
      auto it = lexical_class->find(word);
      if (it != lexical_class->end()) {
        r.lexical_class = it->second;
      } else {
        r.lexical_class = "Other";
        warn("word '" + word + "' missing lexical class; assigned Other");
      }
    }
    table.rows.push_back(std::move(r));
  }

  // Mean-impute concreteness over the retained rows.
  if (concreteness) {
    double sum = 0.0;
    size_t n_present = 0;
    for (const auto& r : table.rows) {
      auto it = concreteness->find(r.word);
      if (it != concreteness->end()) {
        sum += it->second;
        ++n_present;
      }
    }
    const double mean = n_present > 0 ? sum / static_cast<double>(n_present) : 3.0;
    for (auto& r : table.rows) {
      auto it = concreteness->find(r.word);
      r.concreteness = it != concreteness->end() ? it->second : mean;
    }
  } else {
    for (auto& r : table.rows) r.concreteness = 3.0;
  }
  return table;
}

OccurrenceSet sample_occurrences(const TokenizedCorpus& eval_corpus, const Vocabulary& vocab,
                                 const std::string& word, const SamplingConfig& config,
                                 Direction direction, uint64_t seed) {
  if (!vocab.contains(word))
    throw ConfigError("sample_occurrences: word '" + word + "' not in vocabulary");

  OccurrenceSet set;
  set.word = word;
  set.word_id = vocab.id_of(word);
  set.direction = direction;
  set.seed = seed;

  std::vector<Occurrence> eligible;
  for (size_t s = 0; s < eval_corpus.sequences.size(); ++s) {
    const auto& seq = eval_corpus.sequences[s];
    for (size_t p = 0; p < seq.size(); ++p) {
      if (seq[p] != set.word_id) continue;
      const size_t left = p;
      const size_t right = seq.size() - 1 - p;
      const bool ok = direction == Direction::Unidirectional
                          ? left >= config.min_context
                          : left >= config.min_context && right >= config.min_context;
      if (ok)
        eligible.push_back({static_cast<uint32_t>(s), static_cast<uint32_t>(p)});
    }
  }
  set.eligible_count = eligible.size();
  set.under_sampled = eligible.size() < config.min_samples;

  if (eligible.size() <= config.max_samples) {
    set.occurrences = std::move(eligible);
  } else {
    Rng rng = Rng(seed).derive(fnv1a64(word));
    for (size_t i : rng.sample_indices(eligible.size(), config.max_samples))
      set.occurrences.push_back(eligible[i]);
  }
  return set;
}

// ---- Markov fixture generator ------------------------------------------

namespace {

// Marsaglia-Tsang, with the alpha < 1 boost; deterministic through Rng.
double gamma_draw(Rng& rng, double alpha) {
  if (alpha < 1.0) {
    const double u = rng.next_double();
    return gamma_draw(rng, alpha + 1.0) * std::pow(u, 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.next_gaussian();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.next_double();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace

std::vector<double> markov_stationary(const std::vector<std::vector<double>>& transitions,
                                      int max_iters, double tol) {
  const size_t n = transitions.size();
  std::vector<double> pi(n, 1.0 / static_cast<double>(n)), next(n, 0.0);
  for (int it = 0; it < max_iters; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (size_t i = 0; i < n; ++i) {
      const double w = pi[i];
      const auto& row = transitions[i];
      for (size_t j = 0; j < n; ++j) next[j] += w * row[j];
    }
    double norm = 0.0, diff = 0.0;
    for (double v : next) norm += v;
    for (size_t j = 0; j < n; ++j) {
      next[j] /= norm;
      diff += std::abs(next[j] - pi[j]);
    }
    pi.swap(next);
    if (diff < tol) break;
  }
  return pi;
}

double MarkovChainSpec::row_entropy_bits(uint32_t prev) const {
  double h = 0.0;
  for (double p : transitions[prev])
    if (p > 0.0) h -= p * std::log2(p);
  return h;
}

double MarkovChainSpec::stationary_entropy_bits() const {
  double h = 0.0;
  for (double p : stationary)
    if (p > 0.0) h -= p * std::log2(p);
  return h;
}

MarkovCorpus synthesize_markov_corpus(uint32_t vocab_size, double transition_concentration,
                                      uint64_t n_tokens, uint64_t seed,
                                      double sentence_end_prob) {
  if (vocab_size < 2) throw ConfigError("markov vocab_size must be >= 2");
  if (n_tokens < 1) throw ConfigError("markov n_tokens must be >= 1");
  if (transition_concentration <= 0.0)
    throw ConfigError("transition_concentration must be positive");

  MarkovCorpus out;
  auto& chain = out.chain;
  chain.vocab_size = vocab_size;
  chain.concentration = transition_concentration;
  chain.sentence_end_prob = sentence_end_prob;
  chain.seed = seed;

  Rng master(seed);
  Rng row_rng = master.derive(1);
  chain.transitions.assign(vocab_size, std::vector<double>(vocab_size, 0.0));
  for (uint32_t i = 0; i < vocab_size; ++i) {
    double sum = 0.0;
    for (uint32_t j = 0; j < vocab_size; ++j) {
      const double g = gamma_draw(row_rng, transition_concentration);
      chain.transitions[i][j] = g;
      sum += g;
    }
    for (uint32_t j = 0; j < vocab_size; ++j) chain.transitions[i][j] /= sum;
  }
  chain.stationary = markov_stationary(chain.transitions);

  // Per-row cumulative tables for sampling.
  std::vector<std::vector<double>> cum(vocab_size, std::vector<double>(vocab_size));
  for (uint32_t i = 0; i < vocab_size; ++i) {
    double acc = 0.0;
    for (uint32_t j = 0; j < vocab_size; ++j) {
      acc += chain.transitions[i][j];
      cum[i][j] = acc;
    }
  }
  std::vector<double> cum_pi(vocab_size);
  {
    double acc = 0.0;
    for (uint32_t j = 0; j < vocab_size; ++j) {
      acc += chain.stationary[j];
      cum_pi[j] = acc;
    }
  }

  Rng gen = master.derive(2);
  uint64_t emitted = 0;
  std::string line;
  while (emitted < n_tokens) {
    line.clear();
    uint32_t state = static_cast<uint32_t>(gen.next_weighted(cum_pi));
    line += "w" + std::to_string(state);
    ++emitted;
    while (emitted < n_tokens && !gen.next_bernoulli(sentence_end_prob)) {
      state = static_cast<uint32_t>(gen.next_weighted(cum[state]));
      line += " w" + std::to_string(state);
      ++emitted;
    }
    out.sentences.push_back(line);
  }
  return out;
}

}  // namespace wordacq
