#include "wordacq/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "wordacq/errors.hpp"
#include "wordacq/rng.hpp"

namespace wordacq {

namespace {

// Pronounceable pseudo-words; uniqueness enforced by the caller.
std::string make_word(Rng& rng, int syllables) {
  static const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r",
                                 "s", "t", "v", "z", "br", "dr", "st", "tr", "pl", "sk"};
  static const char* vowels[] = {"a", "e", "i", "o", "u", "ai", "ea", "ou"};
  static const char* codas[] = {"", "", "", "n", "r", "s", "t", "l", "m", "k"};
  std::string w;
  for (int s = 0; s < syllables; ++s) {
    w += onsets[rng.next_below(std::size(onsets))];
    w += vowels[rng.next_below(std::size(vowels))];
    if (s == syllables - 1) w += codas[rng.next_below(std::size(codas))];
  }
  return w;
}

struct Inventory {
  std::vector<uint32_t> words;  // indices into the lexicon
  std::vector<double> cum;      // Zipf cumulative weights

  void finalize(double exponent) {
    cum.resize(words.size());
    double acc = 0.0;
    for (size_t r = 0; r < words.size(); ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), exponent);
      cum[r] = acc;
    }
  }
  uint32_t draw(Rng& rng) const { return words[rng.next_weighted(cum)]; }
};

}  // namespace

NaturalCorpus synthesize_natural_corpus(const NaturalCorpusSpec& spec) {
  if (spec.n_topics < 2) throw ConfigError("natural corpus needs at least 2 topics");
  Rng master(spec.seed);

  // ---- lexicon -------------------------------------------------------------
  struct LexEntry {
    std::string word;
    std::string cls;
    int topic = -1;  // -1: topic-free
  };
  std::vector<LexEntry> lex;
  std::set<std::string> used;
  Rng word_rng = master.derive(1);
  auto fresh_word = [&](int min_syll, int max_syll) {
    for (;;) {
      const int syll = min_syll + static_cast<int>(word_rng.next_below(
                                      static_cast<uint64_t>(max_syll - min_syll + 1)));
      std::string w = make_word(word_rng, syll);
      if (used.insert(w).second) return w;
    }
  };

  // Function words: fixed small closed classes with very short forms.
  struct Closed {
    const char* role;
    int count;
  };
  const Closed closed_classes[] = {{"det", 6}, {"prep", 12}, {"pron", 10},
                                   {"aux", 8}, {"conj", 6}};
  std::map<std::string, Inventory> closed;
  for (const auto& c : closed_classes) {
    for (int i = 0; i < c.count; ++i) {
      closed[c.role].words.push_back(static_cast<uint32_t>(lex.size()));
      lex.push_back({fresh_word(1, 1), "FunctionWord", -1});
    }
    closed[c.role].finalize(1.0);
  }

  Rng topic_rng = master.derive(2);
  auto add_open_class = [&](uint32_t count, const std::string& cls, bool topical,
                            std::vector<Inventory>& per_topic, Inventory& global) {
    for (uint32_t i = 0; i < count; ++i) {
      const int topic =
          topical ? static_cast<int>(topic_rng.next_below(spec.n_topics)) : -1;
      const uint32_t id = static_cast<uint32_t>(lex.size());
      lex.push_back({fresh_word(2, 4), cls, topic});
      global.words.push_back(id);
      if (topical) per_topic[static_cast<size_t>(topic)].words.push_back(id);
    }
    global.finalize(spec.zipf_exponent);
    for (auto& inv : per_topic)
      if (!inv.words.empty()) inv.finalize(spec.zipf_exponent);
  };

  std::vector<Inventory> nouns_by_topic(spec.n_topics), verbs_by_topic(spec.n_topics),
      adjs_by_topic(spec.n_topics);
  Inventory nouns_all, verbs_all, adjs_all, others_all;
  std::vector<Inventory> none;
  add_open_class(spec.n_nouns, "Noun", true, nouns_by_topic, nouns_all);
  add_open_class(spec.n_verbs, "Verb", true, verbs_by_topic, verbs_all);
  add_open_class(spec.n_adjectives, "Adjective", true, adjs_by_topic, adjs_all);
  none.clear();
  add_open_class(spec.n_others, "Other", false, none, others_all);

  // Topic mixing: half the sentences stay on topic, the rest drift to a fixed
  // partner topic or anywhere. Gives verb-object agreement beyond bigrams.
  std::vector<int> partner(spec.n_topics);
  for (int t = 0; t < spec.n_topics; ++t)
    partner[t] = static_cast<int>(topic_rng.next_below(spec.n_topics));
  std::vector<double> topic_cum(spec.n_topics);
  {
    double acc = 0.0;
    for (int t = 0; t < spec.n_topics; ++t) {
      acc += 1.0 / std::pow(static_cast<double>(t + 1), 0.8);
      topic_cum[static_cast<size_t>(t)] = acc;
    }
  }

  Rng gen = master.derive(3);
  auto related_topic = [&](int c) {
    const double r = gen.next_double();
    if (r < 0.55) return c;
    if (r < 0.8) return partner[static_cast<size_t>(c)];
    return static_cast<int>(gen.next_weighted(topic_cum));
  };
  auto topical_draw = [&](std::vector<Inventory>& by_topic, Inventory& global, int topic,
                          double affinity) {
    if (gen.next_double() < affinity && !by_topic[static_cast<size_t>(topic)].words.empty())
      return by_topic[static_cast<size_t>(topic)].draw(gen);
    return global.draw(gen);
  };

  // ---- sentence generation -------------------------------------------------
  NaturalCorpus out;
  std::vector<uint64_t> counts(lex.size(), 0);
  uint64_t punct_tokens = 0;

  auto append_np = [&](std::vector<uint32_t>& toks, int topic) {
    if (gen.next_double() < 0.12) {
      toks.push_back(closed["pron"].draw(gen));
      return;
    }
    if (gen.next_double() < 0.72) toks.push_back(closed["det"].draw(gen));
    if (gen.next_double() < 0.48) {
      toks.push_back(topical_draw(adjs_by_topic, adjs_all, topic, 0.75));
      if (gen.next_double() < 0.16)
        toks.push_back(topical_draw(adjs_by_topic, adjs_all, topic, 0.75));
    }
    toks.push_back(topical_draw(nouns_by_topic, nouns_all, topic, 0.85));
  };

  int pair_topic = static_cast<int>(gen.next_weighted(topic_cum));
  bool second_of_pair = false;
  while (out.total_tokens < spec.n_tokens) {
    if (!second_of_pair) {
      pair_topic = static_cast<int>(gen.next_weighted(topic_cum));
    } else if (gen.next_double() > spec.topic_persistence) {
      pair_topic = static_cast<int>(gen.next_weighted(topic_cum));
    }
    const int topic = pair_topic;

    std::vector<uint32_t> toks;
    append_np(toks, topic);
    if (gen.next_double() < 0.25) toks.push_back(closed["aux"].draw(gen));
    toks.push_back(topical_draw(verbs_by_topic, verbs_all, topic, 0.7));
    if (gen.next_double() < 0.75) append_np(toks, related_topic(topic));
    if (gen.next_double() < 0.55) {
      toks.push_back(closed["prep"].draw(gen));
      append_np(toks, related_topic(topic));
    }
    if (gen.next_double() < 0.25) {
      toks.push_back(closed["prep"].draw(gen));
      append_np(toks, related_topic(topic));
    }
    if (gen.next_double() < 0.28) toks.push_back(others_all.draw(gen));
    if (gen.next_double() < 0.3) {
      // coordinated clause: ", conj NP verb [NP]"
      toks.push_back(UINT32_MAX - 1);  // comma sentinel
      toks.push_back(closed["conj"].draw(gen));
      append_np(toks, topic);
      toks.push_back(topical_draw(verbs_by_topic, verbs_all, topic, 0.7));
      if (gen.next_double() < 0.4) append_np(toks, related_topic(topic));
    }

    std::string line;
    for (size_t i = 0; i < toks.size(); ++i) {
      if (toks[i] == UINT32_MAX - 1) {
        line += " ,";
        ++punct_tokens;
        ++out.total_tokens;
        continue;
      }
      if (!line.empty()) line += ' ';
      line += lex[toks[i]].word;
      ++counts[toks[i]];
      ++out.total_tokens;
    }
    line += " .";
    ++punct_tokens;
    ++out.total_tokens;
    out.sentences.push_back(std::move(line));
    second_of_pair = !second_of_pair;
  }

  // ---- side files ------------------------------------------------------------
  for (size_t i = 0; i < lex.size(); ++i)
    out.lexical_classes.emplace_back(lex[i].word, lex[i].cls);

  Rng conc_rng = master.derive(4);
  for (size_t i = 0; i < lex.size(); ++i) {
    double mean = 2.5, sd = 0.5;
    if (lex[i].cls == "Noun") { mean = 4.2; sd = 0.4; }
    else if (lex[i].cls == "Verb") { mean = 3.0; sd = 0.45; }
    else if (lex[i].cls == "Adjective") { mean = 2.8; sd = 0.45; }
    else if (lex[i].cls == "FunctionWord") { mean = 1.8; sd = 0.3; }
    const double v = std::clamp(mean + sd * conc_rng.next_gaussian(), 1.0, 5.0);
    if (conc_rng.next_double() < 0.03) continue;  // withhold 3% for imputation
    out.concreteness.emplace_back(lex[i].word, v);
  }

  // ---- target words: all frequent-enough words, stratified over frequency ----
  std::vector<std::pair<uint64_t, uint32_t>> candidates;  // (count, lex id)
  for (uint32_t i = 0; i < lex.size(); ++i)
    if (counts[i] >= spec.target_min_count) candidates.emplace_back(counts[i], i);
  std::sort(candidates.begin(), candidates.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  if (candidates.size() <= spec.target_words) {
    for (const auto& [c, id] : candidates) out.target_words.push_back(lex[id].word);
  } else {
    // even strides over the frequency-ranked list keeps the full range
    const double stride =
        static_cast<double>(candidates.size()) / static_cast<double>(spec.target_words);
    for (size_t k = 0; k < spec.target_words; ++k) {
      const size_t idx = static_cast<size_t>(std::floor(stride * static_cast<double>(k)));
      out.target_words.push_back(lex[candidates[idx].second].word);
    }
  }
  return out;
}

}  // namespace wordacq
