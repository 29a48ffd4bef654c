// wordacq-synth: deterministic corpus fixture generators (a natural-style
// grammar corpus and a bigram Markov chain corpus).

#include <CLI11.hpp>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "wordacq/corpus.hpp"
#include "wordacq/errors.hpp"
#include "wordacq/fixtures.hpp"
#include "wordacq/io_util.hpp"

using namespace wordacq;
using nlohmann::json;

int main(int argc, char** argv) {
  CLI::App app{"corpus fixture generators"};
  app.require_subcommand(1);

  std::string out_dir = "fixture";
  uint64_t n_tokens = 5000000;
  uint64_t seed = 42;

  auto* natural = app.add_subcommand("natural", "grammar-based natural-style corpus");
  natural->add_option("-o,--out", out_dir, "output directory")->capture_default_str();
  natural->add_option("-n,--tokens", n_tokens, "approximate token count")->capture_default_str();
  natural->add_option("-s,--seed", seed, "generator seed")->capture_default_str();
  size_t target_words = 260;
  uint64_t target_min_count = 1200;
  natural->add_option("--target-words", target_words, "size of the target word list")
      ->capture_default_str();
  natural->add_option("--target-min-count", target_min_count,
                      "minimum corpus count for target words")
      ->capture_default_str();

  auto* markov = app.add_subcommand("markov", "bigram Markov chain corpus");
  markov->add_option("-o,--out", out_dir, "output directory")->capture_default_str();
  markov->add_option("-n,--tokens", n_tokens, "token count")->capture_default_str();
  markov->add_option("-s,--seed", seed, "generator seed")->capture_default_str();
  uint32_t vocab_size = 500;
  double concentration = 0.05;
  double end_prob = 0.1;
  markov->add_option("--vocab", vocab_size, "chain vocabulary size")->capture_default_str();
  markov->add_option("--concentration", concentration, "Dirichlet concentration of chain rows")
      ->capture_default_str();
  markov->add_option("--end-prob", end_prob, "per-token sentence end probability")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);

    if (app.got_subcommand(natural)) {
      NaturalCorpusSpec spec;
      spec.n_tokens = n_tokens;
      spec.seed = seed;
      spec.target_words = target_words;
      spec.target_min_count = target_min_count;
      NaturalCorpus corpus = synthesize_natural_corpus(spec);

      std::ostringstream text;
      for (const auto& s : corpus.sentences) text << s << '\n';
      write_text_file(dir / "corpus.txt", text.str());

      std::ostringstream words;
      for (const auto& w : corpus.target_words) words << w << '\n';
      write_text_file(dir / "words.txt", words.str());

      std::ostringstream classes;
      classes << "word,class\n";
      for (const auto& [w, c] : corpus.lexical_classes) classes << w << ',' << c << '\n';
      write_text_file(dir / "lexical_class.csv", classes.str());

      std::ostringstream conc;
      conc << "word,score\n";
      for (const auto& [w, v] : corpus.concreteness) conc << w << ',' << format_double(v) << '\n';
      write_text_file(dir / "concreteness.csv", conc.str());

      json manifest{{"generator", "natural"},
                    {"seed", seed},
                    {"tokens", corpus.total_tokens},
                    {"sentences", corpus.sentences.size()},
                    {"target_words", corpus.target_words.size()}};
      write_text_file(dir / "fixture_manifest.json", manifest.dump(2) + "\n");
      std::cout << "wrote " << (dir / "corpus.txt").string() << " (" << corpus.total_tokens
                << " tokens, " << corpus.sentences.size() << " sentences)\n";
      return 0;
    }

    MarkovCorpus corpus =
        synthesize_markov_corpus(vocab_size, concentration, n_tokens, seed, end_prob);
    std::ostringstream text;
    for (const auto& s : corpus.sentences) text << s << '\n';
    write_text_file(dir / "corpus.txt", text.str());

    uint64_t matrix_hash = 0xcbf29ce484222325ULL;
    for (const auto& row : corpus.chain.transitions)
      matrix_hash = fnv1a64(row.data(), row.size() * sizeof(double), matrix_hash);
    json manifest{{"generator", "markov"},
                  {"seed", seed},
                  {"vocab_size", vocab_size},
                  {"concentration", concentration},
                  {"sentence_end_prob", end_prob},
                  {"tokens", n_tokens},
                  {"transition_matrix_hash", hash_hex(matrix_hash)},
                  {"stationary_entropy_bits", corpus.chain.stationary_entropy_bits()}};
    write_text_file(dir / "chain.json", manifest.dump(2) + "\n");
    std::cout << "wrote " << (dir / "corpus.txt").string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
