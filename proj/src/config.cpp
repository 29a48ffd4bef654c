#include "wordacq/config.hpp"

#include <map>
#include <sstream>

#include "wordacq/errors.hpp"
#include "wordacq/io_util.hpp"

namespace wordacq {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<ScheduleTier> parse_tiers(const std::string& text) {
  // "100:1000,500:10000,1000:20000"
  std::vector<ScheduleTier> tiers;
  for (const std::string& part : split_on(text, ',')) {
    auto pair = split_on(trim(part), ':');
    if (pair.size() != 2) throw ConfigError("malformed checkpoint tier: " + part);
    tiers.push_back({std::stoll(pair[0]), std::stoll(pair[1])});
  }
  return tiers;
}

std::string tiers_to_string(const std::vector<ScheduleTier>& tiers) {
  std::string out;
  for (const auto& t : tiers) {
    if (!out.empty()) out += ',';
    out += std::to_string(t.every) + ":" + std::to_string(t.until);
  }
  return out;
}

}  // namespace

PipelineConfig PipelineConfig::parse(const std::string& text,
                                     const std::vector<std::string>& overrides,
                                     const std::filesystem::path& base_dir) {
  // Collect section.key -> value, then apply overrides, then bind.
  std::map<std::string, std::string> kv;
  std::string section;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header: " + line);
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("malformed config line: " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    kv[section.empty() ? key : section + "." + key] = value;
  }
  for (const std::string& ov : overrides) {
    const size_t eq = ov.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be section.key=value: " + ov);
    kv[trim(ov.substr(0, eq))] = trim(ov.substr(eq + 1));
  }

  PipelineConfig c;
  auto take = [&](const std::string& key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) return "";
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto path_of = [&](const std::string& v) -> std::filesystem::path {
    if (v.empty()) return {};
    std::filesystem::path p(v);
    return p.is_absolute() ? p : base_dir / p;
  };

  if (auto v = take("run_dir"); !v.empty()) c.run_dir = path_of(v);
  if (auto v = take("seed"); !v.empty()) c.seed = std::stoull(v);

  if (auto v = take("corpus.input"); !v.empty()) c.corpus.input = path_of(v);
  if (auto v = take("corpus.words"); !v.empty()) c.corpus.words = path_of(v);
  if (auto v = take("corpus.concreteness"); !v.empty()) c.corpus.concreteness = path_of(v);
  if (auto v = take("corpus.lexical_class"); !v.empty()) c.corpus.lexical_class = path_of(v);
  if (auto v = take("corpus.vocab_max"); !v.empty()) c.corpus.vocab_max = std::stoul(v);
  if (auto v = take("corpus.min_count"); !v.empty()) c.corpus.min_count = std::stoull(v);
  if (auto v = take("corpus.max_len"); !v.empty()) c.corpus.max_len = std::stoul(v);
  if (auto v = take("corpus.eval_fraction"); !v.empty()) c.corpus.eval_fraction = std::stod(v);

  if (auto v = take("model.hidden"); !v.empty()) c.model.hidden = std::stoi(v);
  if (auto v = take("model.layers"); !v.empty()) c.model.layers = std::stoi(v);
  if (auto v = take("model.heads"); !v.empty()) c.model.heads = std::stoi(v);
  if (auto v = take("model.intermediate"); !v.empty()) c.model.intermediate = std::stoi(v);
  if (auto v = take("model.dropout"); !v.empty()) c.model.dropout = std::stod(v);
  if (auto v = take("model.mask_proportion"); !v.empty()) c.model.mask_proportion = std::stod(v);
  if (auto v = take("model.init_scale"); !v.empty()) c.model.init_scale = std::stod(v);
  if (auto v = take("model.init_dist"); !v.empty()) c.model.init_dist = v;

  if (auto v = take("training.batch"); !v.empty()) c.training.batch = std::stoi(v);
  if (auto v = take("training.steps"); !v.empty()) c.training.steps = std::stoll(v);
  if (auto v = take("training.learning_rate"); !v.empty()) c.training.learning_rate = std::stod(v);
  if (auto v = take("training.warmup"); !v.empty()) c.training.warmup = std::stoll(v);
  if (auto v = take("training.adam_beta1"); !v.empty()) c.training.adam_beta1 = std::stod(v);
  if (auto v = take("training.adam_beta2"); !v.empty()) c.training.adam_beta2 = std::stod(v);
  if (auto v = take("training.adam_eps"); !v.empty()) c.training.adam_eps = std::stod(v);
  if (auto v = take("training.clip_norm"); !v.empty()) c.training.clip_norm = std::stod(v);
  if (auto v = take("training.log_every"); !v.empty()) c.training.log_every = std::stoll(v);

  if (auto v = take("checkpoints.tiers"); !v.empty()) c.checkpoints.tiers = parse_tiers(v);

  if (auto v = take("analysis.max_samples"); !v.empty()) c.analysis.max_samples = std::stoull(v);
  if (auto v = take("analysis.min_context"); !v.empty()) c.analysis.min_context = std::stoull(v);
  if (auto v = take("analysis.min_samples"); !v.empty()) c.analysis.min_samples = std::stoull(v);
  if (auto v = take("analysis.proportion"); !v.empty()) c.analysis.proportion = std::stod(v);
  if (auto v = take("analysis.smoothing_alpha"); !v.empty())
    c.analysis.smoothing_alpha = std::stod(v);
  if (auto v = take("analysis.kl_sample"); !v.empty()) c.analysis.kl_sample = std::stoull(v);
  if (auto v = take("analysis.phase_margin"); !v.empty()) c.analysis.phase_margin = std::stod(v);
  if (auto v = take("analysis.threads"); !v.empty()) c.analysis.threads = std::stoi(v);
  if (auto v = take("analysis.quadratic_log_frequency"); !v.empty())
    c.analysis.quadratic_log_frequency = v == "true" || v == "1";

  if (!kv.empty()) {
    std::string unknown;
    for (const auto& [k, _] : kv) unknown += (unknown.empty() ? "" : ", ") + k;
    throw ConfigError("unknown config keys: " + unknown);
  }
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& file,
                                    const std::vector<std::string>& overrides) {
  return parse(read_text_file(file), overrides,
               file.has_parent_path() ? file.parent_path() : ".");
}

ModelConfig PipelineConfig::model_config(Architecture arch, uint32_t vocab_size) const {
  ModelConfig m;
  m.architecture = arch;
  m.vocab_size = vocab_size;
  m.hidden_size = model.hidden;
  m.embedding_size = model.hidden;
  m.layers = model.layers;
  m.heads = model.heads;
  m.intermediate_size = model.intermediate;
  m.max_seq_len = static_cast<int>(corpus.max_len);
  m.dropout = model.dropout;
  m.mask_proportion = model.mask_proportion;
  m.init_scale = model.init_scale;
  m.init_dist = model.init_dist;
  m.seed = Rng(seed).derive(fnv1a64(architecture_name(arch))).next_u64();
  return m;
}

TrainConfig PipelineConfig::train_config() const {
  TrainConfig t;
  t.batch_size = training.batch;
  t.total_steps = training.steps;
  t.learning_rate = training.learning_rate;
  t.warmup_steps = training.warmup;
  t.adam.beta1 = training.adam_beta1;
  t.adam.beta2 = training.adam_beta2;
  t.adam.eps = training.adam_eps;
  t.clip_norm = training.clip_norm;
  t.log_every = training.log_every;
  t.seed = Rng(seed).derive(0x7261696e).next_u64();
  return t;
}

std::string PipelineConfig::render() const {
  std::ostringstream out;
  out << "run_dir = " << run_dir.string() << "\n";
  out << "seed = " << seed << "\n\n";
  out << "[corpus]\n";
  out << "input = " << corpus.input.string() << "\n";
  out << "words = " << corpus.words.string() << "\n";
  if (!corpus.concreteness.empty()) out << "concreteness = " << corpus.concreteness.string() << "\n";
  if (!corpus.lexical_class.empty())
    out << "lexical_class = " << corpus.lexical_class.string() << "\n";
  out << "vocab_max = " << corpus.vocab_max << "\n";
  out << "min_count = " << corpus.min_count << "\n";
  out << "max_len = " << corpus.max_len << "\n";
  out << "eval_fraction = " << format_double(corpus.eval_fraction) << "\n\n";
  out << "[model]\n";
  out << "hidden = " << model.hidden << "\n";
  out << "layers = " << model.layers << "\n";
  out << "heads = " << model.heads << "\n";
  out << "intermediate = " << model.intermediate << "\n";
  out << "dropout = " << format_double(model.dropout) << "\n";
  out << "mask_proportion = " << format_double(model.mask_proportion) << "\n";
  out << "init_scale = " << format_double(model.init_scale) << "\n";
  out << "init_dist = " << model.init_dist << "\n\n";
  out << "[training]\n";
  out << "batch = " << training.batch << "\n";
  out << "steps = " << training.steps << "\n";
  out << "learning_rate = " << format_double(training.learning_rate) << "\n";
  out << "warmup = " << training.warmup << "\n";
  out << "adam_beta1 = " << format_double(training.adam_beta1) << "\n";
  out << "adam_beta2 = " << format_double(training.adam_beta2) << "\n";
  out << "adam_eps = " << format_double(training.adam_eps) << "\n";
  out << "clip_norm = " << format_double(training.clip_norm) << "\n";
  out << "log_every = " << training.log_every << "\n\n";
  out << "[checkpoints]\n";
  out << "tiers = " << tiers_to_string(checkpoints.tiers) << "\n\n";
  out << "[analysis]\n";
  out << "max_samples = " << analysis.max_samples << "\n";
  out << "min_context = " << analysis.min_context << "\n";
  out << "min_samples = " << analysis.min_samples << "\n";
  out << "proportion = " << format_double(analysis.proportion) << "\n";
  out << "smoothing_alpha = " << format_double(analysis.smoothing_alpha) << "\n";
  out << "kl_sample = " << analysis.kl_sample << "\n";
  out << "phase_margin = " << format_double(analysis.phase_margin) << "\n";
  out << "threads = " << analysis.threads << "\n";
  out << "quadratic_log_frequency = " << (analysis.quadratic_log_frequency ? "true" : "false")
      << "\n";
  return out.str();
}

}  // namespace wordacq
