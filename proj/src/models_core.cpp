#include <cmath>
#include <cstring>
#include <fstream>

#include "wordacq/errors.hpp"
#include "wordacq/io_util.hpp"
#include "wordacq/models.hpp"

namespace wordacq {

std::string architecture_name(Architecture a) {
  switch (a) {
    case Architecture::Lstm: return "lstm";
    case Architecture::BiLstm: return "bilstm";
    case Architecture::CausalTransformer: return "causal_transformer";
    case Architecture::MaskedTransformer: return "masked_transformer";
  }
  return "?";
}

Architecture architecture_from_name(const std::string& s) {
  if (s == "lstm") return Architecture::Lstm;
  if (s == "bilstm") return Architecture::BiLstm;
  if (s == "causal_transformer" || s == "causal") return Architecture::CausalTransformer;
  if (s == "masked_transformer" || s == "masked") return Architecture::MaskedTransformer;
  throw ConfigError("unknown architecture: " + s);
}

void ModelConfig::validate() const {
  if (vocab_size <= Vocabulary::kNumSpecials)
    throw ConfigError("model vocab_size must exceed the special token count");
  if (hidden_size <= 0 || embedding_size <= 0 || layers <= 0)
    throw ConfigError("model dimensions must be positive");
  if (embedding_size != hidden_size)
    throw ConfigError("tied output head requires embedding_size == hidden_size");
  if (is_transformer()) {
    if (heads <= 0 || hidden_size % heads != 0)
      throw ConfigError("hidden_size must be divisible by attention heads");
    if (intermediate_size <= 0) throw ConfigError("intermediate_size must be positive");
    if (max_seq_len <= 1) throw ConfigError("max_seq_len must be > 1");
  }
  if (architecture == Architecture::MaskedTransformer &&
      !(mask_proportion > 0.0 && mask_proportion < 1.0))
    throw ConfigError("mask_proportion must be in (0,1) for the masked LM");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
  if (init_dist != "normal" && init_dist != "uniform")
    throw ConfigError("init_dist must be normal or uniform");
}

namespace {

void push(std::vector<NamedParam>& out, const std::string& name, Tensor& t) {
  out.push_back({name, &t});
}

std::vector<NamedParam> enumerate(LMParameters& p) {
  std::vector<NamedParam> out;
  push(out, "tok_embed", p.tok_embed);
  push(out, "out_bias", p.out_bias);
  if (p.config.is_transformer()) {
    push(out, "pos_embed", p.pos_embed);
    for (size_t l = 0; l < p.blocks.size(); ++l) {
      auto& b = p.blocks[l];
      const std::string pre = "block" + std::to_string(l) + ".";
      push(out, pre + "ln1_g", b.ln1_g);
      push(out, pre + "ln1_b", b.ln1_b);
      push(out, pre + "wq", b.wq);
      push(out, pre + "bq", b.bq);
      push(out, pre + "wk", b.wk);
      push(out, pre + "wv", b.wv);
      push(out, pre + "bv", b.bv);
      push(out, pre + "wo", b.wo);
      push(out, pre + "bo", b.bo);
      push(out, pre + "ln2_g", b.ln2_g);
      push(out, pre + "ln2_b", b.ln2_b);
      push(out, pre + "w1", b.w1);
      push(out, pre + "b1", b.b1);
      push(out, pre + "w2", b.w2);
      push(out, pre + "b2", b.b2);
    }
    push(out, "final_ln_g", p.final_ln_g);
    push(out, "final_ln_b", p.final_ln_b);
  } else {
    for (size_t l = 0; l < p.forward_stack.size(); ++l) {
      const std::string pre = "fwd" + std::to_string(l) + ".";
      push(out, pre + "wx", p.forward_stack[l].wx);
      push(out, pre + "wh", p.forward_stack[l].wh);
      push(out, pre + "b", p.forward_stack[l].b);
    }
    for (size_t l = 0; l < p.backward_stack.size(); ++l) {
      const std::string pre = "bwd" + std::to_string(l) + ".";
      push(out, pre + "wx", p.backward_stack[l].wx);
      push(out, pre + "wh", p.backward_stack[l].wh);
      push(out, pre + "b", p.backward_stack[l].b);
    }
  }
  return out;
}

}  // namespace

std::vector<NamedParam> LMParameters::all() { return enumerate(*this); }

std::vector<NamedParam> LMParameters::all() const {
  return enumerate(const_cast<LMParameters&>(*this));
}

void LMParameters::ensure_grads() {
  for (auto& p : all()) p.tensor->ensure_grad();
}

void LMParameters::zero_grads() {
  for (auto& p : all()) p.tensor->zero_grad();
}

int64_t LMParameters::parameter_count() const {
  int64_t n = 0;
  for (const auto& p : all()) n += p.tensor->size();
  return n;
}

namespace {

LMParameters make_shell(const ModelConfig& config) {
  config.validate();
  LMParameters p;
  p.config = config;
  const int h = config.hidden_size;
  const auto v = static_cast<Eigen::Index>(config.vocab_size);
  p.tok_embed = Tensor(v, h);
  p.out_bias = Tensor(1, v);
  if (config.is_transformer()) {
    p.pos_embed = Tensor(config.max_seq_len, h);
    p.final_ln_g = Tensor(1, h);
    p.final_ln_b = Tensor(1, h);
    p.blocks.resize(config.layers);
    for (auto& b : p.blocks) {
      b.ln1_g = Tensor(1, h);
      b.ln1_b = Tensor(1, h);
      b.ln2_g = Tensor(1, h);
      b.ln2_b = Tensor(1, h);
      b.wq = Tensor(h, h);
      b.wk = Tensor(h, h);
      b.wv = Tensor(h, h);
      b.wo = Tensor(h, h);
      b.bq = Tensor(1, h);
      b.bv = Tensor(1, h);
      b.bo = Tensor(1, h);
      b.w1 = Tensor(h, config.intermediate_size);
      b.b1 = Tensor(1, config.intermediate_size);
      b.w2 = Tensor(config.intermediate_size, h);
      b.b2 = Tensor(1, h);
    }
  } else {
    auto make_stack = [&](std::vector<LstmLayerParams>& stack) {
      stack.resize(config.layers);
      for (int l = 0; l < config.layers; ++l) {
        const int in = h;  // embedding size == hidden size
        stack[l].wx = Tensor(4 * h, in);
        stack[l].wh = Tensor(4 * h, h);
        stack[l].b = Tensor(1, 4 * h);
      }
    };
    make_stack(p.forward_stack);
    if (config.architecture == Architecture::BiLstm) make_stack(p.backward_stack);
  }
  return p;
}

enum class InitKind { RandomWeight, Zero, One, LstmGateBias };

InitKind init_kind(const std::string& name) {
  if (name.ends_with("_g")) return InitKind::One;  // layer norm gains
  if (name.ends_with("_b")) return InitKind::Zero; // layer norm shifts
  if (name == "out_bias") return InitKind::Zero;
  if (name.ends_with(".bq") || name.ends_with(".bv") || name.ends_with(".bo") ||
      name.ends_with(".b1") || name.ends_with(".b2"))
    return InitKind::Zero;
  if (name.ends_with(".b")) return InitKind::LstmGateBias;
  return InitKind::RandomWeight;
}

}  // namespace

LMParameters make_parameter_shell(const ModelConfig& config) { return make_shell(config); }

LMParameters init_model(const ModelConfig& config) {
  LMParameters p = make_shell(config);
  Rng rng(config.seed);
  const int h = config.hidden_size;
  for (auto& np : p.all()) {
    Mat& m = np.tensor->value;
    switch (init_kind(np.name)) {
      case InitKind::One:
        m.setOnes();
        break;
      case InitKind::Zero:
        m.setZero();
        break;
      case InitKind::LstmGateBias:
        // Gate order [i f g o]: forget gate starts at +1.
        m.setZero();
        m.block(0, h, 1, h).setOnes();
        break;
      case InitKind::RandomWeight:
        for (Eigen::Index i = 0; i < m.rows(); ++i)
          for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = config.init_dist == "normal"
                          ? config.init_scale * rng.next_gaussian()
                          : config.init_scale * (2.0 * rng.next_double() - 1.0);
        break;
    }
  }
  return p;
}

void LMParameters::save(const std::filesystem::path& file) const {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write checkpoint: " + file.string());
  const char magic[8] = {'W', 'A', 'C', 'Q', 'P', 'A', 'R', 'M'};
  out.write(magic, 8);
  auto params = all();
  const uint32_t n = static_cast<uint32_t>(params.size());
  out.write(reinterpret_cast<const char*>(&n), 4);
  for (const auto& np : params) {
    const uint32_t len = static_cast<uint32_t>(np.name.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(np.name.data(), len);
    const uint64_t rows = np.tensor->value.rows(), cols = np.tensor->value.cols();
    out.write(reinterpret_cast<const char*>(&rows), 8);
    out.write(reinterpret_cast<const char*>(&cols), 8);
    out.write(reinterpret_cast<const char*>(np.tensor->value.data()),
              static_cast<std::streamsize>(8 * rows * cols));
  }
  if (!out) throw ConfigError("checkpoint write failed: " + file.string());
}

void LMParameters::load_values(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw MissingUpstreamError("cannot open checkpoint: " + file.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "WACQPARM", 8) != 0)
    throw ConfigError("bad checkpoint header: " + file.string());
  uint32_t n = 0;
  in.read(reinterpret_cast<char*>(&n), 4);
  auto params = all();
  if (n != params.size())
    throw ConfigError("checkpoint tensor count mismatch: " + file.string());
  for (auto& np : params) {
    uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    std::string name(len, '\0');
    in.read(name.data(), len);
    uint64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), 8);
    in.read(reinterpret_cast<char*>(&cols), 8);
    if (name != np.name || rows != static_cast<uint64_t>(np.tensor->value.rows()) ||
        cols != static_cast<uint64_t>(np.tensor->value.cols()))
      throw ConfigError("checkpoint layout mismatch at tensor " + name);
    in.read(reinterpret_cast<char*>(np.tensor->value.data()),
            static_cast<std::streamsize>(8 * rows * cols));
  }
  if (!in) throw ConfigError("truncated checkpoint: " + file.string());
}

Vec predict_distribution(const LMParameters& params, const std::vector<uint32_t>& sequence,
                         int position) {
  TokenBatch batch;
  batch.batch = 1;
  batch.time = static_cast<int>(sequence.size());
  batch.ids.assign(sequence.begin(), sequence.end());
  if (params.config.architecture == Architecture::MaskedTransformer) {
    if (position < 0 || position >= batch.time)
      throw ConfigError("predict_distribution: position out of range");
    batch.id(0, position) = static_cast<int32_t>(Vocabulary::kMask);
  }
  Mat logits = predict_logits(params, batch, {{0, position}});
  Vec col = logits.col(0);
  const double m = col.maxCoeff();
  Vec e = (col.array() - m).exp();
  return e / e.sum();
}

}  // namespace wordacq
