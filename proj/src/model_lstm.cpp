// Unidirectional and bidirectional stacked LSTM language models with
// hand-written backpropagation through time.
//
// Cell (gate order [i f g o], blocks of h columns in the 4h preactivation):
//   pre = x W_x^T + h_prev W_h^T + b
//   i,f,o = sigmoid(pre_i,f,o), g = tanh(pre_g)
//   c = f.c_prev + i.g,  h = o.tanh(c)
//
// The unidirectional model predicts ids[t+1] from h_t; the bidirectional
// model predicts ids[t] from h_fwd(t-1) + h_bwd(t+1), so neither stack has
// seen the predicted token.

#include "wordacq/errors.hpp"
#include "wordacq/models.hpp"

namespace wordacq {

namespace {

struct StackCache {
  // [layer][t], each B x {h or 4h}; time index is the true sequence position.
  std::vector<std::vector<Mat>> gates;
  std::vector<std::vector<Mat>> cell;
  std::vector<std::vector<Mat>> tanh_cell;
  std::vector<std::vector<Mat>> hidden;
  std::vector<std::vector<Mat>> drop_mask;  // input dropout per layer > 0
};

void resize_cache(StackCache& c, int layers, int T) {
  c.gates.assign(layers, std::vector<Mat>(T));
  c.cell.assign(layers, std::vector<Mat>(T));
  c.tanh_cell.assign(layers, std::vector<Mat>(T));
  c.hidden.assign(layers, std::vector<Mat>(T));
  c.drop_mask.assign(layers, std::vector<Mat>(T));
}

// reversed=false walks t = 0..T-1 (forward stack), true walks T-1..0.
void run_stack(const std::vector<LstmLayerParams>& stack, const Mat& embedded,
               const TokenBatch& batch, bool reversed, double dropout, Rng* rng,
               StackCache& cache) {
  const int L = static_cast<int>(stack.size());
  const int B = batch.batch, T = batch.time;
  const int h = static_cast<int>(stack[0].wh.value.cols());
  resize_cache(cache, L, T);

  for (int l = 0; l < L; ++l) {
    Mat h_prev = Mat::Zero(B, h);
    Mat c_prev = Mat::Zero(B, h);
    for (int step = 0; step < T; ++step) {
      const int t = reversed ? T - 1 - step : step;
      Mat x;
      if (l == 0) {
        x = embedded.middleRows(static_cast<Eigen::Index>(t) * B, B);
      } else {
        x = cache.hidden[l - 1][t];
        if (dropout > 0.0 && rng) {
          Mat mask(B, h);
          const double keep = 1.0 - dropout;
          for (Eigen::Index r = 0; r < mask.rows(); ++r)
            for (Eigen::Index q = 0; q < mask.cols(); ++q)
              mask(r, q) = rng->next_bernoulli(keep) ? 1.0 / keep : 0.0;
          cache.drop_mask[l][t] = mask;
          x.array() *= mask.array();
        }
      }
      Mat pre = x * stack[l].wx.value.transpose() + h_prev * stack[l].wh.value.transpose();
      pre.rowwise() += stack[l].b.value.row(0);

      Mat gates(B, 4 * h);
      gates.block(0, 0, B, h) = pre.block(0, 0, B, h).unaryExpr([](double v) { return sigmoid(v); });
      gates.block(0, h, B, h) = pre.block(0, h, B, h).unaryExpr([](double v) { return sigmoid(v); });
      gates.block(0, 2 * h, B, h) = pre.block(0, 2 * h, B, h).array().tanh();
      gates.block(0, 3 * h, B, h) =
          pre.block(0, 3 * h, B, h).unaryExpr([](double v) { return sigmoid(v); });

      Mat c = gates.block(0, h, B, h).cwiseProduct(c_prev) +
              gates.block(0, 0, B, h).cwiseProduct(gates.block(0, 2 * h, B, h));
      Mat tc = c.array().tanh();
      Mat hh = gates.block(0, 3 * h, B, h).cwiseProduct(tc);

      cache.gates[l][t] = std::move(gates);
      cache.cell[l][t] = c;
      cache.tanh_cell[l][t] = std::move(tc);
      cache.hidden[l][t] = hh;
      h_prev = cache.hidden[l][t];
      c_prev = std::move(c);
    }
  }
}

// dhidden: external gradients per [layer][t] (only the top layer is usually
// populated). Accumulates parameter grads and the embedding-input gradient.
void backprop_stack(std::vector<LstmLayerParams>& stack, const Mat& embedded,
                    const TokenBatch& batch, bool reversed, const StackCache& cache,
                    std::vector<std::vector<Mat>>& dhidden, Mat& dembedded) {
  const int L = static_cast<int>(stack.size());
  const int B = batch.batch, T = batch.time;
  const int h = static_cast<int>(stack[0].wh.value.cols());

  for (int l = L - 1; l >= 0; --l) {
    Mat dh_carry = Mat::Zero(B, h);
    Mat dc_carry = Mat::Zero(B, h);
    for (int step = T - 1; step >= 0; --step) {
      const int t = reversed ? T - 1 - step : step;
      const Mat& gates = cache.gates[l][t];
      const auto gi = gates.block(0, 0, B, h);
      const auto gf = gates.block(0, h, B, h);
      const auto gg = gates.block(0, 2 * h, B, h);
      const auto go = gates.block(0, 3 * h, B, h);
      const Mat& tc = cache.tanh_cell[l][t];

      Mat dh = dh_carry;
      if (dhidden[l][t].size() > 0) dh += dhidden[l][t];

      Mat dc = dc_carry;
      dc.array() += dh.array() * go.array() * (1.0 - tc.array().square());

      const bool first = step == 0;
      Mat c_prev = first ? Mat::Zero(B, h) : cache.cell[l][reversed ? t + 1 : t - 1];
      Mat h_prev = first ? Mat::Zero(B, h) : cache.hidden[l][reversed ? t + 1 : t - 1];

      Mat dpre(B, 4 * h);
      // i, f, o through the logistic derivative; g through tanh.
      dpre.block(0, 0, B, h) =
          (dc.array() * gg.array() * gi.array() * (1.0 - gi.array())).matrix();
      dpre.block(0, h, B, h) =
          (dc.array() * c_prev.array() * gf.array() * (1.0 - gf.array())).matrix();
      dpre.block(0, 2 * h, B, h) =
          (dc.array() * gi.array() * (1.0 - gg.array().square())).matrix();
      dpre.block(0, 3 * h, B, h) =
          (dh.array() * tc.array() * go.array() * (1.0 - go.array())).matrix();

      Mat x;
      if (l == 0) {
        x = embedded.middleRows(static_cast<Eigen::Index>(t) * B, B);
      } else {
        x = cache.hidden[l - 1][t];
        if (cache.drop_mask[l][t].size() > 0) x.array() *= cache.drop_mask[l][t].array();
      }
      stack[l].wx.grad.noalias() += dpre.transpose() * x;
      stack[l].wh.grad.noalias() += dpre.transpose() * h_prev;
      stack[l].b.grad.row(0) += dpre.colwise().sum();

      Mat dx = dpre * stack[l].wx.value;
      if (l == 0) {
        dembedded.middleRows(static_cast<Eigen::Index>(t) * B, B) += dx;
      } else {
        if (cache.drop_mask[l][t].size() > 0) dx.array() *= cache.drop_mask[l][t].array();
        if (dhidden[l - 1][t].size() > 0)
          dhidden[l - 1][t] += dx;
        else
          dhidden[l - 1][t] = std::move(dx);
      }
      dh_carry.noalias() = dpre * stack[l].wh.value;
      dc_carry = dc.cwiseProduct(gf);
    }
  }
}

// Embedding lookup, rows ordered t-major (t * B + b) to match the per-step
// batch blocks used above.
Mat embed_tokens(const LMParameters& p, const TokenBatch& batch) {
  const int B = batch.batch, T = batch.time;
  Mat x(static_cast<Eigen::Index>(B) * T, p.config.hidden_size);
  for (int t = 0; t < T; ++t)
    for (int b = 0; b < B; ++b)
      x.row(static_cast<Eigen::Index>(t) * B + b) = p.tok_embed.value.row(batch.id(b, t));
  return x;
}

void scatter_embedding_grad(LMParameters& p, const TokenBatch& batch, const Mat& dembedded) {
  const int B = batch.batch, T = batch.time;
  for (int t = 0; t < T; ++t)
    for (int b = 0; b < B; ++b)
      p.tok_embed.grad.row(batch.id(b, t)) +=
          dembedded.row(static_cast<Eigen::Index>(t) * B + b);
}

}  // namespace

TrainStepStats lstm_train_step(LMParameters& p, const TokenBatch& batch, Rng& rng) {
  const bool bi = p.config.architecture == Architecture::BiLstm;
  const int B = batch.batch, T = batch.time;
  const int h = p.config.hidden_size;
  const int L = p.config.layers;
  if (T < (bi ? 3 : 2)) throw ConfigError("sequence too short for LSTM training step");

  Mat embedded = embed_tokens(p, batch);
  StackCache fwd, bwd;
  const double dropout = p.config.dropout;
  run_stack(p.forward_stack, embedded, batch, false, dropout, &rng, fwd);
  if (bi) run_stack(p.backward_stack, embedded, batch, true, dropout, &rng, bwd);

  // Prediction rows: unidirectional predicts t+1 from h_t (t = 0..T-2);
  // bidirectional predicts t from h_f(t-1) + h_b(t+1) (t = 1..T-2).
  const int P = bi ? T - 2 : T - 1;
  Mat head_in(static_cast<Eigen::Index>(P) * B, h);
  std::vector<int32_t> targets(static_cast<size_t>(P) * B);
  for (int i = 0; i < P; ++i) {
    for (int b = 0; b < B; ++b) {
      const Eigen::Index r = static_cast<Eigen::Index>(i) * B + b;
      if (bi) {
        head_in.row(r) = fwd.hidden[L - 1][i](b, Eigen::all) +
                         bwd.hidden[L - 1][i + 2](b, Eigen::all);
        targets[r] = batch.id(b, i + 1);
      } else {
        head_in.row(r) = fwd.hidden[L - 1][i].row(b);
        targets[r] = batch.id(b, i + 1);
      }
    }
  }

  // logits laid out vocab x predictions so each softmax runs on contiguous
  // memory.
  Mat logits = p.tok_embed.value * head_in.transpose();
  logits.colwise() += p.out_bias.value.row(0).transpose();
  Mat dlogits;
  const double loss_sum = softmax_xent_cols(logits, targets, dlogits);
  const double inv_n = 1.0 / static_cast<double>(targets.size());
  dlogits *= inv_n;

  p.tok_embed.grad.noalias() += dlogits * head_in;
  p.out_bias.grad.row(0) += dlogits.rowwise().sum().transpose();
  Mat dhead = dlogits.transpose() * p.tok_embed.value;

  std::vector<std::vector<Mat>> dh_fwd(L, std::vector<Mat>(T));
  std::vector<std::vector<Mat>> dh_bwd(L, std::vector<Mat>(T));
  for (int i = 0; i < P; ++i) {
    const auto rows = dhead.middleRows(static_cast<Eigen::Index>(i) * B, B);
    if (bi) {
      if (dh_fwd[L - 1][i].size() == 0) dh_fwd[L - 1][i] = Mat::Zero(B, h);
      if (dh_bwd[L - 1][i + 2].size() == 0) dh_bwd[L - 1][i + 2] = Mat::Zero(B, h);
      dh_fwd[L - 1][i] += rows;
      dh_bwd[L - 1][i + 2] += rows;
    } else {
      dh_fwd[L - 1][i] = rows;
    }
  }

  Mat dembedded = Mat::Zero(embedded.rows(), embedded.cols());
  backprop_stack(p.forward_stack, embedded, batch, false, fwd, dh_fwd, dembedded);
  if (bi) backprop_stack(p.backward_stack, embedded, batch, true, bwd, dh_bwd, dembedded);
  scatter_embedding_grad(p, batch, dembedded);

  TrainStepStats stats;
  stats.loss_sum_nats = loss_sum;
  stats.predictions = static_cast<int64_t>(targets.size());
  return stats;
}

Mat lstm_predict_logits(const LMParameters& p, const TokenBatch& batch,
                        const std::vector<PredictRequest>& requests) {
  const bool bi = p.config.architecture == Architecture::BiLstm;
  const int B = batch.batch, T = batch.time;
  const int L = p.config.layers;
  for (const auto& r : requests) {
    if (r.row < 0 || r.row >= B) throw ConfigError("predict: row out of range");
    if (bi) {
      if (r.pos < 1 || r.pos > T - 2)
        throw ConfigError("predict: terminal positions invalid for bidirectional model");
    } else if (r.pos < 1 || r.pos > T - 1) {
      throw ConfigError("predict: position must be in [1, T-1] for unidirectional model");
    }
  }

  Mat embedded = embed_tokens(p, batch);
  StackCache fwd, bwd;
  run_stack(p.forward_stack, embedded, batch, false, 0.0, nullptr, fwd);
  if (bi) run_stack(p.backward_stack, embedded, batch, true, 0.0, nullptr, bwd);

  Mat head_in(static_cast<Eigen::Index>(requests.size()), p.config.hidden_size);
  for (size_t i = 0; i < requests.size(); ++i) {
    const auto& r = requests[i];
    if (bi)
      head_in.row(static_cast<Eigen::Index>(i)) =
          fwd.hidden[L - 1][r.pos - 1].row(r.row) + bwd.hidden[L - 1][r.pos + 1].row(r.row);
    else
      head_in.row(static_cast<Eigen::Index>(i)) = fwd.hidden[L - 1][r.pos - 1].row(r.row);
  }
  Mat logits = p.tok_embed.value * head_in.transpose();
  logits.colwise() += p.out_bias.value.row(0).transpose();
  return logits;
}

}  // namespace wordacq
