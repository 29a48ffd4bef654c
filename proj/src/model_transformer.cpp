// Pre-norm transformer blocks with learned absolute position embeddings and a
// tied-embedding output head. The causal variant computes attention rows only
// over keys [0, t], so logits at position t are exactly independent of later
// tokens; the masked variant attends over the full sequence.
//
// Rows are b-major: row(b, t) = b * T + t.

#include "wordacq/errors.hpp"
#include "wordacq/models.hpp"

namespace wordacq {

namespace {

struct BlockCache {
  LayerNormCache ln1, ln2;
  Mat a;                  // LN1 output
  Mat q, k, v;            // projections
  std::vector<Mat> attn;  // per (b * heads + head): T x T weights (causal rows ragged)
  Mat ctx;                // heads merged
  Mat f;                  // LN2 output
  Mat ff1;                // feed-forward preactivation
  Mat g;                  // gelu(ff1)
  Mat drop1, drop2;       // inverted dropout masks (empty when inactive)
};

struct ForwardCache {
  Mat x0;  // embeddings in
  std::vector<Mat> x_after_attn;
  std::vector<Mat> x_out;
  std::vector<BlockCache> blocks;
  LayerNormCache ln_final;
  Mat head_in;  // final LN output at head rows
};

Mat dropout_mask(Rng& rng, Eigen::Index rows, Eigen::Index cols, double dropout) {
  const double keep = 1.0 - dropout;
  Mat mask(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      mask(i, j) = rng.next_bernoulli(keep) ? 1.0 / keep : 0.0;
  return mask;
}

void attention_forward(const ModelConfig& cfg, int B, int T, bool causal, BlockCache& bc) {
  const int H = cfg.heads;
  const int dh = cfg.hidden_size / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  bc.ctx.resize(bc.q.rows(), bc.q.cols());
  bc.attn.assign(static_cast<size_t>(B) * H, Mat());
  for (int b = 0; b < B; ++b) {
    for (int head = 0; head < H; ++head) {
      const auto q = bc.q.block(static_cast<Eigen::Index>(b) * T, head * dh, T, dh);
      const auto k = bc.k.block(static_cast<Eigen::Index>(b) * T, head * dh, T, dh);
      const auto v = bc.v.block(static_cast<Eigen::Index>(b) * T, head * dh, T, dh);
      Mat& attn = bc.attn[static_cast<size_t>(b) * H + head];
      attn = Mat::Zero(T, T);
      auto ctx = bc.ctx.block(static_cast<Eigen::Index>(b) * T, head * dh, T, dh);
      if (causal) {
        for (int t = 0; t < T; ++t) {
          const int limit = t + 1;
          RowVec row = (q.row(t) * k.topRows(limit).transpose()) * scale;
          softmax_inplace(row);
          attn.row(t).head(limit) = row;
          ctx.row(t) = row * v.topRows(limit);
        }
      } else {
        attn = (q * k.transpose()) * scale;
        for (int t = 0; t < T; ++t) softmax_inplace(attn.row(t));
        ctx = attn * v;
      }
    }
  }
}

void attention_backward(const ModelConfig& cfg, int B, int T, bool causal, const BlockCache& bc,
                        const Mat& dctx, Mat& dq, Mat& dk, Mat& dv) {
  const int H = cfg.heads;
  const int dh = cfg.hidden_size / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  dq.setZero(bc.q.rows(), bc.q.cols());
  dk.setZero(bc.k.rows(), bc.k.cols());
  dv.setZero(bc.v.rows(), bc.v.cols());
  for (int b = 0; b < B; ++b) {
    for (int head = 0; head < H; ++head) {
      const auto q = bc.q.block(static_cast<Eigen::Index>(b) * T, head * dh, T, dh);
      const auto k = bc.k.block(static_cast<Eigen::Index>(b) * T, head * dh, T, dh);
      const auto v = bc.v.block(static_cast<Eigen::Index>(b) * T, head * dh, T, dh);
      const Mat& attn = bc.attn[static_cast<size_t>(b) * H + head];
      const auto dctx_b = dctx.block(static_cast<Eigen::Index>(b) * T, head * dh, T, dh);
      auto dq_b = dq.block(static_cast<Eigen::Index>(b) * T, head * dh, T, dh);
      auto dk_b = dk.block(static_cast<Eigen::Index>(b) * T, head * dh, T, dh);
      auto dv_b = dv.block(static_cast<Eigen::Index>(b) * T, head * dh, T, dh);
      for (int t = 0; t < T; ++t) {
        const int limit = causal ? t + 1 : T;
        const auto attn_row = attn.row(t).head(limit);
        RowVec dattn = dctx_b.row(t) * v.topRows(limit).transpose();
        softmax_backward_inplace(attn_row, dattn);  // now holds dscores
        dq_b.row(t) += dattn * k.topRows(limit) * scale;
        dk_b.topRows(limit).noalias() += dattn.transpose() * q.row(t) * scale;
        dv_b.topRows(limit).noalias() += attn_row.transpose() * dctx_b.row(t);
      }
    }
  }
}

ForwardCache transformer_forward(const LMParameters& p, const TokenBatch& batch,
                                 const std::vector<Eigen::Index>& head_rows, Rng* rng) {
  const ModelConfig& cfg = p.config;
  const int B = batch.batch, T = batch.time;
  if (T > cfg.max_seq_len)
    throw ConfigError("sequence length exceeds model max_seq_len");
  const bool causal = cfg.architecture == Architecture::CausalTransformer;
  const Eigen::Index N = static_cast<Eigen::Index>(B) * T;

  ForwardCache fc;
  fc.x0.resize(N, cfg.hidden_size);
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < T; ++t)
      fc.x0.row(static_cast<Eigen::Index>(b) * T + t) =
          p.tok_embed.value.row(batch.id(b, t)) + p.pos_embed.value.row(t);

  fc.blocks.resize(p.blocks.size());
  fc.x_after_attn.resize(p.blocks.size());
  fc.x_out.resize(p.blocks.size());
  const Mat* x_in = &fc.x0;
  const double dropout = rng ? cfg.dropout : 0.0;

  for (size_t l = 0; l < p.blocks.size(); ++l) {
    const auto& w = p.blocks[l];
    BlockCache& bc = fc.blocks[l];
    bc.a = layer_norm_forward(*x_in, w.ln1_g.value.row(0), w.ln1_b.value.row(0), bc.ln1);
    bc.q = bc.a * w.wq.value;
    bc.q.rowwise() += w.bq.value.row(0);
    bc.k = bc.a * w.wk.value;
    bc.v = bc.a * w.wv.value;
    bc.v.rowwise() += w.bv.value.row(0);
    attention_forward(cfg, B, T, causal, bc);
    Mat attn_out = bc.ctx * w.wo.value;
    attn_out.rowwise() += w.bo.value.row(0);
    if (dropout > 0.0) {
      bc.drop1 = dropout_mask(*rng, N, cfg.hidden_size, dropout);
      attn_out.array() *= bc.drop1.array();
    }
    fc.x_after_attn[l] = *x_in + attn_out;

    bc.f = layer_norm_forward(fc.x_after_attn[l], w.ln2_g.value.row(0), w.ln2_b.value.row(0),
                              bc.ln2);
    bc.ff1 = bc.f * w.w1.value;
    bc.ff1.rowwise() += w.b1.value.row(0);
    bc.g = bc.ff1.unaryExpr([](double v) { return gelu(v); });
    Mat ff_out = bc.g * w.w2.value;
    ff_out.rowwise() += w.b2.value.row(0);
    if (dropout > 0.0) {
      bc.drop2 = dropout_mask(*rng, N, cfg.hidden_size, dropout);
      ff_out.array() *= bc.drop2.array();
    }
    fc.x_out[l] = fc.x_after_attn[l] + ff_out;
    x_in = &fc.x_out[l];
  }

  // Final layer norm only at the rows feeding the output head.
  Mat x_sel(static_cast<Eigen::Index>(head_rows.size()), cfg.hidden_size);
  for (size_t i = 0; i < head_rows.size(); ++i)
    x_sel.row(static_cast<Eigen::Index>(i)) = x_in->row(head_rows[i]);
  fc.head_in = layer_norm_forward(x_sel, p.final_ln_g.value.row(0), p.final_ln_b.value.row(0),
                                  fc.ln_final);
  return fc;
}

void transformer_backward(LMParameters& p, const TokenBatch& batch,
                          const std::vector<Eigen::Index>& head_rows, const Mat& dhead_in,
                          ForwardCache& fc) {
  const ModelConfig& cfg = p.config;
  const int B = batch.batch, T = batch.time;
  const bool causal = cfg.architecture == Architecture::CausalTransformer;
  const Eigen::Index N = static_cast<Eigen::Index>(B) * T;

  RowVec dg_final = RowVec::Zero(cfg.hidden_size);
  RowVec db_final = RowVec::Zero(cfg.hidden_size);
  Mat dx_sel = layer_norm_backward(dhead_in, fc.ln_final, p.final_ln_g.value.row(0), dg_final,
                                   db_final);
  p.final_ln_g.grad.row(0) += dg_final;
  p.final_ln_b.grad.row(0) += db_final;

  Mat dx = Mat::Zero(N, cfg.hidden_size);
  for (size_t i = 0; i < head_rows.size(); ++i)
    dx.row(head_rows[i]) += dx_sel.row(static_cast<Eigen::Index>(i));

  for (int l = static_cast<int>(p.blocks.size()) - 1; l >= 0; --l) {
    auto& w = p.blocks[l];
    BlockCache& bc = fc.blocks[l];

    // feed-forward branch
    Mat dff_out = dx;
    if (bc.drop2.size() > 0) dff_out.array() *= bc.drop2.array();
    w.b2.grad.row(0) += dff_out.colwise().sum();
    w.w2.grad.noalias() += bc.g.transpose() * dff_out;
    Mat dg_act = dff_out * w.w2.value.transpose();
    Mat dff1 = dg_act.binaryExpr(bc.ff1, [](double d, double x) { return d * gelu_grad(x); });
    w.b1.grad.row(0) += dff1.colwise().sum();
    w.w1.grad.noalias() += bc.f.transpose() * dff1;
    Mat df = dff1 * w.w1.value.transpose();

    RowVec dg2 = RowVec::Zero(cfg.hidden_size), db2 = RowVec::Zero(cfg.hidden_size);
    dx += layer_norm_backward(df, bc.ln2, w.ln2_g.value.row(0), dg2, db2);
    w.ln2_g.grad.row(0) += dg2;
    w.ln2_b.grad.row(0) += db2;

    // attention branch
    Mat dattn_out = dx;
    if (bc.drop1.size() > 0) dattn_out.array() *= bc.drop1.array();
    w.bo.grad.row(0) += dattn_out.colwise().sum();
    w.wo.grad.noalias() += bc.ctx.transpose() * dattn_out;
    Mat dctx = dattn_out * w.wo.value.transpose();

    Mat dq, dk, dv;
    attention_backward(cfg, B, T, causal, bc, dctx, dq, dk, dv);

    w.bq.grad.row(0) += dq.colwise().sum();
    w.bv.grad.row(0) += dv.colwise().sum();
    w.wq.grad.noalias() += bc.a.transpose() * dq;
    w.wk.grad.noalias() += bc.a.transpose() * dk;
    w.wv.grad.noalias() += bc.a.transpose() * dv;
    Mat da = dq * w.wq.value.transpose() + dk * w.wk.value.transpose() +
             dv * w.wv.value.transpose();

    RowVec dg1 = RowVec::Zero(cfg.hidden_size), db1 = RowVec::Zero(cfg.hidden_size);
    dx += layer_norm_backward(da, bc.ln1, w.ln1_g.value.row(0), dg1, db1);
    w.ln1_g.grad.row(0) += dg1;
    w.ln1_b.grad.row(0) += db1;
  }

  for (int b = 0; b < B; ++b)
    for (int t = 0; t < T; ++t) {
      const Eigen::Index r = static_cast<Eigen::Index>(b) * T + t;
      p.tok_embed.grad.row(batch.id(b, t)) += dx.row(r);
      p.pos_embed.grad.row(t) += dx.row(r);
    }
}

}  // namespace

TrainStepStats transformer_train_step_rows(LMParameters& p, const TokenBatch& batch,
                                           const std::vector<Eigen::Index>& head_rows,
                                           const std::vector<int32_t>& targets, Rng& rng) {
  ForwardCache fc = transformer_forward(p, batch, head_rows, &rng);
  Mat logits = p.tok_embed.value * fc.head_in.transpose();
  logits.colwise() += p.out_bias.value.row(0).transpose();

  Mat dlogits;
  const double loss_sum = softmax_xent_cols(logits, targets, dlogits);
  dlogits *= 1.0 / static_cast<double>(targets.size());

  p.tok_embed.grad.noalias() += dlogits * fc.head_in;
  p.out_bias.grad.row(0) += dlogits.rowwise().sum().transpose();
  Mat dhead_in = dlogits.transpose() * p.tok_embed.value;
  transformer_backward(p, batch, head_rows, dhead_in, fc);

  TrainStepStats stats;
  stats.loss_sum_nats = loss_sum;
  stats.predictions = static_cast<int64_t>(targets.size());
  return stats;
}

Mat transformer_predict_logits(const LMParameters& p, const TokenBatch& batch,
                               const std::vector<PredictRequest>& requests) {
  const bool causal = p.config.architecture == Architecture::CausalTransformer;
  const int B = batch.batch, T = batch.time;
  std::vector<Eigen::Index> head_rows;
  head_rows.reserve(requests.size());
  for (const auto& r : requests) {
    if (r.row < 0 || r.row >= B) throw ConfigError("predict: row out of range");
    if (causal) {
      if (r.pos < 1 || r.pos > T - 1)
        throw ConfigError("predict: position must be in [1, T-1] for unidirectional model");
      head_rows.push_back(static_cast<Eigen::Index>(r.row) * T + r.pos - 1);
    } else {
      if (r.pos < 1 || r.pos > T - 2)
        throw ConfigError("predict: terminal positions invalid for bidirectional model");
      head_rows.push_back(static_cast<Eigen::Index>(r.row) * T + r.pos);
    }
  }
  ForwardCache fc = transformer_forward(p, batch, head_rows, nullptr);
  Mat logits = p.tok_embed.value * fc.head_in.transpose();
  logits.colwise() += p.out_bias.value.row(0).transpose();
  return logits;
}

}  // namespace wordacq
