#include "wordacq/numerics.hpp"

#include <cmath>

#include "wordacq/errors.hpp"
#include "wordacq/rng.hpp"

namespace wordacq {

double lr_at(int64_t step, const LrSchedule& schedule) {
  if (step < 0 || step > schedule.total_steps)
    throw ConfigError("lr_at: step " + std::to_string(step) + " outside [0, total]");
  if (schedule.warmup > 0 && step <= schedule.warmup)
    return schedule.base * static_cast<double>(step) / static_cast<double>(schedule.warmup);
  const int64_t tail = schedule.total_steps - schedule.warmup;
  if (tail <= 0) return 0.0;
  return schedule.base * static_cast<double>(schedule.total_steps - step) /
         static_cast<double>(tail);
}

SoftmaxXentResult softmax_cross_entropy(const Eigen::Ref<const Vec>& logits,
                                        Eigen::Index target) {
  if (!logits.allFinite()) throw NumericalError("softmax_cross_entropy: non-finite logits");
  if (target < 0 || target >= logits.size())
    throw ConfigError("softmax_cross_entropy: target out of range");
  const double m = logits.maxCoeff();
  Vec e = (logits.array() - m).exp();
  const double z = e.sum();
  SoftmaxXentResult r;
  r.grad = e / z;
  r.loss_nats = std::log(z) - (logits(target) - m);
  r.grad(target) -= 1.0;
  return r;
}

double softmax_xent_cols(const Mat& logits, const std::vector<int32_t>& targets, Mat& dlogits) {
  if (static_cast<size_t>(logits.cols()) != targets.size())
    throw ConfigError("softmax_xent_cols: column/target count mismatch");
  if (!logits.allFinite()) throw NumericalError("softmax_xent_cols: non-finite logits");
  dlogits.resize(logits.rows(), logits.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logits.cols(); ++i) {
    const double m = logits.col(i).maxCoeff();
    dlogits.col(i) = (logits.col(i).array() - m).exp();
    const double z = dlogits.col(i).sum();
    loss += std::log(z) - (logits(targets[i], i) - m);
    dlogits.col(i) /= z;
    dlogits(targets[i], i) -= 1.0;
  }
  return loss;
}

double surprisal_bits(const Eigen::Ref<const Vec>& logits, Eigen::Index target) {
  const double m = logits.maxCoeff();
  const double z = (logits.array() - m).exp().sum();
  return (std::log(z) - (logits(target) - m)) / M_LN2;
}

void log2_softmax(const Eigen::Ref<const Vec>& logits, Vec& out) {
  const double m = logits.maxCoeff();
  out = logits.array() - m;
  const double lse = std::log(out.array().exp().sum());
  out.array() = (out.array() - lse) / M_LN2;
}

Mat layer_norm_forward(const Mat& x, const RowVec& gamma, const RowVec& beta,
                       LayerNormCache& cache, double eps) {
  const double n = static_cast<double>(x.cols());
  Vec mean = x.rowwise().mean();
  Mat centered = x.colwise() - mean;
  Vec var = centered.array().square().rowwise().sum() / n;
  cache.inv_std = (var.array() + eps).rsqrt();
  cache.xhat = centered.array().colwise() * cache.inv_std.array();
  return (cache.xhat.array().rowwise() * gamma.array()).rowwise() + beta.array();
}

Mat layer_norm_backward(const Mat& dy, const LayerNormCache& cache, const RowVec& gamma,
                        RowVec& dgamma, RowVec& dbeta) {
  const double n = static_cast<double>(dy.cols());
  dgamma += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  dbeta += dy.colwise().sum();
  Mat dxhat = dy.array().rowwise() * gamma.array();
  Vec mean_dxhat = dxhat.rowwise().sum() / n;
  Vec mean_dxhat_xhat = (dxhat.array() * cache.xhat.array()).rowwise().sum() / n;
  Mat dx = dxhat;
  dx.colwise() -= mean_dxhat;
  dx.array() -= cache.xhat.array().colwise() * mean_dxhat_xhat.array();
  dx.array().colwise() *= cache.inv_std.array();
  return dx;
}

void softmax_inplace(RowRef row) {
  const double m = row.maxCoeff();
  row = (row.array() - m).exp();
  row /= row.sum();
}

void softmax_backward_inplace(const ConstRowRef& y, RowRef dy) {
  const double dot = dy.dot(y);
  dy = (y.array() * (dy.array() - dot)).matrix();
}

Adam::Adam(const std::vector<NamedParam>& params, const AdamConfig& config) : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.push_back(Mat::Zero(p.tensor->value.rows(), p.tensor->value.cols()));
    v_.push_back(Mat::Zero(p.tensor->value.rows(), p.tensor->value.cols()));
  }
}

void Adam::step(const std::vector<NamedParam>& params, double lr) {
  if (params.size() != m_.size()) throw NumericalError("adam: parameter count mismatch");
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& t = *params[i].tensor;
    if (t.grad.rows() != t.value.rows() || t.grad.cols() != t.value.cols())
      throw NumericalError("adam: gradient shape mismatch for " + params[i].name);
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * t.grad;
    v_[i].array() =
        config_.beta2 * v_[i].array() + (1.0 - config_.beta2) * t.grad.array().square();
    t.value.array() -=
        lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + config_.eps);
  }
}

double global_grad_norm(const std::vector<NamedParam>& params) {
  double sq = 0.0;
  for (const auto& p : params)
    if (p.tensor->grad.size() > 0) sq += p.tensor->grad.squaredNorm();
  return std::sqrt(sq);
}

double clip_global_norm(const std::vector<NamedParam>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& p : params)
      if (p.tensor->grad.size() > 0) p.tensor->grad *= scale;
  }
  return norm;
}

double gradient_check(const std::function<double()>& loss_fn,
                      const std::function<void()>& grad_fn,
                      const std::vector<NamedParam>& params, double epsilon,
                      size_t min_coords, uint64_t seed, GradCheckWorst* worst_out) {
  if (epsilon <= 0.0) throw ConfigError("gradient_check: epsilon must be positive");

  grad_fn();  // analytic gradients at the current point
  // Snapshot them: loss_fn may recompute gradients as a side effect.
  std::vector<Mat> analytic_grads;
  analytic_grads.reserve(params.size());
  for (const auto& p : params) analytic_grads.push_back(p.tensor->grad);

  size_t total = 0;
  for (const auto& p : params) total += static_cast<size_t>(p.tensor->size());
  const size_t n_check = std::min(total, std::max(min_coords, size_t{1}));

  Rng rng(seed);
  std::vector<size_t> flat = rng.sample_indices(total, n_check);

  double worst = 0.0;
  for (size_t f : flat) {
    // locate tensor and coordinate
    size_t offset = f;
    Tensor* t = nullptr;
    const std::string* tname = nullptr;
    const Mat* grads = nullptr;
    for (size_t pi = 0; pi < params.size(); ++pi) {
      const size_t sz = static_cast<size_t>(params[pi].tensor->size());
      if (offset < sz) {
        t = params[pi].tensor;
        tname = &params[pi].name;
        grads = &analytic_grads[pi];
        break;
      }
      offset -= sz;
    }
    double* coeff = t->value.data() + offset;
    const double saved = *coeff;
    const double analytic = grads->data()[offset];

    // Central differences at eps and 2*eps, Richardson-combined: the O(eps^2)
    // truncation term cancels, so a larger eps can be used, which keeps the
    // roundoff floor low for near-zero gradients.
    auto central = [&](double h) {
      *coeff = saved + h;
      const double up = loss_fn();
      *coeff = saved - h;
      const double down = loss_fn();
      *coeff = saved;
      return (up - down) / (2.0 * h);
    };
    const double d1 = central(epsilon);
    const double d2 = central(2.0 * epsilon);
    const double numeric = (4.0 * d1 - d2) / 3.0;
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic - numeric) / denom;
    if (rel > worst) {
      worst = rel;
      if (worst_out)
        *worst_out = {*tname, static_cast<Eigen::Index>(offset), analytic, numeric};
    }
  }
  return worst;
}

}  // namespace wordacq
