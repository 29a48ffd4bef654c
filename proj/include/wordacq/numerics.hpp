#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace wordacq {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;
// Row views into column-major matrices have a non-unit inner stride.
using RowRef = Eigen::Ref<RowVec, 0, Eigen::InnerStride<>>;
using ConstRowRef = Eigen::Ref<const RowVec, 0, Eigen::InnerStride<>>;

// Double-precision buffer with an optional gradient of equal shape. All model
// state is 2D; vectors are stored 1 x n.
struct Tensor {
  Mat value;
  Mat grad;  // zero-sized until ensure_grad()

  Tensor() = default;
  Tensor(Eigen::Index rows, Eigen::Index cols) : value(Mat::Zero(rows, cols)) {}

  std::vector<Eigen::Index> shape() const { return {value.rows(), value.cols()}; }
  Eigen::Index size() const { return value.size(); }
  void ensure_grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols())
      grad = Mat::Zero(value.rows(), value.cols());
  }
  void zero_grad() {
    if (grad.size() > 0) grad.setZero();
  }
};

struct NamedParam {
  std::string name;
  Tensor* tensor;
};

// ---- learning-rate schedule ----------------------------------------------

// Linear ramp 0 -> base over [0, warmup], then linear decay base -> 0 at
// total_steps.
struct LrSchedule {
  double base = 1e-4;
  int64_t warmup = 10000;
  int64_t total_steps = 1000000;
};

double lr_at(int64_t step, const LrSchedule& schedule);

// ---- softmax cross entropy ------------------------------------------------

struct SoftmaxXentResult {
  double loss_nats;
  Vec grad;  // softmax - onehot
};

SoftmaxXentResult softmax_cross_entropy(const Eigen::Ref<const Vec>& logits, Eigen::Index target);

// Batched over columns (logits laid out vocab x predictions, so each
// prediction's logits are contiguous). Returns the summed loss in nats and
// fills dlogits with (softmax - onehot) per column, unscaled.
double softmax_xent_cols(const Mat& logits, const std::vector<int32_t>& targets, Mat& dlogits);

// -log2 P(target) from raw logits, max-stabilized.
double surprisal_bits(const Eigen::Ref<const Vec>& logits, Eigen::Index target);

// log2 softmax of a logits vector (shared work for the four KL references).
void log2_softmax(const Eigen::Ref<const Vec>& logits, Vec& out);

// ---- elementwise activations ----------------------------------------------

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
// Derivatives expressed through the saved forward outputs.
inline double dsigmoid_from_y(double y) { return y * (1.0 - y); }
inline double dtanh_from_y(double y) { return 1.0 - y * y; }

// Exact GELU and its derivative.
inline double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
}
inline double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}

// ---- layer norm -------------------------------------------------------------

struct LayerNormCache {
  Mat xhat;
  Vec inv_std;
};

// Rowwise layer norm: each row is one token vector.
Mat layer_norm_forward(const Mat& x, const RowVec& gamma, const RowVec& beta,
                       LayerNormCache& cache, double eps = 1e-5);
Mat layer_norm_backward(const Mat& dy, const LayerNormCache& cache, const RowVec& gamma,
                        RowVec& dgamma, RowVec& dbeta);

// ---- softmax over a row segment (attention) ---------------------------------

void softmax_inplace(RowRef row);
// dz = y .* (dy - dot(dy, y)) for a softmax output row y.
void softmax_backward_inplace(const ConstRowRef& y, RowRef dy);

// ---- Adam -------------------------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
};

class Adam {
 public:
  Adam() = default;
  Adam(const std::vector<NamedParam>& params, const AdamConfig& config);

  // Standard bias-corrected update at the given rate; increments the step
  // counter. Gradients must already be populated.
  void step(const std::vector<NamedParam>& params, double lr);

  int64_t steps_taken() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<Mat> m_, v_;
  int64_t step_ = 0;
};

double global_grad_norm(const std::vector<NamedParam>& params);
// Scales all gradients so the global norm is at most max_norm; returns the
// pre-clip norm.
double clip_global_norm(const std::vector<NamedParam>& params, double max_norm);

// ---- finite-difference gradient check ---------------------------------------

struct GradCheckWorst {
  std::string tensor;
  Eigen::Index index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// loss_fn: forward-only loss at the current parameter values.
// grad_fn: fills analytic gradients (zeroing first is the caller's job).
// Samples at least min_coords coordinates across all parameters and returns
// max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double gradient_check(const std::function<double()>& loss_fn,
                      const std::function<void()>& grad_fn,
                      const std::vector<NamedParam>& params, double epsilon,
                      size_t min_coords, uint64_t seed, GradCheckWorst* worst_out = nullptr);

}  // namespace wordacq
