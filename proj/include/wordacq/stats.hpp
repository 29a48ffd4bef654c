#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wordacq/acquisition.hpp"
#include "wordacq/corpus.hpp"
#include "wordacq/numerics.hpp"

namespace wordacq {

struct DesignMatrix {
  Mat X;
  std::vector<std::string> names;  // column names, "(intercept)" first by convention
};

struct RegressionResult {
  std::vector<std::string> names;
  Vec coefficients;
  Vec residuals;
  double rss = 0.0;
  double r_squared = 0.0;
  double adj_r_squared = 0.0;
  Eigen::Index n = 0;
  Eigen::Index p = 0;  // parameter count including intercept

  double coefficient_of(const std::string& name) const;
};

// Least squares through a rank-revealing QR; throws naming the dependent
// columns when X is rank deficient.
RegressionResult ols_fit(const DesignMatrix& design, const Vec& y);

struct TestResult {
  std::string kind;  // LRT | ANCOVA-F | TukeyPair
  double statistic = 0.0;
  double df1 = 0.0;
  double df2 = 0.0;  // denominator df where applicable
  double p_value = 1.0;
  std::string label_a, label_b;  // Tukey pair labels
};

// Gaussian likelihood ratio: n ln(RSS_reduced / RSS_full) against chi-square
// with (p_full - p_reduced) degrees of freedom. The reduced model's columns
// must be a subset of the full model's.
TestResult likelihood_ratio_test(const RegressionResult& full, const RegressionResult& reduced);

// VIF_j = 1 / (1 - R^2_j) regressing design column j on the others
// (intercept included). Infinite under perfect collinearity.
std::vector<std::pair<std::string, double>> vif(const DesignMatrix& design);

// Residuals of the simple regression y ~ 1 + x.
Vec residualize(const Vec& y, const Vec& x);

// One-way ANOVA F across classes on the log-frequency residuals of aoa.
TestResult ancova_lexical_class(const Vec& aoa, const Vec& log_frequency,
                                const std::vector<std::string>& classes);

// All-pairs studentized range tests with pooled within-group variance
// (Tukey-Kramer scaling for unequal group sizes).
std::vector<TestResult> tukey_hsd(const std::map<std::string, std::vector<double>>& groups);

double pearson(const Vec& x, const Vec& y);

// ---- the full battery --------------------------------------------------------

struct BatteryOptions {
  bool quadratic_log_frequency = false;
  double alpha = 0.05;
};

struct PredictorFinding {
  std::string name;
  double coefficient = 0.0;  // from the overall regression (0 for class group)
  int sign = 0;
  TestResult lrt;
  bool significant = false;
};

struct RegressionReport {
  Eigen::Index n_used = 0;
  Eigen::Index n_excluded = 0;
  std::vector<std::string> excluded_reasons;  // one per excluded word

  RegressionResult overall;
  std::vector<PredictorFinding> predictors;
  std::vector<std::pair<std::string, double>> vif_table;

  // Single-predictor regressions on log-frequency-adjusted predictor values.
  struct AdjustedSingle {
    std::string name;
    double coefficient = 0.0;
    int sign = 0;
  };
  std::vector<AdjustedSingle> adjusted_singles;

  double freq_only_adj_r2 = 0.0;

  std::optional<TestResult> ancova;
  std::vector<TestResult> tukey;

  // Minimum-surprisal relation: raw correlation with AoA and the correlation
  // of the two log-frequency-residualized quantities.
  double pearson_min_aoa = 0.0;
  double pearson_min_aoa_adjusted = 0.0;

  std::string to_table_text() const;
  std::string to_json_text() const;
};

// Words with not-acquired/degenerate status, zero frequency, or the
// under-sampled flag are listwise-deleted (counts reported).
RegressionReport run_regression_battery(const PredictorTable& predictors,
                                        const std::vector<AoAResult>& aoa,
                                        const BatteryOptions& options = {});

std::string significance_stars(double p);

}  // namespace wordacq
