#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wordacq/trajectory.hpp"

namespace wordacq {

// Four-parameter logistic on x = log10(step), evaluated as
//   f(x) = L + (U - L) / (1 + exp(-k (x - x0))).
// Fits are normalized so k <= 0; descending curves then have U (early
// asymptote) above L (late asymptote).
struct SigmoidFit {
  double lower = 0.0;     // L, bits
  double upper = 0.0;     // U, bits
  double midpoint = 0.0;  // x0, log10 steps
  double slope = 0.0;     // k
  double rss = 0.0;
  bool converged = false;
  bool degenerate = false;

  // Bounded fit ended pinned to a bound; the recorded unbounded refit shows
  // where the free optimum ran (runaway asymptote diagnostics).
  bool hit_bound = false;
  double unbounded_upper = 0.0;
  double unbounded_midpoint = 0.0;

  double span_lo = 0.0;  // observed fitting span in log10 steps
  double span_hi = 0.0;

  double eval(double x) const {
    const double z = -slope * (x - midpoint);
    const double e = std::exp(std::min(500.0, std::max(-500.0, z)));
    return lower + (upper - lower) / (1.0 + e);
  }
};

// Least squares via damped Gauss-Newton with 5 deterministic starts spread
// over the observed span. Asymptotes are clamped to [0, 10 * baseline_bits]
// during fitting. The optional step-0 point is excluded; needs >= 8 points.
SigmoidFit fit_sigmoid(const LearningCurve& curve, double baseline_bits);

struct MinSurprisal {
  std::string word;
  double bits = 0.0;
  int64_t step = 0;  // earliest step attaining the minimum
};

MinSurprisal min_surprisal(const LearningCurve& curve);

enum class AoAStatus { Acquired, NotAcquired, Degenerate };

std::string aoa_status_name(AoAStatus s);

struct AoAResult {
  std::string word;
  double aoa = std::numeric_limits<double>::quiet_NaN();  // log10 steps
  double cutoff_bits = 0.0;
  double proportion = 0.5;
  double baseline_bits = 0.0;
  double min_surprisal_bits = 0.0;
  int64_t min_step = 0;
  AoAStatus status = AoAStatus::NotAcquired;
  SigmoidFit fit;
};

// Baseline is random chance, log2 |V|; the cutoff sits `proportion` of the
// way from the baseline to the word's minimum attained surprisal. AoA is the
// closed-form crossing of the fitted sigmoid with the cutoff; words whose fit
// never descends through the cutoff within the observed span are not-acquired.
AoAResult extract_aoa(const SigmoidFit& fit, const MinSurprisal& min_attained,
                      uint32_t vocab_size, double proportion = 0.5);

struct MidpointAoA {
  double aoa;    // x0 of the fit
  bool outside_span;
};

MidpointAoA midpoint_aoa(const SigmoidFit& fit);

// One AoA table per cutoff proportion (0.1 .. 0.9 by default).
std::vector<std::vector<AoAResult>> sweep_cutoffs(
    const std::vector<SigmoidFit>& fits, const std::vector<MinSurprisal>& minima,
    uint32_t vocab_size,
    const std::vector<double>& proportions = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});

double chance_baseline_bits(uint32_t vocab_size);

void save_aoa_csv(const std::vector<AoAResult>& results, const std::filesystem::path& p);
std::vector<AoAResult> load_aoa_csv(const std::filesystem::path& p);

}  // namespace wordacq
