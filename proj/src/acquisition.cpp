#include "wordacq/acquisition.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "wordacq/errors.hpp"
#include "wordacq/io_util.hpp"

namespace wordacq {

namespace {

struct FitData {
  std::vector<double> x;  // log10 steps
  std::vector<double> y;  // bits
};

FitData curve_to_fit_data(const LearningCurve& curve) {
  FitData d;
  for (const auto& pt : curve.points) {
    if (pt.step < 1) continue;  // the optional step-0 anchor is not fitted
    d.x.push_back(std::log10(static_cast<double>(pt.step)));
    d.y.push_back(pt.mean_surprisal_bits);
  }
  return d;
}

struct Params4 {
  double lower, upper, x0, k;
};

double rss_of(const FitData& d, const Params4& p) {
  double rss = 0.0;
  for (size_t i = 0; i < d.x.size(); ++i) {
    const double z = std::clamp(-p.k * (d.x[i] - p.x0), -500.0, 500.0);
    const double f = p.lower + (p.upper - p.lower) / (1.0 + std::exp(z));
    const double r = f - d.y[i];
    rss += r * r;
  }
  return rss;
}

// Damped Gauss-Newton (Levenberg) with optional box clamp on the asymptotes.
// Returns the best parameters found and whether the tolerances were met.
std::pair<Params4, bool> gauss_newton(const FitData& d, Params4 p, double lo_bound,
                                      double hi_bound, bool bounded) {
  const int max_iters = 200;
  double lambda = 1e-3;
  double rss = rss_of(d, p);
  bool converged = false;

  Eigen::Matrix4d jtj;
  Eigen::Vector4d jtr, delta;
  for (int iter = 0; iter < max_iters; ++iter) {
    jtj.setZero();
    jtr.setZero();
    for (size_t i = 0; i < d.x.size(); ++i) {
      const double z = std::clamp(-p.k * (d.x[i] - p.x0), -500.0, 500.0);
      const double e = std::exp(z);
      const double s = 1.0 / (1.0 + e);
      const double f = p.lower + (p.upper - p.lower) * s;
      const double r = f - d.y[i];
      const double du = p.upper - p.lower;
      Eigen::Vector4d j;
      j(0) = 1.0 - s;                          // d/dL
      j(1) = s;                                // d/dU
      j(2) = -du * p.k * e * s * s;            // d/dx0
      j(3) = du * (d.x[i] - p.x0) * e * s * s; // d/dk
      jtj.noalias() += j * j.transpose();
      jtr.noalias() += j * r;
    }
    if (jtr.lpNorm<Eigen::Infinity>() < 1e-12) {
      converged = true;
      break;
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      Eigen::Matrix4d damped = jtj;
      damped.diagonal().array() += lambda * (jtj.diagonal().array() + 1e-12);
      delta = damped.ldlt().solve(-jtr);
      Params4 trial{p.lower + delta(0), p.upper + delta(1), p.x0 + delta(2), p.k + delta(3)};
      if (bounded) {
        trial.lower = std::clamp(trial.lower, lo_bound, hi_bound);
        trial.upper = std::clamp(trial.upper, lo_bound, hi_bound);
      }
      const double trial_rss = rss_of(d, trial);
      if (std::isfinite(trial_rss) && trial_rss <= rss) {
        const double improvement = rss - trial_rss;
        p = trial;
        rss = trial_rss;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (improvement < 1e-14 * (rss + 1e-14) ||
            delta.lpNorm<Eigen::Infinity>() < 1e-11) {
          converged = true;
        }
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) break;  // damping exhausted without improvement
    if (converged) break;
  }
  return {p, converged};
}

}  // namespace

SigmoidFit fit_sigmoid(const LearningCurve& curve, double baseline_bits) {
  FitData d = curve_to_fit_data(curve);
  if (d.x.size() < 8)
    throw ConfigError("fit_sigmoid: need at least 8 points with step >= 1 for '" +
                      curve.word + "'");

  SigmoidFit fit;
  fit.span_lo = *std::min_element(d.x.begin(), d.x.end());
  fit.span_hi = *std::max_element(d.x.begin(), d.x.end());

  const double ymin = *std::min_element(d.y.begin(), d.y.end());
  const double ymax = *std::max_element(d.y.begin(), d.y.end());
  double mean = 0.0;
  for (double v : d.y) mean += v;
  mean /= static_cast<double>(d.y.size());
  double const_rss = 0.0;
  for (double v : d.y) const_rss += (v - mean) * (v - mean);

  // Flat data: degenerate fit that reproduces the constant exactly.
  if (ymax - ymin <= 1e-12 * std::max(1.0, std::abs(ymax))) {
    fit.lower = fit.upper = d.y[0];
    fit.midpoint = 0.5 * (fit.span_lo + fit.span_hi);
    fit.slope = -1.0;
    fit.rss = rss_of(d, {fit.lower, fit.upper, fit.midpoint, fit.slope});
    fit.converged = true;
    fit.degenerate = true;
    return fit;
  }

  const double hi_bound = 10.0 * baseline_bits;
  const double span = std::max(fit.span_hi - fit.span_lo, 1e-6);
  const double k0 = -4.0 / span;
  Params4 best{};
  double best_rss = std::numeric_limits<double>::infinity();
  bool best_converged = false;
  for (double frac : {0.15, 0.35, 0.5, 0.65, 0.85}) {
    Params4 start{std::clamp(ymin, 0.0, hi_bound), std::clamp(ymax, 0.0, hi_bound),
                  fit.span_lo + frac * span, k0};
    auto [p, ok] = gauss_newton(d, start, 0.0, hi_bound, true);
    const double r = rss_of(d, p);
    if (r < best_rss) {
      best_rss = r;
      best = p;
      best_converged = ok;
    }
  }

  // Never report a fit worse than the constant mean.
  if (best_rss > const_rss) {
    fit.lower = fit.upper = mean;
    fit.midpoint = 0.5 * (fit.span_lo + fit.span_hi);
    fit.slope = -1.0;
    fit.rss = const_rss;
    fit.converged = false;
    fit.degenerate = true;
    return fit;
  }

  // Normalize to k <= 0 (the two sign conventions describe the same curve).
  if (best.k > 0.0) {
    std::swap(best.lower, best.upper);
    best.k = -best.k;
  }
  fit.lower = best.lower;
  fit.upper = best.upper;
  fit.midpoint = best.x0;
  fit.slope = best.k;
  fit.rss = best_rss;
  fit.converged = best_converged;

  const double eps_bound = 1e-9 * std::max(1.0, hi_bound);
  if (best.lower <= eps_bound || best.upper >= hi_bound - eps_bound) {
    fit.hit_bound = true;
    auto [free_p, free_ok] = gauss_newton(d, best, 0.0, hi_bound, false);
    (void)free_ok;
    if (free_p.k > 0.0) {
      std::swap(free_p.lower, free_p.upper);
      free_p.k = -free_p.k;
    }
    fit.unbounded_upper = free_p.upper;
    fit.unbounded_midpoint = free_p.x0;
  }
  return fit;
}

MinSurprisal min_surprisal(const LearningCurve& curve) {
  if (curve.points.empty())
    throw ConfigError("min_surprisal: empty curve for '" + curve.word + "'");
  MinSurprisal m;
  m.word = curve.word;
  m.bits = curve.points[0].mean_surprisal_bits;
  m.step = curve.points[0].step;
  for (const auto& pt : curve.points) {
    if (pt.mean_surprisal_bits < m.bits) {
      m.bits = pt.mean_surprisal_bits;
      m.step = pt.step;
    }
  }
  return m;
}

std::string aoa_status_name(AoAStatus s) {
  switch (s) {
    case AoAStatus::Acquired: return "acquired";
    case AoAStatus::NotAcquired: return "not-acquired";
    case AoAStatus::Degenerate: return "degenerate";
  }
  return "?";
}

double chance_baseline_bits(uint32_t vocab_size) {
  return std::log2(static_cast<double>(vocab_size));
}

AoAResult extract_aoa(const SigmoidFit& fit, const MinSurprisal& min_attained,
                      uint32_t vocab_size, double proportion) {
  if (!(proportion > 0.0 && proportion < 1.0))
    throw ConfigError("extract_aoa: proportion must be in (0,1)");

  AoAResult r;
  r.word = min_attained.word;
  r.proportion = proportion;
  r.baseline_bits = chance_baseline_bits(vocab_size);
  r.min_surprisal_bits = min_attained.bits;
  r.min_step = min_attained.step;
  r.cutoff_bits = r.baseline_bits + proportion * (min_attained.bits - r.baseline_bits);
  r.fit = fit;

  if (fit.degenerate) {
    r.status = AoAStatus::Degenerate;
    return r;
  }
  const double lo = std::min(fit.lower, fit.upper);
  const double hi = std::max(fit.lower, fit.upper);
  const bool descending = fit.slope < 0.0 && fit.upper > fit.lower;
  if (!descending || !(r.cutoff_bits > lo && r.cutoff_bits < hi)) {
    // Never descends through the cutoff; a curve entirely below it cannot be
    // assigned a crossing either and is flagged degenerate.
    r.status = hi <= r.cutoff_bits ? AoAStatus::Degenerate : AoAStatus::NotAcquired;
    return r;
  }
  // f(x*) = cutoff  =>  x* = x0 - ln((U - c) / (c - L)) / k.
  const double x_star =
      fit.midpoint -
      std::log((fit.upper - r.cutoff_bits) / (r.cutoff_bits - fit.lower)) / fit.slope;
  if (x_star > fit.span_hi) {
    r.status = AoAStatus::NotAcquired;  // crossing lies beyond the training span
    return r;
  }
  r.status = AoAStatus::Acquired;
  r.aoa = x_star;
  return r;
}

MidpointAoA midpoint_aoa(const SigmoidFit& fit) {
  if (fit.degenerate) throw NumericalError("midpoint_aoa: degenerate fit has no midpoint");
  return {fit.midpoint, fit.midpoint < fit.span_lo || fit.midpoint > fit.span_hi};
}

std::vector<std::vector<AoAResult>> sweep_cutoffs(const std::vector<SigmoidFit>& fits,
                                                  const std::vector<MinSurprisal>& minima,
                                                  uint32_t vocab_size,
                                                  const std::vector<double>& proportions) {
  if (fits.size() != minima.size())
    throw ConfigError("sweep_cutoffs: fits/minima size mismatch");
  std::vector<std::vector<AoAResult>> table;
  table.reserve(proportions.size());
  for (double prop : proportions) {
    std::vector<AoAResult> column;
    column.reserve(fits.size());
    for (size_t i = 0; i < fits.size(); ++i)
      column.push_back(extract_aoa(fits[i], minima[i], vocab_size, prop));
    table.push_back(std::move(column));
  }
  return table;
}

void save_aoa_csv(const std::vector<AoAResult>& results, const std::filesystem::path& p) {
  std::ostringstream out;
  out << "word,aoa_log10_steps,cutoff_bits,proportion,baseline_bits,min_surprisal_bits,"
         "min_step,status,fit_L,fit_U,fit_x0,fit_k,fit_rss,converged\n";
  for (const auto& r : results) {
    out << csv_escape(r.word) << ',' << format_double(r.aoa) << ','
        << format_double(r.cutoff_bits) << ',' << format_double(r.proportion) << ','
        << format_double(r.baseline_bits) << ',' << format_double(r.min_surprisal_bits) << ','
        << r.min_step << ',' << aoa_status_name(r.status) << ',' << format_double(r.fit.lower)
        << ',' << format_double(r.fit.upper) << ',' << format_double(r.fit.midpoint) << ','
        << format_double(r.fit.slope) << ',' << format_double(r.fit.rss) << ','
        << (r.fit.converged ? 1 : 0) << '\n';
  }
  write_text_file(p, out.str());
}

std::vector<AoAResult> load_aoa_csv(const std::filesystem::path& p) {
  auto lines = read_lines(p);
  if (lines.empty()) throw MissingUpstreamError("empty aoa file: " + p.string());
  std::vector<AoAResult> out;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = split_csv_line(lines[i]);
    if (f.size() != 14) throw ConfigError("malformed aoa row: " + lines[i]);
    AoAResult r;
    r.word = f[0];
    r.aoa = std::stod(f[1]);
    r.cutoff_bits = std::stod(f[2]);
    r.proportion = std::stod(f[3]);
    r.baseline_bits = std::stod(f[4]);
    r.min_surprisal_bits = std::stod(f[5]);
    r.min_step = std::stoll(f[6]);
    if (f[7] == "acquired") r.status = AoAStatus::Acquired;
    else if (f[7] == "not-acquired") r.status = AoAStatus::NotAcquired;
    else r.status = AoAStatus::Degenerate;
    r.fit.lower = std::stod(f[8]);
    r.fit.upper = std::stod(f[9]);
    r.fit.midpoint = std::stod(f[10]);
    r.fit.slope = std::stod(f[11]);
    r.fit.rss = std::stod(f[12]);
    r.fit.converged = f[13] == "1";
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace wordacq
