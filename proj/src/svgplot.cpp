#include "wordacq/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "wordacq/errors.hpp"
#include "wordacq/io_util.hpp"

namespace wordacq {

namespace {

constexpr int kWidth = 640, kHeight = 420;
constexpr double kLeft = 60, kRight = 610, kTop = 30, kBottom = 380;

struct Axis {
  double lo, hi;
  double map(double v, double out_lo, double out_hi) const {
    const double f = (v - lo) / (hi - lo);
    return out_lo + f * (out_hi - out_lo);
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

void axes(std::ostringstream& svg, const Axis& x, const std::string& x_label,
          const std::string& y_label) {
  svg << "<line class=\"axis\" x1=\"" << kLeft << "\" y1=\"" << kBottom << "\" x2=\"" << kRight
      << "\" y2=\"" << kBottom << "\" stroke=\"black\"/>\n";
  svg << "<line class=\"axis\" x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
      << "\" y2=\"" << kBottom << "\" stroke=\"black\"/>\n";
  for (int t = static_cast<int>(std::ceil(x.lo)); t <= static_cast<int>(std::floor(x.hi)); ++t) {
    const double px = x.map(t, kLeft, kRight);
    svg << "<line x1=\"" << px << "\" y1=\"" << kBottom << "\" x2=\"" << px << "\" y2=\""
        << kBottom + 5 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << px << "\" y=\"" << kBottom + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">1e" << t << "</text>\n";
  }
  svg << "<text x=\"" << (kLeft + kRight) / 2 << "\" y=\"" << kHeight - 6
      << "\" font-size=\"12\" text-anchor=\"middle\">" << x_label << "</text>\n";
  svg << "<text x=\"14\" y=\"" << (kTop + kBottom) / 2
      << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << (kTop + kBottom) / 2 << ")\">" << y_label << "</text>\n";
}

double log_x(int64_t step, double min_log) {
  return step <= 0 ? min_log : std::log10(static_cast<double>(step));
}

}  // namespace

double reversed_y(double value, double value_lo, double value_hi, double y_top,
                  double y_bottom) {
  const double f = (value - value_lo) / (value_hi - value_lo);
  return y_top + f * (y_bottom - y_top);  // larger surprisal -> larger y (lower on screen)
}

std::string render_learning_curve_svg(const LearningCurve& curve, const AoAResult& aoa,
                                      double unigram_surprisal_bits) {
  if (curve.points.empty()) throw ConfigError("cannot plot an empty curve");

  double min_step_log = std::numeric_limits<double>::max();
  for (const auto& pt : curve.points)
    if (pt.step >= 1) min_step_log = std::min(min_step_log, std::log10((double)pt.step));
  min_step_log -= 0.15;  // step-0 anchor parks just left of the first real step

  Axis x{min_step_log, 0.0};
  double y_lo = unigram_surprisal_bits, y_hi = unigram_surprisal_bits;
  for (const auto& pt : curve.points) {
    x.hi = std::max(x.hi, log_x(pt.step, min_step_log));
    y_lo = std::min(y_lo, pt.mean_surprisal_bits);
    y_hi = std::max(y_hi, pt.mean_surprisal_bits);
  }
  y_lo = std::min(y_lo, aoa.cutoff_bits);
  y_hi = std::max(y_hi, aoa.cutoff_bits);
  const double pad = 0.05 * (y_hi - y_lo + 1e-9);
  y_lo -= pad;
  y_hi += pad;

  auto ymap = [&](double v) { return reversed_y(v, y_lo, y_hi, kTop, kBottom); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\">\n";
  svg << "<title>" << curve.word << "</title>\n";
  axes(svg, x, "training step (log10)", "surprisal (bits, reversed)");

  // unigram reference (green dashed)
  svg << "<line class=\"unigram-line\" x1=\"" << kLeft << "\" x2=\"" << kRight << "\" y1=\""
      << num(ymap(unigram_surprisal_bits)) << "\" y2=\"" << num(ymap(unigram_surprisal_bits))
      << "\" stroke=\"green\" stroke-dasharray=\"6,4\"/>\n";

  // acquisition cutoff (blue)
  svg << "<line class=\"cutoff-line\" x1=\"" << kLeft << "\" x2=\"" << kRight << "\" y1=\""
      << num(ymap(aoa.cutoff_bits)) << "\" y2=\"" << num(ymap(aoa.cutoff_bits))
      << "\" stroke=\"blue\"/>\n";

  // fitted sigmoid
  svg << "<path class=\"fit-curve\" fill=\"none\" stroke=\"blue\" stroke-width=\"1.5\" d=\"";
  const int samples = 200;
  for (int i = 0; i <= samples; ++i) {
    const double xv = x.lo + (x.hi - x.lo) * i / samples;
    svg << (i == 0 ? 'M' : 'L') << num(x.map(xv, kLeft, kRight)) << ' '
        << num(ymap(aoa.fit.eval(xv)));
  }
  svg << "\"/>\n";

  for (const auto& pt : curve.points) {
    svg << "<circle class=\"raw-point\" cx=\"" << num(x.map(log_x(pt.step, min_step_log), kLeft, kRight))
        << "\" cy=\"" << num(ymap(pt.mean_surprisal_bits)) << "\" r=\"2.4\" fill=\"black\"/>\n";
  }

  if (aoa.status == AoAStatus::Acquired) {
    svg << "<line class=\"aoa-marker\" y1=\"" << kTop << "\" y2=\"" << kBottom << "\" x1=\""
        << num(x.map(aoa.aoa, kLeft, kRight)) << "\" x2=\"" << num(x.map(aoa.aoa, kLeft, kRight))
        << "\" stroke=\"blue\" stroke-dasharray=\"2,3\"/>\n";
  }
  svg << "<text x=\"" << kLeft + 8 << "\" y=\"" << kTop - 8 << "\" font-size=\"13\">"
      << curve.word << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

std::string render_kl_trace_svg(const KLTrace& trace) {
  if (trace.steps.empty()) throw ConfigError("cannot plot an empty KL trace");

  double min_step_log = std::numeric_limits<double>::max();
  for (int64_t s : trace.steps)
    if (s >= 1) min_step_log = std::min(min_step_log, std::log10(static_cast<double>(s)));
  min_step_log -= 0.15;

  Axis x{min_step_log, min_step_log + 1e-9};
  double y_hi = 0.0;
  for (size_t i = 0; i < trace.steps.size(); ++i) {
    x.hi = std::max(x.hi, log_x(trace.steps[i], min_step_log));
    y_hi = std::max({y_hi, trace.values[i].uniform, trace.values[i].unigram,
                     trace.values[i].bigram, trace.values[i].onehot});
  }
  y_hi *= 1.05;

  auto ymap = [&](double v) { return kBottom - (v / y_hi) * (kBottom - kTop); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\">\n";
  svg << "<title>KL divergence: " << trace.model << "</title>\n";
  axes(svg, x, "training step (log10)", "mean KL (bits)");

  const struct {
    const char* name;
    const char* color;
    double MeanKL::*field;
  } series[] = {{"uniform", "#888888", &MeanKL::uniform},
                {"unigram", "#1f77b4", &MeanKL::unigram},
                {"bigram", "#d62728", &MeanKL::bigram},
                {"onehot", "#2ca02c", &MeanKL::onehot}};
  int legend_y = kTop + 10;
  for (const auto& s : series) {
    svg << "<polyline class=\"series\" data-ref=\"" << s.name
        << "\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < trace.steps.size(); ++i)
      svg << num(x.map(log_x(trace.steps[i], min_step_log), kLeft, kRight)) << ','
          << num(ymap(trace.values[i].*(s.field))) << ' ';
    svg << "\"/>\n";
    svg << "<text class=\"legend\" x=\"" << kRight - 90 << "\" y=\"" << legend_y
        << "\" font-size=\"11\" fill=\"" << s.color << "\">" << s.name << "</text>\n";
    legend_y += 14;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace wordacq
