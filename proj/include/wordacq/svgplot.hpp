#pragma once

#include <string>

#include "wordacq/acquisition.hpp"
#include "wordacq/distributional.hpp"
#include "wordacq/trajectory.hpp"

namespace wordacq {

// Reversed surprisal axis: smaller surprisal (better prediction) plots nearer
// the top of the canvas, so larger values map to larger SVG y.
double reversed_y(double value, double value_lo, double value_hi, double y_top,
                  double y_bottom);

// Raw curve points, the fitted sigmoid, the acquisition cutoff line, and a
// dashed unigram-surprisal reference line, on a log10 step axis.
std::string render_learning_curve_svg(const LearningCurve& curve, const AoAResult& aoa,
                                      double unigram_surprisal_bits);

// One series per reference (uniform / unigram / bigram / onehot).
std::string render_kl_trace_svg(const KLTrace& trace);

}  // namespace wordacq
