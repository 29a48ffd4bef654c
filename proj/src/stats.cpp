#include "wordacq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <set>
#include <sstream>

#include "wordacq/errors.hpp"
#include "wordacq/io_util.hpp"
#include "wordacq/special_functions.hpp"

namespace wordacq {

using nlohmann::json;

double RegressionResult::coefficient_of(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return coefficients(static_cast<Eigen::Index>(i));
  throw ConfigError("no coefficient named " + name);
}

RegressionResult ols_fit(const DesignMatrix& design, const Vec& y) {
  const Eigen::Index n = design.X.rows(), p = design.X.cols();
  if (y.size() != n) throw ConfigError("ols_fit: response length mismatch");
  if (n <= p) throw ConfigError("ols_fit: need more rows than columns");

  Eigen::ColPivHouseholderQR<Mat> qr(design.X);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    // The trailing permuted columns are the linearly dependent ones.
    std::string deps;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index i = qr.rank(); i < p; ++i) {
      if (!deps.empty()) deps += ", ";
      deps += design.names[static_cast<size_t>(perm(i))];
    }
    throw NumericalError("ols_fit: design is rank deficient; dependent columns: " + deps);
  }

  RegressionResult r;
  r.names = design.names;
  r.coefficients = qr.solve(y);
  r.residuals = y - design.X * r.coefficients;
  r.rss = r.residuals.squaredNorm();
  r.n = n;
  r.p = p;
  const double mean = y.mean();
  const double tss = (y.array() - mean).square().sum();
  r.r_squared = tss > 0.0 ? 1.0 - r.rss / tss : 1.0;
  r.adj_r_squared =
      1.0 - (1.0 - r.r_squared) * static_cast<double>(n - 1) / static_cast<double>(n - p);
  return r;
}

TestResult likelihood_ratio_test(const RegressionResult& full, const RegressionResult& reduced) {
  if (full.n != reduced.n) throw ConfigError("likelihood_ratio_test: row count mismatch");
  std::set<std::string> full_names(full.names.begin(), full.names.end());
  for (const auto& name : reduced.names)
    if (!full_names.count(name))
      throw ConfigError("likelihood_ratio_test: models not nested (column " + name + ")");
  if (reduced.p >= full.p && reduced.names != full.names)
    throw ConfigError("likelihood_ratio_test: reduced model is not smaller");

  TestResult t;
  t.kind = "LRT";
  t.df1 = static_cast<double>(full.p - reduced.p);
  if (full.rss <= 0.0) {
    t.statistic = reduced.rss <= 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  } else {
    t.statistic = static_cast<double>(full.n) * std::log(reduced.rss / full.rss);
  }
  if (t.statistic < 0.0) t.statistic = 0.0;  // guard tiny negative from roundoff
  t.p_value = t.df1 == 0.0 ? 1.0 : chi_square_sf(t.statistic, t.df1);
  return t;
}

std::vector<std::pair<std::string, double>> vif(const DesignMatrix& design) {
  std::vector<size_t> cols;
  for (size_t j = 0; j < design.names.size(); ++j)
    if (design.names[j] != "(intercept)") cols.push_back(j);
  if (cols.size() < 2) throw ConfigError("vif: need at least two non-intercept columns");

  std::vector<std::pair<std::string, double>> out;
  for (size_t j : cols) {
    DesignMatrix other;
    other.X.resize(design.X.rows(), design.X.cols() - 1);
    Eigen::Index c = 0;
    for (Eigen::Index k = 0; k < design.X.cols(); ++k) {
      if (static_cast<size_t>(k) == j) continue;
      other.X.col(c) = design.X.col(k);
      other.names.push_back(design.names[static_cast<size_t>(k)]);
      ++c;
    }
    double v;
    try {
      RegressionResult fit = ols_fit(other, design.X.col(static_cast<Eigen::Index>(j)));
      v = fit.r_squared >= 1.0 - 1e-12 ? std::numeric_limits<double>::infinity()
                                       : 1.0 / (1.0 - fit.r_squared);
    } catch (const NumericalError&) {
      v = std::numeric_limits<double>::infinity();
    }
    out.emplace_back(design.names[j], v);
  }
  return out;
}

Vec residualize(const Vec& y, const Vec& x) {
  if (y.size() != x.size()) throw ConfigError("residualize: length mismatch");
  const Eigen::Index n = x.size();
  if (n < 3) throw ConfigError("residualize: need at least 3 points");
  const double mx = x.mean();
  const double sxx = (x.array() - mx).square().sum();
  if (sxx <= 1e-12 * static_cast<double>(n) * std::max(1.0, mx * mx))
    throw ConfigError("residualize: predictor is constant");
  const double my = y.mean();
  const double sxy = ((x.array() - mx) * (y.array() - my)).sum();
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  return y - (intercept + slope * x.array()).matrix();
}

TestResult ancova_lexical_class(const Vec& aoa, const Vec& log_frequency,
                                const std::vector<std::string>& classes) {
  if (static_cast<size_t>(aoa.size()) != classes.size() || aoa.size() != log_frequency.size())
    throw ConfigError("ancova: input length mismatch");
  Vec resid = residualize(aoa, log_frequency);

  std::map<std::string, std::vector<double>> groups;
  for (Eigen::Index i = 0; i < resid.size(); ++i)
    groups[classes[static_cast<size_t>(i)]].push_back(resid(i));
  if (groups.size() < 2) throw ConfigError("ancova: need at least two lexical classes");
  for (const auto& [label, values] : groups)
    if (values.size() < 2)
      throw ConfigError("ancova: class '" + label + "' has fewer than 2 members");

  const double grand = resid.mean();
  double ssb = 0.0, ssw = 0.0;
  for (const auto& [label, values] : groups) {
    double gm = 0.0;
    for (double v : values) gm += v;
    gm /= static_cast<double>(values.size());
    ssb += static_cast<double>(values.size()) * (gm - grand) * (gm - grand);
    for (double v : values) ssw += (v - gm) * (v - gm);
  }
  const double k = static_cast<double>(groups.size());
  const double n = static_cast<double>(resid.size());

  TestResult t;
  t.kind = "ANCOVA-F";
  t.df1 = k - 1.0;
  t.df2 = n - k;
  t.statistic = ssw > 0.0 ? (ssb / t.df1) / (ssw / t.df2)
                          : (ssb > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  t.p_value = f_distribution_sf(t.statistic, t.df1, t.df2);
  return t;
}

std::vector<TestResult> tukey_hsd(const std::map<std::string, std::vector<double>>& groups) {
  if (groups.size() < 2) throw ConfigError("tukey_hsd: need at least two groups");
  for (const auto& [label, values] : groups)
    if (values.size() < 2)
      throw ConfigError("tukey_hsd: group '" + label + "' has fewer than 2 values");

  double ssw = 0.0, n_total = 0.0;
  std::vector<std::pair<std::string, std::pair<double, double>>> stats;  // label -> (mean, n)
  for (const auto& [label, values] : groups) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    for (double v : values) ssw += (v - mean) * (v - mean);
    n_total += static_cast<double>(values.size());
    stats.push_back({label, {mean, static_cast<double>(values.size())}});
  }
  const double df = n_total - static_cast<double>(groups.size());
  const double s2 = ssw / df;
  if (s2 <= 0.0) throw NumericalError("tukey_hsd: zero pooled within-group variance");

  std::vector<TestResult> out;
  for (size_t i = 0; i < stats.size(); ++i) {
    for (size_t j = i + 1; j < stats.size(); ++j) {
      const double diff = std::abs(stats[i].second.first - stats[j].second.first);
      const double ni = stats[i].second.second, nj = stats[j].second.second;
      // Tukey-Kramer standard error for unequal group sizes.
      const double se = std::sqrt(0.5 * s2 * (1.0 / ni + 1.0 / nj));
      TestResult t;
      t.kind = "TukeyPair";
      t.label_a = stats[i].first;
      t.label_b = stats[j].first;
      t.statistic = diff / se;
      t.df1 = static_cast<double>(groups.size());
      t.df2 = df;
      t.p_value =
          1.0 - studentized_range_cdf(t.statistic, static_cast<int>(groups.size()), df);
      out.push_back(std::move(t));
    }
  }
  return out;
}

double pearson(const Vec& x, const Vec& y) {
  if (x.size() != y.size()) throw ConfigError("pearson: length mismatch");
  if (x.size() < 2) throw ConfigError("pearson: need at least 2 points");
  const double mx = x.mean(), my = y.mean();
  const double sxx = (x.array() - mx).square().sum();
  const double syy = (y.array() - my).square().sum();
  if (sxx <= 0.0 || syy <= 0.0) throw ConfigError("pearson: constant input");
  const double sxy = ((x.array() - mx) * (y.array() - my)).sum();
  return sxy / std::sqrt(sxx * syy);
}

std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

namespace {

int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

DesignMatrix drop_columns(const DesignMatrix& d, const std::set<std::string>& names) {
  DesignMatrix out;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < d.X.cols(); ++j)
    if (!names.count(d.names[static_cast<size_t>(j)])) {
      keep.push_back(j);
      out.names.push_back(d.names[static_cast<size_t>(j)]);
    }
  out.X.resize(d.X.rows(), static_cast<Eigen::Index>(keep.size()));
  for (size_t c = 0; c < keep.size(); ++c) out.X.col(static_cast<Eigen::Index>(c)) = d.X.col(keep[c]);
  return out;
}

}  // namespace

RegressionReport run_regression_battery(const PredictorTable& predictors,
                                        const std::vector<AoAResult>& aoa,
                                        const BatteryOptions& options) {
  RegressionReport report;

  struct Row {
    const PredictorRow* pred;
    const AoAResult* result;
  };
  std::vector<Row> rows;
  for (const auto& a : aoa) {
    const PredictorRow* p = predictors.find(a.word);
    if (!p) {
      report.excluded_reasons.push_back(a.word + ": no predictor row");
      continue;
    }
    if (p->zero_frequency) {
      report.excluded_reasons.push_back(a.word + ": zero frequency");
      continue;
    }
    if (p->under_sampled) {
      report.excluded_reasons.push_back(a.word + ": under-sampled");
      continue;
    }
    if (a.status != AoAStatus::Acquired) {
      report.excluded_reasons.push_back(a.word + ": " + aoa_status_name(a.status));
      continue;
    }
    rows.push_back({p, &a});
  }
  report.n_used = static_cast<Eigen::Index>(rows.size());
  report.n_excluded = static_cast<Eigen::Index>(report.excluded_reasons.size());
  if (rows.size() < 12)
    throw ConfigError("regression battery: only " + std::to_string(rows.size()) +
                      " usable words");

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  Vec y(n), logf(n), mlu(n), nchars(n), concr(n), minsurp(n);
  std::vector<std::string> classes(rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<size_t>(i)];
    y(i) = r.result->aoa;
    logf(i) = r.pred->log_frequency;
    mlu(i) = r.pred->mlu;
    nchars(i) = r.pred->n_chars;
    concr(i) = r.pred->concreteness;
    minsurp(i) = r.result->min_surprisal_bits;
    classes[static_cast<size_t>(i)] = r.pred->lexical_class;
  }

  // Continuous predictors with spread; constant columns are dropped with a
  // note (e.g. concreteness when no norms file was supplied).
  std::vector<std::pair<std::string, Vec>> continuous;
  auto add_continuous = [&](const std::string& name, const Vec& v) {
    const double var = (v.array() - v.mean()).square().sum();
    if (var <= 1e-12 * static_cast<double>(n)) {
      report.excluded_reasons.push_back("predictor " + name + " constant; dropped");
      return;
    }
    continuous.emplace_back(name, v);
  };
  add_continuous("log_frequency", logf);
  if (options.quadratic_log_frequency) {
    Vec logf2 = logf.array().square().matrix();
    add_continuous("log_frequency_sq", logf2);
  }
  add_continuous("mlu", mlu);
  add_continuous("n_chars", nchars);
  add_continuous("concreteness", concr);

  // Dummy-code lexical class with Noun as the reference category.
  std::set<std::string> class_set(classes.begin(), classes.end());
  std::vector<std::string> dummy_classes;
  std::string reference = class_set.count("Noun") ? "Noun" : *class_set.begin();
  for (const auto& c : class_set)
    if (c != reference) dummy_classes.push_back(c);
  const bool have_classes = !dummy_classes.empty();

  DesignMatrix design;
  design.names.push_back("(intercept)");
  for (const auto& [name, _] : continuous) design.names.push_back(name);
  for (const auto& c : dummy_classes) design.names.push_back("class_" + c);
  design.X.resize(n, static_cast<Eigen::Index>(design.names.size()));
  design.X.col(0).setOnes();
  Eigen::Index col = 1;
  for (const auto& [name, v] : continuous) design.X.col(col++) = v;
  for (const auto& c : dummy_classes) {
    for (Eigen::Index i = 0; i < n; ++i)
      design.X(i, col) = classes[static_cast<size_t>(i)] == c ? 1.0 : 0.0;
    ++col;
  }

  report.overall = ols_fit(design, y);

  // Per-predictor drop-one likelihood ratio tests; the class dummies leave as
  // a block.
  for (const auto& [name, _] : continuous) {
    RegressionResult reduced = ols_fit(drop_columns(design, {name}), y);
    PredictorFinding f;
    f.name = name;
    f.coefficient = report.overall.coefficient_of(name);
    f.sign = sign_of(f.coefficient);
    f.lrt = likelihood_ratio_test(report.overall, reduced);
    f.significant = f.lrt.p_value < options.alpha;
    report.predictors.push_back(std::move(f));
  }
  if (have_classes) {
    std::set<std::string> dummy_names;
    for (const auto& c : dummy_classes) dummy_names.insert("class_" + c);
    RegressionResult reduced = ols_fit(drop_columns(design, dummy_names), y);
    PredictorFinding f;
    f.name = "lexical_class";
    f.lrt = likelihood_ratio_test(report.overall, reduced);
    f.significant = f.lrt.p_value < options.alpha;
    report.predictors.push_back(std::move(f));
  }

  if (design.X.cols() >= 3) report.vif_table = vif(design);

  // Frequency-adjusted single-predictor regressions.
  for (const auto& [name, v] : continuous) {
    if (name == "log_frequency" || name == "log_frequency_sq") continue;
    Vec adjusted = residualize(v, logf);
    DesignMatrix single;
    single.names = {"(intercept)", name + "_adj"};
    single.X.resize(n, 2);
    single.X.col(0).setOnes();
    single.X.col(1) = adjusted;
    RegressionResult fit = ols_fit(single, y);
    report.adjusted_singles.push_back(
        {name, fit.coefficients(1), sign_of(fit.coefficients(1))});
  }

  {
    DesignMatrix freq_only;
    freq_only.names = {"(intercept)", "log_frequency"};
    freq_only.X.resize(n, 2);
    freq_only.X.col(0).setOnes();
    freq_only.X.col(1) = logf;
    report.freq_only_adj_r2 = ols_fit(freq_only, y).adj_r_squared;
  }

  // ANCOVA + Tukey when the lexical class block reaches significance.
  if (have_classes) {
    const auto& class_finding = report.predictors.back();
    std::map<std::string, std::vector<double>> groups;
    bool feasible = true;
    {
      std::map<std::string, int> counts;
      for (const auto& c : classes) ++counts[c];
      for (const auto& [label, count] : counts) feasible = feasible && count >= 2;
    }
    if (class_finding.name == "lexical_class" && class_finding.significant && feasible) {
      report.ancova = ancova_lexical_class(y, logf, classes);
      Vec resid = residualize(y, logf);
      for (Eigen::Index i = 0; i < n; ++i)
        groups[classes[static_cast<size_t>(i)]].push_back(resid(i));
      report.tukey = tukey_hsd(groups);
    }
  }

  // Minimum surprisal vs AoA, raw and log-frequency adjusted.
  report.pearson_min_aoa = pearson(minsurp, y);
  report.pearson_min_aoa_adjusted = pearson(residualize(minsurp, logf), residualize(y, logf));

  return report;
}

std::string RegressionReport::to_table_text() const {
  std::ostringstream out;
  out << "predictor            coef        sign   LRT p        sig\n";
  out << "---------------------------------------------------------\n";
  for (const auto& f : predictors) {
    char coef_buf[32];
    if (f.name == "lexical_class")
      std::snprintf(coef_buf, sizeof(coef_buf), "%10s", "-");
    else
      std::snprintf(coef_buf, sizeof(coef_buf), "%10.4f", f.coefficient);
    char line[160];
    std::snprintf(line, sizeof(line), "%-20s %s   %-4s   %-10.3g   %s\n", f.name.c_str(),
                  coef_buf, f.name == "lexical_class" ? "" : (f.sign < 0 ? "(-)" : "(+)"),
                  f.lrt.p_value, significance_stars(f.lrt.p_value).c_str());
    out << line;
  }
  out << "---------------------------------------------------------\n";
  char tail[256];
  std::snprintf(tail, sizeof(tail),
                "adjusted R^2 = %.4f   (n = %lld used, %lld excluded)\n",
                overall.adj_r_squared, static_cast<long long>(n_used),
                static_cast<long long>(n_excluded));
  out << tail;
  return out.str();
}

std::string RegressionReport::to_json_text() const {
  json j;
  j["n_used"] = n_used;
  j["n_excluded"] = n_excluded;
  j["excluded_reasons"] = excluded_reasons;
  j["adj_r_squared"] = overall.adj_r_squared;
  j["r_squared"] = overall.r_squared;
  json coefs = json::object();
  for (size_t i = 0; i < overall.names.size(); ++i)
    coefs[overall.names[i]] = overall.coefficients(static_cast<Eigen::Index>(i));
  j["coefficients"] = coefs;
  json preds = json::array();
  for (const auto& f : predictors) {
    preds.push_back({{"name", f.name},
                     {"coefficient", f.coefficient},
                     {"sign", f.sign},
                     {"lrt_statistic", f.lrt.statistic},
                     {"lrt_df", f.lrt.df1},
                     {"lrt_p", f.lrt.p_value},
                     {"stars", significance_stars(f.lrt.p_value)},
                     {"significant", f.significant}});
  }
  j["predictors"] = preds;
  json vifs = json::object();
  for (const auto& [name, v] : vif_table)
    vifs[name] = std::isfinite(v) ? json(v) : json("inf");
  j["vif"] = vifs;
  json singles = json::array();
  for (const auto& s : adjusted_singles)
    singles.push_back({{"name", s.name}, {"coefficient", s.coefficient}, {"sign", s.sign}});
  j["adjusted_single_predictor"] = singles;
  j["freq_only_adj_r2"] = freq_only_adj_r2;
  if (ancova) {
    j["ancova"] = {{"F", ancova->statistic},
                   {"df1", ancova->df1},
                   {"df2", ancova->df2},
                   {"p", ancova->p_value}};
    json pairs = json::array();
    for (const auto& t : tukey)
      pairs.push_back({{"a", t.label_a},
                       {"b", t.label_b},
                       {"q", t.statistic},
                       {"p", t.p_value},
                       {"stars", significance_stars(t.p_value)}});
    j["tukey"] = pairs;
  }
  j["min_surprisal"] = {{"pearson_vs_aoa", pearson_min_aoa},
                        {"pearson_vs_aoa_freq_adjusted", pearson_min_aoa_adjusted}};
  j["table_text"] = to_table_text();
  return j.dump(2) + "\n";
}

}  // namespace wordacq
