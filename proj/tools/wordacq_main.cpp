// wordacq: word-acquisition measurement pipeline for small language models.
//
// Exit codes: 0 success, 2 config/input error, 3 missing upstream stage,
// 4 numerical failure.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "wordacq/errors.hpp"
#include "wordacq/pipeline.hpp"

using namespace wordacq;

namespace {

PipelineConfig load_config(const std::string& config_file,
                           const std::vector<std::string>& overrides) {
  PipelineConfig cfg = PipelineConfig::load(config_file, overrides);
  if (const char* env = std::getenv("WORDACQ_RUN_DIR"); env && *env) cfg.run_dir = env;
  return cfg;
}

Architecture parse_arch(const std::string& s) { return architecture_from_name(s); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"word acquisition pipeline for small language models"};
  app.require_subcommand(1);
  app.fallthrough();  // global -c/--set may follow the subcommand

  std::string config_file = "wordacq.ini";
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_file, "pipeline config file")->capture_default_str();
  app.add_option("--set", overrides, "override config values (section.key=value)");

  bool dump_ngrams = false;
  auto* cmd_prepare = app.add_subcommand("prepare", "tokenize, build vocabulary, predictors, n-grams");
  cmd_prepare->add_flag("--dump-ngrams", dump_ngrams, "also write n-gram count TSV dumps");

  std::string arch_name = "lstm";
  auto add_arch = [&](CLI::App* cmd) {
    cmd->add_option("-a,--arch", arch_name,
                    "architecture: lstm | bilstm | causal_transformer | masked_transformer")
        ->required();
  };
  auto* cmd_train = app.add_subcommand("train", "train one architecture with checkpointing");
  add_arch(cmd_train);
  auto* cmd_curves = app.add_subcommand("curves", "evaluate per-word learning curves");
  add_arch(cmd_curves);
  auto* cmd_fit = app.add_subcommand("fit-aoa", "fit sigmoids and extract ages of acquisition");
  add_arch(cmd_fit);
  bool sweep = false;
  auto* cmd_regress = app.add_subcommand("regress", "run the regression battery");
  add_arch(cmd_regress);
  cmd_regress->add_flag("--sweep", sweep, "also sweep cutoff proportions 0.1..0.9");
  auto* cmd_kl = app.add_subcommand("kl-trace", "KL divergence traces against reference distributions");
  add_arch(cmd_kl);

  std::vector<std::string> report_archs;
  double percentile = 0.05;
  auto* cmd_report = app.add_subcommand("report", "first/last acquired words");
  cmd_report->add_option("-a,--arch", report_archs, "architectures to include")->required();
  cmd_report->add_option("--percentile", percentile, "top/bottom fraction")->capture_default_str();

  std::vector<std::string> plot_words;
  std::string plot_kind = "curves";
  auto* cmd_plot = app.add_subcommand("plot", "emit SVG plots");
  add_arch(cmd_plot);
  cmd_plot->add_option("--kind", plot_kind, "curves | kl")->capture_default_str();
  cmd_plot->add_option("-w,--word", plot_words, "words to plot (curves)");

  CLI11_PARSE(app, argc, argv);

  try {
    PipelineConfig cfg = load_config(config_file, overrides);

    if (app.got_subcommand(cmd_report)) {  // read-only, no lock
      Pipeline pipeline(cfg);
      std::vector<Architecture> archs;
      for (const auto& a : report_archs) archs.push_back(parse_arch(a));
      std::cout << pipeline.report_first_last(archs, percentile);
      return 0;
    }
    if (app.got_subcommand(cmd_plot)) {
      Pipeline pipeline(cfg);
      if (plot_kind == "kl") {
        std::cout << pipeline.plot_kl(parse_arch(arch_name)).string() << "\n";
      } else {
        for (const auto& p : pipeline.plot_curves(parse_arch(arch_name), plot_words))
          std::cout << p.string() << "\n";
      }
      return 0;
    }

    RunLock lock(cfg.run_dir);
    Pipeline pipeline(cfg);
    StageResult result;
    if (app.got_subcommand(cmd_prepare)) {
      result = pipeline.prepare(dump_ngrams);
    } else if (app.got_subcommand(cmd_train)) {
      result = pipeline.train(parse_arch(arch_name));
    } else if (app.got_subcommand(cmd_curves)) {
      result = pipeline.curves(parse_arch(arch_name));
    } else if (app.got_subcommand(cmd_fit)) {
      result = pipeline.fit_aoa(parse_arch(arch_name));
    } else if (app.got_subcommand(cmd_regress)) {
      result = pipeline.regress(parse_arch(arch_name), sweep);
    } else if (app.got_subcommand(cmd_kl)) {
      result = pipeline.kl_trace_stage(parse_arch(arch_name));
    }
    if (result.skipped) {
      std::cout << "up to date (input hashes match); nothing to do\n";
    } else {
      for (const auto& o : result.outputs) std::cout << "wrote " << o << "\n";
    }
    return 0;
  } catch (const MissingUpstreamError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
