#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "commands.hpp"

namespace {

using semisurv::ForestConfig;

void add_forest_options(CLI::App& cmd, ForestConfig& forest, std::size_t& threads, std::size_t& max_depth) {
  cmd.add_option("--seed", forest.seed, "Base random seed")->capture_default_str();
  cmd.add_option("--trees", forest.n_trees, "Trees per forest")->capture_default_str();
  cmd.add_option("--mtry", forest.mtry_fraction, "Fraction of features tried per split")->capture_default_str();
  cmd.add_option("--min-leaf-events", forest.min_leaf_events, "Observed events needed to split a node")
      ->capture_default_str();
  cmd.add_option("--max-depth", max_depth, "Depth limit (0 = none)")->capture_default_str();
  cmd.add_option("--threads", threads, "Worker threads (0 = SEMISURV_THREADS or all cores)")->capture_default_str();
}

void apply_depth(ForestConfig& forest, std::size_t max_depth) {
  if (max_depth > 0) forest.max_depth = max_depth;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised random survival forests"};
  app.require_subcommand(1);

  semisurv::cli::RunConfig run;
  std::size_t run_depth = 0, run_top_k = 0;
  auto* experiment = app.add_subcommand("experiment", "Cross-validated labeled-fraction curves");
  experiment->set_config("--config", "", "Flat key = value file; keys are the long option names");
  experiment->add_option("--data", run.datasets, "Dataset CSV (repeatable)")->required();
  experiment->add_option("--methods", run.methods, "Methods: RSF RSF+UD ST-RSF ST-RSF+CCT MAX-REFERENCE")
      ->delimiter(',')
      ->capture_default_str();
  experiment->add_option("--fractions", run.fractions, "Labeled fractions, increasing")
      ->delimiter(',')
      ->capture_default_str();
  experiment->add_option("--folds", run.n_folds, "Cross-validation folds")->capture_default_str();
  experiment->add_option("--repeats", run.n_repeats, "Cross-validation repeats")->capture_default_str();
  experiment->add_option("--top-k", run_top_k, "Keep the k highest-variance features (0 = all)");
  experiment->add_option("--out", run.output_dir, "Output directory")->capture_default_str();
  add_forest_options(*experiment, run.forest, run.threads, run_depth);

  std::vector<std::string> tables;
  double alpha = 0.05;
  std::string rank_out = "results";
  auto* rank = app.add_subcommand("rank", "Friedman-Nemenyi ranking of curve-AUC tables");
  rank->add_option("--auc", tables, "auc.csv or wide baseline table (repeatable)")->required();
  rank->add_option("--alpha", alpha, "Significance level, 0.05 or 0.10")->capture_default_str();
  rank->add_option("--out", rank_out, "Output directory")->capture_default_str();

  std::string reduce_in, reduce_out;
  std::size_t reduce_k = 0;
  auto* reduce = app.add_subcommand("reduce-features", "Keep the k highest-variance features");
  reduce->add_option("--data", reduce_in, "Input dataset CSV")->required();
  reduce->add_option("--k", reduce_k, "Features to keep")->required();
  reduce->add_option("--out", reduce_out, "Output CSV")->required();

  std::string fit_in, fit_method = "RSF", model_path;
  ForestConfig fit_forest;
  std::size_t fit_threads = 0, fit_depth = 0;
  auto* fit = app.add_subcommand("fit", "Train one forest and save it");
  fit->set_config("--config", "", "Flat key = value file; keys are the long option names");
  fit->add_option("--data", fit_in, "Training CSV; status -1 rows are unlabeled")->required();
  fit->add_option("--method", fit_method, "Training method")->capture_default_str();
  fit->add_option("--model", model_path, "Model output path")->required();
  add_forest_options(*fit, fit_forest, fit_threads, fit_depth);

  std::string predict_model, predict_in, predict_out;
  double t0 = 0.0;
  auto* predict = app.add_subcommand("predict", "Expected lifetimes from a saved forest");
  predict->add_option("--model", predict_model, "Saved forest")->required();
  predict->add_option("--data", predict_in, "Dataset CSV")->required();
  predict->add_option("--t0", t0, "Time already survived")->capture_default_str();
  predict->add_option("--out", predict_out, "Predictions CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (experiment->parsed()) {
      apply_depth(run.forest, run_depth);
      if (run_top_k > 0) run.top_k = run_top_k;
      return semisurv::cli::cmd_experiment(run);
    }
    if (rank->parsed()) return semisurv::cli::cmd_rank(tables, alpha, rank_out);
    if (reduce->parsed()) return semisurv::cli::cmd_reduce_features(reduce_in, reduce_k, reduce_out);
    if (fit->parsed()) {
      apply_depth(fit_forest, fit_depth);
      return semisurv::cli::cmd_fit(fit_in, fit_method, fit_forest, fit_threads, model_path);
    }
    if (predict->parsed()) return semisurv::cli::cmd_predict(predict_model, predict_in, t0, predict_out);
  } catch (const semisurv::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
