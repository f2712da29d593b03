#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "semisurv/semisurv.hpp"

namespace semisurv::cli {

struct RunConfig {
  std::vector<std::string> datasets;
  std::vector<std::string> methods{"RSF", "RSF+UD", "ST-RSF", "ST-RSF+CCT", "MAX-REFERENCE"};
  std::vector<double> fractions = default_labeled_fractions();
  std::size_t n_folds = 5;
  std::size_t n_repeats = 10;
  ForestConfig forest;
  std::size_t threads = 0;
  std::string output_dir = "results";
  std::optional<std::size_t> top_k;  // keep only the k highest-variance features

  ExperimentPlan plan(Method method) const {
    ExperimentPlan p;
    p.fractions = fractions;
    p.n_folds = n_folds;
    p.n_repeats = n_repeats;
    p.method = method;
    p.forest_config = forest;
    p.seed = forest.seed;
    return p;
  }
};

/// Six significant digits; missing values print as NA.
inline std::string fmt(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string dataset_name(const std::string& path) { return std::filesystem::path(path).stem().string(); }

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

inline void write_manifest(const std::filesystem::path& dir, const RunConfig& c) {
  auto out = open_output(dir / "manifest.txt");
  out << "seed = " << c.forest.seed << '\n';
  out << "datasets =";
  for (const auto& d : c.datasets) out << ' ' << d;
  out << "\nmethods =";
  for (const auto& m : c.methods) out << ' ' << m;
  out << "\nfractions =";
  for (double f : c.fractions) out << ' ' << fmt(f);
  out << "\nfolds = " << c.n_folds << "\nrepeats = " << c.n_repeats << "\ntrees = " << c.forest.n_trees
      << "\nmtry = " << fmt(c.forest.mtry_fraction) << "\nmin-leaf-events = " << c.forest.min_leaf_events
      << "\nmax-depth = " << (c.forest.max_depth ? std::to_string(*c.forest.max_depth) : std::string("none"))
      << "\ntop-k = " << (c.top_k ? std::to_string(*c.top_k) : std::string("none")) << '\n';
}

/// Runs every dataset x method and writes cells.csv, curves.csv, auc.csv,
/// augmentation.csv and manifest.txt into the output directory. Failures are
/// appended to errors.log and make the exit code nonzero.
inline int cmd_experiment(const RunConfig& config, std::ostream& log = std::cerr) {
  const std::filesystem::path dir(config.output_dir);
  std::filesystem::create_directories(dir);
  std::vector<Method> methods;
  for (const auto& m : config.methods) methods.push_back(parse_method(m));

  auto cells = open_output(dir / "cells.csv");
  auto curves = open_output(dir / "curves.csv");
  auto aucs = open_output(dir / "auc.csv");
  auto augment = open_output(dir / "augmentation.csv");
  cells << "dataset,method,fraction,repeat,fold,c_index\n";
  curves << "dataset,method,fraction,mean,std\n";
  aucs << "dataset,method,curve_auc,std\n";
  augment << "dataset,method,fraction,repeat,fold,iteration,count\n";
  write_manifest(dir, config);

  std::vector<std::string> errors;
  for (const auto& path : config.datasets) {
    const std::string name = dataset_name(path);
    Dataset data;
    try {
      data = load_dataset(path);
      if (config.top_k) data = reduce_features(data, *config.top_k);
    } catch (const Error& e) {
      errors.push_back(e.what());
      continue;
    }
    for (Method method : methods) {
      const std::string mname(method_name(method));
      try {
        const CurveResult result = run_experiment(data, config.plan(method), config.threads);
        for (const auto& w : result.warnings) errors.push_back(name + " " + mname + ": missing cell, " + w);
        for (const auto& c : result.cells) {
          if (!c.c_index) continue;
          cells << name << ',' << mname << ',' << fmt(c.fraction) << ',' << c.repeat << ',' << c.fold << ','
                << fmt(*c.c_index) << '\n';
          for (const auto& step : c.augmentation)
            augment << name << ',' << mname << ',' << fmt(c.fraction) << ',' << c.repeat << ',' << c.fold << ','
                    << step.iteration << ',' << step.added << '\n';
        }
        for (const auto& s : result.per_fraction)
          curves << name << ',' << mname << ',' << fmt(s.fraction) << ',' << fmt(s.mean) << ',' << fmt(s.std) << '\n';
        const double spread = result.repeat_auc.size() >= 2 ? detail::sample_std(result.repeat_auc)
                                                            : std::numeric_limits<double>::quiet_NaN();
        aucs << name << ',' << mname << ',' << fmt(result.curve_auc) << ',' << fmt(spread) << '\n';
        log << name << ' ' << mname << ": curve-AUC " << fmt(result.curve_auc) << '\n';
      } catch (const Error& e) {
        errors.push_back(name + " " + mname + ": " + e.what());
      }
    }
  }

  if (!errors.empty()) {
    auto err = open_output(dir / "errors.log");
    for (const auto& e : errors) {
      err << e << '\n';
      log << "error: " << e << '\n';
    }
  }
  return errors.empty() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// rank

/// Score grid keyed by dataset then method, with first-seen orderings.
struct ScoreGrid {
  std::vector<std::string> datasets, methods;
  std::map<std::pair<std::string, std::string>, double> score;

  void put(const std::string& dataset, const std::string& method, double v) {
    if (std::find(datasets.begin(), datasets.end(), dataset) == datasets.end()) datasets.push_back(dataset);
    if (std::find(methods.begin(), methods.end(), method) == methods.end()) methods.push_back(method);
    score[{dataset, method}] = v;
  }
};

/// Reads either a long table (dataset, method, curve_auc columns) or a wide
/// one (a dataset column plus one column per method).
inline void read_scores(const std::string& path, ScoreGrid& grid) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open score table '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(path + ": empty score table");
  const auto header = detail::split_csv_line(line);
  auto column = [&](const std::string& name) -> std::ptrdiff_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<std::ptrdiff_t>(i);
    return -1;
  };
  const auto ds = column("dataset"), mc = column("method"), ac = column("curve_auc");
  if (ds < 0) throw Error(path + ": missing 'dataset' column");
  const bool long_form = mc >= 0;
  if (long_form && ac < 0) throw Error(path + ": missing 'curve_auc' column");

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) throw Error(path + ":" + std::to_string(line_no) + ": wrong cell count");
    auto number = [&](std::size_t c) {
      double v = 0.0;
      if (!detail::parse_double(cells[c], v))
        throw Error(path + ":" + std::to_string(line_no) + ": non-numeric score '" + cells[c] + "'");
      return v;
    };
    const std::string& d = cells[static_cast<std::size_t>(ds)];
    if (long_form) {
      grid.put(d, cells[static_cast<std::size_t>(mc)], number(static_cast<std::size_t>(ac)));
    } else {
      for (std::size_t c = 0; c < header.size(); ++c)
        if (static_cast<std::ptrdiff_t>(c) != ds) grid.put(d, header[c], number(c));
    }
  }
}

/// Friedman-Nemenyi over merged score tables; writes ranking.csv and cd.txt.
inline int cmd_rank(const std::vector<std::string>& tables, double alpha, const std::string& output_dir,
                    std::ostream& log = std::cerr) {
  try {
    ScoreGrid grid;
    for (const auto& t : tables) read_scores(t, grid);
    std::vector<std::string> missing;
    std::vector<std::vector<double>> matrix;
    for (const auto& d : grid.datasets) {
      std::vector<double> row;
      for (const auto& m : grid.methods) {
        const auto it = grid.score.find({d, m});
        if (it == grid.score.end()) {
          missing.push_back(d + "/" + m);
          row.push_back(0.0);
        } else {
          row.push_back(it->second);
        }
      }
      matrix.push_back(std::move(row));
    }
    if (!missing.empty()) {
      std::string what = "mismatched grids, missing cells:";
      for (const auto& m : missing) what += " " + m;
      throw Error(what);
    }
    const RankingResult r = friedman_nemenyi(matrix, alpha);

    const std::filesystem::path dir(output_dir);
    std::filesystem::create_directories(dir);
    auto ranking = open_output(dir / "ranking.csv");
    ranking << "method,mean_rank\n";
    for (std::size_t j = 0; j < grid.methods.size(); ++j)
      ranking << grid.methods[j] << ',' << fmt(r.mean_ranks[j]) << '\n';

    auto cd = open_output(dir / "cd.txt");
    cd << "datasets " << grid.datasets.size() << "\nmethods " << grid.methods.size() << "\nalpha " << fmt(alpha)
       << "\nfriedman_statistic " << fmt(r.friedman_statistic) << "\ncritical_difference "
       << fmt(r.critical_difference) << "\nsignificant_pairs\n";
    for (std::size_t i = 0; i < grid.methods.size(); ++i)
      for (std::size_t j = i + 1; j < grid.methods.size(); ++j)
        if (r.significant[i][j]) cd << grid.methods[i] << " vs " << grid.methods[j] << '\n';
    log << "CD " << fmt(r.critical_difference) << " over " << grid.datasets.size() << " datasets\n";
    return 0;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  }
}

// ---------------------------------------------------------------------------
// reduce-features, fit, predict

inline int cmd_reduce_features(const std::string& input, std::size_t k, const std::string& output,
                               std::ostream& log = std::cerr) {
  try {
    const Dataset reduced = reduce_features(load_dataset(input), k);
    auto out = open_output(output);
    write_dataset(out, reduced);
    return 0;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  }
}

/// Trains one forest. Unlabeled rows of the input feed the semi-supervised
/// methods; plain RSF and MAX-REFERENCE ignore them.
inline int cmd_fit(const std::string& input, const std::string& method_text, const ForestConfig& config,
                   std::size_t threads, const std::string& model_path, std::ostream& log = std::cerr) {
  try {
    const Dataset data = load_dataset(input);
    data.validate();
    Dataset labeled = data.empty_like(), observed = data.empty_like(), censored = data.empty_like(),
            unlabeled = data.empty_like();
    for (const auto& r : data.records) {
      if (r.labeled()) labeled.records.push_back(r);
      (r.observed() ? observed : r.censored() ? censored : unlabeled).records.push_back(r);
    }

    Forest forest;
    switch (parse_method(method_text)) {
      case Method::Rsf:
      case Method::MaxReference: forest = fit(labeled, config, threads); break;
      case Method::RsfUd: forest = rsf_plus_ud(labeled, unlabeled, config, threads); break;
      case Method::StRsf: {
        auto run = st_rsf(labeled, unlabeled, config, threads);
        log << "admitted " << run.state.total_added() << " records in " << run.state.iteration << " fits\n";
        forest = std::move(run.forest);
        break;
      }
      case Method::StRsfCct: {
        auto run = st_rsf_cct(observed, censored, unlabeled, config, threads);
        log << "admitted " << run.state.total_added() << " records in " << run.state.iteration << " fits\n";
        forest = std::move(run.forest);
        break;
      }
    }
    save_forest(model_path, forest);
    return 0;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  }
}

/// Writes row, lifetime, variance and sigma for every input row.
inline int cmd_predict(const std::string& model_path, const std::string& input, double t0, const std::string& output,
                       std::ostream& log = std::cerr) {
  try {
    const Forest forest = load_forest(model_path);
    const Dataset data = load_dataset(input);
    auto out = open_output(output);
    out << "row,lifetime,variance,sigma\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto p = predict_with_variance(forest, data.records[i].features, t0);
      out << i + 1 << ',' << fmt(p.mean) << ',' << fmt(p.variance) << ',' << fmt(p.sigma) << '\n';
    }
    return 0;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace semisurv::cli
