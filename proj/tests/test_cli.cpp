#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "oracles.hpp"

using namespace semisurv;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("semisurv_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t lines(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

fs::path write_dataset_file(const fs::path& dir, const std::string& name, const Dataset& d) {
  const fs::path p = dir / name;
  std::ofstream out(p);
  write_dataset(out, d);
  return p;
}

cli::RunConfig small_run(const fs::path& data, const fs::path& out) {
  cli::RunConfig c;
  c.datasets = {data.string()};
  c.methods = {"RSF", "ST-RSF+CCT"};
  c.fractions = {0.5, 0.9};
  c.n_folds = 2;
  c.n_repeats = 1;
  c.forest.n_trees = 10;
  c.output_dir = out.string();
  return c;
}

}  // namespace

TEST(Fmt, SixSignificantDigits) {
  EXPECT_EQ(cli::fmt(0.123456789), "0.123457");
  EXPECT_EQ(cli::fmt(64.0), "64");
  EXPECT_EQ(cli::fmt(std::numeric_limits<double>::quiet_NaN()), "NA");
}

TEST(CmdExperiment, GridArithmeticAndOutputs) {
  const fs::path dir = scratch("grid");
  oracle::Engine g(1);
  const fs::path data = write_dataset_file(dir, "toy.csv", oracle::random_dataset(g, 40, 3, 0.3));
  std::ostringstream log;
  ASSERT_EQ(cli::cmd_experiment(small_run(data, dir / "out"), log), 0) << log.str();
  EXPECT_EQ(lines(dir / "out" / "cells.csv"), 1u + 8u);
  EXPECT_EQ(lines(dir / "out" / "curves.csv"), 1u + 4u);
  EXPECT_EQ(lines(dir / "out" / "auc.csv"), 1u + 2u);
  EXPECT_TRUE(fs::exists(dir / "out" / "augmentation.csv"));
  EXPECT_NE(slurp(dir / "out" / "manifest.txt").find("seed = 42"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "out" / "errors.log"));
  EXPECT_EQ(slurp(dir / "out" / "cells.csv").substr(0, 40), "dataset,method,fraction,repeat,fold,c_in");
}

TEST(CmdExperiment, RerunIsByteIdenticalAcrossThreads) {
  const fs::path dir = scratch("rerun");
  oracle::Engine g(2);
  const fs::path data = write_dataset_file(dir, "toy.csv", oracle::random_dataset(g, 40, 3, 0.3));
  auto a = small_run(data, dir / "a");
  a.threads = 1;
  auto b = small_run(data, dir / "b");
  b.threads = 3;
  std::ostringstream log;
  ASSERT_EQ(cli::cmd_experiment(a, log), 0);
  ASSERT_EQ(cli::cmd_experiment(b, log), 0);
  for (const char* f : {"cells.csv", "curves.csv", "auc.csv", "augmentation.csv"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}

TEST(CmdExperiment, MissingDatasetFailsNamingThePath) {
  const fs::path dir = scratch("missing");
  auto c = small_run(dir / "nope.csv", dir / "out");
  std::ostringstream log;
  EXPECT_NE(cli::cmd_experiment(c, log), 0);
  EXPECT_NE(log.str().find("nope.csv"), std::string::npos);
  EXPECT_NE(slurp(dir / "out" / "errors.log").find("nope.csv"), std::string::npos);
}

TEST(CmdExperiment, TopKReducesFeatures) {
  const fs::path dir = scratch("topk");
  oracle::Engine g(3);
  const fs::path data = write_dataset_file(dir, "toy.csv", oracle::random_dataset(g, 40, 5, 0.3));
  auto c = small_run(data, dir / "out");
  c.methods = {"RSF"};
  c.top_k = 2;
  std::ostringstream log;
  EXPECT_EQ(cli::cmd_experiment(c, log), 0);
  c.top_k = 9;
  EXPECT_NE(cli::cmd_experiment(c, log), 0);
}

TEST(CmdRank, FixtureTable) {
  const fs::path dir = scratch("rank");
  std::ostringstream log;
  ASSERT_EQ(cli::cmd_rank({std::string(SEMISURV_FIXTURES) + "/table2_auc.csv"}, 0.05, dir.string(), log), 0)
      << log.str();
  const std::string ranking = slurp(dir / "ranking.csv");
  EXPECT_NE(ranking.find("ST-RSF+CCT,1.5\n"), std::string::npos);
  EXPECT_NE(slurp(dir / "cd.txt").find("critical_difference 1.57"), std::string::npos);
}

TEST(CmdRank, MergesBaselineColumnsAndChecksGrid) {
  const fs::path dir = scratch("merge");
  {
    std::ofstream a(dir / "auc.csv");
    a << "dataset,method,curve_auc,std\nd1,RSF,60,1\nd1,ST-RSF+CCT,62,1\nd2,RSF,70,1\nd2,ST-RSF+CCT,70,1\n";
    std::ofstream b(dir / "lasso.csv");
    b << "dataset,Lasso-Cox\nd1,61\nd2,65\n";
    std::ofstream c(dir / "partial.csv");
    c << "dataset,Other\nd1,50\n";
  }
  std::ostringstream log;
  ASSERT_EQ(cli::cmd_rank({(dir / "auc.csv").string(), (dir / "lasso.csv").string()}, 0.05, dir.string(), log), 0);
  const std::string ranking = slurp(dir / "ranking.csv");
  EXPECT_NE(ranking.find("Lasso-Cox,2.5"), std::string::npos);
  EXPECT_NE(ranking.find("RSF,2.25"), std::string::npos);

  EXPECT_NE(cli::cmd_rank({(dir / "auc.csv").string(), (dir / "partial.csv").string()}, 0.05, dir.string(), log), 0);
  EXPECT_NE(log.str().find("d2/Other"), std::string::npos);
}

TEST(CmdRank, TiedColumnsAndSingleDataset) {
  const fs::path dir = scratch("ties");
  {
    std::ofstream a(dir / "t.csv");
    a << "dataset,A,B\nd1,1,1\nd2,3,3\n";
    std::ofstream b(dir / "one.csv");
    b << "dataset,A,B\nd1,1,2\n";
  }
  std::ostringstream log;
  ASSERT_EQ(cli::cmd_rank({(dir / "t.csv").string()}, 0.05, dir.string(), log), 0);
  EXPECT_EQ(slurp(dir / "ranking.csv"), "method,mean_rank\nA,1.5\nB,1.5\n");
  EXPECT_NE(cli::cmd_rank({(dir / "one.csv").string()}, 0.05, dir.string(), log), 0);
  EXPECT_NE(log.str().find("insufficient datasets"), std::string::npos);
}

TEST(CmdFitPredict, RoundTripThroughModelFile) {
  const fs::path dir = scratch("fit");
  oracle::Engine g(4);
  Dataset d = oracle::random_dataset(g, 50, 3, 0.3);
  for (std::size_t i = 40; i < 50; ++i) d.records[i].status = SupervisionStatus::Unlabeled;
  const fs::path data = write_dataset_file(dir, "train.csv", d);
  ForestConfig c;
  c.n_trees = 10;
  std::ostringstream log;
  for (const char* m : {"RSF", "RSF+UD", "ST-RSF", "ST-RSF+CCT"}) {
    ASSERT_EQ(cli::cmd_fit(data.string(), m, c, 1, (dir / "model.txt").string(), log), 0) << log.str();
    ASSERT_EQ(cli::cmd_predict((dir / "model.txt").string(), data.string(), 0.0, (dir / "pred.csv").string(), log),
              0);
    EXPECT_EQ(lines(dir / "pred.csv"), 51u);
  }
  Dataset labeled = d.empty_like();
  for (const auto& r : d.records)
    if (r.labeled()) labeled.records.push_back(r);
  const Forest direct = fit(labeled, c, 1);
  ASSERT_EQ(cli::cmd_fit(data.string(), "RSF", c, 1, (dir / "model.txt").string(), log), 0);
  EXPECT_TRUE(load_forest((dir / "model.txt").string()).trees == direct.trees);
  EXPECT_NE(cli::cmd_fit(data.string(), "Lasso", c, 1, (dir / "model.txt").string(), log), 0);
  EXPECT_NE(cli::cmd_predict((dir / "none.txt").string(), data.string(), 0.0, (dir / "p.csv").string(), log), 0);
}

TEST(CmdReduceFeatures, WritesReducedCsv) {
  const fs::path dir = scratch("reduce");
  {
    std::ofstream a(dir / "in.csv");
    a << "time,status,flat,wide\n1,1,3,0\n2,0,3,10\n";
  }
  std::ostringstream log;
  ASSERT_EQ(cli::cmd_reduce_features((dir / "in.csv").string(), 1, (dir / "out.csv").string(), log), 0);
  EXPECT_EQ(slurp(dir / "out.csv"), "time,status,wide\n1,1,0\n2,0,10\n");
  EXPECT_NE(cli::cmd_reduce_features((dir / "in.csv").string(), 3, (dir / "out.csv").string(), log), 0);
}
