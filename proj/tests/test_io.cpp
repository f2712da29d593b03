#include <gtest/gtest.h>

#include <sstream>

#include "semisurv/semisurv.hpp"

using namespace semisurv;

namespace {

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return read_dataset(in, "mem.csv");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ReadDataset, StatusesAndFileOrder) {
  const Dataset d = parse("time,status,a,b\n1,1,0.5,2\n2,0,1.5,3\n3,1,2.5,4\n");
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d.count(SupervisionStatus::Observed), 2u);
  EXPECT_EQ(d.count(SupervisionStatus::Censored), 1u);
  EXPECT_EQ(d.feature_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(d.records[1].features, (std::vector<double>{1.5, 3}));
  EXPECT_EQ(d.records[2].time, 3.0);
}

TEST(ReadDataset, UnlabeledRowsIgnoreTime) {
  const Dataset d = parse("a,Status,TIME\n1,-1,7\n2,,\n3,1,4\n");
  EXPECT_EQ(d.records[0].status, SupervisionStatus::Unlabeled);
  EXPECT_EQ(d.records[0].time, 0.0);
  EXPECT_EQ(d.records[1].status, SupervisionStatus::Unlabeled);
  EXPECT_EQ(d.records[2].time, 4.0);
  EXPECT_EQ(d.feature_names, (std::vector<std::string>{"a"}));
}

TEST(ReadDataset, QuotedHeaderCells) {
  const Dataset d = parse("\"time\",\"status\",\"x, y\"\n1,1,2\n");
  EXPECT_EQ(d.feature_names, (std::vector<std::string>{"x, y"}));
}

TEST(ReadDataset, ErrorsNameTheLine) {
  EXPECT_EQ(error_of(""), "mem.csv: empty dataset");
  EXPECT_EQ(error_of("time,status,a\n"), "mem.csv: empty dataset");
  EXPECT_EQ(error_of("status,a\n1,2\n"), "mem.csv:1: missing 'time' column");
  EXPECT_EQ(error_of("time,a\n1,2\n"), "mem.csv:1: missing 'status' column");
  EXPECT_EQ(error_of("time,status,a\n1,1,2\n2,1,x\n"), "mem.csv:3: non-numeric value 'x' in feature 'a'");
  EXPECT_EQ(error_of("time,status,a\n-1,1,2\n"), "mem.csv:2: negative time");
  EXPECT_EQ(error_of("time,status,a\n1,2,2\n"), "mem.csv:2: invalid status '2'");
  EXPECT_EQ(error_of("time,status,a\n1,1\n"), "mem.csv:2: expected 3 cells, found 2");
}

TEST(ReadDataset, MissingFile) {
  try {
    load_dataset("/nonexistent/data.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/data.csv"), std::string::npos);
  }
}

TEST(WriteDataset, RoundTrips) {
  const Dataset d = parse("time,status,a\n1.25,1,0.1\n,-1,0.2\n3,0,0.30000000000000004\n");
  std::ostringstream out;
  write_dataset(out, d);
  EXPECT_EQ(parse(out.str()).records, d.records);
}

TEST(ReduceFeatures, KeepsHighestVariance) {
  const Dataset d = parse("time,status,flat,wide,mid\n1,1,3,0,1\n2,0,3,10,2\n3,1,3,-10,3\n");
  const Dataset one = reduce_features(d, 1);
  EXPECT_EQ(one.feature_names, (std::vector<std::string>{"wide"}));
  const Dataset two = reduce_features(d, 2);
  EXPECT_EQ(two.feature_names, (std::vector<std::string>{"wide", "mid"}));
  EXPECT_EQ(two.records[1].features, (std::vector<double>{10, 2}));
  EXPECT_EQ(two.records[1].time, 2.0);
  const Dataset all = reduce_features(d, 3);
  EXPECT_EQ(all.feature_names, d.feature_names);
  EXPECT_EQ(all.records, d.records);
  EXPECT_THROW(reduce_features(d, 4), Error);
  EXPECT_THROW(reduce_features(d, 0), Error);
}

TEST(ReduceFeatures, TiesFavourEarlierColumns) {
  const Dataset d = parse("time,status,a,b,c\n1,1,0,1,0\n2,1,1,0,1\n");
  EXPECT_EQ(reduce_features(d, 2).feature_names, (std::vector<std::string>{"a", "b"}));
}

TEST(FormatExact, ShortestRoundTrip) {
  EXPECT_EQ(format_exact(0.1), "0.1");
  EXPECT_EQ(format_exact(2.0), "2");
  double back = 0.0;
  ASSERT_TRUE(detail::parse_double(format_exact(1.0 / 3.0), back));
  EXPECT_EQ(back, 1.0 / 3.0);
}
