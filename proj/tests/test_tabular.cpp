#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "causalaid/tabular.hpp"

namespace ca = causalaid;

namespace {

ca::Table read(const std::string& text, const ca::CsvSchema& schema) {
  std::istringstream in(text);
  return ca::read_csv(in, schema);
}

const ca::CsvSchema kGamSchema{{{"district", ca::ColumnKind::Categorical},
                                {"date", ca::ColumnKind::Date},
                                {"gam", ca::ColumnKind::Numeric}}};

// Independent closed-rank interpolation used as the binarization oracle.
double oracle_percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = (static_cast<double>(v.size()) - 1.0) * p / 100.0;
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (pos - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

ca::Table one_to_hundred() {
  std::vector<double> t, y, z;
  for (int i = 1; i <= 100; ++i) {
    t.push_back(i);
    y.push_back(0.01 * (i % 7));
    z.push_back(i % 3);
  }
  return ca::Table({ca::Column::numeric("T", t), ca::Column::numeric("Y", y), ca::Column::numeric("Z", z)});
}

}  // namespace

TEST(ReadCsv, WellFormed) {
  auto t = read("district,date,gam\nA,2016-01,0.1\nA,2016-02,0.2\nB,2016-01,0.3\n", kGamSchema);
  EXPECT_EQ(t.rows(), 3u);
  for (const auto& [name, missing] : ca::summarize(t).missing_per_column) EXPECT_EQ(missing, 0u) << name;
  EXPECT_DOUBLE_EQ(t.column("gam").numbers[2], 0.3);
}

TEST(ReadCsv, UnparseableNumberBecomesMissing) {
  auto t = read("district,date,gam\nA,2016-01,n/a\nA,2016-02,0.2\n", kGamSchema);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_TRUE(t.column("gam").missing(0));
  EXPECT_FALSE(t.column("gam").missing(1));
  EXPECT_NE(ca::summarize(t).to_text().find("gam"), std::string::npos);
}

TEST(ReadCsv, Errors) {
  EXPECT_THROW(read("", kGamSchema), ca::TableError);
  EXPECT_THROW(read("district,date\nA,2016-01\n", kGamSchema), ca::TableError);
  EXPECT_THROW(read("district,date,gam,gam\nA,2016-01,1,2\n", kGamSchema), ca::TableError);
  EXPECT_THROW(read("district,date,gam\nA,2016-01\n", kGamSchema), ca::TableError);
}

TEST(ReadCsv, QuotesBomAndWriteBack) {
  auto t = read("\xEF\xBB\xBF" "district,date,gam,note\n\"Bu'aale, Jubba\",2016-01,0.1,\"say \"\"hi\"\"\"\n",
                kGamSchema);
  EXPECT_EQ(t.column("district").labels[0], "Bu'aale, Jubba");
  EXPECT_EQ(t.column("note").labels[0], "say \"hi\"");
  std::ostringstream out;
  ca::write_csv(t, out);
  EXPECT_EQ(read(out.str(), kGamSchema), t);
}

TEST(Numbers, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -7.43e-5, 1e300, 0.0, 123456789.0}) {
    EXPECT_EQ(*ca::parse_number(ca::format_number(v)), v);
  }
  EXPECT_EQ(ca::format_number(std::nan("")), "");
  EXPECT_FALSE(ca::parse_number("n/a"));
  EXPECT_FALSE(ca::parse_number("1.5x"));
  EXPECT_FALSE(ca::parse_number("inf"));
}

TEST(Dates, ParseAndBucket) {
  auto d = ca::parse_date("2016-07-15");
  ASSERT_TRUE(d);
  EXPECT_EQ(ca::period_bucket(*d, ca::Period::Annual), "2016");
  EXPECT_EQ(ca::period_bucket(*d, ca::Period::Monthly), "2016-07");
  EXPECT_TRUE(ca::parse_date("2016"));
  EXPECT_FALSE(ca::parse_date("2016-13"));
  EXPECT_FALSE(ca::parse_date("2016-02-30"));
  EXPECT_FALSE(ca::parse_date("16-01"));
}

TEST(Aggregate, MonthlyToAnnualMean) {
  std::string csv = "district,date,gam\n";
  double sum = 0.0;
  for (int m = 1; m <= 12; ++m) {
    const double v = 0.1 + 0.01 * m;
    sum += v;
    csv += "A,2016-" + std::string(m < 10 ? "0" : "") + std::to_string(m) + "," + ca::format_number(v) + "\n";
  }
  auto t = read(csv, kGamSchema);
  auto out = ca::aggregate(t, {{"district"}, "date", ca::Period::Annual, {{"gam", ca::Aggregator::Mean}}});
  ASSERT_EQ(out.rows(), 1u);
  EXPECT_EQ(out.column("date").labels[0], "2016");
  EXPECT_NEAR(out.column("gam").numbers[0], sum / 12.0, 1e-15);
}

TEST(Aggregate, SumSkipsMissing) {
  ca::Table t({ca::Column::categorical("district", {"A", "A", "A"}),
               ca::Column::numeric("Cash", {10.0, std::nan(""), 20.0})});
  auto out = ca::aggregate(t, {{"district"}, "", ca::Period::Annual, {{"Cash", ca::Aggregator::Sum}}});
  EXPECT_DOUBLE_EQ(out.column("Cash").numbers[0], 30.0);

  ca::Table all_missing({ca::Column::categorical("district", {"A"}), ca::Column::numeric("Cash", {std::nan("")})});
  EXPECT_TRUE(ca::aggregate(all_missing, {{"district"}, "", ca::Period::Annual, {{"Cash", ca::Aggregator::Sum}}})
                  .column("Cash")
                  .missing(0));
}

TEST(Aggregate, LastFollowsDateOrderAndIdempotent) {
  ca::Table t({ca::Column::categorical("district", {"A", "A", "B"}),
               ca::Column::date("date", {"2016-05", "2016-02", "2016-03"}),
               ca::Column::numeric("v", {5.0, 2.0, 3.0})});
  ca::AggregateSpec spec{{"district"}, "date", ca::Period::Annual, {{"v", ca::Aggregator::Last}}};
  auto once = ca::aggregate(t, spec);
  EXPECT_DOUBLE_EQ(once.column("v").numbers[0], 5.0);
  EXPECT_EQ(ca::aggregate(once, spec), once);
}

TEST(Aggregate, Errors) {
  ca::Table t({ca::Column::categorical("district", {"A"}), ca::Column::categorical("label", {"x"})});
  EXPECT_THROW(ca::aggregate(t, {{"district"}, "", ca::Period::Annual, {{"label", ca::Aggregator::Mean}}}),
               ca::TableError);
  EXPECT_THROW(ca::aggregate(t, {{"nope"}, "", ca::Period::Annual, {}}), ca::TableError);
  EXPECT_THROW(ca::aggregate(t, {{"district"}, "", ca::Period::Annual, {}}), ca::TableError);
}

TEST(Resample, SeasonalValueHeldIntoEachMonth) {
  std::vector<std::string> months;
  for (int m = 1; m <= 12; ++m) months.push_back("2016-" + std::string(m < 10 ? "0" : "") + std::to_string(m));
  ca::Table grid({ca::Column::categorical("district", std::vector<std::string>(12, "A")), ca::Column::date("date", months)});
  ca::Table seasonal({ca::Column::categorical("district", {"A", "A"}), ca::Column::date("date", {"2015-12", "2016-07"}),
                      ca::Column::numeric("Sorghum", {3.0, 5.0})});
  auto out = ca::left_join(grid, seasonal, {"district"}, "date", ca::JoinMode::AsOf);
  for (int m = 0; m < 12; ++m) EXPECT_DOUBLE_EQ(out.column("Sorghum").numbers[m], m < 6 ? 3.0 : 5.0);
  auto exact = ca::left_join(grid, seasonal, {"district"}, "date", ca::JoinMode::Exact, 0.0);
  EXPECT_DOUBLE_EQ(exact.column("Sorghum").numbers[0], 0.0);
  EXPECT_DOUBLE_EQ(exact.column("Sorghum").numbers[6], 5.0);
}

TEST(PerCapita, Basic) {
  ca::Table t({ca::Column::numeric("Cash", {500.0}), ca::Column::numeric("GAM", {0.15}),
               ca::Column::numeric("Population", {10000.0})});
  auto out = ca::per_capita_normalize(t, {"Cash"}, "Population");
  EXPECT_DOUBLE_EQ(out.column("Cash").numbers[0], 0.05);
  EXPECT_DOUBLE_EQ(out.column("GAM").numbers[0], 0.15);
  EXPECT_TRUE(out.column("Cash").per_capita);
  EXPECT_THROW(ca::per_capita_normalize(out, {"Cash"}, "Population"), ca::TableError);
}

TEST(PerCapita, PopulationErrors) {
  ca::Table zero({ca::Column::numeric("Cash", {1.0}), ca::Column::numeric("Population", {0.0})});
  EXPECT_THROW(ca::per_capita_normalize(zero, {"Cash"}, "Population"), ca::TableError);
  ca::Table missing({ca::Column::numeric("Cash", {1.0}), ca::Column::numeric("Population", {std::nan("")})});
  EXPECT_THROW(ca::per_capita_normalize(missing, {"Cash"}, "Population"), ca::TableError);
  ca::Table absent({ca::Column::numeric("Cash", {std::nan("")}), ca::Column::numeric("Population", {std::nan("")})});
  EXPECT_NO_THROW(ca::per_capita_normalize(absent, {"Cash"}, "Population"));
}

TEST(PerCapita, NormalizeThenAggregateIsMeanOfRatios) {
  // Two months, population changes between them: 100/1000 and 300/2000.
  ca::Table t({ca::Column::categorical("district", {"A", "A"}), ca::Column::date("date", {"2016-01", "2016-02"}),
               ca::Column::numeric("Cash", {100.0, 300.0}), ca::Column::numeric("Population", {1000.0, 2000.0})});
  auto normalized = ca::per_capita_normalize(t, {"Cash"}, "Population");
  auto out = ca::aggregate(normalized, {{"district"}, "date", ca::Period::Annual,
                                        {{"Cash", ca::Aggregator::Mean}, {"Population", ca::Aggregator::Last}}});
  const double mean_of_ratios = (0.1 + 0.15) / 2.0;
  EXPECT_DOUBLE_EQ(out.column("Cash").numbers[0], mean_of_ratios);
  EXPECT_NE(out.column("Cash").numbers[0], 200.0 / 2000.0);  // aggregate-first would give this
}

TEST(Percentile, Interpolation) {
  std::vector<double> v{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(ca::percentile(v, 50), 2.5);
  EXPECT_DOUBLE_EQ(ca::percentile(v, 0), 1.0);
  EXPECT_DOUBLE_EQ(ca::percentile(v, 100), 4.0);
  EXPECT_THROW(ca::percentile(std::vector<double>{}, 50), ca::TableError);
}

TEST(Binarize, MedianWithoutBand) {
  auto frame = ca::binarize_treatment(one_to_hundred(), {"T", "Y", {"Z"}, 50.0, 0.0});
  EXPECT_DOUBLE_EQ(frame.info().threshold_value, 50.5);
  EXPECT_EQ(frame.n_treated(), 50u);
  EXPECT_EQ(frame.n_control(), 50u);
  EXPECT_EQ(frame.info().excluded_count, 0u);
}

TEST(Binarize, BandExclusionMatchesEnumeration) {
  auto table = one_to_hundred();
  auto frame = ca::binarize_treatment(table, {"T", "Y", {"Z"}, 50.0, 5.0});
  const auto& values = table.column("T").numbers;
  const double lo = oracle_percentile(values, 45.0), hi = oracle_percentile(values, 55.0);
  std::size_t excluded = 0;
  for (double v : values) excluded += (v >= lo && v <= hi);
  EXPECT_EQ(frame.info().excluded_count, excluded);
  // The stated interpolation rule gives bounds 45.55 / 55.45, i.e. rows 46..55.
  EXPECT_EQ(frame.info().excluded_count, 10u);
  EXPECT_EQ(frame.n_treated() + frame.n_control(), 90u);
}

TEST(Binarize, TieAtThresholdIsTreatedWithoutBand) {
  ca::Table t({ca::Column::numeric("T", {1, 2, 2, 2, 3, 4}), ca::Column::numeric("Y", {0, 0, 0, 0, 0, 0})});
  // The median 2 is shared by three rows; ties go to the treated arm, leaving one control row.
  EXPECT_THROW(ca::binarize_treatment(t, {"T", "Y", {}, 50.0, 0.0}), ca::TableError);
  auto wider = ca::Table({ca::Column::numeric("T", {1, 1.5, 2, 2, 2, 3, 4}), ca::Column::numeric("Y", {0, 0, 0, 0, 0, 0, 0})});
  auto frame = ca::binarize_treatment(wider, {"T", "Y", {}, 50.0, 0.0});
  EXPECT_DOUBLE_EQ(frame.info().threshold_value, 2.0);
  EXPECT_EQ(frame.n_treated(), 5u);
  EXPECT_EQ(frame.n_control(), 2u);
}

TEST(Binarize, ListwiseDeletionAndPartition) {
  auto base = one_to_hundred();
  auto y = base.column("Y").numbers;
  y[3] = std::nan("");
  y[40] = std::nan("");
  auto t = base.with_column(ca::Column::numeric("Y", y));
  auto frame = ca::binarize_treatment(t, {"T", "Y", {"Z"}, 35.0, 0.0});
  EXPECT_EQ(frame.info().dropped_missing, 2u);
  EXPECT_EQ(frame.n_treated() + frame.n_control(), 98u);
}

TEST(Binarize, BandIsMonotone) {
  auto table = one_to_hundred();
  std::size_t previous = 101;
  for (double band : {0.0, 1.0, 2.5, 5.0, 10.0, 20.0}) {
    auto frame = ca::binarize_treatment(table, {"T", "Y", {"Z"}, 50.0, band});
    EXPECT_LE(frame.rows(), previous);
    previous = frame.rows();
  }
}

TEST(Binarize, Errors) {
  ca::Table flat({ca::Column::numeric("T", {3, 3, 3, 3}), ca::Column::numeric("Y", {0, 0, 0, 0})});
  EXPECT_THROW(ca::binarize_treatment(flat, {"T", "Y", {}, 50.0, 0.0}), ca::TableError);
  ca::Table small({ca::Column::numeric("T", {1, 2, 3}), ca::Column::numeric("Y", {0, 0, 0})});
  EXPECT_THROW(ca::binarize_treatment(small, {"T", "Y", {}, 50.0, 0.0}), ca::TableError);
  ca::Table big_y({ca::Column::numeric("T", {1, 2, 3, 4}), ca::Column::numeric("Y", {0, 2, 0, 0})});
  EXPECT_THROW(ca::binarize_treatment(big_y, {"T", "Y", {}, 50.0, 0.0}), ca::TableError);
  EXPECT_THROW(ca::binarize_treatment(one_to_hundred(), {"T", "Y", {}, 0.0, 0.0}), ca::TableError);
}

TEST(StudyFrame, Invariants) {
  Eigen::VectorXd t(4), y(4);
  t << 1, 0, 1, 0;
  y << 0.1, 0.2, 0.3, 0.4;
  auto frame = ca::StudyFrame::create(t, y, Eigen::MatrixXd(4, 0), {});
  EXPECT_EQ(frame.n_treated(), 2u);
  t[0] = 0.5;
  EXPECT_THROW(ca::StudyFrame::create(t, y, Eigen::MatrixXd(4, 0), {}), ca::TableError);
  t[0] = 0;
  EXPECT_THROW(ca::StudyFrame::create(t, y, Eigen::MatrixXd(4, 0), {}), ca::TableError);
}

TEST(SourceSchemas, Registry) {
  EXPECT_EQ(ca::source_schemas().size(), 9u);
  EXPECT_EQ(ca::source_schema("gam").variable, "GAM");
  EXPECT_TRUE(ca::source_schema("fatalities").zero_when_absent);
  EXPECT_FALSE(ca::source_schema("population").has_date);
  EXPECT_THROW(ca::source_schema("nope"), ca::TableError);
}
