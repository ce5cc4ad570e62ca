#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "causalaid/graph.hpp"
#include "causalaid/report.hpp"
#include "causalaid/study.hpp"
#include "support.hpp"

namespace ca = causalaid;
using ca::testing::data_path;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ca::StudyConfig small_config(const std::string& name) {
  auto config = ca::load_study_config(data_path(name));
  config.bootstrap = 100;
  config.trials = 20;
  return config;
}

const ca::StudyReport& country_report() {
  static const ca::StudyReport report = ca::run_study(small_config("somalia_country.yaml"));
  return report;
}

}  // namespace

TEST(StudyConfig, BundledConfigsLoad) {
  auto config = ca::load_study_config(data_path("somalia_country.yaml"));
  EXPECT_EQ(config.sources.size(), 9u);
  EXPECT_EQ(config.methods.size(), 5u);
  EXPECT_EQ(config.bootstrap, 1000);
  EXPECT_EQ(config.trials, 100);
  EXPECT_EQ(config.seed, 2023u);
  EXPECT_EQ(config.effective_area_label(), "Somalia (Country)");
  EXPECT_NO_THROW(config.validate());
  EXPECT_EQ(ca::load_study_config(data_path("baidoa_monthly.yaml")).period, ca::Period::Monthly);
}

TEST(StudyConfig, Errors) {
  const std::string base = slurp(data_path("somalia_country.yaml"));
  auto with = [&](const std::string& from, const std::string& to) {
    std::string text = base;
    const auto at = text.find(from);
    EXPECT_NE(at, std::string::npos) << from;
    text.replace(at, from.size(), to);
    return text;
  };
  const std::string dir = CAUSALAID_DATA_DIR;
  EXPECT_THROW(ca::parse_study_config(with("methods: [LR, M, IPSW, T-L, X-L]", "methods: []"), dir), ca::ConfigError);
  EXPECT_THROW(ca::parse_study_config(with("methods: [LR, M, IPSW, T-L, X-L]", "methods: [LR, OLS]"), dir),
               ca::ConfigError);
  EXPECT_THROW(ca::parse_study_config(with("bootstrap: 1000", "bootstrap: 99"), dir), ca::ConfigError);
  EXPECT_THROW(ca::parse_study_config(with("alpha: 0.05", "alpha: 0.05\ncolour: red"), dir), ca::ConfigError);
  EXPECT_THROW(ca::parse_study_config(with("thresholds: [35, 50, 75]", "thresholds: [35, 120]"), dir),
               ca::ConfigError);
  EXPECT_THROW(ca::parse_study_config(with("period: annual", "period: fortnightly"), dir), ca::ConfigError);
  EXPECT_THROW(ca::parse_study_config(with("subset_fraction: 0.2", "subset_fraction: 1.5"), dir), ca::ConfigError);
  EXPECT_THROW(ca::parse_study_config("dag: [unclosed", dir), ca::ConfigError);
  EXPECT_THROW(ca::load_study_config("/nonexistent/study.yaml"), ca::ConfigError);
}

TEST(Study, CountryShape) {
  const auto& report = country_report();
  EXPECT_EQ(report.metadata.harmonized_rows, 399u);
  EXPECT_EQ(report.metadata.complete_rows, 378u);
  EXPECT_EQ(report.metadata.dropped_missing, 21u);
  EXPECT_EQ(report.metadata.treatment, "Cash");
  EXPECT_EQ(report.metadata.outcome, "GAM");
  EXPECT_EQ(report.metadata.adjustment_set,
            (std::vector<std::string>{"Fatalities", "MarketPrices", "SorghumProduction", "Displacement", "Population"}));
  ASSERT_EQ(report.rows.size(), 15u);
  const double thresholds[] = {35, 50, 75};
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& row = report.rows[i];
    EXPECT_EQ(row.threshold, thresholds[i / 5]);
    EXPECT_EQ(row.method, ca::kAllMethods[i % 5]);
    ASSERT_TRUE(row.estimate) << row.error;
    EXPECT_LE(row.estimate->ci_low, row.estimate->ate);
    EXPECT_LE(row.estimate->ate, row.estimate->ci_high);
    EXPECT_EQ(row.n_treated + row.n_control, row.n_used);
    EXPECT_EQ(row.n_used + row.excluded, 378u);
    EXPECT_GE(row.excluded, 37u);
    EXPECT_LE(row.excluded, 38u);
    for (const auto& cell : row.refutations) {
      ASSERT_TRUE(cell.report) << cell.error;
      EXPECT_EQ(cell.report->trials, 20u);
      EXPECT_EQ(cell.report->verdict == ca::Verdict::Pass, cell.report->p_value >= 0.05);
    }
  }
  EXPECT_TRUE(report.complete());
}

TEST(Study, BaidoaMonthlyRuns) {
  auto config = small_config("baidoa_monthly.yaml");
  config.methods = {ca::Method::LR, ca::Method::IPSW};
  const auto report = ca::run_study(config);
  EXPECT_EQ(report.metadata.period, "monthly");
  EXPECT_EQ(report.rows.size(), 6u);
  EXPECT_GT(report.metadata.complete_rows, 30u);
  for (const auto& row : report.rows) EXPECT_EQ(row.area, "Baidoa");
}

TEST(Report, CsvAndJsonRoundTripExactly) {
  const auto& report = country_report();
  const std::string csv = ca::render_csv(report);
  const std::string json = ca::render_json(report);
  EXPECT_EQ(ca::render_csv(ca::parse_report_csv(csv)), csv);
  EXPECT_EQ(ca::render_json(ca::parse_report_json(json)), json);
  EXPECT_EQ(ca::render_csv(ca::parse_report_json(json)), csv);
  EXPECT_EQ(ca::render_json(ca::parse_report_csv(csv)), json);
  EXPECT_THROW(ca::parse_report_csv("not,a,report\n"), ca::ReportError);
  EXPECT_THROW(ca::parse_report_json("{"), ca::ReportError);
}

TEST(Report, TextScalesAndMarksFailures) {
  ca::StudyReport report;
  report.metadata.area = "Somewhere";
  report.metadata.period = "annual";
  report.metadata.treatment = "Cash";
  report.metadata.outcome = "GAM";
  report.metadata.bootstrap = 100;
  report.metadata.alpha = 0.05;
  report.metadata.trials = 20;
  report.metadata.band = 5;
  ca::ReportRow row;
  row.area = "Somewhere";
  row.threshold = 50;
  row.estimate = ca::EffectEstimate{.ate = -0.000743, .ci_low = -0.002, .ci_high = 0.001, .p_value = 0.3};
  for (int t = 0; t < 3; ++t) {
    ca::RefutationReport r;
    r.test = static_cast<ca::RefutationTest>(t);
    r.refuted_effect = t == 1 ? 0.00125 : -0.000743;
    r.p_value = t == 1 ? 0.01 : 0.5;
    r.trials = 20;
    r.verdict = ca::verdict_for(r.p_value);
    row.refutations[t] = ca::RefutationCell{r.test, r, ""};
  }
  report.rows.push_back(row);
  const std::string text = ca::render_text(report);
  EXPECT_NE(text.find("-7.430"), std::string::npos) << text;
  EXPECT_NE(text.find("12.500"), std::string::npos) << text;
  EXPECT_NE(text.find("0.010!"), std::string::npos) << text;
  EXPECT_EQ(text.find("0.500!"), std::string::npos) << text;
}

TEST(Study, RemovingAMethodLeavesOtherCellsIdentical) {
  auto config = small_config("somalia_country.yaml");
  config.methods = {ca::Method::LR, ca::Method::IPSW, ca::Method::Matching};
  const auto full = ca::run_study(config);
  config.methods = {ca::Method::IPSW};
  const auto reduced = ca::run_study(config);
  for (const auto& row : reduced.rows) {
    bool found = false;
    for (const auto& other : full.rows) {
      if (other.threshold != row.threshold || other.method != row.method) continue;
      found = true;
      ca::StudyReport a, b;
      a.rows = {row};
      b.rows = {other};
      EXPECT_EQ(ca::render_csv(a), ca::render_csv(b));
    }
    EXPECT_TRUE(found);
  }
}

TEST(Study, ReportsAreByteDeterministic) {
  auto config = small_config("somalia_country.yaml");
  config.methods = {ca::Method::LR, ca::Method::XLearner};
  const auto a = ca::testing::scratch_dir("det-a");
  const auto b = ca::testing::scratch_dir("det-b");
  const std::vector<ca::ReportFormat> formats{ca::ReportFormat::Text, ca::ReportFormat::Csv, ca::ReportFormat::Json};
  ca::emit_report(ca::run_study(config), a.string(), formats);
  ca::emit_report(ca::run_study(config), b.string(), formats);
  for (const char* name : {"report.txt", "report.csv", "report.json"}) {
    const auto x = slurp((a / name).string());
    EXPECT_FALSE(x.empty());
    EXPECT_EQ(x, slurp((b / name).string())) << name;
  }
}
