#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "causalaid/estimators.hpp"
#include "causalaid/graph.hpp"
#include "causalaid/refute.hpp"
#include "causalaid/tabular.hpp"

namespace causalaid {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SourceConfig {
  std::string schema;    // a source_schemas() name, or "panel"
  std::string path;      // resolved against the config file's directory
  std::string variable;  // DAG variable; defaults to the schema's variable
};

struct StudyConfig {
  std::string dag_path;
  std::vector<SourceConfig> sources;
  std::string area = "country";  // "country" or a district name
  std::string area_label;        // report label; defaults from area
  Period period = Period::Annual;
  std::vector<double> thresholds{35.0, 50.0, 75.0};
  double band = 5.0;
  std::vector<Method> methods{std::begin(kAllMethods), std::end(kAllMethods)};
  int bootstrap = 1000;
  double alpha = 0.05;
  int trials = 100;
  double subset_fraction = 0.2;
  std::optional<std::uint64_t> seed;
  std::string output_dir = "out";
  std::vector<std::string> normalize;  // variables divided by population
  std::string population_variable = "Population";
  std::optional<bool> outcome_is_fraction;  // default: true for the gam schema
  std::optional<std::vector<std::string>> adjustment;  // default: parents of T
  EstimatorSpec estimator;  // method field ignored; k, clip and forest used

  std::string effective_area_label() const;
  // Throws ConfigError naming the first violated rule.
  void validate() const;
};

StudyConfig parse_study_config(const std::string& yaml_text, const std::string& base_dir = ".");
StudyConfig load_study_config(const std::string& path);

// Loads, normalizes per capita (before aggregation), aggregates to the
// configured period and joins every source onto the outcome's
// (district, period) grid, restricted to the configured area.
Table harmonize(const StudyConfig& config, const CausalDag& dag);

struct RefutationCell {
  RefutationTest test = RefutationTest::Placebo;
  std::optional<RefutationReport> report;
  std::string error;
};

struct ReportRow {
  std::string area;
  double threshold = 0.0;
  Method method = Method::LR;
  std::optional<EffectEstimate> estimate;  // empty when inestimable
  std::string error;
  std::array<RefutationCell, 3> refutations{};
  double threshold_value = 0.0;
  std::size_t n_used = 0;
  std::size_t n_treated = 0;
  std::size_t n_control = 0;
  std::size_t excluded = 0;

  bool complete() const;
};

struct ReportMetadata {
  std::uint64_t seed = 0;
  std::string area;
  std::string period;
  std::string treatment;
  std::string outcome;
  std::vector<std::string> adjustment_set;
  std::size_t harmonized_rows = 0;
  std::size_t complete_rows = 0;  // after listwise deletion over T, Y, Z
  std::size_t dropped_missing = 0;
  int bootstrap = 0;
  double alpha = 0.0;
  int trials = 0;
  double subset_fraction = 0.0;
  double band = 0.0;
};

struct StudyReport {
  ReportMetadata metadata;
  std::vector<ReportRow> rows;  // threshold-major, methods in config order

  bool complete() const;
};

// Runs the (threshold x method) grid. A failing cell is recorded in its row
// and does not stop the study. Each cell draws from
// derive_seed(seed, "cell/<threshold>/<method>").
StudyReport run_study(const StudyConfig& config);
// Same grid on an already harmonized table.
StudyReport run_study(const StudyConfig& config, const CausalDag& dag, const Table& harmonized);

}  // namespace causalaid
