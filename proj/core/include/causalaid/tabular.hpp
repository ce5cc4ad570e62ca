#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace causalaid {

class TableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ColumnKind { Numeric, Categorical, Date };

// One column of a Table. Numeric cells live in `numbers` (NaN marks a missing
// cell); categorical and date cells live in `labels` (empty marks missing).
// Dates are kept as text in one of YYYY, YYYY-MM or YYYY-MM-DD.
struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<double> numbers;
  std::vector<std::string> labels;
  bool per_capita = false;

  std::size_t size() const { return kind == ColumnKind::Numeric ? numbers.size() : labels.size(); }
  bool missing(std::size_t row) const;

  static Column numeric(std::string name, std::vector<double> values);
  static Column categorical(std::string name, std::vector<std::string> values);
  static Column date(std::string name, std::vector<std::string> values);

  friend bool operator==(const Column&, const Column&) = default;
};

// Immutable columnar table; every transformation returns a new Table.
class Table {
 public:
  Table() = default;
  // Rejects duplicate names and ragged columns.
  explicit Table(std::vector<Column> columns);

  std::size_t rows() const { return columns_.empty() ? 0 : columns_.front().size(); }
  std::size_t cols() const { return columns_.size(); }
  const std::vector<Column>& columns() const { return columns_; }
  std::vector<std::string> column_names() const;

  bool has_column(std::string_view name) const;
  const Column& column(std::string_view name) const;
  std::size_t column_index(std::string_view name) const;

  Table select_rows(std::span<const std::size_t> rows) const;
  Table with_column(Column column) const;  // appends or replaces by name
  Table rename(std::string_view from, std::string to) const;
  Table project(const std::vector<std::string>& names) const;
  // Rows whose categorical/date cell in `name` equals `value`.
  Table filter_equals(std::string_view name, std::string_view value) const;

  friend bool operator==(const Table&, const Table&) = default;

 private:
  std::vector<Column> columns_;
};

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
};

// Expected columns of a CSV file. Columns present in the file but absent
// from the schema are loaded as numeric when every non-empty cell parses as
// a number and as categorical otherwise.
struct CsvSchema {
  std::vector<ColumnSpec> columns;
};

Table read_csv(std::istream& in, const CsvSchema& schema, std::string_view origin = "<stream>");
Table load_csv(const std::string& path, const CsvSchema& schema);
void write_csv(const Table& table, std::ostream& out);
void save_csv(const Table& table, const std::string& path);

// Shortest decimal text that parses back to the same double; "" for NaN.
std::string format_number(double value);
// Full-string numeric parse; nullopt for non-numeric or non-finite text.
std::optional<double> parse_number(std::string_view text);

struct LoadSummary {
  std::size_t rows = 0;
  std::vector<std::pair<std::string, std::size_t>> missing_per_column;

  std::string to_text() const;
};
LoadSummary summarize(const Table& table);

// Listwise deletion over `columns`. `dropped` receives the count removed.
Table drop_missing(const Table& table, const std::vector<std::string>& columns,
                   std::size_t* dropped = nullptr);

enum class Period { Annual, Monthly };
enum class Aggregator { Mean, Sum, Last };

struct DateParts {
  int year = 0;
  int month = 0;  // 0 when absent
  int day = 0;    // 0 when absent
  auto operator<=>(const DateParts&) const = default;
};
std::optional<DateParts> parse_date(std::string_view text);
// "YYYY" for Annual, "YYYY-MM" for Monthly.
std::string period_bucket(const DateParts& date, Period period);

struct AggregateSpec {
  std::vector<std::string> keys;
  std::string date_column;  // empty: group by keys only
  Period period = Period::Annual;
  std::map<std::string, Aggregator> aggregators;
};

// One output row per distinct (keys, period bucket), ordered by keys then
// bucket. Aggregators skip missing cells; an all-missing group is missing.
// `Last` takes the latest non-missing value in date order.
Table aggregate(const Table& table, const AggregateSpec& spec);

// Replaces each listed column by value / population. Refuses columns that
// are already per-capita.
Table per_capita_normalize(const Table& table, const std::vector<std::string>& columns,
                           std::string_view population_column);

enum class JoinMode {
  Exact,  // match on keys and identical date bucket
  AsOf,   // match on keys and the latest right date <= left date
};

// Left join appending every non-key, non-date column of `right`. With an
// empty date_column, rows match on keys alone. Unmatched cells are missing,
// or `fill` when given.
Table left_join(const Table& left, const Table& right, const std::vector<std::string>& keys,
                const std::string& date_column, JoinMode mode,
                std::optional<double> fill = std::nullopt);

// Linear interpolation between closest ranks: position (n - 1) * p / 100 in
// the sorted values. p in [0, 100].
double percentile(std::span<const double> values, double p);

// Analysis-ready view: binary treatment, outcome, covariate block.
struct FrameInfo {
  double threshold_percentile = 0.0;
  double threshold_value = 0.0;
  std::size_t excluded_count = 0;   // dropped by the exclusion band
  std::size_t dropped_missing = 0;  // dropped by listwise deletion
};

class StudyFrame {
 public:
  using Info = FrameInfo;

  // Enforces: T in {0,1}, no missing values, both arms with >= 2 rows, and
  // Y in [0,1] when outcome_is_fraction.
  static StudyFrame create(Eigen::VectorXd treatment, Eigen::VectorXd outcome,
                           Eigen::MatrixXd covariates, std::vector<std::string> covariate_names,
                           Info info = {}, bool outcome_is_fraction = false);

  std::size_t rows() const { return static_cast<std::size_t>(outcome_.size()); }
  const Eigen::VectorXd& treatment() const { return treatment_; }
  const Eigen::VectorXd& outcome() const { return outcome_; }
  const Eigen::MatrixXd& covariates() const { return covariates_; }
  const std::vector<std::string>& covariate_names() const { return covariate_names_; }
  std::size_t n_treated() const { return n_treated_; }
  std::size_t n_control() const { return rows() - n_treated_; }
  const Info& info() const { return info_; }
  bool outcome_is_fraction() const { return outcome_is_fraction_; }

  // Rows may repeat (bootstrap). Throws TableError if an arm drops below 2.
  StudyFrame subset(std::span<const std::size_t> rows) const;
  StudyFrame with_treatment(Eigen::VectorXd treatment) const;
  StudyFrame with_outcome(Eigen::VectorXd outcome) const;
  StudyFrame with_covariate(std::string name, const Eigen::VectorXd& values) const;

 private:
  StudyFrame() = default;

  Eigen::VectorXd treatment_;
  Eigen::VectorXd outcome_;
  Eigen::MatrixXd covariates_;
  std::vector<std::string> covariate_names_;
  std::size_t n_treated_ = 0;
  Info info_;
  bool outcome_is_fraction_ = false;
};

// Counts each arm of a 0/1 treatment vector; {treated, control}.
std::pair<std::size_t, std::size_t> arm_sizes(const Eigen::VectorXd& treatment);

struct BinarizeSpec {
  std::string treatment_column;
  std::string outcome_column;
  std::vector<std::string> covariate_columns;
  double percentile = 50.0;
  double band = 5.0;  // percentile points on each side of the threshold
  bool outcome_is_fraction = true;
};

// Listwise deletion over {T, Y, Z}; threshold t* = percentile of the
// remaining treatment values. With band == 0 rows with value >= t* are
// treated. With band > 0 rows whose value lies in
// [percentile(p - band), percentile(p + band)] are excluded, rows above the
// upper edge are treated and rows below the lower edge are controls.
StudyFrame binarize_treatment(const Table& table, const BinarizeSpec& spec);

// Ingestion schemas for the harmonized study variables (one CSV per source).
enum class Resolution { Static, Seasonal, Monthly, Weekly, Daily, Event };

struct SourceSchema {
  std::string name;          // schema name used in study configs
  std::string variable;      // default DAG variable the value column feeds
  std::string value_column;  // numeric column carrying the measurement
  bool district_level = true;
  bool has_date = true;
  Resolution resolution = Resolution::Monthly;
  Aggregator aggregator = Aggregator::Mean;
  bool zero_when_absent = false;  // event counts: no record means zero

  CsvSchema csv_schema() const;
};

const std::vector<SourceSchema>& source_schemas();
const SourceSchema& source_schema(std::string_view name);

std::string_view to_string(Period period);
std::string_view to_string(Aggregator aggregator);
Period parse_period(std::string_view text);

}  // namespace causalaid
