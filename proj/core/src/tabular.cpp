#include "causalaid/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

namespace causalaid {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_csv_record(std::istream& in, bool& ok) {
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  ok = false;
  for (int ch; (ch = in.get()) != EOF;) {
    any = true;
    char c = static_cast<char>(ch);
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      ok = true;
      break;
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (any) {
    fields.push_back(std::move(field));
    ok = true;
  }
  return fields;
}

std::string quote_csv(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

const std::string& key_label(const Column& c, std::size_t row, std::string& scratch) {
  if (c.kind == ColumnKind::Numeric) {
    scratch = format_number(c.numbers[row]);
    return scratch;
  }
  return c.labels[row];
}

Column empty_like(const Column& c) {
  Column out;
  out.name = c.name;
  out.kind = c.kind;
  out.per_capita = c.per_capita;
  return out;
}

void push_cell(Column& dst, const Column& src, std::size_t row) {
  if (src.kind == ColumnKind::Numeric)
    dst.numbers.push_back(src.numbers[row]);
  else
    dst.labels.push_back(src.labels[row]);
}

void push_missing(Column& dst) {
  if (dst.kind == ColumnKind::Numeric)
    dst.numbers.push_back(kMissing);
  else
    dst.labels.emplace_back();
}

DateParts require_date(const Column& c, std::size_t row) {
  auto parsed = parse_date(c.labels[row]);
  if (!parsed)
    throw TableError(fmt::format("column '{}' row {}: missing or invalid date '{}'", c.name,
                                 row + 1, c.labels[row]));
  return *parsed;
}

}  // namespace

bool Column::missing(std::size_t row) const {
  return kind == ColumnKind::Numeric ? std::isnan(numbers[row]) : labels[row].empty();
}

Column Column::numeric(std::string name, std::vector<double> values) {
  Column c;
  c.name = std::move(name);
  c.kind = ColumnKind::Numeric;
  for (double& v : values)
    if (!std::isfinite(v)) v = kMissing;
  c.numbers = std::move(values);
  return c;
}

Column Column::categorical(std::string name, std::vector<std::string> values) {
  Column c;
  c.name = std::move(name);
  c.kind = ColumnKind::Categorical;
  c.labels = std::move(values);
  return c;
}

Column Column::date(std::string name, std::vector<std::string> values) {
  Column c;
  c.name = std::move(name);
  c.kind = ColumnKind::Date;
  c.labels = std::move(values);
  return c;
}

Table::Table(std::vector<Column> columns) : columns_(std::move(columns)) {
  std::set<std::string_view> names;
  for (const auto& c : columns_) {
    if (c.name.empty()) throw TableError("empty column name");
    if (!names.insert(c.name).second) throw TableError(fmt::format("duplicate column '{}'", c.name));
    if (c.size() != columns_.front().size())
      throw TableError(fmt::format("column '{}' has {} cells, expected {}", c.name, c.size(),
                                   columns_.front().size()));
  }
}

std::vector<std::string> Table::column_names() const {
  std::vector<std::string> names;
  for (const auto& c : columns_) names.push_back(c.name);
  return names;
}

bool Table::has_column(std::string_view name) const {
  return std::any_of(columns_.begin(), columns_.end(), [&](const Column& c) { return c.name == name; });
}

std::size_t Table::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].name == name) return i;
  throw TableError(fmt::format("unknown column '{}'", name));
}

const Column& Table::column(std::string_view name) const { return columns_[column_index(name)]; }

Table Table::select_rows(std::span<const std::size_t> rows) const {
  std::vector<Column> out;
  for (const auto& c : columns_) {
    Column d = empty_like(c);
    for (std::size_t r : rows) push_cell(d, c, r);
    out.push_back(std::move(d));
  }
  return Table(std::move(out));
}

Table Table::with_column(Column column) const {
  if (!columns_.empty() && column.size() != rows())
    throw TableError(fmt::format("column '{}' has {} cells, table has {} rows", column.name,
                                 column.size(), rows()));
  std::vector<Column> out = columns_;
  for (auto& c : out) {
    if (c.name == column.name) {
      c = std::move(column);
      return Table(std::move(out));
    }
  }
  out.push_back(std::move(column));
  return Table(std::move(out));
}

Table Table::rename(std::string_view from, std::string to) const {
  std::vector<Column> out = columns_;
  out[column_index(from)].name = std::move(to);
  return Table(std::move(out));
}

Table Table::project(const std::vector<std::string>& names) const {
  std::vector<Column> out;
  for (const auto& n : names) out.push_back(column(n));
  return Table(std::move(out));
}

Table Table::filter_equals(std::string_view name, std::string_view value) const {
  const Column& c = column(name);
  if (c.kind == ColumnKind::Numeric)
    throw TableError(fmt::format("filter on numeric column '{}' is not supported", name));
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < rows(); ++r)
    if (c.labels[r] == value) keep.push_back(r);
  return select_rows(keep);
}

std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value))
    return std::nullopt;
  return value;
}

std::string format_number(double value) {
  if (std::isnan(value)) return {};
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::optional<DateParts> parse_date(std::string_view text) {
  text = trim(text);
  auto digits = [](std::string_view s, int& out) {
    if (s.empty()) return false;
    for (char c : s)
      if (c < '0' || c > '9') return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc();
  };
  DateParts d;
  if (text.size() != 4 && text.size() != 7 && text.size() != 10) return std::nullopt;
  if (!digits(text.substr(0, 4), d.year)) return std::nullopt;
  if (text.size() >= 7) {
    if (text[4] != '-' || !digits(text.substr(5, 2), d.month) || d.month < 1 || d.month > 12)
      return std::nullopt;
  }
  if (text.size() == 10) {
    if (text[7] != '-' || !digits(text.substr(8, 2), d.day)) return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{d.year}, std::chrono::month(static_cast<unsigned>(d.month)),
                                          std::chrono::day(static_cast<unsigned>(d.day))};
    if (!ymd.ok()) return std::nullopt;
  }
  return d;
}

std::string period_bucket(const DateParts& date, Period period) {
  if (period == Period::Annual) return fmt::format("{:04d}", date.year);
  if (date.month == 0) throw TableError(fmt::format("date {:04d} has no month for monthly bucketing", date.year));
  return fmt::format("{:04d}-{:02d}", date.year, date.month);
}

Table read_csv(std::istream& in, const CsvSchema& schema, std::string_view origin) {
  bool ok = false;
  std::vector<std::string> header = split_csv_record(in, ok);
  if (!ok || header.empty() || (header.size() == 1 && trim(header[0]).empty()))
    throw TableError(fmt::format("{}: empty file", origin));
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);
  for (auto& h : header) h = std::string(trim(h));

  std::set<std::string_view> seen;
  for (const auto& h : header)
    if (!seen.insert(h).second) throw TableError(fmt::format("{}: duplicate header '{}'", origin, h));
  for (const auto& spec : schema.columns)
    if (!seen.contains(spec.name))
      throw TableError(fmt::format("{}: missing required column '{}'", origin, spec.name));

  std::vector<std::vector<std::string>> cells(header.size());
  std::size_t line = 1;
  while (in.peek() != EOF) {
    std::vector<std::string> record = split_csv_record(in, ok);
    ++line;
    if (!ok) break;
    if (record.size() == 1 && trim(record[0]).empty()) continue;
    if (record.size() != header.size())
      throw TableError(fmt::format("{}:{}: expected {} fields, found {}", origin, line,
                                   header.size(), record.size()));
    for (std::size_t i = 0; i < record.size(); ++i) cells[i].push_back(std::move(record[i]));
  }

  std::vector<Column> columns;
  for (std::size_t i = 0; i < header.size(); ++i) {
    auto spec = std::find_if(schema.columns.begin(), schema.columns.end(),
                             [&](const ColumnSpec& s) { return s.name == header[i]; });
    ColumnKind kind;
    if (spec != schema.columns.end()) {
      kind = spec->kind;
    } else {
      bool numeric = std::all_of(cells[i].begin(), cells[i].end(), [](const std::string& s) {
        return trim(s).empty() || parse_number(s).has_value();
      });
      kind = numeric ? ColumnKind::Numeric : ColumnKind::Categorical;
    }

    if (kind == ColumnKind::Numeric) {
      std::vector<double> values;
      values.reserve(cells[i].size());
      for (const auto& s : cells[i]) values.push_back(parse_number(s).value_or(kMissing));
      columns.push_back(Column::numeric(header[i], std::move(values)));
    } else {
      std::vector<std::string> values;
      values.reserve(cells[i].size());
      for (auto& s : cells[i]) {
        std::string v(trim(s));
        if (kind == ColumnKind::Date && !v.empty() && !parse_date(v))
          throw TableError(fmt::format("{}: column '{}' has invalid date '{}'", origin, header[i], v));
        values.push_back(std::move(v));
      }
      columns.push_back(kind == ColumnKind::Date ? Column::date(header[i], std::move(values))
                                                 : Column::categorical(header[i], std::move(values)));
    }
  }
  return Table(std::move(columns));
}

Table load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TableError(fmt::format("cannot open '{}'", path));
  return read_csv(in, schema, path);
}

void write_csv(const Table& table, std::ostream& out) {
  const auto& cols = table.columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << quote_csv(cols[i].name);
  out << '\n';
  std::string scratch;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i) out << ',';
      out << quote_csv(key_label(cols[i], r, scratch));
    }
    out << '\n';
  }
}

void save_csv(const Table& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TableError(fmt::format("cannot write '{}'", path));
  write_csv(table, out);
}

std::string LoadSummary::to_text() const {
  std::string out = fmt::format("rows: {}\n", rows);
  for (const auto& [name, missing] : missing_per_column)
    out += fmt::format("missing {}: {}\n", name, missing);
  return out;
}

LoadSummary summarize(const Table& table) {
  LoadSummary s;
  s.rows = table.rows();
  for (const auto& c : table.columns()) {
    std::size_t missing = 0;
    for (std::size_t r = 0; r < c.size(); ++r) missing += c.missing(r);
    s.missing_per_column.emplace_back(c.name, missing);
  }
  return s;
}

Table drop_missing(const Table& table, const std::vector<std::string>& columns, std::size_t* dropped) {
  std::vector<const Column*> checked;
  for (const auto& n : columns) checked.push_back(&table.column(n));
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    if (std::none_of(checked.begin(), checked.end(), [&](const Column* c) { return c->missing(r); }))
      keep.push_back(r);
  }
  if (dropped) *dropped = table.rows() - keep.size();
  return table.select_rows(keep);
}

Table aggregate(const Table& table, const AggregateSpec& spec) {
  std::vector<const Column*> keys;
  for (const auto& k : spec.keys) keys.push_back(&table.column(k));
  const Column* date = spec.date_column.empty() ? nullptr : &table.column(spec.date_column);
  if (date && date->kind != ColumnKind::Date)
    throw TableError(fmt::format("column '{}' is not a date column", spec.date_column));

  for (const auto& [name, agg] : spec.aggregators) {
    const Column& c = table.column(name);
    if (agg != Aggregator::Last && c.kind != ColumnKind::Numeric)
      throw TableError(fmt::format("column '{}' is not numeric; cannot apply {}", name, to_string(agg)));
  }
  std::vector<const Column*> values;
  for (const auto& c : table.columns()) {
    bool is_key = std::find(spec.keys.begin(), spec.keys.end(), c.name) != spec.keys.end();
    if (is_key || (date && c.name == date->name)) continue;
    if (!spec.aggregators.contains(c.name))
      throw TableError(fmt::format("column '{}' has no aggregator", c.name));
    values.push_back(&c);
  }

  // Group rows by (key labels..., bucket); std::map keeps output ordered.
  std::map<std::vector<std::string>, std::vector<std::size_t>> groups;
  std::vector<DateParts> row_dates(table.rows());
  std::string scratch;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    std::vector<std::string> group_key;
    for (const Column* k : keys) group_key.push_back(key_label(*k, r, scratch));
    if (date) {
      row_dates[r] = require_date(*date, r);
      group_key.push_back(period_bucket(row_dates[r], spec.period));
    }
    groups[std::move(group_key)].push_back(r);
  }

  std::vector<Column> out;
  for (const Column* k : keys) out.push_back(empty_like(*k));
  if (date) out.push_back(empty_like(*date));
  for (const Column* v : values) out.push_back(empty_like(*v));

  for (auto& [group_key, rows] : groups) {
    std::stable_sort(rows.begin(), rows.end(),
                     [&](std::size_t a, std::size_t b) { return row_dates[a] < row_dates[b]; });
    std::size_t slot = 0;
    for (const Column* k : keys) push_cell(out[slot++], *k, rows.front());
    if (date) out[slot++].labels.push_back(group_key.back());
    for (const Column* v : values) {
      Column& dst = out[slot++];
      const Aggregator agg = spec.aggregators.at(v->name);
      if (agg == Aggregator::Last) {
        auto last = std::find_if(rows.rbegin(), rows.rend(), [&](std::size_t r) { return !v->missing(r); });
        if (last == rows.rend())
          push_missing(dst);
        else
          push_cell(dst, *v, *last);
        continue;
      }
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t r : rows) {
        if (!v->missing(r)) {
          sum += v->numbers[r];
          ++count;
        }
      }
      if (count == 0)
        dst.numbers.push_back(kMissing);
      else
        dst.numbers.push_back(agg == Aggregator::Sum ? sum : sum / static_cast<double>(count));
    }
  }
  return Table(std::move(out));
}

Table per_capita_normalize(const Table& table, const std::vector<std::string>& columns,
                           std::string_view population_column) {
  const Column& pop = table.column(population_column);
  if (pop.kind != ColumnKind::Numeric)
    throw TableError(fmt::format("population column '{}' is not numeric", population_column));
  Table out = table;
  for (const auto& name : columns) {
    const Column& c = table.column(name);
    if (c.kind != ColumnKind::Numeric)
      throw TableError(fmt::format("column '{}' is not numeric", name));
    if (c.per_capita) throw TableError(fmt::format("column '{}' is already per-capita", name));
    if (name == population_column) throw TableError("cannot normalize the population column by itself");
    Column n = c;
    n.per_capita = true;
    for (std::size_t r = 0; r < c.size(); ++r) {
      if (c.missing(r)) continue;
      if (pop.missing(r))
        throw TableError(fmt::format("row {}: '{}' present but population missing", r + 1, name));
      if (pop.numbers[r] <= 0.0)
        throw TableError(fmt::format("row {}: non-positive population {}", r + 1, pop.numbers[r]));
      n.numbers[r] = c.numbers[r] / pop.numbers[r];
    }
    out = out.with_column(std::move(n));
  }
  return out;
}

Table left_join(const Table& left, const Table& right, const std::vector<std::string>& keys,
                const std::string& date_column, JoinMode mode, std::optional<double> fill) {
  const bool dated = !date_column.empty();
  std::vector<const Column*> lkeys, rkeys;
  for (const auto& k : keys) {
    lkeys.push_back(&left.column(k));
    rkeys.push_back(&right.column(k));
  }
  const Column* ldate = dated ? &left.column(date_column) : nullptr;
  const Column* rdate = dated ? &right.column(date_column) : nullptr;

  std::vector<const Column*> appended;
  for (const auto& c : right.columns()) {
    if (std::find(keys.begin(), keys.end(), c.name) != keys.end()) continue;
    if (dated && c.name == date_column) continue;
    if (left.has_column(c.name))
      throw TableError(fmt::format("join would duplicate column '{}'", c.name));
    appended.push_back(&c);
  }

  std::string scratch;
  auto key_of = [&](const std::vector<const Column*>& cols, std::size_t r) {
    std::vector<std::string> k;
    for (const Column* c : cols) k.push_back(key_label(*c, r, scratch));
    return k;
  };

  // keys -> right rows sorted by date
  std::map<std::vector<std::string>, std::vector<std::pair<DateParts, std::size_t>>> index;
  for (std::size_t r = 0; r < right.rows(); ++r) {
    DateParts d = dated ? require_date(*rdate, r) : DateParts{};
    index[key_of(rkeys, r)].emplace_back(d, r);
  }
  for (auto& [k, entries] : index) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < entries.size(); ++i) {
      if (entries[i].first == entries[i - 1].first)
        throw TableError("join: right table has duplicate rows for the same keys and date");
    }
  }

  std::vector<Column> extra;
  for (const Column* c : appended) extra.push_back(empty_like(*c));
  for (std::size_t r = 0; r < left.rows(); ++r) {
    std::optional<std::size_t> match;
    auto it = index.find(key_of(lkeys, r));
    if (it != index.end()) {
      const auto& entries = it->second;
      if (!dated) {
        if (entries.size() > 1) throw TableError("join: right table has duplicate keys");
        match = entries.front().second;
      } else {
        DateParts target = require_date(*ldate, r);
        if (mode == JoinMode::Exact) {
          for (const auto& [d, row] : entries)
            if (d == target) match = row;
        } else {
          for (const auto& [d, row] : entries) {
            if (d <= target) match = row;
          }
        }
      }
    }
    for (std::size_t i = 0; i < appended.size(); ++i) {
      if (match) {
        push_cell(extra[i], *appended[i], *match);
      } else if (fill && appended[i]->kind == ColumnKind::Numeric) {
        extra[i].numbers.push_back(*fill);
      } else {
        push_missing(extra[i]);
      }
    }
  }

  std::vector<Column> out = left.columns();
  for (auto& c : extra) out.push_back(std::move(c));
  return Table(std::move(out));
}

double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw TableError("percentile of an empty set");
  if (!(p >= 0.0 && p <= 100.0)) throw TableError(fmt::format("percentile {} outside [0, 100]", p));
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double position = static_cast<double>(sorted.size() - 1) * p / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(position));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = position - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::pair<std::size_t, std::size_t> arm_sizes(const Eigen::VectorXd& treatment) {
  std::size_t treated = 0;
  for (Eigen::Index i = 0; i < treatment.size(); ++i) treated += treatment[i] == 1.0;
  return {treated, static_cast<std::size_t>(treatment.size()) - treated};
}

StudyFrame StudyFrame::create(Eigen::VectorXd treatment, Eigen::VectorXd outcome,
                              Eigen::MatrixXd covariates, std::vector<std::string> covariate_names,
                              Info info, bool outcome_is_fraction) {
  const Eigen::Index n = outcome.size();
  if (treatment.size() != n || covariates.rows() != n)
    throw TableError(fmt::format("frame shape mismatch: T {} / Y {} / Z {} rows", treatment.size(), n,
                                 covariates.rows()));
  if (static_cast<std::size_t>(covariates.cols()) != covariate_names.size())
    throw TableError("covariate names do not match covariate columns");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (treatment[i] != 0.0 && treatment[i] != 1.0)
      throw TableError(fmt::format("row {}: treatment {} is not binary", i + 1, treatment[i]));
    if (!std::isfinite(outcome[i])) throw TableError(fmt::format("row {}: missing outcome", i + 1));
    if (outcome_is_fraction && (outcome[i] < 0.0 || outcome[i] > 1.0))
      throw TableError(fmt::format("row {}: outcome {} outside [0, 1]", i + 1, outcome[i]));
  }
  if (!covariates.allFinite()) throw TableError("missing covariate values");

  StudyFrame f;
  auto [treated, control] = arm_sizes(treatment);
  if (treated < 2 || control < 2)
    throw TableError(fmt::format("need at least 2 rows per arm (treated {}, control {})", treated, control));
  f.treatment_ = std::move(treatment);
  f.outcome_ = std::move(outcome);
  f.covariates_ = std::move(covariates);
  f.covariate_names_ = std::move(covariate_names);
  f.n_treated_ = treated;
  f.info_ = info;
  f.outcome_is_fraction_ = outcome_is_fraction;
  return f;
}

StudyFrame StudyFrame::subset(std::span<const std::size_t> rows) const {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::VectorXd t(n), y(n);
  Eigen::MatrixXd z(n, covariates_.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
    t[i] = treatment_[r];
    y[i] = outcome_[r];
    z.row(i) = covariates_.row(r);
  }
  StudyFrame f;
  auto [treated, control] = arm_sizes(t);
  if (treated < 2 || control < 2)
    throw TableError(fmt::format("need at least 2 rows per arm (treated {}, control {})", treated, control));
  f.treatment_ = std::move(t);
  f.outcome_ = std::move(y);
  f.covariates_ = std::move(z);
  f.covariate_names_ = covariate_names_;
  f.n_treated_ = treated;
  f.info_ = info_;
  f.outcome_is_fraction_ = outcome_is_fraction_;
  return f;
}

StudyFrame StudyFrame::with_treatment(Eigen::VectorXd treatment) const {
  return create(std::move(treatment), outcome_, covariates_, covariate_names_, info_, outcome_is_fraction_);
}

StudyFrame StudyFrame::with_outcome(Eigen::VectorXd outcome) const {
  return create(treatment_, std::move(outcome), covariates_, covariate_names_, info_, outcome_is_fraction_);
}

StudyFrame StudyFrame::with_covariate(std::string name, const Eigen::VectorXd& values) const {
  if (values.size() != outcome_.size()) throw TableError("covariate length mismatch");
  Eigen::MatrixXd z(covariates_.rows(), covariates_.cols() + 1);
  z.leftCols(covariates_.cols()) = covariates_;
  z.col(covariates_.cols()) = values;
  auto names = covariate_names_;
  names.push_back(std::move(name));
  return create(treatment_, outcome_, std::move(z), std::move(names), info_, outcome_is_fraction_);
}

StudyFrame binarize_treatment(const Table& table, const BinarizeSpec& spec) {
  if (!(spec.percentile > 0.0 && spec.percentile < 100.0))
    throw TableError(fmt::format("threshold percentile {} outside (0, 100)", spec.percentile));
  if (!(spec.band >= 0.0)) throw TableError(fmt::format("exclusion band {} is negative", spec.band));
  if (table.column(spec.treatment_column).kind != ColumnKind::Numeric)
    throw TableError(fmt::format("treatment column '{}' is not numeric", spec.treatment_column));

  std::vector<std::string> needed{spec.treatment_column, spec.outcome_column};
  needed.insert(needed.end(), spec.covariate_columns.begin(), spec.covariate_columns.end());
  for (const auto& n : needed) {
    if (table.column(n).kind != ColumnKind::Numeric)
      throw TableError(fmt::format("column '{}' is not numeric", n));
  }
  std::size_t dropped = 0;
  const Table complete = drop_missing(table, needed, &dropped);
  const auto& values = complete.column(spec.treatment_column).numbers;
  if (values.empty()) throw TableError("no complete rows to binarize");
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); }))
    throw TableError("treatment values are all identical; threshold is degenerate");

  StudyFrame::Info info;
  info.threshold_percentile = spec.percentile;
  info.threshold_value = percentile(values, spec.percentile);
  info.dropped_missing = dropped;
  const double lower = percentile(values, std::max(0.0, spec.percentile - spec.band));
  const double upper = percentile(values, std::min(100.0, spec.percentile + spec.band));

  std::vector<std::size_t> kept;
  std::vector<double> arm;
  for (std::size_t r = 0; r < values.size(); ++r) {
    const double v = values[r];
    if (spec.band == 0.0) {
      kept.push_back(r);
      arm.push_back(v >= info.threshold_value ? 1.0 : 0.0);
    } else if (v > upper) {
      kept.push_back(r);
      arm.push_back(1.0);
    } else if (v < lower) {
      kept.push_back(r);
      arm.push_back(0.0);
    } else {
      ++info.excluded_count;
    }
  }

  const auto n = static_cast<Eigen::Index>(kept.size());
  Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(arm.data(), n);
  Eigen::VectorXd y(n);
  Eigen::MatrixXd z(n, static_cast<Eigen::Index>(spec.covariate_columns.size()));
  const auto& ys = complete.column(spec.outcome_column).numbers;
  for (Eigen::Index i = 0; i < n; ++i) y[i] = ys[kept[static_cast<std::size_t>(i)]];
  for (std::size_t j = 0; j < spec.covariate_columns.size(); ++j) {
    const auto& zs = complete.column(spec.covariate_columns[j]).numbers;
    for (Eigen::Index i = 0; i < n; ++i) z(i, static_cast<Eigen::Index>(j)) = zs[kept[static_cast<std::size_t>(i)]];
  }
  return StudyFrame::create(std::move(t), std::move(y), std::move(z), spec.covariate_columns, info,
                            spec.outcome_is_fraction);
}

CsvSchema SourceSchema::csv_schema() const {
  CsvSchema s;
  if (district_level) s.columns.push_back({"district", ColumnKind::Categorical});
  if (has_date) s.columns.push_back({"date", ColumnKind::Date});
  s.columns.push_back({value_column, ColumnKind::Numeric});
  return s;
}

const std::vector<SourceSchema>& source_schemas() {
  static const std::vector<SourceSchema> schemas = {
      {"enso", "ENSO", "enso", false, true, Resolution::Daily, Aggregator::Mean, false},
      {"spi", "SPI", "spi", true, true, Resolution::Monthly, Aggregator::Mean, false},
      {"fatalities", "Fatalities", "fatalities", true, true, Resolution::Event, Aggregator::Sum, true},
      {"market_prices", "MarketPrices", "price", true, true, Resolution::Monthly, Aggregator::Mean, false},
      {"sorghum", "SorghumProduction", "production", true, true, Resolution::Seasonal, Aggregator::Sum, false},
      {"displacement", "Displacement", "displaced", true, true, Resolution::Weekly, Aggregator::Sum, true},
      {"population", "Population", "population", true, false, Resolution::Static, Aggregator::Last, false},
      {"cash", "Cash", "recipients", true, true, Resolution::Monthly, Aggregator::Mean, false},
      {"gam", "GAM", "gam", true, true, Resolution::Monthly, Aggregator::Mean, false},
  };
  return schemas;
}

const SourceSchema& source_schema(std::string_view name) {
  for (const auto& s : source_schemas())
    if (s.name == name) return s;
  throw TableError(fmt::format("unknown source schema '{}'", name));
}

std::string_view to_string(Period period) { return period == Period::Annual ? "annual" : "monthly"; }

std::string_view to_string(Aggregator aggregator) {
  switch (aggregator) {
    case Aggregator::Mean: return "mean";
    case Aggregator::Sum: return "sum";
    case Aggregator::Last: return "last";
  }
  return "?";
}

Period parse_period(std::string_view text) {
  if (text == "annual" || text == "Annual") return Period::Annual;
  if (text == "monthly" || text == "Monthly") return Period::Monthly;
  throw TableError(fmt::format("unknown period '{}'", text));
}

}  // namespace causalaid
