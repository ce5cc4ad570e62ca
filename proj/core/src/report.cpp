#include "causalaid/report.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace causalaid {

namespace {

using nlohmann::json;

constexpr std::string_view kTestPrefixes[] = {"placebo", "rcc", "rsr"};

std::string status_of(const ReportRow& row) {
  if (!row.estimate) return "inestimable";
  return row.complete() ? "ok" : "partial";
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char ch : text) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else {
      fields.back() += ch;
    }
  }
  if (quoted) throw ReportError("unterminated quote in report CSV");
  return fields;
}

std::string num(double v) { return format_number(v); }

double to_double(const std::string& text, std::string_view what) {
  auto v = parse_number(text);
  if (!v) throw ReportError(fmt::format("report field '{}' is not a number: '{}'", what, text));
  return *v;
}

std::size_t to_size(const std::string& text, std::string_view what) {
  return static_cast<std::size_t>(to_double(text, what));
}

Verdict parse_verdict(std::string_view text) {
  if (text == "pass") return Verdict::Pass;
  if (text == "fail") return Verdict::Fail;
  throw ReportError(fmt::format("unknown verdict '{}'", text));
}

std::vector<std::string> csv_columns() {
  std::vector<std::string> cols = {"area",      "threshold",       "method", "status",    "ate",
                                   "ci_low",    "ci_high",         "p_value", "std_error", "replicates",
                                   "draws",     "threshold_value", "n_used", "n_treated", "n_control",
                                   "excluded",  "error"};
  for (auto prefix : kTestPrefixes)
    for (auto field : {"effect", "sd", "p_value", "trials", "verdict", "error"})
      cols.push_back(fmt::format("{}_{}", prefix, field));
  return cols;
}

std::vector<std::pair<std::string, std::string>> metadata_pairs(const ReportMetadata& m) {
  std::string adjustment;
  for (std::size_t i = 0; i < m.adjustment_set.size(); ++i)
    adjustment += (i ? ";" : "") + m.adjustment_set[i];
  return {{"seed", std::to_string(m.seed)},
          {"area", m.area},
          {"period", m.period},
          {"treatment", m.treatment},
          {"outcome", m.outcome},
          {"adjustment_set", adjustment},
          {"harmonized_rows", std::to_string(m.harmonized_rows)},
          {"complete_rows", std::to_string(m.complete_rows)},
          {"dropped_missing", std::to_string(m.dropped_missing)},
          {"bootstrap", std::to_string(m.bootstrap)},
          {"alpha", num(m.alpha)},
          {"trials", std::to_string(m.trials)},
          {"subset_fraction", num(m.subset_fraction)},
          {"band", num(m.band)}};
}

void set_metadata(ReportMetadata& m, const std::string& key, const std::string& value) {
  if (key == "seed") m.seed = std::stoull(value);
  else if (key == "area") m.area = value;
  else if (key == "period") m.period = value;
  else if (key == "treatment") m.treatment = value;
  else if (key == "outcome") m.outcome = value;
  else if (key == "adjustment_set") {
    m.adjustment_set.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ';'))
      if (!item.empty()) m.adjustment_set.push_back(item);
  } else if (key == "harmonized_rows") m.harmonized_rows = to_size(value, key);
  else if (key == "complete_rows") m.complete_rows = to_size(value, key);
  else if (key == "dropped_missing") m.dropped_missing = to_size(value, key);
  else if (key == "bootstrap") m.bootstrap = static_cast<int>(to_double(value, key));
  else if (key == "alpha") m.alpha = to_double(value, key);
  else if (key == "trials") m.trials = static_cast<int>(to_double(value, key));
  else if (key == "subset_fraction") m.subset_fraction = to_double(value, key);
  else if (key == "band") m.band = to_double(value, key);
  else throw ReportError(fmt::format("unknown report metadata key '{}'", key));
}

std::string scaled(double v) { return fmt::format("{:.3f}", v * 1e4); }

std::string p_cell(const RefutationCell& c) {
  if (!c.report) return "-";
  return fmt::format("{:.3f}{}", c.report->p_value, c.report->verdict == Verdict::Fail ? "!" : "");
}

}  // namespace

std::string_view to_string(ReportFormat format) {
  switch (format) {
    case ReportFormat::Text: return "text";
    case ReportFormat::Csv: return "csv";
    case ReportFormat::Json: return "json";
  }
  return "?";
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "text" || text == "txt") return ReportFormat::Text;
  if (text == "csv") return ReportFormat::Csv;
  if (text == "json") return ReportFormat::Json;
  throw ReportError(fmt::format("unknown report format '{}' (expected text, csv or json)", text));
}

std::string render_text(const StudyReport& report) {
  const auto& m = report.metadata;
  std::string out;
  out += fmt::format("Effect of {} on {} ({}, {}); ATE and Effect* in units of 1e-4\n\n", m.treatment,
                     m.outcome, m.area, m.period);
  const std::string ci_label = fmt::format("{}% CI", format_number((1.0 - m.alpha) * 100.0));
  out += fmt::format("{:<20} {:>9} {:<6} {:>10} {:<22} {:>8}  {:>15} {:>8}  {:>11} {:>8}  {:>11} {:>8}\n",
                     "Area", "Threshold", "Method", "ATE", ci_label, "p-value", "Placebo Effect*",
                     "p-value", "RCC Effect*", "p-value", "RSR Effect*", "p-value");
  for (const auto& row : report.rows) {
    const std::string head = fmt::format("{:<20} {:>9} {:<6}", row.area, format_number(row.threshold),
                                         to_string(row.method));
    if (!row.estimate) {
      out += fmt::format("{} inestimable: {}\n", head, row.error);
      continue;
    }
    const auto& e = *row.estimate;
    std::string effects;
    for (const auto& c : row.refutations) {
      const std::string effect = c.report ? scaled(c.report->refuted_effect) : "-";
      const int width = c.test == RefutationTest::Placebo ? 15 : 11;
      effects += fmt::format("  {:>{}} {:>8}", effect, width, p_cell(c));
    }
    out += fmt::format("{} {:>10} {:<22} {:>8.3f}{}\n", head, scaled(e.ate),
                       fmt::format("({:.3f}, {:.3f})", e.ci_low, e.ci_high), e.p_value, effects);
  }
  out += "\nRefutation p-values marked ! are below 0.05: the estimate fails that test.\n";
  for (const auto& row : report.rows) {
    if (!row.estimate) continue;
    for (const auto& c : row.refutations)
      if (!c.report)
        out += fmt::format("{} {} at threshold {}: {} inestimable: {}\n", row.area, to_string(row.method),
                           format_number(row.threshold), to_string(c.test), c.error);
  }
  std::string adjustment;
  for (std::size_t i = 0; i < m.adjustment_set.size(); ++i)
    adjustment += (i ? ", " : "") + m.adjustment_set[i];
  out += fmt::format("Adjustment set: {{{}}}\n", adjustment);
  out += fmt::format("Rows: {} harmonized, {} complete ({} dropped for missing values)\n", m.harmonized_rows,
                     m.complete_rows, m.dropped_missing);
  double last = -1.0;
  for (const auto& row : report.rows) {
    if (row.threshold == last || !row.n_used) continue;
    last = row.threshold;
    out += fmt::format("Threshold {}: t* = {}, {} treated, {} control, {} excluded by the +/-{} band\n",
                       format_number(row.threshold), format_number(row.threshold_value), row.n_treated,
                       row.n_control, row.excluded, format_number(m.band));
  }
  out += fmt::format("Bootstrap replicates {}, refutation trials {}, subset fraction {}, seed {}\n", m.bootstrap,
                     m.trials, format_number(m.subset_fraction), m.seed);
  return out;
}

std::string render_csv(const StudyReport& report) {
  std::string out;
  for (const auto& [key, value] : metadata_pairs(report.metadata)) out += fmt::format("# {}: {}\n", key, value);
  const auto cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += '\n';
  for (const auto& row : report.rows) {
    std::vector<std::string> f;
    f.push_back(csv_field(row.area));
    f.push_back(num(row.threshold));
    f.push_back(std::string(to_string(row.method)));
    f.push_back(status_of(row));
    if (row.estimate) {
      const auto& e = *row.estimate;
      for (double v : {e.ate, e.ci_low, e.ci_high, e.p_value, e.std_error}) f.push_back(num(v));
      f.push_back(std::to_string(e.replicates));
      f.push_back(std::to_string(e.draws));
    } else {
      f.insert(f.end(), 7, "");
    }
    f.push_back(num(row.threshold_value));
    for (std::size_t v : {row.n_used, row.n_treated, row.n_control, row.excluded}) f.push_back(std::to_string(v));
    f.push_back(csv_field(row.error));
    for (const auto& c : row.refutations) {
      if (c.report) {
        f.push_back(num(c.report->refuted_effect));
        f.push_back(num(c.report->trial_sd));
        f.push_back(num(c.report->p_value));
        f.push_back(std::to_string(c.report->trials));
        f.push_back(std::string(to_string(c.report->verdict)));
      } else {
        f.insert(f.end(), 5, "");
      }
      f.push_back(csv_field(c.error));
    }
    for (std::size_t i = 0; i < f.size(); ++i) out += (i ? "," : "") + f[i];
    out += '\n';
  }
  return out;
}

StudyReport parse_report_csv(std::string_view text) {
  StudyReport report;
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::string> header;
  const auto expected = csv_columns();
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto colon = line.find(": ", 2);
      if (colon == std::string::npos) throw ReportError(fmt::format("bad metadata line '{}'", line));
      set_metadata(report.metadata, line.substr(2, colon - 2), line.substr(colon + 2));
      continue;
    }
    auto fields = split_csv_line(line);
    if (header.empty()) {
      header = std::move(fields);
      if (header != expected) throw ReportError("report CSV header does not match the expected columns");
      continue;
    }
    if (fields.size() != header.size())
      throw ReportError(fmt::format("report CSV row has {} fields, expected {}", fields.size(), header.size()));
    std::map<std::string, std::string> f;
    for (std::size_t i = 0; i < header.size(); ++i) f[header[i]] = fields[i];

    ReportRow row;
    row.area = f["area"];
    row.threshold = to_double(f["threshold"], "threshold");
    row.method = parse_method(f["method"]);
    row.error = f["error"];
    row.threshold_value = to_double(f["threshold_value"], "threshold_value");
    row.n_used = to_size(f["n_used"], "n_used");
    row.n_treated = to_size(f["n_treated"], "n_treated");
    row.n_control = to_size(f["n_control"], "n_control");
    row.excluded = to_size(f["excluded"], "excluded");
    if (!f["ate"].empty()) {
      EffectEstimate e;
      e.method = row.method;
      e.ate = to_double(f["ate"], "ate");
      e.ci_low = to_double(f["ci_low"], "ci_low");
      e.ci_high = to_double(f["ci_high"], "ci_high");
      e.p_value = to_double(f["p_value"], "p_value");
      e.std_error = to_double(f["std_error"], "std_error");
      e.replicates = to_size(f["replicates"], "replicates");
      e.draws = to_size(f["draws"], "draws");
      e.threshold_percentile = row.threshold;
      e.n_used = row.n_used;
      row.estimate = e;
    }
    for (std::size_t i = 0; i < row.refutations.size(); ++i) {
      auto& c = row.refutations[i];
      c.test = static_cast<RefutationTest>(i);
      const std::string p(kTestPrefixes[i]);
      c.error = f[p + "_error"];
      if (f[p + "_effect"].empty()) continue;
      RefutationReport r;
      r.test = c.test;
      r.original_ate = row.estimate ? row.estimate->ate : 0.0;
      r.refuted_effect = to_double(f[p + "_effect"], "effect");
      r.trial_sd = to_double(f[p + "_sd"], "sd");
      r.p_value = to_double(f[p + "_p_value"], "p_value");
      r.trials = to_size(f[p + "_trials"], "trials");
      r.verdict = parse_verdict(f[p + "_verdict"]);
      c.report = r;
    }
    report.rows.push_back(std::move(row));
  }
  if (header.empty()) throw ReportError("report CSV has no header");
  return report;
}

std::string render_json(const StudyReport& report) {
  json meta = json::object();
  const auto& m = report.metadata;
  meta["seed"] = m.seed;
  meta["area"] = m.area;
  meta["period"] = m.period;
  meta["treatment"] = m.treatment;
  meta["outcome"] = m.outcome;
  meta["adjustment_set"] = m.adjustment_set;
  meta["harmonized_rows"] = m.harmonized_rows;
  meta["complete_rows"] = m.complete_rows;
  meta["dropped_missing"] = m.dropped_missing;
  meta["bootstrap"] = m.bootstrap;
  meta["alpha"] = m.alpha;
  meta["trials"] = m.trials;
  meta["subset_fraction"] = m.subset_fraction;
  meta["band"] = m.band;

  json rows = json::array();
  for (const auto& row : report.rows) {
    json r;
    r["area"] = row.area;
    r["threshold"] = row.threshold;
    r["method"] = to_string(row.method);
    r["status"] = status_of(row);
    r["error"] = row.error;
    r["threshold_value"] = row.threshold_value;
    r["n_used"] = row.n_used;
    r["n_treated"] = row.n_treated;
    r["n_control"] = row.n_control;
    r["excluded"] = row.excluded;
    if (row.estimate) {
      const auto& e = *row.estimate;
      r["estimate"] = {{"ate", e.ate},         {"ci_low", e.ci_low},         {"ci_high", e.ci_high},
                       {"p_value", e.p_value}, {"std_error", e.std_error},   {"replicates", e.replicates},
                       {"draws", e.draws}};
    } else {
      r["estimate"] = nullptr;
    }
    json refutations = json::array();
    for (const auto& c : row.refutations) {
      json t;
      t["test"] = to_string(c.test);
      t["error"] = c.error;
      if (c.report) {
        t["effect"] = c.report->refuted_effect;
        t["sd"] = c.report->trial_sd;
        t["p_value"] = c.report->p_value;
        t["trials"] = c.report->trials;
        t["verdict"] = to_string(c.report->verdict);
      }
      refutations.push_back(std::move(t));
    }
    r["refutations"] = std::move(refutations);
    rows.push_back(std::move(r));
  }
  json doc = {{"metadata", std::move(meta)}, {"rows", std::move(rows)}};
  return doc.dump(2) + "\n";
}

StudyReport parse_report_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ReportError(fmt::format("report JSON: {}", e.what()));
  }
  StudyReport report;
  try {
    const auto& meta = doc.at("metadata");
    auto& m = report.metadata;
    m.seed = meta.at("seed").get<std::uint64_t>();
    m.area = meta.at("area").get<std::string>();
    m.period = meta.at("period").get<std::string>();
    m.treatment = meta.at("treatment").get<std::string>();
    m.outcome = meta.at("outcome").get<std::string>();
    m.adjustment_set = meta.at("adjustment_set").get<std::vector<std::string>>();
    m.harmonized_rows = meta.at("harmonized_rows").get<std::size_t>();
    m.complete_rows = meta.at("complete_rows").get<std::size_t>();
    m.dropped_missing = meta.at("dropped_missing").get<std::size_t>();
    m.bootstrap = meta.at("bootstrap").get<int>();
    m.alpha = meta.at("alpha").get<double>();
    m.trials = meta.at("trials").get<int>();
    m.subset_fraction = meta.at("subset_fraction").get<double>();
    m.band = meta.at("band").get<double>();

    for (const auto& r : doc.at("rows")) {
      ReportRow row;
      row.area = r.at("area").get<std::string>();
      row.threshold = r.at("threshold").get<double>();
      row.method = parse_method(r.at("method").get<std::string>());
      row.error = r.at("error").get<std::string>();
      row.threshold_value = r.at("threshold_value").get<double>();
      row.n_used = r.at("n_used").get<std::size_t>();
      row.n_treated = r.at("n_treated").get<std::size_t>();
      row.n_control = r.at("n_control").get<std::size_t>();
      row.excluded = r.at("excluded").get<std::size_t>();
      if (const auto& e = r.at("estimate"); !e.is_null()) {
        EffectEstimate est;
        est.method = row.method;
        est.ate = e.at("ate").get<double>();
        est.ci_low = e.at("ci_low").get<double>();
        est.ci_high = e.at("ci_high").get<double>();
        est.p_value = e.at("p_value").get<double>();
        est.std_error = e.at("std_error").get<double>();
        est.replicates = e.at("replicates").get<std::size_t>();
        est.draws = e.at("draws").get<std::size_t>();
        est.threshold_percentile = row.threshold;
        est.n_used = row.n_used;
        row.estimate = est;
      }
      const auto& tests = r.at("refutations");
      if (tests.size() != row.refutations.size()) throw ReportError("report JSON: expected three refutations");
      for (std::size_t i = 0; i < row.refutations.size(); ++i) {
        const auto& t = tests[i];
        auto& c = row.refutations[i];
        c.test = static_cast<RefutationTest>(i);
        c.error = t.at("error").get<std::string>();
        if (!t.contains("effect")) continue;
        RefutationReport rep;
        rep.test = c.test;
        rep.original_ate = row.estimate ? row.estimate->ate : 0.0;
        rep.refuted_effect = t.at("effect").get<double>();
        rep.trial_sd = t.at("sd").get<double>();
        rep.p_value = t.at("p_value").get<double>();
        rep.trials = t.at("trials").get<std::size_t>();
        rep.verdict = parse_verdict(t.at("verdict").get<std::string>());
        c.report = rep;
      }
      report.rows.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw ReportError(fmt::format("report JSON: {}", e.what()));
  }
  return report;
}

std::vector<std::string> emit_report(const StudyReport& report, const std::string& directory,
                                     const std::vector<ReportFormat>& formats) {
  std::filesystem::create_directories(directory);
  std::vector<std::string> written;
  for (ReportFormat format : formats) {
    std::string name, body;
    switch (format) {
      case ReportFormat::Text: name = "report.txt"; body = render_text(report); break;
      case ReportFormat::Csv: name = "report.csv"; body = render_csv(report); break;
      case ReportFormat::Json: name = "report.json"; body = render_json(report); break;
    }
    const std::string path = (std::filesystem::path(directory) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ReportError(fmt::format("cannot write '{}'", path));
    out << body;
    written.push_back(path);
  }
  return written;
}

}  // namespace causalaid
