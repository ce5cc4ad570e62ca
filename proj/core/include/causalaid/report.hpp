#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "causalaid/study.hpp"

namespace causalaid {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ReportFormat { Text, Csv, Json };

std::string_view to_string(ReportFormat format);
ReportFormat parse_report_format(std::string_view text);

// Human-readable table: ATE and refuted effects scaled by 1e4, CI unscaled,
// refutation p-values below 0.05 marked with '!'.
std::string render_text(const StudyReport& report);
// `# key: value` metadata lines, then one row per (threshold, method) with
// every number at full round-trip precision.
std::string render_csv(const StudyReport& report);
std::string render_json(const StudyReport& report);

StudyReport parse_report_csv(std::string_view text);
StudyReport parse_report_json(std::string_view text);

// Writes report.<txt|csv|json> under `directory`; returns the paths written.
std::vector<std::string> emit_report(const StudyReport& report, const std::string& directory,
                                     const std::vector<ReportFormat>& formats);

}  // namespace causalaid
