#pragma once

#include <string>

#include <json.hpp>

#include "bfqr/harness.hpp"

namespace bfqr {

// Coverage, gap and T columns are shown x100 in tables.
bool scaled_metric(const std::string& metric);

std::string format_table(const AggregateTable& table);
nlohmann::ordered_json report_json(const ExperimentResult& result);
std::string format_trace(const OptimizerResult& result);

struct ReportPaths {
  std::string table;
  std::string json;
  std::vector<std::string> traces;
};

// Writes report.txt, report.json and traces/seed_<n>.tsv under dir.
ReportPaths emit_report(const ExperimentResult& result, const std::string& dir, bool traces = true);

}  // namespace bfqr
