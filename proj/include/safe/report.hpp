#pragma once

// Stability comparison across (mode, seed) runs. Reports are computed from
// trace files only, so regenerating them from saved traces is exact.

#include <string>
#include <vector>

#include <json.hpp>

#include "safe/trace_io.hpp"

namespace safe {

struct CellResult {
  Mode mode = Mode::Safe;
  std::uint64_t seed = 0;
  bool diverged = false;
  int failed_step = -1;
  std::size_t steps = 0;
  StabilityReport stability;
  double mean_kl = 0.0;
  double mean_value_loss = 0.0;
  double mean_completion_length = 0.0;
  double final_reward = 0.0;  ///< mean over the last 50 steps
};

struct MetricSummary {
  std::string name;
  double mean = 0.0;
  double stddev = 0.0;
};

struct ModeSummary {
  Mode mode = Mode::Safe;
  std::size_t runs = 0;
  std::size_t failed = 0;
  std::vector<MetricSummary> metrics;
};

struct ComparisonReport {
  std::vector<CellResult> cells;
  std::vector<ModeSummary> modes;
};

/// Metric names in report row order.
const std::vector<std::string>& report_metric_names();

CellResult summarize_cell(const TraceFile& trace);
ComparisonReport build_report(const std::vector<TraceFile>& traces);

nlohmann::ordered_json report_to_json(const ComparisonReport& report);
std::string report_to_text(const ComparisonReport& report);

nlohmann::ordered_json stability_to_json(const StabilityReport& r);

}  // namespace safe
