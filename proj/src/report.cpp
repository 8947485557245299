#include "safe/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "safe/config.hpp"

namespace safe {

using nlohmann::ordered_json;

const std::vector<std::string>& report_metric_names() {
  static const std::vector<std::string> names = {
      "mean_reward",     "final_reward",       "reward_std", "reward_cv",       "rolling_reward_std",
      "crash_count",     "mean_kl",            "kl_rolling_std", "value_loss_spikes", "mean_value_loss",
      "mean_completion_length",
  };
  return names;
}

namespace {

double metric_value(const CellResult& c, const std::string& name) {
  if (name == "mean_reward") return c.stability.mean_reward;
  if (name == "final_reward") return c.final_reward;
  if (name == "reward_std") return c.stability.reward_std;
  if (name == "reward_cv") return c.stability.reward_cv;
  if (name == "rolling_reward_std") return c.stability.rolling_reward_std;
  if (name == "crash_count") return static_cast<double>(c.stability.crash_count);
  if (name == "mean_kl") return c.mean_kl;
  if (name == "kl_rolling_std") return c.stability.kl_rolling_std;
  if (name == "value_loss_spikes") return static_cast<double>(c.stability.value_spike_count);
  if (name == "mean_value_loss") return c.mean_value_loss;
  if (name == "mean_completion_length") return c.mean_completion_length;
  return 0.0;
}

int mode_rank(Mode m) { return static_cast<int>(m); }

}  // namespace

CellResult summarize_cell(const TraceFile& trace) {
  CellResult c;
  c.mode = trace.meta.mode;
  c.seed = trace.meta.seed;
  c.diverged = trace.meta.diverged;
  c.failed_step = trace.meta.failed_step;
  c.steps = trace.records.size();

  const RunConfig cfg = config_from_json(trace.meta.config);
  c.stability = report_from_trace(trace.records, cfg.metrics);

  std::vector<double> kl, value, length, rewards;
  for (const TraceRecord& r : trace.records) {
    kl.push_back(r.kl_raw);
    value.push_back(r.value_loss);
    length.push_back(r.completion_length);
    rewards.push_back(r.mean_reward);
  }
  c.mean_kl = mean_of(kl);
  c.mean_value_loss = mean_of(value);
  c.mean_completion_length = mean_of(length);
  const std::size_t tail = std::min<std::size_t>(50, rewards.size());
  c.final_reward = mean_of(std::span<const double>(rewards).last(tail));
  return c;
}

ComparisonReport build_report(const std::vector<TraceFile>& traces) {
  ComparisonReport report;
  for (const TraceFile& t : traces) report.cells.push_back(summarize_cell(t));
  std::stable_sort(report.cells.begin(), report.cells.end(), [](const CellResult& a, const CellResult& b) {
    if (a.mode != b.mode) return mode_rank(a.mode) < mode_rank(b.mode);
    return a.seed < b.seed;
  });

  for (Mode m : {Mode::Ppo, Mode::AsymKl, Mode::Safe}) {
    ModeSummary s;
    s.mode = m;
    std::vector<const CellResult*> ok;
    for (const CellResult& c : report.cells) {
      if (c.mode != m) continue;
      ++s.runs;
      if (c.diverged) {
        ++s.failed;
      } else {
        ok.push_back(&c);
      }
    }
    if (s.runs == 0) continue;
    for (const std::string& name : report_metric_names()) {
      std::vector<double> values;
      for (const CellResult* c : ok) values.push_back(metric_value(*c, name));
      s.metrics.push_back({name, mean_of(values), stddev_of(values)});
    }
    report.modes.push_back(std::move(s));
  }
  return report;
}

ordered_json stability_to_json(const StabilityReport& r) {
  ordered_json j;
  j["mean_reward"] = r.mean_reward;
  j["reward_std"] = r.reward_std;
  j["reward_cv"] = r.reward_cv;
  j["rolling_reward_std"] = r.rolling_reward_std;
  j["crash_count"] = r.crash_count;
  j["value_spike_count"] = r.value_spike_count;
  j["kl_rolling_std"] = r.kl_rolling_std;
  return j;
}

ordered_json report_to_json(const ComparisonReport& report) {
  ordered_json j;
  ordered_json modes = ordered_json::array();
  for (const ModeSummary& s : report.modes) {
    ordered_json m;
    m["mode"] = std::string(mode_name(s.mode));
    m["runs"] = s.runs;
    m["failed"] = s.failed;
    ordered_json metrics;
    for (const MetricSummary& ms : s.metrics) metrics[ms.name] = {{"mean", ms.mean}, {"std", ms.stddev}};
    m["metrics"] = metrics;
    modes.push_back(m);
  }
  j["modes"] = modes;

  ordered_json cells = ordered_json::array();
  for (const CellResult& c : report.cells) {
    ordered_json cell;
    cell["mode"] = std::string(mode_name(c.mode));
    cell["seed"] = c.seed;
    cell["steps"] = c.steps;
    cell["diverged"] = c.diverged;
    cell["failed_step"] = c.failed_step;
    cell["stability"] = stability_to_json(c.stability);
    cell["final_reward"] = c.final_reward;
    cell["mean_kl"] = c.mean_kl;
    cell["mean_value_loss"] = c.mean_value_loss;
    cell["mean_completion_length"] = c.mean_completion_length;
    cells.push_back(cell);
  }
  j["cells"] = cells;
  return j;
}

std::string report_to_text(const ComparisonReport& report) {
  std::ostringstream out;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%-24s", "metric");
  out << buf;
  for (const ModeSummary& s : report.modes) {
    std::snprintf(buf, sizeof(buf), " %24s", std::string(mode_name(s.mode)).c_str());
    out << buf;
  }
  out << '\n';
  for (std::size_t i = 0; i < report_metric_names().size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%-24s", report_metric_names()[i].c_str());
    out << buf;
    for (const ModeSummary& s : report.modes) {
      const MetricSummary& m = s.metrics[i];
      std::snprintf(buf, sizeof(buf), " %11.4f +- %9.4f", m.mean, m.stddev);
      out << buf;
    }
    out << '\n';
  }
  std::snprintf(buf, sizeof(buf), "%-24s", "runs (failed)");
  out << buf;
  for (const ModeSummary& s : report.modes) {
    std::snprintf(buf, sizeof(buf), " %24s", (std::to_string(s.runs) + " (" + std::to_string(s.failed) + ")").c_str());
    out << buf;
  }
  out << '\n';
  for (const CellResult& c : report.cells) {
    if (c.diverged) {
      out << "  " << mode_name(c.mode) << " seed " << c.seed << ": diverged at step " << c.failed_step << '\n';
    }
  }
  return out.str();
}

}  // namespace safe
