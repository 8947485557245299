#include "safe/replay.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <sstream>

#include "safe/adaptive_control.hpp"
#include "safe/divergence.hpp"

namespace safe {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
  throw ReplayFormatError("replay: line " + std::to_string(line_no) + ": " + what);
}

template <typename T>
T parse_number(const std::string& cell, std::size_t line_no, const char* column) {
  T value{};
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
    fail(line_no, std::string("bad ") + column + " value '" + cell + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) fail(line_no, std::string("non-finite ") + column + " value");
  }
  return value;
}

}  // namespace

std::vector<ReplayInputRow> parse_replay_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ReplayFormatError("replay: line 1: missing header");
  ++line_no;

  const std::vector<std::string> header = split(line);
  int col_step = -1, col_kl = -1, col_reward = -1, col_entropy = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    int* slot = nullptr;
    if (header[i] == "step") slot = &col_step;
    else if (header[i] == "kl") slot = &col_kl;
    else if (header[i] == "reward") slot = &col_reward;
    else if (header[i] == "entropy") slot = &col_entropy;
    else fail(line_no, "unknown column '" + header[i] + "'");
    if (*slot >= 0) fail(line_no, "duplicate column '" + header[i] + "'");
    *slot = static_cast<int>(i);
  }
  if (col_step < 0 || col_kl < 0 || col_reward < 0) fail(line_no, "header must name step, kl and reward");

  std::vector<ReplayInputRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != header.size()) {
      fail(line_no, "expected " + std::to_string(header.size()) + " columns, got " + std::to_string(cells.size()));
    }
    ReplayInputRow row;
    row.step = parse_number<long>(cells[col_step], line_no, "step");
    row.kl = parse_number<double>(cells[col_kl], line_no, "kl");
    row.reward = parse_number<double>(cells[col_reward], line_no, "reward");
    if (col_entropy >= 0) {
      row.entropy = parse_number<double>(cells[col_entropy], line_no, "entropy");
      if (*row.entropy < 0.0) fail(line_no, "negative entropy");
    }
    if (!rows.empty() && row.step <= rows.back().step) fail(line_no, "step index not increasing");
    rows.push_back(row);
  }
  if (rows.empty()) throw ReplayFormatError("replay: no data rows");
  return rows;
}

std::vector<ReplayInputRow> interpolate_unit_steps(const std::vector<ReplayInputRow>& rows) {
  std::vector<ReplayInputRow> out;
  if (rows.empty()) return out;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    const ReplayInputRow& a = rows[i];
    const ReplayInputRow& b = rows[i + 1];
    if (b.step <= a.step) throw ReplayFormatError("replay: steps must be strictly increasing");
    const double span = static_cast<double>(b.step - a.step);
    for (long s = a.step; s < b.step; ++s) {
      const double t = static_cast<double>(s - a.step) / span;
      ReplayInputRow r;
      r.step = s;
      r.kl = a.kl + t * (b.kl - a.kl);
      r.reward = a.reward + t * (b.reward - a.reward);
      if (a.entropy && b.entropy) r.entropy = *a.entropy + t * (*b.entropy - *a.entropy);
      out.push_back(r);
    }
  }
  out.push_back(rows.back());
  return out;
}

std::vector<ReplayRow> replay(const std::vector<ReplayInputRow>& rows, const RunConfig& cfg) {
  ControllerState state(cfg.controller, cfg.asym.window_w);
  std::vector<ReplayRow> out;
  out.reserve(rows.size());
  for (const ReplayInputRow& in : rows) {
    ReplayRow r;
    r.step = in.step;
    r.kl = in.kl;
    r.reward = in.reward;
    r.entropy = in.entropy.value_or(cfg.controller.gate.h_floor);
    const AsymStep asym = asym_controller_step(state.kl, in.kl, cfg.asym);
    r.l_asym = asym.l_asym;
    r.l_mom = asym.l_mom;
    const ControllerStep ctl = controller_step(state, cfg.controller, in.kl, r.entropy, in.reward);
    r.tau_t = ctl.diag.tau_t;
    r.gated_penalty = ctl.penalty;
    out.push_back(r);
  }
  return out;
}

std::string replay_to_text(const std::vector<ReplayRow>& rows) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%8s %10s %8s %8s %12s %12s %8s %12s\n", "step", "kl", "reward", "entropy",
                "l_asym", "l_mom", "tau_t", "gated");
  out << buf;
  for (const ReplayRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%8ld %10.5f %8.4f %8.4f %12.6g %12.6g %8.4f %12.6g\n", r.step, r.kl, r.reward,
                  r.entropy, r.l_asym, r.l_mom, r.tau_t, r.gated_penalty);
    out << buf;
  }
  return out.str();
}

}  // namespace safe
