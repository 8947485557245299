#include "safe/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <set>
#include <thread>

#include "safe/config.hpp"
#include "safe/replay.hpp"
#include "safe/report.hpp"
#include "safe/trace_io.hpp"

namespace safe {

namespace fs = std::filesystem;

RunConfig resolve_config(const RunOverrides& o) {
  RunConfig cfg = o.config ? load_config(*o.config) : RunConfig{};
  if (o.mode) {
    const auto mode = parse_mode(*o.mode);
    if (!mode) throw ConfigError("config: unknown mode '" + *o.mode + "' (expected ppo, asym-kl or safe)");
    cfg.mode = *mode;
  }
  if (o.steps) cfg.steps = *o.steps;
  if (o.seed) cfg.seed = *o.seed;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

fs::path resolve_out_dir(const std::optional<fs::path>& out) {
  if (out) return *out;
  if (const char* env = std::getenv("SAFE_CTL_OUT_DIR"); env && *env) return env;
  return ".";
}

std::string trace_file_name(Mode mode, std::uint64_t seed) {
  return "trace_" + std::string(mode_name(mode)) + "_seed" + std::to_string(seed) + ".jsonl";
}

std::string stability_file_name(Mode mode, std::uint64_t seed) {
  return "stability_" + std::string(mode_name(mode)) + "_seed" + std::to_string(seed) + ".json";
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << text;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());
}

void write_report(const fs::path& dir, const ComparisonReport& report, std::ostream& out) {
  const std::string text = report_to_text(report);
  write_text(dir / "report.json", report_to_json(report).dump(2) + "\n");
  write_text(dir / "report.txt", text);
  out << text;
}

}  // namespace

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  fs::path dir;
  try {
    cfg = resolve_config(opts.overrides);
    dir = resolve_out_dir(opts.out);
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return kExitError;
  }

  const RunResult result = run(cfg);
  try {
    ensure_dir(dir);
    const TraceFile file{make_metadata(cfg, result), result.trace};
    save_trace(dir / trace_file_name(cfg.mode, cfg.seed), file);
    write_text(dir / stability_file_name(cfg.mode, cfg.seed), stability_to_json(result.report).dump(2) + "\n");
  } catch (const std::exception& e) {
    err << e.what() << '\n';
    return kExitError;
  }

  out << mode_name(cfg.mode) << " seed " << cfg.seed << ": " << result.trace.size() << " steps, mean reward "
      << result.report.mean_reward << ", crashes " << result.report.crash_count << '\n';
  if (result.diverged) {
    err << "run diverged at step " << result.failed_step << ": " << result.failure << '\n';
    return kExitDiverged;
  }
  return kExitOk;
}

int cmd_compare(const CompareOptions& opts, std::ostream& out, std::ostream& err) {
  std::vector<RunConfig> cells;
  fs::path dir;
  try {
    if (opts.seeds.empty()) throw ConfigError("compare: at least one seed is required");
    std::vector<Mode> modes;
    for (const std::string& name : opts.modes) {
      const auto m = parse_mode(name);
      if (!m) throw ConfigError("compare: unknown mode '" + name + "'");
      if (std::find(modes.begin(), modes.end(), *m) == modes.end()) modes.push_back(*m);
    }
    if (modes.size() < 2) throw ConfigError("compare: at least two distinct modes are required");
    if (std::set<std::uint64_t>(opts.seeds.begin(), opts.seeds.end()).size() != opts.seeds.size()) {
      throw ConfigError("compare: duplicate seeds");
    }
    RunOverrides base = opts.overrides;
    base.mode.reset();
    base.seed.reset();
    const RunConfig cfg = resolve_config(base);
    for (Mode m : modes) {
      for (std::uint64_t s : opts.seeds) {
        RunConfig c = cfg;
        c.mode = m;
        c.seed = s;
        cells.push_back(c);
      }
    }
    dir = resolve_out_dir(opts.out);
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return kExitError;
  }

  std::vector<TraceFile> traces(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const RunResult result = run(cells[i]);
      traces[i] = TraceFile{make_metadata(cells[i], result), result.trace};
    }
  };
  unsigned jobs = opts.jobs ? opts.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(cells.size()));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  try {
    ensure_dir(dir);
    for (const TraceFile& t : traces) save_trace(dir / trace_file_name(t.meta.mode, t.meta.seed), t);
    write_report(dir, build_report(traces), out);
  } catch (const std::exception& e) {
    err << e.what() << '\n';
    return kExitError;
  }
  return kExitOk;
}

int cmd_replay(const ReplayOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    RunOverrides o;
    o.config = opts.config;
    const RunConfig cfg = resolve_config(o);
    std::ifstream in(opts.trace, std::ios::binary);
    if (!in) throw ReplayFormatError("replay: cannot open '" + opts.trace.string() + "'");
    const auto rows = interpolate_unit_steps(parse_replay_csv(in));
    out << replay_to_text(replay(rows, cfg));
  } catch (const std::exception& e) {
    err << e.what() << '\n';
    return kExitError;
  }
  return kExitOk;
}

int cmd_report(const ReportOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    if (opts.traces.empty()) throw TraceFormatError("report: at least one trace is required");
    std::vector<TraceFile> traces;
    for (const fs::path& p : opts.traces) traces.push_back(load_trace(p));
    const fs::path dir = resolve_out_dir(opts.out);
    ensure_dir(dir);
    write_report(dir, build_report(traces), out);
  } catch (const std::exception& e) {
    err << e.what() << '\n';
    return kExitError;
  }
  return kExitOk;
}

}  // namespace safe
