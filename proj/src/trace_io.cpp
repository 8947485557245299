#include "safe/trace_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "safe/config.hpp"

namespace safe {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "safe-trace/1";

template <typename T, typename Json>
T field(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw TraceFormatError(std::string("trace: missing field '") + key + "'");
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw TraceFormatError(std::string("trace: bad value for field '") + key + "'");
  }
}

}  // namespace

TraceMetadata make_metadata(const RunConfig& cfg, const RunResult& result) {
  TraceMetadata m;
  m.config_hash = config_hash(cfg);
  m.seed = cfg.seed;
  m.mode = cfg.mode;
  m.diverged = result.diverged;
  m.failed_step = result.failed_step;
  m.config = config_to_json(cfg);
  return m;
}

ordered_json record_to_json(const TraceRecord& r) {
  ordered_json j;
  j["step"] = r.step;
  j["mean_reward"] = r.mean_reward;
  j["base_reward"] = r.base_reward;
  j["artifact_fraction"] = r.artifact_fraction;
  j["kl_raw"] = r.kl_raw;
  j["kl_short"] = r.kl_short;
  j["kl_long"] = r.kl_long;
  j["tau_t"] = r.tau_t;
  j["phase"] = std::string(phase_name(r.phase));
  j["gate"] = r.gate;
  j["pid_integral"] = r.pid_integral;
  j["entropy"] = r.entropy;
  j["value_loss"] = r.value_loss;
  j["l_ppo"] = r.l_ppo;
  j["l_value"] = r.l_value;
  j["l_kl"] = r.l_kl;
  j["l_gated"] = r.l_gated;
  j["l_asym"] = r.l_asym;
  j["l_mom"] = r.l_mom;
  j["entropy_bonus"] = r.entropy_bonus;
  j["l_total"] = r.l_total;
  j["completion_length"] = r.completion_length;
  j["preview_scale"] = r.preview_scale;
  return j;
}

TraceRecord record_from_json(const json& j) {
  TraceRecord r;
  r.step = field<int>(j, "step");
  r.mean_reward = field<double>(j, "mean_reward");
  r.base_reward = field<double>(j, "base_reward");
  r.artifact_fraction = field<double>(j, "artifact_fraction");
  r.kl_raw = field<double>(j, "kl_raw");
  r.kl_short = field<double>(j, "kl_short");
  r.kl_long = field<double>(j, "kl_long");
  r.tau_t = field<double>(j, "tau_t");
  const auto phase = parse_phase(field<std::string>(j, "phase"));
  if (!phase) throw TraceFormatError("trace: unknown phase");
  r.phase = *phase;
  r.gate = field<double>(j, "gate");
  r.pid_integral = field<double>(j, "pid_integral");
  r.entropy = field<double>(j, "entropy");
  r.value_loss = field<double>(j, "value_loss");
  r.l_ppo = field<double>(j, "l_ppo");
  r.l_value = field<double>(j, "l_value");
  r.l_kl = field<double>(j, "l_kl");
  r.l_gated = field<double>(j, "l_gated");
  r.l_asym = field<double>(j, "l_asym");
  r.l_mom = field<double>(j, "l_mom");
  r.entropy_bonus = field<double>(j, "entropy_bonus");
  r.l_total = field<double>(j, "l_total");
  r.completion_length = field<double>(j, "completion_length");
  r.preview_scale = field<double>(j, "preview_scale");
  return r;
}

void write_trace(std::ostream& out, const TraceFile& file) {
  ordered_json meta;
  meta["format"] = kFormat;
  meta["config_hash"] = file.meta.config_hash;
  meta["seed"] = file.meta.seed;
  meta["mode"] = std::string(mode_name(file.meta.mode));
  meta["diverged"] = file.meta.diverged;
  meta["failed_step"] = file.meta.failed_step;
  meta["config"] = file.meta.config;
  out << "# " << meta.dump() << '\n';
  for (const TraceRecord& r : file.records) out << record_to_json(r).dump() << '\n';
}

TraceFile read_trace(std::istream& in) {
  TraceFile file;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
    throw TraceFormatError("trace: missing '# ' metadata header line");
  }
  try {
    const ordered_json meta = ordered_json::parse(line.substr(2));
    if (field<std::string>(meta, "format") != kFormat) throw TraceFormatError("trace: unsupported format");
    file.meta.config_hash = field<std::string>(meta, "config_hash");
    file.meta.seed = field<std::uint64_t>(meta, "seed");
    const auto mode = parse_mode(field<std::string>(meta, "mode"));
    if (!mode) throw TraceFormatError("trace: unknown mode");
    file.meta.mode = *mode;
    file.meta.diverged = field<bool>(meta, "diverged");
    file.meta.failed_step = field<int>(meta, "failed_step");
    file.meta.config = meta.at("config");
  } catch (const json::exception& e) {
    throw TraceFormatError(std::string("trace: bad metadata: ") + e.what());
  }

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      file.records.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw TraceFormatError("trace: line " + std::to_string(line_no) + ": " + e.what());
    } catch (const TraceFormatError& e) {
      throw TraceFormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (file.records.size() > 1 && file.records.back().step <= file.records[file.records.size() - 2].step) {
      throw TraceFormatError("trace: line " + std::to_string(line_no) + ": step index not increasing");
    }
  }
  return file;
}

void save_trace(const std::filesystem::path& path, const TraceFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace '" + path.string() + "'");
  write_trace(out, file);
}

TraceFile load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceFormatError("cannot open trace '" + path.string() + "'");
  return read_trace(in);
}

}  // namespace safe
