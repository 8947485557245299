#pragma once

// JSONL trace files. The first line is a '#'-prefixed JSON metadata object;
// every following line is one TraceRecord with fields in declaration order.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "safe/trainer.hpp"

namespace safe {

struct TraceFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TraceMetadata {
  std::string config_hash;
  std::uint64_t seed = 0;
  Mode mode = Mode::Safe;
  bool diverged = false;
  int failed_step = -1;
  nlohmann::ordered_json config;  ///< full run configuration
};

struct TraceFile {
  TraceMetadata meta;
  TrainingTrace records;
};

TraceMetadata make_metadata(const RunConfig& cfg, const RunResult& result);

nlohmann::ordered_json record_to_json(const TraceRecord& r);
TraceRecord record_from_json(const nlohmann::json& j);

void write_trace(std::ostream& out, const TraceFile& file);
TraceFile read_trace(std::istream& in);

void save_trace(const std::filesystem::path& path, const TraceFile& file);
TraceFile load_trace(const std::filesystem::path& path);

}  // namespace safe
