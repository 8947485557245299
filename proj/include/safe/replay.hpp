#pragma once

// Streams a recorded (step, kl, reward[, entropy]) table through the
// asymmetric and entropy-aware controllers.

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "safe/trainer.hpp"

namespace safe {

struct ReplayFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ReplayInputRow {
  long step = 0;
  double kl = 0.0;
  double reward = 0.0;
  std::optional<double> entropy;
};

/// Parses CSV with a required header naming step, kl, reward and optionally
/// entropy. Errors carry the 1-based line number.
std::vector<ReplayInputRow> parse_replay_csv(std::istream& in);

/// Linear interpolation onto every integer step between the first and last row.
/// Steps must be strictly increasing.
std::vector<ReplayInputRow> interpolate_unit_steps(const std::vector<ReplayInputRow>& rows);

struct ReplayRow {
  long step = 0;
  double kl = 0.0;
  double reward = 0.0;
  double entropy = 0.0;
  double l_asym = 0.0;
  double l_mom = 0.0;
  double tau_t = 0.0;
  double gated_penalty = 0.0;

  double combined() const { return l_asym + l_mom; }
};

std::vector<ReplayRow> replay(const std::vector<ReplayInputRow>& rows, const RunConfig& cfg);

std::string replay_to_text(const std::vector<ReplayRow>& rows);

}  // namespace safe
