#pragma once

#include <stdexcept>
#include <string>

namespace ti {

/// Invalid user-facing configuration (bad flag, inconsistent spec). CLI exit 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A solver or rollout produced a non-finite or >1e6 state. CLI exit 3.
struct BlowupError : std::runtime_error {
  BlowupError(const std::string& msg, double time, long step)
      : std::runtime_error(msg), time(time), step(step) {}
  double time;
  long step;
};

/// Training loss stayed non-finite for too many consecutive steps. CLI exit 4.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A required file (dataset, checkpoint, metrics) is absent or unreadable. CLI exit 5.
struct MissingInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ti
