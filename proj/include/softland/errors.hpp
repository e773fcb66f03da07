#pragma once

#include <stdexcept>
#include <string>

namespace softland {

struct MonotonicityViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ZeroContactProbability : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateRegularization : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InfeasibleBounds : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoConvergence : std::runtime_error {
  NoConvergence(const std::string& msg, double residual = 0.0, int stage = -1)
      : std::runtime_error(msg), last_residual(residual), continuation_stage(stage) {}
  double last_residual;
  int continuation_stage;  // -1 outside continuation
};

struct MeshLimitExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EventNotBracketed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AllSamplesMissedContact : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DriftExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimulationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BudgetExhausted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace softland
