#pragma once

// Time-stepping driver emitting trace records with audit residual columns.

#include <exception>
#include <functional>
#include <optional>
#include <vector>

#include "chemolab/dynamics.hpp"
#include "chemolab/energy.hpp"
#include "chemolab/monitor.hpp"

namespace chemolab {

struct RunOptions {
  /// Energy audit constants; without them residual_energy and
  /// energy_coefficient are NaN.
  std::optional<Certificate> certificate;
  double T = 0.0;
  /// mu of the traced energy; defaults to the certificate's mu, else mean(n0).
  std::optional<double> mu;
  double eta = 0.5;   // audit_z4 parameter
  double z4_C = 0.0;  // calibrated constant of audit_z4
  /// Called on the initial state and on every recorded state.
  std::function<void(const SimState&, std::size_t record_index)> on_record;
};

struct RunResult {
  std::vector<TraceRecord> trace;
  SimState final_state;
  std::exception_ptr error;  // set when a step failed; trace holds the records so far
  bool ok() const { return !error; }
};

/// Steps from initial.t to t_end (the last step is shortened to land on t_end)
/// and records every trace_every steps, plus the initial state. Residual
/// columns hold the worst normalized value over the steps since the previous
/// record: l2 and z4 by |left| + |right| + 1, energy by max(1, |dF/dt|),
/// zbound by int z(0) + t m0.
RunResult run(const Integrator& integrator, const SimState& initial, const PotentialData& phi,
              double dt, double t_end, int trace_every, const RunOptions& opts = {});

/// Convenience overload building its own Integrator with default options.
RunResult run(const SimState& initial, const PotentialData& phi, double dt, double t_end,
              int trace_every, const RunOptions& opts = {});

}  // namespace chemolab
