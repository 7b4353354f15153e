#pragma once

// Scenario runner: binds a Config to constant estimation, certification,
// simulation, audits and on-disk artifacts.
//
// Scenarios (scenario = ...):
//   small_mass_eventual  certify, run past t_star, audit, convergence report
//   thm2_global          check the global smallness flags, run from t = 0
//   eps_sweep            identical data for each eps in sensitivity.eps_list
//   constants            estimate and persist the inequality constants
//   stokes_decay         n == 0 runs for lambda1 and K_u
//
// Artifacts in the output directory: trace.csv, certificate.txt,
// constants.txt, report.txt, snapshots/*.csf.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chemolab/config.hpp"
#include "chemolab/dynamics.hpp"
#include "chemolab/energy.hpp"
#include "chemolab/functional_constants.hpp"
#include "chemolab/monitor.hpp"
#include "chemolab/run.hpp"

namespace chemolab {

enum class ScenarioKind { SmallMassEventual, Thm2Global, EpsSweep, Constants, StokesDecay };
enum class FormulationChoice { Original, Log, Both };

const char* to_string(ScenarioKind k);

struct ConstantSettings {
  std::optional<std::string> file;  // constants.txt to load instead of estimating
  std::map<std::string, double> overrides;  // constants.K2 = ... etc.
  int ensemble = 8;
  int iterations = 50;
  double step = 0.5;
  double inflation = 1.25;
  int verify_trials = 0;
  std::vector<double> ku_masses{0.01, 0.1, 1.0};
  double ku_t_end = 0.5;
  bool k4_pilot = true;
  std::vector<double> k4_pilot_masses{0.001, 0.01, 0.1};
  double k4_pilot_t_end = 0.5;
};

struct AssertSettings {
  bool enabled = true;
  double n_dev_rel = 1e-3;
  double gradc_over_c = 1e-3;
  double u_rel = 1e-3;
  double u_abs = 1e-9;
  double min_z_slope_fraction = 0.4;
  double energy_slack = 0.02;
  double budget_factor = 1.05;
  double residual_slack = 0.02;
  double zbound_slack = 0.05;
  double stokes_rate_tolerance = 0.1;
};

/// Fully validated run configuration.
struct RunConfig {
  ScenarioKind scenario = ScenarioKind::SmallMassEventual;
  Config raw;
  GridSpec grid;
  double dt = 1e-3;
  double t_end = 1.0;
  int trace_every = 10;
  int snapshot_every = 0;  // in records; 0 disables snapshots
  double t_end_tstar_factor = 2.0;
  FormulationChoice formulation = FormulationChoice::Log;
  std::string sensitivity_kind = "eps";
  double eps = 0.05;
  std::vector<double> eps_list;
  DynamicsOptions dynamics;
  std::optional<double> mu;
  std::optional<double> eta;
  std::optional<double> mass_fraction_of_mstar;
  unsigned long seed = 1;
  ConstantSettings constants;
  AssertSettings asserts;
  double audit_eta = 0.5;
  int z4_samples = 3;
  int z4_steps = 20;
  int stokes_samples = 5;
  double stokes_amplitude = 0.1;
  std::filesystem::path output_dir = "run";

  Sensitivity sensitivity() const;
};

/// Validates every key; throws ValidationError (unknown keys included).
RunConfig parse_run_config(const Config& cfg);

struct ConstantsBundle {
  Constants k;  // values used by certificates (estimates inflated)
  double inflation = 1.0;
  std::vector<ConstantEstimate> estimates;  // raw estimates, when computed here
  std::vector<VerifyReport> verification;
  double Ku_raw = 0.0;
  double K4_raw = 0.0;
  std::string source;  // "estimated", "file", "override"
};

struct InitialBundle {
  ScalarField n0;
  ScalarField c0;
  VectorField u0;
  PotentialData phi;
};

/// Assertion outcome with its measured value and limit.
struct Check {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double limit = 0.0;
};

struct ScenarioResult {
  RunConfig config;
  ConstantsBundle constants;
  std::optional<Certificate> certificate;
  InitialBundle initial;
  std::vector<TraceRecord> trace;  // primary trace (log formulation when available)
  std::vector<TraceRecord> trace_original;
  std::optional<ConvergenceReport> convergence;
  std::map<std::string, double> summary;
  std::vector<Check> checks;
  std::exception_ptr run_error;  // a failed step; artifacts up to it are kept

  bool all_checks_pass() const;
  /// 0 success, 2 run failure, 3 failed assertion.
  int exit_code() const;
};

/// Builds constants per cfg.constants (file, overrides, estimation).
ConstantsBundle acquire_constants(const RunConfig& cfg, const StokesSolver& stokes, const InitialBundle& init);

InitialBundle build_initial(const RunConfig& cfg, const StokesSolver& stokes);

/// Runs the configured scenario and writes artifacts to cfg.output_dir.
ScenarioResult run_scenario(const RunConfig& cfg);

/// Runs the constants scenario for any config.
ScenarioResult estimate_constants(const RunConfig& cfg);

/// Recomputes the report of an existing run directory and rewrites report.txt.
/// Returns the report text.
std::string report_run_dir(const std::filesystem::path& dir);

/// F(t2) <= F(t1) + slack (1 + |F(t1)|) for all records t2 > t1 >= t_from; returns the
/// largest (F(t2) - F(t1)) / (1 + |F(t1)|).
double worst_energy_increase(const std::vector<TraceRecord>& trace, double t_from);

/// Trapezoid of d_n + kappa d_z over records with t >= t_from.
double dissipation_budget(const std::vector<TraceRecord>& trace, double t_from, double kappa);

/// inf of the energy coefficient over records with t >= t_from, floored at 0.
double trajectory_kappa(const std::vector<TraceRecord>& trace, double t_from);

}  // namespace chemolab
