#pragma once

// Trajectory diagnostics: per-state integrals, the differential-inequality
// audits between consecutive states, trace-level audits and the convergence
// report.

#include <cmath>
#include <iosfwd>
#include <string>
#include <vector>

#include "chemolab/dynamics.hpp"
#include "chemolab/energy.hpp"

namespace chemolab {

struct TraceRecord {
  double t = 0.0;
  double mass_n = 0.0;
  double linf_n_dev = 0.0;  // max |n - mean(n0)|
  double linf_c = 0.0;
  double linf_u = 0.0;
  double linf_gradc_over_c = 0.0;  // max |grad z|
  double F_mu = 0.0;
  double int_gradz_sq = 0.0;
  double int_nlogn = 0.0;  // int n |ln n|
  double int_n_sq = 0.0;
  double d_n = 0.0;
  double d_z = 0.0;
  double residual_l2 = 0.0;
  double residual_z4 = 0.0;
  double residual_energy = 0.0;
  double residual_zbound = 0.0;
  double int_gradz_4 = 0.0;
  double int_z = 0.0;
  double min_z = 0.0;
  double min_n = 0.0;
  double l2_u = 0.0;
  double l4_u = 0.0;
  double l4_grad_u = 0.0;
  double energy_coefficient = 0.0;  // bracket of the energy inequality; NaN without a certificate
};

/// Column names in CSV order.
const std::vector<std::string>& trace_columns();
/// Header comment lines (each starting with "# ") are written first.
void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace,
                     const std::vector<std::string>& comments = {});
std::vector<TraceRecord> read_trace_csv(std::istream& is, std::vector<std::string>* comments = nullptr);

/// Integrals of one state shared by the audits.
struct StateDiagnostics {
  double t = 0.0;
  double mass = 0.0;
  double int_n_sq = 0.0;
  double int_grad_n_sq = 0.0;
  double int_n2_gz2 = 0.0;  // int n^2 |grad z|^2
  double int_gz2 = 0.0;     // int |grad z|^2
  double int_gz4 = 0.0;
  double int_gz6 = 0.0;
  double int_grad_gz2_sq = 0.0;  // int |grad |grad z|^2|^2
  double int_gz4_gradu = 0.0;    // int |grad z|^4 |grad u|
  double int_z = 0.0;
  double F = 0.0;
  double d_n = 0.0;
  double d_z = 0.0;
};

StateDiagnostics diagnose(const SimState& s, double mu);

/// Signed residual (left - right) of an audited inequality with its natural scale.
struct AuditValue {
  double residual = 0.0;
  double left = 0.0;
  double right = 0.0;
  /// residual / (|left| + |right| + 1)
  double normalized() const;
};

/// d/dt int n^2 + int |grad n|^2 <= int n^2 |grad z|^2.
AuditValue audit_l2(const SimState& before, const SimState& after, double dt);
AuditValue audit_l2(const StateDiagnostics& before, const StateDiagnostics& after, double dt);

/// d/dt int|grad z|^4 + (5/2 - 2 eta) int |grad|grad z|^2|^2 <= 8 int|grad z|^6
///   + (12/eta) int n^2 |grad z|^2 + 4 int |grad z|^4 |grad u| + C (int |grad z|^2)^2.
/// Throws ValidationError unless 0 < eta <= 5/4.
AuditValue audit_z4(const SimState& before, const SimState& after, double dt, double eta, double C);
AuditValue audit_z4(const StateDiagnostics& before, const StateDiagnostics& after, double dt,
                    double eta, double C);

/// Energy-inequality left side from precomputed diagnostics (mu must match cert.mu).
double energy_residual(const StateDiagnostics& before, const StateDiagnostics& after, double dt,
                       const Certificate& cert, double T);

/// Smallest C >= 0 making audit_z4 hold on pure-diffusion runs (n = 0, u = 0)
/// started from `samples` random smooth z0 on this grid.
double calibrate_z4_constant(const GridSpec& grid, double eta, int samples, unsigned long seed,
                             double dt, int steps);

struct ZBoundAudit {
  double max_residual = -INFINITY;
  double max_relative = -INFINITY;  // residual / (int z(t0) + (t - t0) m0)
};

/// int z(t) + int_{t0}^t int |grad z|^2 - int z(t0) - (t - t0) m0 by record-level trapezoid.
ZBoundAudit audit_zbound(const std::vector<TraceRecord>& trace, std::size_t t0_index = 0);

/// max over t of int_0^t ln{(1/|Omega|) int (n+1)^2} - K4 (1+m) t - K4 (int z0 + m).
double audit_k4(const std::vector<TraceRecord>& trace, double K4, double m, double z0_integral,
                double area);
/// Converts a trace into the input of fit_K4.
K4Trajectory k4_trajectory(const std::vector<TraceRecord>& trace, double area, double int_z0);

struct QuantityConvergence {
  std::string name;
  double final_value = 0.0;
  double fitted_rate = 0.0;  // -d/dt ln(value) over the fit window
  double t_a = 0.0;
  double t_b = 0.0;
  double threshold = 0.0;
  bool achieved_threshold = false;
  bool degenerate = false;  // values too small or flat for a log fit
};

struct ConvergenceThresholds {
  double n_dev = 1e-3;
  double c = INFINITY;
  double u = 1e-3;
  double gradc_over_c = 1e-3;
};

struct ConvergenceReport {
  std::vector<QuantityConvergence> quantities;  // linf_n_dev, linf_c, linf_u, linf_gradc_over_c
  double u_l2_rate = 0.0;
  bool u_l2_degenerate = false;
  double min_z_slope = 0.0;
  const QuantityConvergence& get(const std::string& name) const;
};

/// Fits over the last third of the trace. Throws ValidationError for fewer than 10 records.
ConvergenceReport convergence_report(const std::vector<TraceRecord>& trace,
                                     const ConvergenceThresholds& thresholds = {});

/// Least-squares slope of y against t.
double ls_slope(const std::vector<double>& t, const std::vector<double>& y);

}  // namespace chemolab
