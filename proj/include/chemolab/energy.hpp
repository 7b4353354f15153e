#pragma once

// Energy functional F_mu(n, z) = int n ln(n/mu) + 1/2 int |grad z|^2, its
// elementary bounds, the dissipation terms, the discrete energy audit, and
// the smallness certificate built from the functional-inequality constants.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "chemolab/dynamics.hpp"
#include "chemolab/grid.hpp"

namespace chemolab {

struct EnergyParams {
  double mu = 1.0;
  /// Throws ValidationError unless mu > 0.
  static EnergyParams make(double mu);
};

/// Tolerated undershoot of n below zero, relative to max n.
inline constexpr double kNegativityTol = 1e-10;

double f_mu(const ScalarField& n, const ScalarField& z, const EnergyParams& params);

/// int n |ln n|, with 0 where n <= 0.
double int_n_abs_log_n(const ScalarField& n);

struct EnergyBounds {
  bool nlogn_bound_ok = false;
  bool gradz_bound_ok = false;
  bool lower_bound_ok = false;
  double nlogn_slack = 0.0;  // F + ln(mu) int n + 2|Omega|/e - int n|ln n|
  double gradz_slack = 0.0;  // 2F + 2 mu |Omega|/e - int |grad z|^2
  double lower_slack = 0.0;  // F + mu |Omega| / e
  bool all_ok() const { return nlogn_bound_ok && gradz_bound_ok && lower_bound_ok; }
};

EnergyBounds energy_bounds(const ScalarField& n, const ScalarField& z, const EnergyParams& params);

struct Dissipation {
  double d_n = 0.0;  // int |grad n|^2 / n
  double d_z = 0.0;  // int |Lap z|^2
  bool d_n_infinite = false;
};

/// d_n uses the face form (n_R - n_L)(ln n_R - ln n_L)/h^2, which dominates
/// 4 int |grad sqrt n|^2 face by face.
Dissipation dissipation(const ScalarField& n, const ScalarField& z);

struct Constants {
  double K1 = 0.0;
  double K2 = 0.0;
  double K3 = 0.0;
  double K4 = 0.0;  // 0 when not supplied
  double Ku = 0.0;
  double lambda1 = 0.0;
};

struct CertifyOptions {
  std::optional<double> mu;   // overrides the constructive choice
  std::optional<double> eta;  // overrides the constructive choice
  double T = 0.0;             // reference time of the data
  double M_fraction = 0.9;    // M = M_fraction / (4 K2)
  double gamma_fraction = 0.9;
};

struct Certificate {
  Constants k;
  double area = 0.0;
  double mu = 0.0;
  double eta = 0.0;
  double Gamma = 0.0;
  double M = 0.0;
  double L = 0.0;       // density bound used for the fluid forcing: int n0
  double kappa = 0.0;   // filled in from a trajectory, see monitor
  double m = 0.0;       // int n0
  double ell = 0.0;     // int |u0|^4
  double int_z0 = 0.0;
  double T = 0.0;
  double m_star = 0.0;
  double m_star_star = 0.0;
  double t0 = 0.0;
  double t_star = 0.0;
  double mu_thm2 = 0.0;
  double F_thm2 = 0.0;          // F at t = 0 with mu_thm2
  double thm2_threshold = 0.0;  // min{1/(4K3), 1/(8K2)} - mu_thm2 |Omega| / e
  bool gamma_ok = false;
  bool M_ok = false;
  bool small_mass = false;
  bool thm2_mass = false;
  bool thm2_energy = false;

  /// 1/(4 K3^2 Ku |Omega|^{1/4}).
  double waiting_bound() const;
  /// 1/2 - K3/2 * gradz2 - K3^2 Ku |Omega|^{1/4} (ell e^{-lambda1 (t - T)} + m).
  double dissipation_coefficient(double t, double int_gradz_sq) const;
};

Certificate certify(const ScalarField& n0, const ScalarField& c0, const VectorField& u0,
                    const Constants& consts, const CertifyOptions& opts = {});

/// "name = value" lines, flags as true/false.
void write_certificate(std::ostream& os, const Certificate& c, const std::string& prefix = "");
Certificate read_certificate(std::istream& is);

/// Signed left side of the energy inequality between two consecutive states.
double energy_step_audit(const SimState& before, const SimState& after, double dt,
                         const Certificate& cert, double T);

struct K4Trajectory {
  std::vector<double> t;
  std::vector<double> log_mean_sq;  // ln{(1/|Omega|) int (n+1)^2}
  double m = 0.0;                   // int n0
  double int_z0 = 0.0;
};

/// Smallest K4 >= 0 with the exponential integrability bound holding on every sample.
double fit_K4(const std::vector<K4Trajectory>& trajectories);

}  // namespace chemolab
