#pragma once

// IMEX Euler integration of the chemotaxis-Stokes system in the original
// (n, c, u) variables and in the log variables (n, z, u), z = -ln(c / c0_max).
//
// One step: explicit conservative upwind transport and chemotaxis fluxes and
// explicit reactions, then implicit Neumann diffusion, then a Stokes step
// driven by the updated density.

#include <memory>
#include <string>

#include "chemolab/grid.hpp"
#include "chemolab/regularize.hpp"
#include "chemolab/stokes.hpp"

namespace chemolab {

enum class Formulation { Original, Log };

/// Sign of the fluid transport term in the z equation. ChainRule gives
/// z_t + u.grad z, the exact image of c_t + u.grad c; AsPrinted gives z_t - u.grad z.
enum class TransportSign { ChainRule, AsPrinted };

const char* to_string(Formulation f);
const char* to_string(TransportSign s);

struct PotentialData {
  ScalarField phi;
  double K1 = 0.0;  // max(|phi|_inf, max face |grad phi|)

  static PotentialData make(const ScalarField& phi);
};

struct SimState {
  Formulation formulation = Formulation::Log;
  ScalarField n;
  ScalarField c;  // Original only
  ScalarField z;  // Log only
  VectorField u;
  ScalarField P;
  double t = 0.0;
  Sensitivity sens;
  double c0_max = 1.0;

  const GridSpec& grid() const { return n.grid(); }

  /// Original-variable state at t = 0; c0_max is max(c0). Throws on c0 <= 0.
  static SimState original(const ScalarField& n0, const ScalarField& c0, const VectorField& u0,
                           const Sensitivity& sens);
  /// Log-variable state built from the same data.
  static SimState log(const ScalarField& n0, const ScalarField& c0, const VectorField& u0,
                      const Sensitivity& sens);

  /// c in either formulation.
  ScalarField c_field() const;
  /// z in either formulation.
  ScalarField z_field() const;
};

SimState to_log(const SimState& s);
SimState to_original(const SimState& s);

struct DynamicsOptions {
  TransportSign transport_sign = TransportSign::ChainRule;
  double cfl = 0.4;
  StokesScheme stokes_scheme = StokesScheme::Monolithic;
  double stokes_tolerance = 1e-10;
};

/// Holds the factorizations shared across the steps of one run.
class Integrator {
 public:
  explicit Integrator(const GridSpec& grid, DynamicsOptions opts = {});
  ~Integrator();

  const GridSpec& grid() const { return grid_; }
  const DynamicsOptions& options() const { return opts_; }
  const StokesSolver& stokes() const { return *stokes_; }

  /// Largest dt admitted by the advective CFL rule in the given state.
  double max_stable_dt(const SimState& s) const;

  SimState step(const SimState& s, const PotentialData& phi, double dt) const;
  SimState step_original(const SimState& s, const PotentialData& phi, double dt) const;
  SimState step_log(const SimState& s, const PotentialData& phi, double dt) const;

 private:
  struct Impl;
  GridSpec grid_;
  DynamicsOptions opts_;
  std::unique_ptr<StokesSolver> stokes_;
  std::unique_ptr<Impl> impl_;
};

/// One-off steps; each builds its own Integrator.
SimState step_original(const SimState& s, const PotentialData& phi, double dt,
                       const DynamicsOptions& opts = {});
SimState step_log(const SimState& s, const PotentialData& phi, double dt,
                  const DynamicsOptions& opts = {});

/// Lower bound on c in the original formulation, relative to c0_max.
inline constexpr double kCFloorRelative = 1e-12;

}  // namespace chemolab
