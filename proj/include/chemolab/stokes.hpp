#pragma once

// Unsteady Stokes subsystem u_t + grad P = Lap u + n grad(phi), div u = 0,
// u = 0 on the boundary.

#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "chemolab/grid.hpp"
#include "chemolab/linear_solvers.hpp"

namespace chemolab {

enum class StokesScheme {
  /// Backward Euler solved exactly on the discretely solenoidal subspace
  /// (stream-function parametrization). No splitting error.
  Monolithic,
  /// Implicit viscous predictor followed by a Helmholtz projection.
  Projection,
};

struct StokesStepResult {
  VectorField u;
  ScalarField pressure;  // mean zero
};

/// Convergence data of the Poisson solve inside project().
struct ProjectionReport {
  int iterations = 0;
  double relative_residual = 0.0;
};

class StokesSolver {
 public:
  explicit StokesSolver(const GridSpec& grid, double tolerance = 1e-10, int max_iterations = 20000,
                        StokesScheme scheme = StokesScheme::Monolithic);
  ~StokesSolver();
  StokesSolver(const StokesSolver&) = delete;
  StokesSolver& operator=(const StokesSolver&) = delete;

  const GridSpec& grid() const { return grid_; }
  double tolerance() const { return tolerance_; }
  StokesScheme scheme() const { return scheme_; }

  /// Helmholtz projection v - grad q with div grad q = div v (Neumann, mean
  /// zero q), solved by conjugate gradients to the solver tolerance.
  VectorField project(const VectorField& v, ProjectionReport* report = nullptr) const;

  /// Face forcing n*grad(phi) with two-point averaged n; boundary faces zero.
  VectorField forcing(const ScalarField& n, const ScalarField& phi) const;

  StokesStepResult step(const VectorField& u, const ScalarField& n, const ScalarField& phi,
                        double dt) const;
  VectorField stokes_step(const VectorField& u, const ScalarField& n, const ScalarField& phi,
                          double dt) const {
    return step(u, n, phi, dt).u;
  }

  /// Smallest eigenvalue of the discrete Stokes operator; cached after the first call.
  double lambda1() const;
  /// The matching eigenfield, normalized to unit L2 norm.
  VectorField eigenfield() const;

  /// Maps an interior-node stream function (zero on the boundary nodes,
  /// indexed (i, j) with 0 <= i <= nx, 0 <= j <= ny) to a solenoidal field.
  VectorField from_stream_function(const std::vector<double>& psi_nodes) const;

 private:
  struct Impl;
  GridSpec grid_;
  double tolerance_;
  int max_iterations_;
  StokesScheme scheme_;
  std::unique_ptr<Impl> impl_;
};

/// One fluid decay trajectory: L4 norms of u sampled at times t,
/// with the cell density bounded in L1 by L throughout.
struct KuTrial {
  double L = 0.0;
  std::vector<double> t;
  std::vector<double> u_l4;
};

/// Smallest K >= 1 with u_l4(t) <= K (exp(-lambda1 (t - t0)) u_l4(t0) + L)
/// at every sample of every trial. Throws ValidationError on empty input.
double fit_Ku(const std::vector<KuTrial>& trials, double lambda1);

/// Runs the Stokes subsystem with a frozen density n and records a KuTrial.
KuTrial simulate_stokes_trial(const StokesSolver& solver, const VectorField& u0,
                              const ScalarField& n, const ScalarField& phi, double dt,
                              double t_end, int record_every = 1);

}  // namespace chemolab
