#pragma once

// Parameterized initial data read from a Config:
//
//   grid.nx, grid.ny, grid.lx, grid.ly
//   n0.kind  = constant | gaussian_bump | constant_plus_bump | filtered_noise | snapshot
//   c0.kind  = constant | cosine | filtered_noise | snapshot        (c0.floor > 0 required)
//   u0.kind  = zero | eigenmode | random                            (u0.amplitude = sup norm)
//   phi.kind = zero | linear | cosine | snapshot

#include <string>

#include "chemolab/config.hpp"
#include "chemolab/dynamics.hpp"
#include "chemolab/grid.hpp"
#include "chemolab/stokes.hpp"

namespace chemolab {

GridSpec grid_from_config(const Config& cfg);

/// Density with the requested mass (n0.mass), nonnegative by construction.
ScalarField density_recipe(const Config& cfg, const GridSpec& grid, unsigned long seed);
/// Positive signal bounded below by c0.floor.
ScalarField signal_recipe(const Config& cfg, const GridSpec& grid, unsigned long seed);
/// Solenoidal velocity vanishing on the walls.
VectorField velocity_recipe(const Config& cfg, const StokesSolver& stokes, unsigned long seed);
ScalarField potential_recipe(const Config& cfg, const GridSpec& grid);

/// Random divergence-free field from a tapered filtered-noise stream function,
/// scaled to the given sup norm.
VectorField random_solenoidal(const StokesSolver& stokes, unsigned long seed, double amplitude);

Sensitivity sensitivity_from(const std::string& kind, double eps);

}  // namespace chemolab
