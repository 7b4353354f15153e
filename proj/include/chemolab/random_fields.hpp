#pragma once

#include <random>

#include "chemolab/grid.hpp"

namespace chemolab {

/// Gaussian coefficients on the cosine modes cos(k pi x / lx) cos(l pi y / ly),
/// 0 <= k < kx, 0 <= l < ky, sampled at cell centers. The result satisfies the
/// reflection symmetry of the Neumann ghosts.
ScalarField filtered_noise(const GridSpec& grid, std::mt19937_64& rng, int kx, int ky,
                           bool include_mean = true);

/// filtered_noise with the default cutoff ceil(n/4) in each direction.
ScalarField filtered_noise(const GridSpec& grid, std::mt19937_64& rng);

/// Evaluates sum a(k, l) cos(k pi x / lx) cos(l pi y / ly) at cell centers;
/// coefficients are row-major with ky columns.
ScalarField cosine_synthesis(const GridSpec& grid, const std::vector<double>& a, int kx, int ky);

}  // namespace chemolab
