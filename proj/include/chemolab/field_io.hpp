#pragma once

// Snapshot files: magic "CSF1", nx and ny as little-endian int64, lx and ly
// as little-endian float64, then nx*ny float64 values in row-major order
// (index j*nx + i).

#include <filesystem>

#include "chemolab/grid.hpp"

namespace chemolab {

void write_snapshot(const std::filesystem::path& path, const ScalarField& field);
ScalarField read_snapshot(const std::filesystem::path& path);

/// One "x,y,value" row per cell, cell centers as coordinates.
void write_csv(const std::filesystem::path& path, const ScalarField& field);

}  // namespace chemolab
