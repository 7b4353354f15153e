#pragma once

// Sparse discrete operators and cached direct solvers shared by the Stokes
// and transport steps.

#include <memory>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "chemolab/grid.hpp"

namespace chemolab {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

/// -Laplacian with Neumann reflection on cells (positive semidefinite).
SpMat neumann_laplacian_pos(const GridSpec& g);

/// Interior-face numbering: x-faces (i, j), 1 <= i < nx, come first, then
/// y-faces (i, j), 1 <= j < ny.
struct FaceLayout {
  explicit FaceLayout(const GridSpec& g);
  int nx_faces;
  int ny_faces;
  int size() const { return nx_faces + ny_faces; }
  GridSpec grid;
  int xf(int i, int j) const { return j * (grid.nx - 1) + (i - 1); }
  int yf(int i, int j) const { return nx_faces + (j - 1) * grid.nx + i; }
  Vec gather(const VectorField& v) const;
  VectorField scatter(const Vec& x) const;
};

/// -Laplacian on interior faces with homogeneous Dirichlet velocity; tangential
/// walls use odd reflection. Symmetric positive definite.
SpMat velocity_laplacian_pos(const GridSpec& g);

/// Maps interior-node stream-function values (i, j), 1 <= i < nx, 1 <= j < ny,
/// to interior-face velocities; every image is exactly divergence-free.
SpMat curl_matrix(const GridSpec& g);
int stream_index(const GridSpec& g, int i, int j);

/// Direct solver for (I + a*L_N) x = b on cells, a > 0.
class HelmholtzSolver {
 public:
  HelmholtzSolver(const GridSpec& g, double a);
  void solve_in_place(std::span<double> x) const;
  double coefficient() const { return a_; }

 private:
  double a_;
  Eigen::SimplicialLLT<SpMat> llt_;
};

/// Direct solver for the Neumann Poisson problem L_N q = -r, mean(q) = 0.
/// r is first projected to mean zero.
class NeumannPoissonSolver {
 public:
  explicit NeumannPoissonSolver(const GridSpec& g);
  /// Returns q with Laplacian(q) = rhs - mean(rhs) and zero mean.
  ScalarField solve(const ScalarField& rhs) const;

 private:
  GridSpec grid_;
  Eigen::SimplicialLDLT<SpMat> ldlt_;
};

}  // namespace chemolab
