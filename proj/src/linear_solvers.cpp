#include "chemolab/linear_solvers.hpp"

#include <vector>

namespace chemolab {

using Trip = Eigen::Triplet<double>;

SpMat neumann_laplacian_pos(const GridSpec& g) {
  const double ax = 1.0 / (g.hx() * g.hx());
  const double ay = 1.0 / (g.hy() * g.hy());
  std::vector<Trip> t;
  t.reserve(g.cells() * 5);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const int k = static_cast<int>(g.index(i, j));
      double diag = 0.0;
      auto link = [&](int kk, double w) {
        t.emplace_back(k, kk, -w);
        diag += w;
      };
      if (i > 0) link(k - 1, ax);
      if (i < g.nx - 1) link(k + 1, ax);
      if (j > 0) link(k - g.nx, ay);
      if (j < g.ny - 1) link(k + g.nx, ay);
      t.emplace_back(k, k, diag);
    }
  }
  SpMat m(static_cast<int>(g.cells()), static_cast<int>(g.cells()));
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

FaceLayout::FaceLayout(const GridSpec& g)
    : nx_faces((g.nx - 1) * g.ny), ny_faces(g.nx * (g.ny - 1)), grid(g) {}

Vec FaceLayout::gather(const VectorField& v) const {
  Vec x(size());
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 1; i < grid.nx; ++i) x[xf(i, j)] = v.ux(i, j);
  for (int j = 1; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) x[yf(i, j)] = v.uy(i, j);
  return x;
}

VectorField FaceLayout::scatter(const Vec& x) const {
  VectorField v(grid);
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 1; i < grid.nx; ++i) v.ux(i, j) = x[xf(i, j)];
  for (int j = 1; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) v.uy(i, j) = x[yf(i, j)];
  return v;
}

SpMat velocity_laplacian_pos(const GridSpec& g) {
  const FaceLayout f(g);
  const double ax = 1.0 / (g.hx() * g.hx());
  const double ay = 1.0 / (g.hy() * g.hy());
  std::vector<Trip> t;
  t.reserve(static_cast<std::size_t>(f.size()) * 5);
  // x-faces: normal neighbours along x hit the (zero) wall faces, tangential
  // neighbours along y reflect oddly through the wall.
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 1; i < g.nx; ++i) {
      const int k = f.xf(i, j);
      double diag = 2.0 * ax;
      if (i > 1) t.emplace_back(k, f.xf(i - 1, j), -ax);
      if (i < g.nx - 1) t.emplace_back(k, f.xf(i + 1, j), -ax);
      if (j > 0) {
        t.emplace_back(k, f.xf(i, j - 1), -ay);
        diag += ay;
      } else {
        diag += 2.0 * ay;
      }
      if (j < g.ny - 1) {
        t.emplace_back(k, f.xf(i, j + 1), -ay);
        diag += ay;
      } else {
        diag += 2.0 * ay;
      }
      t.emplace_back(k, k, diag);
    }
  }
  for (int j = 1; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const int k = f.yf(i, j);
      double diag = 2.0 * ay;
      if (j > 1) t.emplace_back(k, f.yf(i, j - 1), -ay);
      if (j < g.ny - 1) t.emplace_back(k, f.yf(i, j + 1), -ay);
      if (i > 0) {
        t.emplace_back(k, f.yf(i - 1, j), -ax);
        diag += ax;
      } else {
        diag += 2.0 * ax;
      }
      if (i < g.nx - 1) {
        t.emplace_back(k, f.yf(i + 1, j), -ax);
        diag += ax;
      } else {
        diag += 2.0 * ax;
      }
      t.emplace_back(k, k, diag);
    }
  }
  SpMat m(f.size(), f.size());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

int stream_index(const GridSpec& g, int i, int j) { return (j - 1) * (g.nx - 1) + (i - 1); }

SpMat curl_matrix(const GridSpec& g) {
  const FaceLayout f(g);
  const int nnode = (g.nx - 1) * (g.ny - 1);
  const double ihx = 1.0 / g.hx(), ihy = 1.0 / g.hy();
  std::vector<Trip> t;
  auto interior = [&](int i, int j) { return i > 0 && i < g.nx && j > 0 && j < g.ny; };
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 1; i < g.nx; ++i) {
      // ux(i, j) = (psi(i, j+1) - psi(i, j)) / hy
      if (interior(i, j + 1)) t.emplace_back(f.xf(i, j), stream_index(g, i, j + 1), ihy);
      if (interior(i, j)) t.emplace_back(f.xf(i, j), stream_index(g, i, j), -ihy);
    }
  }
  for (int j = 1; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      // uy(i, j) = -(psi(i+1, j) - psi(i, j)) / hx
      if (interior(i + 1, j)) t.emplace_back(f.yf(i, j), stream_index(g, i + 1, j), -ihx);
      if (interior(i, j)) t.emplace_back(f.yf(i, j), stream_index(g, i, j), ihx);
    }
  }
  SpMat c(f.size(), nnode);
  c.setFromTriplets(t.begin(), t.end());
  return c;
}

HelmholtzSolver::HelmholtzSolver(const GridSpec& g, double a) : a_(a) {
  if (!(a > 0.0)) throw ValidationError("helmholtz solver: coefficient must be positive");
  SpMat m = neumann_laplacian_pos(g) * a;
  for (int k = 0; k < m.rows(); ++k) m.coeffRef(k, k) += 1.0;
  llt_.compute(m);
  if (llt_.info() != Eigen::Success) throw SolverError("helmholtz solver: factorization failed");
}

void HelmholtzSolver::solve_in_place(std::span<double> x) const {
  Eigen::Map<Vec> xm(x.data(), static_cast<Eigen::Index>(x.size()));
  Vec b = xm;
  xm = llt_.solve(b);
}

NeumannPoissonSolver::NeumannPoissonSolver(const GridSpec& g) : grid_(g) {
  // Pin cell 0 to remove the constant nullspace; the mean is fixed afterwards.
  SpMat m = neumann_laplacian_pos(g);
  m.coeffRef(0, 0) += 1.0;
  ldlt_.compute(m);
  if (ldlt_.info() != Eigen::Success) throw SolverError("poisson solver: factorization failed");
}

ScalarField NeumannPoissonSolver::solve(const ScalarField& rhs) const {
  require_same_grid(grid_, rhs.grid(), "poisson solve");
  Vec b = -Eigen::Map<const Vec>(rhs.values().data(), static_cast<Eigen::Index>(rhs.size()));
  b.array() -= b.mean();
  Vec q = ldlt_.solve(b);
  q.array() -= q.mean();
  return ScalarField(grid_, std::vector<double>(q.data(), q.data() + q.size()));
}

}  // namespace chemolab
