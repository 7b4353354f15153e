#include "chemolab/stokes.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/IterativeLinearSolvers>
#include <fmt/format.h>

namespace chemolab {

struct StokesSolver::Impl {
  explicit Impl(const GridSpec& g)
      : faces(g), A(velocity_laplacian_pos(g)), C(curl_matrix(g)), poisson(g) {
    Ct = C.transpose();
  }

  FaceLayout faces;
  SpMat A;   // -Laplacian on interior faces
  SpMat C;   // stream function -> faces
  SpMat Ct;
  NeumannPoissonSolver poisson;

  struct StepFactor {
    Eigen::SimplicialLDLT<SpMat> solver;
  };
  mutable std::mutex mutex;
  mutable std::map<double, std::shared_ptr<StepFactor>> factors;

  mutable bool have_eigen = false;
  mutable double lambda1 = 0.0;
  mutable Vec psi1;

  std::shared_ptr<StepFactor> factor_for(double dt, StokesScheme scheme) const {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = factors.find(dt);
    if (it != factors.end()) return it->second;
    SpMat m = A * dt;
    for (int k = 0; k < m.rows(); ++k) m.coeffRef(k, k) += 1.0;
    if (scheme == StokesScheme::Monolithic) m = SpMat(Ct * m * C);
    auto f = std::make_shared<StepFactor>();
    f->solver.compute(m);
    if (f->solver.info() != Eigen::Success)
      throw SolverError("stokes step: factorization failed");
    if (factors.size() > 8) factors.clear();
    factors.emplace(dt, f);
    return f;
  }
};

StokesSolver::StokesSolver(const GridSpec& grid, double tolerance, int max_iterations,
                           StokesScheme scheme)
    : grid_(grid), tolerance_(tolerance), max_iterations_(max_iterations), scheme_(scheme) {
  if (!(tolerance > 0.0 && tolerance <= 1e-6))
    throw ValidationError("stokes solver: tolerance must lie in (0, 1e-6]");
  if (max_iterations <= 0) throw ValidationError("stokes solver: max_iterations must be positive");
  if (grid.nx < 2 || grid.ny < 2) throw ValidationError("stokes solver: grid needs at least 2x2 cells");
  impl_ = std::make_unique<Impl>(grid);
}

StokesSolver::~StokesSolver() = default;

namespace {

// Solves L_N q = -div(v) by conjugate gradients; returns q with zero mean.
ScalarField poisson_cg(const GridSpec& g, const ScalarField& div, double tol, int max_it,
                       ProjectionReport* report) {
  static thread_local std::map<std::pair<int, int>, std::pair<GridSpec, SpMat>> cache;
  auto key = std::make_pair(g.nx, g.ny);
  auto it = cache.find(key);
  if (it == cache.end() || !(it->second.first == g))
    it = cache.insert_or_assign(key, std::make_pair(g, neumann_laplacian_pos(g))).first;
  const SpMat& L = it->second.second;

  Vec b = -Eigen::Map<const Vec>(div.values().data(), static_cast<Eigen::Index>(div.size()));
  b.array() -= b.mean();
  ScalarField q(g);
  if (b.norm() == 0.0) {
    if (report) *report = {0, 0.0};
    return q;
  }
  Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(tol);
  cg.setMaxIterations(max_it);
  cg.compute(L);
  Vec x = cg.solve(b);
  const double rel = (L * x - b).norm() / b.norm();
  if (report) *report = {static_cast<int>(cg.iterations()), rel};
  if (cg.info() != Eigen::Success && rel > tol)
    throw SolverError(fmt::format("projection: Poisson CG did not converge ({} iterations, "
                                  "relative residual {:.3e})",
                                  cg.iterations(), rel));
  x.array() -= x.mean();
  std::copy(x.data(), x.data() + x.size(), q.values().begin());
  return q;
}

}  // namespace

VectorField StokesSolver::project(const VectorField& v, ProjectionReport* report) const {
  require_same_grid(grid_, v.grid(), "project");
  if (!v.boundary_is_zero()) throw ValidationError("project: boundary-normal faces must be zero");
  ScalarField q = poisson_cg(grid_, divergence(v), tolerance_, max_iterations_, report);
  return v - gradient(q);
}

VectorField StokesSolver::forcing(const ScalarField& n, const ScalarField& phi) const {
  require_same_grid(grid_, n.grid(), "stokes forcing");
  require_same_grid(grid_, phi.grid(), "stokes forcing");
  VectorField f = gradient(phi);
  for (int j = 0; j < grid_.ny; ++j)
    for (int i = 1; i < grid_.nx; ++i) f.ux(i, j) *= 0.5 * (n(i, j) + n(i - 1, j));
  for (int j = 1; j < grid_.ny; ++j)
    for (int i = 0; i < grid_.nx; ++i) f.uy(i, j) *= 0.5 * (n(i, j) + n(i, j - 1));
  return f;
}

StokesStepResult StokesSolver::step(const VectorField& u, const ScalarField& n,
                                    const ScalarField& phi, double dt) const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("stokes step: dt must be positive");
  require_same_grid(grid_, u.grid(), "stokes step");
  const Impl& m = *impl_;
  const Vec rhs = m.faces.gather(u) + dt * m.faces.gather(forcing(n, phi));
  auto fac = m.factor_for(dt, scheme_);

  if (scheme_ == StokesScheme::Monolithic) {
    const Vec psi = fac->solver.solve(Vec(m.Ct * rhs));
    if (fac->solver.info() != Eigen::Success) throw SolverError("stokes step: solve failed");
    const Vec un = m.C * psi;
    // The residual of the unconstrained momentum balance is dt * grad P.
    const Vec r = rhs - un - dt * (m.A * un);
    ScalarField P = m.poisson.solve(divergence(m.faces.scatter(r)));
    P *= 1.0 / dt;
    return {m.faces.scatter(un), std::move(P)};
  }

  const Vec ustar = fac->solver.solve(rhs);
  if (fac->solver.info() != Eigen::Success) throw SolverError("stokes step: solve failed");
  const VectorField us = m.faces.scatter(ustar);
  ScalarField q = poisson_cg(grid_, divergence(us), tolerance_, max_iterations_, nullptr);
  VectorField un = us - gradient(q);
  q *= 1.0 / dt;
  return {std::move(un), std::move(q)};
}

double StokesSolver::lambda1() const {
  const Impl& m = *impl_;
  std::lock_guard<std::mutex> lock(m.mutex);
  if (m.have_eigen) return m.lambda1;

  const SpMat K = m.Ct * m.A * m.C;
  const SpMat M = m.Ct * m.C;
  Eigen::SimplicialLDLT<SpMat> solver(K);
  if (solver.info() != Eigen::Success) throw SolverError("lambda1: factorization failed");

  const GridSpec& g = grid_;
  Vec x(K.rows());
  for (int j = 1; j < g.ny; ++j)
    for (int i = 1; i < g.nx; ++i)
      x[stream_index(g, i, j)] = std::sin(M_PI * i / g.nx) * std::sin(M_PI * j / g.ny);

  double lambda = 0.0;
  double residual = 1.0;
  const int max_it = std::min(max_iterations_, 5000);
  for (int it = 0; it < max_it; ++it) {
    x /= std::sqrt(x.dot(M * x));
    const Vec Kx = K * x;
    const Vec Mx = M * x;
    lambda = x.dot(Kx);
    residual = (Kx - lambda * Mx).norm() / (lambda * Mx.norm());
    if (residual <= 1e-8) break;
    x = solver.solve(Mx);
  }
  if (residual > 1e-8)
    throw SolverError(fmt::format("lambda1: inverse iteration stalled at residual {:.3e}", residual));
  m.lambda1 = lambda;
  m.psi1 = x;
  m.have_eigen = true;
  return lambda;
}

VectorField StokesSolver::eigenfield() const {
  lambda1();
  const Impl& m = *impl_;
  VectorField u = m.faces.scatter(m.C * m.psi1);
  u *= 1.0 / std::sqrt(inner(u, u));
  return u;
}

VectorField StokesSolver::from_stream_function(const std::vector<double>& psi_nodes) const {
  const GridSpec& g = grid_;
  if (psi_nodes.size() != static_cast<std::size_t>((g.nx + 1) * (g.ny + 1)))
    throw ValidationError("stream function: expected (nx+1)*(ny+1) node values");
  Vec psi((g.nx - 1) * (g.ny - 1));
  for (int j = 1; j < g.ny; ++j)
    for (int i = 1; i < g.nx; ++i) psi[stream_index(g, i, j)] = psi_nodes[j * (g.nx + 1) + i];
  return impl_->faces.scatter(impl_->C * psi);
}

double fit_Ku(const std::vector<KuTrial>& trials, double lambda1) {
  if (trials.empty()) throw ValidationError("fit_Ku: no trials");
  double K = 1.0;
  for (const KuTrial& tr : trials) {
    if (tr.t.empty() || tr.t.size() != tr.u_l4.size())
      throw ValidationError("fit_Ku: malformed trial");
    const double t0 = tr.t.front(), u0 = tr.u_l4.front();
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
      const double denom = std::exp(-lambda1 * (tr.t[k] - t0)) * u0 + tr.L;
      if (denom > 0.0) K = std::max(K, tr.u_l4[k] / denom);
      else if (tr.u_l4[k] > 0.0) throw ValidationError("fit_Ku: nonzero velocity with zero bound");
    }
  }
  return K;
}

KuTrial simulate_stokes_trial(const StokesSolver& solver, const VectorField& u0,
                              const ScalarField& n, const ScalarField& phi, double dt,
                              double t_end, int record_every) {
  if (record_every < 1) throw ValidationError("stokes trial: record_every must be >= 1");
  KuTrial tr;
  tr.L = lp_norm(n, 1.0);
  VectorField u = u0;
  const long steps = std::lround(t_end / dt);
  tr.t.push_back(0.0);
  tr.u_l4.push_back(lp_norm(u, 4.0));
  for (long s = 1; s <= steps; ++s) {
    u = solver.stokes_step(u, n, phi, dt);
    if (s % record_every == 0 || s == steps) {
      tr.t.push_back(s * dt);
      tr.u_l4.push_back(lp_norm(u, 4.0));
    }
  }
  return tr;
}

}  // namespace chemolab
