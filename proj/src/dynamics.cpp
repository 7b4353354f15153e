#include "chemolab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include <fmt/format.h>

#include "chemolab/linear_solvers.hpp"

namespace chemolab {

const char* to_string(Formulation f) { return f == Formulation::Original ? "original" : "log"; }

const char* to_string(TransportSign s) {
  return s == TransportSign::ChainRule ? "chain_rule" : "as_printed";
}

PotentialData PotentialData::make(const ScalarField& phi) {
  if (!phi.all_finite()) throw ValidationError("potential: non-finite values");
  PotentialData p{phi, 0.0};
  p.phi.set_bc(BoundaryTag::Neumann);
  p.K1 = std::max(lp_norm(phi, INFINITY), gradient(p.phi).max_abs());
  return p;
}

// ---------------------------------------------------------------- state

SimState SimState::original(const ScalarField& n0, const ScalarField& c0, const VectorField& u0,
                            const Sensitivity& sens) {
  require_same_grid(n0.grid(), c0.grid(), "initial data");
  require_same_grid(n0.grid(), u0.grid(), "initial data");
  if (!n0.all_finite() || !c0.all_finite() || !u0.all_finite())
    throw ValidationError("initial data: non-finite values");
  if (n0.min() < 0.0) throw ValidationError("initial data: n0 must be nonnegative");
  if (c0.min() <= 0.0) throw ValidationError("initial data: c0 must be positive");
  if (!u0.boundary_is_zero()) throw ValidationError("initial data: u0 must vanish on the boundary");
  SimState s;
  s.formulation = Formulation::Original;
  s.n = n0;
  s.c = c0;
  s.n.set_bc(BoundaryTag::Neumann);
  s.c.set_bc(BoundaryTag::Neumann);
  s.u = u0;
  s.P = ScalarField(n0.grid());
  s.sens = sens;
  s.c0_max = c0.max();
  return s;
}

SimState SimState::log(const ScalarField& n0, const ScalarField& c0, const VectorField& u0,
                       const Sensitivity& sens) {
  return to_log(original(n0, c0, u0, sens));
}

ScalarField SimState::c_field() const {
  if (formulation == Formulation::Original) return c;
  ScalarField out(z.grid());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = c0_max * std::exp(-z[k]);
  return out;
}

ScalarField SimState::z_field() const {
  if (formulation == Formulation::Log) return z;
  ScalarField out(c.grid());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = -std::log(c[k] / c0_max);
  return out;
}

SimState to_log(const SimState& s) {
  if (s.formulation != Formulation::Original)
    throw ValidationError("to_log: state is not in the original formulation");
  const GridSpec& g = s.c.grid();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (!(s.c(i, j) > 0.0))
        throw ValidationError(fmt::format("to_log: c = {} at cell ({}, {}) is not positive", s.c(i, j), i, j));
  SimState out = s;
  out.formulation = Formulation::Log;
  out.z = s.z_field();
  out.z.set_bc(BoundaryTag::Neumann);
  out.c = ScalarField();
  return out;
}

SimState to_original(const SimState& s) {
  if (s.formulation != Formulation::Log)
    throw ValidationError("to_original: state is not in the log formulation");
  SimState out = s;
  out.formulation = Formulation::Original;
  out.c = s.c_field();
  out.c.set_bc(BoundaryTag::Neumann);
  out.z = ScalarField();
  return out;
}

// ---------------------------------------------------------------- stepping

struct Integrator::Impl {
  mutable std::mutex mutex;
  mutable std::map<double, std::shared_ptr<HelmholtzSolver>> diffusion;

  std::shared_ptr<HelmholtzSolver> diffusion_for(const GridSpec& g, double dt) const {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = diffusion.find(dt);
    if (it != diffusion.end()) return it->second;
    if (diffusion.size() > 8) diffusion.clear();
    auto h = std::make_shared<HelmholtzSolver>(g, dt);
    diffusion.emplace(dt, h);
    return h;
  }
};

Integrator::Integrator(const GridSpec& grid, DynamicsOptions opts)
    : grid_(grid),
      opts_(opts),
      stokes_(std::make_unique<StokesSolver>(grid, opts.stokes_tolerance, 20000, opts.stokes_scheme)),
      impl_(std::make_unique<Impl>()) {
  if (!(opts.cfl > 0.0 && opts.cfl <= 1.0)) throw ValidationError("dynamics: cfl must lie in (0, 1]");
}

Integrator::~Integrator() = default;

namespace {

// Chemotactic drift at faces: -grad z (log) or grad c / c_face (original).
VectorField chemotactic_drift(const SimState& s) {
  if (s.formulation == Formulation::Log) {
    VectorField b = gradient(s.z);
    b *= -1.0;
    return b;
  }
  VectorField b = gradient(s.c);
  const GridSpec& g = s.c.grid();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 1; i < g.nx; ++i) b.ux(i, j) /= 0.5 * (s.c(i, j) + s.c(i - 1, j));
  for (int j = 1; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) b.uy(i, j) /= 0.5 * (s.c(i, j) + s.c(i, j - 1));
  return b;
}

double upwind(double vel, double left, double right) { return vel > 0.0 ? vel * left : vel * right; }

// out -= dt * div(F) with face fluxes F = upwind(a, q) + upwind(b, w); b may be null.
void apply_flux(const GridSpec& g, double dt, const VectorField& a, std::span<const double> q,
                const VectorField* b, std::span<const double> w, std::span<double> out) {
  const int nx = g.nx, ny = g.ny;
  const double cx = dt / g.hx(), cy = dt / g.hy();
  for (int j = 0; j < ny; ++j) {
    for (int i = 1; i < nx; ++i) {
      const std::size_t L = g.index(i - 1, j), R = g.index(i, j);
      double F = upwind(a.ux(i, j), q[L], q[R]);
      if (b) F += upwind(b->ux(i, j), w[L], w[R]);
      out[L] -= cx * F;
      out[R] += cx * F;
    }
  }
  for (int j = 1; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t B = g.index(i, j - 1), T = g.index(i, j);
      double F = upwind(a.uy(i, j), q[B], q[T]);
      if (b) F += upwind(b->uy(i, j), w[B], w[T]);
      out[B] -= cy * F;
      out[T] += cy * F;
    }
  }
}

double face_speed_max(const GridSpec& g, const VectorField& u, const VectorField& b,
                      const ScalarField& fp) {
  double v = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 1; i < g.nx; ++i)
      v = std::max(v, std::abs(u.ux(i, j)) +
                          std::abs(b.ux(i, j)) * std::max(fp(i, j), fp(i - 1, j)));
  for (int j = 1; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      v = std::max(v, std::abs(u.uy(i, j)) +
                          std::abs(b.uy(i, j)) * std::max(fp(i, j), fp(i, j - 1)));
  return v;
}

ScalarField f_prime_field(const SimState& s) {
  ScalarField fp(s.n.grid(), BoundaryTag::None);
  for (std::size_t k = 0; k < fp.size(); ++k) fp[k] = detail::f_prime_unchecked(s.sens, s.n[k]);
  return fp;
}

}  // namespace

double Integrator::max_stable_dt(const SimState& s) const {
  const VectorField b = chemotactic_drift(s);
  const double v = face_speed_max(grid_, s.u, b, f_prime_field(s));
  if (v == 0.0) return INFINITY;
  return opts_.cfl * std::min(grid_.hx(), grid_.hy()) / v;
}

SimState Integrator::step(const SimState& s, const PotentialData& phi, double dt) const {
  return s.formulation == Formulation::Log ? step_log(s, phi, dt) : step_original(s, phi, dt);
}

namespace {

struct TransportPieces {
  VectorField drift;
  ScalarField fp;
  ScalarField g;  // n f'(n)
};

TransportPieces prepare(const GridSpec& grid, const SimState& s, double dt, double cfl) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("step: dt must be positive");
  require_same_grid(grid, s.n.grid(), "step");
  TransportPieces p{chemotactic_drift(s), f_prime_field(s), ScalarField(grid, BoundaryTag::None)};
  for (std::size_t k = 0; k < p.g.size(); ++k) p.g[k] = s.n[k] * p.fp[k];
  const double v = face_speed_max(grid, s.u, p.drift, p.fp);
  const double limit = cfl * std::min(grid.hx(), grid.hy());
  if (dt * v > limit)
    throw SolverError(fmt::format("CFL violated at t = {:.6g}: dt = {:.3e} exceeds {:.3e}; reduce dt",
                                  s.t, dt, limit / v));
  return p;
}

}  // namespace

SimState Integrator::step_log(const SimState& s, const PotentialData& phi, double dt) const {
  if (s.formulation != Formulation::Log) throw ValidationError("step_log: state is not in log variables");
  const GridSpec& g = grid_;
  TransportPieces p = prepare(g, s, dt, opts_.cfl);
  auto diff = impl_->diffusion_for(g, dt);

  SimState out = s;
  apply_flux(g, dt, s.u, s.n.values(), &p.drift, p.g.values(), out.n.values());
  diff->solve_in_place(out.n.values());

  VectorField vel = s.u;
  if (opts_.transport_sign == TransportSign::AsPrinted) vel *= -1.0;
  apply_flux(g, dt, vel, s.z.values(), nullptr, {}, out.z.values());
  const ScalarField gz2 = grad_sq(s.z);
  for (std::size_t k = 0; k < out.z.size(); ++k)
    out.z[k] += dt * (detail::f_unchecked(s.sens, s.n[k]) - gz2[k]);
  diff->solve_in_place(out.z.values());

  StokesStepResult st = stokes_->step(s.u, out.n, phi.phi, dt);
  out.u = std::move(st.u);
  out.P = std::move(st.pressure);
  out.t = s.t + dt;
  if (!out.n.all_finite() || !out.z.all_finite() || !out.u.all_finite())
    throw SolverError(fmt::format("non-finite values after step at t = {:.6g}", out.t));
  return out;
}

SimState Integrator::step_original(const SimState& s, const PotentialData& phi, double dt) const {
  if (s.formulation != Formulation::Original)
    throw ValidationError("step_original: state is not in original variables");
  const GridSpec& g = grid_;
  const double floor = kCFloorRelative * s.c0_max;
  if (s.c.min() <= floor)
    throw SolverError("c fell below its floor; use the log formulation for strongly depleted signals");
  TransportPieces p = prepare(g, s, dt, opts_.cfl);
  auto diff = impl_->diffusion_for(g, dt);

  SimState out = s;
  apply_flux(g, dt, s.u, s.n.values(), &p.drift, p.g.values(), out.n.values());
  diff->solve_in_place(out.n.values());

  apply_flux(g, dt, s.u, s.c.values(), nullptr, {}, out.c.values());
  for (std::size_t k = 0; k < out.c.size(); ++k)
    out.c[k] -= dt * detail::f_unchecked(s.sens, s.n[k]) * s.c[k];
  diff->solve_in_place(out.c.values());
  if (out.c.min() <= floor)
    throw SolverError(fmt::format("c fell below its floor {:.3e} at t = {:.6g}; "
                                  "use the log formulation for strongly depleted signals",
                                  floor, s.t + dt));

  StokesStepResult st = stokes_->step(s.u, out.n, phi.phi, dt);
  out.u = std::move(st.u);
  out.P = std::move(st.pressure);
  out.t = s.t + dt;
  if (!out.n.all_finite() || !out.c.all_finite() || !out.u.all_finite())
    throw SolverError(fmt::format("non-finite values after step at t = {:.6g}", out.t));
  return out;
}

SimState step_original(const SimState& s, const PotentialData& phi, double dt,
                       const DynamicsOptions& opts) {
  return Integrator(s.grid(), opts).step_original(s, phi, dt);
}

SimState step_log(const SimState& s, const PotentialData& phi, double dt, const DynamicsOptions& opts) {
  return Integrator(s.grid(), opts).step_log(s, phi, dt);
}

}  // namespace chemolab
