#include <cmath>
#include <random>
#include <string>

#include "doctest.h"

#include "chemolab/dynamics.hpp"
#include "chemolab/random_fields.hpp"
#include "chemolab/run.hpp"

using namespace chemolab;

namespace {

ScalarField bump(const GridSpec& g, double x0, double y0, double w, double mass) {
  ScalarField b = ScalarField::sample(g, [&](double x, double y) {
    return std::exp(-((x - x0) * (x - x0) + (y - y0) * (y - y0)) / (w * w));
  });
  return (mass / integrate(b)) * b;
}

ScalarField wavy_c(const GridSpec& g, double amp) {
  return ScalarField::sample(g, [&](double x, double y) {
    return 1.0 + amp * std::cos(M_PI * x / g.lx) * std::cos(2.0 * M_PI * y / g.ly);
  });
}

PotentialData tilt(const GridSpec& g) {
  return PotentialData::make(ScalarField::sample(g, [](double x, double y) { return x + 0.5 * y; }));
}

// A small solenoidal swirl vanishing on the walls.
VectorField swirl(const GridSpec& g, double amp) {
  std::vector<double> psi(static_cast<std::size_t>(g.nx + 1) * (g.ny + 1));
  for (int j = 0; j <= g.ny; ++j)
    for (int i = 0; i <= g.nx; ++i) {
      const double x = i * g.hx(), y = j * g.hy();
      psi[static_cast<std::size_t>(j) * (g.nx + 1) + i] =
          amp * std::pow(std::sin(M_PI * x / g.lx) * std::sin(M_PI * y / g.ly), 2);
    }
  StokesSolver s(g);
  return s.from_stream_function(psi);
}

}  // namespace

TEST_CASE("potential data records its W1,inf norm") {
  const GridSpec g = GridSpec::make(16, 16);
  const PotentialData p = tilt(g);
  const VectorField gp = gradient(p.phi);
  CHECK(p.K1 == doctest::Approx(std::max(p.phi.max(), gp.max_abs())).epsilon(1e-15));
  CHECK(p.K1 >= 1.0);
}

TEST_CASE("variable transforms") {
  const GridSpec g = GridSpec::make(12, 10, 1.0, 0.7);
  VectorField u0(g);
  SUBCASE("c == c0_max maps to z == 0") {
    const SimState s = SimState::original(ScalarField::constant(g, 0.2), ScalarField::constant(g, 3.0),
                                          u0, Sensitivity::identity());
    const SimState l = to_log(s);
    CHECK(l.formulation == Formulation::Log);
    CHECK(l.z.max() == 0.0);
    CHECK(l.z.min() == 0.0);
  }
  SUBCASE("c = c0_max / e maps to z == 1") {
    SimState s = SimState::original(ScalarField::constant(g, 0.2), ScalarField::constant(g, 3.0), u0,
                                    Sensitivity::identity());
    s.c = ScalarField::constant(g, 3.0 * std::exp(-1.0));
    const SimState l = to_log(s);
    CHECK(l.z.min() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(l.z.max() == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("round trip") {
    std::mt19937_64 rng(3);
    ScalarField c = filtered_noise(g, rng);
    for (double& v : c.values()) v = std::exp(v);
    const SimState s = SimState::original(bump(g, 0.3, 0.3, 0.2, 0.4), c, u0, Sensitivity::regularized(0.1));
    const SimState back = to_original(to_log(s));
    double worst = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k)
      worst = std::max(worst, std::abs(back.c[k] - s.c[k]) / s.c[k]);
    CHECK(worst <= 1e-14);
    CHECK(back.n.values()[5] == s.n.values()[5]);
    CHECK(back.t == s.t);
  }
  SUBCASE("nonpositive c is reported with its cell") {
    SimState s = SimState::original(ScalarField::constant(g, 0.2), ScalarField::constant(g, 1.0), u0,
                                    Sensitivity::identity());
    s.c(4, 7) = 0.0;
    try {
      (void)to_log(s);
      FAIL("expected a ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("(4, 7)") != std::string::npos);
    }
    CHECK_THROWS_AS(to_original(s), ValidationError);
  }
  SUBCASE("initial data validation") {
    ScalarField bad = ScalarField::constant(g, 0.1);
    bad(0, 0) = -1e-3;
    CHECK_THROWS_AS(SimState::log(bad, ScalarField::constant(g, 1.0), u0, Sensitivity::identity()),
                    ValidationError);
    CHECK_THROWS_AS(SimState::log(ScalarField::constant(g, 0.1), ScalarField::constant(g, 0.0), u0,
                                  Sensitivity::identity()),
                    ValidationError);
    VectorField leaky(g);
    leaky.ux(0, 3) = 1.0;
    CHECK_THROWS_AS(SimState::log(ScalarField::constant(g, 0.1), ScalarField::constant(g, 1.0), leaky,
                                  Sensitivity::identity()),
                    ValidationError);
  }
}

TEST_CASE("spatially constant states follow the reaction ODE") {
  const GridSpec g = GridSpec::make(16, 16);
  const PotentialData zero = PotentialData::make(ScalarField::constant(g, 0.0));
  VectorField u0(g);
  const double nbar = 0.7, cbar = 2.0;

  SUBCASE("original: one step is the explicit Euler step of c' = -f(nbar) c") {
    for (const Sensitivity sens : {Sensitivity::identity(), Sensitivity::regularized(0.5)}) {
      const SimState s = SimState::original(ScalarField::constant(g, nbar), ScalarField::constant(g, cbar),
                                            u0, sens);
      const double dt = 1e-3;
      const SimState a = step_original(s, zero, dt);
      const double rate = f(sens, nbar);
      for (std::size_t k = 0; k < a.n.size(); ++k) {
        CHECK(a.n[k] == doctest::Approx(nbar).epsilon(1e-14));
        CHECK(a.c[k] == doctest::Approx(cbar * (1.0 - dt * rate)).epsilon(1e-13));
      }
      CHECK(std::abs(a.c[0] - cbar * std::exp(-rate * dt)) <= 0.6 * rate * rate * dt * dt * cbar);
    }
  }
  SUBCASE("original: first-order convergence to the ODE solution") {
    const SimState s = SimState::original(ScalarField::constant(g, nbar), ScalarField::constant(g, cbar),
                                          u0, Sensitivity::identity());
    Integrator it(g);
    auto err = [&](int steps) {
      SimState x = s;
      const double dt = 0.5 / steps;
      for (int k = 0; k < steps; ++k) x = it.step(x, zero, dt);
      return std::abs(x.c[37] - cbar * std::exp(-nbar * 0.5));
    };
    const double ratio = err(50) / err(100);
    CHECK(ratio == doctest::Approx(2.0).epsilon(0.05));
  }
  SUBCASE("log: z grows by dt f(nbar)") {
    const Sensitivity sens = Sensitivity::regularized(0.9);  // 1/eps < nbar*... keeps f off the identity
    SimState s = SimState::log(ScalarField::constant(g, 1.5), ScalarField::constant(g, cbar), u0, sens);
    s.z = ScalarField::constant(g, 0.25);
    const double dt = 2e-3;
    const SimState a = step_log(s, zero, dt);
    const double expected = 0.25 + dt * f(sens, 1.5);
    for (std::size_t k = 0; k < a.z.size(); ++k) {
      CHECK(a.z[k] == doctest::Approx(expected).epsilon(1e-14));
      CHECK(a.n[k] == doctest::Approx(1.5).epsilon(1e-14));
    }
    CHECK(a.u.max_abs() == 0.0);
    CHECK(a.t == dt);
  }
}

TEST_CASE("mass is conserved over 1000 steps") {
  const GridSpec g = GridSpec::make(24, 24);
  const PotentialData zero = PotentialData::make(ScalarField::constant(g, 0.0));
  const ScalarField n0 = ScalarField::sample(
      g, [](double x, double y) { return 1.0 + 0.05 * std::cos(M_PI * x) * std::cos(M_PI * y); });
  const double m0 = integrate(n0);
  VectorField u0(g);
  for (const Formulation form : {Formulation::Original, Formulation::Log}) {
    SimState s = form == Formulation::Original
                     ? SimState::original(n0, wavy_c(g, 0.2), u0, Sensitivity::identity())
                     : SimState::log(n0, wavy_c(g, 0.2), u0, Sensitivity::identity());
    Integrator it(g);
    for (int k = 0; k < 1000; ++k) s = it.step(s, zero, 5e-4);
    CHECK(std::abs(integrate(s.n) - m0) <= 1e-12 * m0);
  }
}

TEST_CASE("coupled steps keep mass, positivity and the maximum principle") {
  const GridSpec g = GridSpec::make(32, 32);
  const PotentialData phi = tilt(g);
  const ScalarField n0 = bump(g, 0.35, 0.6, 0.15, 0.3);
  const ScalarField c0 = wavy_c(g, 0.3);
  const VectorField u0 = swirl(g, 0.05);
  const double m0 = integrate(n0);

  SimState s = SimState::original(n0, c0, u0, Sensitivity::regularized(0.05));
  SimState l = to_log(s);
  Integrator it(g);
  const double dt = 0.25 * it.max_stable_dt(s);
  REQUIRE(dt > 0.0);
  double cmax = s.c.max();
  for (int k = 0; k < 200; ++k) {
    s = it.step(s, phi, dt);
    l = it.step(l, phi, dt);
    CHECK(s.c.max() <= cmax * (1.0 + 1e-14));
    cmax = s.c.max();
  }
  CHECK(cmax <= c0.max());
  CHECK(std::abs(integrate(s.n) - m0) <= 1e-12 * m0);
  CHECK(std::abs(integrate(l.n) - m0) <= 1e-12 * m0);
  CHECK(s.n.min() >= -1e-10 * s.n.max());
  CHECK(l.n.min() >= -1e-10 * l.n.max());
  CHECK(l.z.min() >= -1e-8);
  CHECK(divergence(s.u).max() <= 1e-10);
  CHECK(std::abs(s.P.mean()) <= 1e-12);
  // Both formulations discretize the same flow.
  const ScalarField cl = l.c_field();
  double diff = 0.0;
  for (std::size_t k = 0; k < cl.size(); ++k) diff = std::max(diff, std::abs(cl[k] - s.c[k]));
  CHECK(diff <= 1e-2 * c0.max());
}

TEST_CASE("step errors") {
  const GridSpec g = GridSpec::make(16, 16);
  const PotentialData phi = tilt(g);
  const SimState s = SimState::log(bump(g, 0.5, 0.5, 0.1, 1.0), wavy_c(g, 0.5), swirl(g, 0.5),
                                   Sensitivity::identity());
  Integrator it(g);
  const double dmax = it.max_stable_dt(s);
  SUBCASE("CFL violation names a smaller dt") {
    try {
      (void)it.step(s, phi, 2.0 * dmax);
      FAIL("expected a SolverError");
    } catch (const SolverError& e) {
      CHECK(std::string(e.what()).find("reduce dt") != std::string::npos);
    }
    CHECK_NOTHROW((void)it.step(s, phi, 0.9 * dmax));
  }
  SUBCASE("nonpositive dt") { CHECK_THROWS_AS((void)it.step(s, phi, 0.0), ValidationError); }
  SUBCASE("formulation mismatch") { CHECK_THROWS_AS((void)it.step_original(s, phi, 1e-4), ValidationError); }
  SUBCASE("depleted c in the original formulation advises the log variables") {
    SimState o = to_original(s);
    o.c(3, 3) = 1e-13 * o.c0_max;
    try {
      (void)it.step(o, phi, 1e-6);
      FAIL("expected a SolverError");
    } catch (const SolverError& e) {
      CHECK(std::string(e.what()).find("log formulation") != std::string::npos);
    }
  }
}

TEST_CASE("transport sign switch") {
  const GridSpec g = GridSpec::make(16, 16);
  const PotentialData phi = PotentialData::make(ScalarField::constant(g, 0.0));
  const ScalarField n0 = ScalarField::constant(g, 0.2);
  DynamicsOptions printed;
  printed.transport_sign = TransportSign::AsPrinted;
  SUBCASE("identical without flow") {
    const SimState s = SimState::log(n0, wavy_c(g, 0.3), VectorField(g), Sensitivity::identity());
    const SimState a = step_log(s, phi, 1e-3);
    const SimState b = step_log(s, phi, 1e-3, printed);
    for (std::size_t k = 0; k < a.z.size(); ++k) CHECK(a.z[k] == b.z[k]);
  }
  SUBCASE("chain-rule sign matches the original formulation") {
    const SimState o = SimState::original(n0, wavy_c(g, 0.3), swirl(g, 0.2), Sensitivity::identity());
    const double dt = 1e-3;
    const ScalarField ref = to_log(step_original(o, phi, dt)).z;
    const ScalarField chain = step_log(to_log(o), phi, dt).z;
    const ScalarField flipped = step_log(to_log(o), phi, dt, printed).z;
    const double e_chain = lp_norm(chain - ref, INFINITY);
    const double e_flip = lp_norm(flipped - ref, INFINITY);
    CHECK(e_chain < 0.5 * e_flip);
  }
  CHECK(std::string(to_string(TransportSign::AsPrinted)) != to_string(TransportSign::ChainRule));
}

TEST_CASE("run driver") {
  const GridSpec g = GridSpec::make(16, 16);
  const PotentialData phi = tilt(g);
  const SimState s = SimState::log(bump(g, 0.4, 0.5, 0.2, 0.2), wavy_c(g, 0.2), swirl(g, 0.02),
                                   Sensitivity::regularized(0.1));
  Integrator it(g);
  const double dt = 1e-3;

  SUBCASE("empty interval") {
    const RunResult r = run(it, s, phi, dt, s.t, 1);
    CHECK(r.trace.empty());
    CHECK(r.ok());
    CHECK(r.final_state.t == s.t);
    CHECK(r.final_state.n.values()[3] == s.n.values()[3]);
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(run(it, s, phi, dt, -1.0, 1), ValidationError);
    CHECK_THROWS_AS(run(it, s, phi, 0.0, 1.0, 1), ValidationError);
    CHECK_THROWS_AS(run(it, s, phi, dt, 1.0, 0), ValidationError);
  }
  SUBCASE("determinism") {
    const RunResult a = run(it, s, phi, dt, 0.1, 5);
    const RunResult b = run(s, phi, dt, 0.1, 5);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t k = 0; k < a.trace.size(); ++k) {
      CHECK(a.trace[k].t == b.trace[k].t);
      CHECK(a.trace[k].F_mu == b.trace[k].F_mu);
      CHECK(a.trace[k].linf_u == b.trace[k].linf_u);
      CHECK(a.trace[k].residual_l2 == b.trace[k].residual_l2);
    }
    for (std::size_t k = 0; k < a.final_state.z.size(); ++k) CHECK(a.final_state.z[k] == b.final_state.z[k]);
  }
  SUBCASE("record counts and times") {
    const RunResult a = run(it, s, phi, dt, 0.1, 10);
    const RunResult b = run(it, s, phi, dt, 0.1, 5);
    const long na = static_cast<long>(a.trace.size()) - 1, nb = static_cast<long>(b.trace.size()) - 1;
    CHECK(std::abs(nb - 2 * na) <= 1);
    CHECK(a.trace.front().t == s.t);
    CHECK(a.trace.back().t == 0.1);
    for (std::size_t k = 1; k < a.trace.size(); ++k) CHECK(a.trace[k].t > a.trace[k - 1].t);
    CHECK(a.final_state.t == 0.1);
    CHECK(std::isnan(a.trace.back().residual_energy));
  }
  SUBCASE("last step lands on t_end") {
    const RunResult a = run(it, s, phi, dt, 0.0105, 1);
    CHECK(a.final_state.t == 0.0105);
    CHECK(a.trace.size() == 12);
  }
  SUBCASE("a failing step returns the partial trace") {
    const RunResult r = run(it, s, phi, 10.0, 100.0, 1);
    CHECK_FALSE(r.ok());
    CHECK(r.trace.size() == 1);
    CHECK_THROWS_AS(std::rethrow_exception(r.error), SolverError);
  }
  SUBCASE("snapshot callback sees every record") {
    std::size_t calls = 0;
    RunOptions opts;
    opts.on_record = [&](const SimState&, std::size_t idx) { CHECK(idx == calls++); };
    const RunResult r = run(it, s, phi, dt, 0.05, 10, opts);
    CHECK(calls == r.trace.size());
  }
}
