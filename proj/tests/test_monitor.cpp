#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"

#include "chemolab/monitor.hpp"
#include "chemolab/random_fields.hpp"
#include "chemolab/run.hpp"

using namespace chemolab;

namespace {

PotentialData no_potential(const GridSpec& g) { return PotentialData::make(ScalarField::constant(g, 0.0)); }

SimState constant_state(const GridSpec& g, double nbar, double cbar) {
  return SimState::log(ScalarField::constant(g, nbar), ScalarField::constant(g, cbar), VectorField(g),
                       Sensitivity::identity());
}

Certificate toy_certificate(const SimState& s) {
  Constants k;
  k.K2 = 1.3;
  k.K3 = 0.8;
  k.Ku = 1.4;
  k.lambda1 = 52.3;
  return certify(s.n, s.c_field(), s.u, k);
}

std::vector<TraceRecord> constant_trace(double nbar, double area, int count, double dt) {
  std::vector<TraceRecord> tr;
  for (int k = 0; k < count; ++k) {
    TraceRecord r;
    r.t = k * dt;
    r.mass_n = nbar * area;
    r.int_n_sq = nbar * nbar * area;
    tr.push_back(r);
  }
  return tr;
}

}  // namespace

TEST_CASE("trace csv round trip") {
  std::vector<TraceRecord> tr(3);
  for (int k = 0; k < 3; ++k) {
    tr[k].t = 0.1 * k + 1e-17;
    tr[k].F_mu = -1.0 / 3.0 * k;
    tr[k].d_n = k == 2 ? INFINITY : 0.25;
    tr[k].residual_energy = NAN;
  }
  std::stringstream ss;
  write_trace_csv(ss, tr, {"formulation = log", "mu = 0.5"});
  std::string first;
  std::getline(ss, first);
  CHECK(first == "# formulation = log");
  ss.seekg(0);
  std::vector<std::string> comments;
  const auto back = read_trace_csv(ss, &comments);
  REQUIRE(back.size() == 3);
  CHECK(comments.size() == 2);
  CHECK(comments[1] == "mu = 0.5");
  for (int k = 0; k < 3; ++k) {
    CHECK(back[k].t == tr[k].t);
    CHECK(back[k].F_mu == tr[k].F_mu);
    CHECK(back[k].d_n == tr[k].d_n);
    CHECK(std::isnan(back[k].residual_energy));
  }
  const auto& cols = trace_columns();
  const std::vector<std::string> leading = {"t", "mass_n", "linf_n_minus_mean", "linf_c", "linf_u",
                                            "linf_gradc_over_c", "F_mu", "int_gradz_sq", "int_nlogn",
                                            "int_n_sq", "dissipation_n", "dissipation_z"};
  for (std::size_t k = 0; k < leading.size(); ++k) CHECK(cols[k] == leading[k]);

  std::stringstream bad("t,mass_n\n0,1\n");
  CHECK_THROWS_AS(read_trace_csv(bad), ValidationError);
  std::stringstream ragged;
  write_trace_csv(ragged, tr);
  std::string text = ragged.str() + "1,2\n";
  std::stringstream r2(text);
  CHECK_THROWS_AS(read_trace_csv(r2), ValidationError);
}

TEST_CASE("audits vanish on spatially constant states") {
  const GridSpec g = GridSpec::make(16, 16);
  const SimState a = constant_state(g, 0.4, 2.0);
  const double dt = 1e-3;
  const SimState b = step_log(a, no_potential(g), dt);
  const AuditValue l2 = audit_l2(a, b, dt);
  CHECK(std::abs(l2.residual) <= 1e-12);
  CHECK(std::abs(audit_z4(a, b, dt, 0.5, 3.0).residual) <= 1e-20);
  const StateDiagnostics da = diagnose(a, 0.4), db = diagnose(b, 0.4);
  Certificate c = toy_certificate(a);
  c.mu = 0.4;
  CHECK(std::abs(energy_residual(da, db, dt, c, 0.0)) <= 1e-10);
  CHECK(db.int_z == doctest::Approx(dt * 0.4).epsilon(1e-12));
}

TEST_CASE("audit_l2 is homogeneous of degree two in n") {
  const GridSpec g = GridSpec::make(24, 24);
  std::mt19937_64 rng(11);
  ScalarField n = filtered_noise(g, rng);
  for (double& v : n.values()) v = std::exp(v);
  ScalarField z = filtered_noise(g, rng);
  SimState a = constant_state(g, 1.0, 1.0);
  a.n = n;
  a.z = z;
  const SimState b = step_log(a, no_potential(g), 1e-4);
  SimState a2 = a, b2 = b;
  a2.n = 2.0 * a.n;
  b2.n = 2.0 * b.n;
  const AuditValue v1 = audit_l2(a, b, 1e-4), v2 = audit_l2(a2, b2, 1e-4);
  CHECK(v2.residual == doctest::Approx(4.0 * v1.residual).epsilon(1e-12));
  CHECK(v2.left == doctest::Approx(4.0 * v1.left).epsilon(1e-12));
  CHECK(v2.right == doctest::Approx(4.0 * v1.right).epsilon(1e-12));
  // The testing identity holds along the step.
  CHECK(v1.normalized() <= 0.02);
}

TEST_CASE("audit_z4") {
  const GridSpec g = GridSpec::make(128, 8);
  const double amp = 0.3;
  SimState s = constant_state(g, 0.0, 1.0);
  s.z = ScalarField::sample(g, [&](double x, double) { return amp * (1.0 + std::cos(M_PI * x)); });

  SUBCASE("single-mode integrals") {
    const StateDiagnostics d = diagnose(s, 1.0);
    const double a2 = amp * amp * M_PI * M_PI;
    CHECK(d.int_gz2 == doctest::Approx(a2 / 2).epsilon(1e-3));
    CHECK(d.int_gz4 == doctest::Approx(a2 * a2 * 3.0 / 8.0).epsilon(1e-3));
    CHECK(d.int_gz6 == doctest::Approx(a2 * a2 * a2 * 5.0 / 16.0).epsilon(1e-3));
    CHECK(d.int_grad_gz2_sq == doctest::Approx(a2 * a2 * M_PI * M_PI / 2.0).epsilon(2e-3));
    CHECK(d.int_n2_gz2 == 0.0);
    CHECK(d.int_gz4_gradu == 0.0);
  }
  SUBCASE("diffusion run satisfies the inequality with C = 0") {
    Integrator it(g);
    const double dt = 1e-4;
    StateDiagnostics da = diagnose(s, 1.0);
    double worst = -INFINITY;
    for (int k = 0; k < 50; ++k) {
      s = it.step(s, no_potential(g), dt);
      const StateDiagnostics db = diagnose(s, 1.0);
      worst = std::max(worst, audit_z4(da, db, dt, 0.5, 0.0).normalized());
      da = db;
    }
    CHECK(worst <= 0.02);
  }
  SUBCASE("eta range and vanishing dissipation coefficient") {
    const SimState b = step_log(s, no_potential(g), 1e-4);
    const StateDiagnostics da = diagnose(s, 1.0), db = diagnose(b, 1.0);
    const AuditValue edge = audit_z4(da, db, 1e-4, 1.25, 0.0);
    CHECK(edge.left == doctest::Approx((db.int_gz4 - da.int_gz4) / 1e-4).epsilon(1e-14));
    CHECK_THROWS_AS(audit_z4(da, db, 1e-4, 1.3, 0.0), ValidationError);
    CHECK_THROWS_AS(audit_z4(da, db, 1e-4, 0.0, 0.0), ValidationError);
    CHECK_THROWS_AS(audit_z4(da, db, 0.0, 0.5, 0.0), ValidationError);
  }
}

TEST_CASE("z4 calibration") {
  const GridSpec g = GridSpec::make(24, 24);
  const double C = calibrate_z4_constant(g, 0.5, 3, 5, 2e-4, 20);
  CHECK(C >= 0.0);
  CHECK(std::isfinite(C));
  CHECK(calibrate_z4_constant(g, 0.5, 3, 5, 2e-4, 20) == C);
  CHECK_THROWS_AS(calibrate_z4_constant(g, 0.5, 0, 5, 2e-4, 20), ValidationError);
}

TEST_CASE("audit_zbound") {
  SUBCASE("constant density growing from z0 == 0") {
    const GridSpec g = GridSpec::make(16, 16, 2.0, 1.0);
    for (const Sensitivity sens : {Sensitivity::identity(), Sensitivity::regularized(0.5)}) {
      const double nbar = 3.0;
      const SimState s = SimState::log(ScalarField::constant(g, nbar), ScalarField::constant(g, 1.0),
                                       VectorField(g), sens);
      const RunResult r = run(s, no_potential(g), 1e-3, 0.05, 5);
      REQUIRE(r.ok());
      const ZBoundAudit a = audit_zbound(r.trace);
      const double expected = -(nbar - f(sens, nbar)) * g.area() * 0.05;
      CHECK(a.max_residual == doctest::Approx(std::max(0.0, expected)).epsilon(1e-9));
      CHECK(r.trace.back().int_z == doctest::Approx(f(sens, nbar) * g.area() * 0.05).epsilon(1e-12));
    }
  }
  SUBCASE("n == 0 diffusion run") {
    const GridSpec g = GridSpec::make(32, 32);
    std::mt19937_64 rng(2);
    ScalarField c0 = filtered_noise(g, rng, 4, 4, false);
    for (double& v : c0.values()) v = std::exp(0.5 * v / 3.0);
    const SimState s = SimState::log(ScalarField::constant(g, 0.0), c0, VectorField(g), Sensitivity::identity());
    const RunResult r = run(s, no_potential(g), 1e-4, 0.02, 2);
    REQUIRE(r.ok());
    const ZBoundAudit a = audit_zbound(r.trace);
    CHECK(a.max_relative <= 0.05);
    for (const auto& rec : r.trace) CHECK(rec.residual_zbound <= 1e-10);
  }
  CHECK(audit_zbound({}).max_residual == -INFINITY);
}

TEST_CASE("K4 audit") {
  SUBCASE("empty density") {
    const auto tr = constant_trace(0.0, 1.0, 11, 0.1);
    CHECK(audit_k4(tr, 0.7, 0.0, 0.3, 1.0) == doctest::Approx(-0.7 * 0.3).epsilon(1e-14));
  }
  SUBCASE("constant density against the closed form") {
    const double nbar = 0.5, area = 1.0, z0 = 0.2;
    const auto tr = constant_trace(nbar, area, 21, 0.1);
    const K4Trajectory k = k4_trajectory(tr, area, z0);
    CHECK(k.log_mean_sq[4] == doctest::Approx(std::log((nbar + 1) * (nbar + 1))).epsilon(1e-14));
    const double K4 = fit_K4({k});
    CHECK(audit_k4(tr, K4, nbar * area, z0, area) <= 1e-12);
    CHECK(audit_k4(tr, 0.9 * K4, nbar * area, z0, area) > 0.0);
    const double L = std::log(2.25), T = 2.0;
    CHECK(audit_k4(tr, 0.1, 0.5, z0, area) ==
          doctest::Approx(std::max(-0.1 * (z0 + 0.5), L * T - 0.1 * 1.5 * T - 0.1 * (z0 + 0.5))).epsilon(1e-12));
  }
}

TEST_CASE("convergence report") {
  SUBCASE("equilibrium trace") {
    const GridSpec g = GridSpec::make(16, 16);
    const SimState s = constant_state(g, 0.3, 1.0);
    const RunResult r = run(s, no_potential(g), 1e-2, 1.0, 5);
    REQUIRE(r.trace.size() >= 10);
    const ConvergenceReport rep = convergence_report(r.trace);
    for (const char* name : {"linf_n_minus_mean", "linf_u", "linf_gradc_over_c"}) {
      CHECK(rep.get(name).degenerate);
      CHECK(rep.get(name).achieved_threshold);
    }
    CHECK(rep.u_l2_degenerate);
    CHECK(rep.min_z_slope == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(rep.get("linf_c").fitted_rate == doctest::Approx(0.3).epsilon(1e-9));
    CHECK_THROWS_AS(rep.get("nope"), ValidationError);
  }
  SUBCASE("time shift invariance") {
    std::vector<TraceRecord> tr;
    for (int k = 0; k < 30; ++k) {
      TraceRecord r;
      r.t = 0.1 * k;
      r.linf_u = std::exp(-2.0 * r.t);
      r.l2_u = 3.0 * std::exp(-1.5 * r.t);
      r.linf_n_dev = 1e-1 * std::exp(-r.t);
      r.linf_gradc_over_c = 1e-4;
      r.linf_c = 1.0;
      r.min_z = 0.25 * r.t;
      tr.push_back(r);
    }
    const ConvergenceReport a = convergence_report(tr);
    for (auto& r : tr) r.t += 17.0;
    const ConvergenceReport b = convergence_report(tr);
    CHECK(a.get("linf_u").fitted_rate == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(b.get("linf_u").fitted_rate == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(a.u_l2_rate == doctest::Approx(1.5).epsilon(1e-10));
    CHECK(b.u_l2_rate == doctest::Approx(a.u_l2_rate).epsilon(1e-10));
    CHECK(b.min_z_slope == doctest::Approx(0.25).epsilon(1e-10));
    CHECK(b.get("linf_u").t_a == doctest::Approx(a.get("linf_u").t_a + 17.0));
    CHECK(a.get("linf_n_minus_mean").achieved_threshold == false);
    CHECK(a.get("linf_gradc_over_c").achieved_threshold);
    tr.resize(9);
    CHECK_THROWS_AS(convergence_report(tr), ValidationError);
  }
  SUBCASE("Stokes decay rate matches lambda1") {
    const GridSpec g = GridSpec::make(32, 32);
    Integrator it(g);
    const VectorField u0 = 0.1 * it.stokes().eigenfield();
    const SimState s = SimState::log(ScalarField::constant(g, 0.0), ScalarField::constant(g, 1.0), u0,
                                     Sensitivity::identity());
    const RunResult r = run(it, s, no_potential(g), 1e-3, 0.06, 3);
    REQUIRE(r.ok());
    const ConvergenceReport rep = convergence_report(r.trace);
    CHECK(rep.u_l2_rate == doctest::Approx(it.stokes().lambda1()).epsilon(0.1));
  }
}
