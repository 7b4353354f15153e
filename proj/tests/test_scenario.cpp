#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "chemolab/scenario.hpp"

using namespace chemolab;
namespace fs = std::filesystem;

namespace {

Config config_from(const std::string& text) {
  std::istringstream is(text);
  return Config::parse(is);
}

const char* kSmall = R"(
scenario = small_mass_eventual
grid.nx = 16
grid.ny = 16
run.dt = 2e-3
run.t_end = 0.2
run.t_end_tstar_factor = 0
run.trace_every = 5
n0.kind = gaussian_bump
n0.mass_fraction_of_mstar = 0.5
c0.floor = 1
c0.amplitude = 1e-3
u0.kind = eigenmode
u0.amplitude = 0.01
constants.K2 = 1.25
constants.K3 = 0.8
constants.Ku = 1.25
constants.k4_pilot = false
assert.enabled = false
)";

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("chemolab_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

RunConfig small_config(const fs::path& out) {
  Config c = config_from(kSmall);
  c.set("output.dir", out.string());
  return parse_run_config(c);
}

TraceRecord rec(double t, double F, double dn = 0.0, double dz = 0.0, double coeff = 1.0) {
  TraceRecord r;
  r.t = t;
  r.F_mu = F;
  r.d_n = dn;
  r.d_z = dz;
  r.energy_coefficient = coeff;
  return r;
}

}  // namespace

TEST_CASE("parse_run_config rejects invalid configs") {
  auto bad = [](const std::string& key, const std::string& value) {
    Config c = config_from(kSmall);
    c.set(key, value);
    CHECK_THROWS_AS(parse_run_config(c), ValidationError);
  };
  CHECK_NOTHROW(parse_run_config(config_from(kSmall)));
  bad("run.t_end", "0");
  bad("run.dt", "-1");
  bad("run.trace_every", "0");
  bad("run.formulation", "spectral");
  bad("scenario", "everything");
  bad("dynamics.transport_sign", "sideways");
  bad("sensitivity.eps", "0");
  bad("constants.file", "/nonexistent/constants.txt");
  bad("constants.inflation", "0.9");
  bad("energy.eta", "1.5");
  bad("c0.floor", "0");
  bad("u0.kind", "vortex");
  bad("grid.nx", "0");
  bad("typo.key", "3");
}

TEST_CASE("eps_sweep needs at least two eps values") {
  Config c = config_from(kSmall);
  c.set("scenario", "eps_sweep");
  c.set("n0.mass", "0.1");
  CHECK_THROWS_AS(parse_run_config(c), ValidationError);
  c.set("sensitivity.eps_list", "0.1, 0.05");
  CHECK_NOTHROW(parse_run_config(c));
}

TEST_CASE("parsed values and defaults") {
  const RunConfig rc = parse_run_config(config_from(kSmall));
  CHECK(rc.grid.nx == 16);
  CHECK(rc.dt == doctest::Approx(2e-3));
  CHECK(rc.formulation == FormulationChoice::Log);
  CHECK(rc.dynamics.transport_sign == TransportSign::ChainRule);
  CHECK(rc.constants.overrides.at("K3") == doctest::Approx(0.8));
  CHECK(rc.constants.inflation == doctest::Approx(1.25));
  REQUIRE(rc.mass_fraction_of_mstar);
  CHECK(*rc.mass_fraction_of_mstar == doctest::Approx(0.5));
  CHECK(rc.asserts.energy_slack == doctest::Approx(0.02));
}

TEST_CASE("trajectory helpers") {
  const std::vector<TraceRecord> tr = {rec(0, 5.0, 1, 1), rec(1, 4.0, 1, 1), rec(2, 4.5, 1, 1, 0.2),
                                       rec(3, 3.0, 1, 1, 0.3)};
  CHECK(worst_energy_increase(tr, 0.0) == doctest::Approx(0.5 / 5.0));
  CHECK(worst_energy_increase(tr, 2.0) < 0.0);
  CHECK(dissipation_budget(tr, 0.0, 1.0) == doctest::Approx(6.0));
  CHECK(dissipation_budget(tr, 1.0, 0.0) == doctest::Approx(2.0));
  CHECK(trajectory_kappa(tr, 2.0) == doctest::Approx(0.2));
  CHECK(trajectory_kappa(tr, 10.0) == 0.0);
}

TEST_CASE("small-mass scenario writes parseable, deterministic artifacts") {
  const fs::path a = fresh_dir("a"), b = fresh_dir("b");
  const ScenarioResult ra = run_scenario(small_config(a));
  const ScenarioResult rb = run_scenario(small_config(b));
  CHECK(ra.exit_code() == 0);
  REQUIRE(ra.certificate);
  CHECK(ra.certificate->small_mass);
  CHECK(ra.certificate->m == doctest::Approx(0.5 * ra.certificate->m_star).epsilon(1e-12));
  for (const char* f : {"trace.csv", "certificate.txt", "constants.txt", "report.txt"}) {
    CHECK(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }

  std::ifstream in(a / "trace.csv");
  std::vector<std::string> comments;
  const std::vector<TraceRecord> tr = read_trace_csv(in, &comments);
  REQUIRE(tr.size() == ra.trace.size());
  bool has_sign = false, has_cert = false;
  for (const auto& c : comments) {
    has_sign |= c == "transport_sign = chain_rule";
    has_cert |= c.rfind("cert.m_star = ", 0) == 0;
  }
  CHECK(has_sign);
  CHECK(has_cert);
  const double m0 = tr.front().mass_n;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    CHECK(tr[k].t == ra.trace[k].t);
    CHECK(std::abs(tr[k].mass_n - m0) <= 1e-10 * m0);
    CHECK(tr[k].min_n >= 0.0);
    CHECK(tr[k].linf_c <= tr.front().linf_c * (1 + 1e-8));
    CHECK(tr[k].d_n >= 0.0);
    CHECK(tr[k].d_z >= 0.0);
    if (k > 0) CHECK(tr[k].t > tr[k - 1].t);
  }
  CHECK(tr.back().t == doctest::Approx(0.2).epsilon(1e-14));

  const std::string report = report_run_dir(a);
  CHECK(report.find("certificate.small_mass = true") != std::string::npos);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("constants written by one run load into another") {
  const fs::path dir = fresh_dir("constants");
  Config c = config_from(R"(
scenario = constants
grid.nx = 16
grid.ny = 16
n0.mass = 0.1
c0.floor = 1
constants.ensemble = 2
constants.iterations = 10
constants.ku_masses = 0.1
constants.ku_t_end = 0.05
constants.k4_pilot = false
)");
  c.set("output.dir", dir.string());
  const ScenarioResult est = run_scenario(parse_run_config(c));
  CHECK(est.exit_code() == 0);
  std::ifstream in(dir / "constants.txt");
  const auto values = read_constants(in);
  for (const char* k : {"K1", "K2", "K3", "Ku", "lambda1", "C_poincare"}) {
    REQUIRE(values.count(k));
    CHECK(values.at(k) > 0.0);
  }

  Config s = config_from(kSmall);
  for (const char* k : {"constants.K2", "constants.K3", "constants.Ku"}) s.erase(k);
  s.set("constants.file", (dir / "constants.txt").string());
  const RunConfig rc = parse_run_config(s);
  Integrator integ(rc.grid, rc.dynamics);
  const InitialBundle init = build_initial(rc, integ.stokes());
  const ConstantsBundle cb = acquire_constants(rc, integ.stokes(), init);
  CHECK(cb.source == "file");
  CHECK(cb.k.K2 == doctest::Approx(1.25 * values.at("K2")).epsilon(1e-15));
  CHECK(cb.k.K3 == doctest::Approx(est.constants.k.K3).epsilon(1e-15));
  CHECK(cb.k.Ku == doctest::Approx(est.constants.k.Ku).epsilon(1e-15));
  CHECK(cb.k.lambda1 == doctest::Approx(est.constants.k.lambda1).epsilon(1e-15));
  fs::remove_all(dir);
}

TEST_CASE("failed assertions map to exit code 3, run errors to 2") {
  const fs::path dir = fresh_dir("asserts");
  RunConfig rc = small_config(dir);
  rc.asserts.enabled = true;
  rc.asserts.zbound_slack = -1.0;
  CHECK(run_scenario(rc).exit_code() == 3);
  rc.asserts.enabled = false;
  CHECK(run_scenario(rc).exit_code() == 0);

  rc = small_config(dir);
  rc.dt = 1.0;  // violates the transport CFL bound
  const ScenarioResult r = run_scenario(rc);
  CHECK(r.exit_code() == 2);
  CHECK(fs::exists(dir / "report.txt"));
  CHECK(slurp(dir / "report.txt").find("run_error = ") != std::string::npos);
  fs::remove_all(dir);
}
