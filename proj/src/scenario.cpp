#include "chemolab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "chemolab/field_io.hpp"
#include "chemolab/recipes.hpp"

namespace chemolab {

namespace fs = std::filesystem;

const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::SmallMassEventual: return "small_mass_eventual";
    case ScenarioKind::Thm2Global: return "thm2_global";
    case ScenarioKind::EpsSweep: return "eps_sweep";
    case ScenarioKind::Constants: return "constants";
    case ScenarioKind::StokesDecay: return "stokes_decay";
  }
  return "?";
}

Sensitivity RunConfig::sensitivity() const { return sensitivity_from(sensitivity_kind, eps); }

bool ScenarioResult::all_checks_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

int ScenarioResult::exit_code() const {
  if (run_error) return 2;
  if (config.asserts.enabled && !all_checks_pass()) return 3;
  return 0;
}

// ---------------------------------------------------------------- parsing

namespace {

const std::set<std::string> kRecipeKeys = {
    "n0.kind",  "n0.mass",      "n0.center", "n0.width", "n0.bump_fraction", "n0.seed",  "n0.cutoff",
    "n0.contrast", "n0.file",   "c0.kind",   "c0.floor", "c0.amplitude",     "c0.kx",    "c0.ky",
    "c0.seed",  "c0.cutoff",    "c0.file",   "u0.kind",  "u0.amplitude",     "u0.seed",  "phi.kind",
    "phi.gx",   "phi.gy",       "phi.amplitude", "phi.kx", "phi.ky",         "phi.file", "grid.nx",
    "grid.ny",  "grid.lx",      "grid.ly"};

const char* kConstantKeys[] = {"K1", "K2", "K3", "K4", "Ku", "lambda1"};

ScenarioKind scenario_from(const std::string& s) {
  for (ScenarioKind k : {ScenarioKind::SmallMassEventual, ScenarioKind::Thm2Global, ScenarioKind::EpsSweep,
                         ScenarioKind::Constants, ScenarioKind::StokesDecay})
    if (s == to_string(k)) return k;
  throw ValidationError("scenario: unknown scenario '" + s + "'");
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError("config: " + msg);
}

}  // namespace

RunConfig parse_run_config(const Config& cfg) {
  RunConfig rc;
  rc.raw = cfg;
  const Config& c = rc.raw;
  rc.scenario = scenario_from(c.get_string("scenario", "small_mass_eventual"));
  rc.grid = grid_from_config(c);
  rc.dt = c.get_double("run.dt", 1e-3);
  rc.t_end = c.get_double("run.t_end", 1.0);
  require(rc.dt > 0.0 && std::isfinite(rc.dt), "run.dt must be positive");
  require(rc.t_end > 0.0 && std::isfinite(rc.t_end), "run.t_end must be positive");
  rc.trace_every = static_cast<int>(c.get_int("run.trace_every", 10));
  require(rc.trace_every >= 1, "run.trace_every must be >= 1");
  rc.snapshot_every = static_cast<int>(c.get_int("run.snapshot_every", 0));
  require(rc.snapshot_every >= 0, "run.snapshot_every must be >= 0");
  rc.t_end_tstar_factor = c.get_double("run.t_end_tstar_factor", 2.0);
  require(rc.t_end_tstar_factor >= 0.0, "run.t_end_tstar_factor must be >= 0");
  const std::string form = c.get_string("run.formulation", "log");
  if (form == "log") rc.formulation = FormulationChoice::Log;
  else if (form == "original") rc.formulation = FormulationChoice::Original;
  else if (form == "both") rc.formulation = FormulationChoice::Both;
  else throw ValidationError("config: run.formulation must be original, log or both");
  const long seed = c.get_int("run.seed", 1);
  require(seed >= 0, "run.seed must be nonnegative");
  rc.seed = static_cast<unsigned long>(seed);

  rc.sensitivity_kind = c.get_string("sensitivity.kind", "eps");
  rc.eps = c.get_double("sensitivity.eps", 0.05);
  rc.eps_list = c.get_doubles("sensitivity.eps_list", {});
  (void)rc.sensitivity();
  for (double e : rc.eps_list) (void)Sensitivity::regularized(e);
  if (rc.scenario == ScenarioKind::EpsSweep)
    require(rc.eps_list.size() >= 2, "eps_sweep needs sensitivity.eps_list with at least two values");

  const std::string sign = c.get_string("dynamics.transport_sign", "chain_rule");
  if (sign == "chain_rule") rc.dynamics.transport_sign = TransportSign::ChainRule;
  else if (sign == "as_printed") rc.dynamics.transport_sign = TransportSign::AsPrinted;
  else throw ValidationError("config: dynamics.transport_sign must be chain_rule or as_printed");
  rc.dynamics.cfl = c.get_double("dynamics.cfl", 0.4);
  require(rc.dynamics.cfl > 0.0 && rc.dynamics.cfl <= 1.0, "dynamics.cfl must lie in (0, 1]");
  const std::string scheme = c.get_string("dynamics.stokes_scheme", "monolithic");
  if (scheme == "monolithic") rc.dynamics.stokes_scheme = StokesScheme::Monolithic;
  else if (scheme == "projection") rc.dynamics.stokes_scheme = StokesScheme::Projection;
  else throw ValidationError("config: dynamics.stokes_scheme must be monolithic or projection");
  rc.dynamics.stokes_tolerance = c.get_double("dynamics.stokes_tolerance", 1e-10);

  rc.mu = c.get_optional_double("energy.mu");
  if (rc.mu) (void)EnergyParams::make(*rc.mu);
  rc.eta = c.get_optional_double("energy.eta");
  if (rc.eta) require(*rc.eta > 0.0 && *rc.eta < 1.0, "energy.eta must lie in (0, 1)");
  rc.mass_fraction_of_mstar = c.get_optional_double("n0.mass_fraction_of_mstar");
  if (rc.mass_fraction_of_mstar) {
    require(*rc.mass_fraction_of_mstar > 0.0, "n0.mass_fraction_of_mstar must be positive");
    if (!rc.raw.has("n0.mass")) rc.raw.set("n0.mass", "1");
  }

  ConstantSettings& cs = rc.constants;
  if (c.has("constants.file")) {
    cs.file = c.get_string("constants.file", "");
    fs::path p(*cs.file);
    if (p.is_relative()) p = c.base_dir() / p;
    require(fs::exists(p), "constants.file does not exist: " + p.string());
  }
  for (const char* k : kConstantKeys)
    if (auto v = c.get_optional_double(std::string("constants.") + k)) {
      require(*v >= 0.0, std::string("constants.") + k + " must be nonnegative");
      cs.overrides[k] = *v;
    }
  cs.ensemble = static_cast<int>(c.get_int("constants.ensemble", cs.ensemble));
  cs.iterations = static_cast<int>(c.get_int("constants.iterations", cs.iterations));
  cs.step = c.get_double("constants.step", cs.step);
  cs.inflation = c.get_double("constants.inflation", cs.inflation);
  cs.verify_trials = static_cast<int>(c.get_int("constants.verify_trials", cs.verify_trials));
  cs.ku_masses = c.get_doubles("constants.ku_masses", cs.ku_masses);
  cs.ku_t_end = c.get_double("constants.ku_t_end", cs.ku_t_end);
  cs.k4_pilot = c.get_bool("constants.k4_pilot", cs.k4_pilot);
  cs.k4_pilot_masses = c.get_doubles("constants.k4_pilot_masses", cs.k4_pilot_masses);
  cs.k4_pilot_t_end = c.get_double("constants.k4_pilot_t_end", cs.k4_pilot_t_end);
  require(cs.ensemble >= 1 && cs.iterations >= 0 && cs.step > 0.0, "constants ensemble settings out of range");
  require(cs.inflation >= 1.0, "constants.inflation must be >= 1");
  require(cs.verify_trials >= 0, "constants.verify_trials must be >= 0");
  require(cs.ku_t_end > 0.0 && cs.k4_pilot_t_end > 0.0, "constant trial horizons must be positive");

  AssertSettings& a = rc.asserts;
  a.enabled = c.get_bool("assert.enabled", a.enabled);
  a.n_dev_rel = c.get_double("assert.n_dev_rel", a.n_dev_rel);
  a.gradc_over_c = c.get_double("assert.gradc_over_c", a.gradc_over_c);
  a.u_rel = c.get_double("assert.u_rel", a.u_rel);
  a.u_abs = c.get_double("assert.u_abs", a.u_abs);
  a.min_z_slope_fraction = c.get_double("assert.min_z_slope_fraction", a.min_z_slope_fraction);
  a.energy_slack = c.get_double("assert.energy_slack", a.energy_slack);
  a.budget_factor = c.get_double("assert.budget_factor", a.budget_factor);
  a.residual_slack = c.get_double("assert.residual_slack", a.residual_slack);
  a.zbound_slack = c.get_double("assert.zbound_slack", a.zbound_slack);
  a.stokes_rate_tolerance = c.get_double("assert.stokes_rate_tolerance", a.stokes_rate_tolerance);

  rc.audit_eta = c.get_double("audit.eta", rc.audit_eta);
  require(rc.audit_eta > 0.0 && rc.audit_eta <= 1.25, "audit.eta must lie in (0, 5/4]");
  rc.z4_samples = static_cast<int>(c.get_int("audit.z4_samples", rc.z4_samples));
  rc.z4_steps = static_cast<int>(c.get_int("audit.z4_steps", rc.z4_steps));
  require(rc.z4_samples >= 1 && rc.z4_steps >= 1, "audit.z4_samples and audit.z4_steps must be >= 1");
  rc.stokes_samples = static_cast<int>(c.get_int("stokes.samples", rc.stokes_samples));
  rc.stokes_amplitude = c.get_double("stokes.amplitude", rc.stokes_amplitude);
  require(rc.stokes_samples >= 1 && rc.stokes_amplitude > 0.0, "stokes.samples and stokes.amplitude out of range");
  rc.output_dir = c.get_string("output.dir", "run");

  // Recipes are checked now so that a bad config leaves no artifacts behind.
  (void)density_recipe(rc.raw, rc.grid, rc.seed);
  (void)signal_recipe(rc.raw, rc.grid, rc.seed);
  (void)potential_recipe(rc.raw, rc.grid);
  const std::string ukind = rc.raw.get_string("u0.kind", "zero");
  require(ukind == "zero" || ukind == "eigenmode" || ukind == "random", "u0.kind must be zero, eigenmode or random");
  if (ukind != "zero") require(rc.raw.get_double("u0.amplitude", -1.0) >= 0.0, "u0.amplitude must be given");
  (void)rc.raw.get_int("u0.seed", 0);

  std::vector<std::string> unknown;
  for (const auto& k : rc.raw.unused_keys())
    if (!kRecipeKeys.count(k)) unknown.push_back(k);
  if (!unknown.empty()) {
    std::string list;
    for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
    throw ValidationError("config: unknown keys: " + list);
  }
  return rc;
}

// ---------------------------------------------------------------- building blocks

InitialBundle build_initial(const RunConfig& cfg, const StokesSolver& stokes) {
  InitialBundle b;
  b.n0 = density_recipe(cfg.raw, cfg.grid, cfg.seed);
  b.c0 = signal_recipe(cfg.raw, cfg.grid, cfg.seed);
  b.u0 = velocity_recipe(cfg.raw, stokes, cfg.seed);
  b.phi = PotentialData::make(potential_recipe(cfg.raw, cfg.grid));
  return b;
}

namespace {

ScalarField unit_bump(const GridSpec& g) {
  ScalarField b = ScalarField::sample(g, [&](double x, double y) {
    const double dx = (x - 0.3 * g.lx) / g.lx, dy = (y - 0.7 * g.ly) / g.ly;
    return std::exp(-(dx * dx + dy * dy) / 0.02);
  });
  return (1.0 / integrate(b)) * b;
}

double fit_ku_from_trials(const RunConfig& cfg, const StokesSolver& stokes, const PotentialData& phi,
                          double lambda1) {
  const ScalarField shape = unit_bump(cfg.grid);
  std::vector<KuTrial> trials;
  const VectorField u0 = random_solenoidal(stokes, cfg.seed + 101, 0.1);
  const double dt = std::min(cfg.dt, 1e-3);
  for (double L : cfg.constants.ku_masses) {
    if (!(L > 0.0)) throw ValidationError("constants.ku_masses must be positive");
    trials.push_back(simulate_stokes_trial(stokes, u0, L * shape, phi.phi, dt, cfg.constants.ku_t_end, 5));
  }
  return fit_Ku(trials, lambda1);
}

double fit_k4_pilot(const RunConfig& cfg, const Integrator& integ, const InitialBundle& init) {
  const double m = integrate(init.n0);
  const ScalarField shape = m > 0.0 ? (1.0 / m) * init.n0 : unit_bump(cfg.grid);
  std::vector<K4Trajectory> trajs;
  const double area = cfg.grid.area();
  for (double mass : cfg.constants.k4_pilot_masses) {
    if (!(mass > 0.0)) throw ValidationError("constants.k4_pilot_masses must be positive");
    const SimState s = SimState::log(mass * shape, init.c0, init.u0, cfg.sensitivity());
    const double dt = std::min(cfg.dt, 0.25 * integ.max_stable_dt(s));
    const RunResult r = run(integ, s, init.phi, dt, cfg.constants.k4_pilot_t_end, 5);
    if (r.error) std::rethrow_exception(r.error);
    trajs.push_back(k4_trajectory(r.trace, area, r.trace.front().int_z));
  }
  return fit_K4(trajs);
}

}  // namespace

ConstantsBundle acquire_constants(const RunConfig& cfg, const StokesSolver& stokes, const InitialBundle& init) {
  ConstantsBundle b;
  const ConstantSettings& cs = cfg.constants;
  b.inflation = cs.inflation;
  std::map<std::string, double> file_values;
  if (cs.file) {
    fs::path p(*cs.file);
    if (p.is_relative()) p = cfg.raw.base_dir() / p;
    std::ifstream in(p);
    if (!in) throw ValidationError("constants.file: cannot open " + p.string());
    file_values = read_constants(in);
    b.source = "file";
  } else {
    b.source = "estimated";
  }
  auto pick = [&](const char* name) -> std::optional<double> {
    if (auto it = cs.overrides.find(name); it != cs.overrides.end()) return it->second;
    if (auto it = file_values.find(name); it != file_values.end()) {
      static const std::set<std::string> inflated = {"K2", "K3", "Ku", "K4"};
      const double infl = file_values.count("inflation") ? file_values.at("inflation") : 1.0;
      return inflated.count(name) ? it->second * infl : it->second;
    }
    return std::nullopt;
  };

  b.k.K1 = pick("K1").value_or(init.phi.K1);
  b.k.lambda1 = pick("lambda1").value_or(0.0);
  if (!(b.k.lambda1 > 0.0)) b.k.lambda1 = stokes.lambda1();
  for (ConstantName name : {ConstantName::K2, ConstantName::K3}) {
    double* slot = name == ConstantName::K2 ? &b.k.K2 : &b.k.K3;
    if (auto v = pick(to_string(name))) {
      *slot = *v;
      continue;
    }
    ConstantEstimate e = estimate(name, cfg.grid, cs.ensemble, cs.iterations, cs.step, cfg.seed);
    if (cs.verify_trials > 0) {
      VerifyReport rep;
      e = verify_and_refine(e, cs.verify_trials, 1.1, cfg.seed + 17, &rep);
      b.verification.push_back(rep);
    }
    *slot = e.value * cs.inflation;
    b.estimates.push_back(std::move(e));
  }
  if (auto v = pick("Ku")) {
    b.k.Ku = *v;
  } else {
    b.Ku_raw = fit_ku_from_trials(cfg, stokes, init.phi, b.k.lambda1);
    b.k.Ku = b.Ku_raw * cs.inflation;
  }
  if (auto v = pick("K4")) {
    b.k.K4 = *v;
  } else if (cs.k4_pilot) {
    Integrator integ(cfg.grid, cfg.dynamics);
    b.K4_raw = fit_k4_pilot(cfg, integ, init);
    b.k.K4 = b.K4_raw * cs.inflation;
  }
  if (!cs.overrides.empty() && b.estimates.empty() && b.Ku_raw == 0.0 && !cs.file) b.source = "override";
  return b;
}

// ---------------------------------------------------------------- trajectory helpers

double worst_energy_increase(const std::vector<TraceRecord>& trace, double t_from) {
  double worst = -INFINITY;
  // Running minimum over later records keeps this linear.
  double later_max = -INFINITY;
  for (std::size_t k = trace.size(); k-- > 0;) {
    if (trace[k].t < t_from) break;
    if (std::isfinite(later_max))
      worst = std::max(worst, (later_max - trace[k].F_mu) / (1.0 + std::abs(trace[k].F_mu)));
    later_max = std::max(later_max, trace[k].F_mu);
  }
  return worst;
}

double dissipation_budget(const std::vector<TraceRecord>& trace, double t_from, double kappa) {
  double s = 0.0;
  for (std::size_t k = 1; k < trace.size(); ++k) {
    if (trace[k - 1].t < t_from) continue;
    const double a = trace[k - 1].d_n + kappa * trace[k - 1].d_z;
    const double b = trace[k].d_n + kappa * trace[k].d_z;
    s += 0.5 * (a + b) * (trace[k].t - trace[k - 1].t);
  }
  return s;
}

double trajectory_kappa(const std::vector<TraceRecord>& trace, double t_from) {
  double k = INFINITY;
  for (const auto& r : trace)
    if (r.t >= t_from && std::isfinite(r.energy_coefficient)) k = std::min(k, r.energy_coefficient);
  return std::isfinite(k) ? std::max(0.0, k) : 0.0;
}

namespace {

std::string fmt_num(double v) { return fmt::format("{:.10g}", v); }

struct Snapshots {
  fs::path dir;
  int every = 0;
  std::string tag;
  void operator()(const SimState& s, std::size_t idx) const {
    if (every <= 0 || idx % static_cast<std::size_t>(every) != 0) return;
    fs::create_directories(dir);
    const std::string stem = fmt::format("{}{:06d}", tag, idx);
    write_snapshot(dir / ("n_" + stem + ".csf"), s.n);
    write_snapshot(dir / ("c_" + stem + ".csf"), s.c_field());
  }
};

std::vector<std::string> header_lines(const RunConfig& cfg, const Sensitivity& sens, Formulation form,
                                      const std::optional<Certificate>& cert, double mu) {
  std::vector<std::string> h;
  h.push_back(fmt::format("scenario = {}", to_string(cfg.scenario)));
  h.push_back(fmt::format("formulation = {}", to_string(form)));
  h.push_back(fmt::format("transport_sign = {}", to_string(cfg.dynamics.transport_sign)));
  h.push_back(sens.kind == Sensitivity::Kind::Identity ? std::string("sensitivity = identity")
                                                       : fmt::format("sensitivity = eps {}", sens.eps));
  h.push_back(fmt::format("grid = {}x{} {}x{}", cfg.grid.nx, cfg.grid.ny, cfg.grid.lx, cfg.grid.ly));
  h.push_back(fmt::format("dt = {}", cfg.dt));
  h.push_back(fmt::format("seed = {}", cfg.seed));
  h.push_back(fmt::format("mu = {}", fmt_num(mu)));
  if (cert) {
    std::ostringstream os;
    write_certificate(os, *cert, "cert.");
    std::string line;
    std::istringstream is(os.str());
    while (std::getline(is, line)) h.push_back(line);
  }
  return h;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw SolverError("cannot write " + p.string());
  out << text;
}

void write_trace(const fs::path& p, const std::vector<TraceRecord>& trace, const std::vector<std::string>& header) {
  std::ofstream out(p);
  if (!out) throw SolverError("cannot write " + p.string());
  write_trace_csv(out, trace, header);
}

void write_constants_file(const fs::path& p, const ConstantsBundle& b, double C_poincare = NAN) {
  std::ofstream out(p);
  if (!out) throw SolverError("cannot write " + p.string());
  out << "# raw estimates; certificates use K2, K3, Ku, K4 times inflation\n";
  write_constants(out, b.estimates);
  std::map<std::string, double> extra = {{"K1", b.k.K1}, {"lambda1", b.k.lambda1}, {"inflation", b.inflation}};
  auto raw = [&](const char* name, double used, double fallback_raw) {
    bool estimated = false;
    for (const auto& e : b.estimates) estimated |= std::string(to_string(e.name)) == name;
    if (!estimated) extra[name] = fallback_raw > 0 ? fallback_raw : used / b.inflation;
  };
  raw("K2", b.k.K2, 0.0);
  raw("K3", b.k.K3, 0.0);
  raw("Ku", b.k.Ku, b.Ku_raw);
  raw("K4", b.k.K4, b.K4_raw);
  if (std::isfinite(C_poincare)) extra["C_poincare_estimate"] = C_poincare;
  write_constants(out, {}, extra);
}

void add_check(ScenarioResult& r, const std::string& name, double value, double limit, bool pass) {
  r.checks.push_back({name, pass, value, limit});
}

double max_column(const std::vector<TraceRecord>& tr, double TraceRecord::*f, double t_from = -INFINITY) {
  double m = -INFINITY;
  for (const auto& r : tr)
    if (r.t >= t_from && !std::isnan(r.*f)) m = std::max(m, r.*f);
  return m;
}

std::string render_report(const ScenarioResult& r) {
  std::ostringstream os;
  os << "scenario = " << to_string(r.config.scenario) << '\n';
  for (const auto& [k, v] : r.summary) os << k << " = " << fmt_num(v) << '\n';
  if (r.convergence) {
    for (const auto& q : r.convergence->quantities) {
      os << "convergence." << q.name << ".final = " << fmt_num(q.final_value) << '\n';
      os << "convergence." << q.name << ".rate = " << fmt_num(q.fitted_rate) << '\n';
      os << "convergence." << q.name << ".window = " << fmt_num(q.t_a) << "," << fmt_num(q.t_b) << '\n';
      os << "convergence." << q.name << ".degenerate = " << (q.degenerate ? "true" : "false") << '\n';
    }
    os << "convergence.u_l2_rate = " << fmt_num(r.convergence->u_l2_rate) << '\n';
    os << "convergence.min_z_slope = " << fmt_num(r.convergence->min_z_slope) << '\n';
  }
  for (const auto& c : r.checks)
    os << "check." << c.name << " = " << (c.pass ? "PASS" : "FAIL") << " value " << fmt_num(c.value) << " limit "
       << fmt_num(c.limit) << '\n';
  if (r.run_error) {
    try {
      std::rethrow_exception(r.run_error);
    } catch (const std::exception& e) {
      os << "run_error = " << e.what() << '\n';
    }
  }
  return os.str();
}

void finish(ScenarioResult& r) { write_text(r.config.output_dir / "report.txt", render_report(r)); }

RunResult simulate(const RunConfig& cfg, const Integrator& integ, const SimState& s0, const PotentialData& phi,
                   double t_end, RunOptions opts, const std::string& snap_tag) {
  Snapshots snaps{cfg.output_dir / "snapshots", cfg.snapshot_every, snap_tag};
  if (cfg.snapshot_every > 0) opts.on_record = snaps;
  return run(integ, s0, phi, cfg.dt, t_end, cfg.trace_every, opts);
}

// Scales n0 to the configured fraction of m_star and certifies.
Certificate certify_scaled(const RunConfig& cfg, InitialBundle& init, const ConstantsBundle& cb) {
  CertifyOptions co;
  co.mu = cfg.mu;
  co.eta = cfg.eta;
  Certificate cert = certify(init.n0, init.c0, init.u0, cb.k, co);
  if (cfg.mass_fraction_of_mstar) {
    const double m = integrate(init.n0);
    if (!(m > 0.0)) throw ValidationError("n0.mass_fraction_of_mstar needs a density with positive mass");
    init.n0 = (*cfg.mass_fraction_of_mstar * cert.m_star / m) * init.n0;
    cert = certify(init.n0, init.c0, init.u0, cb.k, co);
  }
  return cert;
}

// Shared by the two certified scenarios.
void certified_run(ScenarioResult& r, bool global_smallness) {
  const RunConfig& cfg = r.config;
  Integrator integ(cfg.grid, cfg.dynamics);
  r.initial = build_initial(cfg, integ.stokes());
  r.constants = acquire_constants(cfg, integ.stokes(), r.initial);
  Certificate cert = certify_scaled(cfg, r.initial, r.constants);

  const double t_from = global_smallness ? 0.0 : cert.t_star;
  double t_end = cfg.t_end;
  if (!global_smallness && std::isfinite(cert.t_star)) t_end = std::max(t_end, cfg.t_end_tstar_factor * cert.t_star);

  const Sensitivity sens = cfg.sensitivity();
  RunOptions opts;
  opts.certificate = cert;
  if (global_smallness) opts.certificate->mu = cert.mu_thm2;
  opts.T = cert.T;
  opts.eta = cfg.audit_eta;
  opts.z4_C = calibrate_z4_constant(cfg.grid, cfg.audit_eta, cfg.z4_samples, cfg.seed + 31, cfg.dt, cfg.z4_steps);
  const double trace_mu = opts.certificate->mu;

  const SimState s_log = SimState::log(r.initial.n0, r.initial.c0, r.initial.u0, sens);
  const bool want_log = cfg.formulation != FormulationChoice::Original;
  const bool want_orig = cfg.formulation != FormulationChoice::Log;
  if (want_log) {
    RunResult rr = simulate(cfg, integ, s_log, r.initial.phi, t_end, opts, "");
    r.trace = std::move(rr.trace);
    if (rr.error) r.run_error = rr.error;
  }
  if (want_orig) {
    const SimState s_orig = SimState::original(r.initial.n0, r.initial.c0, r.initial.u0, sens);
    RunResult rr = simulate(cfg, integ, s_orig, r.initial.phi, t_end, opts, "original_");
    r.trace_original = std::move(rr.trace);
    if (rr.error && !r.run_error) r.run_error = rr.error;
    if (!want_log) r.trace = r.trace_original;
  }

  cert.kappa = trajectory_kappa(r.trace, t_from);
  r.certificate = cert;
  r.summary["z4_constant"] = opts.z4_C;
  r.summary["m_star"] = cert.m_star;
  r.summary["t_star"] = cert.t_star;
  r.summary["mu"] = trace_mu;
  r.summary["t_end"] = t_end;
  r.summary["mass"] = cert.m;
  r.summary["mean_n0"] = cert.m / cfg.grid.area();
  r.summary["records"] = static_cast<double>(r.trace.size());
  r.summary["K1"] = r.constants.k.K1;
  r.summary["K2"] = r.constants.k.K2;
  r.summary["K3"] = r.constants.k.K3;
  r.summary["K4"] = r.constants.k.K4;
  r.summary["Ku"] = r.constants.k.Ku;
  r.summary["lambda1"] = r.constants.k.lambda1;

  const Formulation primary = want_log ? Formulation::Log : Formulation::Original;
  write_trace(cfg.output_dir / "trace.csv", r.trace, header_lines(cfg, sens, primary, cert, trace_mu));
  if (want_log && want_orig)
    write_trace(cfg.output_dir / "trace_original.csv", r.trace_original,
                header_lines(cfg, sens, Formulation::Original, cert, trace_mu));
  {
    std::ostringstream os;
    write_certificate(os, cert);
    write_text(cfg.output_dir / "certificate.txt", os.str());
  }
  write_constants_file(cfg.output_dir / "constants.txt", r.constants);

  if (r.trace.size() >= 10) r.convergence = convergence_report(r.trace);
  const double mean = cert.m / cfg.grid.area();
  const double u0max = r.initial.u0.max_abs();

  const double worstF = worst_energy_increase(r.trace, t_from);
  const double budget = dissipation_budget(r.trace, t_from, cert.kappa);
  const ZBoundAudit zb = audit_zbound(r.trace);
  r.summary["energy.worst_increase"] = worstF;
  r.summary["energy.budget"] = budget;
  r.summary["energy.kappa"] = cert.kappa;
  r.summary["zbound.max_relative"] = zb.max_relative;
  r.summary["residual.l2_max"] = max_column(r.trace, &TraceRecord::residual_l2);
  r.summary["residual.z4_max"] = max_column(r.trace, &TraceRecord::residual_z4);
  r.summary["residual.energy_max"] = max_column(r.trace, &TraceRecord::residual_energy, t_from);
  if (cert.k.K4 > 0.0)
    r.summary["k4.max_residual"] = audit_k4(r.trace, cert.k.K4, cert.m, cert.int_z0, cfg.grid.area());
  if (!r.trace_original.empty() && want_log) {
    double d = 0.0;
    for (std::size_t k = 0; k < std::min(r.trace.size(), r.trace_original.size()); ++k)
      d = std::max(d, std::abs(r.trace[k].linf_c - r.trace_original[k].linf_c));
    r.summary["cross.linf_c_distance"] = d;
  }

  const AssertSettings& a = cfg.asserts;
  const double energy_limit = a.energy_slack;
  if (global_smallness) {
    add_check(r, "thm2_mass", cert.m, cert.m_star_star, cert.thm2_mass);
    add_check(r, "thm2_energy", cert.F_thm2, cert.thm2_threshold, cert.thm2_energy);
  } else {
    add_check(r, "small_mass", cert.m, cert.m_star, cert.small_mass);
    if (!r.trace.empty()) {
      const TraceRecord& last = r.trace.back();
      add_check(r, "n_deviation", last.linf_n_dev, a.n_dev_rel * mean, last.linf_n_dev <= a.n_dev_rel * mean);
      add_check(r, "gradc_over_c", last.linf_gradc_over_c, a.gradc_over_c, last.linf_gradc_over_c <= a.gradc_over_c);
      const double ulim = a.u_rel * u0max + a.u_abs;
      add_check(r, "velocity", last.linf_u, ulim, last.linf_u <= ulim);
    }
    if (r.convergence)
      add_check(r, "min_z_growth", r.convergence->min_z_slope, a.min_z_slope_fraction * mean,
                r.convergence->min_z_slope >= a.min_z_slope_fraction * mean);
    const double blim = a.budget_factor / (4.0 * cert.k.K3);
    add_check(r, "dissipation_budget", budget, blim, budget <= blim);
  }
  add_check(r, "energy_monotone", worstF, energy_limit, !(worstF > energy_limit));
  add_check(r, "residual_l2", r.summary["residual.l2_max"], a.residual_slack,
            r.summary["residual.l2_max"] <= a.residual_slack);
  add_check(r, "residual_z4", r.summary["residual.z4_max"], a.residual_slack,
            r.summary["residual.z4_max"] <= a.residual_slack);
  add_check(r, "residual_energy", r.summary["residual.energy_max"], a.residual_slack,
            !(r.summary["residual.energy_max"] > a.residual_slack));
  add_check(r, "zbound", zb.max_relative, a.zbound_slack, zb.max_relative <= a.zbound_slack);
  if (r.run_error) add_check(r, "run_completed", 0.0, 1.0, false);
}

void eps_sweep(ScenarioResult& r) {
  const RunConfig& cfg = r.config;
  Integrator probe(cfg.grid, cfg.dynamics);
  r.initial = build_initial(cfg, probe.stokes());

  struct Member {
    double eps;
    std::vector<TraceRecord> trace;
    std::vector<ScalarField> n, z;
    std::exception_ptr error;
  };
  std::vector<std::future<Member>> jobs;
  for (double eps : cfg.eps_list) {
    jobs.push_back(std::async(std::launch::async, [&, eps] {
      Member m;
      m.eps = eps;
      const Integrator integ(cfg.grid, cfg.dynamics);
      const SimState s = SimState::log(r.initial.n0, r.initial.c0, r.initial.u0, Sensitivity::regularized(eps));
      RunOptions opts;
      const fs::path dir = cfg.output_dir / fmt::format("eps_{}", eps);
      Snapshots snaps{dir / "snapshots", cfg.snapshot_every, ""};
      opts.on_record = [&](const SimState& st, std::size_t idx) {
        m.n.push_back(st.n);
        m.z.push_back(st.z);
        snaps(st, idx);
      };
      RunResult rr = run(integ, s, r.initial.phi, cfg.dt, cfg.t_end, cfg.trace_every, opts);
      m.trace = std::move(rr.trace);
      m.error = rr.error;
      fs::create_directories(dir);
      write_trace(dir / "trace.csv", m.trace,
                  header_lines(cfg, Sensitivity::regularized(eps), Formulation::Log, std::nullopt,
                               integrate(r.initial.n0) / cfg.grid.area()));
      return m;
    }));
  }
  std::vector<Member> members;
  for (auto& j : jobs) members.push_back(j.get());
  for (const auto& m : members)
    if (m.error && !r.run_error) r.run_error = m.error;
  r.trace = members.front().trace;
  write_trace(cfg.output_dir / "trace.csv", r.trace,
              header_lines(cfg, Sensitivity::regularized(members.front().eps), Formulation::Log, std::nullopt,
                           integrate(r.initial.n0) / cfg.grid.area()));

  std::vector<double> dist;
  for (std::size_t k = 0; k + 1 < members.size(); ++k) {
    const Member &a = members[k], &b = members[k + 1];
    double d = 0.0;
    for (std::size_t i = 0; i < std::min(a.n.size(), b.n.size()); ++i)
      d = std::max({d, lp_norm(a.n[i] - b.n[i], INFINITY), lp_norm(a.z[i] - b.z[i], INFINITY)});
    dist.push_back(d);
    r.summary[fmt::format("sweep.distance.{}_{}", a.eps, b.eps)] = d;
  }
  bool monotone = true;
  double worst_ratio = 0.0;
  for (std::size_t k = 0; k + 1 < dist.size(); ++k) {
    monotone &= dist[k + 1] < dist[k];
    worst_ratio = std::max(worst_ratio, dist[k + 1] / std::max(dist[k], 1e-300));
  }
  add_check(r, "sweep_monotone", worst_ratio, 1.0, monotone && !dist.empty());
  if (r.run_error) add_check(r, "run_completed", 0.0, 1.0, false);
}

void constants_scenario(ScenarioResult& r) {
  const RunConfig& cfg = r.config;
  Integrator integ(cfg.grid, cfg.dynamics);
  r.initial = build_initial(cfg, integ.stokes());
  r.constants = acquire_constants(cfg, integ.stokes(), r.initial);
  ConstantEstimate cp = estimate(ConstantName::CPoincare, cfg.grid, cfg.constants.ensemble,
                                 cfg.constants.iterations, cfg.constants.step, cfg.seed);
  if (cfg.constants.verify_trials > 0) {
    VerifyReport rep;
    cp = verify_and_refine(cp, cfg.constants.verify_trials, 1.1, cfg.seed + 17, &rep);
    r.constants.verification.push_back(rep);
  }
  r.constants.estimates.push_back(cp);
  write_constants_file(cfg.output_dir / "constants.txt", r.constants);
  const Constants& k = r.constants.k;
  for (const auto& [name, v] : std::map<std::string, double>{{"K1", k.K1}, {"K2", k.K2}, {"K3", k.K3},
                                                              {"Ku", k.Ku}, {"lambda1", k.lambda1},
                                                              {"C_poincare", cp.value}}) {
    r.summary[name] = v;
    add_check(r, "positive_" + name, v, 0.0, v > 0.0);
  }
  r.summary["K4"] = k.K4;
  int violations = 0;
  for (const auto& v : r.constants.verification) violations += v.violations;
  r.summary["verify.violations"] = violations;
  add_check(r, "verify_violations", violations, 0.0, violations == 0);
}

void stokes_decay(ScenarioResult& r) {
  const RunConfig& cfg = r.config;
  Integrator integ(cfg.grid, cfg.dynamics);
  r.initial = build_initial(cfg, integ.stokes());
  const double lambda1 = integ.stokes().lambda1();
  r.summary["lambda1"] = lambda1;
  const ScalarField zero_n = ScalarField::constant(cfg.grid, 0.0);
  const ScalarField c0 = ScalarField::constant(cfg.grid, 1.0);
  double worst = 0.0;
  for (int k = 0; k < cfg.stokes_samples; ++k) {
    const VectorField u0 = random_solenoidal(integ.stokes(), cfg.seed + 1000 + k, cfg.stokes_amplitude);
    const SimState s = SimState::log(zero_n, c0, u0, Sensitivity::identity());
    RunResult rr = simulate(cfg, integ, s, r.initial.phi, cfg.t_end, {}, fmt::format("s{}_", k));
    if (rr.error) {
      r.run_error = rr.error;
      break;
    }
    if (k == 0) {
      r.trace = rr.trace;
      write_trace(cfg.output_dir / "trace.csv", r.trace,
                  header_lines(cfg, Sensitivity::identity(), Formulation::Log, std::nullopt, 1.0));
    }
    if (rr.trace.size() < 10) throw ValidationError("stokes_decay: need at least 10 records (reduce run.trace_every)");
    const ConvergenceReport rep = convergence_report(rr.trace);
    r.summary[fmt::format("stokes.rate.{}", k)] = rep.u_l2_rate;
    worst = std::max(worst, std::abs(rep.u_l2_rate - lambda1) / lambda1);
  }
  r.summary["stokes.worst_relative_error"] = worst;
  add_check(r, "decay_rate", worst, cfg.asserts.stokes_rate_tolerance,
            !r.run_error && worst <= cfg.asserts.stokes_rate_tolerance);
  const double ku = fit_ku_from_trials(cfg, integ.stokes(), r.initial.phi, lambda1);
  r.summary["Ku"] = ku;
  r.constants.k.lambda1 = lambda1;
  r.constants.k.Ku = ku * cfg.constants.inflation;
  r.constants.Ku_raw = ku;
  r.constants.k.K1 = r.initial.phi.K1;
  r.constants.inflation = cfg.constants.inflation;
}

}  // namespace

ScenarioResult run_scenario(const RunConfig& cfg) {
  ScenarioResult r;
  r.config = cfg;
  fs::create_directories(cfg.output_dir);
  try {
    switch (cfg.scenario) {
      case ScenarioKind::SmallMassEventual: certified_run(r, false); break;
      case ScenarioKind::Thm2Global: certified_run(r, true); break;
      case ScenarioKind::EpsSweep: eps_sweep(r); break;
      case ScenarioKind::Constants: constants_scenario(r); break;
      case ScenarioKind::StokesDecay: stokes_decay(r); break;
    }
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception&) {
    r.run_error = std::current_exception();
  }
  finish(r);
  return r;
}

ScenarioResult estimate_constants(const RunConfig& cfg) {
  RunConfig c = cfg;
  c.scenario = ScenarioKind::Constants;
  return run_scenario(c);
}

std::string report_run_dir(const fs::path& dir) {
  const fs::path trace_path = dir / "trace.csv";
  std::ifstream in(trace_path);
  if (!in) throw ValidationError("report: no trace.csv in " + dir.string());
  std::vector<std::string> comments;
  const std::vector<TraceRecord> trace = read_trace_csv(in, &comments);
  std::ostringstream os;
  for (const auto& c : comments)
    if (c.rfind("cert.", 0) != 0) os << "run." << c << '\n';
  os << "records = " << trace.size() << '\n';
  if (!trace.empty()) {
    os << "t_final = " << fmt_num(trace.back().t) << '\n';
    double drift = 0.0;
    for (const auto& r : trace) drift = std::max(drift, std::abs(r.mass_n - trace.front().mass_n));
    os << "mass_drift = " << fmt_num(drift) << '\n';
    os << "linf_c_max = " << fmt_num(max_column(trace, &TraceRecord::linf_c)) << '\n';
    os << "residual.l2_max = " << fmt_num(max_column(trace, &TraceRecord::residual_l2)) << '\n';
    os << "residual.z4_max = " << fmt_num(max_column(trace, &TraceRecord::residual_z4)) << '\n';
    os << "residual.energy_max = " << fmt_num(max_column(trace, &TraceRecord::residual_energy)) << '\n';
    os << "zbound.max_relative = " << fmt_num(audit_zbound(trace).max_relative) << '\n';
  }
  if (std::ifstream cin(dir / "certificate.txt"); cin) {
    const Certificate cert = read_certificate(cin);
    os << "certificate.m_star = " << fmt_num(cert.m_star) << '\n';
    os << "certificate.t_star = " << fmt_num(cert.t_star) << '\n';
    os << "certificate.small_mass = " << (cert.small_mass ? "true" : "false") << '\n';
    os << "energy.worst_increase_after_t_star = " << fmt_num(worst_energy_increase(trace, cert.t_star)) << '\n';
  }
  if (trace.size() >= 10) {
    const ConvergenceReport rep = convergence_report(trace);
    for (const auto& q : rep.quantities) {
      os << "convergence." << q.name << ".final = " << fmt_num(q.final_value) << '\n';
      os << "convergence." << q.name << ".rate = " << fmt_num(q.fitted_rate) << '\n';
    }
    os << "convergence.u_l2_rate = " << fmt_num(rep.u_l2_rate) << '\n';
    os << "convergence.min_z_slope = " << fmt_num(rep.min_z_slope) << '\n';
  }
  const std::string text = os.str();
  write_text(dir / "report.txt", text);
  return text;
}

}  // namespace chemolab
