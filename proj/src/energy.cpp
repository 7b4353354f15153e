#include "chemolab/energy.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

namespace chemolab {

namespace {

constexpr double kE = 2.718281828459045;

void require_nonnegative(const ScalarField& n, const char* what) {
  const double tol = kNegativityTol * std::max(1.0, n.max());
  if (n.min() < -tol) throw ValidationError(fmt::format("{}: n has negative values (min {:.3e})", what, n.min()));
}

}  // namespace

EnergyParams EnergyParams::make(double mu) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ValidationError("energy: mu must be positive");
  return {mu};
}

double f_mu(const ScalarField& n, const ScalarField& z, const EnergyParams& params) {
  require_same_grid(n.grid(), z.grid(), "f_mu");
  require_nonnegative(n, "f_mu");
  double s = 0.0;
  for (double v : n.values())
    if (v > 0.0) s += v * std::log(v / params.mu);
  return s * n.grid().cell_measure() + 0.5 * integrate(grad_sq(z));
}

double int_n_abs_log_n(const ScalarField& n) {
  double s = 0.0;
  for (double v : n.values())
    if (v > 0.0) s += v * std::abs(std::log(v));
  return s * n.grid().cell_measure();
}

EnergyBounds energy_bounds(const ScalarField& n, const ScalarField& z, const EnergyParams& params) {
  const double F = f_mu(n, z, params);
  const double area = n.grid().area();
  const double mass = integrate(n);
  const double gz = integrate(grad_sq(z));
  const double scale = 1e-12 * (std::abs(F) + std::abs(mass * std::log(params.mu)) + area + gz);
  EnergyBounds b;
  b.nlogn_slack = F + std::log(params.mu) * mass + 2.0 * area / kE - int_n_abs_log_n(n);
  b.gradz_slack = 2.0 * F + 2.0 * params.mu * area / kE - gz;
  b.lower_slack = F + params.mu * area / kE;
  b.nlogn_bound_ok = b.nlogn_slack >= -scale;
  b.gradz_bound_ok = b.gradz_slack >= -scale;
  b.lower_bound_ok = b.lower_slack >= -scale;
  return b;
}

Dissipation dissipation(const ScalarField& n, const ScalarField& z) {
  require_same_grid(n.grid(), z.grid(), "dissipation");
  const GridSpec& g = n.grid();
  Dissipation d;
  double s = 0.0;
  auto pair = [&](double a, double b, double h2) {
    if (a == b) return;
    if (a <= 0.0 || b <= 0.0) {
      d.d_n_infinite = true;
      return;
    }
    s += (a - b) * (std::log(a) - std::log(b)) / h2;
  };
  const double hx2 = g.hx() * g.hx(), hy2 = g.hy() * g.hy();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 1; i < g.nx; ++i) pair(n(i, j), n(i - 1, j), hx2);
  for (int j = 1; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) pair(n(i, j), n(i, j - 1), hy2);
  d.d_n = d.d_n_infinite ? std::numeric_limits<double>::infinity() : s * g.cell_measure();
  ScalarField zz = z;
  zz.set_bc(BoundaryTag::Neumann);
  const ScalarField lap = laplacian(zz);
  d.d_z = inner(lap, lap);
  return d;
}

// ---------------------------------------------------------------- certificate

double Certificate::waiting_bound() const {
  return 1.0 / (4.0 * k.K3 * k.K3 * k.Ku * std::pow(area, 0.25));
}

double Certificate::dissipation_coefficient(double t, double int_gradz_sq) const {
  return 0.5 - 0.5 * k.K3 * int_gradz_sq -
         k.K3 * k.K3 * k.Ku * std::pow(area, 0.25) * (ell * std::exp(-k.lambda1 * (t - T)) + m);
}

Certificate certify(const ScalarField& n0, const ScalarField& c0, const VectorField& u0,
                    const Constants& consts, const CertifyOptions& opts) {
  require_same_grid(n0.grid(), c0.grid(), "certify");
  require_same_grid(n0.grid(), u0.grid(), "certify");
  if (c0.min() <= 0.0) throw ValidationError("certify: c0 must be positive");
  require_nonnegative(n0, "certify");
  if (!(consts.K2 > 0 && consts.K3 > 0 && consts.Ku > 0 && consts.lambda1 > 0))
    throw ValidationError("certify: K2, K3, Ku and lambda1 must be positive");
  if (consts.K4 < 0 || consts.K1 < 0) throw ValidationError("certify: K1 and K4 must be nonnegative");
  if (!(opts.M_fraction > 0 && opts.M_fraction < 1) || !(opts.gamma_fraction > 0 && opts.gamma_fraction < 1))
    throw ValidationError("certify: fractions must lie in (0, 1)");

  Certificate c;
  c.k = consts;
  c.T = opts.T;
  const GridSpec& g = n0.grid();
  c.area = g.area();
  const double area = c.area;
  c.m = integrate(n0);
  c.L = c.m;
  const double u4 = lp_norm(u0, 4.0);
  c.ell = u4 * u4 * u4 * u4;

  ScalarField z0(g);
  const double cmax = c0.max();
  for (std::size_t k = 0; k < z0.size(); ++k) z0[k] = -std::log(c0[k] / cmax);
  c.int_z0 = integrate(z0);

  const double K2 = consts.K2, K3 = consts.K3, Ku = consts.Ku;
  const double q = K3 * K3 * Ku * std::pow(area, 0.25);

  c.M = opts.M_fraction / (4.0 * K2);
  if (opts.mu) {
    c.mu = EnergyParams::make(*opts.mu).mu;
  } else {
    // Largest mu < 1 with 2 mu |Omega| / e <= M / 2 and mu |Omega| / e < 1/(4 K3).
    c.mu = std::min({kE * c.M / (4.0 * area), 0.5 * kE / (4.0 * K3 * area), 0.999});
  }
  const double gamma_cap = 1.0 / (4.0 * K3) - c.mu * area / kE;
  c.Gamma = std::min(c.M / 4.0, opts.gamma_fraction * gamma_cap);
  if (opts.eta) {
    if (!(*opts.eta > 0 && *opts.eta < 1)) throw ValidationError("certify: eta must lie in (0, 1)");
    c.eta = *opts.eta;
  } else {
    c.eta = std::min(0.5, c.Gamma / (4.0 * area * std::exp(16.0 * consts.K4)));
  }
  c.gamma_ok = c.Gamma > 0.0 && c.Gamma < gamma_cap;
  c.M_ok = c.M < 1.0 / (4.0 * K2) && 2.0 * c.mu * area / kE <= c.M / 2.0 * (1.0 + 1e-12) && c.mu < 1.0;

  const double log_term = std::log(1.0 / (c.eta * c.mu));
  c.m_star = std::min({1.0, log_term > 0 ? c.Gamma / (4.0 * log_term) : 0.0, c.Gamma / 8.0, 1.0 / (5.0 * q)});
  c.m_star_star = 1.0 / (8.0 * q);

  // Waiting time for the mass bound m0 = max(m_star, m).
  const double B = c.waiting_bound();
  const double m0 = std::max(c.m_star, c.m);
  if (c.ell + m0 <= B) {
    c.t0 = c.T;
  } else if (m0 < B) {
    c.t0 = c.T + std::log(c.ell / (B - m0)) / consts.lambda1;
  } else {
    c.t0 = std::numeric_limits<double>::infinity();
  }

  double ts = std::max((c.int_z0 + c.m) / (1.0 + c.m), 2.0 * c.t0);
  if (c.m > 0.0) ts = std::max(ts, c.int_z0 / c.m);
  else if (c.int_z0 > 0.0) ts = std::numeric_limits<double>::infinity();
  if (ts == 2.0 * c.t0 && std::isfinite(ts)) ts = std::nextafter(ts, INFINITY);
  c.t_star = ts;

  c.small_mass = c.m <= c.m_star && c.gamma_ok && c.M_ok && std::isfinite(c.t0);
  c.thm2_mass = c.m <= c.m_star_star && c.ell <= c.m_star_star;

  const double mean_n0 = c.m / area;
  c.mu_thm2 = opts.mu ? c.mu : (mean_n0 > 0 ? kE * mean_n0 : c.mu);
  c.F_thm2 = f_mu(n0, z0, {c.mu_thm2});
  c.thm2_threshold = std::min(1.0 / (4.0 * K3), 1.0 / (8.0 * K2)) - c.mu_thm2 * area / kE;
  c.thm2_energy = c.F_thm2 < c.thm2_threshold;
  return c;
}

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

void write_certificate(std::ostream& os, const Certificate& c, const std::string& prefix) {
  auto line = [&](const char* name, const std::string& v) { os << prefix << name << " = " << v << '\n'; };
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  line("K1", num(c.k.K1));
  line("K2", num(c.k.K2));
  line("K3", num(c.k.K3));
  line("K4", num(c.k.K4));
  line("Ku", num(c.k.Ku));
  line("lambda1", num(c.k.lambda1));
  line("area", num(c.area));
  line("mu", num(c.mu));
  line("eta", num(c.eta));
  line("Gamma", num(c.Gamma));
  line("M", num(c.M));
  line("L", num(c.L));
  line("kappa", num(c.kappa));
  line("m", num(c.m));
  line("ell", num(c.ell));
  line("int_z0", num(c.int_z0));
  line("T", num(c.T));
  line("m_star", num(c.m_star));
  line("m_star_star", num(c.m_star_star));
  line("t0", num(c.t0));
  line("t_star", num(c.t_star));
  line("mu_thm2", num(c.mu_thm2));
  line("F_thm2", num(c.F_thm2));
  line("thm2_threshold", num(c.thm2_threshold));
  line("gamma_ok", flag(c.gamma_ok));
  line("M_ok", flag(c.M_ok));
  line("small_mass", flag(c.small_mass));
  line("thm2_mass", flag(c.thm2_mass));
  line("thm2_energy", flag(c.thm2_energy));
}

Certificate read_certificate(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t#");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto d = [&](const char* k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw ValidationError(std::string("certificate: missing key ") + k);
    return std::stod(it->second);
  };
  auto b = [&](const char* k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw ValidationError(std::string("certificate: missing key ") + k);
    return it->second == "true";
  };
  Certificate c;
  c.k = {d("K1"), d("K2"), d("K3"), d("K4"), d("Ku"), d("lambda1")};
  c.area = d("area");
  c.mu = d("mu");
  c.eta = d("eta");
  c.Gamma = d("Gamma");
  c.M = d("M");
  c.L = d("L");
  c.kappa = d("kappa");
  c.m = d("m");
  c.ell = d("ell");
  c.int_z0 = d("int_z0");
  c.T = d("T");
  c.m_star = d("m_star");
  c.m_star_star = d("m_star_star");
  c.t0 = d("t0");
  c.t_star = d("t_star");
  c.mu_thm2 = d("mu_thm2");
  c.F_thm2 = d("F_thm2");
  c.thm2_threshold = d("thm2_threshold");
  c.gamma_ok = b("gamma_ok");
  c.M_ok = b("M_ok");
  c.small_mass = b("small_mass");
  c.thm2_mass = b("thm2_mass");
  c.thm2_energy = b("thm2_energy");
  return c;
}

double energy_step_audit(const SimState& before, const SimState& after, double dt,
                         const Certificate& cert, double T) {
  if (!(dt > 0.0)) throw ValidationError("energy audit: dt must be positive");
  const ScalarField z0 = before.z_field(), z1 = after.z_field();
  const EnergyParams p{cert.mu};
  const double dF = (f_mu(after.n, z1, p) - f_mu(before.n, z0, p)) / dt;
  const Dissipation d0 = dissipation(before.n, z0), d1 = dissipation(after.n, z1);
  const double dn = 0.5 * (d0.d_n + d1.d_n);
  const double dz = 0.5 * (d0.d_z + d1.d_z);
  const double gz = 0.5 * (integrate(grad_sq(z0)) + integrate(grad_sq(z1)));
  Certificate c = cert;
  c.T = T;
  const double coef = c.dissipation_coefficient(0.5 * (before.t + after.t), gz);
  return dF + dn + coef * dz;
}

double fit_K4(const std::vector<K4Trajectory>& trajectories) {
  if (trajectories.empty()) throw ValidationError("fit_K4: no trajectories");
  double K = 0.0;
  for (const K4Trajectory& tr : trajectories) {
    if (tr.t.size() != tr.log_mean_sq.size() || tr.t.empty())
      throw ValidationError("fit_K4: malformed trajectory");
    double I = 0.0;
    for (std::size_t k = 1; k < tr.t.size(); ++k) {
      I += 0.5 * (tr.log_mean_sq[k] + tr.log_mean_sq[k - 1]) * (tr.t[k] - tr.t[k - 1]);
      const double t = tr.t[k] - tr.t.front();
      const double denom = (1.0 + tr.m) * t + tr.int_z0 + tr.m;
      if (denom > 0.0) K = std::max(K, I / denom);
    }
  }
  return K;
}

}  // namespace chemolab
