#include "chemolab/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "chemolab/random_fields.hpp"

namespace chemolab {

// ---------------------------------------------------------------- CSV

namespace {

struct Column {
  const char* name;
  double TraceRecord::*field;
};

const std::vector<Column>& columns() {
  static const std::vector<Column> cols = {
      {"t", &TraceRecord::t},
      {"mass_n", &TraceRecord::mass_n},
      {"linf_n_minus_mean", &TraceRecord::linf_n_dev},
      {"linf_c", &TraceRecord::linf_c},
      {"linf_u", &TraceRecord::linf_u},
      {"linf_gradc_over_c", &TraceRecord::linf_gradc_over_c},
      {"F_mu", &TraceRecord::F_mu},
      {"int_gradz_sq", &TraceRecord::int_gradz_sq},
      {"int_nlogn", &TraceRecord::int_nlogn},
      {"int_n_sq", &TraceRecord::int_n_sq},
      {"dissipation_n", &TraceRecord::d_n},
      {"dissipation_z", &TraceRecord::d_z},
      {"residual_l2", &TraceRecord::residual_l2},
      {"residual_z4", &TraceRecord::residual_z4},
      {"residual_energy", &TraceRecord::residual_energy},
      {"residual_zbound", &TraceRecord::residual_zbound},
      {"int_gradz_4", &TraceRecord::int_gradz_4},
      {"int_z", &TraceRecord::int_z},
      {"min_z", &TraceRecord::min_z},
      {"min_n", &TraceRecord::min_n},
      {"l2_u", &TraceRecord::l2_u},
      {"l4_u", &TraceRecord::l4_u},
      {"l4_grad_u", &TraceRecord::l4_grad_u},
      {"energy_coefficient", &TraceRecord::energy_coefficient},
  };
  return cols;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  return out;
}

}  // namespace

const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& c : columns()) v.emplace_back(c.name);
    return v;
  }();
  return names;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace,
                     const std::vector<std::string>& comments) {
  for (const auto& c : comments) os << "# " << c << '\n';
  const auto& cols = columns();
  for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k].name;
  os << '\n';
  for (const auto& r : trace) {
    for (std::size_t k = 0; k < cols.size(); ++k)
      os << (k ? "," : "") << fmt::format("{:.17g}", r.*(cols[k].field));
    os << '\n';
  }
}

std::vector<TraceRecord> read_trace_csv(std::istream& is, std::vector<std::string>* comments) {
  std::string line;
  std::vector<std::string> header;
  std::vector<TraceRecord> out;
  const auto& cols = columns();
  std::vector<int> map;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (comments) comments->push_back(line.size() > 2 ? line.substr(2) : std::string());
      continue;
    }
    if (header.empty()) {
      header = split(line, ',');
      for (const auto& h : header) {
        int idx = -1;
        for (std::size_t k = 0; k < cols.size(); ++k)
          if (h == cols[k].name) idx = static_cast<int>(k);
        map.push_back(idx);
      }
      for (const auto& c : cols)
        if (std::find(header.begin(), header.end(), c.name) == header.end())
          throw ValidationError(std::string("trace csv: missing column ") + c.name);
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) throw ValidationError("trace csv: ragged row");
    TraceRecord r;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (map[k] < 0) continue;
      try {
        r.*(cols[map[k]].field) = std::stod(cells[k]);
      } catch (const std::exception&) {
        // std::stod rejects "nan"/"inf" spellings on some platforms only partly.
        const std::string& s = cells[k];
        if (s == "nan" || s == "-nan") r.*(cols[map[k]].field) = std::numeric_limits<double>::quiet_NaN();
        else if (s == "inf") r.*(cols[map[k]].field) = INFINITY;
        else if (s == "-inf") r.*(cols[map[k]].field) = -INFINITY;
        else throw ValidationError("trace csv: bad number '" + s + "'");
      }
    }
    out.push_back(r);
  }
  if (header.empty()) throw ValidationError("trace csv: no header");
  return out;
}

// ---------------------------------------------------------------- diagnostics

StateDiagnostics diagnose(const SimState& s, double mu) {
  StateDiagnostics d;
  const GridSpec& g = s.grid();
  const double dA = g.cell_measure();
  const ScalarField z = s.z_field();
  const ScalarField w = grad_sq(z);
  const ScalarField gu = velocity_gradient_norm(s.u);
  d.t = s.t;
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double n = s.n[k], wk = w[k];
    d.mass += n;
    d.int_n_sq += n * n;
    d.int_n2_gz2 += n * n * wk;
    d.int_gz2 += wk;
    d.int_gz4 += wk * wk;
    d.int_gz6 += wk * wk * wk;
    d.int_gz4_gradu += wk * wk * gu[k];
    d.int_z += z[k];
  }
  d.mass *= dA;
  d.int_n_sq *= dA;
  d.int_n2_gz2 *= dA;
  d.int_gz2 *= dA;
  d.int_gz4 *= dA;
  d.int_gz6 *= dA;
  d.int_gz4_gradu *= dA;
  d.int_z *= dA;
  const VectorField gn = gradient(s.n);
  d.int_grad_n_sq = inner(gn, gn);
  const VectorField gw = gradient(w);
  d.int_grad_gz2_sq = inner(gw, gw);
  double nlog = 0.0;
  for (double n : s.n.values())
    if (n > 0.0) nlog += n * std::log(n / mu);
  d.F = nlog * dA + 0.5 * d.int_gz2;
  const Dissipation dd = dissipation(s.n, z);
  d.d_n = dd.d_n;
  d.d_z = dd.d_z;
  return d;
}

double AuditValue::normalized() const { return residual / (std::abs(left) + std::abs(right) + 1.0); }

AuditValue audit_l2(const StateDiagnostics& a, const StateDiagnostics& b, double dt) {
  if (!(dt > 0.0)) throw ValidationError("audit_l2: dt must be positive");
  AuditValue v;
  v.left = (b.int_n_sq - a.int_n_sq) / dt + 0.5 * (a.int_grad_n_sq + b.int_grad_n_sq);
  v.right = 0.5 * (a.int_n2_gz2 + b.int_n2_gz2);
  v.residual = v.left - v.right;
  return v;
}

AuditValue audit_l2(const SimState& before, const SimState& after, double dt) {
  return audit_l2(diagnose(before, 1.0), diagnose(after, 1.0), dt);
}

AuditValue audit_z4(const StateDiagnostics& a, const StateDiagnostics& b, double dt, double eta,
                    double C) {
  if (!(eta > 0.0 && eta <= 1.25)) throw ValidationError("audit_z4: eta must lie in (0, 5/4]");
  if (!(dt > 0.0)) throw ValidationError("audit_z4: dt must be positive");
  auto mid = [](double x, double y) { return 0.5 * (x + y); };
  AuditValue v;
  v.left = (b.int_gz4 - a.int_gz4) / dt + (2.5 - 2.0 * eta) * mid(a.int_grad_gz2_sq, b.int_grad_gz2_sq);
  const double g2 = mid(a.int_gz2, b.int_gz2);
  v.right = 8.0 * mid(a.int_gz6, b.int_gz6) + (12.0 / eta) * mid(a.int_n2_gz2, b.int_n2_gz2) +
            4.0 * mid(a.int_gz4_gradu, b.int_gz4_gradu) + C * g2 * g2;
  v.residual = v.left - v.right;
  return v;
}

AuditValue audit_z4(const SimState& before, const SimState& after, double dt, double eta, double C) {
  return audit_z4(diagnose(before, 1.0), diagnose(after, 1.0), dt, eta, C);
}

double energy_residual(const StateDiagnostics& a, const StateDiagnostics& b, double dt,
                       const Certificate& cert, double T) {
  Certificate c = cert;
  c.T = T;
  const double coef = c.dissipation_coefficient(0.5 * (a.t + b.t), 0.5 * (a.int_gz2 + b.int_gz2));
  return (b.F - a.F) / dt + 0.5 * (a.d_n + b.d_n) + coef * 0.5 * (a.d_z + b.d_z);
}

double calibrate_z4_constant(const GridSpec& grid, double eta, int samples, unsigned long seed,
                             double dt, int steps) {
  if (samples < 1 || steps < 1) throw ValidationError("z4 calibration: need samples and steps");
  std::mt19937_64 rng(seed);
  Integrator integ(grid);
  const PotentialData phi = PotentialData::make(ScalarField(grid));
  double C = 0.0;
  for (int s = 0; s < samples; ++s) {
    // Smooth positive signal with O(1) relative variation.
    ScalarField noise = filtered_noise(grid, rng, 4, 4, false);
    const double amp = 0.5 / std::max(1e-300, lp_norm(noise, INFINITY));
    ScalarField c0(grid);
    for (std::size_t k = 0; k < c0.size(); ++k) c0[k] = std::exp(amp * noise[k]);
    SimState st = SimState::log(ScalarField(grid), c0, VectorField(grid), Sensitivity::identity());
    StateDiagnostics da = diagnose(st, 1.0);
    for (int k = 0; k < steps; ++k) {
      SimState nx = integ.step_log(st, phi, dt);
      StateDiagnostics db = diagnose(nx, 1.0);
      const AuditValue v = audit_z4(da, db, dt, eta, 0.0);
      const double g2 = 0.5 * (da.int_gz2 + db.int_gz2);
      if (g2 > 0.0) C = std::max(C, v.residual / (g2 * g2));
      st = std::move(nx);
      da = db;
    }
  }
  return C;
}

// ---------------------------------------------------------------- trace audits

ZBoundAudit audit_zbound(const std::vector<TraceRecord>& trace, std::size_t t0_index) {
  ZBoundAudit out;
  if (t0_index >= trace.size()) return out;
  const TraceRecord& r0 = trace[t0_index];
  double cum = 0.0;
  for (std::size_t k = t0_index; k < trace.size(); ++k) {
    if (k > t0_index)
      cum += 0.5 * (trace[k].int_gradz_sq + trace[k - 1].int_gradz_sq) * (trace[k].t - trace[k - 1].t);
    const double rhs = r0.int_z + (trace[k].t - r0.t) * r0.mass_n;
    const double res = trace[k].int_z + cum - rhs;
    out.max_residual = std::max(out.max_residual, res);
    if (rhs > 0.0) out.max_relative = std::max(out.max_relative, res / rhs);
    else if (k == t0_index) out.max_relative = std::max(out.max_relative, 0.0);
  }
  return out;
}

K4Trajectory k4_trajectory(const std::vector<TraceRecord>& trace, double area, double int_z0) {
  K4Trajectory tr;
  if (trace.empty()) return tr;
  tr.m = trace.front().mass_n;
  tr.int_z0 = int_z0;
  for (const auto& r : trace) {
    tr.t.push_back(r.t);
    tr.log_mean_sq.push_back(std::log((r.int_n_sq + 2.0 * r.mass_n + area) / area));
  }
  return tr;
}

double audit_k4(const std::vector<TraceRecord>& trace, double K4, double m, double z0_integral,
                double area) {
  const K4Trajectory tr = k4_trajectory(trace, area, z0_integral);
  double worst = -INFINITY;
  double I = 0.0;
  for (std::size_t k = 0; k < tr.t.size(); ++k) {
    if (k > 0) I += 0.5 * (tr.log_mean_sq[k] + tr.log_mean_sq[k - 1]) * (tr.t[k] - tr.t[k - 1]);
    const double t = tr.t[k] - tr.t.front();
    worst = std::max(worst, I - K4 * (1.0 + m) * t - K4 * (z0_integral + m));
  }
  return worst;
}

// ---------------------------------------------------------------- convergence

double ls_slope(const std::vector<double>& t, const std::vector<double>& y) {
  const std::size_t n = t.size();
  if (n < 2 || y.size() != n) return 0.0;
  double mt = 0.0, my = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mt += t[k];
    my += y[k];
  }
  mt /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sxy += (t[k] - mt) * (y[k] - my);
    sxx += (t[k] - mt) * (t[k] - mt);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

const QuantityConvergence& ConvergenceReport::get(const std::string& name) const {
  for (const auto& q : quantities)
    if (q.name == name) return q;
  throw ValidationError("convergence report: unknown quantity " + name);
}

namespace {

// Log-linear fit. Degenerate when the window holds nonpositive values or
// nothing above round-off level.
void log_fit(const std::vector<double>& t, const std::vector<double>& v, double* rate, bool* degenerate) {
  constexpr double kRoundoff = 1e-13;
  std::vector<double> ly;
  double vmax = 0.0;
  for (double x : v) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      *degenerate = true;
      *rate = 0.0;
      return;
    }
    vmax = std::max(vmax, x);
    ly.push_back(std::log(x));
  }
  *degenerate = vmax <= kRoundoff;
  *rate = *degenerate ? 0.0 : -ls_slope(t, ly);
}

}  // namespace

ConvergenceReport convergence_report(const std::vector<TraceRecord>& trace,
                                     const ConvergenceThresholds& th) {
  if (trace.size() < 10) throw ValidationError("convergence report: need at least 10 records");
  const std::size_t start = trace.size() - std::max<std::size_t>(3, trace.size() / 3);
  std::vector<double> t;
  for (std::size_t k = start; k < trace.size(); ++k) t.push_back(trace[k].t);

  auto series = [&](double TraceRecord::*f) {
    std::vector<double> v;
    for (std::size_t k = start; k < trace.size(); ++k) v.push_back(trace[k].*f);
    return v;
  };

  ConvergenceReport rep;
  struct Q {
    const char* name;
    double TraceRecord::*f;
    double threshold;
  };
  for (const Q& q : {Q{"linf_n_minus_mean", &TraceRecord::linf_n_dev, th.n_dev},
                     Q{"linf_c", &TraceRecord::linf_c, th.c},
                     Q{"linf_u", &TraceRecord::linf_u, th.u},
                     Q{"linf_gradc_over_c", &TraceRecord::linf_gradc_over_c, th.gradc_over_c}}) {
    QuantityConvergence c;
    c.name = q.name;
    c.final_value = trace.back().*q.f;
    c.t_a = t.front();
    c.t_b = t.back();
    c.threshold = q.threshold;
    c.achieved_threshold = c.final_value <= q.threshold;
    log_fit(t, series(q.f), &c.fitted_rate, &c.degenerate);
    rep.quantities.push_back(c);
  }
  log_fit(t, series(&TraceRecord::l2_u), &rep.u_l2_rate, &rep.u_l2_degenerate);
  rep.min_z_slope = ls_slope(t, series(&TraceRecord::min_z));
  return rep;
}

}  // namespace chemolab
