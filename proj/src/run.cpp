#include "chemolab/run.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace chemolab {

namespace {

struct Recorder {
  const RunOptions& opts;
  double mu;
  double mean_n0;
  double mass0;
  double int_z0;
  double cum_gz2 = 0.0;  // int_0^t int |grad z|^2, trapezoid over steps
  double worst_l2 = -INFINITY;
  double worst_z4 = -INFINITY;
  double worst_energy = -INFINITY;
  double worst_zbound = -INFINITY;

  TraceRecord record(const SimState& s, const StateDiagnostics& d) {
    TraceRecord r;
    const ScalarField z = s.z_field();
    r.t = s.t;
    r.mass_n = d.mass;
    double dev = 0.0;
    for (double v : s.n.values()) dev = std::max(dev, std::abs(v - mean_n0));
    r.linf_n_dev = dev;
    r.min_z = z.min();
    r.linf_c = s.c0_max * std::exp(-r.min_z);
    r.linf_u = lp_norm(s.u, INFINITY);
    r.linf_gradc_over_c = gradient(z).max_abs();
    r.F_mu = d.F;
    r.int_gradz_sq = d.int_gz2;
    r.int_nlogn = int_n_abs_log_n(s.n);
    r.int_n_sq = d.int_n_sq;
    r.d_n = d.d_n;
    r.d_z = d.d_z;
    r.int_gradz_4 = d.int_gz4;
    r.int_z = d.int_z;
    r.min_n = s.n.min();
    r.l2_u = std::sqrt(inner(s.u, s.u));
    r.l4_u = lp_norm(s.u, 4.0);
    r.l4_grad_u = lp_norm(velocity_gradient_norm(s.u), 4.0);
    r.energy_coefficient = opts.certificate
                               ? [&] {
                                   Certificate c = *opts.certificate;
                                   c.T = opts.T;
                                   return c.dissipation_coefficient(s.t, d.int_gz2);
                                 }()
                               : std::numeric_limits<double>::quiet_NaN();
    auto take = [](double& worst) {
      const double v = std::isfinite(worst) ? worst : 0.0;
      worst = -INFINITY;
      return v;
    };
    r.residual_l2 = take(worst_l2);
    r.residual_z4 = take(worst_z4);
    r.residual_energy = opts.certificate ? take(worst_energy) : std::numeric_limits<double>::quiet_NaN();
    r.residual_zbound = take(worst_zbound);
    return r;
  }

  void audit(const StateDiagnostics& a, const StateDiagnostics& b, double dt, double t0) {
    worst_l2 = std::max(worst_l2, audit_l2(a, b, dt).normalized());
    worst_z4 = std::max(worst_z4, audit_z4(a, b, dt, opts.eta, opts.z4_C).normalized());
    if (opts.certificate) {
      const double res = energy_residual(a, b, dt, *opts.certificate, opts.T);
      const double dF = (b.F - a.F) / dt;
      worst_energy = std::max(worst_energy, res / std::max(1.0, std::abs(dF)));
    }
    cum_gz2 += 0.5 * (a.int_gz2 + b.int_gz2) * dt;
    const double rhs = int_z0 + (b.t - t0) * mass0;
    const double res = b.int_z + cum_gz2 - rhs;
    worst_zbound = std::max(worst_zbound, rhs > 0.0 ? res / rhs : res);
  }
};

}  // namespace

RunResult run(const Integrator& integ, const SimState& initial, const PotentialData& phi, double dt,
              double t_end, int trace_every, const RunOptions& opts) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("run: dt must be positive");
  if (trace_every < 1) throw ValidationError("run: trace_every must be >= 1");
  if (!(t_end >= initial.t)) throw ValidationError("run: t_end precedes the initial time");
  if (opts.certificate && opts.mu && std::abs(*opts.mu - opts.certificate->mu) > 0.0)
    throw ValidationError("run: mu override conflicts with the certificate's mu");

  RunResult res;
  res.final_state = initial;
  if (t_end == initial.t) return res;

  const GridSpec& g = initial.grid();
  const double mass0 = integrate(initial.n);
  const double mean_n0 = mass0 / g.area();
  double mu = opts.certificate ? opts.certificate->mu : (opts.mu ? *opts.mu : mean_n0);
  if (!(mu > 0.0)) mu = 1.0;  // n0 == 0: any positive mu gives the same trace up to a constant

  StateDiagnostics da = diagnose(initial, mu);
  Recorder rec{opts, mu, mean_n0, mass0, da.int_z};
  res.trace.push_back(rec.record(initial, da));
  if (opts.on_record) opts.on_record(initial, 0);

  const double span = t_end - initial.t;
  const long steps = std::max(1L, static_cast<long>(std::ceil(span / dt - 1e-9)));
  SimState s = initial;
  try {
    for (long k = 1; k <= steps; ++k) {
      const double h = (k == steps) ? (t_end - s.t) : dt;
      if (!(h > 0.0)) break;
      SimState next = integ.step(s, phi, h);
      if (k == steps) next.t = t_end;
      StateDiagnostics db = diagnose(next, mu);
      rec.audit(da, db, h, initial.t);
      s = std::move(next);
      da = db;
      if (k % trace_every == 0 || k == steps) {
        res.trace.push_back(rec.record(s, da));
        if (opts.on_record) opts.on_record(s, res.trace.size() - 1);
      }
    }
  } catch (...) {
    res.error = std::current_exception();
  }
  res.final_state = std::move(s);
  return res;
}

RunResult run(const SimState& initial, const PotentialData& phi, double dt, double t_end,
              int trace_every, const RunOptions& opts) {
  Integrator integ(initial.grid());
  return run(integ, initial, phi, dt, t_end, trace_every, opts);
}

}  // namespace chemolab
