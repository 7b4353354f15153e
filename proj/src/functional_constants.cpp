#include "chemolab/functional_constants.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "chemolab/linear_solvers.hpp"
#include "chemolab/random_fields.hpp"

namespace chemolab {

const char* to_string(ConstantName n) {
  switch (n) {
    case ConstantName::K2: return "K2";
    case ConstantName::K3: return "K3";
    case ConstantName::CPoincare: return "C_poincare";
  }
  return "?";
}

ConstantName constant_from_string(const std::string& s) {
  if (s == "K2") return ConstantName::K2;
  if (s == "K3") return ConstantName::K3;
  if (s == "C_poincare") return ConstantName::CPoincare;
  throw ValidationError("unknown constant '" + s + "' (expected K2, K3 or C_poincare)");
}

namespace {

constexpr double kSmoothingLength = 0.2;  // relative to the shorter side

ScalarField lap(const ScalarField& phi) {
  ScalarField out(phi.grid(), BoundaryTag::None);
  detail::apply_laplacian(phi.grid(), phi.values(), out.values());
  return out;
}

// d/dphi of sum_c h(M_c) where M = magnitude_sq(grad phi) and w = h'(M),
// without the cell measure.
ScalarField pullback(const ScalarField& phi, const VectorField& g, const ScalarField& w) {
  const GridSpec& gr = phi.grid();
  VectorField v(gr);
  for (int j = 0; j < gr.ny; ++j)
    for (int i = 1; i < gr.nx; ++i) v.ux(i, j) = g.ux(i, j) * (w(i - 1, j) + w(i, j));
  for (int j = 1; j < gr.ny; ++j)
    for (int i = 0; i < gr.nx; ++i) v.uy(i, j) = g.uy(i, j) * (w(i, j - 1) + w(i, j));
  return -1.0 * divergence(v);
}

struct Parts {
  double num = 0.0;
  double den = 0.0;
};

// Q in its own scale (the raw field); returns the log-quotient pieces.
double raw_quotient(ConstantName name, const ScalarField& phi, Parts* parts) {
  const double dA = phi.grid().cell_measure();
  switch (name) {
    case ConstantName::K2: {
      double s3 = 0.0, s2 = 0.0, s1 = 0.0;
      for (double v : phi.values()) {
        const double a = std::abs(v);
        s3 += a * a * a;
        s2 += a * a;
        s1 += a;
      }
      const VectorField g = gradient(phi);
      const double w = s2 * dA + inner(g, g);
      *parts = {s3 * dA, w * s1 * dA};
      return parts->num / parts->den;
    }
    case ConstantName::K3: {
      const ScalarField m = magnitude_sq(gradient(phi));
      double p4 = 0.0, g2 = 0.0;
      for (double v : m.values()) {
        p4 += v * v;
        g2 += v;
      }
      const ScalarField l = lap(phi);
      const double d2 = inner(l, l);
      *parts = {p4 * dA, d2 * g2 * dA};
      return std::pow(parts->num / parts->den, 0.25);
    }
    case ConstantName::CPoincare: {
      const double mean = phi.mean();
      double v2 = 0.0;
      for (double v : phi.values()) v2 += (v - mean) * (v - mean);
      const ScalarField m = magnitude_sq(gradient(phi));
      double t1 = 0.0;
      for (double v : m.values()) t1 += std::sqrt(v);
      *parts = {std::sqrt(v2 * dA), t1 * dA};
      return parts->num / parts->den;
    }
  }
  return 0.0;
}

}  // namespace

std::optional<double> quotient(ConstantName name, const ScalarField& phi) {
  const double s = std::max(std::abs(phi.max()), std::abs(phi.min()));
  if (!(s > 0.0) || !std::isfinite(s)) return std::nullopt;
  const ScalarField unit = (1.0 / s) * phi;
  Parts p;
  const double q = raw_quotient(name, unit, &p);
  if (!(p.den >= kDegenerateDenominator) || !std::isfinite(q)) return std::nullopt;
  return q;
}

ScalarField log_quotient_gradient(ConstantName name, const ScalarField& phi) {
  const GridSpec& gr = phi.grid();
  const double dA = gr.cell_measure();
  ScalarField out(gr, BoundaryTag::None);
  switch (name) {
    case ConstantName::K2: {
      double s3 = 0.0, s2 = 0.0, s1 = 0.0;
      for (double v : phi.values()) {
        const double a = std::abs(v);
        s3 += a * a * a;
        s2 += a * a;
        s1 += a;
      }
      const VectorField g = gradient(phi);
      const double w = s2 * dA + inner(g, g);
      const ScalarField l = lap(phi);
      for (std::size_t k = 0; k < out.size(); ++k) {
        const double v = phi[k];
        const double sg = (v > 0) - (v < 0);
        out[k] = 3.0 * std::abs(v) * v / s3 - (2.0 * v * dA - 2.0 * l[k] * dA) / w - sg / s1;
      }
      return out;
    }
    case ConstantName::K3: {
      const VectorField g = gradient(phi);
      const ScalarField m = magnitude_sq(g);
      double p4 = 0.0, g2 = 0.0;
      for (double v : m.values()) {
        p4 += v * v;
        g2 += v;
      }
      const ScalarField l = lap(phi);
      const ScalarField ll = lap(l);
      const double d2 = inner(l, l) / dA;
      const ScalarField dp4 = pullback(phi, g, 2.0 * m);
      for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = 0.25 * (dp4[k] / p4 - 2.0 * ll[k] / d2 + 2.0 * l[k] / g2);
      return out;
    }
    case ConstantName::CPoincare: {
      const double mean = phi.mean();
      double v2 = 0.0;
      for (double v : phi.values()) v2 += (v - mean) * (v - mean);
      const VectorField g = gradient(phi);
      const ScalarField m = magnitude_sq(g);
      ScalarField w(gr, BoundaryTag::None);
      double t1 = 0.0;
      for (std::size_t k = 0; k < m.size(); ++k) {
        const double r = std::sqrt(m[k]);
        t1 += r;
        w[k] = r > 0.0 ? 0.5 / r : 0.0;
      }
      const ScalarField dt1 = pullback(phi, g, w);
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = (phi[k] - mean) / v2 - dt1[k] / t1;
      return out;
    }
  }
  return out;
}

ScalarField ascend(ConstantName name, const ScalarField& seed, int iterations, double step_size) {
  if (iterations < 0 || !(step_size > 0.0)) throw ValidationError("ascend: bad iteration settings");
  auto q0 = quotient(name, seed);
  if (!q0) return seed;
  const double s = std::max(std::abs(seed.max()), std::abs(seed.min()));
  ScalarField phi = (1.0 / s) * seed;
  double q = *q0;
  // Sobolev smoothing of the ascent direction; K3 carries fourth derivatives.
  const GridSpec& g = seed.grid();
  const double ell = kSmoothingLength * std::min(g.lx, g.ly);
  const HelmholtzSolver smooth(g, ell * ell);
  const int passes = name == ConstantName::K3 ? 2 : 1;
  for (int it = 0; it < iterations; ++it) {
    ScalarField d = log_quotient_gradient(name, phi);
    for (int p = 0; p < passes; ++p) smooth.solve_in_place(d.values());
    const double dn = std::sqrt(inner(d, d));
    if (!(dn > 0.0) || !std::isfinite(dn)) break;
    const double scale = std::sqrt(inner(phi, phi)) / dn;
    bool improved = false;
    for (double h = step_size; h > step_size * 1e-6; h *= 0.5) {
      ScalarField trial = phi + (h * scale) * d;
      const double ts = std::max(std::abs(trial.max()), std::abs(trial.min()));
      if (!(ts > 0.0)) continue;
      trial = (1.0 / ts) * trial;
      const auto qt = quotient(name, trial);
      if (qt && *qt > q) {
        phi = std::move(trial);
        q = *qt;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  phi.set_bc(BoundaryTag::Neumann);
  return phi;
}

ScalarField random_trial_field(const GridSpec& grid, unsigned long seed) {
  std::mt19937_64 rng(seed);
  const int cx = (grid.nx + 3) / 4, cy = (grid.ny + 3) / 4;
  std::uniform_int_distribution<int> kx(1, std::max(1, cx)), ky(1, std::max(1, cy));
  const int a = kx(rng), b = ky(rng);
  return filtered_noise(grid, rng, std::max(a, 2), std::max(b, 2));
}

namespace {

unsigned long member_seed(unsigned long seed, int k) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(k)};
  std::uint64_t out[1];
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  out[0] = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
  return out[0];
}

std::string provenance_digest(ConstantName name, const GridSpec& g, int ens, int its, double step,
                              unsigned long seed, std::size_t extra) {
  const std::string text = fmt::format("{}|{}x{}|{:.17g}x{:.17g}|{}|{}|{:.17g}|{}|{}", to_string(name), g.nx,
                                       g.ny, g.lx, g.ly, ens, its, step, seed, extra);
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace

ConstantEstimate estimate(ConstantName name, const GridSpec& grid, int ensemble_size, int ascent_iterations,
                          double step_size, unsigned long seed, const std::vector<ScalarField>& extra_seeds) {
  if (ensemble_size < 1) throw ValidationError("estimate: ensemble_size must be >= 1");
  if (ascent_iterations < 0) throw ValidationError("estimate: ascent_iterations must be >= 0");
  if (!(step_size > 0.0)) throw ValidationError("estimate: step_size must be positive");

  std::vector<ScalarField> seeds;
  if (name == ConstantName::K2) seeds.push_back(ScalarField::constant(grid, 1.0));
  for (int k = 0; k < ensemble_size; ++k) seeds.push_back(random_trial_field(grid, member_seed(seed, k)));
  for (const auto& s : extra_seeds) {
    require_same_grid(grid, s.grid(), "estimate");
    seeds.push_back(s);
  }

  std::vector<std::future<ScalarField>> jobs;
  jobs.reserve(seeds.size());
  for (const auto& s : seeds)
    jobs.push_back(std::async(std::launch::async, [&, s] { return ascend(name, s, ascent_iterations, step_size); }));

  ConstantEstimate est;
  est.name = name;
  est.grid = grid;
  est.ensemble_size = ensemble_size;
  est.ascent_iterations = ascent_iterations;
  est.step_size = step_size;
  est.seed = seed;
  est.provenance = provenance_digest(name, grid, ensemble_size, ascent_iterations, step_size, seed,
                                     extra_seeds.size());
  bool found = false;
  for (auto& j : jobs) {
    ScalarField f = j.get();
    const auto q = quotient(name, f);
    if (q && (!found || *q > est.value)) {
      est.value = *q;
      est.argmax_field = std::move(f);
      found = true;
    }
  }
  if (!found) throw SolverError(fmt::format("estimate {}: every trial field was degenerate", to_string(name)));
  return est;
}

VerifyReport verify(const ConstantEstimate& est, int trials, double inflation, unsigned long seed,
                    const std::vector<ScalarField>& extra_fields) {
  if (!(inflation >= 1.0)) throw ValidationError("verify: inflation must be >= 1");
  if (trials < 0) throw ValidationError("verify: trials must be >= 0");
  if (!(est.value > 0.0)) throw ValidationError("verify: estimate has no positive value");
  VerifyReport rep;
  auto check = [&](const ScalarField& f) {
    const auto q = quotient(est.name, f);
    ++rep.trials;
    if (!q) return;
    const double r = *q / est.value;
    if (r > rep.worst_ratio) {
      rep.worst_ratio = r;
      rep.worst_field = f;
    }
    if (*q > est.value * inflation) ++rep.violations;
  };
  for (int k = 0; k < trials; ++k) check(random_trial_field(est.grid, member_seed(seed ^ 0x9e3779b97f4a7c15ull, k)));
  for (const auto& f : extra_fields) check(f);
  return rep;
}

ConstantEstimate verify_and_refine(const ConstantEstimate& est, int trials, double inflation, unsigned long seed,
                                   VerifyReport* final_report, int max_rounds) {
  ConstantEstimate cur = est;
  VerifyReport rep = verify(cur, trials, inflation, seed);
  std::vector<ScalarField> extra;
  for (int round = 0; round < max_rounds && rep.violations > 0; ++round) {
    extra.push_back(rep.worst_field);
    cur = estimate(cur.name, cur.grid, cur.ensemble_size, cur.ascent_iterations, cur.step_size, cur.seed, extra);
    rep = verify(cur, trials, inflation, seed);
  }
  if (final_report) *final_report = rep;
  return cur;
}

void write_constants(std::ostream& os, const std::vector<ConstantEstimate>& estimates,
                     const std::map<std::string, double>& extra) {
  for (const auto& e : estimates) {
    const std::string n = to_string(e.name);
    os << n << " = " << fmt::format("{:.17g}", e.value) << '\n';
    os << n << ".grid = " << fmt::format("{}x{} {:.17g}x{:.17g}", e.grid.nx, e.grid.ny, e.grid.lx, e.grid.ly) << '\n';
    os << n << ".ensemble_size = " << e.ensemble_size << '\n';
    os << n << ".ascent_iterations = " << e.ascent_iterations << '\n';
    os << n << ".step_size = " << fmt::format("{:.17g}", e.step_size) << '\n';
    os << n << ".seed = " << e.seed << '\n';
    os << n << ".provenance = " << e.provenance << '\n';
  }
  for (const auto& [k, v] : extra) os << k << " = " << fmt::format("{:.17g}", v) << '\n';
}

std::map<std::string, double> read_constants(std::istream& is) {
  std::map<std::string, double> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](const std::string& s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    std::istringstream vs(val);
    double d;
    if ((vs >> d) && vs.eof()) out[key] = d;
  }
  return out;
}

}  // namespace chemolab
