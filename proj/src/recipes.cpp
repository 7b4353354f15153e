#include "chemolab/recipes.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "chemolab/field_io.hpp"
#include "chemolab/random_fields.hpp"

namespace chemolab {

namespace {

std::filesystem::path resolve(const Config& cfg, const std::string& file) {
  std::filesystem::path p(file);
  return p.is_absolute() ? p : cfg.base_dir() / p;
}

ScalarField load_snapshot(const Config& cfg, const std::string& key, const GridSpec& grid) {
  ScalarField f = read_snapshot(resolve(cfg, cfg.require_string(key)));
  if (!(f.grid() == grid)) throw ValidationError(key + ": snapshot grid does not match grid.*");
  return f;
}

ScalarField gaussian(const GridSpec& g, double x0, double y0, double w) {
  if (!(w > 0.0)) throw ValidationError("n0.width must be positive");
  return ScalarField::sample(g, [&](double x, double y) {
    return std::exp(-((x - x0) * (x - x0) + (y - y0) * (y - y0)) / (w * w));
  });
}

std::pair<double, double> center(const Config& cfg, const GridSpec& g) {
  const auto c = cfg.get_doubles("n0.center", {0.5 * g.lx, 0.5 * g.ly});
  if (c.size() != 2) throw ValidationError("n0.center needs two coordinates");
  return {c[0], c[1]};
}

ScalarField with_mass(ScalarField f, double mass) {
  const double m = integrate(f);
  if (!(m > 0.0)) throw ValidationError("n0: recipe produced no mass");
  return (mass / m) * f;
}

}  // namespace

GridSpec grid_from_config(const Config& cfg) {
  return GridSpec::make(static_cast<int>(cfg.get_int("grid.nx", 64)), static_cast<int>(cfg.get_int("grid.ny", 64)),
                        cfg.get_double("grid.lx", 1.0), cfg.get_double("grid.ly", 1.0));
}

ScalarField density_recipe(const Config& cfg, const GridSpec& g, unsigned long seed) {
  const std::string kind = cfg.get_string("n0.kind", "gaussian_bump");
  if (kind == "snapshot") {
    ScalarField f = load_snapshot(cfg, "n0.file", g);
    if (f.min() < 0.0) throw ValidationError("n0 snapshot has negative values");
    if (auto m = cfg.get_optional_double("n0.mass")) f = with_mass(f, *m);
    return f;
  }
  const double mass = cfg.get_double("n0.mass", NAN);
  if (!(mass >= 0.0) || !std::isfinite(mass)) throw ValidationError("n0.mass must be given and nonnegative");
  if (kind == "constant") return ScalarField::constant(g, mass / g.area());
  if (mass == 0.0) return ScalarField::constant(g, 0.0);
  if (kind == "gaussian_bump") {
    const auto [x0, y0] = center(cfg, g);
    return with_mass(gaussian(g, x0, y0, cfg.get_double("n0.width", 0.15)), mass);
  }
  if (kind == "constant_plus_bump") {
    const double frac = cfg.get_double("n0.bump_fraction", 0.5);
    if (!(frac >= 0.0 && frac <= 1.0)) throw ValidationError("n0.bump_fraction must lie in [0, 1]");
    const auto [x0, y0] = center(cfg, g);
    ScalarField b = frac > 0 ? with_mass(gaussian(g, x0, y0, cfg.get_double("n0.width", 0.15)), frac * mass)
                             : ScalarField::constant(g, 0.0);
    return b + ScalarField::constant(g, (1.0 - frac) * mass / g.area());
  }
  if (kind == "filtered_noise") {
    std::mt19937_64 rng(static_cast<unsigned long>(cfg.get_int("n0.seed", static_cast<long>(seed))));
    const int cut = static_cast<int>(cfg.get_int("n0.cutoff", 4));
    const ScalarField w = filtered_noise(g, rng, cut, cut, false);
    const double contrast = cfg.get_double("n0.contrast", 1.0);
    const double s = contrast / std::max(1e-300, lp_norm(w, INFINITY));
    ScalarField n(g);
    for (std::size_t k = 0; k < n.size(); ++k) n[k] = std::exp(s * w[k]);
    return with_mass(n, mass);
  }
  throw ValidationError("n0.kind: unknown recipe '" + kind + "'");
}

ScalarField signal_recipe(const Config& cfg, const GridSpec& g, unsigned long seed) {
  const std::string kind = cfg.get_string("c0.kind", "cosine");
  if (kind == "snapshot") {
    ScalarField f = load_snapshot(cfg, "c0.file", g);
    if (f.min() <= 0.0) throw ValidationError("c0 snapshot must be positive");
    return f;
  }
  const double floor = cfg.get_double("c0.floor", NAN);
  if (!(floor > 0.0) || !std::isfinite(floor)) throw ValidationError("c0.floor must be given and positive");
  const double amp = cfg.get_double("c0.amplitude", 0.0);
  if (!(amp >= 0.0)) throw ValidationError("c0.amplitude must be nonnegative");
  if (kind == "constant") return ScalarField::constant(g, floor + amp);
  if (kind == "cosine") {
    const double kx = cfg.get_double("c0.kx", 1.0), ky = cfg.get_double("c0.ky", 1.0);
    return ScalarField::sample(g, [&](double x, double y) {
      return floor + 0.5 * amp * (1.0 + std::cos(kx * M_PI * x / g.lx) * std::cos(ky * M_PI * y / g.ly));
    });
  }
  if (kind == "filtered_noise") {
    std::mt19937_64 rng(static_cast<unsigned long>(cfg.get_int("c0.seed", static_cast<long>(seed) + 1)));
    const int cut = static_cast<int>(cfg.get_int("c0.cutoff", 4));
    ScalarField w = filtered_noise(g, rng, cut, cut, false);
    const double lo = w.min(), hi = w.max();
    for (double& v : w.values()) v = floor + amp * (hi > lo ? (v - lo) / (hi - lo) : 0.0);
    return w;
  }
  throw ValidationError("c0.kind: unknown recipe '" + kind + "'");
}

VectorField random_solenoidal(const StokesSolver& stokes, unsigned long seed, double amplitude) {
  const GridSpec& g = stokes.grid();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  const int K = 4;
  std::vector<double> a(K * K);
  for (double& x : a) x = nd(rng);
  std::vector<double> psi(static_cast<std::size_t>(g.nx + 1) * (g.ny + 1));
  for (int j = 0; j <= g.ny; ++j)
    for (int i = 0; i <= g.nx; ++i) {
      const double x = i * g.hx() / g.lx, y = j * g.hy() / g.ly;
      double s = 0.0;
      for (int k = 0; k < K; ++k)
        for (int l = 0; l < K; ++l) s += a[k * K + l] * std::cos(k * M_PI * x) * std::cos(l * M_PI * y);
      const double taper = std::pow(std::sin(M_PI * x) * std::sin(M_PI * y), 2);
      psi[static_cast<std::size_t>(j) * (g.nx + 1) + i] = s * taper;
    }
  VectorField u = stokes.from_stream_function(psi);
  const double m = u.max_abs();
  return m > 0 ? (amplitude / m) * u : u;
}

VectorField velocity_recipe(const Config& cfg, const StokesSolver& stokes, unsigned long seed) {
  const std::string kind = cfg.get_string("u0.kind", "zero");
  if (kind == "zero") return VectorField(stokes.grid());
  const double amp = cfg.get_double("u0.amplitude", NAN);
  if (!(amp >= 0.0) || !std::isfinite(amp)) throw ValidationError("u0.amplitude must be given and nonnegative");
  if (kind == "eigenmode") {
    const VectorField e = stokes.eigenfield();
    return (amp / e.max_abs()) * e;
  }
  if (kind == "random")
    return random_solenoidal(stokes, static_cast<unsigned long>(cfg.get_int("u0.seed", static_cast<long>(seed) + 2)), amp);
  throw ValidationError("u0.kind: unknown recipe '" + kind + "'");
}

ScalarField potential_recipe(const Config& cfg, const GridSpec& g) {
  const std::string kind = cfg.get_string("phi.kind", "linear");
  if (kind == "zero") return ScalarField::constant(g, 0.0);
  if (kind == "linear") {
    const double gx = cfg.get_double("phi.gx", 1.0), gy = cfg.get_double("phi.gy", 0.5);
    return ScalarField::sample(g, [&](double x, double y) { return gx * x + gy * y; });
  }
  if (kind == "cosine") {
    const double a = cfg.get_double("phi.amplitude", 1.0);
    const double kx = cfg.get_double("phi.kx", 1.0), ky = cfg.get_double("phi.ky", 1.0);
    return ScalarField::sample(g, [&](double x, double y) {
      return a * std::cos(kx * M_PI * x / g.lx) * std::cos(ky * M_PI * y / g.ly);
    });
  }
  if (kind == "snapshot") return load_snapshot(cfg, "phi.file", g);
  throw ValidationError("phi.kind: unknown recipe '" + kind + "'");
}

Sensitivity sensitivity_from(const std::string& kind, double eps) {
  if (kind == "identity") return Sensitivity::identity();
  if (kind == "eps") return Sensitivity::regularized(eps);
  throw ValidationError("sensitivity.kind must be identity or eps");
}

}  // namespace chemolab
