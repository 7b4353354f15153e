#include "chemolab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace chemolab {

GridSpec GridSpec::make(int nx, int ny, double lx, double ly) {
  if (nx <= 0 || ny <= 0) throw ValidationError("grid: cell counts must be positive");
  if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly))
    throw ValidationError("grid: side lengths must be positive and finite");
  return GridSpec{nx, ny, lx, ly};
}

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
  if (!(a == b)) throw ValidationError(std::string(what) + ": grid mismatch");
}

// ---------------------------------------------------------------- ScalarField

ScalarField::ScalarField(const GridSpec& grid, BoundaryTag bc)
    : grid_(grid), values_(grid.cells(), 0.0), bc_(bc) {}

ScalarField::ScalarField(const GridSpec& grid, std::vector<double> values, BoundaryTag bc)
    : grid_(grid), values_(std::move(values)), bc_(bc) {
  if (values_.size() != grid.cells())
    throw ValidationError("scalar field: value count does not match grid");
}

ScalarField ScalarField::constant(const GridSpec& grid, double value) {
  return ScalarField(grid, std::vector<double>(grid.cells(), value));
}

double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }

double ScalarField::mean() const {
  double s = 0.0;
  for (double v : values_) s += v;
  return s / static_cast<double>(values_.size());
}

bool ScalarField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ScalarField& ScalarField::operator+=(const ScalarField& other) {
  require_same_grid(grid_, other.grid_, "scalar +=");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += other.values_[k];
  return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& other) {
  require_same_grid(grid_, other.grid_, "scalar -=");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= other.values_[k];
  return *this;
}

ScalarField& ScalarField::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double s, ScalarField a) { return a *= s; }

// ---------------------------------------------------------------- VectorField

VectorField::VectorField(const GridSpec& grid)
    : grid_(grid), ux_(grid.x_faces(), 0.0), uy_(grid.y_faces(), 0.0) {}

void VectorField::zero_boundary() {
  for (int j = 0; j < grid_.ny; ++j) {
    ux(0, j) = 0.0;
    ux(grid_.nx, j) = 0.0;
  }
  for (int i = 0; i < grid_.nx; ++i) {
    uy(i, 0) = 0.0;
    uy(i, grid_.ny) = 0.0;
  }
}

bool VectorField::boundary_is_zero() const {
  for (int j = 0; j < grid_.ny; ++j)
    if (ux(0, j) != 0.0 || ux(grid_.nx, j) != 0.0) return false;
  for (int i = 0; i < grid_.nx; ++i)
    if (uy(i, 0) != 0.0 || uy(i, grid_.ny) != 0.0) return false;
  return true;
}

bool VectorField::all_finite() const {
  auto fin = [](double v) { return std::isfinite(v); };
  return std::all_of(ux_.begin(), ux_.end(), fin) && std::all_of(uy_.begin(), uy_.end(), fin);
}

double VectorField::max_abs() const {
  double m = 0.0;
  for (double v : ux_) m = std::max(m, std::abs(v));
  for (double v : uy_) m = std::max(m, std::abs(v));
  return m;
}

VectorField& VectorField::operator+=(const VectorField& other) {
  require_same_grid(grid_, other.grid_, "vector +=");
  for (std::size_t k = 0; k < ux_.size(); ++k) ux_[k] += other.ux_[k];
  for (std::size_t k = 0; k < uy_.size(); ++k) uy_[k] += other.uy_[k];
  return *this;
}

VectorField& VectorField::operator-=(const VectorField& other) {
  require_same_grid(grid_, other.grid_, "vector -=");
  for (std::size_t k = 0; k < ux_.size(); ++k) ux_[k] -= other.ux_[k];
  for (std::size_t k = 0; k < uy_.size(); ++k) uy_[k] -= other.uy_[k];
  return *this;
}

VectorField& VectorField::operator*=(double s) {
  for (double& v : ux_) v *= s;
  for (double& v : uy_) v *= s;
  return *this;
}

VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
VectorField operator*(double s, VectorField a) { return a *= s; }

// ---------------------------------------------------------------- operators

namespace detail {

void apply_laplacian(const GridSpec& g, std::span<const double> in, std::span<double> out) {
  const double ax = 1.0 / (g.hx() * g.hx());
  const double ay = 1.0 / (g.hy() * g.hy());
  const int nx = g.nx, ny = g.ny;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t k = g.index(i, j);
      const double c = in[k];
      double acc = 0.0;
      if (i > 0) acc += ax * (in[k - 1] - c);
      if (i < nx - 1) acc += ax * (in[k + 1] - c);
      if (j > 0) acc += ay * (in[k - nx] - c);
      if (j < ny - 1) acc += ay * (in[k + nx] - c);
      out[k] = acc;
    }
  }
}

}  // namespace detail

ScalarField laplacian(const ScalarField& field) {
  if (field.bc() != BoundaryTag::Neumann)
    throw ValidationError("laplacian: field must be tagged Neumann");
  ScalarField out(field.grid(), BoundaryTag::None);
  detail::apply_laplacian(field.grid(), field.values(), out.values());
  return out;
}

VectorField gradient(const ScalarField& field) {
  const GridSpec& g = field.grid();
  VectorField v(g);
  const double ihx = 1.0 / g.hx(), ihy = 1.0 / g.hy();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 1; i < g.nx; ++i) v.ux(i, j) = (field(i, j) - field(i - 1, j)) * ihx;
  for (int j = 1; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) v.uy(i, j) = (field(i, j) - field(i, j - 1)) * ihy;
  return v;
}

ScalarField divergence(const VectorField& v) {
  const GridSpec& g = v.grid();
  ScalarField out(g, BoundaryTag::None);
  const double ihx = 1.0 / g.hx(), ihy = 1.0 / g.hy();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      out(i, j) = (v.ux(i + 1, j) - v.ux(i, j)) * ihx + (v.uy(i, j + 1) - v.uy(i, j)) * ihy;
  return out;
}

double integrate(const ScalarField& field) {
  double s = 0.0;
  for (double v : field.values()) s += v;
  return s * field.grid().cell_measure();
}

double lp_norm(const ScalarField& field, double p) {
  if (!(p >= 1.0)) throw ValidationError("lp_norm: p must be >= 1");
  if (std::isinf(p)) {
    double m = 0.0;
    for (double v : field.values()) m = std::max(m, std::abs(v));
    return m;
  }
  double s = 0.0;
  if (p == 1.0) {
    for (double v : field.values()) s += std::abs(v);
  } else if (p == 2.0) {
    for (double v : field.values()) s += v * v;
  } else {
    for (double v : field.values()) s += std::pow(std::abs(v), p);
  }
  s *= field.grid().cell_measure();
  return p == 1.0 ? s : (p == 2.0 ? std::sqrt(s) : std::pow(s, 1.0 / p));
}

double inner(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid(), b.grid(), "inner");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s * a.grid().cell_measure();
}

double inner(const VectorField& a, const VectorField& b) {
  require_same_grid(a.grid(), b.grid(), "inner");
  double s = 0.0;
  auto ax = a.ux_values(), bx = b.ux_values();
  for (std::size_t k = 0; k < ax.size(); ++k) s += ax[k] * bx[k];
  auto ay = a.uy_values(), by = b.uy_values();
  for (std::size_t k = 0; k < ay.size(); ++k) s += ay[k] * by[k];
  return s * a.grid().cell_measure();
}

double w12_norm_sq(const ScalarField& field) {
  const VectorField g = gradient(field);
  return inner(field, field) + inner(g, g);
}

ScalarField magnitude_sq(const VectorField& v) {
  const GridSpec& g = v.grid();
  ScalarField out(g, BoundaryTag::None);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double a = v.ux(i, j), b = v.ux(i + 1, j);
      const double c = v.uy(i, j), d = v.uy(i, j + 1);
      out(i, j) = 0.5 * (a * a + b * b + c * c + d * d);
    }
  }
  return out;
}

ScalarField grad_sq(const ScalarField& phi) { return magnitude_sq(gradient(phi)); }

double lp_norm(const VectorField& v, double p) {
  if (!(p >= 1.0)) throw ValidationError("lp_norm: p must be >= 1");
  ScalarField m = magnitude_sq(v);
  if (std::isinf(p)) return std::sqrt(m.max());
  double s = 0.0;
  for (double e : m.values()) s += std::pow(e, 0.5 * p);
  return std::pow(s * v.grid().cell_measure(), 1.0 / p);
}

ScalarField velocity_gradient_norm(const VectorField& v) {
  const GridSpec& g = v.grid();
  const int nx = g.nx, ny = g.ny;
  const double hx = g.hx(), hy = g.hy();
  // Shear derivatives live on nodes (i, j), i in [0, nx], j in [0, ny].
  // Tangential no-slip uses odd reflection across the wall.
  auto dux_dy = [&](int i, int j) {
    if (i == 0 || i == nx) return 0.0;
    if (j == 0) return 2.0 * v.ux(i, 0) / hy;
    if (j == ny) return -2.0 * v.ux(i, ny - 1) / hy;
    return (v.ux(i, j) - v.ux(i, j - 1)) / hy;
  };
  auto duy_dx = [&](int i, int j) {
    if (j == 0 || j == ny) return 0.0;
    if (i == 0) return 2.0 * v.uy(0, j) / hx;
    if (i == nx) return -2.0 * v.uy(nx - 1, j) / hx;
    return (v.uy(i, j) - v.uy(i - 1, j)) / hx;
  };
  ScalarField out(g, BoundaryTag::None);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double a = (v.ux(i + 1, j) - v.ux(i, j)) / hx;
      const double d = (v.uy(i, j + 1) - v.uy(i, j)) / hy;
      double shear = 0.0;
      for (int di = 0; di <= 1; ++di) {
        for (int dj = 0; dj <= 1; ++dj) {
          const double b = dux_dy(i + di, j + dj);
          const double c = duy_dx(i + di, j + dj);
          shear += 0.25 * (b * b + c * c);
        }
      }
      out(i, j) = std::sqrt(a * a + d * d + shear);
    }
  }
  return out;
}

}  // namespace chemolab
