#pragma once

// Rectangular cell-centered grid with MAC-staggered velocities.
//
// Scalars live at cell centers (i, j), i in [0, nx), j in [0, ny).
// Horizontal velocity components live on x-faces (i, j), i in [0, nx];
// vertical components on y-faces (i, j), j in [0, ny]. Faces on the
// domain boundary carry the (zero) normal velocity.
//
// Inner products use the cell measure hx*hy for both cells and faces, which
// makes divergence the exact negative adjoint of gradient.

#include <cstddef>
#include <span>
#include <vector>

#include "chemolab/error.hpp"

namespace chemolab {

struct GridSpec {
  int nx = 0;
  int ny = 0;
  double lx = 1.0;
  double ly = 1.0;

  /// Validated constructor; throws ValidationError on nonpositive sizes.
  static GridSpec make(int nx, int ny, double lx = 1.0, double ly = 1.0);

  double hx() const { return lx / nx; }
  double hy() const { return ly / ny; }
  double area() const { return lx * ly; }
  double cell_measure() const { return hx() * hy(); }
  std::size_t cells() const { return static_cast<std::size_t>(nx) * ny; }
  std::size_t x_faces() const { return static_cast<std::size_t>(nx + 1) * ny; }
  std::size_t y_faces() const { return static_cast<std::size_t>(nx) * (ny + 1); }

  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
  double xc(int i) const { return (i + 0.5) * hx(); }
  double yc(int j) const { return (j + 0.5) * hy(); }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

enum class BoundaryTag { Neumann, None };

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const GridSpec& grid, BoundaryTag bc = BoundaryTag::Neumann);
  ScalarField(const GridSpec& grid, std::vector<double> values,
              BoundaryTag bc = BoundaryTag::Neumann);

  static ScalarField constant(const GridSpec& grid, double value);

  /// Samples f(x, y) at cell centers.
  template <class F>
  static ScalarField sample(const GridSpec& grid, F&& f) {
    ScalarField out(grid);
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) out(i, j) = f(grid.xc(i), grid.yc(j));
    return out;
  }

  const GridSpec& grid() const { return grid_; }
  BoundaryTag bc() const { return bc_; }
  void set_bc(BoundaryTag bc) { bc_ = bc; }

  double& operator()(int i, int j) { return values_[grid_.index(i, j)]; }
  double operator()(int i, int j) const { return values_[grid_.index(i, j)]; }
  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  double min() const;
  double max() const;
  double mean() const;
  bool all_finite() const;

  ScalarField& operator+=(const ScalarField& other);
  ScalarField& operator-=(const ScalarField& other);
  ScalarField& operator*=(double s);

 private:
  GridSpec grid_;
  std::vector<double> values_;
  BoundaryTag bc_ = BoundaryTag::Neumann;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double s, ScalarField a);

/// MAC velocity with homogeneous Dirichlet data.
class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(const GridSpec& grid);

  const GridSpec& grid() const { return grid_; }

  double& ux(int i, int j) { return ux_[static_cast<std::size_t>(j) * (grid_.nx + 1) + i]; }
  double ux(int i, int j) const { return ux_[static_cast<std::size_t>(j) * (grid_.nx + 1) + i]; }
  double& uy(int i, int j) { return uy_[static_cast<std::size_t>(j) * grid_.nx + i]; }
  double uy(int i, int j) const { return uy_[static_cast<std::size_t>(j) * grid_.nx + i]; }

  std::span<double> ux_values() { return ux_; }
  std::span<const double> ux_values() const { return ux_; }
  std::span<double> uy_values() { return uy_; }
  std::span<const double> uy_values() const { return uy_; }

  /// Sets every boundary-normal face to zero.
  void zero_boundary();
  bool boundary_is_zero() const;
  bool all_finite() const;
  double max_abs() const;

  VectorField& operator+=(const VectorField& other);
  VectorField& operator-=(const VectorField& other);
  VectorField& operator*=(double s);

 private:
  GridSpec grid_;
  std::vector<double> ux_;
  std::vector<double> uy_;
};

VectorField operator+(VectorField a, const VectorField& b);
VectorField operator-(VectorField a, const VectorField& b);
VectorField operator*(double s, VectorField a);

// Discrete operators. Each throws ValidationError on grid mismatch.

/// 5-point Laplacian with even-reflection ghosts; requires a Neumann-tagged field.
ScalarField laplacian(const ScalarField& field);
/// Face differences; boundary faces are zero.
VectorField gradient(const ScalarField& field);
/// Cell divergence of face data; equals minus the adjoint of gradient.
ScalarField divergence(const VectorField& v);

double integrate(const ScalarField& field);
/// L^p norm by midpoint quadrature; p = infinity gives max |value|. p < 1 throws.
double lp_norm(const ScalarField& field, double p);
/// int phi^2 + int |grad phi|^2.
double w12_norm_sq(const ScalarField& field);

double inner(const ScalarField& a, const ScalarField& b);
double inner(const VectorField& a, const VectorField& b);

/// Cell field of |v|^2, each component averaged over the two adjacent faces
/// as squares. Integrates exactly to inner(v, v).
ScalarField magnitude_sq(const VectorField& v);
/// magnitude_sq(gradient(phi)).
ScalarField grad_sq(const ScalarField& phi);
/// L^p norm of a velocity field built on magnitude_sq.
double lp_norm(const VectorField& v, double p);
/// Cell field of the Frobenius norm |grad u|: normal derivatives at cell
/// centers, shear derivatives at nodes averaged to cells.
ScalarField velocity_gradient_norm(const VectorField& v);

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what);

namespace detail {
/// out = Laplacian(in) on raw cell arrays (Neumann reflection).
void apply_laplacian(const GridSpec& g, std::span<const double> in, std::span<double> out);
}  // namespace detail

}  // namespace chemolab
