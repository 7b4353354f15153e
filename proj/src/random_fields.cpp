#include "chemolab/random_fields.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace chemolab {

ScalarField cosine_synthesis(const GridSpec& g, const std::vector<double>& a, int kx, int ky) {
  if (kx <= 0 || ky <= 0 || a.size() != static_cast<std::size_t>(kx) * ky)
    throw ValidationError("cosine synthesis: coefficient shape mismatch");
  Eigen::MatrixXd cx(g.nx, kx), cy(g.ny, ky);
  for (int i = 0; i < g.nx; ++i)
    for (int k = 0; k < kx; ++k) cx(i, k) = std::cos(k * M_PI * (i + 0.5) / g.nx);
  for (int j = 0; j < g.ny; ++j)
    for (int l = 0; l < ky; ++l) cy(j, l) = std::cos(l * M_PI * (j + 0.5) / g.ny);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> A(a.data(), kx, ky);
  // values(i, j) stored at j * nx + i, i.e. column-major in an nx-by-ny matrix.
  const Eigen::MatrixXd v = cx * A * cy.transpose();
  ScalarField out(g);
  Eigen::Map<Eigen::MatrixXd>(out.values().data(), g.nx, g.ny) = v;
  return out;
}

ScalarField filtered_noise(const GridSpec& g, std::mt19937_64& rng, int kx, int ky, bool include_mean) {
  std::normal_distribution<double> nd;
  std::vector<double> a(static_cast<std::size_t>(kx) * ky);
  for (auto& x : a) x = nd(rng);
  if (!include_mean) a[0] = 0.0;
  return cosine_synthesis(g, a, kx, ky);
}

ScalarField filtered_noise(const GridSpec& g, std::mt19937_64& rng) {
  return filtered_noise(g, rng, (g.nx + 3) / 4, (g.ny + 3) / 4);
}

}  // namespace chemolab
