#include "chemolab/regularize.hpp"

#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "chemolab/error.hpp"

namespace chemolab {
namespace {

double g(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

// int_1^x (1 - rho(sigma)) dsigma for x in [1, 2]. The integrand is
// nonnegative, so the result never pushes f above the identity.
double deficit(double x) {
  if (x <= 1.0) return 0.0;
  using boost::math::quadrature::gauss_kronrod;
  auto one_minus_rho = [](double s) { return 1.0 - rho(s); };
  double err = 0.0;
  return gauss_kronrod<double, 31>::integrate(one_minus_rho, 1.0, x, 20, kSensitivityQuadTol, &err);
}

}  // namespace

Sensitivity Sensitivity::regularized(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("sensitivity: eps must lie in (0, 1)");
  return {Kind::Eps, eps};
}

double rho(double s) {
  if (s <= 1.0) return 1.0;
  if (s >= 2.0) return 0.0;
  const double a = g(2.0 - s);
  const double b = g(s - 1.0);
  return a / (a + b);
}

namespace detail {

double f_unchecked(const Sensitivity& sens, double s) {
  if (sens.kind == Sensitivity::Kind::Identity) return s;
  const double e = sens.eps;
  if (s <= 1.0 / e) return s;
  // int_1^2 rho = 1/2 by the symmetry rho(3 - s) = 1 - rho(s).
  if (s >= 2.0 / e) return 1.5 / e;
  return s - deficit(e * s) / e;
}

double f_prime_unchecked(const Sensitivity& sens, double s) {
  if (sens.kind == Sensitivity::Kind::Identity) return 1.0;
  return rho(sens.eps * s);
}

}  // namespace detail

double f(const Sensitivity& sens, double s) {
  if (s < 0.0) throw ValidationError("sensitivity: argument must be nonnegative");
  return detail::f_unchecked(sens, s);
}

double f_prime(const Sensitivity& sens, double s) {
  if (s < 0.0) throw ValidationError("sensitivity: argument must be nonnegative");
  return detail::f_prime_unchecked(sens, s);
}

}  // namespace chemolab
