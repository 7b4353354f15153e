#pragma once

// Sensitivity functions f with f(0) = 0 and 0 <= f' <= 1, including the
// smooth saturating family f_eps(s) = int_0^s rho(eps*sigma) dsigma.

namespace chemolab {

struct Sensitivity {
  enum class Kind { Identity, Eps };
  Kind kind = Kind::Identity;
  double eps = 0.0;

  static Sensitivity identity() { return {}; }
  /// Throws ValidationError unless 0 < eps < 1.
  static Sensitivity regularized(double eps);
};

/// Absolute tolerance of the transition-band quadrature in f().
inline constexpr double kSensitivityQuadTol = 1e-12;

/// Smooth cutoff: 1 on [0, 1], 0 on [2, inf), strictly decreasing between.
double rho(double s);
/// f(s); throws ValidationError for s < 0.
double f(const Sensitivity& sens, double s);
/// f'(s); throws ValidationError for s < 0.
double f_prime(const Sensitivity& sens, double s);

/// Unchecked versions for inner loops (s >= 0 assumed).
namespace detail {
double f_unchecked(const Sensitivity& sens, double s);
double f_prime_unchecked(const Sensitivity& sens, double s);
}  // namespace detail

}  // namespace chemolab
