#include <cmath>
#include <sstream>

#include "doctest.h"

#include "chemolab/functional_constants.hpp"

using namespace chemolab;

namespace {

const ConstantName kAll[] = {ConstantName::K2, ConstantName::K3, ConstantName::CPoincare};

// K3 quotient of cos(pi x / lx) on [0, lx] x [0, ly].
double k3_single_mode(double lx, double ly) {
  // |grad|^4: (pi/lx)^4 (3/8) lx ly; |Lap|^2: (pi/lx)^4 lx ly / 2; |grad|^2: (pi/lx)^2 lx ly / 2.
  const double k = M_PI / lx, area = lx * ly;
  const double num = std::pow(k, 4) * 0.375 * area;
  const double den = std::pow(k, 4) * 0.5 * area * k * k * 0.5 * area;
  return std::pow(num / den, 0.25);
}

}  // namespace

TEST_CASE("constant names") {
  for (ConstantName n : kAll) CHECK(constant_from_string(to_string(n)) == n);
  CHECK_THROWS_AS(constant_from_string("K9"), ValidationError);
}

TEST_CASE("analytic log-quotient gradients match finite differences") {
  const GridSpec g = GridSpec::make(10, 8, 1.3, 0.9);
  for (ConstantName name : kAll) {
    ScalarField phi = random_trial_field(g, 5);
    for (double& v : phi.values()) v += 0.3;
    const ScalarField d = log_quotient_gradient(name, phi);
    for (std::size_t k : {0u, 7u, 23u, 44u, 79u}) {
      ScalarField a = phi, b = phi;
      const double h = 1e-6;
      a[k] += h;
      b[k] -= h;
      const double fd = (std::log(*quotient(name, a)) - std::log(*quotient(name, b))) / (2 * h);
      CHECK(d[k] == doctest::Approx(fd).epsilon(1e-5).scale(1e-9));
    }
  }
}

TEST_CASE("quotient closed forms") {
  SUBCASE("K3 on a single cosine mode") {
    const GridSpec g = GridSpec::make(256, 4, 1.0, 1.0);
    const ScalarField phi = ScalarField::sample(g, [](double x, double) { return std::cos(M_PI * x); });
    CHECK(k3_single_mode(1.0, 1.0) == doctest::Approx(0.62433).epsilon(1e-4));
    CHECK(*quotient(ConstantName::K3, phi) == doctest::Approx(k3_single_mode(1.0, 1.0)).epsilon(1e-4));
  }
  SUBCASE("constants") {
    const GridSpec g = GridSpec::make(12, 12, 2.0, 1.5);
    const ScalarField c = ScalarField::constant(g, 4.0);
    CHECK(*quotient(ConstantName::K2, c) == doctest::Approx(1.0 / g.area()).epsilon(1e-14));
    CHECK_FALSE(quotient(ConstantName::K3, c).has_value());
    CHECK_FALSE(quotient(ConstantName::CPoincare, c).has_value());
    CHECK_FALSE(quotient(ConstantName::K2, ScalarField::constant(g, 0.0)).has_value());
  }
}

TEST_CASE("scale invariance and the constant-shift distinction") {
  const GridSpec g = GridSpec::make(32, 24, 1.0, 0.75);
  const ScalarField phi = random_trial_field(g, 42);
  for (ConstantName name : kAll) {
    const double q = *quotient(name, phi);
    for (double lam : {-3.7, 1e5, 1e-4, -1e-7})
      CHECK(std::abs(*quotient(name, lam * phi) - q) <= 1e-12 * q);
  }
  const ScalarField shifted = phi + ScalarField::constant(g, 2.5);
  const double k3 = *quotient(ConstantName::K3, phi);
  CHECK(std::abs(*quotient(ConstantName::K3, shifted) - k3) <= 1e-12 * k3);
  const double cp = *quotient(ConstantName::CPoincare, phi);
  CHECK(std::abs(*quotient(ConstantName::CPoincare, shifted) - cp) <= 1e-12 * cp);
  const double k2 = *quotient(ConstantName::K2, phi);
  CHECK(std::abs(*quotient(ConstantName::K2, shifted) - k2) > 1e-3 * k2);
}

TEST_CASE("ascent never lowers the quotient") {
  const GridSpec g = GridSpec::make(24, 24);
  for (ConstantName name : kAll) {
    const ScalarField seed = random_trial_field(g, 3);
    double prev = *quotient(name, seed);
    for (int its : {1, 5, 20}) {
      const double q = *quotient(name, ascend(name, seed, its, 0.5));
      CHECK(q >= prev);
      prev = q;
    }
  }
  CHECK_THROWS_AS(ascend(ConstantName::K3, random_trial_field(g, 3), 5, 0.0), ValidationError);
}

TEST_CASE("estimates") {
  const GridSpec g = GridSpec::make(32, 32);
  SUBCASE("K3 exceeds the single-mode floor and reproduces its argmax") {
    const ConstantEstimate e = estimate(ConstantName::K3, g, 8);
    CHECK(e.value >= k3_single_mode(1.0, 1.0));
    CHECK(*quotient(ConstantName::K3, e.argmax_field) == doctest::Approx(e.value).epsilon(1e-10));
    CHECK(e.provenance.size() == 16);
    CHECK(e.grid == g);
  }
  SUBCASE("K2 is at least the constant-field value") {
    const ConstantEstimate e = estimate(ConstantName::K2, g, 4);
    CHECK(e.value >= 1.0 / g.area());
  }
  SUBCASE("monotone in ensemble size and iterations") {
    double prev = 0.0;
    for (int ens : {1, 2, 4}) {
      const double v = estimate(ConstantName::CPoincare, g, ens, 10).value;
      CHECK(v >= prev);
      prev = v;
    }
    prev = 0.0;
    for (int its : {0, 5, 20}) {
      const double v = estimate(ConstantName::K3, g, 3, its).value;
      CHECK(v >= prev);
      prev = v;
    }
  }
  SUBCASE("settings and degenerate ensembles") {
    CHECK_THROWS_AS(estimate(ConstantName::K3, g, 0), ValidationError);
    CHECK_THROWS_AS(estimate(ConstantName::K3, g, 2, 5, -1.0), ValidationError);
    CHECK_THROWS_AS(estimate(ConstantName::K3, GridSpec::make(1, 1), 2, 5), SolverError);
  }
  SUBCASE("determinism") {
    const ConstantEstimate a = estimate(ConstantName::K3, g, 3, 10, 0.5, 9);
    const ConstantEstimate b = estimate(ConstantName::K3, g, 3, 10, 0.5, 9);
    CHECK(a.value == b.value);
    CHECK(a.provenance == b.provenance);
    CHECK(estimate(ConstantName::K3, g, 3, 10, 0.5, 10).provenance != a.provenance);
  }
}

TEST_CASE("64 and 128 grids agree within 2 percent") {
  for (ConstantName name : {ConstantName::K2, ConstantName::K3}) {
    const double a = estimate(name, GridSpec::make(64, 64), 6).value;
    const double b = estimate(name, GridSpec::make(128, 128), 6).value;
    CHECK(std::abs(a - b) <= 0.02 * b);
  }
}

TEST_CASE("verify") {
  const GridSpec g = GridSpec::make(32, 32);
  const ConstantEstimate e = estimate(ConstantName::K3, g, 6);
  SUBCASE("own argmax gives ratio one") {
    const VerifyReport r = verify(e, 0, 1.0, 1, {e.argmax_field});
    CHECK(r.worst_ratio == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(r.violations == 0);
  }
  SUBCASE("inflating by the worst ratio removes every violation") {
    ConstantEstimate low = e;
    low.value *= 0.8;
    const VerifyReport r = verify(low, 300, 1.0);
    CHECK(r.violations > 0);
    const VerifyReport again = verify(low, 300, std::max(1.0, r.worst_ratio));
    CHECK(again.violations == 0);
    CHECK(again.trials == 300);
  }
  SUBCASE("1.1x inflation is sound") {
    CHECK(verify(e, 1000, 1.1).violations == 0);
  }
  SUBCASE("refinement re-seeds from violators") {
    ConstantEstimate low = estimate(ConstantName::K3, g, 1, 0);
    VerifyReport rep;
    const ConstantEstimate fixed = verify_and_refine(low, 300, 1.0, 3, &rep);
    CHECK(fixed.value >= low.value);
    CHECK(rep.violations == 0);
  }
  CHECK_THROWS_AS(verify(e, 10, 0.9), ValidationError);
}

TEST_CASE("constants file round trip") {
  const GridSpec g = GridSpec::make(16, 16);
  const ConstantEstimate e = estimate(ConstantName::K3, g, 2, 5);
  std::stringstream ss;
  write_constants(ss, {e}, {{"lambda1", 52.5}, {"Ku", 1.25}});
  const auto m = read_constants(ss);
  CHECK(m.at("K3") == e.value);
  CHECK(m.at("lambda1") == 52.5);
  CHECK(m.at("Ku") == 1.25);
  CHECK(m.at("K3.ensemble_size") == 2);
  CHECK(m.count("K3.provenance") == 0);  // non-numeric
  CHECK(m.count("K3.grid") == 0);
}
