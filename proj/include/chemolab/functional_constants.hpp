#pragma once

// Lower-bound estimates of the constants in three functional inequalities on
// the grid, by ensemble gradient ascent on their scale-invariant quotients:
//
//   K2:         |phi|_3^3           <= K2 |phi|_{W^{1,2}}^2 |phi|_1
//   K3:         |grad phi|_4        <= K3 |Lap phi|_2^{1/2} |grad phi|_2^{1/2}   (Neumann phi)
//   C_poincare: |phi - mean(phi)|_2 <= C  |grad phi|_1

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chemolab/grid.hpp"

namespace chemolab {

enum class ConstantName { K2, K3, CPoincare };

const char* to_string(ConstantName n);
/// Accepts "K2", "K3", "C_poincare".
ConstantName constant_from_string(const std::string& s);

/// Denominators below this (after normalizing the field to unit sup norm)
/// mark the field as degenerate.
inline constexpr double kDegenerateDenominator = 1e-14;

/// Quotient value, or nullopt for degenerate fields.
std::optional<double> quotient(ConstantName name, const ScalarField& phi);

/// Gradient of ln Q with respect to the cell values of phi.
ScalarField log_quotient_gradient(ConstantName name, const ScalarField& phi);

/// Normalized-gradient ascent with backtracking halving. Returns the best
/// field met; Q is nondecreasing along the iterations.
ScalarField ascend(ConstantName name, const ScalarField& seed, int iterations, double step_size);

struct ConstantEstimate {
  ConstantName name = ConstantName::K3;
  double value = 0.0;
  ScalarField argmax_field;
  GridSpec grid;
  int ensemble_size = 0;
  int ascent_iterations = 0;
  double step_size = 0.0;
  unsigned long seed = 0;
  /// Hex digest of the settings, cited by certificates.
  std::string provenance;
};

/// Random smooth trial field: filtered noise with a random cutoff.
ScalarField random_trial_field(const GridSpec& grid, unsigned long seed);

/// Ensemble member k is seeded from (seed, k), so a larger ensemble never
/// lowers the estimate. K2 additionally starts from a constant field.
/// Extra seeds are ascended as well.
ConstantEstimate estimate(ConstantName name, const GridSpec& grid, int ensemble_size = 16,
                          int ascent_iterations = 50, double step_size = 0.5, unsigned long seed = 1,
                          const std::vector<ScalarField>& extra_seeds = {});

struct VerifyReport {
  int trials = 0;
  int violations = 0;
  double worst_ratio = 0.0;  // max Q / value over the checked fields
  ScalarField worst_field;
};

/// Checks `trials` fresh random fields (plus `extra_fields`) against value * inflation.
VerifyReport verify(const ConstantEstimate& est, int trials, double inflation, unsigned long seed = 7,
                    const std::vector<ScalarField>& extra_fields = {});

/// verify(); on a violation re-estimates with the violating field as an extra
/// seed and verifies again, up to max_rounds times.
ConstantEstimate verify_and_refine(const ConstantEstimate& est, int trials, double inflation,
                                   unsigned long seed, VerifyReport* final_report, int max_rounds = 3);

/// "name = value" records for estimates and any further named constants.
void write_constants(std::ostream& os, const std::vector<ConstantEstimate>& estimates,
                     const std::map<std::string, double>& extra = {});
/// Reads every "name = number" line; non-numeric values are skipped.
std::map<std::string, double> read_constants(std::istream& is);

}  // namespace chemolab
