#pragma once

// Stable limit laws in the S1 parameterization: density by the angular
// integral representation, positive stable sampling, and negative moments.

#include <cstdint>
#include <vector>

#include "srtlab/lattice_laws.hpp"

namespace srt {

struct StableLaw {
  double alpha = 0.5;
  double beta = 1.0;   // skewness in [-1, 1]
  double sigma = 1.0;  // scale

  /// P(Y > 0).
  [[nodiscard]] double rho() const;
  /// c_L with E exp(-λY) = exp(-c_L λ^α); needs α < 1 and β = 1.
  [[nodiscard]] double laplace_coefficient() const;
  void validate() const;

  /// Totally skewed law with Laplace exponent Γ(1-α) λ^α.
  static StableLaw one_sided(double alpha);
  /// Limit of Sₙ/aₙ with A(aₙ) = n for the given tail family.
  static StableLaw limit_of(const TailSpec& spec);
};

/// Density f(y). Quadrature tolerance 1e-9; NumericalError if not reached.
double stable_density(const StableLaw& law, double y);

/// Kanter's representation rescaled to the law's scale; needs a one-sided law.
std::vector<double> sample_positive_stable(const StableLaw& law, std::size_t count,
                                           std::uint64_t seed);

struct MomentEvaluation {
  double value = 0.0;          // mean of the two routes
  double laplace_route = 0.0;  // Mellin transform of the Laplace transform
  double density_route = 0.0;  // quadrature against the density
  double discrepancy = 0.0;    // |laplace - density| / |laplace|
};

/// E(Y^{-s}) for a one-sided law and s > -α. Throws DomainError outside that
/// range and NumericalError when the routes differ by more than 1e-5.
MomentEvaluation negative_moment(const StableLaw& law, double s);

/// α E(Y^{-α}).
MomentEvaluation limit_constant_srt(const StableLaw& law);

/// α E(Y^{-α(β+1)}); β <= -2 is a DomainError.
MomentEvaluation limit_constant_green(const StableLaw& law, double beta);

/// ∫_0^{upper} y^{-s} f(y) dy for a one-sided law.
double partial_negative_moment(const StableLaw& law, double s, double upper);

/// Tabulated density on a log grid with log-log interpolation; power-law
/// extrapolation above the grid, zero below it for one-sided laws.
class DensityTable {
 public:
  DensityTable(const StableLaw& law, double ymin, double ymax, std::size_t points);
  [[nodiscard]] double operator()(double y) const;
  [[nodiscard]] const StableLaw& law() const { return law_; }

 private:
  StableLaw law_;
  double log_min_;
  double log_max_;
  double step_;
  std::vector<double> log_f_;
};

}  // namespace srt
