#pragma once

// Weighted occupation sums g_b(x) = Σ_n b_n P(Sₙ = x) and the conditions
// that govern their asymptotics.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "srtlab/convolution_engine.hpp"
#include "srtlab/lattice_laws.hpp"
#include "srtlab/srt_conditions.hpp"
#include "srtlab/stable_oracle.hpp"

namespace srt {

struct WeightSpec {
  double beta = 0.0;
  double beta_log = 0.0;      // b_n = n^β (log(1+n))^{β_L}
  std::vector<double> table;  // optional b_1..b_m, extended by b_m (n/m)^β

  /// ConfigError for β <= -2, negative entries, or a table whose normalised
  /// values b_n n^{-β} over its second half spread by more than a factor 2.
  void validate() const;
  [[nodiscard]] double b(double n) const;
  /// B(x) = b(A(x)).
  [[nodiscard]] double B(const NormingScale& scale, double x) const;
  /// b_0 = 1 for β = 0 (so g_b = g), else 0.
  [[nodiscard]] double b0() const;
  [[nodiscard]] bool integer_power() const;
};

enum class GreenMethod { eulerian_exact, rows_with_llt_tail };
std::string to_string(GreenMethod m);

struct GreenSequence {
  std::vector<double> values;  // g_b(0..xmax)
  GreenMethod method = GreenMethod::eulerian_exact;
  int horizon = 0;                  // rows summed exactly (rows method)
  double max_correction = 0.0;      // max_x correction(x) / g_b(x)
  std::vector<double> correction;   // LLT tail part per x (rows method)

  [[nodiscard]] std::int64_t xmax() const {
    return static_cast<std::int64_t>(values.size()) - 1;
  }
};

/// Integer β >= 0 without log factor or table: exact, via
/// Σ n^β P^n = P A_β(P) g^{β+1} with the Eulerian polynomial A_β.
/// Otherwise rows n <= nmax are summed exactly and the remaining n are
/// replaced by b_n a_n^{-1} f(x/a_n); RangeError (with a suggested horizon)
/// when that replacement exceeds 1e-3 of the value at some x.
GreenSequence green_mass(const LatticeLaw& law, const WeightSpec& weights,
                         const RenewalSequence& renewal, const NormingScale& scale,
                         const StableLaw& stable, std::int64_t xmax, int nmax = 2000);

/// Smallest horizon for which the LLT estimate of the neglected terms at x
/// is below `tolerance` of the whole estimated sum.
int suggested_horizon(const WeightSpec& weights, const NormingScale& scale,
                      const DensityTable& density, std::int64_t x, double tolerance);

/// x F̄(x) g_b(x) / B(x).
RatioCurve green_ratio(const LatticeLaw& law, const WeightSpec& weights,
                       const NormingScale& scale, const GreenSequence& green,
                       std::span<const std::int64_t> xgrid);

/// x F̄(x) p(x) / B(x).
RatioCurve check_g2(const LatticeLaw& law, const WeightSpec& weights,
                    const NormingScale& scale, std::span<const std::int64_t> xgrid);

/// (x F̄(x) / B(x)) Σ_{w=1}^{⌊δx⌋} p(x-w) B(w) / (w F̄(w)²).
double check_g3(const LatticeLaw& law, const WeightSpec& weights, const NormingScale& scale,
                double delta, std::int64_t x);

/// ω(x) = x p(x) / F̄(x).
RatioCurve omega_curve(const LatticeLaw& law, std::span<const std::int64_t> xgrid);

enum class Regime { unconditional, conditional };
std::string to_string(Regime r);

/// unconditional iff α(2+β) > 1.
Regime regime_classifier(double alpha, double beta);

}  // namespace srt
