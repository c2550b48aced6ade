#pragma once

// The renewal ratio x F̄(x) g(x), the local conditions on p(x) and the
// split of the occupation sum around n ≈ δ A(x).

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "srtlab/convolution_engine.hpp"
#include "srtlab/lattice_laws.hpp"
#include "srtlab/stable_oracle.hpp"

namespace srt {

/// Log-log trend over the tail of a curve.
///
/// `slope` is the least-squares slope of log v against log x over the last
/// two decades of the grid. The comparison windows are the half-open
/// stretches of width min(1, span/2) decades at either end of the grid;
/// `decreasing` requires slope <= -0.05 and the maximum over the last window
/// strictly below the minimum over the first.
struct Trend {
  double slope = 0.0;
  double oscillation = 1.0;  // max/min over the last window
  double first_window_min = 0.0;
  double last_window_max = 0.0;
  bool decreasing = false;
  bool flat = false;  // slope <= 0.05
};

Trend fit_trend(std::span<const double> x, std::span<const double> values);

struct RatioCurve {
  std::vector<std::int64_t> grid;
  std::vector<double> values;
  /// Set when F̄ vanishes on part of the grid (law outside the heavy-tailed class).
  bool out_of_class = false;

  [[nodiscard]] Trend trend() const;
  [[nodiscard]] std::string csv(const std::string& name) const;
};

/// x F̄(x) g(x). PreconditionError when F̄(x) = 0, RangeError beyond the
/// renewal horizon.
RatioCurve srt_ratio(const LatticeLaw& law, const RenewalSequence& renewal,
                     std::span<const std::int64_t> xgrid);

/// x F̄(x) p(x) for a nonnegative law.
RatioCurve check_rz(const LatticeLaw& law, std::span<const std::int64_t> xgrid);

/// sup_{x <= y <= upper} value(y) at each grid point, scanning every
/// integer y. Convergence to 0 of a lattice sequence is read off this
/// envelope rather than off the sampled values.
RatioCurve suffix_sup(std::span<const std::int64_t> xgrid, std::int64_t upper,
                      const std::function<double(std::int64_t)>& value);

/// suffix_sup of x F̄(x) p(x) up to the law's window.
RatioCurve rz_envelope(const LatticeLaw& law, std::span<const std::int64_t> xgrid);

/// x F̄(x) Σ_{n=1}^{n0} P(Sₙ = x) from stored rows.
RatioCurve check_r1(const LatticeLaw& law, const ConvTable& conv, int n0,
                    std::span<const std::int64_t> xgrid);

/// x F̄(x) Σ_{w=1}^{⌊δx⌋} p(x-w) / (w F̄(w)²).
double r3_sum(const LatticeLaw& law, double delta, std::int64_t x);

/// (x / A(x)) Σ_{w=1}^{⌊δx⌋} p(x-w) A(w)² / w.
double r3_companion(const LatticeLaw& law, const NormingScale& scale, double delta,
                    std::int64_t x);

struct R3Matrix {
  std::vector<double> deltas;
  std::vector<std::int64_t> xs;
  std::vector<std::vector<double>> values;  // [delta][x]
  /// Trend in x for each δ.
  std::vector<Trend> x_trends;
  /// Trend of the largest-x column against 1/δ.
  Trend delta_trend;
};

R3Matrix r3_matrix(const LatticeLaw& law, std::span<const double> deltas,
                   std::span<const std::int64_t> xs);

struct SplitSum {
  double low = 0.0;   // (x/A) Σ_{n<=n0} P(Sₙ=x)
  double head = 0.0;  // (x/A) Σ_{n0<n<=N} P(Sₙ=x), N = ⌊δ A(x)⌋
  double tail = 0.0;  // (x/A) Σ_{n>N} P(Sₙ=x)
  double total = 0.0; // x g(x) / A(x)
  std::int64_t n_split = 0;
  /// |low + head + tail - total| / total.
  double additivity_error = 0.0;
};

/// Each part is computed as [(P^{a} - P^{b}) g]_x with independent powers;
/// the partition identity is then checked against x g(x)/A(x).
SplitSum split_sum(const LatticeLaw& law, const RenewalSequence& renewal,
                   const NormingScale& scale, double delta, std::int64_t x,
                   int n0 = 10);

/// α ∫_0^{δ^{-1/α}} y^{-α} f(y) dy: the limit of the tail part.
double split_tail_limit(const StableLaw& law, double delta);

}  // namespace srt
