#pragma once

// Exponentially tilted step laws, the change-of-measure identity for
// truncated events, and scans of local large deviation ratios.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "srtlab/lattice_laws.hpp"
#include "srtlab/srt_conditions.hpp"
#include "srtlab/stable_oracle.hpp"

namespace srt {

/// p̃(z) = e^{μz} p(z) / m₀ on |z| <= γx, with μ = log Λ / (γx).
struct TiltedLaw {
  int n = 1;
  std::int64_t x = 1;
  double gamma = 1.0;
  double lambda = 1.0;
  double mu = 0.0;
  double m0 = 1.0;
  std::int64_t lo = 0;  // first support point of pmf
  std::vector<double> pmf;

  [[nodiscard]] std::int64_t hi() const {
    return lo + static_cast<std::int64_t>(pmf.size()) - 1;
  }
  [[nodiscard]] double at(std::int64_t z) const {
    return (z < lo || z > hi()) ? 0.0 : pmf[static_cast<std::size_t>(z - lo)];
  }
};

/// Λ = 1/(n F̄(x)); DomainError unless Λ > 1 and the truncated support
/// carries mass.
TiltedLaw make_tilted(const LatticeLaw& law, int n, std::int64_t x, double gamma);

/// Same construction with Λ supplied (Λ > 0); the identity below holds for
/// every Λ, which makes laws with F̄(x) = 0 testable.
TiltedLaw tilt_with_lambda(const LatticeLaw& law, int n, std::int64_t x, double gamma,
                           double lambda);

struct TiltCheck {
  double direct = 0.0;   // P(Sₙ = x, max|X_r| <= γx)
  double tilted = 0.0;   // m₀ⁿ Λ^{-1/γ} P̃(Sₙ = x)
  double discrepancy = 0.0;
  double lambda = 1.0;
};

/// Both sides of P(Sₙ=x, X* <= γx) = m₀ⁿ Λ^{-1/γ} P̃(Sₙ=x). The discrepancy
/// is |direct - tilted| / max(direct, tilted), or 0 when both vanish.
TiltCheck tilt_identity_check(const LatticeLaw& law, int n, std::int64_t x, double gamma,
                              std::optional<double> lambda = std::nullopt);

struct MomentBounds {
  double upper = 10.0;  // C in |m̃_k| <= C x^k / n
  double lower = 1e-3;  // c in n σ̃² >= c x² / Λ^d
  double d = 0.5;
};

struct MomentReport {
  double m1 = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;          // raw third moment
  double abs3 = 0.0;        // E|Z|³
  double sigma2_tilde = 0.0;
  double nu_tilde = 0.0;    // E|Z - m1|³
  /// n |m̃_k| / x^k for k = 1, 2, 3.
  double scaled[3] = {0.0, 0.0, 0.0};
  double variance_scaled = 0.0;  // n σ̃² / x²
  bool upper_ok = false;
  bool variance_upper_ok = false;
  bool variance_lower_ok = false;
};

MomentReport tilted_moments(const TiltedLaw& tilted, const MomentBounds& bounds = {});

/// Ratio surface over (n, θ) at x = round(θ aₙ).
struct LldSurface {
  std::vector<int> ns;
  std::vector<double> thetas;
  std::vector<std::vector<std::int64_t>> xs;   // [n][θ]
  std::vector<std::vector<double>> ratio;       // [n][θ]
  double sup = 0.0;
  int sup_n = 0;
  double sup_theta = 0.0;
  std::vector<Trend> theta_trends;  // per n; rows that vanish identically are skipped
  double max_slope = 0.0;
  bool flat = false;

  [[nodiscard]] std::string csv() const;
};

struct LldSurfaces {
  LldSurface plain;                  // aₙ P(Sₙ=x) / (n F̄(x))
  std::optional<LldSurface> truncated;  // aₙ P(Sₙ=x, X*<=γx) / (n F̄(x))^{1/γ}
  double gamma = 0.0;
};

/// Both surfaces from one power ladder. For nonnegative laws and γ >= 1/2
/// at most one step can exceed γx, so
///   P(Sₙ=x, X*<=γx) = P(Sₙ=x) - n Σ_{z>γx} p(z) P(S_{n-1}=x-z);
/// otherwise the truncated probability is convolved directly.
/// RangeError when some x exceeds the law's window.
LldSurfaces lld_surfaces(const LatticeLaw& law, const NormingScale& scale,
                         std::span<const int> ns, std::span<const double> thetas,
                         std::optional<double> gamma = std::nullopt);

LldSurface lld_scan(const LatticeLaw& law, const NormingScale& scale,
                    std::span<const int> ns, std::span<const double> thetas);

LldSurface truncated_lld_scan(const LatticeLaw& law, const NormingScale& scale,
                              double gamma, std::span<const int> ns,
                              std::span<const double> thetas);

struct GnedenkoPoint {
  double y = 0.0;
  std::int64_t x = 0;
  double scaled = 0.0;   // aₙ P(Sₙ = x)
  double density = 0.0;  // f(y)
  double deviation = 0.0;
  double relative = 0.0;
};

/// aₙ P(Sₙ = ⌊y aₙ⌋) against f(y).
std::vector<GnedenkoPoint> gnedenko_sanity(const LatticeLaw& law, const NormingScale& scale,
                                           const StableLaw& stable, int n,
                                           std::span<const double> ys);

}  // namespace srt
