#pragma once

// Aperiodic lattice laws with regularly varying tails, and their norming
// scales A(x) ~ 1/F̄(x), a(·) = A^{-1}.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace srt {

enum class TailFamily {
  pure_power,
  log_power,
  boundary_half,
  oscillating,
  spike_perturbed,
  custom_table,
};

enum class SupportSign { nonnegative, centered_two_sided };

std::string to_string(TailFamily f);
std::string to_string(SupportSign s);
TailFamily parse_family(const std::string& name);
SupportSign parse_support(const std::string& name);

/// Parameters of a tail family.
///
/// Survival functions (x >= 1, F̄(0) = 1), with ℓ(x) = log(e + x):
///   pure-power      F̄(x) = x^{-α}
///   log-power       F̄(x) = x^{-α} (ℓ(x)/ℓ(1))^{β_L}
///   boundary-half   F̄(x) = (x L(x)/L(1))^{-1/2},  L = ℓ^{-β_L}, β_L >= 0
///   oscillating     F̄(x) = x^{-α} exp(A_osc [sin(ℓ(x)^γ) - sin(ℓ(1)^γ)])
///   spike-perturbed (x^{-α} + Σ_{2^k > x, k >= k0} m_k) / Z,
///                   m_k = c_s 2^{k(α-1)}, mass m_k added at 2^k
///   custom-table    pmf given explicitly from table_xmin onward
///
/// Two-sided laws are symmetric: P(X > x) = P(X < -x) = F̄(x)/2, P(X = 0) = 0.
struct TailSpec {
  TailFamily family = TailFamily::pure_power;
  double alpha = 0.5;
  SupportSign support = SupportSign::nonnegative;
  double log_exponent = 0.0;  // β_L
  double osc_amplitude = 0.0;
  double osc_exponent = 0.5;  // γ_osc ∈ (0,1)
  double spike_scale = 3.0;   // c_s
  int spike_first = 4;        // k0
  std::vector<double> table;
  std::int64_t table_xmin = 1;

  /// Throws ConfigError on out-of-range parameters.
  void validate() const;
};

using KeyValues = std::map<std::string, std::string>;

/// Flat key-value form (keys: family, alpha, support, log_exponent,
/// osc_amplitude, osc_exponent, spike_scale, spike_first, table, table_xmin).
/// Only keys relevant to the family are emitted.
KeyValues to_key_values(const TailSpec& spec);
TailSpec tail_spec_from(const KeyValues& kv);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);
double parse_double(const std::string& key, const std::string& text);
std::int64_t parse_int(const std::string& key, const std::string& text);

/// Probability mass function on [xmin, xmax] with tail bookkeeping.
class LatticeLaw {
 public:
  LatticeLaw(TailSpec spec, std::int64_t xmin, std::vector<double> pmf,
             double truncated_upper, double truncated_lower,
             std::vector<double> tail);

  [[nodiscard]] std::int64_t xmin() const { return xmin_; }
  [[nodiscard]] std::int64_t xmax() const {
    return xmin_ + static_cast<std::int64_t>(pmf_.size()) - 1;
  }
  [[nodiscard]] std::span<const double> pmf() const { return pmf_; }
  [[nodiscard]] double p(std::int64_t x) const {
    return (x < xmin_ || x > xmax()) ? 0.0 : pmf_[x - xmin_];
  }
  /// F̄(x) = P(X > x), exact for x in [xmin-1, xmax]; outside that range the
  /// bookkeeping values (1 - lower mass, upper truncated mass) are returned.
  [[nodiscard]] double tail(std::int64_t x) const;
  [[nodiscard]] double truncated_upper() const { return truncated_upper_; }
  [[nodiscard]] double truncated_lower() const { return truncated_lower_; }
  [[nodiscard]] double truncated_mass() const {
    return truncated_upper_ + truncated_lower_;
  }
  [[nodiscard]] const TailSpec& spec() const { return spec_; }
  [[nodiscard]] bool nonnegative() const { return xmin_ >= 0; }
  [[nodiscard]] bool aperiodic() const { return true; }  // enforced at build
  /// Fingerprint of (spec, support range).
  [[nodiscard]] std::uint64_t hash() const { return hash_; }

 private:
  TailSpec spec_;
  std::int64_t xmin_;
  std::vector<double> pmf_;
  double truncated_upper_;
  double truncated_lower_;
  std::vector<double> tail_;  // indices xmin-1 .. xmax
  std::uint64_t hash_;
};

/// Builds the law on the support truncated at xmax (xmax >= 8). Mass beyond
/// the window is kept as truncated mass. Throws ConfigError for invalid specs
/// and ConstructionError for negative or periodic pmfs.
LatticeLaw build_law(const TailSpec& spec, std::int64_t xmax);

/// Right-tail survival function F̄(x) of an analytic family at real x.
/// Throws PreconditionError for custom tables.
double survival(const TailSpec& spec, double x);

/// Two-column CSV (x,p) with a header row.
std::string law_csv(const LatticeLaw& law);

class NormingScale {
 public:
  NormingScale(double alpha, std::function<double(double)> big_a);

  [[nodiscard]] double alpha() const { return alpha_; }
  /// Index of a(·).
  [[nodiscard]] double eta() const { return 1.0 / alpha_; }
  /// A(x) = x^α L₀(x); extended by A(1)·x^α below 1.
  [[nodiscard]] double A(double x) const;
  /// a(y) with A(a(y)) = y, by bisection in log x.
  [[nodiscard]] double a(double y) const;

 private:
  double alpha_;
  std::function<double(double)> big_a_;
  double a_at_one_;
};

/// Norming scale for a spec. For analytic families A = 1/F̄ (right tail);
/// for spike-perturbed A(x) = Z x^α; custom tables interpolate 1/F̄
/// log-linearly and extrapolate as x^α past the table. Throws
/// ConstructionError when A is not monotone or the table has finite support.
NormingScale build_norming(const TailSpec& spec);

struct PotterReport {
  double eps = 0.0;
  /// Smallest c with c^{-1} λ^{α-ε} <= A(λx)/A(x) <= c λ^{α+ε} over all grid
  /// pairs.
  double constant = 1.0;
  std::size_t pairs = 0;
  /// True when the constant exceeds 1 (the unit envelope fails somewhere).
  bool violated = false;
};

PotterReport potter_envelope(const NormingScale& scale, double eps,
                             std::span<const double> xgrid);

}  // namespace srt
