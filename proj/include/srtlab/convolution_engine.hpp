#pragma once

// Exact convolution powers P(Sₙ = x), renewal mass functions g(x) and
// truncated-step convolutions.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "srtlab/lattice_laws.hpp"

namespace srt {

inline constexpr std::size_t kDefaultMemoryBudget = std::size_t{3} << 29;  // 1.5 GiB

/// A probability row stored from `offset` on; zero outside.
struct Row {
  std::int64_t offset = 0;
  std::vector<double> values;

  [[nodiscard]] double at(std::int64_t x) const {
    const std::int64_t i = x - offset;
    return (i < 0 || i >= static_cast<std::int64_t>(values.size()))
               ? 0.0
               : values[static_cast<std::size_t>(i)];
  }
  [[nodiscard]] std::int64_t last() const {
    return offset + static_cast<std::int64_t>(values.size()) - 1;
  }
};

/// Rows P(Sₙ = x) for a set of n. Nonnegative laws are stored on [0, xmax]
/// (exact, since values at x only involve steps <= x); two-sided laws keep
/// full supports [n·xmin, n·xmax_law].
class ConvTable {
 public:
  ConvTable(std::uint64_t law_hash, std::int64_t xmax, std::map<int, Row> rows);

  [[nodiscard]] std::int64_t xmax() const { return xmax_; }
  [[nodiscard]] int nmax() const;
  [[nodiscard]] std::uint64_t law_hash() const { return law_hash_; }
  [[nodiscard]] bool has_row(int n) const { return rows_.contains(n); }
  /// True when every row 1..n is stored.
  [[nodiscard]] bool covers(int n) const;
  [[nodiscard]] std::vector<int> row_indices() const;
  /// Throws RangeError when row n is absent.
  [[nodiscard]] const Row& row(int n) const;
  /// P(Sₙ = x); throws RangeError when n is absent or |x| > xmax.
  [[nodiscard]] double at(int n, std::int64_t x) const;

 private:
  std::uint64_t law_hash_;
  std::int64_t xmax_;
  std::map<int, Row> rows_;
};

/// Rows n = 1..nmax by repeated convolution with the pmf.
ConvTable conv_table(const LatticeLaw& law, int nmax, std::int64_t xmax,
                     std::size_t memory_budget = kDefaultMemoryBudget);

/// Selected rows by binary powering.
ConvTable conv_powers(const LatticeLaw& law, std::span<const int> ns,
                      std::int64_t xmax,
                      std::size_t memory_budget = kDefaultMemoryBudget);

/// Visits P^{n} for each requested n in increasing order without keeping
/// all rows alive; powers are chained through earlier ones.
void for_each_power(const LatticeLaw& law, std::span<const int> ns,
                    std::int64_t xmax,
                    const std::function<void(int, const Row&)>& visit,
                    std::size_t memory_budget = kDefaultMemoryBudget);

/// P(Sₙ = x) for x = 0..xmax (nonnegative laws).
std::vector<double> pmf_power(const LatticeLaw& law, int n, std::int64_t xmax);

enum class RenewalMethod { naive_recursion, series_reciprocal, blocked_recursion };
std::string to_string(RenewalMethod m);

struct RenewalSequence {
  std::vector<double> g;  // g(0..xmax)
  RenewalMethod method = RenewalMethod::naive_recursion;
  /// Max defect of g(x) = [x=0] + Σ p(w) g(x-w), or the magnitude of the most
  /// negative value when that is larger.
  double residual = 0.0;
  /// renewal_fast only: residual exceeded 1e-8 and the blocked recursion ran.
  bool fell_back = false;
  std::uint64_t law_hash = 0;

  [[nodiscard]] std::int64_t xmax() const {
    return static_cast<std::int64_t>(g.size()) - 1;
  }
  /// Throws RangeError beyond the horizon.
  [[nodiscard]] double at(std::int64_t x) const;
};

/// O(xmax²) recursion with compensated sums. Needs a nonnegative law with
/// p(0) = 0 (PreconditionError otherwise) and xmax <= law.xmax() (RangeError).
RenewalSequence renewal_naive(const LatticeLaw& law, std::int64_t xmax);

/// Reciprocal of 1 - P(s) by Newton iteration on FFT products; falls back
/// to renewal_blocked when the self-consistency residual exceeds 1e-8.
RenewalSequence renewal_fast(const LatticeLaw& law, std::int64_t xmax);

/// Divide-and-conquer form of the exact recursion with FFT block updates.
RenewalSequence renewal_blocked(const LatticeLaw& law, std::int64_t xmax);

/// max_x |g(x) - [x=0] - Σ_{w>=1} p(w) g(x-w)|.
double renewal_residual(const LatticeLaw& law, std::span<const double> g);

/// Σ_{n=1}^{N} P(Sₙ = x) = [(P - P^{N+1})·g]_x.
double occupation_prefix(const LatticeLaw& law, const RenewalSequence& renewal,
                         int n_terms, std::int64_t x);

/// P(Sₙ = x) of the n-fold convolution of q (stored from `offset`), by
/// sequential exact convolution restricted to partial sums that can still
/// reach x.
double nfold_at(std::span<const double> q, std::int64_t offset, int n,
                std::int64_t x);

/// P(Sₙ = x, max_r |X_r| <= γx): the n-fold convolution at x of the pmf
/// restricted to |z| <= γx.
double truncated_event_prob(const LatticeLaw& law, int n, std::int64_t x,
                            double gamma);

/// "x,<name>" CSV with 17 significant digits, x starting at `offset`.
std::string sequence_csv(std::span<const double> values, std::int64_t offset,
                         const std::string& name);

/// Binary cache: 8-byte magic "SRTRENEW", then little-endian
/// u64 law_hash, i64 xmax, u32 method, u32 fell_back, f64 residual,
/// u64 count, count × f64.
void write_renewal_cache(const std::filesystem::path& path,
                         const RenewalSequence& seq);
RenewalSequence read_renewal_cache(const std::filesystem::path& path);

}  // namespace srt
