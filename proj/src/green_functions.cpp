#include "srtlab/green_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "srtlab/errors.hpp"
#include "srtlab/fft_convolution.hpp"
#include "srtlab/summation.hpp"

namespace srt {
namespace {

// Eulerian numbers A(β, k), k = 0..β-1.
std::vector<double> eulerian_row(int beta) {
  std::vector<double> row(static_cast<std::size_t>(beta), 0.0);
  for (int k = 0; k < beta; ++k) {
    double s = 0.0;
    double binom = 1.0;
    for (int j = 0; j <= k; ++j) {
      if (j > 0) binom = binom * (beta + 2 - j) / j;
      const double term = binom * std::pow(static_cast<double>(k + 1 - j), beta);
      s += (j % 2 == 0) ? term : -term;
    }
    row[static_cast<std::size_t>(k)] = std::round(s);
  }
  return row;
}

std::vector<double> dense(const LatticeLaw& law, std::int64_t xmax) {
  std::vector<double> p(static_cast<std::size_t>(xmax + 1), 0.0);
  for (std::int64_t x = 0; x <= xmax; ++x) p[static_cast<std::size_t>(x)] = law.p(x);
  return p;
}

// Smallest y with f(y) above 1e-300 on a coarse downward scan.
double density_floor(const StableLaw& stable) {
  double y = 1.0;
  while (y > 1e-6 && stable_density(stable, y) > 1e-300) y *= 0.8;
  return y;
}

void require_positive_tail(const LatticeLaw& law, std::int64_t x) {
  if (!(law.tail(x) > 0.0)) {
    throw PreconditionError("F̄(" + std::to_string(x) + ") = 0: the law has no heavy tail");
  }
}

}  // namespace

void WeightSpec::validate() const {
  if (!(beta > -2.0)) throw ConfigError("weight index β must exceed -2");
  if (!std::isfinite(beta_log)) throw ConfigError("weight log exponent must be finite");
  if (table.empty()) return;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!(table[i] >= 0.0) || !std::isfinite(table[i])) {
      throw ConfigError("weight table entries must be finite and >= 0");
    }
    if (2 * i >= table.size()) {
      const double v = table[i] / std::pow(static_cast<double>(i + 1), beta);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(lo > 0.0) || hi / lo > 2.0) {
    throw ConfigError("weight table is not regularly varying with the stated index");
  }
}

double WeightSpec::b(double n) const {
  if (n <= 0.0) return b0();
  if (!table.empty()) {
    const auto m = static_cast<double>(table.size());
    if (n <= m) {
      const auto i = static_cast<std::size_t>(std::llround(n)) - 1;
      if (std::fabs(n - std::round(n)) < 1e-12 && i < table.size()) return table[i];
    }
    if (n >= m) return table.back() * std::pow(n / m, beta);
    // Between table points: log-linear interpolation.
    const auto i = static_cast<std::size_t>(std::floor(n));
    const double w = n - std::floor(n);
    const double a = table[i - 1];
    const double c = table[i];
    if (a > 0.0 && c > 0.0) return std::exp((1 - w) * std::log(a) + w * std::log(c));
    return (1 - w) * a + w * c;
  }
  double v = std::pow(n, beta);
  if (beta_log != 0.0) v *= std::pow(std::log1p(n), beta_log);
  return v;
}

double WeightSpec::B(const NormingScale& scale, double x) const { return b(scale.A(x)); }

double WeightSpec::b0() const { return beta == 0.0 && beta_log == 0.0 && table.empty() ? 1.0 : 0.0; }

bool WeightSpec::integer_power() const {
  return table.empty() && beta_log == 0.0 && beta >= 0.0 && beta == std::floor(beta) &&
         beta <= 12.0;
}

std::string to_string(GreenMethod m) {
  return m == GreenMethod::eulerian_exact ? "eulerian-exact" : "rows-with-llt-tail";
}

int suggested_horizon(const WeightSpec& weights, const NormingScale& scale,
                      const DensityTable& density, std::int64_t x, double tolerance) {
  const double floor_y = 1e-12;
  std::vector<double> terms;
  const double xd = static_cast<double>(x);
  for (int n = 1; n < 100000000; ++n) {
    const double an = scale.a(static_cast<double>(n));
    const double y = xd / an;
    const double t = weights.b(n) * density(y) / an;
    terms.push_back(t);
    if (n > 16 && y < floor_y) break;
    if (n > 16 && t == 0.0 && y < 1.0) break;
  }
  CompensatedSum total;
  for (double t : terms) total.add(t);
  const double target = tolerance * total.value();
  CompensatedSum rest;
  for (std::size_t i = terms.size(); i-- > 0;) {
    rest.add(terms[i]);
    if (rest.value() > target) return static_cast<int>(i + 1);
  }
  return 1;
}

GreenSequence green_mass(const LatticeLaw& law, const WeightSpec& weights,
                         const RenewalSequence& renewal, const NormingScale& scale,
                         const StableLaw& stable, std::int64_t xmax, int nmax) {
  weights.validate();
  if (!law.nonnegative()) throw PreconditionError("Green functions need a nonnegative law");
  if (xmax < 0) throw DomainError("xmax must be >= 0");
  if (xmax > renewal.xmax()) throw RangeError("xmax beyond the renewal horizon");
  if (xmax > law.xmax() && law.truncated_upper() > 0.0) {
    throw RangeError("xmax beyond the law's window");
  }
  const auto len = static_cast<std::size_t>(xmax + 1);
  const std::span<const double> g(renewal.g.data(), len);
  GreenSequence out;

  if (weights.integer_power()) {
    out.method = GreenMethod::eulerian_exact;
    const int beta = static_cast<int>(weights.beta);
    if (beta == 0) {
      out.values.assign(g.begin(), g.end());
      return out;
    }
    const auto p = dense(law, xmax);
    // poly = P · Σ_k A(β,k) P^k by Horner.
    const auto coeffs = eulerian_row(beta);
    std::vector<double> poly(len, 0.0);
    poly[0] = coeffs.back();
    for (int k = beta - 2; k >= 0; --k) {
      poly = fft::convolve(poly, p, len);
      poly[0] += coeffs[static_cast<std::size_t>(k)];
    }
    poly = fft::convolve(poly, p, len);
    for (int k = 0; k <= beta; ++k) poly = fft::convolve(poly, g, len);
    fft::clamp_roundoff(poly);
    out.values = std::move(poly);
    return out;
  }

  if (nmax < 1) throw DomainError("nmax must be >= 1");
  if (static_cast<double>(nmax) * static_cast<double>(xmax + 1) > 5e8) {
    throw ResourceError("summing " + std::to_string(nmax) + " rows up to x = " +
                        std::to_string(xmax) + " exceeds the work budget; lower xmax or nmax");
  }
  out.method = GreenMethod::rows_with_llt_tail;
  out.horizon = nmax;
  const auto p = dense(law, xmax);
  std::vector<double> acc(len, 0.0);
  acc[0] = weights.b0();
  std::vector<double> row = p;
  for (int n = 1; n <= nmax; ++n) {
    if (n > 1) {
      row = fft::convolve(row, p, len);
      fft::clamp_roundoff(row);
    }
    const double bn = weights.b(n);
    for (std::size_t x = 0; x < len; ++x) acc[x] += bn * row[x];
  }

  const double ymin = density_floor(stable);
  const DensityTable density(stable, ymin, 1e4, 2000);
  out.correction.assign(len, 0.0);
  // Terms vanish once x / aₙ drops below the density floor.
  std::vector<double> an_list;
  std::vector<double> bn_list;
  const double x_top = static_cast<double>(xmax);
  for (int n = nmax + 1;; ++n) {
    const double an = scale.a(static_cast<double>(n));
    if (x_top / an < ymin) break;
    an_list.push_back(an);
    bn_list.push_back(weights.b(n));
    if (an_list.size() > 50000000) throw ResourceError("LLT tail sum does not terminate");
  }
  std::int64_t s0 = 1;
  while (s0 <= xmax && p[static_cast<std::size_t>(s0)] == 0.0) ++s0;
  for (std::size_t x = 1; x < len; ++x) {
    CompensatedSum c;
    const double xd = static_cast<double>(x);
    // P(Sₙ = x) = 0 once n exceeds x / s0.
    const auto reachable = static_cast<std::int64_t>(x) / s0;
    const auto count = static_cast<std::size_t>(std::clamp<std::int64_t>(
        reachable - nmax, 0, static_cast<std::int64_t>(an_list.size())));
    for (std::size_t i = 0; i < count; ++i) {
      const double y = xd / an_list[i];
      if (y < ymin) break;
      c.add(bn_list[i] * density(y) / an_list[i]);
    }
    out.correction[x] = c.value();
  }
  out.values.resize(len);
  for (std::size_t x = 0; x < len; ++x) {
    out.values[x] = acc[x] + out.correction[x];
    if (out.values[x] > 0.0) {
      out.max_correction = std::max(out.max_correction, out.correction[x] / out.values[x]);
    }
  }
  if (out.max_correction > 1e-3) {
    const int need = suggested_horizon(weights, scale, density, xmax, 1e-3);
    throw RangeError("row horizon " + std::to_string(nmax) +
                     " leaves an LLT tail of " + format_double(out.max_correction) +
                     " of the value; use nmax >= " + std::to_string(need));
  }
  return out;
}

RatioCurve green_ratio(const LatticeLaw& law, const WeightSpec& weights,
                       const NormingScale& scale, const GreenSequence& green,
                       std::span<const std::int64_t> xgrid) {
  RatioCurve c;
  c.grid.assign(xgrid.begin(), xgrid.end());
  for (std::int64_t x : xgrid) {
    if (x < 1 || x > green.xmax()) throw RangeError("x outside the Green sequence");
    require_positive_tail(law, x);
    const double xd = static_cast<double>(x);
    c.values.push_back(xd * law.tail(x) * green.values[static_cast<std::size_t>(x)] /
                       weights.B(scale, xd));
  }
  return c;
}

RatioCurve check_g2(const LatticeLaw& law, const WeightSpec& weights,
                    const NormingScale& scale, std::span<const std::int64_t> xgrid) {
  weights.validate();
  RatioCurve c = check_rz(law, xgrid);
  for (std::size_t i = 0; i < c.grid.size(); ++i) {
    c.values[i] /= weights.B(scale, static_cast<double>(c.grid[i]));
  }
  return c;
}

double check_g3(const LatticeLaw& law, const WeightSpec& weights, const NormingScale& scale,
                double delta, std::int64_t x) {
  weights.validate();
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("δ must lie in (0,1)");
  if (x < 2) throw DomainError("g3 needs x >= 2");
  if (x > law.xmax()) throw RangeError("x beyond the law's window");
  const auto wmax = static_cast<std::int64_t>(std::floor(delta * static_cast<double>(x)));
  CompensatedSum acc;
  for (std::int64_t w = 1; w <= wmax; ++w) {
    const double tw = law.tail(w);
    acc.add(law.p(x - w) * weights.B(scale, static_cast<double>(w)) /
            (static_cast<double>(w) * tw * tw));
  }
  return static_cast<double>(x) * law.tail(x) / weights.B(scale, static_cast<double>(x)) *
         acc.value();
}

RatioCurve omega_curve(const LatticeLaw& law, std::span<const std::int64_t> xgrid) {
  RatioCurve c;
  c.grid.assign(xgrid.begin(), xgrid.end());
  for (std::int64_t x : xgrid) {
    if (x > law.xmax()) throw RangeError("x beyond the law's window");
    const double t = law.tail(x);
    if (!(t > 0.0)) {
      c.out_of_class = true;
      c.values.push_back(0.0);
      continue;
    }
    c.values.push_back(static_cast<double>(x) * law.p(x) / t);
  }
  return c;
}

std::string to_string(Regime r) {
  return r == Regime::unconditional ? "unconditional" : "conditional";
}

Regime regime_classifier(double alpha, double beta) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("α must lie in (0,1)");
  if (!(beta > -2.0)) throw DomainError("β must exceed -2");
  return alpha * (2.0 + beta) > 1.0 ? Regime::unconditional : Regime::conditional;
}

}  // namespace srt
