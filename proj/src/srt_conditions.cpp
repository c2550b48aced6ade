#include "srtlab/srt_conditions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "srtlab/errors.hpp"
#include "srtlab/summation.hpp"

namespace srt {
namespace {

void require_sorted(std::span<const std::int64_t> grid) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] <= grid[i - 1]) throw DomainError("x grid must be strictly increasing");
  }
  if (!grid.empty() && grid.front() < 1) throw DomainError("x grid must start at 1 or above");
}

void require_window(const LatticeLaw& law, std::int64_t x) {
  if (x > law.xmax()) {
    throw RangeError("x = " + std::to_string(x) + " beyond the law's window " +
                     std::to_string(law.xmax()));
  }
}

// Σ_z q(z) g(x - z) with q = P^{n} stored on [0, x].
double power_times_renewal(std::span<const double> q, const RenewalSequence& g,
                           std::int64_t x) {
  CompensatedSum acc;
  for (std::int64_t z = 0; z <= x; ++z) {
    const double v = q[static_cast<std::size_t>(z)];
    if (v != 0.0) acc.add(v * g.g[static_cast<std::size_t>(x - z)]);
  }
  return acc.value();
}

}  // namespace

Trend fit_trend(std::span<const double> x, std::span<const double> values) {
  if (x.size() != values.size() || x.size() < 2) {
    throw DomainError("trend needs at least two matching points");
  }
  Trend t;
  const double lmax = std::log10(x.back());
  const double span = lmax - std::log10(x.front());
  const double width = std::min(1.0, span / 2.0);
  const double fit_from = lmax - 2.0;

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  bool positive = true;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::log10(x[i]) < fit_from - 1e-12) continue;
    if (!(values[i] > 0.0)) {
      positive = false;
      continue;
    }
    const double lx = std::log(x[i]);
    const double ly = std::log(values[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  const double den = m * sxx - sx * sx;
  t.slope = (positive && m >= 2 && den > 0.0) ? (m * sxy - sx * sy) / den
                                                : std::numeric_limits<double>::quiet_NaN();

  double first_min = std::numeric_limits<double>::infinity();
  double last_max = -std::numeric_limits<double>::infinity();
  double last_min = std::numeric_limits<double>::infinity();
  const double l0 = std::log10(x.front());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log10(x[i]);
    if (i == 0 || lx < l0 + width - 1e-12) first_min = std::min(first_min, values[i]);
    if (i + 1 == x.size() || lx > lmax - width + 1e-12) {
      last_max = std::max(last_max, values[i]);
      last_min = std::min(last_min, values[i]);
    }
  }
  t.first_window_min = first_min;
  t.last_window_max = last_max;
  t.oscillation = last_min > 0.0 ? last_max / last_min : std::numeric_limits<double>::infinity();
  t.decreasing = std::isfinite(t.slope) && t.slope <= -0.05 && last_max < first_min;
  t.flat = std::isfinite(t.slope) && t.slope <= 0.05;
  return t;
}

Trend RatioCurve::trend() const {
  std::vector<double> xs(grid.begin(), grid.end());
  return fit_trend(xs, values);
}

std::string RatioCurve::csv(const std::string& name) const {
  std::string out = "x," + name + "\n";
  char buf[64];
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g\n", static_cast<long long>(grid[i]), values[i]);
    out += buf;
  }
  return out;
}

RatioCurve srt_ratio(const LatticeLaw& law, const RenewalSequence& renewal,
                     std::span<const std::int64_t> xgrid) {
  require_sorted(xgrid);
  RatioCurve c;
  c.grid.assign(xgrid.begin(), xgrid.end());
  for (std::int64_t x : xgrid) {
    const double tail = law.tail(x);
    if (!(tail > 0.0)) {
      throw PreconditionError("F̄(" + std::to_string(x) +
                              ") = 0: the law has no heavy tail");
    }
    c.values.push_back(static_cast<double>(x) * tail * renewal.at(x));
  }
  return c;
}

RatioCurve check_rz(const LatticeLaw& law, std::span<const std::int64_t> xgrid) {
  if (!law.nonnegative()) throw PreconditionError("check_rz needs a nonnegative law");
  require_sorted(xgrid);
  RatioCurve c;
  c.grid.assign(xgrid.begin(), xgrid.end());
  for (std::int64_t x : xgrid) {
    require_window(law, x);
    const double tail = law.tail(x);
    if (!(tail > 0.0)) c.out_of_class = true;
    c.values.push_back(static_cast<double>(x) * tail * law.p(x));
  }
  return c;
}

RatioCurve check_r1(const LatticeLaw& law, const ConvTable& conv, int n0,
                    std::span<const std::int64_t> xgrid) {
  if (n0 < 1) throw DomainError("n0 must be >= 1");
  if (!conv.covers(n0)) {
    throw RangeError("convolution table lacks rows up to n0 = " + std::to_string(n0));
  }
  require_sorted(xgrid);
  RatioCurve c;
  c.grid.assign(xgrid.begin(), xgrid.end());
  for (std::int64_t x : xgrid) {
    require_window(law, x);
    double sum = conv.at(1, x);
    if (n0 > 1) {
      CompensatedSum acc;
      for (int n = 1; n <= n0; ++n) acc.add(conv.at(n, x));
      sum = acc.value();
    }
    const double tail = law.tail(x);
    if (!(tail > 0.0)) c.out_of_class = true;
    c.values.push_back(static_cast<double>(x) * tail * sum);
  }
  return c;
}

RatioCurve suffix_sup(std::span<const std::int64_t> xgrid, std::int64_t upper,
                      const std::function<double(std::int64_t)>& value) {
  if (xgrid.empty()) throw DomainError("empty grid");
  if (!std::is_sorted(xgrid.begin(), xgrid.end())) throw DomainError("grid must be sorted");
  if (upper < xgrid.back()) throw DomainError("envelope horizon below the grid");
  RatioCurve c;
  c.grid.assign(xgrid.begin(), xgrid.end());
  c.values.assign(xgrid.size(), 0.0);
  double running = 0.0;
  std::int64_t y = upper;
  for (std::size_t i = xgrid.size(); i-- > 0;) {
    for (; y >= xgrid[i]; --y) running = std::max(running, value(y));
    c.values[i] = running;
  }
  return c;
}

RatioCurve rz_envelope(const LatticeLaw& law, std::span<const std::int64_t> xgrid) {
  if (!law.nonnegative()) throw PreconditionError("rz needs a nonnegative law");
  if (!xgrid.empty() && xgrid.back() > law.xmax()) throw RangeError("x beyond the law's window");
  bool out_of_class = false;
  auto c = suffix_sup(xgrid, law.xmax(), [&](std::int64_t y) {
    const double t = law.tail(y);
    if (!(t > 0.0)) out_of_class = true;
    return static_cast<double>(y) * t * law.p(y);
  });
  c.out_of_class = out_of_class;
  return c;
}

double r3_sum(const LatticeLaw& law, double delta, std::int64_t x) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("δ must lie in (0,1)");
  if (x < 2) throw DomainError("r3 needs x >= 2");
  require_window(law, x);
  const auto wmax = static_cast<std::int64_t>(std::floor(delta * static_cast<double>(x)));
  CompensatedSum acc;
  for (std::int64_t w = 1; w <= wmax; ++w) {
    const double tw = law.tail(w);
    acc.add(law.p(x - w) / (static_cast<double>(w) * tw * tw));
  }
  return static_cast<double>(x) * law.tail(x) * acc.value();
}

double r3_companion(const LatticeLaw& law, const NormingScale& scale, double delta,
                    std::int64_t x) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("δ must lie in (0,1)");
  if (x < 2) throw DomainError("r3 needs x >= 2");
  require_window(law, x);
  const auto wmax = static_cast<std::int64_t>(std::floor(delta * static_cast<double>(x)));
  CompensatedSum acc;
  for (std::int64_t w = 1; w <= wmax; ++w) {
    const double aw = scale.A(static_cast<double>(w));
    acc.add(law.p(x - w) * aw * aw / static_cast<double>(w));
  }
  return static_cast<double>(x) / scale.A(static_cast<double>(x)) * acc.value();
}

R3Matrix r3_matrix(const LatticeLaw& law, std::span<const double> deltas,
                   std::span<const std::int64_t> xs) {
  require_sorted(xs);
  R3Matrix m;
  m.deltas.assign(deltas.begin(), deltas.end());
  m.xs.assign(xs.begin(), xs.end());
  std::vector<double> xd(xs.begin(), xs.end());
  for (double d : deltas) {
    std::vector<double> row;
    for (std::int64_t x : xs) row.push_back(r3_sum(law, d, x));
    if (xs.size() >= 2) m.x_trends.push_back(fit_trend(xd, row));
    m.values.push_back(std::move(row));
  }
  // Column at the largest x, ordered by increasing 1/δ.
  std::vector<std::pair<double, double>> col;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    col.emplace_back(1.0 / deltas[i], m.values[i].back());
  }
  std::sort(col.begin(), col.end());
  if (col.size() >= 2) {
    std::vector<double> inv, v;
    for (auto [a, b] : col) {
      inv.push_back(a);
      v.push_back(b);
    }
    m.delta_trend = fit_trend(inv, v);
  }
  return m;
}

SplitSum split_sum(const LatticeLaw& law, const RenewalSequence& renewal,
                   const NormingScale& scale, double delta, std::int64_t x, int n0) {
  if (!(delta > 0.0)) throw DomainError("δ must be positive");
  if (n0 < 0) throw DomainError("n0 must be >= 0");
  if (x < 1) throw DomainError("split_sum needs x >= 1");
  if (x > renewal.xmax()) throw RangeError("x beyond the renewal horizon");
  require_window(law, x);

  const double ax = scale.A(static_cast<double>(x));
  const double factor = static_cast<double>(x) / ax;
  SplitSum s;
  s.n_split = std::max<std::int64_t>(
      n0, static_cast<std::int64_t>(std::floor(delta * ax)));

  // Σ_{n>=m} P(Sₙ=x) = [P^m g]_x.
  auto from = [&](std::int64_t m) {
    const auto q = pmf_power(law, static_cast<int>(m), x);
    return power_times_renewal(q, renewal, x);
  };
  const double from1 = power_times_renewal(
      [&] {
        std::vector<double> p(static_cast<std::size_t>(x + 1), 0.0);
        for (std::int64_t z = 0; z <= x; ++z) p[static_cast<std::size_t>(z)] = law.p(z);
        return p;
      }(),
      renewal, x);
  const double from_n0 = n0 == 0 ? from1 : from(n0 + 1);
  const double from_split = from(s.n_split + 1);

  s.low = factor * (from1 - from_n0);
  s.head = factor * (from_n0 - from_split);
  s.tail = factor * from_split;
  s.total = factor * renewal.at(x);
  s.additivity_error = std::fabs(s.low + s.head + s.tail - s.total) / s.total;
  return s;
}

double split_tail_limit(const StableLaw& law, double delta) {
  if (!(delta > 0.0)) throw DomainError("δ must be positive");
  return law.alpha * partial_negative_moment(law, law.alpha, std::pow(delta, -1.0 / law.alpha));
}

}  // namespace srt
