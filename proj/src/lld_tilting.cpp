#include "srtlab/lld_tilting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "srtlab/convolution_engine.hpp"
#include "srtlab/errors.hpp"
#include "srtlab/summation.hpp"

namespace srt {
namespace {

std::int64_t truncation_level(double gamma, std::int64_t x) {
  return static_cast<std::int64_t>(std::floor(gamma * static_cast<double>(x)));
}

void check_tilt_args(int n, std::int64_t x, double gamma) {
  if (n < 1) throw DomainError("n must be >= 1");
  if (x < 1) throw DomainError("x must be >= 1");
  if (!(gamma > 0.0)) throw DomainError("γ must be > 0");
}

void finish_surface(LldSurface& s) {
  s.sup = 0.0;
  s.max_slope = -std::numeric_limits<double>::infinity();
  s.flat = true;
  bool any_row = false;
  for (std::size_t i = 0; i < s.ns.size(); ++i) {
    for (std::size_t j = 0; j < s.thetas.size(); ++j) {
      if (s.ratio[i][j] > s.sup) {
        s.sup = s.ratio[i][j];
        s.sup_n = s.ns[i];
        s.sup_theta = s.thetas[j];
      }
    }
    const bool vanishes = std::all_of(s.ratio[i].begin(), s.ratio[i].end(),
                                      [](double v) { return v == 0.0; });
    if (vanishes || s.thetas.size() < 2) continue;
    const Trend t = fit_trend(s.thetas, s.ratio[i]);
    s.theta_trends.push_back(t);
    any_row = true;
    s.max_slope = std::max(s.max_slope, std::isfinite(t.slope) ? t.slope
                                                               : std::numeric_limits<double>::infinity());
    s.flat = s.flat && t.flat;
  }
  if (!any_row) s.max_slope = 0.0;
  s.flat = s.flat && std::isfinite(s.sup);
}

}  // namespace

TiltedLaw tilt_with_lambda(const LatticeLaw& law, int n, std::int64_t x, double gamma,
                           double lambda) {
  check_tilt_args(n, x, gamma);
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("Λ must be positive and finite");
  TiltedLaw t;
  t.n = n;
  t.x = x;
  t.gamma = gamma;
  t.lambda = lambda;
  t.mu = std::log(lambda) / (gamma * static_cast<double>(x));
  const std::int64_t bound = truncation_level(gamma, x);
  const std::int64_t lo = std::max(law.xmin(), -bound);
  const std::int64_t hi = std::min(law.xmax(), bound);
  if (lo > hi) throw DomainError("the truncated support |z| <= γx is empty");
  CompensatedSum m0;
  std::vector<double> w(static_cast<std::size_t>(hi - lo + 1));
  for (std::int64_t z = lo; z <= hi; ++z) {
    const double v = std::exp(t.mu * static_cast<double>(z)) * law.p(z);
    w[static_cast<std::size_t>(z - lo)] = v;
    m0.add(v);
  }
  t.m0 = m0.value();
  if (!(t.m0 > 0.0)) throw DomainError("the truncated support |z| <= γx carries no mass");
  for (double& v : w) v /= t.m0;
  t.lo = lo;
  t.pmf = std::move(w);
  return t;
}

TiltedLaw make_tilted(const LatticeLaw& law, int n, std::int64_t x, double gamma) {
  check_tilt_args(n, x, gamma);
  const double nf = static_cast<double>(n) * law.tail(x);
  if (!(nf < 1.0)) {
    throw DomainError("n F̄(x) >= 1: the tilt is only defined for Λ > 1");
  }
  if (!(nf > 0.0)) throw DomainError("F̄(x) = 0: Λ is infinite; supply Λ explicitly");
  return tilt_with_lambda(law, n, x, gamma, 1.0 / nf);
}

TiltCheck tilt_identity_check(const LatticeLaw& law, int n, std::int64_t x, double gamma,
                              std::optional<double> lambda) {
  const TiltedLaw t = lambda ? tilt_with_lambda(law, n, x, gamma, *lambda)
                             : make_tilted(law, n, x, gamma);
  TiltCheck c;
  c.lambda = t.lambda;
  c.direct = truncated_event_prob(law, n, x, gamma);
  const double p_tilde = nfold_at(t.pmf, t.lo, n, x);
  if (p_tilde > 0.0) {
    c.tilted = std::exp(static_cast<double>(n) * std::log(t.m0) -
                        std::log(t.lambda) / gamma + std::log(p_tilde));
  }
  const double scale = std::max(c.direct, c.tilted);
  c.discrepancy = scale > 0.0 ? std::fabs(c.direct - c.tilted) / scale : 0.0;
  return c;
}

MomentReport tilted_moments(const TiltedLaw& t, const MomentBounds& bounds) {
  MomentReport r;
  CompensatedSum s1, s2, s3, sa;
  for (std::size_t i = 0; i < t.pmf.size(); ++i) {
    const double z = static_cast<double>(t.lo + static_cast<std::int64_t>(i));
    const double p = t.pmf[i];
    s1.add(p * z);
    s2.add(p * z * z);
    s3.add(p * z * z * z);
    sa.add(p * std::fabs(z * z * z));
  }
  r.m1 = s1.value();
  r.m2 = s2.value();
  r.m3 = s3.value();
  r.abs3 = sa.value();
  CompensatedSum v2, v3;
  for (std::size_t i = 0; i < t.pmf.size(); ++i) {
    const double d = static_cast<double>(t.lo + static_cast<std::int64_t>(i)) - r.m1;
    v2.add(t.pmf[i] * d * d);
    v3.add(t.pmf[i] * std::fabs(d * d * d));
  }
  r.sigma2_tilde = v2.value();
  r.nu_tilde = v3.value();
  const double n = t.n;
  const double x = static_cast<double>(t.x);
  r.scaled[0] = n * std::fabs(r.m1) / x;
  r.scaled[1] = n * std::fabs(r.m2) / (x * x);
  r.scaled[2] = n * std::fabs(r.m3) / (x * x * x);
  r.variance_scaled = n * r.sigma2_tilde / (x * x);
  r.upper_ok = std::all_of(std::begin(r.scaled), std::end(r.scaled),
                           [&](double v) { return v <= bounds.upper; });
  r.variance_upper_ok = r.variance_scaled <= bounds.upper;
  r.variance_lower_ok = r.variance_scaled * std::pow(t.lambda, bounds.d) >= bounds.lower;
  return r;
}

std::string LldSurface::csv() const {
  std::string out = "n,theta,x,ratio\n";
  char buf[128];
  for (std::size_t i = 0; i < ns.size(); ++i) {
    for (std::size_t j = 0; j < thetas.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%lld,%.17g\n", ns[i], thetas[j],
                    static_cast<long long>(xs[i][j]), ratio[i][j]);
      out += buf;
    }
  }
  return out;
}

LldSurfaces lld_surfaces(const LatticeLaw& law, const NormingScale& scale,
                         std::span<const int> ns_in, std::span<const double> thetas_in,
                         std::optional<double> gamma) {
  std::vector<int> ns(ns_in.begin(), ns_in.end());
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  std::vector<double> thetas(thetas_in.begin(), thetas_in.end());
  std::sort(thetas.begin(), thetas.end());
  if (ns.empty() || thetas.empty()) throw DomainError("scan grids must be non-empty");
  if (ns.front() < 1) throw DomainError("n must be >= 1");
  if (!(thetas.front() > 0.0)) throw DomainError("θ must be > 0");
  if (gamma && !(*gamma > 0.0)) throw DomainError("γ must be > 0");

  LldSurfaces out;
  out.gamma = gamma.value_or(0.0);
  LldSurface& plain = out.plain;
  plain.ns = ns;
  plain.thetas = thetas;
  std::int64_t xcap = 0;
  std::vector<double> an(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    an[i] = scale.a(static_cast<double>(ns[i]));
    std::vector<std::int64_t> row;
    for (double th : thetas) {
      const auto x = static_cast<std::int64_t>(std::llround(th * an[i]));
      if (x < 1) throw DomainError("θ aₙ rounds below 1");
      if (x > law.xmax()) {
        throw RangeError("x = " + std::to_string(x) + " at n = " + std::to_string(ns[i]) +
                         " exceeds the law's window " + std::to_string(law.xmax()) +
                         "; build the law with xmax >= " + std::to_string(x));
      }
      xcap = std::max(xcap, x);
      row.push_back(x);
    }
    plain.xs.push_back(std::move(row));
  }
  plain.ratio.assign(ns.size(), std::vector<double>(thetas.size(), 0.0));

  const bool one_exceedance = gamma && law.nonnegative() && *gamma >= 0.5;
  std::vector<int> targets = ns;
  if (one_exceedance) {
    for (int n : ns) {
      if (n > 1) targets.push_back(n - 1);
    }
  }
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

  if (gamma) {
    LldSurface t;
    t.ns = ns;
    t.thetas = thetas;
    t.xs = plain.xs;
    t.ratio.assign(ns.size(), std::vector<double>(thetas.size(), 0.0));
    out.truncated = std::move(t);
  }

  // Row n-1 is visited just before row n when both are targets.
  Row previous;
  int previous_n = 0;
  const std::int64_t cap = law.nonnegative() ? xcap : 0;
  auto visit = [&](int n, const Row& row) {
    const auto it = std::find(ns.begin(), ns.end(), n);
    if (it != ns.end()) {
      const auto i = static_cast<std::size_t>(it - ns.begin());
      for (std::size_t j = 0; j < thetas.size(); ++j) {
        const std::int64_t x = plain.xs[i][j];
        const double nf = static_cast<double>(n) * law.tail(x);
        const double pn = row.at(x);
        plain.ratio[i][j] = an[i] * pn / nf;
        if (!gamma) continue;
        double trunc = 0.0;
        if (one_exceedance && n > 1) {
          if (previous_n != n - 1) throw Error("power ladder skipped row n-1");
          const std::int64_t bound = truncation_level(*gamma, x);
          CompensatedSum big;
          for (std::int64_t z = bound + 1; z <= x; ++z) {
            const double pz = law.p(z);
            if (pz != 0.0) big.add(pz * previous.at(x - z));
          }
          trunc = std::max(0.0, pn - static_cast<double>(n) * big.value());
        } else {
          trunc = truncated_event_prob(law, n, x, *gamma);
        }
        out.truncated->ratio[i][j] = an[i] * trunc / std::pow(nf, 1.0 / *gamma);
      }
    }
    if (one_exceedance && std::binary_search(ns.begin(), ns.end(), n + 1)) {
      previous = row;
      previous_n = n;
    }
  };
  // Two-sided rows are kept in full; the cap only trims nonnegative rows.
  for_each_power(law, targets, law.nonnegative() ? cap : law.xmax(), visit);

  finish_surface(out.plain);
  if (out.truncated) finish_surface(*out.truncated);
  return out;
}

LldSurface lld_scan(const LatticeLaw& law, const NormingScale& scale, std::span<const int> ns,
                    std::span<const double> thetas) {
  return lld_surfaces(law, scale, ns, thetas).plain;
}

LldSurface truncated_lld_scan(const LatticeLaw& law, const NormingScale& scale, double gamma,
                              std::span<const int> ns, std::span<const double> thetas) {
  return *lld_surfaces(law, scale, ns, thetas, gamma).truncated;
}

std::vector<GnedenkoPoint> gnedenko_sanity(const LatticeLaw& law, const NormingScale& scale,
                                           const StableLaw& stable, int n,
                                           std::span<const double> ys) {
  if (n < 1) throw DomainError("n must be >= 1");
  const double an = scale.a(static_cast<double>(n));
  std::vector<GnedenkoPoint> out;
  std::int64_t xmax = 0;
  std::int64_t xmin = 0;
  for (double y : ys) {
    GnedenkoPoint p;
    p.y = y;
    p.x = static_cast<std::int64_t>(std::floor(y * an));
    xmax = std::max(xmax, p.x);
    xmin = std::min(xmin, p.x);
    out.push_back(p);
  }
  if (xmax > law.xmax() || xmin < law.xmin() * n) {
    throw RangeError("Gnedenko points exceed the law's window; need xmax >= " +
                     std::to_string(std::max(xmax, -xmin)));
  }
  const int targets[] = {n};
  const ConvTable t = conv_powers(law, targets, law.nonnegative() ? xmax : law.xmax());
  for (auto& p : out) {
    p.scaled = an * t.row(n).at(p.x);
    p.density = stable_density(stable, p.y);
    p.deviation = std::fabs(p.scaled - p.density);
    p.relative = p.density > 0.0 ? p.deviation / p.density
                                 : std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace srt
