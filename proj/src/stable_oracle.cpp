#include "srtlab/stable_oracle.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "srtlab/errors.hpp"
#include "srtlab/summation.hpp"

namespace srt {
namespace {

using std::numbers::pi;

constexpr double kDensityTol = 1e-9;

bool is_one_sided(const StableLaw& law) { return law.alpha < 1.0 && law.beta == 1.0; }

double gk_integrate(const std::function<double(double)>& f, double a, double b,
                    double* err) {
  double e = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, a, b, 15, 1e-11, &e);
  *err += e;
  return v;
}

// Standard S1 density at x > 0 with skewness beta.
double density_positive(double alpha, double beta, double x) {
  const double theta0 = (alpha < 1.0 && std::fabs(beta) == 1.0)
                            ? beta * pi / 2.0
                            : std::atan(beta * std::tan(pi * alpha / 2.0)) / alpha;
  if (theta0 <= -pi / 2.0) return 0.0;
  const double am1 = alpha - 1.0;
  const double log_cos_at0 = std::log(std::cos(alpha * theta0));
  const double log_z = (alpha / am1) * std::log(x);
  const double log_pref =
      std::log(alpha / (pi * std::fabs(am1))) + std::log(x) / am1;

  auto log_v = [&](double th) {
    const double c = std::cos(th);
    const double s = std::sin(alpha * (theta0 + th));
    const double r = std::cos(alpha * theta0 + am1 * th);
    return log_cos_at0 / am1 + (alpha / am1) * (std::log(c) - std::log(s)) +
           std::log(r) - std::log(c);
  };
  auto integrand = [&](double th) {
    const double lv = log_v(th);
    if (!std::isfinite(lv)) return 0.0;
    const double t = log_z + lv;
    if (t > 700.0) return 0.0;
    const double v = std::exp(log_pref + lv - std::exp(t));
    return std::isfinite(v) ? v : 0.0;
  };

  const double lo = -theta0;
  const double hi = pi / 2.0;
  // Split at the peak of the integrand, where z V(θ) = 1.
  auto h = [&](double th) { return log_z + log_v(th); };
  const double eps = 1e-12 * (hi - lo);
  double a = lo + eps;
  double b = hi - eps;
  const double ha = h(a);
  const double hb = h(b);
  double split = std::numeric_limits<double>::quiet_NaN();
  if (std::isfinite(ha) && std::isfinite(hb) && (ha < 0.0) != (hb < 0.0)) {
    for (int i = 0; i < 200 && b - a > 1e-15; ++i) {
      const double m = 0.5 * (a + b);
      if ((h(m) < 0.0) == (ha < 0.0)) {
        a = m;
      } else {
        b = m;
      }
    }
    split = 0.5 * (a + b);
  }
  double err = 0.0;
  double value = 0.0;
  if (std::isnan(split)) {
    value = gk_integrate(integrand, lo, hi, &err);
  } else {
    value = gk_integrate(integrand, lo, split, &err) +
            gk_integrate(integrand, split, hi, &err);
  }
  if (!(err <= kDensityTol) || !std::isfinite(value)) {
    throw NumericalError("stable density quadrature did not converge at x = " +
                         format_double(x) + " (error estimate " +
                         format_double(err) + ")");
  }
  return std::max(value, 0.0);
}

// Convergent power series of the symmetric density for α > 1.
double symmetric_series(double alpha, double x) {
  CompensatedSum acc;
  double x2k = 1.0;
  double fact = 1.0;  // (2k)!
  for (int k = 0; k < 400; ++k) {
    if (k > 0) {
      x2k *= x * x;
      fact *= (2.0 * k - 1.0) * (2.0 * k);
    }
    const double term = std::tgamma((2.0 * k + 1.0) / alpha) / fact * x2k;
    acc.add(k % 2 == 0 ? term : -term);
    if (k > 4 && std::fabs(term) < 1e-18 * std::fabs(acc.value())) break;
  }
  return acc.value() / (pi * alpha);
}

// Asymptotic expansion of the symmetric density for α > 1 and large |x|.
double symmetric_tail_series(double alpha, double x) {
  const double ax = std::fabs(x);
  CompensatedSum acc;
  double last = std::numeric_limits<double>::infinity();
  for (int k = 1; k < 60; ++k) {
    const double mag = std::exp(std::lgamma(alpha * k + 1.0) - std::lgamma(k + 1.0) -
                                (alpha * k + 1.0) * std::log(ax));
    if (mag > last) break;
    last = mag;
    const double term = mag * std::sin(pi * k * alpha / 2.0);
    acc.add(k % 2 == 1 ? term : -term);
    if (mag < 1e-18 * std::fabs(acc.value())) break;
  }
  return acc.value() / pi;
}

double standard_density(double alpha, double beta, double x) {
  if (alpha > 1.0 && beta == 0.0 && std::fabs(x) <= 1.0) {
    return symmetric_series(alpha, x);
  }
  if (alpha > 1.0 && beta == 0.0 && std::fabs(x) >= 10.0) {
    return symmetric_tail_series(alpha, x);
  }
  const double t = std::tan(pi * alpha / 2.0);
  const bool totally_skewed = alpha < 1.0 && std::fabs(beta) == 1.0;
  if (std::fabs(x) < 1e-12 && !totally_skewed) {
    const double theta0 = std::atan(beta * t) / alpha;
    return std::tgamma(1.0 + 1.0 / alpha) * std::cos(theta0) /
           (pi * std::pow(1.0 + beta * beta * t * t, 1.0 / (2.0 * alpha)));
  }
  return x > 0.0 ? density_positive(alpha, beta, x)
                 : density_positive(alpha, -beta, -x);
}

// Convergent expansion in powers of y^{-α} for E exp(-λY) = exp(-c λ^α).
double one_sided_series(double alpha, double c, double y) {
  const double w = c * std::pow(y, -alpha);
  CompensatedSum acc;
  double wk = 1.0;
  for (int k = 1; k < 200; ++k) {
    wk *= w;
    const double term = std::exp(std::lgamma(k * alpha + 1.0) - std::lgamma(k + 1.0)) *
                        std::sin(pi * k * alpha) * wk;
    acc.add(k % 2 == 1 ? term : -term);
    if (std::fabs(wk) * std::exp(std::lgamma(k * alpha + 1.0) - std::lgamma(k + 1.0)) <
        1e-18 * std::fabs(acc.value())) {
      break;
    }
  }
  return acc.value() / (pi * y);
}

double uniform53(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Mellin transform of the Laplace transform, in the variable t = λ^α.
double laplace_route(double alpha, double c, double s) {
  using boost::math::quadrature::exp_sinh;
  using boost::math::quadrature::tanh_sinh;
  const double q = s / alpha;
  std::function<double(double)> f;
  double factor = 0.0;
  if (s > 0.0) {
    f = [&](double t) { return t > 0.0 ? std::exp((q - 1.0) * std::log(t) - c * t) : 0.0; };
    factor = 1.0 / (alpha * std::tgamma(s));
  } else {
    f = [&](double t) {
      return t > 0.0 ? std::exp((q - 1.0) * std::log(t) + std::log(-std::expm1(-c * t))) : 0.0;
    };
    factor = -s / (alpha * std::tgamma(1.0 + s));
  }
  tanh_sinh<double> ts;
  exp_sinh<double> es;
  return factor * (ts.integrate(f, 0.0, 1.0) +
                   es.integrate(f, 1.0, std::numeric_limits<double>::infinity()));
}

double moment_integral(const StableLaw& law, double s, double upper) {
  boost::math::quadrature::tanh_sinh<double> ts(10);
  auto f = [&](double y) {
    if (y <= 0.0) return 0.0;
    const double d = stable_density(law, y);
    return d > 0.0 ? std::exp(-s * std::log(y) + std::log(d)) : 0.0;
  };
  if (upper <= 1.0) return ts.integrate(f, 0.0, upper, 1e-11);
  // y = 1/u on the far range.
  auto g = [&](double u) {
    if (u <= 0.0) return 0.0;
    const double d = stable_density(law, 1.0 / u);
    return d > 0.0 ? std::exp((s - 2.0) * std::log(u) + std::log(d)) : 0.0;
  };
  return ts.integrate(f, 0.0, 1.0, 1e-11) + ts.integrate(g, 1.0 / upper, 1.0, 1e-11);
}

}  // namespace

void StableLaw::validate() const {
  if (!(alpha > 0.0 && alpha < 2.0) || alpha == 1.0) {
    throw DomainError("stable index must lie in (0,1) or (1,2)");
  }
  if (!(beta >= -1.0 && beta <= 1.0)) throw DomainError("skewness must lie in [-1,1]");
  if (!(sigma > 0.0)) throw DomainError("stable scale must be positive");
}

double StableLaw::rho() const {
  return 0.5 + std::atan(beta * std::tan(pi * alpha / 2.0)) / (pi * alpha);
}

double StableLaw::laplace_coefficient() const {
  if (!is_one_sided(*this)) throw PreconditionError("Laplace exponent needs a one-sided law");
  return std::pow(sigma, alpha) / std::cos(pi * alpha / 2.0);
}

StableLaw StableLaw::one_sided(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("one-sided laws need α in (0,1)");
  return {alpha, 1.0,
          std::pow(std::tgamma(1.0 - alpha) * std::cos(pi * alpha / 2.0), 1.0 / alpha)};
}

StableLaw StableLaw::limit_of(const TailSpec& spec) {
  spec.validate();
  if (spec.support == SupportSign::nonnegative) return one_sided(spec.alpha);
  // Both tails ~ F̄ with A = 1/P(X > x).
  const double a = spec.alpha;
  return {a, 0.0, std::pow(2.0 * std::tgamma(1.0 - a) * std::cos(pi * a / 2.0), 1.0 / a)};
}

double stable_density(const StableLaw& law, double y) {
  law.validate();
  if (is_one_sided(law)) {
    if (y <= 0.0) return 0.0;
    const double c = law.laplace_coefficient();
    if (c * std::pow(y, -law.alpha) <= 0.5) return one_sided_series(law.alpha, c, y);
  }
  return standard_density(law.alpha, law.beta, y / law.sigma) / law.sigma;
}

std::vector<double> sample_positive_stable(const StableLaw& law, std::size_t count,
                                           std::uint64_t seed) {
  if (!is_one_sided(law)) throw PreconditionError("positive stable sampling needs a one-sided law");
  const double a = law.alpha;
  const double scale = std::pow(law.laplace_coefficient(), 1.0 / a);
  std::mt19937_64 rng(seed);
  std::vector<double> out(count);
  for (auto& y : out) {
    const double u = pi * (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    const double e = -std::log1p(-uniform53(rng));
    const double k = std::pow(std::sin(a * u), a / (1.0 - a)) * std::sin((1.0 - a) * u) /
                     std::pow(std::sin(u), 1.0 / (1.0 - a));
    y = scale * std::pow(k / e, (1.0 - a) / a);
  }
  return out;
}

MomentEvaluation negative_moment(const StableLaw& law, double s) {
  if (!is_one_sided(law)) throw PreconditionError("negative moments need a one-sided law");
  if (!(s > -law.alpha)) {
    throw DomainError("E(Y^{-s}) diverges for s <= -α (s = " + format_double(s) + ")");
  }
  MomentEvaluation m;
  if (s == 0.0) {
    m.value = m.laplace_route = m.density_route = 1.0;
    return m;
  }
  m.laplace_route = laplace_route(law.alpha, law.laplace_coefficient(), s);
  m.density_route = moment_integral(law, s, std::numeric_limits<double>::infinity());
  m.discrepancy = std::fabs(m.laplace_route - m.density_route) / std::fabs(m.laplace_route);
  if (!(m.discrepancy <= 1e-5)) {
    throw NumericalError("negative moment routes disagree: Laplace " +
                         format_double(m.laplace_route) + ", density " +
                         format_double(m.density_route));
  }
  m.value = 0.5 * (m.laplace_route + m.density_route);
  return m;
}

MomentEvaluation limit_constant_srt(const StableLaw& law) {
  return limit_constant_green(law, 0.0);
}

MomentEvaluation limit_constant_green(const StableLaw& law, double beta) {
  if (!(beta > -2.0)) throw DomainError("the weight index must exceed -2");
  MomentEvaluation m = negative_moment(law, law.alpha * (beta + 1.0));
  m.value *= law.alpha;
  m.laplace_route *= law.alpha;
  m.density_route *= law.alpha;
  return m;
}

double partial_negative_moment(const StableLaw& law, double s, double upper) {
  if (!is_one_sided(law)) throw PreconditionError("partial moments need a one-sided law");
  if (!(upper > 0.0)) return 0.0;
  return moment_integral(law, s, upper);
}

DensityTable::DensityTable(const StableLaw& law, double ymin, double ymax,
                           std::size_t points)
    : law_(law), log_min_(std::log(ymin)), log_max_(std::log(ymax)) {
  if (!(ymin > 0.0 && ymax > ymin) || points < 2) {
    throw DomainError("density table needs 0 < ymin < ymax and two points");
  }
  step_ = (log_max_ - log_min_) / static_cast<double>(points - 1);
  log_f_.resize(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double f = stable_density(law_, std::exp(log_min_ + step_ * static_cast<double>(i)));
    log_f_[i] = f > 0.0 ? std::log(f) : -std::numeric_limits<double>::infinity();
  }
}

double DensityTable::operator()(double y) const {
  if (y <= 0.0) return is_one_sided(law_) ? 0.0 : stable_density(law_, y);
  const double ly = std::log(y);
  if (ly < log_min_) return is_one_sided(law_) ? 0.0 : stable_density(law_, y);
  const std::size_t n = log_f_.size();
  if (ly >= log_max_) {
    const double slope = (log_f_[n - 1] - log_f_[n - 2]) / step_;
    return std::exp(log_f_[n - 1] + slope * (ly - log_max_));
  }
  const double t = (ly - log_min_) / step_;
  const auto i = std::min(static_cast<std::size_t>(t), n - 2);
  const double w = t - static_cast<double>(i);
  const double a = log_f_[i];
  const double b = log_f_[i + 1];
  if (!std::isfinite(a) || !std::isfinite(b)) {
    return (1.0 - w) * std::exp(a) + w * std::exp(b);
  }
  return std::exp(a + w * (b - a));
}

}  // namespace srt
