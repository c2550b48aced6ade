#include "srtlab/lattice_laws.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "srtlab/errors.hpp"
#include "srtlab/summation.hpp"

namespace srt {
namespace {

constexpr double kE = 2.718281828459045235;

double ell(double x) { return std::log(kE + x); }

bool valid_alpha(double a) {
  return std::isfinite(a) && a > 0.0 && a < 2.0 && a != 1.0;
}

// Smallest k >= k0 with 2^k > x.
int first_spike_above(const TailSpec& s, double x) {
  int k = s.spike_first;
  while (k < 1023 && std::ldexp(1.0, k) <= x) ++k;
  return k;
}

double spike_mass(const TailSpec& s, int k) {
  return s.spike_scale * std::exp2(k * (s.alpha - 1.0));
}

// Σ_{j >= k} m_j.
double spike_remainder(const TailSpec& s, int k) {
  return spike_mass(s, k) / (1.0 - std::exp2(s.alpha - 1.0));
}

double spike_normalizer(const TailSpec& s) {
  return 1.0 + spike_remainder(s, s.spike_first);
}

// Unnormalized one-sided survival S(x) with S(x) = 1 for x <= 1.
double base_survival(const TailSpec& s, double x) {
  if (x <= 1.0) return 1.0;
  const double lx = std::log(x);
  switch (s.family) {
    case TailFamily::pure_power:
      return std::exp(-s.alpha * lx);
    case TailFamily::log_power:
      return std::exp(-s.alpha * lx +
                      s.log_exponent * std::log(ell(x) / ell(1.0)));
    case TailFamily::boundary_half:
      return std::exp(-0.5 * lx +
                      0.5 * s.log_exponent * std::log(ell(x) / ell(1.0)));
    case TailFamily::oscillating: {
      const double u = std::pow(ell(x), s.osc_exponent);
      const double u1 = std::pow(ell(1.0), s.osc_exponent);
      return std::exp(-s.alpha * lx +
                      s.osc_amplitude * (std::sin(u) - std::sin(u1)));
    }
    case TailFamily::spike_perturbed: {
      const double m = spike_remainder(s, first_spike_above(s, x));
      return (std::exp(-s.alpha * lx) + m) / spike_normalizer(s);
    }
    case TailFamily::custom_table:
      break;
  }
  throw PreconditionError("survival: custom tables have no analytic tail");
}

// log S(x-1) - log S(x) for integer x >= 2, without cancellation.
double smooth_log_step(const TailSpec& s, double alpha, double x) {
  const double power_part = -alpha * std::log1p(-1.0 / x);
  const double d_ell = std::log1p(-1.0 / (kE + x));  // ℓ(x-1) - ℓ(x)
  const double log_ratio = std::log1p(d_ell / ell(x));  // log ℓ(x-1)/ℓ(x)
  switch (s.family) {
    case TailFamily::log_power:
      return power_part + s.log_exponent * log_ratio;
    case TailFamily::boundary_half:
      return power_part + 0.5 * s.log_exponent * log_ratio;
    case TailFamily::oscillating: {
      const double u = std::pow(ell(x), s.osc_exponent);
      const double du = u * std::expm1(s.osc_exponent * log_ratio);
      const double u_prev = u + du;
      return power_part + s.osc_amplitude * 2.0 *
                              std::cos(0.5 * (u_prev + u)) *
                              std::sin(0.5 * du);
    }
    default:
      return power_part;
  }
}

// One-sided mass at integer x >= 1 (unnormalized for spikes).
double base_mass(const TailSpec& s, std::int64_t x) {
  if (x <= 1) return 0.0;
  const double xd = static_cast<double>(x);
  if (s.family == TailFamily::spike_perturbed) {
    const double smooth =
        std::exp(-s.alpha * std::log(xd)) *
        std::expm1(smooth_log_step(s, s.alpha, xd));
    double spike = 0.0;
    if ((x & (x - 1)) == 0) {
      const int k = std::countr_zero(static_cast<std::uint64_t>(x));
      if (k >= s.spike_first) spike = spike_mass(s, k);
    }
    return (smooth + spike) / spike_normalizer(s);
  }
  const double alpha =
      s.family == TailFamily::boundary_half ? 0.5 : s.alpha;
  return base_survival(s, xd) * std::expm1(smooth_log_step(s, alpha, xd));
}

std::uint64_t law_hash(const TailSpec& spec, std::int64_t xmin,
                       std::int64_t xmax) {
  std::string text;
  for (const auto& [k, v] : to_key_values(spec)) text += k + "=" + v + ";";
  text += "xmin=" + std::to_string(xmin) + ";xmax=" + std::to_string(xmax);
  return fnv1a(text);
}

void check_aperiodic(std::int64_t xmin, std::span<const double> pmf) {
  std::int64_t g = 0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    if (pmf[i] > 0.0) {
      const std::int64_t z = xmin + static_cast<std::int64_t>(i);
      if (z != 0) g = std::gcd(g, z < 0 ? -z : z);
    }
  }
  if (g != 1) {
    throw ConstructionError("law is not aperiodic (gcd of support = " +
                            std::to_string(g) + ")");
  }
}

}  // namespace

std::string to_string(TailFamily f) {
  switch (f) {
    case TailFamily::pure_power: return "pure-power";
    case TailFamily::log_power: return "log-power";
    case TailFamily::boundary_half: return "boundary-half";
    case TailFamily::oscillating: return "oscillating";
    case TailFamily::spike_perturbed: return "spike-perturbed";
    case TailFamily::custom_table: return "custom-table";
  }
  return "unknown";
}

std::string to_string(SupportSign s) {
  return s == SupportSign::nonnegative ? "nonnegative" : "centered-two-sided";
}

TailFamily parse_family(const std::string& name) {
  for (auto f : {TailFamily::pure_power, TailFamily::log_power,
                 TailFamily::boundary_half, TailFamily::oscillating,
                 TailFamily::spike_perturbed, TailFamily::custom_table}) {
    if (to_string(f) == name) return f;
  }
  throw ConfigError("unknown law family '" + name + "'");
}

SupportSign parse_support(const std::string& name) {
  if (name == "nonnegative") return SupportSign::nonnegative;
  if (name == "centered-two-sided") return SupportSign::centered_two_sided;
  throw ConfigError("unknown support sign '" + name + "'");
}

void TailSpec::validate() const {
  if (!valid_alpha(alpha)) {
    throw ConfigError("alpha must lie in (0,1)∪(1,2), got " +
                      format_double(alpha));
  }
  const bool two_sided = support == SupportSign::centered_two_sided;
  if (!two_sided && alpha > 1.0) {
    throw ConfigError("nonnegative laws need alpha in (0,1)");
  }
  switch (family) {
    case TailFamily::pure_power:
      break;
    case TailFamily::log_power:
      if (!std::isfinite(log_exponent)) {
        throw ConfigError("log_exponent must be finite");
      }
      break;
    case TailFamily::boundary_half:
      if (alpha != 0.5) throw ConfigError("boundary-half requires alpha = 0.5");
      if (!(log_exponent >= 0.0) || !std::isfinite(log_exponent)) {
        throw ConfigError("boundary-half requires log_exponent >= 0");
      }
      if (two_sided) throw ConfigError("boundary-half is nonnegative only");
      break;
    case TailFamily::oscillating:
      if (!(osc_exponent > 0.0 && osc_exponent < 1.0)) {
        throw ConfigError("osc_exponent must lie in (0,1)");
      }
      if (!(osc_amplitude >= 0.0) || !(osc_amplitude * osc_exponent < alpha)) {
        throw ConfigError(
            "oscillating family needs 0 <= osc_amplitude*osc_exponent < alpha");
      }
      break;
    case TailFamily::spike_perturbed:
      if (!(alpha < 0.5)) throw ConfigError("spike-perturbed needs alpha < 1/2");
      if (!(spike_scale > 0.0) || !std::isfinite(spike_scale)) {
        throw ConfigError("spike_scale must be positive");
      }
      if (spike_first < 1 || spike_first > 62) {
        throw ConfigError("spike_first must lie in [1,62]");
      }
      if (two_sided) throw ConfigError("spike-perturbed is nonnegative only");
      break;
    case TailFamily::custom_table:
      if (table.empty()) throw ConfigError("custom-table needs a table");
      if (!two_sided && table_xmin < 0) {
        throw ConfigError("nonnegative custom table must start at x >= 0");
      }
      for (double v : table) {
        if (!std::isfinite(v)) throw ConfigError("table entries must be finite");
      }
      break;
  }
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ConfigError("key '" + key + "': not a number: '" + text + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& key, const std::string& text) {
  std::int64_t v = 0;
  const char* last = text.data() + text.size();
  auto res = std::from_chars(text.data(), last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ConfigError("key '" + key + "': not an integer: '" + text + "'");
  }
  return v;
}

KeyValues to_key_values(const TailSpec& spec) {
  KeyValues kv;
  kv["family"] = to_string(spec.family);
  kv["alpha"] = format_double(spec.alpha);
  kv["support"] = to_string(spec.support);
  switch (spec.family) {
    case TailFamily::log_power:
    case TailFamily::boundary_half:
      kv["log_exponent"] = format_double(spec.log_exponent);
      break;
    case TailFamily::oscillating:
      kv["osc_amplitude"] = format_double(spec.osc_amplitude);
      kv["osc_exponent"] = format_double(spec.osc_exponent);
      break;
    case TailFamily::spike_perturbed:
      kv["spike_scale"] = format_double(spec.spike_scale);
      kv["spike_first"] = std::to_string(spec.spike_first);
      break;
    case TailFamily::custom_table: {
      std::string t;
      for (std::size_t i = 0; i < spec.table.size(); ++i) {
        if (i) t += ",";
        t += format_double(spec.table[i]);
      }
      kv["table"] = t;
      kv["table_xmin"] = std::to_string(spec.table_xmin);
      break;
    }
    case TailFamily::pure_power:
      break;
  }
  return kv;
}

TailSpec tail_spec_from(const KeyValues& kv) {
  static const char* const known[] = {
      "family",       "alpha",       "support",     "log_exponent",
      "osc_amplitude", "osc_exponent", "spike_scale", "spike_first",
      "table",        "table_xmin"};
  for (const auto& [k, v] : kv) {
    if (std::find(std::begin(known), std::end(known), k) == std::end(known)) {
      throw ConfigError("unknown law key '" + k + "'");
    }
  }
  TailSpec s;
  auto get = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (auto v = get("family")) s.family = parse_family(*v);
  if (auto v = get("alpha")) s.alpha = parse_double("alpha", *v);
  if (auto v = get("support")) s.support = parse_support(*v);
  if (auto v = get("log_exponent")) s.log_exponent = parse_double("log_exponent", *v);
  if (auto v = get("osc_amplitude")) s.osc_amplitude = parse_double("osc_amplitude", *v);
  if (auto v = get("osc_exponent")) s.osc_exponent = parse_double("osc_exponent", *v);
  if (auto v = get("spike_scale")) s.spike_scale = parse_double("spike_scale", *v);
  if (auto v = get("spike_first")) {
    s.spike_first = static_cast<int>(parse_int("spike_first", *v));
  }
  if (auto v = get("table_xmin")) s.table_xmin = parse_int("table_xmin", *v);
  if (auto v = get("table")) {
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item.erase(0, item.find_first_not_of(" \t"));
      item.erase(item.find_last_not_of(" \t") + 1);
      s.table.push_back(parse_double("table", item));
    }
  }
  s.validate();
  return s;
}

LatticeLaw::LatticeLaw(TailSpec spec, std::int64_t xmin,
                       std::vector<double> pmf, double truncated_upper,
                       double truncated_lower, std::vector<double> tail)
    : spec_(std::move(spec)),
      xmin_(xmin),
      pmf_(std::move(pmf)),
      truncated_upper_(truncated_upper),
      truncated_lower_(truncated_lower),
      tail_(std::move(tail)),
      hash_(law_hash(spec_, xmin_, xmin_ + static_cast<std::int64_t>(pmf_.size()) - 1)) {}

double LatticeLaw::tail(std::int64_t x) const {
  if (x < xmin_ - 1) return 1.0 - truncated_lower_;
  if (x >= xmax()) return truncated_upper_;
  return tail_[static_cast<std::size_t>(x - (xmin_ - 1))];
}

LatticeLaw build_law(const TailSpec& spec, std::int64_t xmax) {
  spec.validate();
  if (xmax < 8) throw ConfigError("xmax must be >= 8");
  const bool two_sided = spec.support == SupportSign::centered_two_sided;

  if (spec.family == TailFamily::custom_table) {
    const std::int64_t xmin = spec.table_xmin;
    if (xmax < xmin) throw ConfigError("xmax below table start");
    const auto n = static_cast<std::size_t>(xmax - xmin + 1);
    std::vector<double> pmf(n, 0.0);
    CompensatedSum total, beyond;
    for (std::size_t i = 0; i < spec.table.size(); ++i) {
      const double v = spec.table[i];
      if (v < 0.0) {
        throw ConstructionError("custom table has negative mass at x = " +
                                std::to_string(xmin + static_cast<std::int64_t>(i)));
      }
      total.add(v);
      if (i < n) {
        pmf[i] = v;
      } else {
        beyond.add(v);
      }
    }
    if (total.value() > 1.0 + 1e-12) {
      throw ConstructionError("custom table mass exceeds 1");
    }
    const double upper = std::max(0.0, beyond.value() + (1.0 - total.value()));
    std::vector<double> tail(n + 1);
    CompensatedSum acc;
    acc.add(upper);
    for (std::size_t i = n; i-- > 0;) {
      tail[i + 1] = acc.value();
      acc.add(pmf[i]);
    }
    tail[0] = acc.value();
    check_aperiodic(xmin, pmf);
    return LatticeLaw(spec, xmin, std::move(pmf), upper, 0.0, std::move(tail));
  }

  // One-sided masses p₁(x), x = 0..xmax.
  std::vector<double> one(static_cast<std::size_t>(xmax + 1), 0.0);
  for (std::int64_t x = 2; x <= xmax; ++x) {
    const double m = base_mass(spec, x);
    if (!(m >= 0.0) || !std::isfinite(m)) {
      throw ConstructionError("family parameters give negative mass at x = " +
                              std::to_string(x));
    }
    one[static_cast<std::size_t>(x)] = m;
  }
  auto surv = [&](std::int64_t x) {
    return x < 1 ? 1.0 : base_survival(spec, static_cast<double>(x));
  };
  for (std::int64_t x = 2; x <= xmax; ++x) {
    if (surv(x) > surv(x - 1)) {
      throw ConstructionError("survival function increases at x = " +
                              std::to_string(x));
    }
  }

  if (!two_sided) {
    std::vector<double> tail(static_cast<std::size_t>(xmax + 2));
    tail[0] = 1.0;  // x = -1
    for (std::int64_t x = 0; x <= xmax; ++x) {
      tail[static_cast<std::size_t>(x + 1)] = surv(x);
    }
    const double upper = surv(xmax);
    check_aperiodic(0, one);
    return LatticeLaw(spec, 0, std::move(one), upper, 0.0, std::move(tail));
  }

  const auto width = static_cast<std::size_t>(2 * xmax + 1);
  std::vector<double> pmf(width, 0.0);
  for (std::int64_t z = 1; z <= xmax; ++z) {
    const double m = 0.5 * one[static_cast<std::size_t>(z)];
    pmf[static_cast<std::size_t>(xmax + z)] = m;
    pmf[static_cast<std::size_t>(xmax - z)] = m;
  }
  std::vector<double> tail(width + 1);
  for (std::int64_t x = -xmax - 1; x <= xmax; ++x) {
    const double t = x >= 0 ? 0.5 * surv(x) : 1.0 - 0.5 * surv(-x - 1);
    tail[static_cast<std::size_t>(x + xmax + 1)] = t;
  }
  const double side = 0.5 * surv(xmax);
  check_aperiodic(-xmax, pmf);
  return LatticeLaw(spec, -xmax, std::move(pmf), side, side, std::move(tail));
}

double survival(const TailSpec& spec, double x) {
  const double s = base_survival(spec, x);
  return spec.support == SupportSign::centered_two_sided ? 0.5 * s : s;
}

std::string law_csv(const LatticeLaw& law) {
  std::string out = "x,p\n";
  char buf[64];
  for (std::int64_t x = law.xmin(); x <= law.xmax(); ++x) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g\n", static_cast<long long>(x),
                  law.p(x));
    out += buf;
  }
  return out;
}

NormingScale::NormingScale(double alpha, std::function<double(double)> big_a)
    : alpha_(alpha), big_a_(std::move(big_a)), a_at_one_(big_a_(1.0)) {}

double NormingScale::A(double x) const {
  if (x >= 1.0) return big_a_(x);
  return a_at_one_ * std::pow(x, alpha_);
}

double NormingScale::a(double y) const {
  if (!(y > 0.0)) throw DomainError("a(y) needs y > 0");
  if (y <= a_at_one_) return std::pow(y / a_at_one_, 1.0 / alpha_);
  double lo = 0.0;  // log x
  double hi = 1.0;
  while (A(std::exp(hi)) < y) {
    lo = hi;
    hi *= 2.0;
    if (hi > 700.0) throw RangeError("a(y): y beyond the representable range");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-16 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (A(std::exp(mid)) < y) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

NormingScale build_norming(const TailSpec& spec) {
  spec.validate();
  const double alpha = spec.alpha;
  std::function<double(double)> big_a;

  if (spec.family == TailFamily::custom_table) {
    // Right tail of the table at integer points from 1 on.
    CompensatedSum total;
    for (double v : spec.table) total.add(v);
    const double remainder = std::max(0.0, 1.0 - total.value());
    if (remainder <= 0.0) {
      throw ConstructionError(
          "custom table has finite support: not in a domain of attraction");
    }
    const std::int64_t last = spec.table_xmin +
                              static_cast<std::int64_t>(spec.table.size()) - 1;
    const std::int64_t end = std::max<std::int64_t>(last, 1);
    std::vector<double> log_a(static_cast<std::size_t>(end + 1));
    for (std::int64_t x = end; x >= 0; --x) {
      CompensatedSum t;
      t.add(remainder);
      for (std::int64_t z = std::max(x + 1, spec.table_xmin); z <= last; ++z) {
        t.add(spec.table[static_cast<std::size_t>(z - spec.table_xmin)]);
      }
      log_a[static_cast<std::size_t>(x)] = -std::log(t.value());
    }
    big_a = [log_a = std::move(log_a), end, alpha](double x) {
      const double ex = static_cast<double>(end);
      if (x >= ex) {
        return std::exp(log_a.back() + alpha * std::log(x / ex));
      }
      const auto i = static_cast<std::size_t>(std::floor(x));
      if (i + 1 >= log_a.size()) return std::exp(log_a.back());
      const double xi = static_cast<double>(i);
      const double w = (x - xi);  // linear in x between lattice points
      return std::exp(log_a[i] * (1.0 - w) + log_a[i + 1] * w);
    };
  } else if (spec.family == TailFamily::spike_perturbed) {
    const double z = spike_normalizer(spec);
    big_a = [z, alpha](double x) { return z * std::pow(x, alpha); };
  } else {
    big_a = [spec](double x) { return 1.0 / survival(spec, x); };
  }

  // Monotonicity on a log grid.
  double prev = big_a(1.0);
  for (int i = 1; i <= 4000; ++i) {
    const double x = std::exp(i * 0.01);
    const double v = big_a(x);
    if (!(v >= prev) || !std::isfinite(v)) {
      throw ConstructionError("A(x) is not monotone near x = " +
                              format_double(x));
    }
    prev = v;
  }
  return NormingScale(alpha, std::move(big_a));
}

PotterReport potter_envelope(const NormingScale& scale, double eps,
                             std::span<const double> xgrid) {
  PotterReport r;
  r.eps = eps;
  const double alpha = scale.alpha();
  double c = 1.0;
  for (std::size_t i = 0; i < xgrid.size(); ++i) {
    for (std::size_t j = 0; j < xgrid.size(); ++j) {
      if (!(xgrid[j] > xgrid[i])) continue;
      const double lambda = xgrid[j] / xgrid[i];
      const double ratio = scale.A(xgrid[j]) / scale.A(xgrid[i]);
      c = std::max({c, ratio / std::pow(lambda, alpha + eps),
                    std::pow(lambda, alpha - eps) / ratio});
      ++r.pairs;
    }
  }
  if (c < 1.0 + 1e-12) c = 1.0;
  r.constant = c;
  r.violated = c > 1.0;
  return r;
}

}  // namespace srt
