#include "srtlab/experiment.hpp"

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <boost/version.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "srtlab/convolution_engine.hpp"
#include "srtlab/errors.hpp"
#include "srtlab/lld_tilting.hpp"
#include "srtlab/srt_conditions.hpp"
#include "srtlab/stable_oracle.hpp"
#include "srtlab/summation.hpp"

#ifndef SRTLAB_VERSION
#define SRTLAB_VERSION "0.0.0"
#endif

namespace srt {
namespace {

using json = nlohmann::ordered_json;
using Sections = std::map<std::string, KeyValues>;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("empty list element in '" + text + "'");
    out.push_back(item);
  }
  return out;
}

template <class T, class F>
std::string join(const std::vector<T>& values, F&& fmt) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ",";
    s += fmt(values[i]);
  }
  return s;
}

std::string fmt_int(std::int64_t v) { return std::to_string(v); }

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + text + "'");
}

std::vector<double> parse_doubles(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(parse_double(key, item));
  return out;
}

std::vector<std::int64_t> parse_ints(const std::string& key, const std::string& text) {
  std::vector<std::int64_t> out;
  for (const auto& item : split_list(text)) out.push_back(parse_int(key, item));
  return out;
}

int parse_small_int(const std::string& key, const std::string& text) {
  const auto v = parse_int(key, text);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError("key '" + key + "' out of range");
  }
  return static_cast<int>(v);
}

// Reads and removes a key from a section.
class SectionReader {
 public:
  SectionReader(Sections& sections, std::string name) : name_(std::move(name)) {
    auto it = sections.find(name_);
    if (it != sections.end()) {
      kv_ = std::move(it->second);
      sections.erase(it);
    }
  }
  const std::string* take(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return nullptr;
    taken_.push_back(std::move(it->second));
    kv_.erase(it);
    return &taken_.back();
  }
  void finish() const {
    if (!kv_.empty()) {
      throw ConfigError("unknown key '" + kv_.begin()->first + "' in section [" + name_ + "]");
    }
  }

 private:
  std::string name_;
  KeyValues kv_;
  std::deque<std::string> taken_;
};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Comma-separated CSV row with integers verbatim and reals at 17 digits.
struct CsvWriter {
  std::string text;
  explicit CsvWriter(const std::string& header) : text(header + "\n") {}
  template <class... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    auto put = [&](const auto& c) {
      if (!first) text += ',';
      first = false;
      using C = std::decay_t<decltype(c)>;
      if constexpr (std::is_same_v<C, double>) {
        text += g17(c);
      } else if constexpr (std::is_same_v<C, std::string>) {
        text += c;
      } else if constexpr (std::is_same_v<C, bool>) {
        text += c ? "1" : "0";
      } else {
        text += std::to_string(c);
      }
    };
    (put(cells), ...);
    text += '\n';
  }
};

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(workers, count); ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = count;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

std::vector<std::int64_t> log_grid(std::int64_t lo, std::int64_t hi, int per_decade) {
  std::vector<std::int64_t> out;
  const double step = 1.0 / per_decade;
  const double top = std::log10(static_cast<double>(hi));
  for (int k = 0;; ++k) {
    const double e = std::log10(static_cast<double>(lo)) + step * k;
    if (e > top + 1e-9) break;
    const auto v = static_cast<std::int64_t>(std::llround(std::pow(10.0, e)));
    if (out.empty() || v > out.back()) out.push_back(v);
  }
  if (out.back() != hi) out.push_back(hi);
  return out;
}

// Grid points that are exact powers of ten, or the two endpoints.
std::vector<std::int64_t> decade_points(const std::vector<std::int64_t>& grid) {
  std::vector<std::int64_t> out;
  for (auto x : grid) {
    const double e = std::log10(static_cast<double>(x));
    if (std::fabs(e - std::round(e)) < 1e-12) out.push_back(x);
  }
  if (out.size() < 2) out = {grid.front(), grid.back()};
  return out;
}

json trend_json(const Trend& t) {
  return json{{"slope", t.slope},
              {"oscillation", t.oscillation},
              {"first_window_min", t.first_window_min},
              {"last_window_max", t.last_window_max},
              {"decreasing", t.decreasing},
              {"flat", t.flat}};
}

json moment_json(const MomentEvaluation& m) {
  return json{{"value", m.value},
              {"laplace_route", m.laplace_route},
              {"density_route", m.density_route},
              {"discrepancy", m.discrepancy}};
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] < v[i - 1])) return false;
  }
  return true;
}

void require_one_sided_regime(const TailSpec& spec) {
  if (spec.support != SupportSign::nonnegative || !(spec.alpha < 1.0)) {
    throw PreconditionError("this subcommand needs a nonnegative law with alpha < 1");
  }
}

struct Context {
  const ExperimentConfig& config;
  int threads;
  RunReport report;
  json results = json::object();

  void add_csv(std::string name, std::string content) {
    report.artifacts.push_back({std::move(name), std::move(content)});
  }
  void check(std::string name, bool pass, double value, double threshold) {
    report.assertions.push_back({std::move(name), pass, value, threshold});
  }
};

void run_law(Context& ctx) {
  const auto& c = ctx.config;
  const auto law = build_law(c.law, c.law_xmax);
  ctx.add_csv("law.csv", law_csv(law));
  CompensatedSum mass;
  for (double v : law.pmf()) mass.add(v);
  const double defect = std::fabs(mass.value() + law.truncated_mass() - 1.0);
  ctx.results["law_hash"] = hex64(law.hash());
  ctx.results["window"] = {law.xmin(), law.xmax()};
  ctx.results["truncated_upper"] = law.truncated_upper();
  ctx.results["truncated_lower"] = law.truncated_lower();
  ctx.results["mass_defect"] = defect;
  ctx.check("mass_conserved", defect <= 1e-12, defect, 1e-12);
  if (c.law.family == TailFamily::custom_table) return;

  const auto scale = build_norming(c.law);
  const auto grid = log_grid(c.x_min, c.x_max, c.points_per_decade);
  CsvWriter csv("x,survival,A,a_of_A");
  double worst = 0.0;
  std::vector<double> xs;
  for (auto x : grid) {
    const double xd = static_cast<double>(x);
    const double big_a = scale.A(xd);
    const double back = scale.a(big_a);
    worst = std::max(worst, std::fabs(back - xd) / xd);
    csv.row(x, law.tail(x), big_a, back);
    xs.push_back(xd);
  }
  ctx.add_csv("norming.csv", csv.text);
  const auto potter = potter_envelope(scale, 0.1, xs);
  ctx.results["norming_inverse_error"] = worst;
  ctx.results["potter"] = {{"eps", potter.eps},
                           {"constant", potter.constant},
                           {"pairs", potter.pairs},
                           {"violated", potter.violated}};
  ctx.check("norming_inverse", worst <= 1e-9, worst, 1e-9);
}

void run_renewal(Context& ctx) {
  const auto& c = ctx.config;
  const auto law = build_law(c.law, c.law_xmax);
  const auto g = renewal_fast(law, c.x_max);
  ctx.add_csv("renewal.csv", sequence_csv(g.g, 0, "g"));
  ctx.results["method"] = to_string(g.method);
  ctx.results["fell_back"] = g.fell_back;
  ctx.results["residual"] = g.residual;
  ctx.results["xmax"] = g.xmax();
  ctx.check("residual", g.residual <= 1e-8, g.residual, 1e-8);
}

void run_srt_scan(Context& ctx) {
  const auto& c = ctx.config;
  require_one_sided_regime(c.law);
  const auto law = build_law(c.law, c.law_xmax);
  const auto g = renewal_fast(law, c.x_max);
  const auto grid = log_grid(c.x_min, c.x_max, c.points_per_decade);
  const auto curve = srt_ratio(law, g, grid);
  const auto limit = limit_constant_srt(StableLaw::limit_of(c.law));
  CsvWriter csv("x,srt_ratio,relative_error");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    csv.row(grid[i], curve.values[i], std::fabs(curve.values[i] - limit.value) / limit.value);
  }
  ctx.add_csv("srt_ratio.csv", csv.text);

  std::vector<double> errors;
  json decades = json::array();
  for (auto x : decade_points(grid)) {
    const auto i = static_cast<std::size_t>(std::find(grid.begin(), grid.end(), x) - grid.begin());
    const double err = std::fabs(curve.values[i] - limit.value) / limit.value;
    errors.push_back(err);
    decades.push_back({{"x", x}, {"ratio", curve.values[i]}, {"relative_error", err}});
  }
  ctx.results["renewal"] = {{"method", to_string(g.method)}, {"residual", g.residual}};
  ctx.results["limit_constant"] = moment_json(limit);
  ctx.results["regime"] = c.law.alpha > 0.5 ? "supercritical" : "subcritical";
  ctx.results["decades"] = decades;
  ctx.results["trend"] = trend_json(curve.trend());
  ctx.check("oracle_routes_agree", limit.discrepancy <= 1e-6, limit.discrepancy, 1e-6);
  ctx.check("error_within_tolerance", errors.back() <= c.tolerance, errors.back(), c.tolerance);
  ctx.check("error_decreasing", strictly_decreasing(errors), errors.back(), errors.front());
}

void run_conditions(Context& ctx) {
  const auto& c = ctx.config;
  require_one_sided_regime(c.law);
  const auto law = build_law(c.law, c.law_xmax);
  const auto grid = log_grid(c.x_min, c.x_max, c.points_per_decade);
  const auto decades = decade_points(grid);

  const auto rz = check_rz(law, grid);
  ctx.add_csv("rz.csv", rz.csv("rz"));
  const auto rz_env = rz_envelope(law, grid);
  ctx.add_csv("rz_envelope.csv", rz_env.csv("rz_envelope"));
  const auto table = conv_table(law, c.n0, c.x_max);
  const auto r1 = check_r1(law, table, c.n0, grid);
  ctx.add_csv("r1.csv", r1.csv("r1"));

  const auto matrix = r3_matrix(law, c.deltas, decades);
  CsvWriter r3csv("delta,x,r3");
  for (std::size_t d = 0; d < matrix.deltas.size(); ++d) {
    for (std::size_t i = 0; i < matrix.xs.size(); ++i) {
      r3csv.row(matrix.deltas[d], matrix.xs[i], matrix.values[d][i]);
    }
  }
  ctx.add_csv("r3.csv", r3csv.text);

  const auto g = renewal_fast(law, c.x_max);
  const auto scale = build_norming(c.law);
  std::vector<std::pair<double, std::int64_t>> jobs;
  for (double delta : c.deltas) {
    for (auto x : decades) jobs.emplace_back(delta, x);
  }
  std::vector<SplitSum> parts(jobs.size());
  parallel_for(jobs.size(), ctx.threads, [&](std::size_t k) {
    parts[k] = split_sum(law, g, scale, jobs[k].first, jobs[k].second, c.n0);
  });
  CsvWriter split("delta,x,n_split,low,head,tail,total,additivity_error");
  double additivity = 0.0;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const auto& s = parts[k];
    split.row(jobs[k].first, jobs[k].second, s.n_split, s.low, s.head, s.tail, s.total,
              s.additivity_error);
    additivity = std::max(additivity, s.additivity_error);
  }
  ctx.add_csv("split.csv", split.text);

  if (c.law.family == TailFamily::spike_perturbed) {
    CsvWriter spikes("k,spike,midpoint,rz_spike,rz_midpoint,srt_spike,srt_midpoint");
    std::vector<std::int64_t> at;
    std::vector<std::int64_t> mid;
    for (int k = c.law.spike_first; (std::int64_t{3} << (k - 1)) <= c.x_max; ++k) {
      if ((std::int64_t{1} << k) < c.x_min / 2) continue;
      at.push_back(std::int64_t{1} << k);
      mid.push_back(std::int64_t{3} << (k - 1));
    }
    if (!at.empty()) {
      const auto rz_at = check_rz(law, at);
      const auto rz_mid = check_rz(law, mid);
      const auto srt_at = srt_ratio(law, g, at);
      const auto srt_mid = srt_ratio(law, g, mid);
      double min_rz = 1e300;
      double min_factor = 1e300;
      for (std::size_t i = 0; i < at.size(); ++i) {
        const int k = static_cast<int>(std::lround(std::log2(static_cast<double>(at[i]))));
        spikes.row(k, at[i], mid[i], rz_at.values[i], rz_mid.values[i], srt_at.values[i],
                   srt_mid.values[i]);
        if (i + 4 >= at.size()) {
          min_rz = std::min(min_rz, rz_at.values[i]);
          min_factor = std::min(min_factor, srt_at.values[i] / srt_mid.values[i]);
        }
      }
      ctx.add_csv("spikes.csv", spikes.text);
      ctx.results["spikes"] = {{"min_rz_last4", min_rz}, {"min_srt_factor_last4", min_factor}};
    }
  }

  ctx.results["rz_trend"] = trend_json(rz.trend());
  ctx.results["rz_envelope_trend"] = trend_json(rz_env.trend());
  ctx.results["r1_trend"] = trend_json(r1.trend());
  ctx.results["rz_out_of_class"] = rz.out_of_class;
  json x_trends = json::array();
  for (std::size_t d = 0; d < matrix.deltas.size(); ++d) {
    x_trends.push_back({{"delta", matrix.deltas[d]}, {"trend", trend_json(matrix.x_trends[d])}});
  }
  ctx.results["r3_x_trends"] = x_trends;
  ctx.results["r3_delta_trend"] = trend_json(matrix.delta_trend);
  ctx.results["split_additivity_error"] = additivity;
  ctx.check("rz_envelope_decreasing", rz_env.trend().decreasing, rz_env.trend().slope, -0.05);
  ctx.check("r3_decreasing_in_delta", matrix.delta_trend.decreasing, matrix.delta_trend.slope,
            -0.05);
  ctx.check("split_additivity", additivity <= 1e-9, additivity, 1e-9);
}

json surface_json(const LldSurface& s) {
  json rows = json::array();
  for (std::size_t i = 0; i < s.theta_trends.size(); ++i) rows.push_back(trend_json(s.theta_trends[i]));
  return json{{"sup", s.sup},
              {"sup_n", s.sup_n},
              {"sup_theta", s.sup_theta},
              {"max_slope", s.max_slope},
              {"flat", s.flat},
              {"theta_trends", rows}};
}

void run_lld_scan(Context& ctx) {
  const auto& c = ctx.config;
  const auto law = build_law(c.law, c.law_xmax);
  const auto scale = build_norming(c.law);
  const auto surfaces = lld_surfaces(law, scale, c.ns, c.thetas, c.lld_gamma);
  ctx.add_csv("lld_plain.csv", surfaces.plain.csv());
  ctx.results["plain"] = surface_json(surfaces.plain);
  const bool plain_ok = std::isfinite(surfaces.plain.sup) && surfaces.plain.flat;
  ctx.check("plain_surface_bounded", plain_ok, surfaces.plain.max_slope, 0.05);
  if (surfaces.truncated) {
    ctx.add_csv("lld_truncated.csv", surfaces.truncated->csv());
    ctx.results["gamma"] = surfaces.gamma;
    ctx.results["truncated"] = surface_json(*surfaces.truncated);
    const bool ok = std::isfinite(surfaces.truncated->sup) && surfaces.truncated->flat;
    ctx.check("truncated_surface_bounded", ok, surfaces.truncated->max_slope, 0.05);
  }
  if (c.gnedenko_n > 0) {
    const auto points =
        gnedenko_sanity(law, scale, StableLaw::limit_of(c.law), c.gnedenko_n, c.gnedenko_ys);
    CsvWriter csv("y,x,scaled,density,deviation,relative");
    double worst = 0.0;
    for (const auto& p : points) {
      csv.row(p.y, p.x, p.scaled, p.density, p.deviation, p.relative);
      worst = std::max(worst, p.relative);
    }
    ctx.add_csv("gnedenko.csv", csv.text);
    ctx.results["gnedenko"] = {{"n", c.gnedenko_n}, {"max_relative", worst}};
    ctx.check("gnedenko_within_5pct", worst <= 0.05, worst, 0.05);
  }
}

void run_tilt_check(Context& ctx) {
  const auto& c = ctx.config;
  const auto law = build_law(c.law, c.law_xmax);
  struct Job {
    int n;
    std::int64_t x;
    double gamma;
  };
  std::vector<Job> jobs;
  for (int n : c.tilt_ns) {
    for (auto x : c.tilt_xs) {
      for (double gamma : c.tilt_gammas) jobs.push_back({n, x, gamma});
    }
  }
  struct Outcome {
    bool evaluated = false;
    std::string lambda_source;
    TiltCheck check;
    MomentReport moments;
  };
  std::vector<Outcome> out(jobs.size());
  parallel_for(jobs.size(), ctx.threads, [&](std::size_t k) {
    const auto& j = jobs[k];
    std::optional<double> lambda;
    std::string source = "natural";
    const double nt = j.n * law.tail(j.x);
    if (!(nt > 0.0 && nt < 1.0)) {
      lambda = 2.0;
      source = "fixed";
    }
    TiltedLaw tilted;
    try {
      tilted = lambda ? tilt_with_lambda(law, j.n, j.x, j.gamma, *lambda)
                      : make_tilted(law, j.n, j.x, j.gamma);
    } catch (const DomainError&) {
      return;  // no mass on the truncated support
    }
    out[k].evaluated = true;
    out[k].lambda_source = source;
    out[k].check = tilt_identity_check(law, j.n, j.x, j.gamma, lambda);
    out[k].moments = tilted_moments(tilted);
  });

  CsvWriter csv(
      "n,x,gamma,lambda_source,lambda,direct,tilted,discrepancy,m1_scaled,m2_scaled,m3_scaled,"
      "variance_scaled,upper_ok,variance_lower_ok");
  double worst = 0.0;
  std::size_t evaluated = 0;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    if (!out[k].evaluated) continue;
    ++evaluated;
    const auto& o = out[k];
    csv.row(jobs[k].n, jobs[k].x, jobs[k].gamma, o.lambda_source, o.check.lambda, o.check.direct,
            o.check.tilted, o.check.discrepancy, o.moments.scaled[0], o.moments.scaled[1],
            o.moments.scaled[2], o.moments.variance_scaled, o.moments.upper_ok,
            o.moments.variance_lower_ok);
    worst = std::max(worst, o.check.discrepancy);
  }
  ctx.add_csv("tilt.csv", csv.text);
  ctx.results["combinations"] = jobs.size();
  ctx.results["evaluated"] = evaluated;
  ctx.results["max_discrepancy"] = worst;
  ctx.check("identity_holds", evaluated > 0 && worst <= 1e-10, worst, 1e-10);
}

void run_green(Context& ctx) {
  const auto& c = ctx.config;
  require_one_sided_regime(c.law);
  const auto law = build_law(c.law, c.law_xmax);
  const auto scale = build_norming(c.law);
  const auto stable = StableLaw::limit_of(c.law);
  const auto regime = regime_classifier(c.law.alpha, c.weights.beta);
  const auto grid = log_grid(c.x_min, c.x_max, c.points_per_decade);
  const auto decades = decade_points(grid);
  const auto g = renewal_fast(law, c.x_max);
  const auto gb = green_mass(law, c.weights, g, scale, stable, c.x_max, c.green_nmax);
  const auto ratio = green_ratio(law, c.weights, scale, gb, grid);

  std::optional<MomentEvaluation> limit;
  if (regime == Regime::unconditional) limit = limit_constant_green(stable, c.weights.beta);
  CsvWriter csv("x,g_b,B,green_ratio,tail_correction");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto x = static_cast<std::size_t>(grid[i]);
    csv.row(grid[i], gb.values[x], c.weights.B(scale, static_cast<double>(grid[i])),
            ratio.values[i], gb.correction.empty() ? 0.0 : gb.correction[x]);
  }
  ctx.add_csv("green.csv", csv.text);
  const auto g2 = check_g2(law, c.weights, scale, grid);
  ctx.add_csv("g2.csv", g2.csv("g2"));
  const auto g2_env = suffix_sup(grid, law.xmax(), [&](std::int64_t y) {
    const double yd = static_cast<double>(y);
    return yd * law.tail(y) * law.p(y) / c.weights.B(scale, yd);
  });
  ctx.add_csv("g2_envelope.csv", g2_env.csv("g2_envelope"));
  const auto omega = omega_curve(law, grid);
  ctx.add_csv("omega.csv", omega.csv("omega"));

  std::vector<double> g3(c.deltas.size() * decades.size());
  parallel_for(g3.size(), ctx.threads, [&](std::size_t k) {
    g3[k] = check_g3(law, c.weights, scale, c.deltas[k / decades.size()],
                     decades[k % decades.size()]);
  });
  CsvWriter g3csv("delta,x,g3");
  for (std::size_t k = 0; k < g3.size(); ++k) {
    g3csv.row(c.deltas[k / decades.size()], decades[k % decades.size()], g3[k]);
  }
  ctx.add_csv("g3.csv", g3csv.text);

  ctx.results["regime"] = to_string(regime);
  ctx.results["method"] = to_string(gb.method);
  ctx.results["horizon"] = gb.horizon;
  ctx.results["max_tail_correction"] = gb.max_correction;
  ctx.results["g2_trend"] = trend_json(g2.trend());
  ctx.results["g2_envelope_trend"] = trend_json(g2_env.trend());
  ctx.results["omega_trend"] = trend_json(omega.trend());
  ctx.results["ratio_trend"] = trend_json(ratio.trend());

  if (c.weights.b0() == 1.0) {
    double worst = 0.0;
    for (std::size_t x = 0; x < gb.values.size(); ++x) {
      worst = std::max(worst, std::fabs(gb.values[x] - g.g[x]));
    }
    ctx.results["max_difference_from_renewal"] = worst;
    ctx.check("matches_renewal", worst == 0.0, worst, 0.0);
  }
  if (limit) {
    std::vector<double> errors;
    json rows = json::array();
    for (auto x : decades) {
      const auto i = static_cast<std::size_t>(std::find(grid.begin(), grid.end(), x) - grid.begin());
      const double err = std::fabs(ratio.values[i] - limit->value) / limit->value;
      errors.push_back(err);
      rows.push_back({{"x", x}, {"ratio", ratio.values[i]}, {"relative_error", err}});
    }
    ctx.results["limit_constant"] = moment_json(*limit);
    ctx.results["decades"] = rows;
    ctx.check("oracle_routes_agree", limit->discrepancy <= 1e-6, limit->discrepancy, 1e-6);
    ctx.check("error_within_tolerance", errors.back() <= c.tolerance, errors.back(), c.tolerance);
    ctx.check("error_decreasing", strictly_decreasing(errors), errors.back(), errors.front());
  } else {
    ctx.check("g2_envelope_decreasing", g2_env.trend().decreasing, g2_env.trend().slope, -0.05);
  }
}

void run_oracle(Context& ctx) {
  const auto& c = ctx.config;
  const auto stable = StableLaw::limit_of(c.law);
  std::vector<double> ys(static_cast<std::size_t>(c.density_points));
  std::vector<double> fs(ys.size());
  const double lo = std::log(c.density_ymin);
  const double hi = std::log(c.density_ymax);
  parallel_for(ys.size(), ctx.threads, [&](std::size_t i) {
    const bool two_sided = c.law.support == SupportSign::centered_two_sided;
    const double t = static_cast<double>(i) / static_cast<double>(ys.size() - 1);
    const double mag = std::exp(lo + (hi - lo) * t);
    ys[i] = two_sided ? mag * (i % 2 == 0 ? 1.0 : -1.0) : mag;
    fs[i] = stable_density(stable, ys[i]);
  });
  CsvWriter density("y,density");
  for (std::size_t i = 0; i < ys.size(); ++i) density.row(ys[i], fs[i]);
  ctx.add_csv("density.csv", density.text);
  ctx.results["stable"] = {{"alpha", stable.alpha}, {"beta", stable.beta}, {"sigma", stable.sigma}};
  if (c.law.support != SupportSign::nonnegative || !(c.law.alpha < 1.0)) return;

  const auto samples = sample_positive_stable(stable, static_cast<std::size_t>(c.samples), c.seed);
  CsvWriter moments("s,value,laplace_route,density_route,discrepancy,sample_mean,standard_error");
  double worst_route = 0.0;
  double worst_z = 0.0;
  for (double s : c.moment_orders) {
    const auto m = negative_moment(stable, s);
    CompensatedSum sum;
    CompensatedSum sq;
    for (double y : samples) {
      const double v = std::pow(y, -s);
      sum.add(v);
      sq.add(v * v);
    }
    const double n = static_cast<double>(samples.size());
    const double mean = sum.value() / n;
    const double se = std::sqrt(std::max(0.0, sq.value() / n - mean * mean) / n);
    moments.row(s, m.value, m.laplace_route, m.density_route, m.discrepancy, mean, se);
    worst_route = std::max(worst_route, m.discrepancy);
    // Y^{-s} has finite variance only for -2s < α.
    if (se > 0.0 && -2.0 * s < stable.alpha) {
      worst_z = std::max(worst_z, std::fabs(mean - m.value) / se);
    }
  }
  ctx.add_csv("moments.csv", moments.text);
  const auto srt_constant = limit_constant_srt(stable);
  ctx.results["limit_constant_srt"] = moment_json(srt_constant);
  if (c.weights.beta > -2.0 && regime_classifier(stable.alpha, c.weights.beta) == Regime::unconditional) {
    ctx.results["limit_constant_green"] = moment_json(limit_constant_green(stable, c.weights.beta));
  }
  ctx.results["samples"] = c.samples;
  ctx.results["max_sample_z"] = worst_z;
  worst_route = std::max(worst_route, srt_constant.discrepancy);
  ctx.check("oracle_routes_agree", worst_route <= 1e-6, worst_route, 1e-6);
  ctx.check("sample_moments_within_4se", worst_z <= 4.0, worst_z, 4.0);
}

}  // namespace

void ExperimentConfig::validate() const {
  law.validate();
  weights.validate();
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  need(law_xmax >= 8, "law.xmax must be >= 8");
  need(density_ymin > 0.0 && density_ymax > density_ymin, "oracle density range is empty");
  need(density_points >= 2, "oracle.density_points must be >= 2");
  need(!moment_orders.empty(), "oracle.moment_orders must not be empty");
  need(samples >= 2, "oracle.samples must be >= 2");
  need(x_min >= 2 && x_max >= x_min, "grids need 2 <= x_min <= x_max");
  need(x_max <= law_xmax, "grids.x_max exceeds law.xmax");
  need(points_per_decade >= 1, "grids.points_per_decade must be >= 1");
  need(!deltas.empty(), "grids.deltas must not be empty");
  for (double d : deltas) need(d > 0.0 && d < 1.0, "grids.deltas must lie in (0,1)");
  need(!ns.empty(), "grids.ns must not be empty");
  for (int n : ns) need(n >= 1, "grids.ns must be >= 1");
  need(!thetas.empty(), "grids.thetas must not be empty");
  for (double t : thetas) need(t > 0.0, "grids.thetas must be positive");
  if (lld_gamma) need(*lld_gamma > 0.0, "grids.lld_gamma must be positive");
  need(!tilt_ns.empty() && !tilt_xs.empty() && !tilt_gammas.empty(), "tilt grids must not be empty");
  for (int n : tilt_ns) need(n >= 1, "grids.tilt_ns must be >= 1");
  for (auto x : tilt_xs) need(x >= 1 && x <= law_xmax, "grids.tilt_xs must lie in [1, law.xmax]");
  for (double g : tilt_gammas) need(g > 0.0, "grids.tilt_gammas must be positive");
  need(!gnedenko_ys.empty(), "grids.gnedenko_ys must not be empty");
  for (double y : gnedenko_ys) need(y > 0.0, "grids.gnedenko_ys must be positive");
  need(n0 >= 0, "horizons.n0 must be >= 0");
  need(green_nmax >= 1, "horizons.green_nmax must be >= 1");
  need(gnedenko_n >= 0, "horizons.gnedenko_n must be >= 0");
  need(!out.empty(), "run.out must not be empty");
  need(tolerance > 0.0, "run.tolerance must be positive");
}

ExperimentConfig parse_config(std::string_view text) {
  Sections sections;
  std::string current;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      current = trim(std::string_view(line).substr(1, line.size() - 2));
      static const char* const known[] = {"law", "oracle", "grids", "weights", "horizons", "run"};
      if (std::find(std::begin(known), std::end(known), current) == std::end(known)) {
        throw ConfigError(where + "unknown section [" + current + "]");
      }
      if (sections.contains(current)) throw ConfigError(where + "duplicate section [" + current + "]");
      sections[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (current.empty()) throw ConfigError(where + "key outside of a section");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "empty key");
    if (value.empty()) throw ConfigError(where + "empty value for '" + key + "'");
    if (!sections[current].emplace(key, value).second) {
      throw ConfigError(where + "duplicate key '" + key + "'");
    }
  }

  ExperimentConfig c;
  {
    auto it = sections.find("law");
    KeyValues law_kv = it == sections.end() ? KeyValues{} : it->second;
    if (it != sections.end()) sections.erase(it);
    if (auto x = law_kv.find("xmax"); x != law_kv.end()) {
      c.law_xmax = parse_int("xmax", x->second);
      law_kv.erase(x);
    }
    c.law = tail_spec_from(law_kv);
  }
  {
    SectionReader r(sections, "oracle");
    if (auto v = r.take("density_ymin")) c.density_ymin = parse_double("density_ymin", *v);
    if (auto v = r.take("density_ymax")) c.density_ymax = parse_double("density_ymax", *v);
    if (auto v = r.take("density_points")) c.density_points = parse_small_int("density_points", *v);
    if (auto v = r.take("moment_orders")) c.moment_orders = parse_doubles("moment_orders", *v);
    if (auto v = r.take("samples")) c.samples = parse_int("samples", *v);
    r.finish();
  }
  {
    SectionReader r(sections, "grids");
    if (auto v = r.take("x_min")) c.x_min = parse_int("x_min", *v);
    if (auto v = r.take("x_max")) c.x_max = parse_int("x_max", *v);
    if (auto v = r.take("points_per_decade")) {
      c.points_per_decade = parse_small_int("points_per_decade", *v);
    }
    if (auto v = r.take("deltas")) c.deltas = parse_doubles("deltas", *v);
    if (auto v = r.take("ns")) {
      c.ns.clear();
      for (auto n : parse_ints("ns", *v)) c.ns.push_back(parse_small_int("ns", std::to_string(n)));
    }
    if (auto v = r.take("thetas")) c.thetas = parse_doubles("thetas", *v);
    if (auto v = r.take("lld_gamma")) {
      c.lld_gamma = *v == "none" ? std::nullopt : std::optional(parse_double("lld_gamma", *v));
    }
    if (auto v = r.take("tilt_ns")) {
      c.tilt_ns.clear();
      for (auto n : parse_ints("tilt_ns", *v)) {
        c.tilt_ns.push_back(parse_small_int("tilt_ns", std::to_string(n)));
      }
    }
    if (auto v = r.take("tilt_xs")) c.tilt_xs = parse_ints("tilt_xs", *v);
    if (auto v = r.take("tilt_gammas")) c.tilt_gammas = parse_doubles("tilt_gammas", *v);
    if (auto v = r.take("gnedenko_ys")) c.gnedenko_ys = parse_doubles("gnedenko_ys", *v);
    r.finish();
  }
  {
    SectionReader r(sections, "weights");
    if (auto v = r.take("beta")) c.weights.beta = parse_double("beta", *v);
    if (auto v = r.take("beta_log")) c.weights.beta_log = parse_double("beta_log", *v);
    if (auto v = r.take("table")) c.weights.table = parse_doubles("table", *v);
    r.finish();
  }
  {
    SectionReader r(sections, "horizons");
    if (auto v = r.take("n0")) c.n0 = parse_small_int("n0", *v);
    if (auto v = r.take("green_nmax")) c.green_nmax = parse_small_int("green_nmax", *v);
    if (auto v = r.take("gnedenko_n")) c.gnedenko_n = parse_small_int("gnedenko_n", *v);
    r.finish();
  }
  {
    SectionReader r(sections, "run");
    if (auto v = r.take("seed")) {
      const auto s = parse_int("seed", *v);
      if (s < 0) throw ConfigError("seed must be >= 0");
      c.seed = static_cast<std::uint64_t>(s);
    }
    if (auto v = r.take("out")) c.out = *v;
    if (auto v = r.take("tolerance")) c.tolerance = parse_double("tolerance", *v);
    if (auto v = r.take("assert")) c.assertions = parse_bool("assert", *v);
    r.finish();
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  auto dbl = [](double v) { return format_double(v); };
  std::ostringstream o;
  o << "[law]\n";
  for (const auto& [k, v] : to_key_values(c.law)) o << k << " = " << v << "\n";
  o << "xmax = " << c.law_xmax << "\n\n";
  o << "[oracle]\n"
    << "density_ymin = " << dbl(c.density_ymin) << "\n"
    << "density_ymax = " << dbl(c.density_ymax) << "\n"
    << "density_points = " << c.density_points << "\n"
    << "moment_orders = " << join(c.moment_orders, dbl) << "\n"
    << "samples = " << c.samples << "\n\n";
  o << "[grids]\n"
    << "x_min = " << c.x_min << "\n"
    << "x_max = " << c.x_max << "\n"
    << "points_per_decade = " << c.points_per_decade << "\n"
    << "deltas = " << join(c.deltas, dbl) << "\n"
    << "ns = " << join(c.ns, [](int v) { return fmt_int(v); }) << "\n"
    << "thetas = " << join(c.thetas, dbl) << "\n"
    << "lld_gamma = " << (c.lld_gamma ? dbl(*c.lld_gamma) : std::string("none")) << "\n"
    << "tilt_ns = " << join(c.tilt_ns, [](int v) { return fmt_int(v); }) << "\n"
    << "tilt_xs = " << join(c.tilt_xs, fmt_int) << "\n"
    << "tilt_gammas = " << join(c.tilt_gammas, dbl) << "\n"
    << "gnedenko_ys = " << join(c.gnedenko_ys, dbl) << "\n\n";
  o << "[weights]\n"
    << "beta = " << dbl(c.weights.beta) << "\n"
    << "beta_log = " << dbl(c.weights.beta_log) << "\n";
  if (!c.weights.table.empty()) o << "table = " << join(c.weights.table, dbl) << "\n";
  o << "\n[horizons]\n"
    << "n0 = " << c.n0 << "\n"
    << "green_nmax = " << c.green_nmax << "\n"
    << "gnedenko_n = " << c.gnedenko_n << "\n\n";
  o << "[run]\n"
    << "seed = " << c.seed << "\n"
    << "out = " << c.out << "\n"
    << "tolerance = " << dbl(c.tolerance) << "\n"
    << "assert = " << (c.assertions ? "true" : "false") << "\n";
  return o.str();
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  return fnv1a(serialize_config(config));
}

bool RunReport::all_pass() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.pass; });
}

RunReport execute(const std::string& subcommand, const ExperimentConfig& config, int threads) {
  config.validate();
  static const std::map<std::string, void (*)(Context&)> table{
      {"law", run_law},           {"renewal", run_renewal},   {"srt-scan", run_srt_scan},
      {"conditions", run_conditions}, {"lld-scan", run_lld_scan}, {"tilt-check", run_tilt_check},
      {"green", run_green},       {"oracle", run_oracle}};
  const auto it = table.find(subcommand);
  if (it == table.end()) throw ConfigError("unknown subcommand '" + subcommand + "'");

  const auto start = std::chrono::steady_clock::now();
  Context ctx{config, std::max(1, threads), {}, json::object()};
  ctx.report.subcommand = subcommand;
  it->second(ctx);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json summary;
  summary["subcommand"] = subcommand;
  summary["config_hash"] = hex64(config_hash(config));
  summary["seed"] = config.seed;
  summary["versions"] = {{"srtlab", std::string(SRTLAB_VERSION)},
                         {"fftw", std::string(fftw_version)},
                         {"boost", std::string(BOOST_LIB_VERSION)},
                         {"compiler", std::string(__VERSION__)}};
  summary["config"] = serialize_config(config);
  summary["artifacts"] = json::array();
  for (const auto& a : ctx.report.artifacts) summary["artifacts"].push_back(a.name);
  summary["results"] = ctx.results;
  json checks = json::array();
  for (const auto& a : ctx.report.assertions) {
    checks.push_back({{"name", a.name}, {"pass", a.pass}, {"value", a.value}, {"threshold", a.threshold}});
  }
  summary["assertions"] = checks;
  summary["all_pass"] = ctx.report.all_pass();
  summary["threads"] = ctx.threads;
  summary["elapsed_seconds"] = seconds;
  ctx.report.artifacts.push_back({subcommand + "_summary.json", summary.dump(2) + "\n"});
  return std::move(ctx.report);
}

void write_artifacts(const RunReport& report, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigError("cannot create output directory '" + dir.string() + "'");
  }
  std::vector<fs::path> staged;
  try {
    for (const auto& a : report.artifacts) {
      const fs::path tmp = dir / ("." + a.name + ".partial");
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << a.content;
      out.close();
      if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
      staged.push_back(tmp);
    }
  } catch (...) {
    for (const auto& p : staged) fs::remove(p, ec);
    throw;
  }
  for (std::size_t i = 0; i < staged.size(); ++i) {
    fs::rename(staged[i], dir / report.artifacts[i].name);
  }
}

int threads_from_environment() {
  const char* v = std::getenv("SRTLAB_THREADS");
  if (v == nullptr || *v == '\0') return 1;
  const auto n = parse_int("SRTLAB_THREADS", v);
  if (n < 1 || n > 1024) throw ConfigError("SRTLAB_THREADS must lie in [1, 1024]");
  return static_cast<int>(n);
}

}  // namespace srt
