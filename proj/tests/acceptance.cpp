// Runs the ten acceptance criteria and prints one PASS/FAIL line for each,
// preceded by the measured quantities. Exit status is 0 only if all pass.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "srtlab/convolution_engine.hpp"
#include "srtlab/errors.hpp"
#include "srtlab/experiment.hpp"
#include "srtlab/green_functions.hpp"
#include "srtlab/lattice_laws.hpp"
#include "srtlab/lld_tilting.hpp"
#include "srtlab/srt_conditions.hpp"
#include "srtlab/stable_oracle.hpp"
#include "srtlab/summation.hpp"

using namespace srt;

namespace {

using Clock = std::chrono::steady_clock;

TailSpec power(double alpha) {
  TailSpec s;
  s.family = TailFamily::pure_power;
  s.alpha = alpha;
  return s;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1. Tilt identity over a grid of at least 50 combinations.
Outcome tilt_identity() {
  const auto t0 = Clock::now();
  std::vector<TailSpec> specs;
  for (double a : {0.3, 0.4, 0.5, 0.7}) specs.push_back(power(a));
  TailSpec sym = power(1.5);
  sym.support = SupportSign::centered_two_sided;
  specs.push_back(sym);
  int count = 0;
  double worst = 0.0;
  for (const auto& spec : specs) {
    const auto law = build_law(spec, 8192);
    for (int n : {2, 4, 8}) {
      for (std::int64_t x : {256, 1024, 4096}) {
        for (double gamma : {0.5, 1.0}) {
          const double nt = n * law.tail(x);
          const std::optional<double> lambda =
              nt > 0.0 && nt < 1.0 ? std::nullopt : std::optional<double>(2.0);
          const auto c = tilt_identity_check(law, n, x, gamma, lambda);
          worst = std::max(worst, c.discrepancy);
          ++count;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  std::printf("  combinations=%d max_discrepancy=%.3e runtime=%.1fs (limit 120s)\n", count, worst,
              secs);
  return {count >= 50 && worst <= 1e-10 && secs <= 120.0,
          "max discrepancy " + fmt("%.2e", worst) + " over " + std::to_string(count) + " cases"};
}

std::vector<LatticeLaw> family_laws(std::int64_t xmax) {
  std::vector<LatticeLaw> laws;
  laws.push_back(build_law(power(0.7), xmax));
  TailSpec s;
  s.family = TailFamily::log_power;
  s.alpha = 0.5;
  s.log_exponent = 1.0;
  laws.push_back(build_law(s, xmax));
  s.family = TailFamily::boundary_half;
  laws.push_back(build_law(s, xmax));
  s = TailSpec{};
  s.family = TailFamily::oscillating;
  s.alpha = 0.6;
  s.osc_amplitude = 0.2;
  laws.push_back(build_law(s, xmax));
  s = TailSpec{};
  s.family = TailFamily::spike_perturbed;
  s.alpha = 0.3;
  laws.push_back(build_law(s, xmax));
  return laws;
}

// 2. Engine equivalence.
Outcome engine_equivalence() {
  const auto t0 = Clock::now();
  double worst_renewal = 0.0;
  for (const auto& law : family_laws(4096)) {
    const auto naive = renewal_naive(law, 4096);
    const auto fast = renewal_fast(law, 4096);
    double w = 0.0;
    for (std::size_t x = 0; x < naive.g.size(); ++x) w = std::max(w, std::fabs(naive.g[x] - fast.g[x]));
    std::printf("  %-16s renewal max|fast-naive|=%.3e\n", to_string(law.spec().family).c_str(), w);
    worst_renewal = std::max(worst_renewal, w);
  }
  const auto law = build_law(power(0.7), 4096);
  const auto table = conv_table(law, 3, 4096);
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::int64_t> pick(3, 4096);
  double worst_row = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto x = pick(rng);
    CompensatedSum brute;
    for (std::int64_t a = 1; a <= x; ++a) {
      for (std::int64_t b = 1; a + b < x; ++b) brute.add(law.p(a) * law.p(b) * law.p(x - a - b));
    }
    worst_row = std::max(worst_row, std::fabs(table.at(3, x) - brute.value()));
  }
  const double secs = seconds_since(t0);
  std::printf("  row n=3 vs enumeration at 20 x: max abs=%.3e runtime=%.1fs (limit 60s)\n",
              worst_row, secs);
  return {worst_renewal <= 1e-10 && worst_row <= 1e-14 && secs <= 60.0,
          "renewal " + fmt("%.2e", worst_renewal) + ", row " + fmt("%.2e", worst_row)};
}

struct SrtRun {
  std::vector<std::int64_t> xs;
  std::vector<double> ratio;
  std::vector<double> errors;
  MomentEvaluation limit;
};

SrtRun srt_run(const LatticeLaw& law, const RenewalSequence& g, const TailSpec& spec) {
  SrtRun r;
  r.xs = {10000, 100000, 1000000};
  r.ratio = srt_ratio(law, g, r.xs).values;
  r.limit = limit_constant_srt(StableLaw::limit_of(spec));
  for (double v : r.ratio) r.errors.push_back(std::fabs(v - r.limit.value) / r.limit.value);
  for (std::size_t i = 0; i < r.xs.size(); ++i) {
    std::printf("  x=%-8lld xF(x)g(x)=%.10f relative error=%.3e\n", static_cast<long long>(r.xs[i]),
                r.ratio[i], r.errors[i]);
  }
  std::printf("  limit constant %.12f (Laplace %.15g, density %.15g, discrepancy %.2e)\n",
              r.limit.value, r.limit.laplace_route, r.limit.density_route, r.limit.discrepancy);
  return r;
}

bool decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] < v[i - 1])) return false;
  }
  return true;
}

// 3. Supercritical SRT convergence. Keeps the renewal sequence for 9.
Outcome srt_supercritical(std::vector<double>& ratios_out, RenewalSequence& g_out) {
  const auto t0 = Clock::now();
  const auto spec = power(0.7);
  const auto law = build_law(spec, 1000000);
  g_out = renewal_fast(law, 1000000);
  const auto r = srt_run(law, g_out, spec);
  ratios_out = r.ratio;
  const double secs = seconds_since(t0);
  std::printf("  runtime=%.1fs (limit 300s)\n", secs);
  const bool ok = r.errors.back() <= 0.10 && decreasing(r.errors) && r.limit.discrepancy <= 1e-6 &&
                  secs <= 300.0;
  return {ok, "error at 1e6 " + fmt("%.3e", r.errors.back())};
}

// 4. Subcritical SRT convergence and the smoothness conditions.
Outcome srt_subcritical() {
  const auto spec = power(0.4);
  const auto law = build_law(spec, 1000000);
  const auto g = renewal_fast(law, 1000000);
  const auto r = srt_run(law, g, spec);
  std::vector<std::int64_t> grid;
  for (double e = 3.0; e <= 6.0 + 1e-9; e += 0.25) {
    grid.push_back(static_cast<std::int64_t>(std::llround(std::pow(10.0, e))));
  }
  const auto rz = check_rz(law, grid).trend();
  const std::vector<double> deltas{0.2, 0.1, 0.05, 0.02};
  const std::vector<std::int64_t> xs{1000, 10000, 100000, 1000000};
  const auto m = r3_matrix(law, deltas, xs);
  std::printf("  rz slope=%.4f decreasing=%d\n", rz.slope, rz.decreasing);
  for (std::size_t d = 0; d < deltas.size(); ++d) {
    std::printf("  r3(delta=%.2f, x=1e6)=%.6f\n", deltas[d], m.values[d].back());
  }
  std::printf("  r3 trend in 1/delta: slope=%.4f decreasing=%d\n", m.delta_trend.slope,
              m.delta_trend.decreasing);
  const bool ok = r.errors.back() <= 0.15 && decreasing(r.errors) && r.limit.discrepancy <= 1e-6 &&
                  rz.decreasing && m.delta_trend.decreasing;
  return {ok, "error at 1e6 " + fmt("%.3e", r.errors.back())};
}

// 5. Spike counterexample.
Outcome spike_counterexample() {
  TailSpec spec;
  spec.family = TailFamily::spike_perturbed;
  spec.alpha = 0.3;
  const std::int64_t horizon = 1600000;
  const auto law = build_law(spec, horizon);
  const auto g = renewal_fast(law, horizon);
  std::vector<std::int64_t> spikes;
  std::vector<std::int64_t> mids;
  for (int k = spec.spike_first; 3 * (std::int64_t{1} << k) / 2 <= horizon; ++k) {
    spikes.push_back(std::int64_t{1} << k);
    mids.push_back(3 * (std::int64_t{1} << k) / 2);
  }
  spikes.erase(spikes.begin(), spikes.end() - 4);
  mids.erase(mids.begin(), mids.end() - 4);
  const auto rz = check_rz(law, spikes);
  const auto at = srt_ratio(law, g, spikes);
  const auto between = srt_ratio(law, g, mids);
  double min_rz = 1e300;
  double min_factor = 1e300;
  for (std::size_t i = 0; i < spikes.size(); ++i) {
    const double factor = at.values[i] / between.values[i];
    std::printf("  spike x=%-8lld rz=%.6f srt=%.6f midpoint srt=%.6f factor=%.3f\n",
                static_cast<long long>(spikes[i]), rz.values[i], at.values[i], between.values[i],
                factor);
    min_rz = std::min(min_rz, rz.values[i]);
    min_factor = std::min(min_factor, factor);
  }
  // Bounded below: no decay of rz along the last spikes beyond a factor 2.
  const bool bounded = min_rz > 0.1 && rz.values.back() >= 0.5 * rz.values.front();
  return {bounded && min_factor >= 2.0,
          "min rz " + fmt("%.3f", min_rz) + ", min spike/midpoint factor " + fmt("%.3f", min_factor)};
}

// 6. Quantitative r3 value at alpha = 0.7.
Outcome r3_quantitative() {
  const auto law = build_law(power(0.7), 1000000);
  bool ok = true;
  std::string detail;
  for (double delta : {0.1, 0.2}) {
    const double v = r3_sum(law, delta, 1000000);
    const double target = std::pow(delta, 2.0 * (1.0 - 0.7));
    const double rel = std::fabs(v - target) / target;
    std::printf("  delta=%.1f r3=%.6f target delta^(2(1-a))=%.6f relative=%.3f delta^(2a)/2=%.6f\n",
                delta, v, target, rel, 0.5 * std::pow(delta, 1.4));
    ok = ok && rel <= 0.25;
    detail += (detail.empty() ? "" : ", ") + std::string("delta ") + fmt("%.1f", delta) +
              " relative " + fmt("%.3f", rel);
  }
  return {ok, detail};
}

// 7. LLD flatness for alpha in {0.4, 0.7}.
Outcome lld_flatness() {
  const auto t0 = Clock::now();
  const std::vector<int> ns{20, 40, 80, 160, 200};
  const std::vector<double> thetas{5, 7.5, 10, 15, 20, 30, 40, 50};
  bool ok = true;
  std::string detail;
  for (double alpha : {0.4, 0.7}) {
    const auto spec = power(alpha);
    const auto scale = build_norming(spec);
    const double reach = 50.0 * scale.a(200.0);
    const auto law = build_law(spec, static_cast<std::int64_t>(std::ceil(reach)) + 16);
    const auto s = lld_surfaces(law, scale, ns, thetas, 0.5);
    for (const LldSurface* surface : {&s.plain, &*s.truncated}) {
      const bool flat = std::isfinite(surface->sup) && surface->max_slope <= 0.05;
      std::printf("  alpha=%.1f %-9s sup=%.5f at (n=%d, theta=%g) max log-theta slope=%.4f\n", alpha,
                  surface == &s.plain ? "plain" : "truncated", surface->sup, surface->sup_n,
                  surface->sup_theta, surface->max_slope);
      ok = ok && flat;
    }
  }
  const double secs = seconds_since(t0);
  std::printf("  runtime=%.1fs (limit 600s)\n", secs);
  return {ok && secs <= 600.0, "runtime " + fmt("%.0f", secs) + "s"};
}

// 8. Local limit comparison at n = 10^4.
Outcome gnedenko() {
  const auto spec = power(0.7);
  const auto scale = build_norming(spec);
  const int n = 10000;
  const auto law = build_law(spec, static_cast<std::int64_t>(std::ceil(2.5 * scale.a(n))));
  const std::vector<double> ys{0.5, 1.0, 2.0};
  const auto pts = gnedenko_sanity(law, scale, StableLaw::limit_of(spec), n, ys);
  bool ok = true;
  double worst = 0.0;
  for (const auto& p : pts) {
    std::printf("  y=%.1f a_n P(S_n=x)=%.6e f(y)=%.6e abs dev=%.2e relative=%.4f\n", p.y, p.scaled,
                p.density, p.deviation, p.relative);
    ok = ok && p.relative <= 0.05;
    worst = std::max(worst, p.relative);
  }
  return {ok, "max relative " + fmt("%.4f", worst)};
}

// 9. Generalized Green function at beta = 1, and beta = 0 against criterion 3.
Outcome green(const std::vector<double>& srt_ratios, const RenewalSequence& g) {
  const auto spec = power(0.7);
  const auto law = build_law(spec, 1000000);
  const auto scale = build_norming(spec);
  const auto stable = StableLaw::limit_of(spec);
  WeightSpec w;
  w.beta = 1.0;
  const auto gb = green_mass(law, w, g, scale, stable, 1000000);
  const std::vector<std::int64_t> xs{10000, 100000, 1000000};
  const auto ratio = green_ratio(law, w, scale, gb, xs);
  const auto limit = limit_constant_green(stable, 1.0);
  std::vector<double> errors;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    errors.push_back(std::fabs(ratio.values[i] - limit.value) / limit.value);
    std::printf("  x=%-8lld xF(x)g_b(x)/B(x)=%.10f relative error=%.3e\n",
                static_cast<long long>(xs[i]), ratio.values[i], errors.back());
  }
  std::printf("  limit constant %.12f (discrepancy %.2e), method %s\n", limit.value,
              limit.discrepancy, to_string(gb.method).c_str());
  WeightSpec unit;
  const auto g0 = green_mass(law, unit, g, scale, stable, 1000000);
  const auto r0 = green_ratio(law, unit, scale, g0, xs);
  bool same = r0.values.size() == srt_ratios.size();
  for (std::size_t i = 0; same && i < r0.values.size(); ++i) same = r0.values[i] == srt_ratios[i];
  std::printf("  beta=0 ratios identical to the renewal ratios: %s\n", same ? "yes" : "no");
  return {errors.back() <= 0.15 && decreasing(errors) && same,
          "error at 1e6 " + fmt("%.3e", errors.back())};
}

// 10. Byte-identical CSVs on rerun.
Outcome determinism() {
  ExperimentConfig c;
  c.law = power(0.7);
  c.law_xmax = 200000;
  c.x_min = 1000;
  c.x_max = 100000;
  c.samples = 50000;
  c.seed = 17;
  const auto base = std::filesystem::temp_directory_path() / "srtlab_acceptance_determinism";
  std::filesystem::remove_all(base);
  std::size_t compared = 0;
  bool same = true;
  for (const std::string sub : {"srt-scan", "conditions", "tilt-check", "lld-scan", "green", "oracle"}) {
    const auto a = execute(sub, c, 1);
    const auto b = execute(sub, c, 4);
    write_artifacts(a, base / "a");
    write_artifacts(b, base / "b");
    for (const auto& art : a.artifacts) {
      if (!art.name.ends_with(".csv")) continue;
      auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
      };
      const bool eq = slurp(base / "a" / art.name) == slurp(base / "b" / art.name);
      if (!eq) std::printf("  differs: %s\n", art.name.c_str());
      same = same && eq;
      ++compared;
    }
  }
  std::filesystem::remove_all(base);
  std::printf("  compared %zu CSV files across two runs (1 and 4 threads)\n", compared);
  return {same && compared > 0, std::to_string(compared) + " files byte-identical"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  std::vector<double> srt_ratios;
  RenewalSequence g07;
  const std::vector<Criterion> criteria{
      {1, "tilt identity", tilt_identity},
      {2, "engine equivalence", engine_equivalence},
      {3, "SRT convergence, alpha=0.7", [&] { return srt_supercritical(srt_ratios, g07); }},
      {4, "SRT convergence and conditions, alpha=0.4", srt_subcritical},
      {5, "spike counterexample", spike_counterexample},
      {6, "r3 against delta^(2(1-alpha)), alpha=0.7", r3_quantitative},
      {7, "LLD surface flatness", lld_flatness},
      {8, "local limit comparison, n=1e4", gnedenko},
      {9, "generalized Green function, beta=1", [&] { return green(srt_ratios, g07); }},
      {10, "determinism", determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    std::printf("criterion %d: %s\n", c.id, c.name);
    std::fflush(stdout);
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
