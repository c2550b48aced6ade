#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "srtlab/errors.hpp"
#include "srtlab/srt_conditions.hpp"

using namespace srt;

namespace {

std::vector<std::int64_t> decades(std::int64_t lo, std::int64_t hi, int per_decade) {
  std::vector<std::int64_t> out;
  const double step = std::pow(10.0, 1.0 / per_decade);
  for (double x = static_cast<double>(lo); x <= static_cast<double>(hi) * 1.000001; x *= step) {
    const auto v = static_cast<std::int64_t>(std::llround(x));
    if (out.empty() || v > out.back()) out.push_back(v);
  }
  return out;
}

TailSpec spike_spec() {
  TailSpec s;
  s.family = TailFamily::spike_perturbed;
  s.alpha = 0.3;
  return s;
}

}  // namespace

TEST_CASE("trend statistic") {
  std::vector<double> x{1e3, 1e4, 1e5, 1e6};
  std::vector<double> down{1.0, 0.5, 0.25, 0.125};
  const auto t = fit_trend(x, down);
  CHECK(t.slope == doctest::Approx(std::log10(0.5)).epsilon(1e-12));
  CHECK(t.decreasing);
  CHECK(t.flat);
  std::vector<double> up{1.0, 2.0, 4.0, 8.0};
  CHECK_FALSE(fit_trend(x, up).decreasing);
  CHECK_FALSE(fit_trend(x, up).flat);
  std::vector<double> level{1.0, 1.0, 1.0, 1.0};
  CHECK_FALSE(fit_trend(x, level).decreasing);
  CHECK(fit_trend(x, level).flat);
  CHECK(fit_trend(x, level).oscillation == 1.0);
}

TEST_CASE("renewal ratio preconditions") {
  const auto det = testing::table_law({1.0}, 1, 64);
  const auto g = renewal_naive(det, 64);
  const std::vector<std::int64_t> xs{2, 4, 8};
  CHECK_THROWS_AS(srt_ratio(det, g, xs), PreconditionError);
  const auto law = build_law(testing::power_spec(0.7), 1000);
  const auto g2 = renewal_fast(law, 500);
  const std::vector<std::int64_t> far{10, 600};
  CHECK_THROWS_AS(srt_ratio(law, g2, far), RangeError);
  const std::vector<std::int64_t> unsorted{10, 5};
  CHECK_THROWS_AS(srt_ratio(law, g2, unsorted), DomainError);
}

TEST_CASE("renewal ratio approaches the limit constant for α=0.7") {
  const std::int64_t xmax = 100000;
  const auto law = build_law(testing::power_spec(0.7), xmax);
  const auto g = renewal_fast(law, xmax);
  const double c = limit_constant_srt(StableLaw::one_sided(0.7)).value;
  const std::vector<std::int64_t> xs{1000, 10000, 100000};
  const auto r = srt_ratio(law, g, xs);
  double prev = 1.0;
  for (double v : r.values) {
    const double err = std::fabs(v - c) / c;
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 0.02);
  const auto rz = check_rz(law, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(r.values[i] >= rz.values[i]);
}

TEST_CASE("rz curves") {
  const auto law = build_law(testing::power_spec(0.4), 100000);
  const auto xs = decades(1000, 100000, 4);
  const auto rz = check_rz(law, xs);
  CHECK_FALSE(rz.out_of_class);
  const auto t = rz.trend();
  CHECK(t.slope == doctest::Approx(-0.8).epsilon(0.02));
  CHECK(t.decreasing);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double x = static_cast<double>(xs[i]);
    CHECK(rz.values[i] == doctest::Approx(0.4 * std::pow(x, -0.8)).epsilon(0.01));
  }

  const auto finite = testing::table_law({0.5, 0.25, 0.25}, 1, 64);
  const std::vector<std::int64_t> small{1, 2, 5, 10};
  const auto f = check_rz(finite, small);
  CHECK(f.out_of_class);
  CHECK(f.values[2] == 0.0);
  CHECK(f.values[3] == 0.0);

  const auto spike = build_law(spike_spec(), 1 << 18);
  std::vector<std::int64_t> spikes;
  for (int k = 8; k <= 18; ++k) spikes.push_back(std::int64_t{1} << k);
  const auto s = check_rz(spike, spikes);
  for (double v : s.values) CHECK(v > 0.5);
  CHECK_FALSE(s.trend().decreasing);
}

TEST_CASE("r1 curves") {
  const auto law = build_law(testing::power_spec(0.4), 20000);
  const auto conv = conv_table(law, 5, 20000);
  const auto xs = decades(200, 20000, 4);
  const auto rz = check_rz(law, xs);
  const auto r1 = check_r1(law, conv, 1, xs);
  CHECK(r1.values == rz.values);
  const auto r5 = check_r1(law, conv, 5, xs);
  CHECK(r5.trend().slope == doctest::Approx(rz.trend().slope).epsilon(0.1));
  CHECK(r5.trend().decreasing);
  CHECK_THROWS_AS(check_r1(law, conv, 6, xs), RangeError);

  const auto spike = build_law(spike_spec(), 1 << 16);
  const auto sc = conv_table(spike, 3, 1 << 16);
  std::vector<std::int64_t> spikes;
  for (int k = 8; k <= 16; ++k) spikes.push_back(std::int64_t{1} << k);
  for (double v : check_r1(spike, sc, 3, spikes).values) CHECK(v > 0.5);
}

TEST_CASE("r3 sums") {
  const auto law = build_law(testing::power_spec(0.4), 1000000);
  CHECK(r3_sum(law, 0.1, 5) == 0.0);
  double prev = 0.0;
  for (double d : {0.02, 0.05, 0.1, 0.2, 0.5}) {
    const double v = r3_sum(law, d, 100000);
    CHECK(v >= prev);
    prev = v;
  }
  const double v = r3_sum(law, 0.1, 1000000);
  CHECK(v == doctest::Approx(0.5 * std::pow(0.1, 0.8)).epsilon(0.3));
  CHECK_THROWS_AS(r3_sum(law, 1.5, 100), DomainError);
  CHECK_THROWS_AS(r3_sum(law, 0.1, 2000000), RangeError);

  const auto scale = build_norming(testing::power_spec(0.4));
  CHECK(r3_companion(law, scale, 0.1, 100000) ==
        doctest::Approx(r3_sum(law, 0.1, 100000)).epsilon(1e-12));

  // A custom table whose tail is only asymptotically x^{-1/2}.
  std::vector<double> pmf(4000);
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    const double x = static_cast<double>(i + 1);
    const double step = 1.0 / std::sqrt(x) - 1.0 / std::sqrt(x + 1.0);
    pmf[i] = 0.8 * step * (i % 3 == 0 ? 1.2 : 0.9);
  }
  TailSpec custom;
  custom.family = TailFamily::custom_table;
  custom.alpha = 0.5;
  custom.table = pmf;
  custom.table_xmin = 1;
  const auto claw = build_law(custom, 4000);
  const auto cscale = build_norming(custom);
  for (std::int64_t x : {400, 4000}) {
    const double ratio = r3_companion(claw, cscale, 0.2, x) / r3_sum(claw, 0.2, x);
    CHECK(ratio == doctest::Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("r3 matrix for α=0.4") {
  const auto law = build_law(testing::power_spec(0.4), 1000000);
  const std::vector<double> deltas{0.2, 0.1, 0.05, 0.02};
  const std::vector<std::int64_t> xs{1000, 10000, 100000, 1000000};
  const auto m = r3_matrix(law, deltas, xs);
  REQUIRE(m.values.size() == 4);
  REQUIRE(m.x_trends.size() == 4);
  CHECK(m.delta_trend.decreasing);
  CHECK(m.delta_trend.slope == doctest::Approx(-0.8).epsilon(0.1));
  for (std::size_t j = 0; j < xs.size(); ++j) {
    for (std::size_t i = 1; i < deltas.size(); ++i) CHECK(m.values[i][j] <= m.values[i - 1][j]);
  }
}

TEST_CASE("split sums") {
  const std::int64_t x = 100000;
  const auto spec = testing::power_spec(0.7);
  const auto law = build_law(spec, x);
  const auto g = renewal_fast(law, x);
  const auto scale = build_norming(spec);
  const auto stable = StableLaw::one_sided(0.7);
  const std::vector<std::int64_t> xs{x};
  const double ratio = srt_ratio(law, g, xs).values[0];
  for (double d : {0.2, 0.1, 0.05}) {
    const auto s = split_sum(law, g, scale, d, x);
    CHECK(s.additivity_error < 1e-9);
    CHECK(std::fabs(s.low + s.head + s.tail - ratio) / ratio < 1e-9);
    CHECK(s.low >= 0.0);
    CHECK(s.head >= 0.0);
  }
  const auto s = split_sum(law, g, scale, 0.1, x);
  CHECK(s.tail == doctest::Approx(split_tail_limit(stable, 0.1)).epsilon(0.1));
  CHECK_THROWS_AS(split_sum(law, g, scale, 0.1, x + 1), RangeError);

  // Along spikes the near part keeps its size as δ shrinks.
  const std::int64_t xk = std::int64_t{1} << 18;
  const auto spike = build_law(spike_spec(), xk);
  const auto sg = renewal_fast(spike, xk);
  const auto sscale = build_norming(spike_spec());
  for (double d : {0.2, 0.1, 0.05, 0.02}) {
    const auto part = split_sum(spike, sg, sscale, d, xk, 0);
    CHECK(part.head > 0.5);
    CHECK(part.additivity_error < 1e-9);
  }
}

TEST_CASE("suffix supremum envelopes") {
  const std::vector<std::int64_t> grid{2, 4, 6};
  const auto env = suffix_sup(grid, 6, [](std::int64_t y) { return y == 3 ? 10.0 : 1.0 / y; });
  CHECK(env.values == std::vector<double>{10.0, 0.25, 1.0 / 6.0});
  const auto longer = suffix_sup(grid, 8, [](std::int64_t y) { return y == 8 ? 5.0 : 0.0; });
  CHECK(longer.values == std::vector<double>{5.0, 5.0, 5.0});
  CHECK_THROWS_AS(suffix_sup(grid, 5, [](std::int64_t) { return 0.0; }), DomainError);
  const std::vector<std::int64_t> unsorted{4, 2};
  CHECK_THROWS_AS(suffix_sup(unsorted, 4, [](std::int64_t) { return 0.0; }), DomainError);

  const auto law = build_law(testing::power_spec(0.4), 100000);
  const auto xs = decades(100, 100000, 4);
  const auto rz = check_rz(law, xs);
  const auto env_pp = rz_envelope(law, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(env_pp.values[i] >= rz.values[i]);
    CHECK(env_pp.values[i] == doctest::Approx(rz.values[i]).epsilon(1e-2));
  }
  CHECK(env_pp.trend().decreasing);

  // Sampled between spikes rz looks vanishing; the envelope sees the spikes.
  const auto spiky = build_law(spike_spec(), (1 << 18) + 1000);
  std::vector<std::int64_t> between;
  for (int k = 8; k <= 17; ++k) between.push_back((std::int64_t{3} << k) / 2);
  CHECK(check_rz(spiky, between).trend().decreasing);
  const auto spike_env = rz_envelope(spiky, between);
  CHECK_FALSE(spike_env.trend().decreasing);
  for (double v : spike_env.values) CHECK(v > 0.5);
}
