#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "srtlab/errors.hpp"
#include "srtlab/experiment.hpp"

using namespace srt;
namespace fs = std::filesystem;

namespace {

const char* const kSmall = R"(# small pure-power run
[law]
family = pure-power
alpha = 0.7
xmax = 20000

[oracle]
density_points = 16
samples = 20000

[grids]
x_min = 100
x_max = 10000
points_per_decade = 2
deltas = 0.2, 0.1
ns = 5,10
thetas = 2,4,8
tilt_ns = 2,4
tilt_xs = 16,64
tilt_gammas = 0.5,1

[weights]
beta = 1

[run]
seed = 7
)";

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("srtlab_test_" + name);
  fs::remove_all(dir);
  return dir;
}

fs::path write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream(path) << text;
  return path;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "srtlab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("config round trip") {
  const auto c = parse_config(kSmall);
  CHECK(c.law.alpha == 0.7);
  CHECK(c.law_xmax == 20000);
  CHECK(c.deltas == std::vector<double>{0.2, 0.1});
  CHECK(c.ns == std::vector<int>{5, 10});
  CHECK(c.seed == 7);
  CHECK(c.weights.beta == 1.0);
  const auto text = serialize_config(c);
  const auto again = parse_config(text);
  CHECK(serialize_config(again) == text);
  CHECK(config_hash(again) == config_hash(c));
  CHECK(again.thetas == c.thetas);
  CHECK(again.tilt_xs == c.tilt_xs);
  CHECK(again.lld_gamma == c.lld_gamma);

  auto other = c;
  other.seed = 8;
  CHECK(config_hash(other) != config_hash(c));

  ExperimentConfig awkward = c;
  awkward.deltas = {0.1 + 0.2, 1.0 / 3.0};
  awkward.lld_gamma.reset();
  awkward.weights.table = {1.5, 3.0, 4.5, 6.0};
  awkward.weights.beta = 1.0;
  const auto back = parse_config(serialize_config(awkward));
  CHECK(back.deltas == awkward.deltas);
  CHECK_FALSE(back.lld_gamma.has_value());
  CHECK(back.weights.table == awkward.weights.table);
}

TEST_CASE("config errors") {
  const std::string base = kSmall;
  auto bad = [&](const std::string& from, const std::string& to) {
    auto text = base;
    const auto pos = text.find(from);
    REQUIRE(pos != std::string::npos);
    text.replace(pos, from.size(), to);
    return text;
  };
  CHECK_THROWS_AS(parse_config(bad("seed = 7", "seeed = 7")), ConfigError);
  CHECK_THROWS_AS(parse_config(bad("[run]", "[runs]")), ConfigError);
  CHECK_THROWS_AS(parse_config(bad("seed = 7", "seed = 7\nseed = 8")), ConfigError);
  CHECK_THROWS_AS(parse_config(bad("seed = 7", "seed 7")), ConfigError);
  CHECK_THROWS_AS(parse_config(bad("alpha = 0.7", "alpha = 0.7x")), ConfigError);
  CHECK_THROWS_AS(parse_config(bad("alpha = 0.7", "alpha = 1.7")), ConfigError);
  CHECK_THROWS_AS(parse_config(bad("deltas = 0.2, 0.1", "deltas =")), ConfigError);
  CHECK_THROWS_AS(parse_config(bad("deltas = 0.2, 0.1", "deltas = 0.2,,0.1")), ConfigError);
  CHECK_THROWS_AS(parse_config(bad("deltas = 0.2, 0.1", "deltas = 1.2")), ConfigError);
  CHECK_THROWS_AS(parse_config(bad("x_max = 10000", "x_max = 30000")), ConfigError);
  CHECK_THROWS_AS(parse_config(bad("family = pure-power", "family = lognormal")), ConfigError);
  CHECK_THROWS_AS(parse_config(bad("beta = 1", "beta = -3")), ConfigError);
  CHECK_THROWS_AS(parse_config("alpha = 0.5\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/srtlab.conf"), ConfigError);
  CHECK_THROWS_AS(execute("bogus", parse_config(kSmall)), ConfigError);
}

TEST_CASE("subcommands produce self-describing artifacts") {
  const auto c = parse_config(kSmall);
  for (const auto& sub : subcommands()) {
    CAPTURE(sub);
    const auto report = execute(sub, c);
    REQUIRE(report.artifacts.size() >= 2);
    CHECK(report.all_pass());
    const auto& summary = report.artifacts.back();
    CHECK(summary.name == sub + "_summary.json");
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(c)));
    CHECK(summary.content.find(hash) != std::string::npos);
    for (std::size_t i = 0; i + 1 < report.artifacts.size(); ++i) {
      CHECK(report.artifacts[i].name.ends_with(".csv"));
      CHECK(report.artifacts[i].content.find('\n') != std::string::npos);
    }
  }
}

TEST_CASE("tilt-check reports the identity discrepancy") {
  const auto report = execute("tilt-check", parse_config(kSmall));
  REQUIRE(report.assertions.size() == 1);
  CHECK(report.assertions[0].name == "identity_holds");
  CHECK(report.assertions[0].value <= 1e-10);
  CHECK(report.artifacts[0].content.starts_with("n,x,gamma,lambda_source"));
}

TEST_CASE("srt-scan compares with the limit constant") {
  const auto report = execute("srt-scan", parse_config(kSmall));
  CHECK(report.artifacts[0].name == "srt_ratio.csv");
  CHECK(report.artifacts[0].content.starts_with("x,srt_ratio,relative_error\n100,"));
  CHECK(report.artifacts.back().content.find("\"limit_constant\"") != std::string::npos);
}

TEST_CASE("results do not depend on the thread count") {
  const auto c = parse_config(kSmall);
  for (const std::string sub : {"tilt-check", "green", "oracle", "conditions"}) {
    const auto one = execute(sub, c, 1);
    const auto four = execute(sub, c, 4);
    REQUIRE(one.artifacts.size() == four.artifacts.size());
    for (std::size_t i = 0; i + 1 < one.artifacts.size(); ++i) {
      CHECK(one.artifacts[i].content == four.artifacts[i].content);
    }
  }
}

TEST_CASE("seeded sampling is reproducible") {
  auto c = parse_config(kSmall);
  const auto a = execute("oracle", c);
  const auto b = execute("oracle", c);
  CHECK(a.artifacts[1].name == "moments.csv");
  CHECK(a.artifacts[1].content == b.artifacts[1].content);
  c.seed = 8;
  const auto d = execute("oracle", c);
  CHECK(a.artifacts[1].content != d.artifacts[1].content);
}

TEST_CASE("command line exit codes") {
  const auto dir = scratch("cli");
  const auto good = write_file(dir / "good.conf", kSmall);
  const auto out = dir / "out";

  CHECK(cli({"tilt-check", "--config", good.string(), "--out", out.string()}) == 0);
  CHECK(fs::exists(out / "tilt.csv"));
  CHECK(fs::exists(out / "tilt-check_summary.json"));
  const auto first = read_file(out / "tilt.csv");
  CHECK(cli({"tilt-check", "--config", good.string(), "--out", out.string()}) == 0);
  CHECK(read_file(out / "tilt.csv") == first);

  CHECK(cli({"oracle", "--config", good.string(), "--out", out.string(), "--seed", "99"}) == 0);
  CHECK(read_file(out / "oracle_summary.json").find("\"seed\": 99") != std::string::npos);

  std::string malformed = kSmall;
  malformed += "bogus_key = 1\n";
  const auto bad = write_file(dir / "bad.conf", malformed);
  const auto bad_out = dir / "bad_out";
  CHECK(cli({"law", "--config", bad.string(), "--out", bad_out.string()}) == 2);
  CHECK_FALSE(fs::exists(bad_out));

  CHECK(cli({"law", "--config", (dir / "missing.conf").string(), "--out", bad_out.string()}) == 2);
  CHECK(cli({"nonsense", "--config", good.string()}) == 2);
  CHECK(cli({"law"}) == 2);

  // Spikes break the smoothness condition, so its assertion fails.
  std::string spiky = kSmall;
  spiky.replace(spiky.find("family = pure-power"), 19, "family = spike-perturbed");
  spiky.replace(spiky.find("alpha = 0.7"), 11, "alpha = 0.3");
  spiky.replace(spiky.find("xmax = 20000"), 12, "xmax = 1100000");
  spiky.replace(spiky.find("x_min = 100"), 11, "x_min = 10000");
  spiky.replace(spiky.find("x_max = 10000"), 13, "x_max = 1000000");
  const auto spike = write_file(dir / "spike.conf", spiky);
  const auto spike_out = dir / "spike_out";
  CHECK(cli({"conditions", "--config", spike.string(), "--out", spike_out.string()}) == 1);
  CHECK(read_file(spike_out / "conditions_summary.json").find("\"all_pass\": false") != std::string::npos);
  CHECK(fs::exists(spike_out / "conditions_summary.json"));
  CHECK(cli({"conditions", "--config", spike.string(), "--out", spike_out.string(),
             "--no-assert"}) == 0);

  // Domain problems found during evaluation also exit 2 and write nothing.
  std::string sym = kSmall;
  sym.replace(sym.find("alpha = 0.7"), 11, "alpha = 1.5\nsupport = centered-two-sided");
  const auto two = write_file(dir / "two.conf", sym);
  const auto two_out = dir / "two_out";
  CHECK(cli({"srt-scan", "--config", two.string(), "--out", two_out.string()}) == 2);
  CHECK_FALSE(fs::exists(two_out));
  fs::remove_all(dir);
}

TEST_CASE("thread count from the environment") {
  ::setenv("SRTLAB_THREADS", "3", 1);
  CHECK(threads_from_environment() == 3);
  ::setenv("SRTLAB_THREADS", "three", 1);
  CHECK_THROWS_AS(threads_from_environment(), ConfigError);
  ::setenv("SRTLAB_THREADS", "0", 1);
  CHECK_THROWS_AS(threads_from_environment(), ConfigError);
  ::unsetenv("SRTLAB_THREADS");
  CHECK(threads_from_environment() == 1);
}
