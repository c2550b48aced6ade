#pragma once

// Config-driven experiment runner behind the `srtlab` command-line tool.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "srtlab/green_functions.hpp"
#include "srtlab/lattice_laws.hpp"

namespace srt {

/// Sections [law], [oracle], [grids], [weights], [horizons], [run].
/// The key set is documented in docs/config_schema.md.
struct ExperimentConfig {
  // [law]
  TailSpec law;
  std::int64_t law_xmax = 1 << 20;

  // [oracle]
  double density_ymin = 0.01;
  double density_ymax = 100.0;
  int density_points = 200;
  std::vector<double> moment_orders{1.0, 0.5, -0.1};  // s in E Y^{-s}
  std::int64_t samples = 200000;

  // [grids]
  std::int64_t x_min = 1000;
  std::int64_t x_max = 100000;
  int points_per_decade = 4;
  std::vector<double> deltas{0.2, 0.1, 0.05, 0.02};
  std::vector<int> ns{20, 40, 80, 160, 200};
  std::vector<double> thetas{5, 7.5, 10, 15, 20, 30, 40, 50};
  std::optional<double> lld_gamma = 0.5;
  std::vector<int> tilt_ns{2, 5, 10};
  std::vector<std::int64_t> tilt_xs{64, 256, 1024};
  std::vector<double> tilt_gammas{0.5, 1.0};
  std::vector<double> gnedenko_ys{0.5, 1.0, 2.0};

  // [weights]
  WeightSpec weights;

  // [horizons]
  int n0 = 10;
  int green_nmax = 2000;
  int gnedenko_n = 0;  // 0 disables the local limit comparison

  // [run]
  std::uint64_t seed = 1;
  std::string out = "results";
  double tolerance = 0.1;
  bool assertions = true;

  /// ConfigError when a grid is empty or a value is out of range.
  void validate() const;
};

/// Throws ConfigError with the offending line on malformed input, unknown
/// sections or keys, duplicates, and invalid values.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text form; parse_config(serialize_config(c)) reproduces c.
std::string serialize_config(const ExperimentConfig& config);

/// FNV-1a of the canonical text form.
std::uint64_t config_hash(const ExperimentConfig& config);

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{
      "law", "renewal", "srt-scan", "conditions", "lld-scan", "tilt-check", "green", "oracle"};
  return names;
}

struct Artifact {
  std::string name;
  std::string content;
};

struct Assertion {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
};

struct RunReport {
  std::string subcommand;
  std::vector<Artifact> artifacts;  // CSVs followed by <subcommand>_summary.json
  std::vector<Assertion> assertions;
  [[nodiscard]] bool all_pass() const;
};

/// Evaluates a subcommand entirely in memory. Errors propagate as exceptions.
/// `threads` parallelises independent grid points without changing results.
RunReport execute(const std::string& subcommand, const ExperimentConfig& config,
                  int threads = 1);

/// Writes every artifact under `dir`, each through a temporary file that is
/// renamed into place.
void write_artifacts(const RunReport& report, const std::filesystem::path& dir);

/// Thread count from SRTLAB_THREADS (default 1); ConfigError when malformed.
int threads_from_environment();

/// Full command-line entry point. Exit codes: 0 all assertions pass (or
/// --no-assert), 1 assertion failure, 2 usage, configuration or domain
/// error, 3 numerical or resource failure.
int run_cli(int argc, const char* const* argv);

}  // namespace srt
