#include <CLI11.hpp>

#include <iostream>

#include "srtlab/errors.hpp"
#include "srtlab/experiment.hpp"

namespace srt {

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Strong renewal theorem laboratory"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  bool assertions = true;
  bool assertions_set = false;
  app.add_option("--config", config_path, "Experiment configuration file")->required();
  app.add_option("--out", out_dir, "Output directory (overrides run.out)");
  app.add_option("--seed", seed, "Random seed (overrides run.seed)")->check(CLI::NonNegativeNumber);
  app.add_flag_callback("--assert", [&] { assertions = true; assertions_set = true; },
                        "Exit 1 when an assertion fails (default)");
  app.add_flag_callback("--no-assert", [&] { assertions = false; assertions_set = true; },
                        "Report assertions without affecting the exit status");
  app.fallthrough();
  for (const auto& name : subcommands()) app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  try {
    auto config = load_config(config_path);
    if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
    if (!out_dir.empty()) config.out = out_dir;
    if (assertions_set) config.assertions = assertions;
    const int threads = threads_from_environment();
    const auto report = execute(sub, config, threads);
    write_artifacts(report, config.out);
    for (const auto& a : report.assertions) {
      std::cout << (a.pass ? "PASS " : "FAIL ") << a.name << " value=" << format_double(a.value)
                << " threshold=" << format_double(a.threshold) << "\n";
    }
    std::cout << "wrote " << report.artifacts.size() << " artifacts to " << config.out << "\n";
    return (config.assertions && !report.all_pass()) ? 1 : 0;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const ResourceError& e) {
    std::cerr << "resource error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace srt
