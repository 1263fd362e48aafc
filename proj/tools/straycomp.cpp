#include <chrono>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "straycomp/scenario.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;
constexpr int kSafetyNet = 3;

int run(const std::string& scenario, const std::string& config_path, std::optional<std::uint64_t> seed,
        const std::string& out_dir) {
  using namespace straycomp;
  Config cfg = config_path.empty() ? Config{} : Config::load(config_path);
  const auto start = std::chrono::steady_clock::now();
  const ScenarioOutput out = run_scenario(scenario, cfg, seed);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_outputs(out, out_dir);

  std::cout << out.summary_text();
  std::printf("\nwall_time_s = %.3f\n", wall);
  if (out.forbid_safety_net && out.safety_net_events > 0) {
    std::cerr << "straycomp: safety net fired " << out.safety_net_events << " time(s) in " << scenario
              << ", which forbids it\n";
    return kSafetyNet;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stray-field compensation scenarios on a simulated ion trap"};
  app.set_version_flag("--version", straycomp::kVersion);

  std::string command, target, config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::string names;
  for (const auto& n : straycomp::scenario_names()) names += "\n  " + n;
  app.add_option("command", command, "scenario name, or 'summarize'" + names)->required();
  app.add_option("dir", target, "output directory to summarize");
  app.add_option("--config", config_path, "INI config or a previous manifest.ini")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "RNG seed; overrides [run] seed");
  app.add_option("--out", out_dir, "output directory");
  CLI11_PARSE(app, argc, argv);

  try {
    if (command == "summarize") {
      if (target.empty()) throw straycomp::ConfigError("summarize needs an output directory");
      std::cout << straycomp::summarize(target).to_ini();
      return kOk;
    }
    if (!target.empty()) throw straycomp::ConfigError("unexpected argument '" + target + "'");
    if (out_dir.empty()) throw straycomp::ConfigError("--out is required");
    return run(command, config_path, seed, out_dir);
  } catch (const straycomp::ConfigError& e) {
    std::cerr << "straycomp: config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "straycomp: " << e.what() << "\n";
    return kFailure;
  }
}
