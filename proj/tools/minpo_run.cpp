// Command-line driver: one experiment run per invocation.
#include <malloc.h>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "minpo/expcli/run.hpp"

using namespace minpo::expcli;

int main(int argc, char** argv) {
  // Keep freed tape buffers in the heap instead of returning them to the OS every evaluation.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"Runs one integro-differential experiment and writes CSV metrics."};
  std::string config_path;
  app.add_option("--config", config_path, "key=value file; flags given on the command line override it");
  std::map<std::string, std::string> values;
  for (const auto& key : option_keys()) {
    if (key == "width-ladder") continue;
    const std::string flag = key == "A" ? "-A" : "--" + key;
    app.add_option(flag, values[key], "see README");
  }
  bool ladder = false;
  app.add_flag("--width-ladder", ladder, "choose the hidden width so the parameter count tracks n-res");
  bool dry_run = false;
  app.add_flag("--dry-run", dry_run, "print the resolved configuration and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  RunConfig config;
  try {
    if (!config_path.empty()) apply_config_file(config, config_path);
    for (const auto& key : option_keys()) {
      if (key == "width-ladder") continue;
      const std::string flag = key == "A" ? "-A" : "--" + key;
      if (app.count(flag) > 0) set_option(config, key, values[key]);
    }
    if (app.count("--width-ladder") > 0) config.width_ladder = ladder;
    config = resolve(config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  if (dry_run) {
    std::cout << describe(config);
    return 0;
  }

  try {
    const RunRecord rec = run_experiment(config);
    emit_metrics(rec, config.out);
    std::printf("%s %s seed=%llu e_u=%.4e e_M=%.4e", minpo::core::to_string(config.experiment).c_str(),
                to_string(config.method).c_str(), static_cast<unsigned long long>(config.seed), rec.e_u, rec.e_m);
    if (!std::isnan(rec.e_kappa)) std::printf(" kappa=%.8f e_kappa=%.4e", rec.kappa_estimate, rec.e_kappa);
    std::printf(" wall=%.1fs\n", rec.wall_seconds);
    if (rec.diverged) {
      std::cerr << rec.message << "\n";
      return 2;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
