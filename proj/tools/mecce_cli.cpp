#include "mecce/acceptance.hpp"
#include "mecce/experiment.hpp"
#include "mecce/parallel.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

constexpr int kConfigExit = 2;
constexpr int kSolverExit = 1;

mecce::ExperimentConfig load(const std::string& path, const std::optional<std::uint64_t>& seed) {
  auto config = mecce::load_config(path);
  if (seed) config.seeds = {*seed};
  return config;
}

std::filesystem::path out_dir(const mecce::ExperimentConfig& config, const std::string& flag) {
  return flag.empty() ? std::filesystem::path(config.out_dir) : std::filesystem::path(flag);
}

std::vector<double> parse_values(const std::string& list) {
  std::vector<double> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (item.empty() || used != item.size()) throw mecce::ConfigError("--values", "'" + item + "' is not a number");
    out.push_back(v);
  }
  return out;
}

void progress(const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mecce: master-equation cluster-correlation expansion for central-spin decoherence"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  std::string out;
  std::optional<std::uint64_t> seed;
  app.add_option("--threads", threads, "worker threads (default: all cores)");
  app.add_option("--out", out, "output directory (default: output.directory of the config)");
  app.add_option("--seed", seed, "run only this seed");

  std::string config_path;
  auto* run = app.add_subcommand("run", "run every seed of a config");
  run->add_option("config", config_path, "config file (JSON)")->required();

  auto* verify = app.add_subcommand("verify", "run the built-in acceptance checks");
  std::vector<int> only, corrupt;
  verify->add_option("--only", only, "check ids to run")->check(CLI::Range(1, 11));
  verify->add_option("--corrupt", corrupt, "replace these checks' tolerances with unattainable ones")->check(CLI::Range(1, 11));

  auto* sweep = app.add_subcommand("sweep", "one run per parameter value");
  std::string param, values;
  sweep->add_option("config", config_path, "config file (JSON)")->required();
  sweep->add_option("--param", param, "gamma | depth | p | order")->required();
  sweep->add_option("--values", values, "comma separated values")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kConfigExit;
  }
  if (threads == 0) threads = mecce::default_thread_count();

  try {
    if (*run) {
      const auto config = load(config_path, seed);
      const auto dir = out_dir(config, out);
      mecce::run_experiment(config, dir, threads, progress);
      std::printf("wrote %s (config %s)\n", dir.string().c_str(), mecce::config_hash(config).c_str());
    } else if (*sweep) {
      const auto config = load(config_path, seed);
      const auto dir = out_dir(config, out);
      mecce::run_sweep(config, param, parse_values(values), dir, threads, progress);
      std::printf("wrote %s (config %s)\n", dir.string().c_str(), mecce::config_hash(config).c_str());
    } else {
      mecce::acceptance::Settings settings;
      settings.threads = threads;
      settings.only.insert(only.begin(), only.end());
      settings.corrupt.insert(corrupt.begin(), corrupt.end());
      mecce::acceptance::Suite suite(settings);
      int failed = 0;
      for (const auto& r : suite.run([](const mecce::acceptance::CheckResult& r) {
             std::printf("%s\n", mecce::acceptance::Suite::line(r).c_str());
             std::fflush(stdout);
             std::fprintf(stderr, "  (%.1f s of %.0f s)\n", r.seconds, r.budget_seconds);
           })) {
        if (!r.passed) ++failed;
      }
      return failed == 0 ? 0 : 1;
    }
  } catch (const mecce::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigExit;
  } catch (const mecce::SolverFailure& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kSolverExit;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kSolverExit;
  }
  return 0;
}
