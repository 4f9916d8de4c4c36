// Command-line experiment runner.
//
//   sim sweep-snr   --snr 0:30:5 --trials 200 --out results/snr.csv
//   sim sweep-users --users 8,16,32,48 --snr 10 --out results/users.csv
//   sim convergence --iters 20 --snr 10 --out results/conv.csv
//   sim fairness    --rmin 1 --snr 20 --out results/fair.csv

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bsnoma/harness.hpp"

int main(int argc, char** argv) {
  using namespace bsnoma;

  CLI::App app{"Beamspace MIMO-NOMA link-level simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<std::string> snr;
  std::optional<std::string> users;
  std::optional<std::string> schemes;
  std::optional<std::string> variant;
  std::optional<double> rmin;
  std::optional<int> iters;
  std::optional<std::string> out;
  std::optional<int> antennas;
  std::optional<int> workers;

  for (const char* name : {"sweep-snr", "sweep-users", "convergence", "fairness"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--trials", trials, "Monte Carlo trials per sweep point");
    sub->add_option("--snr", snr, "start:stop:step in dB, or a single value");
    sub->add_option("--users", users, "user count, or comma list for sweep-users");
    sub->add_option("--schemes", schemes, "comma list of noma,oma,beamspace_mimo,fully_digital or 'all'");
    sub->add_option("--variant", variant, "equivalent channel: strongest | svd");
    sub->add_option("--rmin", rmin, "per-user minimum rate in bps/Hz");
    sub->add_option("--iters", iters, "power allocation iteration cap");
    sub->add_option("--out", out, "CSV output path; summary goes next to it as .json");
    sub->add_option("--antennas", antennas, "array size N");
    sub->add_option("--workers", workers, "worker threads (0 = all cores)");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const auto* chosen = app.get_subcommands().front();
    const SweepMode mode = parse_sweep_mode(chosen->get_name());

    SystemConfig config;
    if (!config_path.empty()) config = load_config_file(config_path, config);
    if (seed) config.seed = *seed;
    if (trials) config.trials = *trials;
    if (snr) parse_snr_range(*snr, config);
    if (users) {
      const auto list = parse_int_list(*users);
      if (mode == SweepMode::users) config.user_sweep = list;
      else config.users = list.front();
    }
    if (schemes) config.schemes = parse_scheme_list(*schemes);
    if (variant) config.variant = parse_equivalent_kind(*variant);
    if (rmin) config.min_rate = *rmin;
    if (iters) config.max_iterations = *iters;
    if (out) config.output = *out;
    if (antennas) config.antennas = *antennas;
    if (workers) config.workers = *workers;
    if (mode == SweepMode::fairness && !rmin && config.min_rate == 0.0) config.min_rate = 1.0;

    const SweepResult result = run_and_write(config, mode);
    const OutputPaths paths = output_paths(config.output, mode);
    for (const auto& c : result.cells) {
      std::cout << "K=" << c.users << " snr=" << c.snr_db << "dB " << to_string(c.scheme) << ": SE " << c.mean_se << " +- "
                << c.stderr_se << " bps/Hz, EE " << c.mean_ee << " bps/Hz/W (" << c.trials - c.dropped << "/" << c.trials
                << " trials)\n";
    }
    std::cout << "wrote " << paths.csv << " and " << paths.json;
    if (!paths.extra.empty()) std::cout << " and " << paths.extra;
    std::cout << '\n';
  } catch (const std::exception& e) {
    std::cerr << "sim: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
