#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "bsnoma/baselines.hpp"
#include "bsnoma/beam_selection.hpp"
#include "bsnoma/channel_model.hpp"
#include "bsnoma/power_allocation.hpp"
#include "bsnoma/precoding.hpp"
#include "bsnoma/rate_metrics.hpp"

namespace bsnoma {

enum class SweepMode { snr, users, convergence, fairness };

std::string_view to_string(SweepMode mode);
/// "sweep-snr", "sweep-users", "convergence", "fairness"
SweepMode parse_sweep_mode(std::string_view text);

struct SystemConfig {
  int antennas = 256;
  int users = 32;
  std::vector<int> user_sweep;  // sweep-users points; empty means {users}
  int nlos_paths = 2;
  double total_power_mw = 32.0;
  double los_variance = 1.0;
  double nlos_variance = 0.1;
  double snr_start_db = 0.0;
  double snr_stop_db = 30.0;
  double snr_step_db = 5.0;
  int trials = 200;
  std::uint64_t seed = 1;
  int max_iterations = 20;
  double min_rate = 0.0;
  PowerModel power_model;
  std::vector<Scheme> schemes{Scheme::noma, Scheme::oma, Scheme::beamspace_mimo, Scheme::fully_digital};
  EquivalentKind variant = EquivalentKind::strongest;
  bool snr_per_user = true;  // noise from P / users, not from P; users is the nominal K even in a K sweep
  std::string output = "results.csv";
  int workers = 0;  // 0 = hardware concurrency

  std::vector<double> snr_points() const;
  std::vector<int> user_points() const;
  ChannelParams channel_params(int user_count) const;
  OptimizerConfig optimizer() const;
  LinkBudget budget(double snr_db) const;
  void validate() const;
};

/// Sets one field from its config-file key. Unknown keys and malformed
/// values throw std::invalid_argument.
void apply_config_entry(SystemConfig& config, std::string_view key, std::string_view value);

/// Flat "key = value" lines; '#' starts a comment. Values override `base`.
SystemConfig parse_config(std::istream& in, SystemConfig base = {});
SystemConfig load_config_file(const std::string& path, SystemConfig base = {});

/// "start:stop:step", or a single value.
void parse_snr_range(std::string_view text, SystemConfig& config);
std::vector<int> parse_int_list(std::string_view text);
std::vector<Scheme> parse_scheme_list(std::string_view text);

/// Beam selection, grouping, precoding and the one-shot SIC-order repair
/// shared by the NOMA and OMA pipelines.
struct NomaSetup {
  BeamAssignment assignment;
  BeamGrouping grouping;
  Precoder precoder;
  bool reordered = false;
};

NomaSetup prepare_noma(const BeamspaceChannel& beamspace, EquivalentKind variant);

struct ExperimentRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  double snr_db = 0.0;
  Scheme scheme = Scheme::noma;
  EquivalentKind variant = EquivalentKind::strongest;
  bool uses_variant = true;
  int users = 0;
  int rf_chains = 0;
  double sum_rate = 0.0;
  double energy_efficiency = 0.0;
  bool dropped = false;
  std::string drop_reason;
  std::uint64_t realization_hash = 0;
  bool feasible = true;
  std::vector<double> trace;       // NOMA only
  std::vector<double> user_rates;  // by original user index
};

/// One channel realization shared by every scheme and SNR point of the trial.
std::vector<ExperimentRecord> run_trial(const SystemConfig& config, int trial_index, int user_count,
                                        const LensMatrix& lens, SweepMode mode = SweepMode::snr);

struct SummaryCell {
  int users = 0;
  double snr_db = 0.0;
  Scheme scheme = Scheme::noma;
  double mean_se = 0.0;
  double stderr_se = 0.0;
  double mean_ee = 0.0;
  double stderr_ee = 0.0;
  int trials = 0;  // records in the cell, dropped included
  int dropped = 0;
};

struct TraceSummary {
  std::vector<double> mean;  // per iteration, length max_iterations
  std::vector<double> stderr_;
  int trials = 0;
};

struct SweepResult {
  SweepMode mode = SweepMode::snr;
  std::vector<ExperimentRecord> records;  // ordered by (users, trial, snr, scheme)
  std::vector<SummaryCell> cells;         // ordered by (users, snr, scheme)
  TraceSummary trace;                     // convergence mode
};

SweepResult sweep(const SystemConfig& config, SweepMode mode);

/// Mean and standard error (sample std / sqrt(n)); stderr is 0 for n < 2.
std::pair<double, double> mean_stderr(const std::vector<double>& values);

std::vector<SummaryCell> summarize(const std::vector<ExperimentRecord>& records);

/// Per-iteration mean, padding early-stopped traces with their final value.
TraceSummary summarize_traces(const std::vector<ExperimentRecord>& records, int iterations);

inline constexpr std::string_view kCsvHeader =
    "trial,seed,snr_db,scheme,variant,k,n_rf,sum_rate_bpshz,energy_eff_bpshzw,dropped,drop_reason";

void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records);
void write_summary_json(std::ostream& out, const SweepResult& result, const SystemConfig& config);
void write_trace_csv(std::ostream& out, const TraceSummary& trace);
void write_user_rates_csv(std::ostream& out, const std::vector<ExperimentRecord>& records);

struct OutputPaths {
  std::string csv;
  std::string json;
  std::string extra;  // trace (convergence) or per-user rates (fairness); empty otherwise
};

OutputPaths output_paths(const std::string& csv_path, SweepMode mode);

/// Opens every output file before any trial runs (throws std::runtime_error
/// if one cannot be written), then sweeps and writes.
SweepResult run_and_write(const SystemConfig& config, SweepMode mode);

}  // namespace bsnoma
