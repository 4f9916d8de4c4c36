#include "bsnoma/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace bsnoma {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  const std::string s = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw std::invalid_argument("config: bad value '" + s + "' for '" + std::string(key) + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sanitize(std::string text) {
  std::replace(text.begin(), text.end(), ',', ';');
  std::replace(text.begin(), text.end(), '\n', ' ');
  return text;
}

std::vector<Scheme> schemes_for(const SystemConfig& config, SweepMode mode) {
  if (mode == SweepMode::convergence || mode == SweepMode::fairness) return {Scheme::noma};
  return config.schemes;
}

}  // namespace

std::string_view to_string(SweepMode mode) {
  switch (mode) {
    case SweepMode::snr: return "sweep-snr";
    case SweepMode::users: return "sweep-users";
    case SweepMode::convergence: return "convergence";
    case SweepMode::fairness: return "fairness";
  }
  return "unknown";
}

SweepMode parse_sweep_mode(std::string_view text) {
  for (SweepMode m : {SweepMode::snr, SweepMode::users, SweepMode::convergence, SweepMode::fairness}) {
    if (text == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown sweep mode '" + std::string(text) + "'");
}

std::vector<double> SystemConfig::snr_points() const {
  std::vector<double> out;
  if (snr_step_db <= 0.0) {
    out.push_back(snr_start_db);
    return out;
  }
  const int count = static_cast<int>(std::floor((snr_stop_db - snr_start_db) / snr_step_db + 1e-9)) + 1;
  for (int i = 0; i < count; ++i) out.push_back(snr_start_db + i * snr_step_db);
  return out;
}

std::vector<int> SystemConfig::user_points() const { return user_sweep.empty() ? std::vector<int>{users} : user_sweep; }

ChannelParams SystemConfig::channel_params(int user_count) const {
  ChannelParams p;
  p.antennas = antennas;
  p.users = user_count;
  p.nlos_paths = nlos_paths;
  p.los_variance = los_variance;
  p.nlos_variance = nlos_variance;
  return p;
}

OptimizerConfig SystemConfig::optimizer() const {
  OptimizerConfig o;
  o.max_iterations = max_iterations;
  o.min_rate = min_rate;
  return o;
}

LinkBudget SystemConfig::budget(double snr_db) const {
  return LinkBudget::from_snr(total_power_mw, snr_db, snr_per_user ? users : 1);
}

void SystemConfig::validate() const {
  for (int k : user_points()) {
    channel_params(k).validate();
    if (k > antennas) throw std::invalid_argument("config: more users than antennas");
  }
  if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
  if (!(total_power_mw > 0.0)) throw std::invalid_argument("config: total power must be > 0");
  if (snr_stop_db < snr_start_db) throw std::invalid_argument("config: empty SNR sweep");
  if (schemes.empty()) throw std::invalid_argument("config: no schemes selected");
  if (workers < 0) throw std::invalid_argument("config: workers must be >= 0");
  optimizer().validate();
}

void parse_snr_range(std::string_view text, SystemConfig& config) {
  const auto parts = split(text, ':');
  if (parts.size() == 1) {
    config.snr_start_db = config.snr_stop_db = parse_number<double>("snr", parts[0]);
    config.snr_step_db = 0.0;
  } else if (parts.size() == 3) {
    config.snr_start_db = parse_number<double>("snr", parts[0]);
    config.snr_stop_db = parse_number<double>("snr", parts[1]);
    config.snr_step_db = parse_number<double>("snr", parts[2]);
  } else {
    throw std::invalid_argument("snr: expected start:stop:step, got '" + std::string(text) + "'");
  }
}

std::vector<int> parse_int_list(std::string_view text) {
  std::vector<int> out;
  for (const auto& part : split(text, ',')) out.push_back(parse_number<int>("users", part));
  return out;
}

std::vector<Scheme> parse_scheme_list(std::string_view text) {
  std::vector<Scheme> out;
  for (const auto& part : split(text, ',')) {
    if (part == "all") return {Scheme::noma, Scheme::oma, Scheme::beamspace_mimo, Scheme::fully_digital};
    out.push_back(parse_scheme(part));
  }
  return out;
}

void apply_config_entry(SystemConfig& c, std::string_view key, std::string_view value) {
  const std::string k = trim(key);
  if (k == "antennas" || k == "N") c.antennas = parse_number<int>(k, value);
  else if (k == "users" || k == "K") c.users = parse_number<int>(k, value);
  else if (k == "user_sweep") c.user_sweep = parse_int_list(value);
  else if (k == "nlos_paths" || k == "L") c.nlos_paths = parse_number<int>(k, value);
  else if (k == "total_power_mw" || k == "P") c.total_power_mw = parse_number<double>(k, value);
  else if (k == "los_variance") c.los_variance = parse_number<double>(k, value);
  else if (k == "nlos_variance") c.nlos_variance = parse_number<double>(k, value);
  else if (k == "snr") parse_snr_range(value, c);
  else if (k == "snr_start_db") c.snr_start_db = parse_number<double>(k, value);
  else if (k == "snr_stop_db") c.snr_stop_db = parse_number<double>(k, value);
  else if (k == "snr_step_db") c.snr_step_db = parse_number<double>(k, value);
  else if (k == "trials") c.trials = parse_number<int>(k, value);
  else if (k == "seed") c.seed = parse_number<std::uint64_t>(k, value);
  else if (k == "max_iterations" || k == "T_max") c.max_iterations = parse_number<int>(k, value);
  else if (k == "min_rate" || k == "R_min") c.min_rate = parse_number<double>(k, value);
  else if (k == "p_rf_mw") c.power_model.rf_chain_mw = parse_number<double>(k, value);
  else if (k == "p_sw_mw") c.power_model.switch_mw = parse_number<double>(k, value);
  else if (k == "p_bb_mw") c.power_model.baseband_mw = parse_number<double>(k, value);
  else if (k == "schemes") c.schemes = parse_scheme_list(value);
  else if (k == "variant") c.variant = parse_equivalent_kind(trim(value));
  else if (k == "snr_reference") {
    const std::string v = trim(value);
    if (v != "per_user" && v != "total") throw std::invalid_argument("config: snr_reference must be per_user or total");
    c.snr_per_user = v == "per_user";
  } else if (k == "output") c.output = trim(value);
  else if (k == "workers") c.workers = parse_number<int>(k, value);
  else throw std::invalid_argument("config: unknown key '" + k + "'");
}

SystemConfig parse_config(std::istream& in, SystemConfig base) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    apply_config_entry(base, std::string_view(line).substr(0, eq), std::string_view(line).substr(eq + 1));
  }
  return base;
}

SystemConfig load_config_file(const std::string& path, SystemConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file '" + path + "'");
  return parse_config(in, std::move(base));
}

NomaSetup prepare_noma(const BeamspaceChannel& beamspace, EquivalentKind variant) {
  NomaSetup s;
  s.assignment = select_beams(beamspace);
  s.grouping = group_users(s.assignment, beamspace);
  s.precoder = zf_precoder(equivalent_channel(s.grouping, variant));
  // users were ordered by channel norm before w existed; one repair pass
  const OrderReport report = verify_order(s.grouping, s.precoder);
  if (report.violations() > 0) {
    s.grouping = apply_order(s.grouping, report);
    s.precoder = zf_precoder(equivalent_channel(s.grouping, variant));
    s.reordered = true;
  }
  return s;
}

std::vector<ExperimentRecord> run_trial(const SystemConfig& config, int trial_index, int user_count,
                                        const LensMatrix& lens, SweepMode mode) {
  const ChannelParams params = config.channel_params(user_count);
  const ChannelRealization realization =
      draw_realization(params, lens, config.seed, static_cast<std::uint64_t>(trial_index));
  const std::uint64_t hash = realization.fingerprint();

  std::optional<NomaSetup> setup;
  std::optional<EffectiveGains> gains;
  std::string setup_error;
  try {
    setup = prepare_noma(realization.beamspace, config.variant);
    gains.emplace(setup->grouping, setup->precoder);
  } catch (const PrecodingFailure& e) {
    setup_error = e.what();
  } catch (const DegenerateChannel& e) {
    setup_error = e.what();
  }

  const OptimizerConfig optimizer = config.optimizer();

  std::vector<ExperimentRecord> out;
  const auto schemes = schemes_for(config, mode);
  for (double snr : config.snr_points()) {
    const LinkBudget budget = config.budget(snr);
    for (Scheme scheme : schemes) {
      ExperimentRecord rec;
      rec.trial = trial_index;
      rec.seed = config.seed;
      rec.snr_db = snr;
      rec.scheme = scheme;
      rec.variant = config.variant;
      rec.uses_variant = scheme == Scheme::noma || scheme == Scheme::oma;
      rec.users = user_count;
      rec.realization_hash = hash;
      try {
        switch (scheme) {
          case Scheme::noma: {
            if (!setup) throw PrecodingFailure(setup_error, 0.0);
            const PowerAllocation alloc = allocate(*gains, budget, optimizer);
            const RateReport report = sum_rate(*gains, alloc.powers, budget);
            rec.rf_chains = gains->beam_count();
            rec.sum_rate = report.sum_rate;
            rec.trace = alloc.trace;
            rec.feasible = alloc.feasible;
            rec.user_rates.assign(user_count, 0.0);
            for (int k = 0; k < gains->user_count(); ++k) rec.user_rates[gains->slot(k).user] = report.rate[k];
            break;
          }
          case Scheme::oma: {
            if (!setup) throw PrecodingFailure(setup_error, 0.0);
            const SchemeResult r = mimo_oma(setup->grouping, setup->precoder, budget);
            rec.rf_chains = r.rf_chains;
            rec.sum_rate = r.sum_rate;
            rec.user_rates = r.user_rates;
            break;
          }
          case Scheme::beamspace_mimo: {
            const SchemeResult r = beamspace_mimo_single_user(realization.beamspace, budget);
            rec.rf_chains = r.rf_chains;
            rec.sum_rate = r.sum_rate;
            rec.user_rates = r.user_rates;
            break;
          }
          case Scheme::fully_digital: {
            const SchemeResult r = fully_digital_zf(realization.spatial, budget);
            rec.rf_chains = r.rf_chains;
            rec.sum_rate = r.sum_rate;
            rec.user_rates = r.user_rates;
            break;
          }
        }
        rec.energy_efficiency = energy_efficiency(rec.sum_rate, rec.rf_chains, budget, config.power_model);
      } catch (const PrecodingFailure& e) {
        rec.dropped = true;
        rec.drop_reason = sanitize(e.what());
      } catch (const DegenerateChannel& e) {
        rec.dropped = true;
        rec.drop_reason = sanitize(e.what());
      }
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::pair<double, double> mean_stderr(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double n = static_cast<double>(values.size());
  const double mean = sum / n;
  if (values.size() < 2) return {mean, 0.0};
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / (n - 1.0) / n)};
}

std::vector<SummaryCell> summarize(const std::vector<ExperimentRecord>& records) {
  struct Acc {
    std::vector<double> se, ee;
    int total = 0, dropped = 0;
  };
  // key order = (users, snr, scheme position)
  std::map<std::tuple<int, double, int>, Acc> cells;
  for (const auto& r : records) {
    auto& acc = cells[{r.users, r.snr_db, static_cast<int>(r.scheme)}];
    ++acc.total;
    if (r.dropped) {
      ++acc.dropped;
      continue;
    }
    acc.se.push_back(r.sum_rate);
    acc.ee.push_back(r.energy_efficiency);
  }
  std::vector<SummaryCell> out;
  for (const auto& [key, acc] : cells) {
    SummaryCell c;
    c.users = std::get<0>(key);
    c.snr_db = std::get<1>(key);
    c.scheme = static_cast<Scheme>(std::get<2>(key));
    std::tie(c.mean_se, c.stderr_se) = mean_stderr(acc.se);
    std::tie(c.mean_ee, c.stderr_ee) = mean_stderr(acc.ee);
    c.trials = acc.total;
    c.dropped = acc.dropped;
    out.push_back(c);
  }
  return out;
}

TraceSummary summarize_traces(const std::vector<ExperimentRecord>& records, int iterations) {
  TraceSummary out;
  std::vector<std::vector<double>> columns(iterations);
  for (const auto& r : records) {
    if (r.dropped || r.scheme != Scheme::noma || r.trace.empty()) continue;
    ++out.trials;
    for (int t = 0; t < iterations; ++t) columns[t].push_back(t < static_cast<int>(r.trace.size()) ? r.trace[t] : r.trace.back());
  }
  for (const auto& col : columns) {
    const auto [m, s] = mean_stderr(col);
    out.mean.push_back(m);
    out.stderr_.push_back(s);
  }
  return out;
}

SweepResult sweep(const SystemConfig& config, SweepMode mode) {
  config.validate();
  if (mode == SweepMode::fairness && !(config.min_rate > 0.0)) {
    throw std::invalid_argument("fairness mode needs a positive minimum rate");
  }
  const LensMatrix lens = lens_transform_matrix(config.antennas);
  const std::vector<int> user_points = mode == SweepMode::users ? config.user_points() : std::vector<int>{config.users};

  struct Job {
    int users;
    int trial;
  };
  std::vector<Job> jobs;
  for (int k : user_points) {
    for (int t = 0; t < config.trials; ++t) jobs.push_back({k, t});
  }

  std::vector<std::vector<ExperimentRecord>> slots(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        slots[i] = run_trial(config, jobs[i].trial, jobs[i].users, lens, mode);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned count = std::min<std::size_t>(config.workers > 0 ? static_cast<unsigned>(config.workers) : hw, jobs.size());
  if (count <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < count; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  SweepResult result;
  result.mode = mode;
  for (auto& s : slots) {
    for (auto& r : s) result.records.push_back(std::move(r));
  }
  result.cells = summarize(result.records);
  if (mode == SweepMode::convergence) result.trace = summarize_traces(result.records, config.max_iterations);
  return result;
}

void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records) {
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.trial << ',' << r.seed << ',' << format_double(r.snr_db) << ',' << to_string(r.scheme) << ','
        << (r.uses_variant ? to_string(r.variant) : std::string_view("none")) << ',' << r.users << ',' << r.rf_chains << ','
        << format_double(r.sum_rate) << ',' << format_double(r.energy_efficiency) << ',' << (r.dropped ? 1 : 0) << ','
        << r.drop_reason << '\n';
  }
}

void write_summary_json(std::ostream& out, const SweepResult& result, const SystemConfig& config) {
  nlohmann::json doc;
  doc["mode"] = std::string(to_string(result.mode));
  doc["seed"] = config.seed;
  doc["antennas"] = config.antennas;
  doc["trials_per_point"] = config.trials;
  doc["variant"] = std::string(to_string(config.variant));
  doc["snr_reference"] = config.snr_per_user ? "per_user" : "total";
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : result.cells) {
    cells.push_back({{"k", c.users},
                     {"snr_db", c.snr_db},
                     {"scheme", std::string(to_string(c.scheme))},
                     {"mean_se", c.mean_se},
                     {"stderr_se", c.stderr_se},
                     {"mean_ee", c.mean_ee},
                     {"stderr_ee", c.stderr_ee},
                     {"trials", c.trials},
                     {"dropped", c.dropped}});
  }
  doc["cells"] = std::move(cells);
  if (result.mode == SweepMode::convergence) {
    doc["trace"] = {{"mean_sum_rate", result.trace.mean}, {"stderr_sum_rate", result.trace.stderr_}, {"trials", result.trace.trials}};
  }
  if (result.mode == SweepMode::fairness) {
    int feasible = 0, total = 0;
    for (const auto& r : result.records) {
      if (r.dropped) continue;
      ++total;
      feasible += r.feasible ? 1 : 0;
    }
    doc["fairness"] = {{"min_rate", config.min_rate}, {"feasible_records", feasible}, {"records", total}};
  }
  out << doc.dump(2) << '\n';
}

void write_trace_csv(std::ostream& out, const TraceSummary& trace) {
  out << "iteration,mean_sum_rate_bpshz,stderr_sum_rate_bpshz\n";
  for (std::size_t t = 0; t < trace.mean.size(); ++t) {
    out << (t + 1) << ',' << format_double(trace.mean[t]) << ',' << format_double(trace.stderr_[t]) << '\n';
  }
}

void write_user_rates_csv(std::ostream& out, const std::vector<ExperimentRecord>& records) {
  out << "trial,snr_db,user,rate_bpshz,feasible\n";
  for (const auto& r : records) {
    if (r.dropped) continue;
    for (std::size_t u = 0; u < r.user_rates.size(); ++u) {
      out << r.trial << ',' << format_double(r.snr_db) << ',' << u << ',' << format_double(r.user_rates[u]) << ','
          << (r.feasible ? 1 : 0) << '\n';
    }
  }
}

OutputPaths output_paths(const std::string& csv_path, SweepMode mode) {
  std::string stem = csv_path;
  if (stem.size() > 4 && stem.substr(stem.size() - 4) == ".csv") stem.resize(stem.size() - 4);
  OutputPaths p;
  p.csv = stem + ".csv";
  p.json = stem + ".json";
  if (mode == SweepMode::convergence) p.extra = stem + "_trace.csv";
  if (mode == SweepMode::fairness) p.extra = stem + "_users.csv";
  return p;
}

SweepResult run_and_write(const SystemConfig& config, SweepMode mode) {
  config.validate();
  const OutputPaths paths = output_paths(config.output, mode);
  auto open = [](const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open output file '" + path + "' for writing");
    return f;
  };
  std::ofstream csv = open(paths.csv);
  std::ofstream json = open(paths.json);
  std::ofstream extra;
  if (!paths.extra.empty()) extra = open(paths.extra);

  SweepResult result = sweep(config, mode);
  write_records_csv(csv, result.records);
  write_summary_json(json, result, config);
  if (mode == SweepMode::convergence) write_trace_csv(extra, result.trace);
  if (mode == SweepMode::fairness) write_user_rates_csv(extra, result.records);
  return result;
}

}  // namespace bsnoma
