#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "bsnoma/harness.hpp"

using namespace bsnoma;

namespace {

SystemConfig small_config() {
  SystemConfig c;
  c.antennas = 32;
  c.users = 6;
  c.trials = 4;
  c.seed = 7;
  c.snr_start_db = 0.0;
  c.snr_stop_db = 20.0;
  c.snr_step_db = 10.0;
  c.workers = 1;
  return c;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("bsnoma_test_" + name)).string();
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

TEST_CASE("record counts") {
  SystemConfig c = small_config();
  const LensMatrix lens = lens_transform_matrix(c.antennas);
  SUBCASE("one scheme, one SNR") {
    c.schemes = {Scheme::noma};
    c.snr_step_db = 0.0;
    c.trials = 1;
    CHECK(run_trial(c, 0, c.users, lens).size() == 1);
    CHECK(sweep(c, SweepMode::snr).records.size() == 1);
  }
  SUBCASE("four schemes, three SNR points") {
    const auto recs = run_trial(c, 0, c.users, lens);
    REQUIRE(recs.size() == 12);
    // one realization behind every record of the trial
    for (const auto& r : recs) CHECK(r.realization_hash == recs.front().realization_hash);
    CHECK(run_trial(c, 1, c.users, lens).front().realization_hash != recs.front().realization_hash);
    for (const auto& r : recs) {
      if (r.dropped) continue;
      if (r.scheme == Scheme::fully_digital) CHECK(r.rf_chains == c.antennas);
      if (r.scheme == Scheme::beamspace_mimo) CHECK(r.rf_chains == c.users);
      if (r.scheme == Scheme::noma || r.scheme == Scheme::oma) CHECK(r.rf_chains <= c.users);
    }
  }
}

TEST_CASE("determinism") {
  SystemConfig c = small_config();
  const SweepResult a = sweep(c, SweepMode::snr);
  const SweepResult b = sweep(c, SweepMode::snr);
  c.workers = 3;
  const SweepResult d = sweep(c, SweepMode::snr);
  std::ostringstream sa, sb, sd;
  write_records_csv(sa, a.records);
  write_records_csv(sb, b.records);
  write_records_csv(sd, d.records);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str() == sd.str());
  for (std::size_t i = 0; i < a.records.size(); ++i) CHECK(a.records[i].sum_rate == d.records[i].sum_rate);
}

TEST_CASE("summary is recomputable from the CSV") {
  SystemConfig c = small_config();
  c.trials = 6;
  c.output = temp_path("summary.csv");
  run_and_write(c, SweepMode::snr);

  std::ifstream csv(c.output);
  std::string line;
  std::getline(csv, line);
  CHECK(line == kCsvHeader);
  std::map<std::tuple<int, double, std::string>, std::vector<std::pair<double, double>>> cells;
  std::map<std::tuple<int, double, std::string>, std::pair<int, int>> counts;
  while (std::getline(csv, line)) {
    const auto f = split_line(line);
    REQUIRE(f.size() == 11);
    const auto key = std::make_tuple(std::stoi(f[5]), std::stod(f[2]), f[3]);
    ++counts[key].first;
    if (f[9] == "1") {
      ++counts[key].second;
      CHECK_FALSE(f[10].empty());
      continue;
    }
    cells[key].push_back({std::stod(f[7]), std::stod(f[8])});
  }

  std::ifstream js(output_paths(c.output, SweepMode::snr).json);
  const nlohmann::json doc = nlohmann::json::parse(js);
  CHECK(doc["snr_reference"] == "per_user");
  REQUIRE(doc["cells"].size() == counts.size());
  for (const auto& cell : doc["cells"]) {
    const auto key = std::make_tuple(cell["k"].get<int>(), cell["snr_db"].get<double>(), cell["scheme"].get<std::string>());
    REQUIRE(counts.count(key) == 1);
    CHECK(cell["trials"].get<int>() == counts[key].first);
    CHECK(cell["dropped"].get<int>() == counts[key].second);
    const auto& v = cells[key];
    double se = 0.0, ee = 0.0;
    for (const auto& [s, e] : v) se += s, ee += e;
    const double n = static_cast<double>(v.size());
    se /= n;
    ee /= n;
    double vs = 0.0, ve = 0.0;
    for (const auto& [s, e] : v) vs += (s - se) * (s - se), ve += (e - ee) * (e - ee);
    CHECK(std::abs(cell["mean_se"].get<double>() - se) <= 1e-12 * std::max(1.0, se));
    CHECK(std::abs(cell["mean_ee"].get<double>() - ee) <= 1e-12 * std::max(1.0, ee));
    CHECK(std::abs(cell["stderr_se"].get<double>() - std::sqrt(vs / (n - 1) / n)) <= 1e-12 * std::max(1.0, se));
    CHECK(std::abs(cell["stderr_ee"].get<double>() - std::sqrt(ve / (n - 1) / n)) <= 1e-12 * std::max(1.0, ee));
  }
  std::filesystem::remove(c.output);
  std::filesystem::remove(output_paths(c.output, SweepMode::snr).json);
}

TEST_CASE("unwritable output fails before any trial runs") {
  SystemConfig c = small_config();
  c.trials = 100000;  // would take far too long if it ran
  c.output = "/nonexistent-dir/out.csv";
  CHECK_THROWS_AS(run_and_write(c, SweepMode::snr), std::runtime_error);
}

TEST_CASE("sweep modes") {
  SUBCASE("user sweep gives one row per point and scheme") {
    SystemConfig c = small_config();
    c.user_sweep = {2, 4, 6};
    c.snr_step_db = 0.0;
    c.trials = 2;
    const SweepResult r = sweep(c, SweepMode::users);
    CHECK(r.cells.size() == 12);
    for (Scheme s : c.schemes) {
      int rows = 0;
      for (const auto& cell : r.cells) rows += cell.scheme == s;
      CHECK(rows == 3);
    }
    for (const auto& rec : r.records) CHECK((rec.users == 2 || rec.users == 4 || rec.users == 6));
  }
  SUBCASE("convergence trace has one entry per iteration") {
    SystemConfig c = small_config();
    c.snr_step_db = 0.0;
    c.snr_start_db = c.snr_stop_db = 10.0;
    c.trials = 3;
    const SweepResult r = sweep(c, SweepMode::convergence);
    CHECK(r.trace.mean.size() == 20);
    CHECK(r.trace.stderr_.size() == 20);
    CHECK(r.trace.trials > 0);
    for (const auto& rec : r.records) CHECK(rec.scheme == Scheme::noma);
    for (std::size_t t = 1; t < 20; ++t) CHECK(r.trace.mean[t] >= r.trace.mean[t - 1] - 1e-8);
  }
  SUBCASE("fairness respects the minimum rate on feasible trials") {
    SystemConfig c = small_config();
    c.snr_step_db = 0.0;
    c.snr_start_db = c.snr_stop_db = 20.0;
    c.min_rate = 1.0;
    c.trials = 6;
    const SweepResult r = sweep(c, SweepMode::fairness);
    int feasible = 0;
    for (const auto& rec : r.records) {
      if (rec.dropped || !rec.feasible) continue;
      ++feasible;
      REQUIRE(rec.user_rates.size() == 6);
      for (double rate : rec.user_rates) CHECK(rate >= 1.0 - 1e-6);
    }
    CHECK(feasible > 0);
    c.min_rate = 0.0;
    CHECK_THROWS_AS(sweep(c, SweepMode::fairness), std::invalid_argument);
  }
}

TEST_CASE("config parsing") {
  std::istringstream in(
      "# comment line\n"
      "N = 64   # trailing comment\n"
      "users = 8\n"
      "\n"
      "snr = 0:30:10\n"
      "schemes = noma, oma\n"
      "variant = svd\n"
      "R_min = 0.5\n"
      "seed = 18446744073709551615\n"
      "snr_reference = total\n");
  const SystemConfig c = parse_config(in);
  CHECK(c.antennas == 64);
  CHECK(c.users == 8);
  CHECK(c.snr_points() == std::vector<double>{0.0, 10.0, 20.0, 30.0});
  CHECK(c.schemes == std::vector<Scheme>{Scheme::noma, Scheme::oma});
  CHECK(c.variant == EquivalentKind::svd);
  CHECK(c.min_rate == 0.5);
  CHECK(c.seed == 18446744073709551615ull);
  CHECK_FALSE(c.snr_per_user);
  CHECK(c.budget(10.0).noise_variance == doctest::Approx(3.2));
  CHECK(SystemConfig{}.budget(10.0).noise_variance == doctest::Approx(0.1));

  SystemConfig x;
  CHECK_THROWS_AS(apply_config_entry(x, "bogus", "1"), std::invalid_argument);
  CHECK_THROWS_AS(apply_config_entry(x, "trials", "ten"), std::invalid_argument);
  CHECK_THROWS_AS(apply_config_entry(x, "trials", "10x"), std::invalid_argument);
  CHECK_THROWS_AS(apply_config_entry(x, "snr_reference", "bit"), std::invalid_argument);
  std::istringstream no_eq("antennas 64\n");
  CHECK_THROWS_AS(parse_config(no_eq), std::invalid_argument);
  CHECK_THROWS(load_config_file("/nonexistent-dir/cfg.txt"));

  SystemConfig d;
  CHECK(d.antennas == 256);
  CHECK(d.users == 32);
  CHECK(d.nlos_paths == 2);
  CHECK(d.total_power_mw == 32.0);
  CHECK(d.max_iterations == 20);
  CHECK(d.power_model.rf_chain_mw == 300.0);
  d.validate();
  d.users = 300;
  CHECK_THROWS(d.validate());
}

TEST_CASE("parsers") {
  SystemConfig c;
  parse_snr_range("5", c);
  CHECK(c.snr_points() == std::vector<double>{5.0});
  parse_snr_range("0:1:0.1", c);
  CHECK(c.snr_points().size() == 11);
  CHECK(c.snr_points().back() == doctest::Approx(1.0));
  CHECK_THROWS(parse_snr_range("0:10", c));
  CHECK(parse_int_list("8,16, 32") == std::vector<int>{8, 16, 32});
  CHECK_THROWS(parse_int_list("8,,16"));
  CHECK(parse_scheme_list("all").size() == 4);
  CHECK(parse_sweep_mode("sweep-users") == SweepMode::users);
  CHECK_THROWS(parse_sweep_mode("sweep"));
}

TEST_CASE("statistics") {
  auto [m, s] = mean_stderr({1.0, 2.0, 3.0, 4.0});
  CHECK(m == 2.5);
  // sample std sqrt(5/3), over sqrt(4)
  CHECK(s == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-15));
  CHECK(mean_stderr({7.0}) == std::pair<double, double>{7.0, 0.0});
  CHECK(mean_stderr({}) == std::pair<double, double>{0.0, 0.0});

  std::vector<ExperimentRecord> recs(3);
  recs[0].sum_rate = 2.0;
  recs[1].sum_rate = 4.0;
  recs[2].dropped = true;
  recs[2].sum_rate = 100.0;
  const auto cells = summarize(recs);
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].trials == 3);
  CHECK(cells[0].dropped == 1);
  CHECK(cells[0].mean_se == 3.0);

  std::vector<ExperimentRecord> traces(2);
  traces[0].trace = {1.0, 2.0};
  traces[1].trace = {3.0, 4.0, 5.0};
  const TraceSummary t = summarize_traces(traces, 3);
  CHECK(t.mean == std::vector<double>{2.0, 3.0, 3.5});
}

TEST_CASE("output files") {
  const OutputPaths p = output_paths("run/out.csv", SweepMode::convergence);
  CHECK(p.csv == "run/out.csv");
  CHECK(p.json == "run/out.json");
  CHECK(p.extra == "run/out_trace.csv");
  CHECK(output_paths("x", SweepMode::fairness).extra == "x_users.csv");
  CHECK(output_paths("x.csv", SweepMode::snr).extra.empty());

  std::vector<ExperimentRecord> recs(1);
  recs[0].scheme = Scheme::fully_digital;
  recs[0].uses_variant = false;
  recs[0].users = 4;
  recs[0].rf_chains = 64;
  recs[0].sum_rate = 0.1;
  std::ostringstream out;
  write_records_csv(out, recs);
  CHECK(out.str() == std::string(kCsvHeader) + "\n0,0,0,fully_digital,none,4,64,0.10000000000000001,0,0,\n");
}
