#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "orbit_census/experiment.hpp"

using namespace orbit_census;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = ORBIT_CENSUS_CONFIGS;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("orbit_census_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) out.push_back(csv::split(line));
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ORBIT_CENSUS_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json golden_config(const std::string& task, json params) {
  return json{{"system", {{"matrix", "full"}, {"kappa", 2}, {"potential", {{"table", {{"1", 1.0}, {"2", 2.0}}}}}}},
              {"task", task},
              {"params", std::move(params)},
              {"output", {{"path", "out.csv"}}}};
}

ErrorKind kind_of(const json& config, const fs::path& dir) {
  try {
    run_experiment(config, dir);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::InvalidInput;
}

}  // namespace

TEST(Bundled, EmbeddedTablesMatchShippedCsv) {
  EXPECT_EQ(slurp(kConfigs / "potentials/theorem1_norepeat3_depth2.csv"), bundled::kTheorem1Csv);
  EXPECT_EQ(slurp(kConfigs / "potentials/random_norepeat3_depth2.csv"), bundled::kRandomCsv);
  const auto golden = potential_from_csv(slurp(kConfigs / "potentials/golden.csv"), TransitionMatrix::full_shift(2));
  EXPECT_EQ(golden.entries(), bundled::golden().entries());
}

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(exit_code_for(ErrorKind::ConfigError), 2);
  EXPECT_EQ(exit_code_for(ErrorKind::BudgetExceeded), 3);
  EXPECT_EQ(exit_code_for(ErrorKind::StateSpaceTooLarge), 3);
  EXPECT_EQ(exit_code_for(ErrorKind::NotConverged), 4);
  EXPECT_EQ(exit_code_for(ErrorKind::DerivativeUnstable), 4);
  EXPECT_EQ(exit_code_for(ErrorKind::LatticeSuspected), 1);
}

TEST(Run, GoldenPressureClosedForms) {
  const auto dir = scratch("pressure");
  const auto res = run_experiment(golden_config("pressure", json::object()), dir);
  ASSERT_EQ(res.files.size(), 2u);
  const auto rows = read_csv(dir / "out.csv");
  ASSERT_EQ(rows.size(), 2u);
  ASSERT_EQ(rows[0][0], "P");
  const double phi = std::numbers::phi, x = phi - 1.0;
  EXPECT_NEAR(csv::parse_real(rows[1][0]), std::log(phi), 1e-10);
  EXPECT_NEAR(csv::parse_real(rows[1][1]), 2.0 - x, 1e-10);
  EXPECT_NEAR(csv::parse_real(rows[1][2]), x * (1.0 - x), 1e-9);
}

TEST(Run, CountWindowMatchesLibrary) {
  const auto dir = scratch("window");
  const json params{{"n_range", {6, 9}}, {"z", {0.0, 0.3}}, {"p", -1.0}, {"q", 1.0}, {"delta", 0.1}};
  run_experiment(golden_config("count-window", params), dir);
  const auto rows = read_csv(dir / "out.csv");
  const auto f = bundled::golden();
  const auto prof = pressure_profile(f);
  ASSERT_EQ(rows.size(), 1u + 4 * 2);
  std::size_t i = 1;
  for (int n = 6; n <= 9; ++n)
    for (double z : {0.0, 0.3}) {
      // brute force over all 2^n words
      const double lo = z + n * prof.alpha - std::exp(-0.1 * n), hi = z + n * prof.alpha + std::exp(-0.1 * n);
      int count = 0;
      for (int bits = 0; bits < (1 << n); ++bits) {
        double s = 0;
        for (int j = 0; j < n; ++j) s += (bits >> j & 1) ? 2.0 : 1.0;
        count += s >= lo && s <= hi;
      }
      EXPECT_EQ(rows[i][0], std::to_string(n));
      EXPECT_EQ(csv::parse_real(rows[i][7]), count) << "n=" << n << " z=" << z;
      ++i;
    }
}

TEST(Run, ManifestEchoesDefaults) {
  const auto dir = scratch("manifest");
  const json params{{"n", 5}, {"z", 0.0}, {"p", -1.0}, {"q", 1.0}, {"delta", 0.1}};
  const auto res = run_experiment(golden_config("count-window", params), dir);
  const auto m = json::parse(slurp(dir / "out.csv.manifest.json"));
  EXPECT_EQ(m["config"]["params"]["budget"].get<std::uint64_t>(), kDefaultEnumerationBudget);
  EXPECT_EQ(m["config"]["output"]["format"], "csv");
  EXPECT_EQ(m["config"]["task"], "count-window");
  EXPECT_TRUE(m.contains("created_utc"));
  EXPECT_EQ(m["outputs"].size(), 1u);
  EXPECT_EQ(res.files.back(), (dir / "out.csv.manifest.json").string());
}

TEST(Run, RuelleDefaultTIsMinusP) {
  const auto dir = scratch("ruelle");
  run_experiment(golden_config("ruelle-lemma", json{{"n_range", {1, 4}}}), dir);
  const auto m = json::parse(slurp(dir / "out.csv.manifest.json"));
  EXPECT_NEAR(m["config"]["params"]["t"].get<double>(), -std::log(std::numbers::phi), 1e-12);
  const auto rows = read_csv(dir / "out.csv");
  ASSERT_EQ(rows.size(), 5u);
  // depth-1 potential: the identity is exact
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LT(csv::parse_real(rows[i][7]), 1e-10);
}

TEST(Run, ByteIdenticalReruns) {
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  const json params{{"n_range", {8, 12}}, {"z_alpha", {0.0, 0.5}}, {"p", -1.0}, {"q", 1.0}, {"delta", 0.05},
                    {"a", {0.5, 2.0}}};
  RunOptions one, many;
  many.workers = 8;
  run_experiment(golden_config("count-I", params), a, one);
  run_experiment(golden_config("count-I", params), b, many);
  EXPECT_EQ(slurp(a / "out.csv"), slurp(b / "out.csv"));
  EXPECT_EQ(slurp(a / "out.brackets.csv"), slurp(b / "out.brackets.csv"));
}

TEST(Run, MissingDeltaIsConfigError) {
  const auto dir = scratch("missing");
  const json params{{"n", 5}, {"z", 0.0}, {"p", -1.0}, {"q", 1.0}};
  try {
    run_experiment(golden_config("count-window", params), dir);
    FAIL() << "expected ConfigError";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
    EXPECT_NE(std::string(e.what()).find("params.delta"), std::string::npos);
  }
  EXPECT_FALSE(fs::exists(dir / "out.csv"));
}

TEST(Run, ValidationFailuresAreConfigErrors) {
  const auto dir = scratch("invalid");
  const json ok{{"n", 5}, {"z", 0.0}, {"p", -1.0}, {"q", 1.0}, {"delta", 0.1}};
  auto extra = ok;
  extra["detla"] = 0.1;
  EXPECT_EQ(kind_of(golden_config("count-window", extra), dir), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of(golden_config("no-such-task", json::object()), dir), ErrorKind::ConfigError);
  auto cfg = golden_config("pressure", json::object());
  cfg["sytem"] = 1;
  EXPECT_EQ(kind_of(cfg, dir), ErrorKind::ConfigError);
  auto wrong_type = ok;
  wrong_type["delta"] = "small";
  EXPECT_EQ(kind_of(golden_config("count-window", wrong_type), dir), ErrorKind::ConfigError);
  auto bad_chi = json{{"n", 5}, {"z", 0.0}, {"delta", 0.1}, {"chi", {{"family", "gauss"}}}};
  EXPECT_EQ(kind_of(golden_config("smoothed", bad_chi), dir), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of(golden_config("spectrum", json::object()), dir), ErrorKind::ConfigError);
  EXPECT_FALSE(fs::exists(dir / "out.csv"));
}

TEST(Run, BudgetExceededPropagates) {
  const auto dir = scratch("budget");
  const json params{{"n", 20}, {"z", 0.0}, {"p", -1.0}, {"q", 1.0}, {"delta", 0.1}, {"budget", 1000}};
  EXPECT_EQ(kind_of(golden_config("count-window", params), dir), ErrorKind::BudgetExceeded);
}

TEST(Run, SpectrumOnSymmetricScene) {
  const auto dir = scratch("spectrum");
  RunOptions opts;
  opts.output = (dir / "spec.csv").string();
  run_experiment(json::parse(slurp(kConfigs / "billiard_spectrum.json")), kConfigs, opts);
  const auto rows = read_csv(dir / "spec.csv");
  ASSERT_EQ(rows.size(), 6u);
  for (int i = 1; i <= 3; ++i) EXPECT_NEAR(csv::parse_real(rows[i][3]), 8.0, 1e-10);
  // 123-orbit: perimeter of the triangle of contact points
  const double tri = 3.0 * (6.0 - std::sqrt(3.0));
  for (int i = 4; i <= 5; ++i) EXPECT_NEAR(csv::parse_real(rows[i][3]), tri, 1e-9);
  const auto m = json::parse(slurp(dir / "spec.csv.manifest.json"));
  EXPECT_TRUE(m.contains("disclosure"));
}

TEST(Run, BundledConfigsAllRun) {
  const auto dir = scratch("bundled");
  for (const auto& entry : fs::directory_iterator(kConfigs)) {
    if (entry.path().extension() != ".json") continue;
    RunOptions opts;
    opts.output = (dir / (entry.path().stem().string() + ".csv")).string();
    EXPECT_NO_THROW(run_experiment(json::parse(slurp(entry.path())), kConfigs, opts)) << entry.path();
    EXPECT_TRUE(fs::exists(*opts.output)) << entry.path();
  }
}

TEST(Drift, HandComputedBlocks) {
  const std::vector<int> ns{1, 2, 3, 4, 5};
  const std::vector<double> r{0.6, 0.8, 1.0, 0.9, 1.1};
  const auto d = analyze_drift(ns, r, 2);
  ASSERT_EQ(d.block_mean.size(), 4u);
  EXPECT_DOUBLE_EQ(d.block_mean[0], 0.7);
  EXPECT_DOUBLE_EQ(d.block_mean[3], 1.0);
  // deviations 0.3, 0.1, 0.05, 0.0 against 0..3: slope by the normal equations
  const double xs[] = {0, 1, 2, 3}, ys[] = {0.3, 0.1, 0.05, 0.0};
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < 4; ++i) sx += xs[i], sy += ys[i], sxx += xs[i] * xs[i], sxy += xs[i] * ys[i];
  EXPECT_NEAR(d.slope, (4 * sxy - sx * sy) / (4 * sxx - sx * sx), 1e-12);
  EXPECT_TRUE(d.in_band);
  EXPECT_TRUE(d.toward_one);
  const auto away = analyze_drift(ns, {1.0, 1.0, 0.9, 0.7, 0.2}, 2);
  EXPECT_FALSE(away.toward_one);
  EXPECT_FALSE(away.in_band);
  EXPECT_THROW(analyze_drift({1, 2}, {1.0, 1.0}, 2), Error);
}

TEST(Suite, UnknownNameIsConfigError) {
  try {
    reproduce_suite("theorem3", scratch("suite_unknown"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
  }
}

TEST(Suite, Theorem4StructureIsConsistent) {
  const auto dir = scratch("suite4");
  reproduce_suite("theorem4", dir);
  const auto rows = read_csv(dir / "theorem4_structure.csv");
  ASSERT_EQ(rows.size(), 12u);  // header + n = 2..12
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const int n = std::stoi(rows[i][0]);
    EXPECT_EQ(std::stoll(rows[i][2]), n * std::stoll(rows[i][1]));
    EXPECT_EQ(rows[i][7], "1");
  }
  const auto m = json::parse(slurp(dir / "theorem4.manifest.json"));
  EXPECT_TRUE(m.contains("disclosure"));
  EXPECT_EQ(m["outputs"].size(), 3u);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  EXPECT_EQ(run_cli("--out " + dir.string() + " run " + (kConfigs / "golden_pressure.json").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "golden_pressure.csv"));
  EXPECT_TRUE(fs::exists(dir / "golden_pressure.csv.manifest.json"));

  const auto bad_json = dir / "bad.json";
  std::ofstream(bad_json) << "{ \"task\": ";
  EXPECT_EQ(run_cli("run " + bad_json.string()), 2);

  auto cfg = golden_config("count-window", json{{"n", 5}, {"z", 0.0}, {"p", -1.0}, {"q", 1.0}});
  std::ofstream(dir / "missing.json") << cfg.dump();
  EXPECT_EQ(run_cli("run " + (dir / "missing.json").string()), 2);

  cfg["params"] = json{{"n", 24}, {"z", 0.0}, {"p", -1.0}, {"q", 1.0}, {"delta", 0.1}, {"budget", 10}};
  std::ofstream(dir / "budget.json") << cfg.dump();
  EXPECT_EQ(run_cli("run " + (dir / "budget.json").string()), 3);

  EXPECT_EQ(run_cli("--out " + dir.string() + " reproduce theorem3"), 2);
  EXPECT_EQ(run_cli("--bogus-flag run x.json"), 2);
  EXPECT_EQ(run_cli("run " + (dir / "does_not_exist.json").string()), 2);
}
