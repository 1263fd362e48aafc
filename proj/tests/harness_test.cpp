#include "straycomp/scenario.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace straycomp;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("straycomp_harness_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

CsvTable trace_of(const std::vector<double>& rates, const std::string& source = "trace.csv") {
  std::string text = "iteration,rate,time_s,safety_net\n";
  for (std::size_t i = 0; i < rates.size(); ++i) {
    text += std::to_string(i) + "," + format_number(rates[i]) + "," + std::to_string(12 * i) + ",0\n";
  }
  return parse_csv(text, source);
}

ScenarioOutput run(const std::string& name, std::uint64_t seed, const std::string& ini = "") {
  Config cfg = Config::parse(ini);
  return run_scenario(name, cfg, seed);
}

int cli(const std::string& args) {
  const std::string cmd = std::string(STRAYCOMP_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Summarize, ConstantTraceIsZeroImprovement) {
  const auto s = summarize_tables({trace_of({5000, 5000, 5000})}, 1184);
  EXPECT_DOUBLE_EQ(s.improvement_pct(), 0.0);
  EXPECT_DOUBLE_EQ(s.improvement_raw_pct(), 0.0);
  EXPECT_EQ(s.iterations, 2);
}

TEST(Summarize, ReportsBothConventions) {
  const auto s = summarize_tables({trace_of({33700, 50000, 66200, 60000})}, 1184);
  // Background-subtracted: (66200 - 33700) / (33700 - 1184).
  EXPECT_NEAR(s.improvement_pct(), 100.0 * 32500.0 / 32516.0, 1e-9);
  EXPECT_NEAR(s.improvement_pct(), 100.0, 0.1);
  EXPECT_NEAR(s.improvement_raw_pct(), 96.4, 0.05);
  EXPECT_DOUBLE_EQ(s.best_rate, 66200);
  EXPECT_DOUBLE_EQ(s.model_time, 36);
}

TEST(Summarize, BaselineIsFirstRowOfFirstTrace) {
  const auto s = summarize_tables({trace_of({20000, 30000}, "a.csv"), trace_of({10000, 40000}, "b.csv")}, 0);
  EXPECT_DOUBLE_EQ(s.baseline_rate, 20000);
  EXPECT_DOUBLE_EQ(s.best_rate, 40000);
  EXPECT_EQ(s.iterations, 2);
}

TEST(Summarize, EmptyTraceIsAnError) {
  EXPECT_THROW(summarize_tables({trace_of({})}, 1184), CsvError);
  EXPECT_THROW(summarize_tables({}, 1184), CsvError);
}

TEST(Summarize, MalformedInputNamesRowAndColumn) {
  const auto t = parse_csv("iteration,rate,time_s,safety_net\n0,100,0,0\n1,1e,12,0\n", "trace.csv");
  try {
    summarize_tables({t}, 0);
    FAIL() << "expected CsvError";
  } catch (const CsvError& e) {
    EXPECT_STREQ(e.what(), "trace.csv: line 3, column 2 ('rate'): expected a number, got '1e'");
  }
  try {
    parse_csv("iteration,rate\n0,1\n1,2,3\n", "t.csv");
    FAIL() << "expected CsvError";
  } catch (const CsvError& e) {
    EXPECT_STREQ(e.what(), "t.csv: line 3: expected 2 columns, got 3");
  }
  EXPECT_THROW(parse_csv("", "e.csv"), CsvError);
  EXPECT_THROW(summarize_tables({parse_csv("iteration,time_s\n0,0\n")}, 0), CsvError);
}

TEST(Charging, CalibrationHitsTheRequestedDrop) {
  BenchConfig bc;
  bc.simulator.shot_noise = false;
  bc.simulator.drift = false;
  bc.stray.jitter_rms = 0.0;
  bc.headroom = 1.27;
  auto b = build_bench(bc, 4);
  const auto v = b.baseline;
  const double before = b.trap.expected_rate(v);
  b.trap.stray().e_target = calibrate_charging_target(b.trap, v, 4200.0, 0.35, 0.5);
  b.trap.stray().charging_active = true;
  for (int k = 0; k < 420; ++k) b.trap.advance(10.0);
  // Euler substeps of 1 s against tau = 1800 s track the exponential closely.
  EXPECT_NEAR(b.trap.expected_rate(v) / before, 0.65, 2e-3);
  EXPECT_THROW(calibrate_charging_target(b.trap, v, 4200.0, 1.5, 0.0), ConfigError);
}

TEST(Scenario, IterationAndSampleCadenceFollowTheTimeBudget) {
  const auto a = run("baseline-adam", 3);
  const auto& t = a.table("trace.csv");
  const auto time = t.column("time_s");
  for (std::size_t r = 2; r < t.rows.size(); ++r) {
    EXPECT_NEAR(t.number(r, time) - t.number(r - 1, time), 92 * 0.1 + 2.8, 1e-6);
  }
  const auto m = run("mloop-run", 3, "[surrogate]\nbudget = 150\n");
  const auto& s = m.table("store.csv");
  const auto st = s.column("time_s");
  EXPECT_EQ(s.rows.size(), 150u);
  for (std::size_t r = 1; r < s.rows.size(); ++r) EXPECT_NEAR(s.number(r, st) - s.number(r - 1, st), 0.7, 1e-6);
  EXPECT_EQ(s.header.back(), "source");
  EXPECT_EQ(s.rows[99].back(), "DE");
}

TEST(Scenario, TraceHeaderIsFixed) {
  const auto h = trace_header("iteration");
  ASSERT_EQ(h.size(), 1 + kParameterCount + 5);
  EXPECT_EQ(h[1], "v01");
  EXPECT_EQ(h[44], "v44");
  EXPECT_EQ(h[45], "laser_x");
  EXPECT_EQ(h[46], "counts");
  EXPECT_EQ(h.back(), "safety_net");
}

TEST(Scenario, NoiselessPureLorentzianScanFitsExactly) {
  const auto out = run("detuning-scan", 1, "[simulator]\nshot_noise = false\n[detuning]\nsidebands = false\n");
  EXPECT_LT(out.metric("max_abs_residual"), 1e-6 * out.metric("fit_amplitude"));
  EXPECT_NEAR(out.metric("fit_fwhm_mhz"), 20.0 * std::sqrt(1.0 + 0.5), 1e-6);
}

TEST(Scenario, RerunFromManifestIsByteIdentical) {
  const auto dir = scratch("rerun");
  const auto a = run("charge-then-opt", 21);
  write_outputs(a, dir / "a");
  Config again = Config::load(dir / "a" / "manifest.ini");
  write_outputs(run_scenario("charge-then-opt", again, std::nullopt), dir / "b");
  for (const char* f : {"manifest.ini", "phase1_trace.csv", "phase2_charging.csv", "phase3_trace.csv", "summary.ini"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  const auto other = run("charge-then-opt", 22);
  EXPECT_NE(other.table("phase1_trace.csv").to_string(), a.table("phase1_trace.csv").to_string());
  std::filesystem::remove_all(dir);
}

TEST(Scenario, SummarizeDirectoryMatchesInProcessSummary) {
  const auto dir = scratch("summary");
  const auto a = run("baseline-adam", 5);
  write_outputs(a, dir);
  const auto s = summarize(dir);
  EXPECT_DOUBLE_EQ(s.baseline_rate, a.summary->baseline_rate);
  EXPECT_DOUBLE_EQ(s.best_rate, a.summary->best_rate);
  EXPECT_DOUBLE_EQ(s.background_rate, 1184);
  EXPECT_EQ(s.iterations, 75);
  std::filesystem::remove_all(dir);
}

TEST(Scenario, ConfigProblemsAreConfigErrors) {
  EXPECT_THROW(run("no-such-scenario", 1), ConfigError);
  EXPECT_THROW(run("baseline-adam", 1, "[adam]\nstep_sise = 1\n"), ConfigError);
  EXPECT_THROW(run("baseline-adam", 1, "[run]\nscenario = mloop-run\n"), ConfigError);
  Config no_seed;
  EXPECT_THROW(run_scenario("baseline-adam", no_seed, std::nullopt), ConfigError);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  EXPECT_EQ(cli("baseline-adam --seed 2 --out " + (dir / "ok").string()), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "ok" / "trace.csv"));
  EXPECT_EQ(cli("summarize " + (dir / "ok").string()), 0);
  EXPECT_EQ(cli("baseline-adam --config " + (dir / "ok" / "manifest.ini").string() + " --out " + (dir / "again").string()), 0);
  EXPECT_EQ(slurp(dir / "ok" / "trace.csv"), slurp(dir / "again" / "trace.csv"));

  EXPECT_EQ(cli("nonsense --seed 1 --out " + (dir / "x").string()), 2);
  EXPECT_EQ(cli("baseline-adam --out " + (dir / "x").string()), 2);
  {
    std::ofstream f(dir / "typo.ini");
    f << "[adam]\nstep_sise = 0.1\n";
  }
  EXPECT_EQ(cli("baseline-adam --seed 1 --config " + (dir / "typo.ini").string() + " --out " + (dir / "x").string()), 2);
  {
    // A threshold just under the first readout trips on shot noise.
    std::ofstream f(dir / "tight.ini");
    f << "[scenario]\nforbid_safety_net = true\n[adam]\nabort_fraction = 0.001\n";
  }
  EXPECT_EQ(cli("baseline-adam --seed 1 --config " + (dir / "tight.ini").string() + " --out " + (dir / "net").string()), 3);
  EXPECT_NE(cli("summarize " + (dir / "missing").string()), 0);
  std::filesystem::remove_all(dir);
}
