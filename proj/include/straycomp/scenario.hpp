#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "straycomp/csv.hpp"
#include "straycomp/settings.hpp"
#include "straycomp/spectroscopy.hpp"

#ifndef STRAYCOMP_VERSION
#define STRAYCOMP_VERSION "0.0.0"
#endif

namespace straycomp {

inline constexpr const char* kVersion = STRAYCOMP_VERSION;
inline constexpr int kCsvFormat = 1;

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"baseline-adam",        "mloop-run",    "charge-then-opt",
                                              "opt-during-charging", "detuning-scan", "power-scan",
                                              "quadratic-bench"};
  return names;
}

/// The scenario ran to completion but its optimizer hit the safety net and the
/// scenario forbids that.
class SafetyNetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

//---------------------------------------------------------------------------//
// Traces
//---------------------------------------------------------------------------//

// Optimizer traces share one column contract:
//   <index>, v01..v44, laser_x, counts, integration_s, time_s, rate, safety_net
// with <index> = iteration (ADAM) or sample (surrogate store, which adds a
// trailing `source` column holding DE or NN).

inline std::vector<std::string> trace_header(const std::string& index) {
  std::vector<std::string> h{index};
  for (std::size_t i = 0; i < kParameterCount; ++i) h.push_back(parameter_name(i));
  for (const char* c : {"counts", "integration_s", "time_s", "rate", "safety_net"}) h.emplace_back(c);
  return h;
}

namespace detail {

inline void push_row(CsvTable& t, long long index, const ControlVector& v, std::uint64_t counts, double integration,
                     double time, bool flag) {
  std::vector<std::string> row{std::to_string(index)};
  for (std::size_t i = 0; i < kParameterCount; ++i) row.push_back(format_number(v[i]));
  row.push_back(std::to_string(counts));
  row.push_back(format_number(integration));
  row.push_back(format_number(time));
  row.push_back(format_number(static_cast<double>(counts) / integration));
  row.emplace_back(flag ? "1" : "0");
  t.rows.push_back(std::move(row));
}

}  // namespace detail

inline CsvTable trace_table(const OptimizerTrace& trace) {
  CsvTable t;
  t.header = trace_header("iteration");
  for (const auto& r : trace.records()) {
    detail::push_row(t, r.iteration, r.v, r.counts, r.integration_time, r.time, r.safety_net);
  }
  return t;
}

inline CsvTable store_table(const SampleStore& store, std::optional<std::size_t> trigger = std::nullopt) {
  CsvTable t;
  t.header = trace_header("sample");
  t.header.emplace_back("source");
  for (std::size_t k = 0; k < store.size(); ++k) {
    const auto& r = store[k];
    detail::push_row(t, static_cast<long long>(k), r.v, r.counts, r.integration_time, r.time, trigger == k);
    t.rows.back().emplace_back(to_string(r.source));
  }
  return t;
}

//---------------------------------------------------------------------------//
// Summary
//---------------------------------------------------------------------------//

struct RunSummary {
  double baseline_rate = 0.0;  // counts/s, first trace row
  double best_rate = 0.0;  // counts/s, highest trace row
  double background_rate = 0.0;
  long long iterations = 0;  // ADAM iterations plus surrogate samples
  double model_time = 0.0;  // s, last trace timestamp
  int safety_net_events = 0;

  double raw_ratio() const { return best_rate / baseline_rate; }
  /// Paper-comparable convention: raw count ratio minus one.
  double improvement_raw_pct() const { return 100.0 * (best_rate - baseline_rate) / baseline_rate; }
  /// Background-subtracted convention.
  double improvement_pct() const {
    return 100.0 * (best_rate - baseline_rate) / (baseline_rate - background_rate);
  }

  std::string to_ini() const {
    std::string s = "[summary]\n";
    auto kv = [&](const char* k, const std::string& v) { s += std::string(k) + " = " + v + "\n"; };
    kv("baseline_rate", format_number(baseline_rate));
    kv("best_rate", format_number(best_rate));
    kv("background_rate", format_number(background_rate));
    kv("raw_ratio", format_number(raw_ratio()));
    kv("improvement_raw_pct", format_number(improvement_raw_pct()));
    kv("improvement_pct", format_number(improvement_pct()));
    kv("iterations", std::to_string(iterations));
    kv("model_time_s", format_number(model_time));
    kv("safety_net_events", std::to_string(safety_net_events));
    return s;
  }
};

inline bool is_trace(const CsvTable& t) {
  return t.has_column("rate") && t.has_column("time_s") && (t.has_column("iteration") || t.has_column("sample"));
}

/// Aggregates optimizer traces in order; the first row of the first trace is
/// the baseline.
inline RunSummary summarize_tables(const std::vector<CsvTable>& traces, double background_rate) {
  if (traces.empty()) throw CsvError("summarize: no optimizer traces");
  RunSummary s;
  s.background_rate = background_rate;
  for (std::size_t k = 0; k < traces.size(); ++k) {
    const auto& t = traces[k];
    if (t.rows.empty()) throw CsvError(t.source + ": empty trace");
    const std::size_t rate = t.column("rate"), time = t.column("time_s");
    const bool has_flag = t.has_column("safety_net");
    const std::size_t flag = has_flag ? t.column("safety_net") : 0;
    const bool by_iteration = t.has_column("iteration");
    long long last_iteration = 0;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const double v = t.number(r, rate);
      if (k == 0 && r == 0) s.baseline_rate = v;
      s.best_rate = std::max(s.best_rate, v);
      s.model_time = std::max(s.model_time, t.number(r, time));
      if (has_flag && t.number(r, flag) != 0.0) ++s.safety_net_events;
      if (by_iteration) last_iteration = std::max(last_iteration, std::llround(t.number(r, t.column("iteration"))));
    }
    s.iterations += by_iteration ? last_iteration : static_cast<long long>(t.rows.size());
  }
  if (!(s.baseline_rate > background_rate)) {
    throw CsvError(traces[0].source + ": baseline rate is not above the background rate");
  }
  return s;
}

/// Summarizes a scenario output directory: every CSV with the trace columns,
/// in file-name order, with the background rate from manifest.ini.
inline RunSummary summarize(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw CsvError("summarize: not a directory: " + dir.string());
  double background = 0.0;
  const auto manifest = dir / "manifest.ini";
  if (std::filesystem::exists(manifest)) {
    Config m = Config::load(manifest);
    if (m.has("physics", "background_rate")) background = m.number("physics", "background_rate", 0.0);
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<CsvTable> traces;
  for (const auto& f : files) {
    auto t = read_csv(f);
    if (is_trace(t)) traces.push_back(std::move(t));
  }
  if (traces.empty()) throw CsvError("summarize: no optimizer traces in " + dir.string());
  return summarize_tables(traces, background);
}

//---------------------------------------------------------------------------//
// Scenario results
//---------------------------------------------------------------------------//

struct ScenarioOutput {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string manifest;
  std::vector<std::pair<std::string, CsvTable>> tables;
  std::vector<std::pair<std::string, std::string>> texts;
  std::vector<std::pair<std::string, double>> metrics;
  std::optional<RunSummary> summary;
  int safety_net_events = 0;
  bool forbid_safety_net = false;

  double metric(const std::string& name) const {
    for (const auto& [k, v] : metrics) {
      if (k == name) return v;
    }
    throw std::out_of_range("no metric " + name);
  }
  const CsvTable& table(const std::string& name) const {
    for (const auto& [k, t] : tables) {
      if (k == name) return t;
    }
    throw std::out_of_range("no table " + name);
  }

  std::string summary_text() const {
    std::string s = summary ? summary->to_ini() + "\n" : "";
    s += "[metrics]\n";
    for (const auto& [k, v] : metrics) s += k + " = " + format_number(v) + "\n";
    return s;
  }
};

/// Writes manifest.ini, summary.ini and every table and text file.
inline void write_outputs(const ScenarioOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "manifest.ini", out.manifest);
  for (const auto& [name, t] : out.tables) write_text(dir / name, t.to_string());
  for (const auto& [name, text] : out.texts) write_text(dir / name, text);
  write_text(dir / "summary.ini", out.summary_text());
}

namespace detail {

inline void seal(Config& cfg, ScenarioOutput& out) {
  cfg.reject_unused();
  out.manifest = cfg.manifest();
}

inline void add_trace(ScenarioOutput& out, const std::string& name, const OptimizerTrace& trace) {
  auto t = trace_table(trace);
  t.source = name;
  out.tables.emplace_back(name, std::move(t));
}

inline void finish_summary(ScenarioOutput& out, double background) {
  std::vector<CsvTable> traces;
  for (const auto& [name, t] : out.tables) {
    if (is_trace(t)) traces.push_back(t);
  }
  if (!traces.empty()) out.summary = summarize_tables(traces, background);
}

inline void count_safety(ScenarioOutput& out, Termination t) {
  if (t == Termination::safety_net) ++out.safety_net_events;
}

/// A readout of `rate` over `t`: Poisson when `noisy`, else the exact rate.
struct ScanReadout {
  std::uint64_t counts;
  double rate;
};
inline ScanReadout scan_readout(double rate, double t, bool noisy, std::mt19937_64& rng) {
  if (noisy) {
    const auto r = read_photons(rate, t, rng);
    return {r.counts, r.rate()};
  }
  return {static_cast<std::uint64_t>(std::llround(rate * t)), rate};
}

}  // namespace detail

//---------------------------------------------------------------------------//
// Charging calibration
//---------------------------------------------------------------------------//

/// Field magnitude `a` along `direction` (radians) such that charging toward
/// e_stray + a * u for `duration` seconds, without jitter, lowers the rate at `v` to (1 - drop) of its present value.
/// Secant iteration on the noiseless model.
inline Vec2 calibrate_charging_target(const SimulatedTrap& trap, const ControlVector& v, double duration,
                                      double drop, double direction) {
  if (!(drop > 0 && drop < 1)) throw ConfigError("charging: drop must be in (0, 1)");
  if (!(duration > 0)) throw ConfigError("charging: duration must be > 0");
  const auto& p = trap.physics();
  const StrayFieldState s0 = trap.stray();
  const double reach = -std::expm1(-duration / s0.tau);
  const Vec2 u{std::cos(direction), std::sin(direction)};
  const double start = fluorescence_rate(v, s0, p, trap.coefficients());
  const double goal = (1.0 - drop) * start;
  auto excess = [&](double a) {
    StrayFieldState s = s0;
    s.e_stray = {s0.e_stray[0] + a * reach * u[0], s0.e_stray[1] + a * reach * u[1]};
    return fluorescence_rate(v, s, p, trap.coefficients()) - goal;
  };
  double a0 = 0.0, f0 = excess(a0);
  double a1 = 1.0 / (p.beta_sensitivity > 0 ? p.beta_sensitivity : 1.0), f1 = excess(a1);
  for (int it = 0; it < 200 && std::abs(f1) > 1e-9 * start; ++it) {
    if (f1 == f0) throw ConfigError("charging: calibration stalled");
    double a2 = a1 - f1 * (a1 - a0) / (f1 - f0);
    if (a2 < 0) a2 = 0.5 * a1;
    a0 = a1;
    f0 = f1;
    a1 = a2;
    f1 = excess(a1);
  }
  if (std::abs(f1) > 1e-6 * start) throw ConfigError("charging: calibration did not converge");
  return {s0.e_stray[0] + a1 * u[0], s0.e_stray[1] + a1 * u[1]};
}

struct ChargingPlan {
  double minutes = 70.0;
  double drop = 0.35;  // calibrated fluorescence drop at the phase-1 optimum
  double direction_deg = 30.0;  // of the charge-induced field in the x-y plane
  bool calibrate = true;  // false: use stray.target_x / target_y as given
  double monitor_interval = 10.0;  // s between readouts while only monitoring
  int reopt_iterations = 75;
  double recovery_fraction = 0.97;  // of the phase-1 optimum
};

inline ChargingPlan load_charging(Config& c, ChargingPlan d = {}) {
  const std::string s = "charging";
  d.minutes = c.number(s, "minutes", d.minutes);
  d.drop = c.number(s, "drop", d.drop);
  d.direction_deg = c.number(s, "direction_deg", d.direction_deg);
  d.calibrate = c.flag(s, "calibrate", d.calibrate);
  d.monitor_interval = c.number(s, "monitor_interval", d.monitor_interval);
  d.reopt_iterations = static_cast<int>(c.integer(s, "reopt_iterations", d.reopt_iterations));
  d.recovery_fraction = c.number(s, "recovery_fraction", d.recovery_fraction);
  if (!(d.minutes > 0 && d.monitor_interval > 0 && d.reopt_iterations >= 0)) {
    throw ConfigError("charging: minutes and monitor_interval must be > 0, reopt_iterations >= 0");
  }
  return d;
}

//---------------------------------------------------------------------------//
// Scenarios
//---------------------------------------------------------------------------//

namespace detail {

inline void bench_metrics(ScenarioOutput& out, const Bench& b) {
  out.metrics.emplace_back("manual_evaluations", b.manual_evaluations);
  out.metrics.emplace_back("laser_offset_um", b.laser_offset);
  out.metrics.emplace_back("baseline_expected_rate", b.baseline_rate);
  out.metrics.emplace_back("optimum_expected_rate", b.optimum_rate);
  out.metrics.emplace_back("headroom", b.optimum_rate / b.baseline_rate);
}

inline ScenarioOutput baseline_adam(Config& cfg, std::uint64_t seed, ScenarioOutput out) {
  const auto bench_cfg = load_bench(cfg, 1.78);
  const auto adam = load_adam(cfg, AdamConfig::trap_defaults());
  out.forbid_safety_net = cfg.flag("scenario", "forbid_safety_net", false);
  seal(cfg, out);

  auto b = build_bench(bench_cfg, seed);
  const auto res = adam_run(b.trap, b.baseline, bench_cfg.space, adam, seed);
  count_safety(out, res.termination);
  add_trace(out, "trace.csv", res.trace);
  bench_metrics(out, b);
  out.metrics.emplace_back("best_expected_rate", b.trap.expected_rate(res.best));
  out.metrics.emplace_back("expected_ratio", b.trap.expected_rate(res.best) / b.baseline_rate);
  out.metrics.emplace_back("iterations", res.iterations);
  finish_summary(out, bench_cfg.physics.background_rate);
  return out;
}

inline ScenarioOutput mloop_run(Config& cfg, std::uint64_t seed, ScenarioOutput out) {
  const auto bench_cfg = load_bench(cfg, 1.96);
  const auto sur = load_surrogate(cfg, SurrogateConfig{});
  out.forbid_safety_net = cfg.flag("scenario", "forbid_safety_net", false);
  seal(cfg, out);

  auto b = build_bench(bench_cfg, seed);
  const auto res = surrogate_run(b.trap, b.baseline, bench_cfg.space, sur, seed);
  count_safety(out, res.termination);
  std::optional<std::size_t> trigger;
  if (res.termination == Termination::safety_net) trigger = res.trigger_sample;
  auto t = store_table(res.store, trigger);
  t.source = "store.csv";
  out.tables.emplace_back("store.csv", std::move(t));
  out.texts.emplace_back("net.txt", res.net.serialize());

  bench_metrics(out, b);
  std::size_t first_nn = res.store.size();
  double best_de = 0, best_nn = 0;
  for (std::size_t k = 0; k < res.store.size(); ++k) {
    const auto& r = res.store[k];
    if (r.source == SampleSource::nn) {
      first_nn = std::min(first_nn, k);
      best_nn = std::max(best_nn, r.rate());
    } else {
      best_de = std::max(best_de, r.rate());
    }
  }
  out.metrics.emplace_back("best_expected_rate", b.trap.expected_rate(res.best));
  out.metrics.emplace_back("expected_ratio", b.trap.expected_rate(res.best) / b.baseline_rate);
  out.metrics.emplace_back("samples", static_cast<double>(res.store.size()));
  out.metrics.emplace_back("first_nn_sample", static_cast<double>(first_nn));
  out.metrics.emplace_back("best_de_rate", best_de);
  out.metrics.emplace_back("best_nn_rate", best_nn);
  out.metrics.emplace_back("trainings", res.trainings);
  out.metrics.emplace_back("noise_sigma", res.noise_sigma);
  finish_summary(out, bench_cfg.physics.background_rate);
  return out;
}

/// Phase 1 of both charging scenarios: optimize from the manual baseline,
/// then fix the charge-induced target field.
struct ChargingStart {
  Bench bench;
  AdamResult phase1;
  double optimum = 0.0;  // expected rate at the phase-1 best
};

inline ChargingStart charging_phase1(const BenchConfig& bc, const AdamConfig& adam, const ChargingPlan& plan,
                                     std::uint64_t seed) {
  ChargingStart cs{build_bench(bc, seed), {}, 0.0};
  auto& trap = cs.bench.trap;
  cs.phase1 = adam_run(trap, cs.bench.baseline, bc.space, adam, seed);
  cs.optimum = trap.expected_rate(cs.phase1.best);
  if (plan.calibrate) {
    trap.stray().e_target = calibrate_charging_target(trap, cs.phase1.best, plan.minutes * 60.0, plan.drop,
                                                      plan.direction_deg * std::numbers::pi / 180.0);
  }
  trap.stray().charging_active = true;
  return cs;
}

inline void charging_metrics(ScenarioOutput& out, const ChargingStart& cs) {
  bench_metrics(out, cs.bench);
  out.metrics.emplace_back("charging_target_x", cs.bench.trap.stray().e_target[0]);
  out.metrics.emplace_back("charging_target_y", cs.bench.trap.stray().e_target[1]);
  out.metrics.emplace_back("phase1_optimum_rate", cs.optimum);
  out.metrics.emplace_back("phase1_ratio", cs.optimum / cs.bench.baseline_rate);
}

inline ScenarioOutput charge_then_opt(Config& cfg, std::uint64_t seed, ScenarioOutput out) {
  const auto bc = load_bench(cfg, 1.27);
  const auto adam = load_adam(cfg, AdamConfig::trap_defaults());
  const auto plan = load_charging(cfg);
  const double monitor_t = cfg.number("charging", "monitor_integration", 0.1);
  if (!(monitor_t > 0 && monitor_t <= plan.monitor_interval)) {
    throw ConfigError("charging: monitor_integration must be in (0, monitor_interval]");
  }
  AdamConfig reopt = adam;
  reopt.max_iterations = plan.reopt_iterations;
  out.forbid_safety_net = cfg.flag("scenario", "forbid_safety_net", false);
  seal(cfg, out);

  auto cs = charging_phase1(bc, adam, plan, seed);
  auto& trap = cs.bench.trap;
  count_safety(out, cs.phase1.termination);
  add_trace(out, "phase1_trace.csv", cs.phase1.trace);

  // Phase 2: hold the optimum and watch the counts while charging.
  CsvTable mon;
  mon.source = "phase2_charging.csv";
  mon.header = {"time_s", "counts", "integration_s", "rate"};
  const double charge_end = trap.time() + plan.minutes * 60.0;
  while (trap.time() + monitor_t <= charge_end + 1e-9) {
    const auto r = trap.read(monitor_t);
    mon.rows.push_back({format_number(r.timestamp), std::to_string(r.counts), format_number(monitor_t),
                        format_number(r.rate())});
    const double rest = std::min(plan.monitor_interval - monitor_t, charge_end - trap.time());
    if (rest > 0) trap.advance(rest);
  }
  const double charged_rate = trap.expected_rate(cs.phase1.best);
  trap.stray().charging_active = false;
  out.tables.emplace_back("phase2_charging.csv", std::move(mon));

  // Phase 3: reoptimize from the phase-1 setting.
  const double t3 = trap.time();
  double recovery_time = std::numeric_limits<double>::infinity();
  AdamObserver watch{[&](const TraceRecord& r) {
    if (!std::isfinite(recovery_time) && trap.expected_rate(r.v) >= plan.recovery_fraction * cs.optimum) {
      recovery_time = r.time - t3;
    }
  }};
  const auto phase3 = adam_run(trap, cs.phase1.best, bc.space, reopt, seed + 1, watch);
  count_safety(out, phase3.termination);
  add_trace(out, "phase3_trace.csv", phase3.trace);

  charging_metrics(out, cs);
  out.metrics.emplace_back("charged_rate", charged_rate);
  out.metrics.emplace_back("charging_drop", 1.0 - charged_rate / cs.optimum);
  out.metrics.emplace_back("charged_vs_phase1_start", charged_rate / cs.bench.baseline_rate);
  out.metrics.emplace_back("phase3_best_rate", trap.expected_rate(phase3.best));
  out.metrics.emplace_back("phase3_recovery", trap.expected_rate(phase3.best) / cs.optimum);
  out.metrics.emplace_back("phase3_improvement", trap.expected_rate(phase3.best) / charged_rate);
  out.metrics.emplace_back("recovery_minutes", recovery_time / 60.0);
  finish_summary(out, bc.physics.background_rate);
  return out;
}

inline ScenarioOutput opt_during_charging(Config& cfg, std::uint64_t seed, ScenarioOutput out) {
  const auto bc = load_bench(cfg, 1.27);
  const auto adam = load_adam(cfg, AdamConfig::trap_defaults());
  const auto plan = load_charging(cfg);
  out.forbid_safety_net = cfg.flag("scenario", "forbid_safety_net", true);
  seal(cfg, out);

  auto cs = charging_phase1(bc, adam, plan, seed);
  auto& trap = cs.bench.trap;
  count_safety(out, cs.phase1.termination);
  add_trace(out, "phase1_trace.csv", cs.phase1.trace);

  const double per_iteration =
      adam.readouts_per_iteration() * adam.readouts_per_point * adam.integration_time + adam.compute_overhead;
  AdamConfig live = adam;
  live.max_iterations = std::max(1, static_cast<int>(std::floor(plan.minutes * 60.0 / per_iteration)));
  double lowest = std::numeric_limits<double>::infinity();
  double sum = 0.0, last = 0.0;
  int n = 0;
  AdamObserver watch{[&](const TraceRecord& r) {
    const double ratio = trap.expected_rate(r.v) / cs.optimum;
    last = ratio;
    lowest = std::min(lowest, ratio);
    sum += ratio;
    ++n;
  }};
  const auto phase2 = adam_run(trap, cs.phase1.best, bc.space, live, seed + 1, watch);
  trap.stray().charging_active = false;
  count_safety(out, phase2.termination);
  add_trace(out, "phase2_trace.csv", phase2.trace);

  charging_metrics(out, cs);
  out.metrics.emplace_back("phase2_iterations", phase2.iterations);
  out.metrics.emplace_back("phase2_min_ratio", lowest);
  out.metrics.emplace_back("phase2_mean_ratio", sum / std::max(n, 1));
  out.metrics.emplace_back("phase2_final_ratio", last);
  // What holding the phase-1 setting would have come to.
  out.metrics.emplace_back("phase1_setting_drop", 1.0 - trap.expected_rate(cs.phase1.best) / cs.optimum);
  finish_summary(out, bc.physics.background_rate);
  return out;
}

inline ScenarioOutput detuning_scan(Config& cfg, std::uint64_t seed, ScenarioOutput out) {
  const auto bc = load_bench(cfg, 1.78);
  const std::string s = "detuning";
  const double lo = cfg.number(s, "min", -30.0), hi = cfg.number(s, "max", 30.0);
  const double step = cfg.number(s, "step", 1.0);
  const double t = cfg.number(s, "integration_time", 0.1);
  LineshapeOptions opt;
  opt.micromotion_sidebands = cfg.flag(s, "sidebands", true);
  if (!(hi > lo && step > 0 && t > 0)) throw ConfigError("detuning: need max > min, step > 0, integration_time > 0");
  out.forbid_safety_net = cfg.flag("scenario", "forbid_safety_net", false);
  seal(cfg, out);

  auto b = build_bench(bc, seed);
  std::vector<double> det;
  for (long k = 0; lo + static_cast<double>(k) * step <= hi + 1e-9 * step; ++k) det.push_back(lo + static_cast<double>(k) * step);
  const auto expected = lineshape_scan(det, b.baseline, b.trap.stray(), bc.physics, b.trap.coefficients(), opt);
  std::mt19937_64 rng(seed ^ 0x6a09e667f3bcc909ULL);
  const bool noisy = bc.simulator.shot_noise;
  std::vector<double> rates, sigma;
  std::vector<std::uint64_t> counts;
  for (double r : expected) {
    const auto rd = detail::scan_readout(r, t, noisy, rng);
    counts.push_back(rd.counts);
    rates.push_back(rd.rate);
    sigma.push_back(std::sqrt(std::max<double>(static_cast<double>(rd.counts), 1.0)) / t);
  }
  const auto fit = fit_lorentzian(det, rates, noisy ? std::span<const double>(sigma) : std::span<const double>{});
  CsvTable tab;
  tab.source = "detuning.csv";
  tab.header = {"detuning_mhz", "counts", "integration_s", "rate", "fit", "residual"};
  double worst = 0;
  for (std::size_t k = 0; k < det.size(); ++k) {
    tab.rows.push_back({format_number(det[k]), std::to_string(counts[k]), format_number(t), format_number(rates[k]),
                        format_number(rates[k] - fit.residuals[k]), format_number(fit.residuals[k])});
    worst = std::max(worst, std::abs(fit.residuals[k]));
  }
  out.tables.emplace_back("detuning.csv", std::move(tab));
  bench_metrics(out, b);
  out.metrics.emplace_back("fit_amplitude", fit.amplitude);
  out.metrics.emplace_back("fit_center_mhz", fit.center);
  out.metrics.emplace_back("fit_fwhm_mhz", fit.fwhm);
  out.metrics.emplace_back("fit_offset", fit.offset);
  out.metrics.emplace_back("max_abs_residual", worst);
  return out;
}

inline ScenarioOutput power_scan(Config& cfg, std::uint64_t seed, ScenarioOutput out) {
  const auto bc = load_bench(cfg, 1.78);
  const auto adam = load_adam(cfg, AdamConfig::trap_defaults());
  const std::string s = "power";
  const double p_sat = cfg.number(s, "p_sat", 1.8);
  const double max_power = cfg.number(s, "max_power", 20.0);
  const int points = static_cast<int>(cfg.integer(s, "points", 81));
  const double t = cfg.number(s, "integration_time", 0.1);
  if (!(p_sat > 0 && max_power > 0 && points >= 3 && t > 0)) {
    throw ConfigError("power: need p_sat > 0, max_power > 0, points >= 3, integration_time > 0");
  }
  out.forbid_safety_net = cfg.flag("scenario", "forbid_safety_net", false);
  seal(cfg, out);

  auto b = build_bench(bc, seed);
  std::vector<double> powers;
  for (int k = 0; k < points; ++k) powers.push_back(max_power * k / (points - 1));
  std::mt19937_64 rng(seed ^ 0xbb67ae8584caa73bULL);
  const bool noisy = bc.simulator.shot_noise;
  auto scan = [&](const ControlVector& v, const std::string& name, const std::string& tag) {
    const auto expected = saturation_scan(powers, p_sat, v, b.trap.stray(), bc.physics, b.trap.coefficients());
    std::vector<double> rates, sigma;
    std::vector<std::uint64_t> counts;
    for (double r : expected) {
      const auto rd = detail::scan_readout(r, t, noisy, rng);
      counts.push_back(rd.counts);
      rates.push_back(rd.rate);
      sigma.push_back(std::sqrt(std::max<double>(static_cast<double>(rd.counts), 1.0)) / t);
    }
    const auto fit = fit_saturation(powers, rates, bc.physics, noisy ? std::span<const double>(sigma) : std::span<const double>{});
    CsvTable tab;
    tab.source = name;
    tab.header = {"power_uw", "counts", "integration_s", "rate", "fit"};
    for (std::size_t k = 0; k < powers.size(); ++k) {
      tab.rows.push_back({format_number(powers[k]), std::to_string(counts[k]), format_number(t),
                          format_number(rates[k]), format_number(saturation_rate(powers[k], fit.p_sat, bc.physics, fit.ceiling) - bc.physics.background_rate + fit.background)});
    }
    out.tables.emplace_back(name, std::move(tab));
    const double truth = effective_saturation_power(p_sat, v, b.trap.stray(), bc.physics, b.trap.coefficients());
    out.metrics.emplace_back("p_sat_" + tag + "_true", truth);
    out.metrics.emplace_back("p_sat_" + tag + "_fit", fit.p_sat);
    out.metrics.emplace_back("p_sat_" + tag + "_rel_error", fit.p_sat / truth - 1.0);
  };
  bench_metrics(out, b);
  scan(b.baseline, "power_pre.csv", "pre");
  const auto res = adam_run(b.trap, b.baseline, bc.space, adam, seed);
  count_safety(out, res.termination);
  add_trace(out, "trace.csv", res.trace);
  scan(res.best, "power_post.csv", "post");
  out.metrics.emplace_back("expected_ratio", b.trap.expected_rate(res.best) / b.baseline_rate);
  finish_summary(out, bc.physics.background_rate);
  return out;
}

inline ScenarioOutput quadratic_bench(Config& cfg, std::uint64_t seed, ScenarioOutput out) {
  const auto qc = load_quadratic(cfg);
  AdamConfig adam_defaults = AdamConfig::uniform(0.01, 0.05);
  adam_defaults.max_iterations = 500;
  adam_defaults.step_size[kLaserIndex] = 0.01;
  adam_defaults.fd_step[kLaserIndex] = 0.05;
  const auto adam = load_adam(cfg, adam_defaults);
  const auto sur = load_surrogate(cfg, SurrogateConfig{});
  out.forbid_safety_net = cfg.flag("scenario", "forbid_safety_net", false);
  seal(cfg, out);

  const QuadraticObjective f(qc, seed);
  const double sigma = quadratic_noise_sigma(f, qc);
  QuadraticInstrument a_inst(f, sigma, seed ^ 0x3c6ef372fe94f82bULL);
  const auto a = adam_run(a_inst, f.start(), f.space(), adam, seed);
  QuadraticInstrument s_inst(f, sigma, seed ^ 0xa54ff53a5f1d36f1ULL);
  const auto m = surrogate_run(s_inst, f.start(), f.space(), sur, seed);
  count_safety(out, a.termination);
  count_safety(out, m.termination);
  add_trace(out, "adam_trace.csv", a.trace);
  std::optional<std::size_t> trigger;
  if (m.termination == Termination::safety_net) trigger = m.trigger_sample;
  auto t = store_table(m.store, trigger);
  t.source = "surrogate_store.csv";
  out.tables.emplace_back("surrogate_store.csv", std::move(t));

  out.metrics.emplace_back("start_gap", f.relative_gap(f.start()));
  out.metrics.emplace_back("noise_sigma", sigma);
  out.metrics.emplace_back("adam_gap", f.relative_gap(a.best));
  out.metrics.emplace_back("surrogate_gap", f.relative_gap(m.best));
  out.metrics.emplace_back("adam_readouts", static_cast<double>(a_inst.readout_count()));
  out.metrics.emplace_back("surrogate_readouts", static_cast<double>(s_inst.readout_count()));
  out.metrics.emplace_back("adam_model_time_s", a_inst.time());
  out.metrics.emplace_back("surrogate_model_time_s", s_inst.time());
  out.metrics.emplace_back("model_time_ratio", a_inst.time() / s_inst.time());
  finish_summary(out, 0.0);
  return out;
}

}  // namespace detail

/// Runs `name` against `cfg`. The seed comes from `seed` or else from the
/// config's [run] section (as written to every manifest). Throws ConfigError
/// for invalid settings, unknown scenarios and unknown keys.
inline ScenarioOutput run_scenario(const std::string& name, Config& cfg, std::optional<std::uint64_t> seed) {
  if (std::find(scenario_names().begin(), scenario_names().end(), name) == scenario_names().end()) {
    throw ConfigError("unknown scenario '" + name + "'");
  }
  const std::string recorded = cfg.text("run", "scenario", name);
  if (recorded != name) throw ConfigError("config is a manifest for '" + recorded + "', not '" + name + "'");
  if (seed) {
    cfg.set("run", "seed", std::to_string(*seed));
  } else if (!cfg.has("run", "seed")) {
    throw ConfigError("no seed: pass --seed or set [run] seed");
  }
  const long long s = cfg.integer("run", "seed", 0);
  if (s < 0) throw ConfigError("run.seed must be >= 0");
  cfg.note("run", "version", kVersion);
  cfg.note("run", "csv_format", std::to_string(kCsvFormat));

  ScenarioOutput out;
  out.scenario = name;
  out.seed = static_cast<std::uint64_t>(s);
  if (name == "baseline-adam") return detail::baseline_adam(cfg, out.seed, std::move(out));
  if (name == "mloop-run") return detail::mloop_run(cfg, out.seed, std::move(out));
  if (name == "charge-then-opt") return detail::charge_then_opt(cfg, out.seed, std::move(out));
  if (name == "opt-during-charging") return detail::opt_during_charging(cfg, out.seed, std::move(out));
  if (name == "detuning-scan") return detail::detuning_scan(cfg, out.seed, std::move(out));
  if (name == "power-scan") return detail::power_scan(cfg, out.seed, std::move(out));
  return detail::quadratic_bench(cfg, out.seed, std::move(out));
}

}  // namespace straycomp
