#pragma once

#include <string>
#include <vector>

#include "straycomp/adam.hpp"
#include "straycomp/bench.hpp"
#include "straycomp/config.hpp"
#include "straycomp/quadratic_bench.hpp"
#include "straycomp/surrogate.hpp"

namespace straycomp {

// Mapping between config sections and the library's parameter structs. Each
// loader takes the defaults to fall back on, so scenarios can differ in their
// defaults while sharing key names.

namespace detail {

template <std::size_t N>
std::vector<double> to_vector(const std::array<double, N>& a) {
  return {a.begin(), a.end()};
}

template <std::size_t N>
std::array<double, N> to_array(const std::vector<double>& v) {
  std::array<double, N> a{};
  std::copy_n(v.begin(), N, a.begin());
  return a;
}

}  // namespace detail

inline TrapPhysics load_physics(Config& c, TrapPhysics d = {}) {
  const std::string s = "physics";
  d.detuning = c.number(s, "detuning", d.detuning);
  d.linewidth = c.number(s, "linewidth", d.linewidth);
  d.rf_frequency = c.number(s, "rf_frequency", d.rf_frequency);
  d.peak_rate = c.number(s, "peak_rate", d.peak_rate);
  d.background_rate = c.number(s, "background_rate", d.background_rate);
  d.beta_sensitivity = c.number(s, "beta_sensitivity", d.beta_sensitivity);
  d.beta_floor = c.number(s, "beta_floor", d.beta_floor);
  d.laser_waist = c.number(s, "laser_waist", d.laser_waist);
  d.ion_x = c.number(s, "ion_x", d.ion_x);
  d.collection_efficiency = c.number(s, "collection_efficiency", d.collection_efficiency);
  d.saturation = c.number(s, "saturation", d.saturation);
  d.validate();
  return d;
}

inline TrapGeometry load_geometry(Config& c, TrapGeometry d = {}) {
  const std::string s = "geometry";
  d.trap_length = c.number(s, "trap_length", d.trap_length);
  d.row_offset = c.number(s, "row_offset", d.row_offset);
  d.ion_height = c.number(s, "ion_height", d.ion_height);
  d.ion_axial = c.number(s, "ion_axial", d.ion_axial);
  if (!(d.trap_length > 0 && d.row_offset >= 0 && d.ion_height >= 0)) throw ConfigError("geometry: bad dimensions");
  return d;
}

/// Rows `x` and `y`, 44 values each (V/m per V).
inline FieldCoefficients load_coefficients(Config& c, const TrapGeometry& g) {
  const auto d = FieldCoefficients::from_geometry(g);
  FieldCoefficients out;
  out.rows[0] = detail::to_array<kElectrodeCount>(c.array("coefficients", "x", kElectrodeCount, detail::to_vector(d.rows[0])));
  out.rows[1] = detail::to_array<kElectrodeCount>(c.array("coefficients", "y", kElectrodeCount, detail::to_vector(d.rows[1])));
  out.validate();
  return out;
}

inline StrayFieldState load_stray(Config& c, StrayFieldState d) {
  const std::string s = "stray";
  d.e_stray[0] = c.number(s, "e_x", d.e_stray[0]);
  d.e_stray[1] = c.number(s, "e_y", d.e_stray[1]);
  d.charging_active = c.flag(s, "charging_active", d.charging_active);
  d.e_target[0] = c.number(s, "target_x", d.e_target[0]);
  d.e_target[1] = c.number(s, "target_y", d.e_target[1]);
  d.tau = c.number(s, "tau", d.tau);
  d.jitter_rms = c.number(s, "jitter_rms", d.jitter_rms);
  d.validate();
  return d;
}

inline SimulatorOptions load_simulator(Config& c, SimulatorOptions d) {
  const std::string s = "simulator";
  d.shot_noise = c.flag(s, "shot_noise", d.shot_noise);
  d.drift = c.flag(s, "drift", d.drift);
  d.drift_model.peak_to_peak = c.number(s, "drift_peak_to_peak", d.drift_model.peak_to_peak);
  d.drift_model.period = c.number(s, "drift_period", d.drift_model.period);
  d.drift_model.walk_rms = c.number(s, "drift_walk_rms", d.drift_model.walk_rms);
  d.drift_model.walk_limit = c.number(s, "drift_walk_limit", d.drift_model.walk_limit);
  d.max_substep = c.number(s, "max_substep", d.max_substep);
  if (!(d.max_substep > 0) || !(d.drift_model.period > 0) || d.drift_model.walk_rms < 0 ||
      d.drift_model.walk_limit < 0 || d.drift_model.peak_to_peak < 0) {
    throw ConfigError("simulator: bad drift or substep settings");
  }
  return d;
}

inline ParameterSpace load_trap_space(Config& c) {
  const std::string s = "space";
  const double volt_limit = c.number(s, "volt_limit", 20.0);
  const double volt_step = c.number(s, "volt_step", 0.01);
  const double laser_min = c.number(s, "laser_min", 0.0);
  const double laser_max = c.number(s, "laser_max", 800.0);
  const double laser_step = c.number(s, "laser_step", 0.1);
  if (!(volt_limit > 0 && volt_step > 0 && laser_step > 0 && laser_max > laser_min)) {
    throw ConfigError("space: bad limits or steps");
  }
  return ParameterSpace::trap(volt_limit, volt_step, laser_min, laser_max, laser_step);
}

/// Four 44-entry arrays `x`, `y`, `harmonic`, `rotation` (V at unit weight).
inline WaveformBasis load_waveforms(Config& c, const TrapGeometry& g) {
  const auto d = default_waveforms(g);
  WaveformBasis b = d;
  auto one = [&](Waveform& w, const Waveform& def) {
    w.volts = detail::to_array<kElectrodeCount>(c.array("waveforms", w.name, kElectrodeCount, detail::to_vector(def.volts)));
  };
  one(b.x, d.x);
  one(b.y, d.y);
  one(b.harmonic, d.harmonic);
  one(b.rotation, d.rotation);
  return b;
}

inline ManualSearch load_manual(Config& c, ManualSearch d) {
  const std::string s = "manual";
  const char* names[4] = {"x", "y", "harmonic", "rotation"};
  for (std::size_t k = 0; k < 4; ++k) {
    const std::string n = names[k];
    d.ranges[k].lower = c.number(s, n + "_min", d.ranges[k].lower);
    d.ranges[k].upper = c.number(s, n + "_max", d.ranges[k].upper);
    d.ranges[k].step = c.number(s, n + "_step", d.ranges[k].step);
    if (d.ranges[k].upper < d.ranges[k].lower) throw ConfigError("manual: " + n + "_max < " + n + "_min");
  }
  d.passes = static_cast<int>(c.integer(s, "passes", d.passes));
  d.readouts_per_point = static_cast<int>(c.integer(s, "readouts_per_point", d.readouts_per_point));
  d.integration_time = c.number(s, "integration_time", d.integration_time);
  if (d.passes < 1 || d.readouts_per_point < 1 || !(d.integration_time > 0)) {
    throw ConfigError("manual: passes and readouts_per_point must be >= 1, integration_time > 0");
  }
  return d;
}

/// Manual-baseline trap bench; `headroom` lives in [scenario].
inline BenchConfig load_bench(Config& c, double default_headroom) {
  BenchConfig b;
  b.physics = load_physics(c);
  b.geometry = load_geometry(c);
  b.coefficients = load_coefficients(c, b.geometry);
  b.waveforms = load_waveforms(c, b.geometry);
  b.imperfection = c.number("waveforms", "imperfection", b.imperfection);
  b.stray = load_stray(c, b.stray);
  b.space = load_trap_space(c);
  b.simulator = load_simulator(c, b.simulator);
  b.manual = load_manual(c, b.manual);
  b.headroom = c.number("scenario", "headroom", default_headroom);
  return b;
}

/// Electrode channels share `step_size` / `fd_step`; the laser channel has its own.
inline AdamConfig load_adam(Config& c, AdamConfig d) {
  const std::string s = "adam";
  const double step = c.number(s, "step_size", d.step_size[0]);
  const double step_laser = c.number(s, "step_size_laser", d.step_size[kLaserIndex]);
  const double fd = c.number(s, "fd_step", d.fd_step[0]);
  const double fd_laser = c.number(s, "fd_step_laser", d.fd_step[kLaserIndex]);
  for (std::size_t i = 0; i < kElectrodeCount; ++i) {
    d.step_size[i] = step;
    d.fd_step[i] = fd;
  }
  d.step_size[kLaserIndex] = step_laser;
  d.fd_step[kLaserIndex] = fd_laser;
  d.hyper.beta1 = c.number(s, "beta1", d.hyper.beta1);
  d.hyper.beta2 = c.number(s, "beta2", d.hyper.beta2);
  d.hyper.epsilon = c.number(s, "epsilon", d.hyper.epsilon);
  d.hyper.step_decay = c.flag(s, "step_decay", d.hyper.step_decay);
  d.integration_time = c.number(s, "integration_time", d.integration_time);
  d.abort_fraction = c.number(s, "abort_fraction", d.abort_fraction);
  d.max_iterations = static_cast<int>(c.integer(s, "max_iterations", d.max_iterations));
  d.readouts_per_point = static_cast<int>(c.integer(s, "readouts_per_point", d.readouts_per_point));
  const std::string est =
      c.text(s, "estimator", d.estimator == GradientEstimator::central ? "central" : "spsa");
  if (est == "central") {
    d.estimator = GradientEstimator::central;
  } else if (est == "spsa") {
    d.estimator = GradientEstimator::spsa;
  } else {
    throw ConfigError("adam.estimator: expected central or spsa, got '" + est + "'");
  }
  d.compute_overhead = c.number(s, "compute_overhead", d.compute_overhead);
  d.validate();
  return d;
}

inline SurrogateConfig load_surrogate(Config& c, SurrogateConfig d) {
  const std::string s = "surrogate";
  d.de.population_size = static_cast<int>(c.integer(s, "population_size", d.de.population_size));
  d.de.differential_weight = c.number(s, "differential_weight", d.de.differential_weight);
  d.de.crossover_rate = c.number(s, "crossover_rate", d.de.crossover_rate);
  d.de.max_move_fraction = c.number(s, "max_move_fraction", d.de.max_move_fraction);
  d.de.warmup_samples = static_cast<int>(c.integer(s, "warmup_samples", d.de.warmup_samples));
  d.train.batch_size = static_cast<int>(c.integer(s, "batch_size", d.train.batch_size));
  d.train.learning_rate = c.number(s, "learning_rate", d.train.learning_rate);
  d.train.weight_prior = c.number(s, "weight_prior", d.train.weight_prior);
  d.train.final_rate_fraction = c.number(s, "final_rate_fraction", d.train.final_rate_fraction);
  d.proposal.starts = static_cast<int>(c.integer(s, "proposal_starts", d.proposal.starts));
  d.proposal.ascent_steps = static_cast<int>(c.integer(s, "ascent_steps", d.proposal.ascent_steps));
  d.proposal.search_reach = c.number(s, "search_reach", d.proposal.search_reach);
  d.budget = static_cast<int>(c.integer(s, "budget", d.budget));
  d.retrain_every = static_cast<int>(c.integer(s, "retrain_every", d.retrain_every));
  d.nn_share = c.number(s, "nn_share", d.nn_share);
  d.initial_epochs = static_cast<int>(c.integer(s, "initial_epochs", d.initial_epochs));
  d.retrain_epochs = static_cast<int>(c.integer(s, "retrain_epochs", d.retrain_epochs));
  d.noise_sigma = c.number(s, "noise_sigma", d.noise_sigma);
  d.noise_readouts = static_cast<int>(c.integer(s, "noise_readouts", d.noise_readouts));
  d.integration_time = c.number(s, "integration_time", d.integration_time);
  d.sample_overhead = c.number(s, "sample_overhead", d.sample_overhead);
  d.abort_fraction = c.number(s, "abort_fraction", d.abort_fraction);
  d.search_scale = c.number(s, "search_scale", d.search_scale);
  d.validate();
  return d;
}

inline QuadraticBenchConfig load_quadratic(Config& c, QuadraticBenchConfig d = {}) {
  const std::string s = "quadratic";
  d.peak = c.number(s, "peak", d.peak);
  d.start_fraction = c.number(s, "start_fraction", d.start_fraction);
  d.center_range = c.number(s, "center_range", d.center_range);
  d.start_offset = c.number(s, "start_offset", d.start_offset);
  d.eig_lo = c.number(s, "eig_lo", d.eig_lo);
  d.eig_hi = c.number(s, "eig_hi", d.eig_hi);
  d.noise_fraction = c.number(s, "noise_fraction", d.noise_fraction);
  d.grid = c.number(s, "grid", d.grid);
  d.bound = c.number(s, "bound", d.bound);
  d.validate();
  return d;
}

}  // namespace straycomp
