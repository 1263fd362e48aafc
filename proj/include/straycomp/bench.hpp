#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>

#include "straycomp/instrument.hpp"
#include "straycomp/trap_model.hpp"
#include "straycomp/waveforms.hpp"

namespace straycomp {

/// Everything needed to stand up a simulated trap with a manually
/// compensated starting point.
struct BenchConfig {
  TrapPhysics physics{};
  TrapGeometry geometry{};
  std::optional<FieldCoefficients> coefficients;  // default: from geometry
  std::optional<WaveformBasis> waveforms;  // default: from geometry
  StrayFieldState stray{{18.0, -24.0}, false, {0.0, 0.0}, 1800.0, 0.02, 0.0};
  ParameterSpace space = ParameterSpace::trap();
  SimulatorOptions simulator{true, true, {}, 1.0};
  double imperfection = 0.05;  // per-electrode waveform error
  ManualSearch manual = default_manual_search();
  double headroom = 1.78;  // best achievable / baseline; <= 0 leaves the laser on the focus

  static ManualSearch default_manual_search() {
    ManualSearch m;
    m.ranges[0] = {-0.5, 0.5, 0.01};
    m.ranges[1] = {-0.5, 0.5, 0.01};
    m.ranges[2] = {-1.0, 1.0, 0.25};
    m.ranges[3] = {-1.0, 1.0, 0.25};
    m.passes = 2;
    m.readouts_per_point = 3;
    return m;
  }
};

struct Bench {
  SimulatedTrap trap;
  WaveformBasis basis;  // as built into the trap, imperfections included
  WaveformWeights weights;  // manual result
  ControlVector baseline;  // manual weights composed at the offset laser position
  double laser_offset = 0.0;  // um, focus minus baseline laser position
  double baseline_rate = 0.0;  // expected counts/s at the baseline
  double optimum_rate = 0.0;  // expected counts/s with the field nulled and the laser centred
  int manual_evaluations = 0;
};

/// Laser offset d >= 0 such that rate(baseline) = optimum / headroom, where the
/// baseline keeps the manual residual micromotion `beta_manual`.
inline double headroom_offset(const TrapPhysics& p, double beta_manual, double headroom) {
  if (!(headroom > 0)) return 0.0;
  const double optimum = p.peak_rate * relative_population(p.beta_floor, p) + p.background_rate;
  const double ion = p.peak_rate * relative_population(beta_manual, p);
  const double overlap = (optimum / headroom - p.background_rate) / ion;
  if (overlap >= 1.0) return 0.0;
  if (!(overlap > 0.0)) throw ConfigError("headroom too large for the background rate");
  return p.laser_waist * std::sqrt(-0.5 * std::log(overlap));
}

/// Builds the simulator, runs the manual four-weight search with the laser on
/// the focus, then moves the laser so that the requested headroom remains.
inline Bench build_bench(const BenchConfig& cfg, std::uint64_t seed) {
  cfg.physics.validate();
  if (!(cfg.imperfection >= 0 && cfg.imperfection < 1)) throw ConfigError("imperfection must be in [0, 1)");
  const FieldCoefficients coeffs = cfg.coefficients.value_or(FieldCoefficients::from_geometry(cfg.geometry));
  const WaveformBasis ideal = cfg.waveforms.value_or(default_waveforms(cfg.geometry));
  const WaveformBasis basis = with_imperfection(ideal, cfg.imperfection, seed ^ 0x5bd1e995ULL);
  Bench b{SimulatedTrap(cfg.physics, coeffs, cfg.stray, cfg.space, seed, cfg.simulator), basis, {}, {}, 0.0,
          0.0, 0.0, 0};

  const double focus = cfg.space.quantize(kLaserIndex, cfg.physics.ion_x);
  const auto manual = manual_compensation(b.trap, cfg.manual, basis, WaveformWeights{}, focus, cfg.space);
  b.weights = manual.weights;
  b.manual_evaluations = manual.evaluations;

  const ControlVector centred = compose(b.weights, basis, focus, cfg.space);
  const double beta = micromotion_index(field_at_ion(centred, coeffs, b.trap.stray()), cfg.physics);
  b.laser_offset = headroom_offset(cfg.physics, beta, cfg.headroom);
  b.baseline = compose(b.weights, basis, focus - b.laser_offset, cfg.space);
  b.laser_offset = focus - b.baseline.laser_x;
  b.trap.apply(b.baseline);
  b.baseline_rate = b.trap.expected_rate(b.baseline);
  b.optimum_rate = cfg.physics.peak_rate * relative_population(cfg.physics.beta_floor, cfg.physics) +
                   cfg.physics.background_rate;
  return b;
}

}  // namespace straycomp
