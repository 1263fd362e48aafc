#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <random>

#include "straycomp/core.hpp"
#include "straycomp/trap_model.hpp"

namespace straycomp {

/// What the optimizers drive: write a setting, read a counter window, let
/// model time pass. read() advances the instrument clock by the window length.
template <class T>
concept Instrument = requires(T& inst, const ControlVector& v, double t) {
  inst.apply(v);
  { inst.read(t) } -> std::same_as<PhotonReadout>;
  inst.advance(t);
  { inst.time() } -> std::convertible_to<double>;
};

/// Slow multiplicative drift of the ion signal (laser power, locking, mechanics):
/// a daily sinusoid plus a bounded random walk.
struct DriftModel {
  double peak_to_peak = 0.05;  // fraction, sinusoid part
  double period = 86400.0;  // s
  double walk_rms = 5e-5;  // fraction per sqrt(s)
  double walk_limit = 0.025;  // |walk| is reflected at this bound
};

struct SimulatorOptions {
  bool shot_noise = true;  // Poisson counting; otherwise counts = round(rate * t)
  bool drift = false;
  DriftModel drift_model{};
  double max_substep = 1.0;  // s, Euler step cap for the charging model
};

/// The simulated trap behind an instrument interface. Single owner; every
/// random stream is derived from the construction seed, so identical seeds and
/// command sequences give bit-identical readouts.
class SimulatedTrap {
 public:
  SimulatedTrap(TrapPhysics physics, FieldCoefficients coeffs, StrayFieldState stray,
                ParameterSpace space, std::uint64_t seed, SimulatorOptions options = {})
      : physics_(physics),
        coeffs_(coeffs),
        stray_(stray),
        space_(space),
        options_(options),
        readout_rng_(stream_seed(seed, 1)),
        charging_rng_(stream_seed(seed, 2)),
        drift_rng_(stream_seed(seed, 3)) {
    physics_.validate();
    coeffs_.validate();
    stray_.validate();
    applied_.laser_x = physics_.ion_x;
    applied_ = space_.quantize(applied_);
    drift_phase_ = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(drift_rng_);
  }

  void apply(const ControlVector& v) { applied_ = space_.quantize(v); }

  PhotonReadout read(double t) {
    const double rate = signal_rate();
    advance(t);
    ++readouts_;
    if (options_.shot_noise) return read_photons(rate, t, readout_rng_, stray_.time);
    PhotonReadout r;
    r.counts = static_cast<std::uint64_t>(std::llround(rate * t));
    r.integration_time = t;
    r.timestamp = stray_.time;
    return r;
  }

  void advance(double dt) {
    if (!(dt > 0)) return;
    const int steps = std::max(1, static_cast<int>(std::ceil(dt / options_.max_substep)));
    const double h = dt / steps;
    for (int k = 0; k < steps; ++k) {
      stray_ = step_charging(stray_, h, charging_rng_);
      if (options_.drift) {
        const auto& d = options_.drift_model;
        walk_ += std::normal_distribution<double>(0.0, d.walk_rms * std::sqrt(h))(drift_rng_);
        if (walk_ > d.walk_limit) walk_ = 2 * d.walk_limit - walk_;
        if (walk_ < -d.walk_limit) walk_ = -2 * d.walk_limit - walk_;
      }
    }
  }

  double time() const { return stray_.time; }

  /// Noise-free rate at the applied setting, without drift.
  double expected_rate() const { return expected_rate(applied_); }
  double expected_rate(const ControlVector& v) const {
    return fluorescence_rate(space_.quantize(v), stray_, physics_, coeffs_);
  }
  /// Multiplier applied to the ion part of the signal.
  double drift_factor() const {
    if (!options_.drift) return 1.0;
    const auto& d = options_.drift_model;
    return 1.0 + 0.5 * d.peak_to_peak * std::sin(2.0 * std::numbers::pi * stray_.time / d.period + drift_phase_) +
           walk_;
  }

  const ControlVector& applied() const { return applied_; }
  const TrapPhysics& physics() const { return physics_; }
  const FieldCoefficients& coefficients() const { return coeffs_; }
  const ParameterSpace& space() const { return space_; }
  const StrayFieldState& stray() const { return stray_; }
  StrayFieldState& stray() { return stray_; }
  SimulatorOptions& options() { return options_; }
  std::uint64_t readout_count() const { return readouts_; }

 private:
  static std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    std::uint64_t out = 0;
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    out = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
    return out;
  }

  double signal_rate() const {
    const double bkg = physics_.background_rate;
    const double ion = fluorescence_rate(applied_, stray_, physics_, coeffs_) - bkg;
    return std::max(0.0, ion * drift_factor()) + bkg;
  }

  TrapPhysics physics_;
  FieldCoefficients coeffs_;
  StrayFieldState stray_;
  ParameterSpace space_;
  SimulatorOptions options_;
  ControlVector applied_{};
  std::mt19937_64 readout_rng_;
  std::mt19937_64 charging_rng_;
  std::mt19937_64 drift_rng_;
  double drift_phase_ = 0.0;
  double walk_ = 0.0;
  std::uint64_t readouts_ = 0;
};

static_assert(Instrument<SimulatedTrap>);

}  // namespace straycomp
