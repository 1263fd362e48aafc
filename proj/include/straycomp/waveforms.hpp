#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include "straycomp/core.hpp"
#include "straycomp/instrument.hpp"
#include "straycomp/trap_model.hpp"

namespace straycomp {

using ElectrodeArray = std::array<double, kElectrodeCount>;

struct Waveform {
  std::string name;
  ElectrodeArray volts{};
  std::string nominal_effect;
};

/// The four operator waveforms. Entries are volts at unit weight.
struct WaveformBasis {
  Waveform x{"x", {}, "100 V/m along x"};
  Waveform y{"y", {}, "100 V/m along y"};
  Waveform harmonic{"harmonic", {}, "axial harmonic well, field-free at the ion"};
  Waveform rotation{"rotation", {}, "RF-plane axis rotation, field-free at the ion"};

  const Waveform& operator[](std::size_t k) const {
    switch (k) {
      case 0: return x;
      case 1: return y;
      case 2: return harmonic;
      default: return rotation;
    }
  }
  Waveform& operator[](std::size_t k) {
    return const_cast<Waveform&>(static_cast<const WaveformBasis&>(*this)[k]);
  }
  static constexpr std::size_t size() { return 4; }
};

struct WaveformWeights {
  double w_x = 0.0;
  double w_y = 0.0;
  double w_harmonic = 0.0;
  double w_rotation = 0.0;

  double& operator[](std::size_t k) {
    switch (k) {
      case 0: return w_x;
      case 1: return w_y;
      case 2: return w_harmonic;
      default: return w_rotation;
    }
  }
  double operator[](std::size_t k) const { return const_cast<WaveformWeights&>(*this)[k]; }
  friend bool operator==(const WaveformWeights&, const WaveformWeights&) = default;
};

/// Stand-in electrode profiles built from the trap geometry.
///
/// x is antisymmetric across the rows and y symmetric, both shaped like the
/// 1/d^2 falloff, peak 1 V and 2 V. With the geometry's coefficient matrix they
/// give exactly 100 V/m along x and y. The harmonic profile is a quadratic in
/// the axial coordinate shifted so its y field vanishes; the rotation profile
/// is row-antisymmetric and odd about the ion, so its x field vanishes.
inline WaveformBasis default_waveforms(const TrapGeometry& g = {}, double harmonic_peak = 4.0,
                                       double rotation_peak = 1.0) {
  const auto f = g.falloff();
  WaveformBasis b;
  double f_sum = 0.0, fu2_sum = 0.0;
  ElectrodeArray u{};
  for (std::size_t i = 0; i < kElectrodeCount; ++i) {
    u[i] = (g.axial_position(i) - g.ion_axial) / (0.5 * g.trap_length);
    f_sum += f[i];
    fu2_sum += f[i] * u[i] * u[i];
  }
  const double shift = fu2_sum / f_sum;
  double h_peak = 0.0, r_peak = 0.0;
  for (std::size_t i = 0; i < kElectrodeCount; ++i) {
    const double s = TrapGeometry::row_sign(i);
    b.x.volts[i] = s * f[i];
    b.y.volts[i] = 2.0 * f[i];
    b.harmonic.volts[i] = u[i] * u[i] - shift;
    b.rotation.volts[i] = s * u[i] * std::exp(-2.0 * u[i] * u[i]);
    h_peak = std::max(h_peak, std::abs(b.harmonic.volts[i]));
    r_peak = std::max(r_peak, std::abs(b.rotation.volts[i]));
  }
  for (std::size_t i = 0; i < kElectrodeCount; ++i) {
    b.harmonic.volts[i] *= harmonic_peak / h_peak;
    b.rotation.volts[i] *= rotation_peak / r_peak;
  }
  return b;
}

/// Applies a fixed per-electrode multiplicative error drawn uniformly from
/// [-fraction, +fraction], then rescales each waveform back to its original
/// peak magnitude. This is the mismatch between calculated and real waveforms.
inline WaveformBasis with_imperfection(WaveformBasis b, double fraction, std::uint64_t seed) {
  if (fraction <= 0) return b;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> err(-fraction, fraction);
  for (std::size_t k = 0; k < WaveformBasis::size(); ++k) {
    auto& v = b[k].volts;
    double before = 0.0, after = 0.0;
    for (double x : v) before = std::max(before, std::abs(x));
    for (auto& x : v) x *= 1.0 + err(rng);
    for (double x : v) after = std::max(after, std::abs(x));
    if (after > 0) {
      for (auto& x : v) x *= before / after;
    }
  }
  return b;
}

/// sum_k w_k * waveform_k, DAC-quantized; laser position passes through.
/// Throws std::out_of_range if any composed voltage leaves the space's range.
inline ControlVector compose(const WaveformWeights& w, const WaveformBasis& basis, double laser_x,
                             const ParameterSpace& space = ParameterSpace::trap()) {
  ControlVector v;
  for (std::size_t i = 0; i < kElectrodeCount; ++i) {
    double sum = 0.0;
    for (std::size_t k = 0; k < WaveformBasis::size(); ++k) sum += w[k] * basis[k].volts[i];
    if (!std::isfinite(sum) || sum < space.lower[i] || sum > space.upper[i]) {
      throw std::out_of_range("compose: electrode " + std::to_string(i + 1) + " at " +
                              std::to_string(sum) + " V is outside the DAC range");
    }
    v.electrode_volts[i] = sum;
  }
  v.laser_x = laser_x;
  return space.quantize(v);
}

struct WeightRange {
  double lower = 0.0;
  double upper = 0.0;
  double step = 0.0;  // <= 0 or zero-width range: the weight is not searched
};

struct ManualSearch {
  std::array<WeightRange, 4> ranges{};
  int passes = 2;
  int readouts_per_point = 1;
  double integration_time = 0.1;
};

struct ManualResult {
  WaveformWeights weights;
  double best_rate = 0.0;  // mean counts/s at the chosen weights
  int evaluations = 0;
};

/// Emulates an operator tuning the four waveform weights: coordinate-wise grid
/// sweeps over each weight in turn, keeping the best mean count rate.
template <Instrument I>
ManualResult manual_compensation(I& inst, const ManualSearch& search, const WaveformBasis& basis,
                                 WaveformWeights start, double laser_x,
                                 const ParameterSpace& space = ParameterSpace::trap()) {
  ManualResult out{start, 0.0, 0};
  auto measure = [&](const WaveformWeights& w) {
    inst.apply(compose(w, basis, laser_x, space));
    double sum = 0.0;
    for (int r = 0; r < search.readouts_per_point; ++r) sum += inst.read(search.integration_time).rate();
    ++out.evaluations;
    return sum / search.readouts_per_point;
  };

  bool any = false;
  for (const auto& r : search.ranges) any |= (r.step > 0 && r.upper > r.lower);
  if (!any) {
    out.best_rate = measure(start);
    return out;
  }

  out.best_rate = measure(out.weights);
  for (int pass = 0; pass < search.passes; ++pass) {
    for (std::size_t k = 0; k < 4; ++k) {
      const auto& r = search.ranges[k];
      if (!(r.step > 0 && r.upper > r.lower)) continue;
      const int points = static_cast<int>(std::floor((r.upper - r.lower) / r.step + 1e-9)) + 1;
      WaveformWeights best = out.weights;
      double best_rate = -1.0;
      for (int n = 0; n < points; ++n) {
        WaveformWeights trial = out.weights;
        trial[k] = r.lower + n * r.step;
        const double rate = measure(trial);
        if (rate > best_rate) {
          best_rate = rate;
          best = trial;
        }
      }
      out.weights = best;
      out.best_rate = best_rate;
    }
  }
  inst.apply(compose(out.weights, basis, laser_x, space));
  return out;
}

}  // namespace straycomp
