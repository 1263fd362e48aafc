#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "straycomp/bessel.hpp"
#include "straycomp/core.hpp"

namespace straycomp {

using Vec2 = std::array<double, 2>;

inline double norm(const Vec2& e) { return std::hypot(e[0], e[1]); }

/// Constants of the fluorescence chain. Frequencies in MHz, rates in counts/s.
struct TrapPhysics {
  double detuning = -7.8;  // delta_L, negative = red of resonance
  double linewidth = 20.0;  // gamma
  double rf_frequency = 25.5;  // Omega
  double peak_rate = 65000.0;  // ion fluorescence at beta = 0 and full laser overlap
  double background_rate = 1184.0;
  double beta_sensitivity = 0.05;  // beta per V/m of residual field
  double beta_floor = 0.05;  // RF phase-imbalance micromotion
  double laser_waist = 40.0;  // um
  double ion_x = 400.0;  // mirror focus along the laser steering axis, um
  double collection_efficiency = 0.00971;
  double saturation = 0.5;  // on-peak s0 of the cooling beam, used by the detuning scan

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(std::string("trap physics: ") + what);
    };
    require(std::isfinite(detuning), "detuning must be finite");
    require(linewidth > 0, "linewidth must be > 0");
    require(rf_frequency > 0, "rf_frequency must be > 0");
    require(peak_rate > 0, "peak_rate must be > 0");
    require(background_rate >= 0, "background_rate must be >= 0");
    require(beta_sensitivity >= 0, "beta_sensitivity must be >= 0");
    require(beta_floor >= 0, "beta_floor must be >= 0");
    require(laser_waist > 0, "laser_waist must be > 0");
    require(collection_efficiency > 0 && collection_efficiency <= 1,
            "collection_efficiency must be in (0, 1]");
    require(saturation >= 0, "saturation must be >= 0");
  }
};

/// Electrode layout used to build the default field-coefficient matrix and the
/// default waveforms: two rows of 22 electrodes along a 1400 um axis, odd
/// electrode numbers on the top row.
struct TrapGeometry {
  double trap_length = 1400.0;  // um
  double row_offset = 120.0;  // transverse distance from the RF null to each row, um
  double ion_height = 60.0;  // um
  double ion_axial = 700.0;  // mirror position along the axis, um

  static constexpr std::size_t per_row = kElectrodeCount / 2;
  double pitch() const { return trap_length / per_row; }
  double axial_position(std::size_t electrode) const {
    return (static_cast<double>(electrode / 2) + 0.5) * pitch();
  }
  /// +1 for the top row (odd electrode numbers), -1 for the bottom row.
  static double row_sign(std::size_t electrode) { return electrode % 2 == 0 ? 1.0 : -1.0; }

  /// Relative 1/d^2 influence of each electrode on the ion, peak value 1.
  std::array<double, kElectrodeCount> falloff() const {
    std::array<double, kElectrodeCount> f{};
    double peak = 0.0;
    for (std::size_t i = 0; i < kElectrodeCount; ++i) {
      const double dz = axial_position(i) - ion_axial;
      f[i] = 1.0 / (dz * dz + row_offset * row_offset + ion_height * ion_height);
      peak = std::max(peak, f[i]);
    }
    for (auto& v : f) v /= peak;
    return f;
  }
};

/// Field at the ion per volt on each electrode (V/m per V); row 0 is x, row 1 is y.
struct FieldCoefficients {
  std::array<std::array<double, kElectrodeCount>, 2> rows{};

  /// Antisymmetric x response and symmetric y response with 1/d^2 falloff,
  /// scaled so a 1 V peak antisymmetric pattern gives 100 V/m along x and a
  /// 2 V peak symmetric pattern gives 100 V/m along y.
  static FieldCoefficients from_geometry(const TrapGeometry& g = {}) {
    const auto f = g.falloff();
    double sum_sq = 0.0;
    for (double v : f) sum_sq += v * v;
    const double gx = 100.0 / sum_sq;
    const double gy = 50.0 / sum_sq;
    FieldCoefficients c;
    for (std::size_t i = 0; i < kElectrodeCount; ++i) {
      c.rows[0][i] = gx * TrapGeometry::row_sign(i) * f[i];
      c.rows[1][i] = gy * f[i];
    }
    return c;
  }

  void validate() const {
    double xx = 0, yy = 0, xy = 0;
    for (std::size_t i = 0; i < kElectrodeCount; ++i) {
      if (!std::isfinite(rows[0][i]) || !std::isfinite(rows[1][i])) {
        throw ConfigError("field coefficients must be finite");
      }
      xx += rows[0][i] * rows[0][i];
      yy += rows[1][i] * rows[1][i];
      xy += rows[0][i] * rows[1][i];
    }
    // Gram determinant relative to its scale; zero means the rows are parallel.
    if (!(xx > 0 && yy > 0) || (xx * yy - xy * xy) <= 1e-12 * xx * yy) {
      throw ConfigError("field coefficients must have rank 2");
    }
  }
};

/// Quasi-static stray field with first-order charging dynamics.
struct StrayFieldState {
  Vec2 e_stray{0.0, 0.0};  // V/m
  bool charging_active = false;
  Vec2 e_target{0.0, 0.0};  // V/m
  double tau = 1800.0;  // s
  double jitter_rms = 0.0;  // V/m per sqrt(s)
  double time = 0.0;  // s

  void validate() const {
    if (!std::isfinite(e_stray[0]) || !std::isfinite(e_stray[1])) {
      throw ConfigError("stray field must be finite");
    }
    if (!(tau > 0)) throw ConfigError("charging tau must be > 0");
    if (!(jitter_rms >= 0)) throw ConfigError("jitter_rms must be >= 0");
  }
};

/// Residual field at the ion: coefficients * electrode volts + stray field.
inline Vec2 field_at_ion(const ControlVector& v, const FieldCoefficients& coeffs,
                         const StrayFieldState& s) {
  Vec2 e = s.e_stray;
  for (std::size_t i = 0; i < kElectrodeCount; ++i) {
    e[0] += coeffs.rows[0][i] * v.electrode_volts[i];
    e[1] += coeffs.rows[1][i] * v.electrode_volts[i];
  }
  return e;
}

inline double micromotion_index(const Vec2& e_res, const TrapPhysics& p) {
  return p.beta_floor + p.beta_sensitivity * norm(e_res);
}

inline constexpr int kDefaultSidebandOrder = 50;

/// Sideband sum sum_m J_m^2(beta) / ((delta/gamma + m Omega/gamma)^2 + 1/4), i.e.
/// the excited-state population divided by the coupling constant.
///
/// Throws std::invalid_argument when m_max < ceil(beta) + 20 or when the
/// last retained sideband still carries J_m^2 >= 1e-12.
inline double excited_population(double beta, const TrapPhysics& p,
                                 int m_max = kDefaultSidebandOrder) {
  if (!(beta >= 0) || !std::isfinite(beta)) {
    throw std::invalid_argument("excited_population: beta must be finite and >= 0");
  }
  if (m_max < static_cast<int>(std::ceil(beta)) + 20) {
    throw std::invalid_argument("excited_population: m_max too small for beta");
  }
  const auto j = bessel_j_sequence(m_max, beta);
  const double tail = j[static_cast<std::size_t>(m_max)];
  if (tail * tail >= 1e-12) {
    throw std::invalid_argument("excited_population: truncation tail too large");
  }
  const double a = p.detuning / p.linewidth;
  const double b = p.rf_frequency / p.linewidth;
  // Sum the small far sidebands first.
  double sum = 0.0;
  for (int m = m_max; m >= 1; --m) {
    const double jm2 = j[static_cast<std::size_t>(m)] * j[static_cast<std::size_t>(m)];
    const double up = a + m * b;
    const double down = a - m * b;
    sum += jm2 / (up * up + 0.25) + jm2 / (down * down + 0.25);
  }
  sum += j[0] * j[0] / (a * a + 0.25);
  return sum;
}

/// P_e(beta) / P_e(0).
inline double relative_population(double beta, const TrapPhysics& p,
                                  int m_max = kDefaultSidebandOrder) {
  return excited_population(beta, p, m_max) / excited_population(0.0, p, m_max);
}

inline double laser_overlap(double laser_x, const TrapPhysics& p) {
  const double d = laser_x - p.ion_x;
  return std::exp(-2.0 * d * d / (p.laser_waist * p.laser_waist));
}

/// Expected count rate (counts/s) including background.
inline double fluorescence_rate(const ControlVector& v, const StrayFieldState& s,
                                const TrapPhysics& p, const FieldCoefficients& coeffs) {
  const double beta = micromotion_index(field_at_ion(v, coeffs, s), p);
  return p.peak_rate * relative_population(beta, p) * laser_overlap(v.laser_x, p) +
         p.background_rate;
}

/// Poisson shot-noise readout of a counter integrating `rate` for `t` seconds.
template <class Rng>
PhotonReadout read_photons(double rate, double t, Rng& rng, double timestamp = 0.0) {
  if (!(rate >= 0) || !(t > 0)) {
    throw std::invalid_argument("read_photons: need rate >= 0 and t > 0");
  }
  PhotonReadout r;
  r.integration_time = t;
  r.timestamp = timestamp;
  const double mean = rate * t;
  if (mean > 0) r.counts = std::poisson_distribution<std::uint64_t>(mean)(rng);
  return r;
}

/// One Euler step of the charging model. While charging the field relaxes
/// toward e_target with time constant tau; otherwise it only jitters, with
/// ten times less rms.
template <class Rng>
StrayFieldState step_charging(StrayFieldState s, double dt, Rng& rng) {
  if (!(dt > 0)) throw std::invalid_argument("step_charging: dt must be > 0");
  const double rms = (s.charging_active ? s.jitter_rms : 0.1 * s.jitter_rms) * std::sqrt(dt);
  for (int k = 0; k < 2; ++k) {
    if (s.charging_active) s.e_stray[k] += (s.e_target[k] - s.e_stray[k]) * (dt / s.tau);
    if (rms > 0) s.e_stray[k] += std::normal_distribution<double>(0.0, rms)(rng);
  }
  s.time += dt;
  return s;
}

}  // namespace straycomp
