#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "straycomp/levenberg_marquardt.hpp"
#include "straycomp/trap_model.hpp"

namespace straycomp {

/// Steady-state two-level excitation (s0/2) / (1 + s0 + (2 delta/gamma)^2).
inline double two_level_excitation(double detuning, double linewidth, double s0) {
  const double x = 2.0 * detuning / linewidth;
  return 0.5 * s0 / (1.0 + s0 + x * x);
}

struct LineshapeOptions {
  bool micromotion_sidebands = true;  // spread excitation over J_m^2(beta) sidebands
};

/// Count rate versus laser detuning (MHz) at fixed electrode settings.
///
/// Normalized so that, in the weak-saturation limit, the rate at the
/// operating detuning reproduces fluorescence_rate(). With sidebands off the
/// ion term is a pure Lorentzian of FWHM gamma * sqrt(1 + s0).
inline std::vector<double> lineshape_scan(std::span<const double> detunings, const ControlVector& v,
                                          const StrayFieldState& s, const TrapPhysics& p,
                                          const FieldCoefficients& coeffs,
                                          LineshapeOptions opt = {}) {
  if (!(p.linewidth > 0)) throw std::invalid_argument("lineshape_scan: linewidth must be > 0");
  const double s0 = p.saturation > 0 ? p.saturation : 1e-9;
  const double overlap = laser_overlap(v.laser_x, p);
  const double reference = two_level_excitation(p.detuning, p.linewidth, s0);

  std::vector<double> sideband_weight{1.0};
  if (opt.micromotion_sidebands) {
    const double beta = micromotion_index(field_at_ion(v, coeffs, s), p);
    const int m_max = std::max(kDefaultSidebandOrder, static_cast<int>(std::ceil(beta)) + 20);
    const auto j = bessel_j_sequence(m_max, beta);
    sideband_weight.resize(j.size());
    for (std::size_t m = 0; m < j.size(); ++m) sideband_weight[m] = j[m] * j[m];
  }

  std::vector<double> out;
  out.reserve(detunings.size());
  for (double d : detunings) {
    double excitation = sideband_weight[0] * two_level_excitation(d, p.linewidth, s0);
    for (std::size_t m = 1; m < sideband_weight.size(); ++m) {
      const double shift = static_cast<double>(m) * p.rf_frequency;
      excitation += sideband_weight[m] * (two_level_excitation(d + shift, p.linewidth, s0) +
                                          two_level_excitation(d - shift, p.linewidth, s0));
    }
    out.push_back(p.peak_rate * overlap * excitation / reference + p.background_rate);
  }
  return out;
}

/// Lorentzian amplitude / (1 + (2 (delta - center) / fwhm)^2) + offset.
struct LorentzianFit {
  double amplitude = 0, center = 0, fwhm = 0, offset = 0;
  double chi2 = 0;
  std::vector<double> residuals;
};

inline double lorentzian(double x, const std::array<double, 4>& q) {
  const double u = 2.0 * (x - q[1]) / q[2];
  return q[0] / (1.0 + u * u) + q[3];
}

inline LorentzianFit fit_lorentzian(std::span<const double> detunings, std::span<const double> rates,
                                    std::span<const double> sigma = {}) {
  if (detunings.size() != rates.size() || detunings.size() < 4) {
    throw std::invalid_argument("fit_lorentzian: need >= 4 matching points");
  }
  std::size_t peak = 0;
  double lowest = rates[0];
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (rates[i] > rates[peak]) peak = i;
    lowest = std::min(lowest, rates[i]);
  }
  const double span = detunings.back() - detunings.front();
  std::array<double, 4> start{rates[peak] - lowest, detunings[peak], std::abs(span) / 3.0, lowest};
  const auto fit = levenberg_marquardt<4>(lorentzian, detunings, rates, sigma, start, 500);
  LorentzianFit out{fit.params[0], fit.params[1], std::abs(fit.params[2]), fit.params[3], fit.chi2, {}};
  for (std::size_t i = 0; i < rates.size(); ++i) {
    out.residuals.push_back(rates[i] - lorentzian(detunings[i], fit.params));
  }
  return out;
}

/// Count rate versus laser power (uW):
///   ceiling * (P / p_sat) / (1 + P / p_sat + (2 delta_L / gamma)^2) + background.
/// `ceiling` is the saturated rate above background.
inline double saturation_rate(double power, double p_sat, const TrapPhysics& p, double ceiling) {
  const double x = 2.0 * p.detuning / p.linewidth;
  const double s = power / p_sat;
  return ceiling * s / (1.0 + s + x * x) + p.background_rate;
}

/// Micromotion and beam pointing lower the excitation per unit power, which
/// shows up as a larger fitted saturation power: p_sat / (P_e(beta)/P_e(0) * overlap).
inline double effective_saturation_power(double p_sat_ideal, const ControlVector& v,
                                         const StrayFieldState& s, const TrapPhysics& p,
                                         const FieldCoefficients& coeffs) {
  const double beta = micromotion_index(field_at_ion(v, coeffs, s), p);
  return p_sat_ideal / (relative_population(beta, p) * laser_overlap(v.laser_x, p));
}

/// Rate versus laser power for the ion at settings `v`; `p_sat` is the
/// saturation power of a compensated, centred ion.
inline std::vector<double> saturation_scan(std::span<const double> powers, double p_sat,
                                           const ControlVector& v, const StrayFieldState& s,
                                           const TrapPhysics& p, const FieldCoefficients& coeffs) {
  if (!(p_sat > 0)) throw std::invalid_argument("saturation_scan: p_sat must be > 0");
  const double effective = effective_saturation_power(p_sat, v, s, p, coeffs);
  std::vector<double> out;
  out.reserve(powers.size());
  for (double pw : powers) out.push_back(saturation_rate(pw, effective, p, p.peak_rate));
  return out;
}

struct SaturationFit {
  double ceiling = 0, p_sat = 0, background = 0;
  double chi2 = 0;
};

/// Fits ceiling, p_sat and background at the trap's known detuning.
inline SaturationFit fit_saturation(std::span<const double> powers, std::span<const double> rates,
                                    const TrapPhysics& p, std::span<const double> sigma = {}) {
  if (powers.size() != rates.size() || powers.size() < 3) {
    throw std::invalid_argument("fit_saturation: need >= 3 matching points");
  }
  const double x = 2.0 * p.detuning / p.linewidth;
  const double detuning_factor = 1.0 + x * x;
  // Michaelis-Menten form bkg + A P / (P + K) with K = p_sat (1 + x^2).
  auto model = [](double pw, const std::array<double, 3>& q) { return q[2] + q[0] * pw / (pw + q[1]); };
  double lo = rates[0], hi = rates[0];
  for (double r : rates) {
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  double mid_power = powers[powers.size() / 2];
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (rates[i] - lo >= 0.5 * (hi - lo)) {
      mid_power = powers[i];
      break;
    }
  }
  std::array<double, 3> start{2.0 * (hi - lo), std::max(mid_power, 1e-6), lo};
  const auto fit = levenberg_marquardt<3>(model, powers, rates, sigma, start, 500);
  return {fit.params[0], fit.params[1] / detuning_factor, fit.params[2], fit.chi2};
}

}  // namespace straycomp
