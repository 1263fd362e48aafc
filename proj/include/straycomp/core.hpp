#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace straycomp {

inline constexpr std::size_t kElectrodeCount = 44;
inline constexpr std::size_t kParameterCount = kElectrodeCount + 1;
inline constexpr std::size_t kLaserIndex = kElectrodeCount;

/// Raised for malformed or out-of-range configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ParamArray = std::array<double, kParameterCount>;

/// The 45 optimizable inputs: 44 electrode voltages (V) and the horizontal
/// laser position (um). Flattened index 44 is the laser.
struct ControlVector {
  std::array<double, kElectrodeCount> electrode_volts{};
  double laser_x = 0.0;

  double& operator[](std::size_t i) {
    return i < kElectrodeCount ? electrode_volts[i] : laser_x;
  }
  double operator[](std::size_t i) const {
    return i < kElectrodeCount ? electrode_volts[i] : laser_x;
  }
  static constexpr std::size_t size() { return kParameterCount; }

  ParamArray flat() const {
    ParamArray out{};
    for (std::size_t i = 0; i < kParameterCount; ++i) out[i] = (*this)[i];
    return out;
  }
  static ControlVector from_flat(const ParamArray& p) {
    ControlVector v;
    for (std::size_t i = 0; i < kParameterCount; ++i) v[i] = p[i];
    return v;
  }

  friend bool operator==(const ControlVector&, const ControlVector&) = default;
};

/// Box bounds and output resolution of every control channel.
///
/// Voltages default to the +/-20 V range of the doubled DAC output with a
/// 10 mV grid; the laser steering channel has its own range and grid.
struct ParameterSpace {
  ParamArray lower{};
  ParamArray upper{};
  ParamArray quantum{};

  static ParameterSpace trap(double volt_limit = 20.0, double volt_step = 0.01,
                             double laser_min = 0.0, double laser_max = 800.0,
                             double laser_step = 0.1) {
    ParameterSpace s;
    for (std::size_t i = 0; i < kElectrodeCount; ++i) {
      s.lower[i] = -volt_limit;
      s.upper[i] = volt_limit;
      s.quantum[i] = volt_step;
    }
    s.lower[kLaserIndex] = laser_min;
    s.upper[kLaserIndex] = laser_max;
    s.quantum[kLaserIndex] = laser_step;
    return s;
  }

  /// Same range and grid on all 45 channels (used for synthetic objectives).
  static ParameterSpace uniform(double limit, double step) {
    ParameterSpace s;
    s.lower.fill(-limit);
    s.upper.fill(limit);
    s.quantum.fill(step);
    return s;
  }

  double quantize(std::size_t i, double x) const {
    const double q = std::nearbyint(x / quantum[i]) * quantum[i];
    if (q < lower[i]) return lower[i];
    if (q > upper[i]) return upper[i];
    return q;
  }

  /// Rounds every channel to its grid and clamps it to its range.
  ControlVector quantize(const ControlVector& v) const {
    ControlVector out;
    for (std::size_t i = 0; i < kParameterCount; ++i) out[i] = quantize(i, v[i]);
    return out;
  }

  bool contains(const ControlVector& v) const {
    for (std::size_t i = 0; i < kParameterCount; ++i) {
      if (!(v[i] >= lower[i] && v[i] <= upper[i])) return false;
    }
    return true;
  }

  bool on_grid(const ControlVector& v) const {
    for (std::size_t i = 0; i < kParameterCount; ++i) {
      if (quantize(i, v[i]) != v[i]) return false;
    }
    return true;
  }
};

/// One counter integration window.
struct PhotonReadout {
  std::uint64_t counts = 0;
  double integration_time = 0.1;  // s
  double timestamp = 0.0;         // model time at the end of the window, s

  double rate() const { return static_cast<double>(counts) / integration_time; }
};

/// Shortest decimal text that parses back to the same double.
inline std::string format_number(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, res.ptr};
}

inline std::string parameter_name(std::size_t i) {
  if (i == kLaserIndex) return "laser_x";
  std::string n = std::to_string(i + 1);
  return n.size() < 2 ? "v0" + n : "v" + n;
}

}  // namespace straycomp
