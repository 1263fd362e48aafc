#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "straycomp/core.hpp"
#include "straycomp/instrument.hpp"

namespace straycomp {

//---------------------------------------------------------------------------//
// Update rule
//---------------------------------------------------------------------------//

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool step_decay = false;  // alpha / sqrt(t) when enabled
};

/// Biased first and second moment estimates plus the update counter.
struct AdamMoments {
  std::vector<double> first;
  std::vector<double> second;
  std::int64_t t = 0;
  double step_scale = 1.0;  // multiplier applied to alpha at the last update

  explicit AdamMoments(std::size_t n = 0) : first(n, 0.0), second(n, 0.0) {}
};

/// One ADAM update. Advances `state.t`, then writes the ascent step
/// alpha_i * m_hat_i / (sqrt(v_hat_i) + eps) into `step`. `alpha` holds either
/// one entry (shared) or one per coordinate.
inline void adam_update(AdamMoments& state, std::span<const double> grad, std::span<const double> alpha,
                        const AdamHyper& h, std::span<double> step) {
  const std::size_t n = grad.size();
  if (state.first.size() != n || state.second.size() != n || step.size() != n) {
    throw std::invalid_argument("adam_update: size mismatch");
  }
  if (alpha.size() != 1 && alpha.size() != n) throw std::invalid_argument("adam_update: bad alpha size");
  ++state.t;
  state.step_scale = h.step_decay ? 1.0 / std::sqrt(static_cast<double>(state.t)) : 1.0;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    state.first[i] = h.beta1 * state.first[i] + (1.0 - h.beta1) * g;
    state.second[i] = h.beta2 * state.second[i] + (1.0 - h.beta2) * g * g;
    const double m_hat = state.first[i] / c1;
    const double v_hat = state.second[i] / c2;
    const double a = alpha.size() == 1 ? alpha[0] : alpha[i];
    step[i] = state.step_scale * a * m_hat / (std::sqrt(v_hat) + h.epsilon);
  }
}

//---------------------------------------------------------------------------//
// Configuration
//---------------------------------------------------------------------------//

enum class GradientEstimator { central, spsa };

struct AdamConfig {
  ParamArray step_size{};  // alpha per channel (V for electrodes, um for laser)
  ParamArray fd_step{};  // perturbation h per channel
  AdamHyper hyper{};
  double integration_time = 0.1;  // s per readout
  double abort_fraction = 0.4;
  int max_iterations = 75;
  int readouts_per_point = 1;  // averaging factor per perturbation
  GradientEstimator estimator = GradientEstimator::central;
  double compute_overhead = 2.8;  // model seconds per iteration beyond readouts

  /// 20 mV / 1 um steps and 50 mV / 2 um perturbations.
  static AdamConfig trap_defaults() {
    AdamConfig c;
    for (std::size_t i = 0; i < kElectrodeCount; ++i) {
      c.step_size[i] = 0.02;
      c.fd_step[i] = 0.05;
    }
    c.step_size[kLaserIndex] = 1.0;
    c.fd_step[kLaserIndex] = 2.0;
    return c;
  }
  static AdamConfig uniform(double alpha, double h) {
    AdamConfig c;
    c.step_size.fill(alpha);
    c.fd_step.fill(h);
    return c;
  }

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(std::string("adam: ") + what);
    };
    require(hyper.beta1 >= 0 && hyper.beta1 < 1, "beta1 must be in [0, 1)");
    require(hyper.beta2 >= 0 && hyper.beta2 < 1, "beta2 must be in [0, 1)");
    require(hyper.epsilon > 0, "epsilon must be > 0");
    for (std::size_t i = 0; i < kParameterCount; ++i) {
      require(fd_step[i] > 0, "fd_step must be > 0");
      require(step_size[i] > 0, "step_size must be > 0");
    }
    require(abort_fraction > 0 && abort_fraction < 1, "abort_fraction must be in (0, 1)");
    require(integration_time > 0, "integration_time must be > 0");
    require(max_iterations >= 0, "max_iterations must be >= 0");
    require(readouts_per_point >= 1, "readouts_per_point must be >= 1");
    require(compute_overhead >= 0, "compute_overhead must be >= 0");
  }

  /// Integration windows per iteration: start and end readouts plus the estimator's.
  int readouts_per_iteration() const {
    const int perturbations = estimator == GradientEstimator::central ? 2 * static_cast<int>(kParameterCount) : 2;
    return perturbations * readouts_per_point + 2;
  }
};

//---------------------------------------------------------------------------//
// Trace
//---------------------------------------------------------------------------//

struct TraceRecord {
  int iteration = 0;
  ControlVector v;
  std::uint64_t counts = 0;
  double integration_time = 0.1;
  double time = 0.0;  // model time at end of the readout, s
  bool safety_net = false;  // set on the last row when the run aborted

  double rate() const { return static_cast<double>(counts) / integration_time; }
};

/// Append-only history of applied settings and their readouts.
class OptimizerTrace {
 public:
  void append(const TraceRecord& r) { records_.push_back(r); }
  const std::vector<TraceRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  /// Index of the highest recorded rate; first occurrence wins ties.
  std::size_t best_index() const {
    if (records_.empty()) throw std::logic_error("OptimizerTrace: empty");
    std::size_t best = 0;
    for (std::size_t i = 1; i < records_.size(); ++i) {
      if (records_[i].rate() > records_[best].rate()) best = i;
    }
    return best;
  }
  const TraceRecord& best() const { return records_[best_index()]; }
  void flag_last_safety_net() {
    if (!records_.empty()) records_.back().safety_net = true;
  }

 private:
  std::vector<TraceRecord> records_;
};

//---------------------------------------------------------------------------//
// Gradient estimation
//---------------------------------------------------------------------------//

struct GradientEstimate {
  ParamArray gradient{};
  bool aborted = false;
  int readouts = 0;
  double lowest_rate = std::numeric_limits<double>::infinity();
};

namespace detail {

template <Instrument I>
double mean_rate(I& inst, const ControlVector& v, double t, int repeats, GradientEstimate& est) {
  inst.apply(v);
  double sum = 0.0;
  for (int r = 0; r < repeats; ++r) {
    const double rate = inst.read(t).rate();
    ++est.readouts;
    est.lowest_rate = std::min(est.lowest_rate, rate);
    sum += rate;
  }
  return sum / repeats;
}

}  // namespace detail

/// Finite-difference gradient of the count rate at `v`.
///
/// Central differences perturb one channel at a time (two readouts per
/// channel, restoring `v` after each pair); SPSA perturbs all channels at once
/// along a random +/-1 direction (two readouts total). Perturbed settings are
/// quantized, and the difference quotient uses the realized displacement.
/// Stops early with `aborted` set as soon as a readout falls below
/// `abort_below` (counts/s).
template <Instrument I, class Rng = std::mt19937_64>
GradientEstimate estimate_gradient(I& inst, const ControlVector& v, const ParameterSpace& space,
                                   const AdamConfig& cfg, double abort_below = -1.0,
                                   Rng* rng = nullptr) {
  GradientEstimate est;
  const double t = cfg.integration_time;
  const int reps = cfg.readouts_per_point;

  if (cfg.estimator == GradientEstimator::central) {
    for (std::size_t i = 0; i < kParameterCount; ++i) {
      ControlVector up = v, down = v;
      up[i] = space.quantize(i, v[i] + cfg.fd_step[i]);
      down[i] = space.quantize(i, v[i] - cfg.fd_step[i]);
      const double f_up = detail::mean_rate(inst, up, t, reps, est);
      if (est.lowest_rate < abort_below) {
        est.aborted = true;
        break;
      }
      const double f_down = detail::mean_rate(inst, down, t, reps, est);
      inst.apply(v);
      if (est.lowest_rate < abort_below) {
        est.aborted = true;
        break;
      }
      const double dx = up[i] - down[i];
      est.gradient[i] = dx != 0.0 ? (f_up - f_down) / dx : 0.0;
    }
    return est;
  }

  if (rng == nullptr) throw std::invalid_argument("estimate_gradient: SPSA needs an rng");
  std::bernoulli_distribution coin(0.5);
  ParamArray delta{};
  for (auto& d : delta) d = coin(*rng) ? 1.0 : -1.0;
  ControlVector up = v, down = v;
  for (std::size_t i = 0; i < kParameterCount; ++i) {
    up[i] = space.quantize(i, v[i] + delta[i] * cfg.fd_step[i]);
    down[i] = space.quantize(i, v[i] - delta[i] * cfg.fd_step[i]);
  }
  const double f_up = detail::mean_rate(inst, up, t, reps, est);
  const double f_down = est.lowest_rate < abort_below ? 0.0 : detail::mean_rate(inst, down, t, reps, est);
  inst.apply(v);
  if (est.lowest_rate < abort_below) {
    est.aborted = true;
    return est;
  }
  for (std::size_t i = 0; i < kParameterCount; ++i) {
    const double dx = up[i] - down[i];
    est.gradient[i] = dx != 0.0 ? (f_up - f_down) / dx : 0.0;
  }
  return est;
}

//---------------------------------------------------------------------------//
// Run loop
//---------------------------------------------------------------------------//

enum class Termination { completed, safety_net };

struct AdamResult {
  ControlVector best;
  OptimizerTrace trace;
  Termination termination = Termination::completed;
  int iterations = 0;  // completed iterations
  int trigger_iteration = 0;  // iteration in which the safety net fired, 0 if none
  std::vector<double> step_scales;  // alpha multiplier used at each iteration
};

struct AdamObserver {
  std::function<void(const TraceRecord&)> on_record;
};

/// Maximizes the count rate starting from `start`.
///
/// Each iteration reads the current setting, estimates the gradient, takes
/// one ADAM ascent step and reads the new setting. The first readout of the
/// run sets the abort threshold (1 - abort_fraction) * first. If any readout
/// falls below it the run stops, re-applies the best recorded setting and
/// flags the trace. Otherwise the best recorded setting is applied at the end.
template <Instrument I>
AdamResult adam_run(I& inst, const ControlVector& start, const ParameterSpace& space,
                    const AdamConfig& cfg, std::uint64_t seed = 0, const AdamObserver& observer = {}) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  AdamResult out;
  ControlVector v = space.quantize(start);
  inst.apply(v);

  auto record = [&](int iteration, const PhotonReadout& r) {
    TraceRecord rec{iteration, v, r.counts, r.integration_time, inst.time(), false};
    out.trace.append(rec);
    if (observer.on_record) observer.on_record(rec);
  };
  auto abort_run = [&](int iteration) {
    out.termination = Termination::safety_net;
    out.trigger_iteration = iteration;
    out.trace.flag_last_safety_net();
    out.best = out.trace.best().v;
    inst.apply(out.best);
    return out;
  };

  const PhotonReadout first = inst.read(cfg.integration_time);
  record(0, first);
  const double threshold = (1.0 - cfg.abort_fraction) * first.rate();

  AdamMoments moments(kParameterCount);
  ParamArray step{};
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    if (it > 1) {
      if (inst.read(cfg.integration_time).rate() < threshold) return abort_run(it);
    }
    const auto grad = estimate_gradient(inst, v, space, cfg, threshold, &rng);
    if (grad.aborted) return abort_run(it);

    adam_update(moments, grad.gradient, cfg.step_size, cfg.hyper, step);
    out.step_scales.push_back(moments.step_scale);
    ControlVector next = v;
    for (std::size_t i = 0; i < kParameterCount; ++i) next[i] = space.quantize(i, v[i] + step[i]);
    v = next;
    inst.apply(v);
    const PhotonReadout end = inst.read(cfg.integration_time);
    record(it, end);
    inst.advance(cfg.compute_overhead);
    out.iterations = it;
    if (end.rate() < threshold) return abort_run(it);
  }
  out.best = out.trace.best().v;
  inst.apply(out.best);
  return out;
}

}  // namespace straycomp
