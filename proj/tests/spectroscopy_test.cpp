#include "straycomp/spectroscopy.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace straycomp;

namespace {

struct Centered {
  TrapPhysics p;
  FieldCoefficients c = FieldCoefficients::from_geometry();
  StrayFieldState s;
  ControlVector v;
  Centered() {
    p.beta_floor = 0.0;
    v.laser_x = p.ion_x;
  }
};

std::vector<double> grid(double lo, double hi, double step) {
  std::vector<double> g;
  for (double x = lo; x <= hi + 1e-9; x += step) g.push_back(x);
  return g;
}

}  // namespace

TEST(LineshapeScan, HalfMaximumAtHalfLinewidth) {
  Centered b;
  b.p.saturation = 1e-7;
  const std::vector<double> d{0.0, b.p.linewidth / 2, -b.p.linewidth / 2};
  const auto r = lineshape_scan(d, b.v, b.s, b.p, b.c, {false});
  const double bkg = b.p.background_rate;
  EXPECT_NEAR((r[1] - bkg) / (r[0] - bkg), 0.5, 1e-6);
  EXPECT_NEAR((r[2] - bkg) / (r[0] - bkg), 0.5, 1e-6);
}

TEST(LineshapeScan, ReproducesOperatingRateInWeakSaturation) {
  Centered b;
  b.p.saturation = 1e-9;
  b.p.beta_floor = 0.3;
  const std::vector<double> d{b.p.detuning};
  const auto r = lineshape_scan(d, b.v, b.s, b.p, b.c);
  EXPECT_NEAR(r[0], fluorescence_rate(b.v, b.s, b.p, b.c), 1e-6 * r[0]);
}

TEST(LineshapeScan, SymmetricWithoutMicromotion) {
  Centered b;
  const auto d = grid(-30, 30, 1.0);
  const auto r = lineshape_scan(d, b.v, b.s, b.p, b.c, {false});
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(r[i], r[d.size() - 1 - i], 1e-9 * r[i]);
}

TEST(LineshapeScan, NoiselessFitHasZeroResidualsAndLinewidthAtLeastGamma) {
  Centered b;
  b.p.saturation = 0.2;
  const auto d = grid(-30, 30, 1.0);
  const auto r = lineshape_scan(d, b.v, b.s, b.p, b.c, {false});
  const auto fit = fit_lorentzian(d, r);
  for (double res : fit.residuals) EXPECT_NEAR(res, 0.0, 1e-6 * b.p.peak_rate);
  EXPECT_NEAR(fit.fwhm, b.p.linewidth * std::sqrt(1.0 + b.p.saturation), 1e-6);
  EXPECT_GE(fit.fwhm, b.p.linewidth);
  EXPECT_NEAR(fit.center, 0.0, 1e-7);
}

TEST(LineshapeScan, OperatingRegimeFitStaysAtLeastNaturalWidth) {
  Centered b;
  b.p.beta_floor = 0.05;
  b.s.e_stray = {4.0, 0.0};  // beta = 0.25
  const auto d = grid(-30, 30, 1.0);
  const auto fit = fit_lorentzian(d, lineshape_scan(d, b.v, b.s, b.p, b.c));
  EXPECT_GE(fit.fwhm, b.p.linewidth);
}

TEST(SaturationScan, ZeroPowerIsBackground) {
  Centered b;
  const std::vector<double> pw{0.0};
  EXPECT_EQ(saturation_scan(pw, 4.11, b.v, b.s, b.p, b.c)[0], b.p.background_rate);
  EXPECT_THROW(saturation_scan(pw, 0.0, b.v, b.s, b.p, b.c), std::invalid_argument);
}

TEST(SaturationScan, HalfCeilingAtDetunedSaturationPower) {
  Centered b;
  const double p_sat = 1.86;
  const double x = 2 * b.p.detuning / b.p.linewidth;
  const std::vector<double> pw{p_sat * (1 + x * x), 1e12};
  const auto r = saturation_scan(pw, p_sat, b.v, b.s, b.p, b.c);
  const double bkg = b.p.background_rate;
  EXPECT_NEAR((r[0] - bkg) / (r[1] - bkg), 0.5, 1e-9);
}

TEST(SaturationScan, MicromotionRaisesEffectiveSaturationPower) {
  Centered pre, post;
  pre.s.e_stray = {12.0, -9.0};
  pre.v.laser_x = pre.p.ion_x - 20.0;
  const double ideal = 1.8;
  EXPECT_LT(effective_saturation_power(ideal, post.v, post.s, post.p, post.c),
            effective_saturation_power(ideal, pre.v, pre.s, pre.p, pre.c));
  EXPECT_NEAR(effective_saturation_power(ideal, post.v, post.s, post.p, post.c), ideal, 1e-12);
}

TEST(SaturationFit, RoundTripNoiseless) {
  Centered b;
  const auto pw = grid(0.0, 30.0, 0.5);
  for (double p_sat : {4.11, 1.86}) {
    const auto r = saturation_scan(pw, p_sat, b.v, b.s, b.p, b.c);
    const auto fit = fit_saturation(pw, r, b.p);
    EXPECT_NEAR(fit.p_sat, p_sat, 0.01 * p_sat);
    EXPECT_NEAR(fit.background, b.p.background_rate, 1.0);
    EXPECT_NEAR(fit.ceiling, b.p.peak_rate, 1e-3 * b.p.peak_rate);
  }
}

TEST(SaturationFit, RoundTripWithShotNoise) {
  Centered b;
  const auto pw = grid(0.0, 30.0, 0.5);
  std::mt19937_64 rng(17);
  const double t = 0.1;
  for (double p_sat : {4.11, 1.86}) {
    const auto mean = saturation_scan(pw, p_sat, b.v, b.s, b.p, b.c);
    std::vector<double> noisy, sigma;
    for (double m : mean) {
      noisy.push_back(read_photons(m, t, rng).rate());
      sigma.push_back(std::sqrt(m / t));
    }
    const auto fit = fit_saturation(pw, noisy, b.p, sigma);
    EXPECT_NEAR(fit.p_sat, p_sat, 0.05 * p_sat);
  }
}

TEST(LevenbergMarquardt, RecoversExponentialDecay) {
  auto model = [](double x, const std::array<double, 2>& q) { return q[0] * std::exp(-q[1] * x); };
  std::vector<double> xs, ys;
  for (int i = 0; i < 30; ++i) {
    xs.push_back(0.1 * i);
    ys.push_back(model(0.1 * i, {3.0, 1.7}));
  }
  const auto fit = levenberg_marquardt<2>(model, xs, ys, {}, {1.0, 0.5});
  EXPECT_NEAR(fit.params[0], 3.0, 1e-8);
  EXPECT_NEAR(fit.params[1], 1.7, 1e-8);
}
