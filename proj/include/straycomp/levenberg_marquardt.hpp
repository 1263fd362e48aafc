#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>

#include <Eigen/Dense>

namespace straycomp {

template <std::size_t N>
struct FitResult {
  std::array<double, N> params{};
  double chi2 = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Weighted least squares by Levenberg-Marquardt with a central-difference
/// Jacobian. `model(x, params)` returns the prediction at abscissa x.
/// `sigma` may be empty (unit weights).
template <std::size_t N, class Model>
FitResult<N> levenberg_marquardt(const Model& model, std::span<const double> xs,
                                 std::span<const double> ys, std::span<const double> sigma,
                                 std::array<double, N> start, int max_iterations = 200) {
  using Vec = Eigen::Matrix<double, static_cast<int>(N), 1>;
  using Mat = Eigen::Matrix<double, static_cast<int>(N), static_cast<int>(N)>;
  const std::size_t n = xs.size();
  auto weight = [&](std::size_t i) { return sigma.empty() ? 1.0 : 1.0 / (sigma[i] * sigma[i]); };
  auto chi2_of = [&](const std::array<double, N>& p) {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = ys[i] - model(xs[i], p);
      c += weight(i) * r * r;
    }
    return c;
  };

  FitResult<N> out;
  out.params = start;
  out.chi2 = chi2_of(start);
  double lambda = 1e-3;
  for (int it = 0; it < max_iterations; ++it) {
    out.iterations = it + 1;
    Mat jtj = Mat::Zero();
    Vec jtr = Vec::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      Vec grad;
      for (std::size_t k = 0; k < N; ++k) {
        auto hi = out.params, lo = out.params;
        const double h = 1e-6 * std::max(1.0, std::abs(out.params[k]));
        hi[k] += h;
        lo[k] -= h;
        grad[static_cast<int>(k)] = (model(xs[i], hi) - model(xs[i], lo)) / (2 * h);
      }
      const double r = ys[i] - model(xs[i], out.params);
      jtj += weight(i) * grad * grad.transpose();
      jtr += weight(i) * r * grad;
    }
    bool improved = false;
    for (int tries = 0; tries < 30 && !improved; ++tries) {
      Mat a = jtj;
      for (int k = 0; k < static_cast<int>(N); ++k) a(k, k) += lambda * std::max(jtj(k, k), 1e-300);
      const Vec delta = a.ldlt().solve(jtr);
      auto trial = out.params;
      for (std::size_t k = 0; k < N; ++k) trial[k] += delta[static_cast<int>(k)];
      const double c = chi2_of(trial);
      if (std::isfinite(c) && c <= out.chi2) {
        const double gain = out.chi2 - c;
        out.params = trial;
        const bool tiny = gain <= 1e-15 * std::max(out.chi2, 1e-300) ||
                          delta.norm() <= 1e-13 * (1.0 + Eigen::Map<Vec>(out.params.data()).norm());
        out.chi2 = c;
        lambda = std::max(lambda / 10.0, 1e-12);
        improved = true;
        if (tiny || c == 0.0) {
          out.converged = true;
          return out;
        }
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) {
      out.converged = true;  // no descent direction left at working precision
      return out;
    }
  }
  return out;
}

}  // namespace straycomp
