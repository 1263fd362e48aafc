#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

namespace straycomp {

/*!
 * Integer-order Bessel functions of the first kind J_0(x) ... J_n(x) for
 * x >= 0, by Miller's downward recurrence
 *
 *   J_{k-1}(x) = (2k / x) J_k(x) - J_{k+1}(x)
 *
 * started well above both n and x with arbitrary seed values, and normalized
 * with the Neumann sum J_0 + 2 (J_2 + J_4 + ...) = 1. Downward recurrence is
 * stable for the minimal solution, so all orders come out with relative
 * accuracy near machine precision. Running values are rescaled whenever they
 * grow past 1e250 so small arguments do not overflow.
 */
inline std::vector<double> bessel_j_sequence(int n, double x) {
  if (n < 0) throw std::invalid_argument("bessel_j_sequence: negative order");
  if (!(x >= 0.0) || !std::isfinite(x)) {
    throw std::invalid_argument("bessel_j_sequence: x must be finite and >= 0");
  }
  std::vector<double> j(static_cast<std::size_t>(n) + 1, 0.0);
  if (x == 0.0) {
    j[0] = 1.0;
    return j;
  }

  const int top = std::max(n, static_cast<int>(std::ceil(x)));
  int start = top + 20 + static_cast<int>(std::sqrt(60.0 * (top + 1)));
  start += start & 1;  // even start keeps the Neumann sum bookkeeping simple

  constexpr double kBig = 1e250;
  constexpr double kSmall = 1e-250;
  double above = 0.0;  // J_{k+1}
  double here = 1e-300;  // J_k, arbitrary seed
  double even_sum = 0.0;
  for (int k = start; k > 0; --k) {
    const double below = (2.0 * k / x) * here - above;
    above = here;
    here = below;  // now J_{k-1}
    if (std::abs(here) > kBig) {
      here *= kSmall;
      above *= kSmall;
      even_sum *= kSmall;
      for (int m = k; m <= n; ++m) j[static_cast<std::size_t>(m)] *= kSmall;
    }
    const int order = k - 1;
    if (order <= n) j[static_cast<std::size_t>(order)] = here;
    if (order > 0 && (order % 2) == 0) even_sum += here;
  }
  const double norm = here + 2.0 * even_sum;  // here == unnormalized J_0
  for (auto& v : j) v /= norm;
  return j;
}

/// J_m(x) for any integer m and real x, via J_{-m} = (-1)^m J_m and
/// J_m(-x) = (-1)^m J_m(x).
inline double bessel_j(int m, double x) {
  const int order = std::abs(m);
  const double value = bessel_j_sequence(order, std::abs(x))[static_cast<std::size_t>(order)];
  int sign_flips = 0;
  if (m < 0) sign_flips += order;
  if (x < 0) sign_flips += order;
  return (sign_flips % 2) ? -value : value;
}

}  // namespace straycomp
