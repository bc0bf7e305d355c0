#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>

namespace zeno {

/// Roots of z^3 + c2 z^2 + c1 z + c0 by Cardano's formula, followed by Newton
/// polishing. The cube-root branch is taken on the larger of -q/2 +- sqrt(D)
/// so that the second Cardano term never suffers from cancellation.
template <class Real>
std::array<std::complex<Real>, 3> solve_cubic(std::complex<Real> c2, std::complex<Real> c1,
                                              std::complex<Real> c0) {
  using C = std::complex<Real>;
  const Real third = Real(1) / Real(3);
  const C shift = c2 * third;
  const C p = c1 - c2 * c2 * third;
  const C q = Real(2) * c2 * c2 * c2 / Real(27) - c2 * c1 * third + c0;

  const C disc = std::sqrt(q * q / Real(4) + p * p * p / Real(27));
  const C w_plus = -q / Real(2) + disc;
  const C w_minus = -q / Real(2) - disc;
  const C w = std::abs(w_plus) >= std::abs(w_minus) ? w_plus : w_minus;

  std::array<C, 3> roots;
  if (std::abs(w) == Real(0)) {
    roots.fill(-shift);
  } else {
    const C u = std::pow(w, third);
    const C v = -p / (Real(3) * u);
    const C omega = std::polar(Real(1), Real(2) * std::numbers::pi_v<Real> / Real(3));
    const C omega2 = std::conj(omega);
    roots[0] = u + v - shift;
    roots[1] = u * omega + v * omega2 - shift;
    roots[2] = u * omega2 + v * omega - shift;
  }

  auto f = [&](C z) { return ((z + c2) * z + c1) * z + c0; };
  auto df = [&](C z) { return (Real(3) * z + Real(2) * c2) * z + c1; };
  for (C& z : roots) {
    for (int it = 0; it < 3; ++it) {
      const C d = df(z);
      if (std::abs(d) == Real(0)) break;
      const C next = z - f(z) / d;
      if (!(std::abs(f(next)) < std::abs(f(z)))) break;
      z = next;
    }
  }
  return roots;
}

}  // namespace zeno
