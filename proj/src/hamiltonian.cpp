#include "zeno/hamiltonian.hpp"

#include <cmath>
#include <string>

namespace zeno {

void PairParams::validate() const {
  for (double v : {u_gg, u_eg, u_ee, gamma_ee, omega}) {
    if (!std::isfinite(v)) throw std::invalid_argument("PairParams: non-finite field");
  }
  if (gamma_ee < 0.0) throw std::invalid_argument("PairParams: gamma_ee must be >= 0");
  if (omega < 0.0) throw std::invalid_argument("PairParams: omega must be >= 0");
}

PairParams PairParams::ytterbium(double u_gg_hz, double omega_hz) {
  PairParams p;
  p.u_gg = hz(u_gg_hz);
  p.u_eg = 0.905 * p.u_gg;
  p.u_ee = 1.21 * p.u_gg;
  p.gamma_ee = 1.02 * p.u_gg;
  p.omega = hz(omega_hz);
  return p;
}

PQ derive_pq(const PairParams& params) {
  return {(params.u_ee - params.u_gg) / 2.0, params.u_eg - (params.u_gg + params.u_ee) / 2.0};
}

PairParams with_pq(PairParams params, PQ pq) {
  params.u_ee = params.u_gg + 2.0 * pq.p;
  params.u_eg = pq.q + (params.u_gg + params.u_ee) / 2.0;
  return params;
}

EffectiveTwoLevel build_effective_two_level(const PairParams& params, double delta) {
  if (!(params.gamma_ee > 0.0)) {
    throw std::domain_error("Zeno reduction undefined without dissipation");
  }
  const PQ pq = derive_pq(params);
  const double g = params.gamma_ee;
  const double om = params.omega;

  EffectiveTwoLevel e;
  e.x = 2.0 * (pq.p - pq.q - delta) / g;
  // Delta_q + i Gamma_eff / 2 = (Omega^2 / Gamma_ee) (x + i) / (1 + x^2)
  const double scale = om * om / g / (1.0 + e.x * e.x);
  e.delta_q = scale * e.x;
  e.gamma_eff = 2.0 * scale;
  e.delta_prime = delta - (pq.p + pq.q - e.delta_q);
  e.offset = (delta - pq.p - pq.q - e.delta_q) / 2.0;

  const std::complex<double> i(0.0, 1.0);
  const double coupling = om / std::sqrt(2.0);
  e.matrix << e.delta_prime / 2.0, coupling, coupling, -e.delta_prime / 2.0 - i * e.gamma_eff / 2.0;
  return e;
}

ZenoEigenvalues lambda12_approx(const PairParams& params, double delta) {
  const EffectiveTwoLevel e = build_effective_two_level(params, delta);
  const double om = params.omega;
  const double split = std::sqrt(e.delta_prime * e.delta_prime + 2.0 * om * om);
  const double tilt = split > 0.0 ? e.delta_prime / split : 0.0;
  const double quarter = e.gamma_eff / 4.0;

  ZenoEigenvalues z;
  z.upper = {split / 2.0, -quarter * (1.0 - tilt)};
  z.lower = {-split / 2.0, -quarter * (1.0 + tilt)};
  z.outside_zeno_regime = om / params.gamma_ee > 0.3;
  return z;
}

}  // namespace zeno
