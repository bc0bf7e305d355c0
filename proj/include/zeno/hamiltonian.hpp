#pragma once

#include <complex>
#include <stdexcept>

#include <Eigen/Dense>

#include "zeno/units.hpp"

namespace zeno {

/// Bare two-atom states. The integer value is the row index in every
/// PairOperator, so the ordering (gg, eg, ee) is fixed library-wide.
enum class Bare : int { gg = 0, eg = 1, ee = 2 };

constexpr int index(Bare b) { return static_cast<int>(b); }

template <class Real>
using PairOperatorT = Eigen::Matrix<std::complex<Real>, 3, 3>;
using PairOperator = PairOperatorT<double>;

template <class Real>
using PairVectorT = Eigen::Matrix<std::complex<Real>, 3, 1>;
using PairVector = PairVectorT<double>;

/// Physical parameters of one lattice-site atom pair, all in rad/s.
struct PairParams {
  double u_gg = 0.0;
  double u_eg = 0.0;
  double u_ee = 0.0;
  double gamma_ee = 0.0;  // bare two-body loss rate
  double omega = 0.0;     // Rabi frequency

  /// Throws std::invalid_argument on negative rates or non-finite fields.
  void validate() const;

  /// Collisional ratios of the 174Yb clock-transition pair measured in the
  /// lattice: U_eg/U_gg = 0.905, U_ee/U_gg = 1.21, hbar*Gamma_ee/U_gg = 1.02.
  static PairParams ytterbium(double u_gg_hz = 1400.0, double omega_hz = 150.0);
};

struct PQ {
  double p = 0.0;  // (U_ee - U_gg)/2
  double q = 0.0;  // U_eg - (U_gg + U_ee)/2
};

PQ derive_pq(const PairParams& params);

/// Interaction energies reproducing a given (p, q) while keeping U_gg fixed.
/// Only p and q enter the Hamiltonian, so this is how alternative p/q
/// conventions are mapped onto PairParams.
PairParams with_pq(PairParams params, PQ pq);

template <class Real = double>
PairOperatorT<Real> spin_z() {
  PairOperatorT<Real> s = PairOperatorT<Real>::Zero();
  s(0, 0) = Real(-1);
  s(2, 2) = Real(1);
  return s;
}

template <class Real = double>
PairOperatorT<Real> spin_x() {
  const Real c = Real(1) / std::sqrt(Real(2));
  PairOperatorT<Real> s = PairOperatorT<Real>::Zero();
  s(0, 1) = s(1, 0) = s(1, 2) = s(2, 1) = c;
  return s;
}

/// (p - delta) Sz - q Sz^2, diagonal.
template <class Real = double>
PairOperatorT<Real> build_h0(const PairParams& params, Real delta) {
  const PQ pq = derive_pq(params);
  const Real detuned = Real(pq.p) - delta;
  const Real q = Real(pq.q);
  PairOperatorT<Real> h = PairOperatorT<Real>::Zero();
  h(0, 0) = -detuned - q;
  h(2, 2) = detuned - q;
  return h;
}

/// Omega Sx.
template <class Real = double>
PairOperatorT<Real> build_coupling(Real omega) {
  return spin_x<Real>() * std::complex<Real>(omega);
}

template <class Real = double>
PairOperatorT<Real> build_heff(const PairParams& params, Real delta, Real omega) {
  PairOperatorT<Real> h = build_h0<Real>(params, delta) + build_coupling<Real>(omega);
  h(2, 2) -= std::complex<Real>(0, Real(params.gamma_ee) / 2);
  return h;
}

template <class Real = double>
PairOperatorT<Real> build_heff(const PairParams& params, Real delta) {
  return build_heff<Real>(params, delta, Real(params.omega));
}

/// Second-order reduction onto the lossless {gg, eg} subspace.
///
/// `matrix` is the traceless form 1/2 [[d', sqrt2 Omega], [sqrt2 Omega, -d' - i Gamma_eff]];
/// adding `offset` times the identity gives the block of the full Hamiltonian
/// in the same energy reference as build_heff.
struct EffectiveTwoLevel {
  Eigen::Matrix2cd matrix;
  double delta_q = 0.0;
  double gamma_eff = 0.0;
  double x = 0.0;            // 2 (p - q - delta) / Gamma_ee
  double delta_prime = 0.0;  // delta - (p + q - delta_q)
  double offset = 0.0;
};

/// Throws std::domain_error when gamma_ee == 0.
EffectiveTwoLevel build_effective_two_level(const PairParams& params, double delta);

/// Closed-form perturbative eigenvalues of the 2x2 reduction. `upper` carries
/// the + sign (higher energy). Energies are relative to the traceless form.
struct ZenoEigenvalues {
  std::complex<double> upper;
  std::complex<double> lower;
  bool outside_zeno_regime = false;  // omega / gamma_ee > 0.3
};

ZenoEigenvalues lambda12_approx(const PairParams& params, double delta);

}  // namespace zeno
