#pragma once

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "zeno/adiabatic.hpp"
#include "zeno/dynamics.hpp"
#include "zeno/ramp.hpp"
#include "zeno/spectrum.hpp"

namespace zeno {

/// Singly and doubly occupied lattice sites with the detection efficiency of
/// e atoms. Counts are arbitrary units.
struct EnsembleModel {
  double n1 = 1.0;
  double n2 = 1.0;
  double eta_rp = 0.8;

  /// Throws std::invalid_argument unless n1, n2 >= 0 and 0 < eta_rp <= 1.
  void validate() const;
};

struct PairProbabilities {
  double gg = 1.0, eg = 0.0, ee = 0.0;
  double survival() const { return gg + eg + ee; }
};

struct SingleProbabilities {
  double g = 1.0, e = 0.0;
};

struct Observables {
  double n_g = 0.0;               // n1 P_g + n2 (P_eg + 2 P_gg)
  double n_e = 0.0;               // n1 P_e + n2 (P_eg + 2 P_ee), before detection
  double n_e_detected = 0.0;      // eta_rp n_e
  double n_total_detected = 0.0;  // n_g + eta_rp n_e
  double n_lost = 0.0;            // 2 n2 (1 - survival); n_g + n_e + n_lost = n1 + 2 n2
};

/// Throws std::invalid_argument for probabilities outside [0, 1].
Observables observables(const EnsembleModel& model, const PairProbabilities& pair,
                        const SingleProbabilities& single);

/// Lossless single atom, basis (g, e): H = (delta/2) sigma_z + (Omega/2) sigma_x.
using AtomState = Eigen::Vector2cd;

Eigen::Matrix2cd single_atom_hamiltonian(double delta, double omega);

struct TwoLevelResult {
  std::vector<double> times;
  std::vector<AtomState> states;
  std::vector<double> p_g;
  std::vector<double> p_e;
};

/// Propagates a single atom from |g> along the ramp with the nominal Rabi
/// frequency `omega` (the ramp's Omega envelope is rescaled to it).
TwoLevelResult two_level_evolve(double omega, const RampProtocol& ramp,
                                std::span<const double> sample_times, const OdeOptions& options = {});

struct LandauZenerResult {
  double transfer = 0.0;            // population left in the adiabatic state
  double bare_transfer = 0.0;       // |<e|psi>|^2 at the end of the sweep
  double analytic = 0.0;            // 1 - exp(-pi Omega^2 / (2 |delta_dot|))
  bool ends_near_resonance = false; // |delta_f| < 2 Omega: dressed states are mixed
};

/// Linear sweep at constant Omega from delta_i to delta_f, starting in the
/// adiabatic state that is g-like at delta_i. `transfer` projects the final
/// state on the adiabatic state it connects to, which removes the finite-sweep
/// oscillations of the bare populations.
LandauZenerResult landau_zener_transfer(double omega, double delta_i, double delta_f, double delta_dot,
                                        const OdeOptions& options = {});

/// f1 + f2 exp(-gamma t) with f1, f2, gamma >= 0.
struct DecayFit {
  double f1 = 0.0;
  double f2 = 0.0;
  double gamma = 0.0;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();  // (f1, f2, gamma)
  double rss = 0.0;
  int evaluations = 0;
  bool no_decay_resolved = false;  // gamma at its lower bound or f2 = 0
};

class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, DecayFit best) : std::runtime_error(what), best_so_far(best) {}
  DecayFit best_so_far;
};

struct FitOptions {
  int max_evaluations = 500;
};

/// Weighted nonlinear least squares. The model is linear in (f1, f2), so the
/// fit is profiled over gamma: for each gamma the bounded linear problem is
/// solved exactly, and gamma is located by a bracketed Brent search seeded by
/// log-linear regression. Throws std::invalid_argument for < 4 points,
/// negative or all-equal times, or mismatched weights; FitError when the
/// search does not converge within the evaluation cap.
DecayFit fit_decay(std::span<const double> times, std::span<const double> counts,
                   std::span<const double> weights = {}, const FitOptions& options = {});

// ---------------------------------------------------------------- figures

struct Figure1Panel {
  double omega_over_gamma = 0.0;
  std::vector<double> deltas;                   // rad/s
  std::vector<std::array<double, 3>> epsilon;   // by branch id
  std::vector<std::array<double, 3>> gamma;
  std::vector<std::array<std::array<double, 3>, 3>> weights;  // [branch][bare] |<bare|lambda>|^2
  /// Closed-form two-level eigenvalues for the lossless branches
  /// (upper, lower); present when the drive is in the Zeno regime.
  std::optional<std::vector<std::array<std::complex<double>, 2>>> zeno_overlay;
  bool near_exceptional = false;
};

/// Spectra over `deltas` for each Omega / Gamma_ee ratio.
std::vector<Figure1Panel> figure1_pipeline(const PairParams& params, std::span<const double> omega_ratios,
                                           std::span<const double> deltas);

struct Figure3Options {
  double delta_dot = 0.0;  // speed magnitude, rad/s^2
  double omega = 0.0;
  double start = 0.0;  // |delta_i|; ascending ramps start at -start, descending at +start
  double t_hold = 0.0;
  OmegaRampShape shape = OmegaRampShape::linear_field;
  LifetimeOptions lifetime{};
  TransportOptions transport{};
  OdeOptions ode{};
  unsigned jobs = 1;
};

struct Figure3Row {
  bool ascending = false;
  double delta_f = 0.0;
  double gamma_sim = 0.0;     // fitted from the simulated hold
  double gamma_branch = 0.0;  // followed branch of the non-Hermitian spectrum
  double gamma_pert = 0.0;    // perturbative rate of the matching Hermitian state
  double max_margin = 0.0;    // adiabaticity margin along the preparation ramp
  bool non_exponential = false;
};

/// Ramps from |gg> at -+start to each delta_f (points on the wrong side of
/// the start or equal to it are skipped), rows ascending first then
/// descending, each in the given order.
std::vector<Figure3Row> figure3_pipeline(const PairParams& params, const Figure3Options& options,
                                         std::span<const double> ascending_stops,
                                         std::span<const double> descending_stops);

struct Figure4Options {
  double delta_i = 0.0;
  double delta_dot = 0.0;  // speed magnitude
  double omega = 0.0;
  double t_hold = 0.0;  // hold for the synthetic decay curves; 0 skips them
  int hold_samples = 21;
  OmegaRampShape shape = OmegaRampShape::linear_field;
  TransportOptions transport{};
  OdeOptions ode{};
  unsigned jobs = 1;
};

struct Figure4Row {
  double delta_f = 0.0;
  Observables obs;           // at the end of the ramp
  double n1 = 0.0;           // singly occupied signal, n1 (P_g + P_e)
  double n2 = 0.0;           // 2 n2 |psi(T_R)|^2
  double n2_adiabatic = 0.0; // 2 n2 exp(-kappa) on the followed branch
  double survival_exact = 1.0;
  double survival_adiabatic = 1.0;
  /// Fit of the detected total during the hold; f1 and f2 estimate the
  /// singly and doubly occupied signals.
  std::optional<DecayFit> hold_fit;
  double hold_f1_expected = 0.0;  // n1 (P_g + eta P_e) at the end of the ramp
  double hold_f2_expected = 0.0;  // n2 (2 P_gg + P_eg + eta (P_eg + 2 P_ee))
};

/// Descending (or ascending) ramps from delta_i to every stop; the pairs start
/// in |gg>, the single atoms in |g>.
std::vector<Figure4Row> figure4_pipeline(const EnsembleModel& model, const PairParams& params,
                                         const Figure4Options& options, std::span<const double> stops);

}  // namespace zeno
