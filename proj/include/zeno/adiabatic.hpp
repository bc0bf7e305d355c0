#pragma once

#include <array>
#include <complex>
#include <span>
#include <vector>

#include "zeno/dynamics.hpp"
#include "zeno/ramp.hpp"
#include "zeno/spectrum.hpp"

namespace zeno {

/// Deterministic gauge for right eigenvectors. The biorthonormal pair with
/// unit-norm right vectors is fixed up to a phase; this picks it.
enum class PhaseConvention {
  largest_component,  // largest-magnitude component real positive (as in diagonalize)
  component_sum,      // sum of components real positive
};

/// Connection matrix at one drive point: c(beta, alpha) = <lambda-bar_beta|d lambda_alpha/dt>
/// for a drive moving at `rates`, in 1/s, in the gauge of `options.phase`.
/// The Berry connection of the transport equations is B = i c. `states` must
/// be the labelled triplet at the drive point (states[b].branch_id == b).
struct ConnectionOptions {
  PhaseConvention phase = PhaseConvention::largest_component;
};

Eigen::Matrix3cd connection_matrix(DriveRates rates, const Triplet& states,
                                   const ConnectionOptions& options = {});

/// i <lambda-bar_beta|d lambda_alpha/dx> with x = t / T_R.
std::complex<double> berry_connection(DriveRates rates, const Triplet& states, int alpha, int beta,
                                      double ramp_time, const ConnectionOptions& options = {});

struct TransportOptions {
  double cell_hz = 1.0;      // tracking cell width in delta and in Omega
  double rel_tol = 1e-10;    // per-cell adaptive Gauss-Kronrod tolerance
  int max_depth = 10;
  ConnectionOptions connection{};
  unsigned jobs = 1;
};

/// One tracked point along the ramp, with x = t / T_R.
struct TransportPoint {
  double x = 0.0;
  double t = 0.0;
  double delta = 0.0;
  double omega = 0.0;
  std::array<double, 3> epsilon{};
  std::array<double, 3> gamma{};
  std::complex<double> berry{};             // B_alpha,alpha in x
  std::array<double, 3> running_kappa{};    // per branch
  std::array<double, 3> margin{};           // adiabaticity margin per beta; 0 for beta == alpha
};

struct TransportReport {
  int alpha = 0;
  double phi = 0.0;
  double kappa = 0.0;
  double kappa_dissipative = 0.0;  // integral of gamma_alpha dt
  double kappa_geometric = 0.0;    // integral of 2 Im B_alpha,alpha dx
  double survival = 1.0;           // exp(-kappa)
  double max_margin = 0.0;
  bool near_exceptional = false;
  std::vector<TransportPoint> profile;
};

/// Speed-independent running transport integrals along the path
/// (delta_i, Omega: 0 -> omega_nominal) then (delta: delta_i -> stop) for a
/// set of final detunings. Evaluating a stop for a concrete ramp only rescales
/// the dissipative parts, so one table serves every sweep speed.
class TransportTable {
 public:
  TransportTable(const PairParams& params, double delta_i, double omega_nominal,
                 OmegaRampShape shape, std::span<const double> stops,
                 const TransportOptions& options = {});

  const std::vector<double>& stops() const { return stops_; }
  bool near_exceptional() const { return near_exceptional_; }

  /// Integrals for the ramp ending at stops()[stop] with the given timing.
  /// ramp.delta_i, omega_nominal and shape must match the table.
  TransportReport evaluate(std::size_t stop, const RampProtocol& ramp, int alpha,
                           bool with_profile = false) const;

  /// Index of the stop equal to delta_f; throws std::out_of_range if absent.
  std::size_t stop_index(double delta_f) const;

  /// Labelled dressed states at a stop.
  const Triplet& stop_states(std::size_t stop) const { return nodes_.at(stop_node_.at(stop)).states; }

 private:
  // Raw cumulative integrals at a node, per branch b:
  //   [4b + 0] gamma * dt/ds (divided by t_omega on the intensity leg)
  //   [4b + 1] 2 Re c_bb
  //   [4b + 2] -epsilon * dt/ds (same scaling)
  //   [4b + 3] -Im c_bb (plus phase-convention jumps)
  using Raw = Eigen::Array<double, 12, 1>;

  struct Node {
    double s = 0.0;  // Omega on the intensity leg, delta on the detuning leg
    bool intensity_leg = true;
    Triplet states;
    Eigen::Matrix3cd connection;  // per unit of s
    Raw cumulative = Raw::Zero();  // detuning-leg part of the running integrals
    std::array<std::array<double, 3>, 3> coupling{};  // |<lbar_b|dH/ds|l_a>|, [b][a]
  };

  PairParams params_;
  double delta_i_;
  double omega_nominal_;
  OmegaRampShape shape_;
  std::vector<double> stops_;
  std::vector<std::size_t> stop_node_;  // node index of each stop
  std::size_t intensity_end_ = 0;       // node index where the detuning leg starts
  std::vector<Node> nodes_;
  std::vector<Raw> intensity_sums_;  // intensity-leg part of the running integrals
  bool near_exceptional_ = false;
};

/// Single-ramp convenience wrapper.
TransportReport transport_integrals(const PairParams& params, const RampProtocol& ramp, int alpha,
                                    const TransportOptions& options = {});

struct MarginRow {
  double x = 0.0;
  double delta = 0.0;
  std::array<double, 3> margin{};
  std::array<double, 3> survival_ratio{};  // P_s,alpha / P_s,beta
};

/// Adiabatic validity criterion: (1/2)|<lbar_b|dH/dt|l_a>| against
/// |l_a - l_b|^2 P_s,a / P_s,b with running survival factors.
std::vector<MarginRow> adiabaticity_criterion(const PairParams& params, const RampProtocol& ramp,
                                              int alpha, const TransportOptions& options = {});

struct AdiabaticComparison {
  double survival_adiabatic = 1.0;  // exp(-kappa)
  double survival_exact = 1.0;      // |psi(T_R)|^2
  double fidelity = 1.0;            // |<lambda_alpha(end)|psi>|^2 / |psi|^2
  TransportReport transport;
};

/// Starts in the dressed state of branch alpha at the ramp start and compares
/// the transport prediction with direct propagation.
AdiabaticComparison adiabatic_vs_exact(const PairParams& params, const RampProtocol& ramp, int alpha,
                                       const TransportOptions& options = {},
                                       const OdeOptions& ode = {});

/// Same comparison for every stop of a table, reusing the table.
AdiabaticComparison adiabatic_vs_exact(const TransportTable& table, const PairParams& params,
                                       std::size_t stop, const RampProtocol& ramp, int alpha,
                                       const OdeOptions& ode = {});

/// Labelled triplet at the start of a ramp (Omega = 0, delta_i).
Triplet initial_triplet(const PairParams& params, double delta_i);

}  // namespace zeno
