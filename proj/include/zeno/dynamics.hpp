#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "zeno/hamiltonian.hpp"
#include "zeno/ode.hpp"
#include "zeno/ramp.hpp"

namespace zeno {

using PairState = PairVector;
using DensityMatrix = Eigen::Matrix4cd;  // basis (gg, eg, ee, vac)

inline constexpr int kVacuum = 3;

PairState bare_state(Bare b);

/// Unnormalized pair wavefunction sampled along a ramp. norm2 is the
/// survival probability; nothing is renormalized.
struct EvolutionResult {
  std::vector<double> times;
  std::vector<PairState> states;
  std::vector<double> norm2;
  std::vector<std::array<double, 3>> populations;  // |c_gg|^2, |c_eg|^2, |c_ee|^2
};

/// i d/dt psi = H_eff(t) psi along the ramp. sample_times must be ascending
/// and >= 0; the drive is held constant past ramp.end_time(). Throws
/// std::invalid_argument if psi0 is not normalized, IntegrationError if the
/// tolerance cannot be met.
EvolutionResult evolve_nonhermitian(const PairParams& params, const RampProtocol& ramp,
                                    const PairState& psi0, std::span<const double> sample_times,
                                    const OdeOptions& options = {});

using DriveFunction = std::function<Drive(double)>;

/// Propagates psi from t0 to t1 (either direction) under an arbitrary drive.
/// `breakpoints` are kinks of the drive the integrator must land on.
PairState propagate(const PairParams& params, const DriveFunction& drive, PairState psi,
                    double t0, double t1, std::span<const double> breakpoints = {},
                    const OdeOptions& options = {});

struct LindbladResult {
  std::vector<double> times;
  std::vector<DensityMatrix> rho;
  std::vector<double> trace;
  std::vector<double> pair_trace;  // trace of the (gg, eg, ee) block
};

/// d rho/dt = -i (H rho - rho H^dag) + Gamma_ee L rho L^dag with L = |vac><ee|
/// and H the effective Hamiltonian padded with a zero vacuum row and column.
/// Throws std::invalid_argument unless rho0 is Hermitian, positive
/// semidefinite and of unit trace.
LindbladResult evolve_lindblad(const PairParams& params, const RampProtocol& ramp,
                               const DensityMatrix& rho0, std::span<const double> sample_times,
                               const OdeOptions& options = {});

DensityMatrix pure_density(const PairState& psi);

struct TrajectoryOptions {
  std::size_t n_traj = 10000;
  std::uint64_t seed = 1;
  /// The no-jump evolution is identical for every trajectory; when true it
  /// is integrated once and each pre-drawn threshold is located on it.
  bool share_no_jump_path = true;
  unsigned jobs = 1;
};

struct TrajectoryResult {
  std::vector<double> times;
  std::vector<double> survival;  // fraction of trajectories without a jump
  std::vector<double> survival_stderr;
  std::vector<std::array<double, 3>> populations;  // ensemble means, vacuum counts as 0
  std::vector<std::array<double, 3>> populations_stderr;
  std::vector<double> jump_times;  // per trajectory; +inf if no jump before the last sample
};

/// First-order quantum-trajectory unraveling with a pre-drawn uniform
/// threshold on the norm. Trajectory k draws from mt19937_64 seeded with
/// (seed, k), so results do not depend on `jobs`.
TrajectoryResult evolve_trajectories(const PairParams& params, const RampProtocol& ramp,
                                     const PairState& psi0, std::span<const double> sample_times,
                                     const TrajectoryOptions& traj = {},
                                     const OdeOptions& options = {});

/// Uniform variate in [0, 1) for trajectory `index`.
double trajectory_threshold(std::uint64_t seed, std::uint64_t index);

struct LifetimeOptions {
  int samples = 41;
  double non_exponential_threshold = 1e-3;  // rms residual of log(norm2)
  double rate_drift_threshold = 0.05;       // relative early-vs-late rate difference
};

struct LifetimeFit {
  double gamma = 0.0;  // decay rate of norm2, 1/s
  double rms_log_residual = 0.0;
  double rate_drift = 0.0;  // |rate(first half) - rate(second half)| / rate
  double norm2_at_ramp_end = 1.0;
  bool non_exponential = false;
};

/// Exponential rate of norm2 over the hold segment of `ramp`, starting from
/// |gg>. Throws std::invalid_argument if the ramp has no hold.
LifetimeFit prepared_state_lifetime(const PairParams& params, const RampProtocol& ramp,
                                    const LifetimeOptions& lifetime = {},
                                    const OdeOptions& options = {});

}  // namespace zeno
