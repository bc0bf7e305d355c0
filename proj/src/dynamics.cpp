#include "zeno/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <boost/math/tools/toms748_solve.hpp>

#include "zeno/parallel.hpp"

namespace zeno {

namespace {

void require_samples(std::span<const double> times) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || times[i] < 0.0) {
      throw std::invalid_argument("sample times must be finite and >= 0");
    }
    if (i > 0 && times[i] < times[i - 1]) {
      throw std::invalid_argument("sample times must be ascending");
    }
  }
}

void require_normalized(const PairState& psi) {
  if (std::abs(psi.squaredNorm() - 1.0) > 1e-10) {
    throw std::invalid_argument("initial pair state must have unit norm");
  }
}

// Integration targets: every sample time plus every ramp breakpoint before the
// last sample. Each entry says whether it is a sample.
struct Target {
  double t;
  bool sample;
};

std::vector<Target> schedule(const RampProtocol& ramp, std::span<const double> samples) {
  std::vector<Target> targets;
  targets.reserve(samples.size() + 3);
  for (double t : samples) targets.push_back({t, true});
  const double last = samples.empty() ? 0.0 : samples.back();
  for (double b : ramp.breakpoints()) {
    if (b > 0.0 && b < last) targets.push_back({b, false});
  }
  std::stable_sort(targets.begin(), targets.end(),
                   [](const Target& a, const Target& b) { return a.t < b.t; });
  return targets;
}

auto schrodinger_rhs(const PairParams& params, const RampProtocol& ramp) {
  return [&params, &ramp](double t, const PairState& psi) -> PairState {
    const Drive d = ramp.drive_at(t);
    return std::complex<double>(0, -1) * (build_heff(params, d.delta, d.omega) * psi);
  };
}

std::array<double, 3> populations_of(const PairState& psi) {
  return {std::norm(psi(0)), std::norm(psi(1)), std::norm(psi(2))};
}

double jump_time_in_step(const StepRecord<PairState>& rec, double threshold) {
  auto g = [&](double t) { return hermite(rec, t).squaredNorm() - threshold; };
  const double g0 = rec.y0.squaredNorm() - threshold;
  const double g1 = rec.y1.squaredNorm() - threshold;
  if (g0 <= 0.0) return rec.t0;
  std::uintmax_t iterations = 200;
  const auto bracket = boost::math::tools::toms748_solve(
      g, rec.t0, rec.t1, g0, g1, boost::math::tools::eps_tolerance<double>(52), iterations);
  return 0.5 * (bracket.first + bracket.second);
}

}  // namespace

PairState bare_state(Bare b) {
  PairState psi = PairState::Zero();
  psi(index(b)) = 1.0;
  return psi;
}

EvolutionResult evolve_nonhermitian(const PairParams& params, const RampProtocol& ramp,
                                    const PairState& psi0, std::span<const double> sample_times,
                                    const OdeOptions& options) {
  params.validate();
  ramp.validate();
  require_normalized(psi0);
  require_samples(sample_times);

  EvolutionResult out;
  auto rhs = schrodinger_rhs(params, ramp);
  DormandPrince<PairState, decltype(rhs)> solver(rhs, 0.0, psi0, options);
  for (const Target& target : schedule(ramp, sample_times)) {
    solver.advance_to(target.t);
    if (!target.sample) continue;
    const PairState& psi = solver.state();
    out.times.push_back(target.t);
    out.states.push_back(psi);
    out.norm2.push_back(psi.squaredNorm());
    out.populations.push_back(populations_of(psi));
  }
  return out;
}

PairState propagate(const PairParams& params, const DriveFunction& drive, PairState psi,
                    double t0, double t1, std::span<const double> breakpoints,
                    const OdeOptions& options) {
  params.validate();
  auto rhs = [&](double t, const PairState& y) -> PairState {
    const Drive d = drive(t);
    return std::complex<double>(0, -1) * (build_heff(params, d.delta, d.omega) * y);
  };
  std::vector<double> stops;
  for (double b : breakpoints) {
    if ((b - t0) * (t1 - b) > 0.0) stops.push_back(b);
  }
  std::sort(stops.begin(), stops.end());
  if (t1 < t0) std::reverse(stops.begin(), stops.end());
  stops.push_back(t1);

  DormandPrince<PairState, decltype(rhs)> solver(rhs, t0, std::move(psi), options);
  for (double t : stops) solver.advance_to(t);
  return solver.state();
}

DensityMatrix pure_density(const PairState& psi) {
  DensityMatrix rho = DensityMatrix::Zero();
  rho.topLeftCorner<3, 3>() = psi * psi.adjoint();
  return rho;
}

LindbladResult evolve_lindblad(const PairParams& params, const RampProtocol& ramp,
                               const DensityMatrix& rho0, std::span<const double> sample_times,
                               const OdeOptions& options) {
  params.validate();
  ramp.validate();
  require_samples(sample_times);
  if ((rho0 - rho0.adjoint()).norm() > 1e-12) {
    throw std::invalid_argument("rho0 must be Hermitian");
  }
  const std::complex<double> tr = rho0.trace();
  if (std::abs(tr - 1.0) > 1e-10) throw std::invalid_argument("rho0 must have unit trace");
  const Eigen::SelfAdjointEigenSolver<DensityMatrix> eig(rho0, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12) {
    throw std::invalid_argument("rho0 must be positive semidefinite");
  }

  const double gamma = params.gamma_ee;
  const int ee = index(Bare::ee);
  auto rhs = [&](double t, const DensityMatrix& rho) -> DensityMatrix {
    const Drive d = ramp.drive_at(t);
    DensityMatrix h = DensityMatrix::Zero();
    h.topLeftCorner<3, 3>() = build_heff(params, d.delta, d.omega);
    DensityMatrix drho = std::complex<double>(0, -1) * (h * rho - rho * h.adjoint());
    drho(kVacuum, kVacuum) += gamma * rho(ee, ee);
    return drho;
  };

  LindbladResult out;
  DormandPrince<DensityMatrix, decltype(rhs)> solver(rhs, 0.0, rho0, options);
  for (const Target& target : schedule(ramp, sample_times)) {
    solver.advance_to(target.t);
    if (!target.sample) continue;
    const DensityMatrix& rho = solver.state();
    out.times.push_back(target.t);
    out.rho.push_back(rho);
    out.trace.push_back(rho.trace().real());
    out.pair_trace.push_back(rho.topLeftCorner<3, 3>().trace().real());
  }
  return out;
}

double trajectory_threshold(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  // 53 random mantissa bits; identical on every platform.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

TrajectoryResult evolve_trajectories(const PairParams& params, const RampProtocol& ramp,
                                     const PairState& psi0, std::span<const double> sample_times,
                                     const TrajectoryOptions& traj, const OdeOptions& options) {
  params.validate();
  ramp.validate();
  require_normalized(psi0);
  require_samples(sample_times);
  if (traj.n_traj == 0) throw std::invalid_argument("n_traj must be >= 1");

  const std::size_t n = traj.n_traj;
  const std::size_t n_samples = sample_times.size();
  const auto targets = schedule(ramp, sample_times);
  auto rhs = schrodinger_rhs(params, ramp);
  using Solver = DormandPrince<PairState, decltype(rhs)>;
  constexpr double never = std::numeric_limits<double>::infinity();

  std::vector<double> jump_times(n, never);
  // Normalized populations at each sample for trajectories still alive there.
  std::vector<std::vector<std::array<double, 3>>> alive_populations(n);

  if (traj.share_no_jump_path) {
    std::vector<StepRecord<PairState>> steps;
    std::vector<std::array<double, 3>> sample_pops;
    Solver solver(rhs, 0.0, psi0, options);
    for (const Target& target : targets) {
      solver.advance_to(target.t, [&](const StepRecord<PairState>& rec) {
        steps.push_back(rec);
        return true;
      });
      if (target.sample) {
        const PairState& psi = solver.state();
        const double nn = psi.squaredNorm();
        auto p = populations_of(psi);
        for (double& v : p) v = nn > 0.0 ? v / nn : 0.0;
        sample_pops.push_back(p);
      }
    }
    // Running minimum of the step-end norm makes the first crossing a binary search.
    std::vector<double> floor_norm(steps.size());
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < steps.size(); ++s) {
      m = std::min(m, steps[s].y1.squaredNorm());
      floor_norm[s] = m;
    }
    parallel_for(n, traj.jobs, [&](std::size_t k) {
      const double r = trajectory_threshold(traj.seed, k);
      const auto first = std::partition_point(floor_norm.begin(), floor_norm.end(),
                                              [r](double v) { return !(v < r); });
      if (first != floor_norm.end()) {
        jump_times[k] = jump_time_in_step(steps[first - floor_norm.begin()], r);
      }
      for (std::size_t s = 0; s < n_samples; ++s) {
        if (!(jump_times[k] > sample_times[s])) break;
        alive_populations[k].push_back(sample_pops[s]);
      }
    });
  } else {
    parallel_for(n, traj.jobs, [&](std::size_t k) {
      const double r = trajectory_threshold(traj.seed, k);
      Solver solver(rhs, 0.0, psi0, options);
      for (const Target& target : targets) {
        const bool alive = solver.advance_to(target.t, [&](const StepRecord<PairState>& rec) {
          if (!(rec.y1.squaredNorm() < r)) return true;
          jump_times[k] = jump_time_in_step(rec, r);
          return false;
        });
        if (!alive) break;
        if (target.sample) {
          const PairState& psi = solver.state();
          const double nn = psi.squaredNorm();
          auto p = populations_of(psi);
          for (double& v : p) v /= nn;
          alive_populations[k].push_back(p);
        }
      }
    });
  }

  TrajectoryResult out;
  out.times.assign(sample_times.begin(), sample_times.end());
  out.jump_times = jump_times;
  out.survival.resize(n_samples);
  out.survival_stderr.resize(n_samples);
  out.populations.resize(n_samples);
  out.populations_stderr.resize(n_samples);
  const double dn = static_cast<double>(n);
  for (std::size_t s = 0; s < n_samples; ++s) {
    std::size_t alive = 0;
    std::array<double, 3> sum{}, sum2{};
    for (std::size_t k = 0; k < n; ++k) {
      if (alive_populations[k].size() <= s) continue;
      ++alive;
      for (int i = 0; i < 3; ++i) {
        const double v = alive_populations[k][s][i];
        sum[i] += v;
        sum2[i] += v * v;
      }
    }
    const double frac = alive / dn;
    out.survival[s] = frac;
    out.survival_stderr[s] = std::sqrt(frac * (1.0 - frac) / dn);
    for (int i = 0; i < 3; ++i) {
      const double mean = sum[i] / dn;
      out.populations[s][i] = mean;
      const double var = n > 1 ? std::max(0.0, (sum2[i] - dn * mean * mean) / (dn - 1.0)) : 0.0;
      out.populations_stderr[s][i] = std::sqrt(var / dn);
    }
  }
  return out;
}

LifetimeFit prepared_state_lifetime(const PairParams& params, const RampProtocol& ramp,
                                    const LifetimeOptions& lifetime, const OdeOptions& options) {
  if (!(ramp.t_hold > 0.0)) throw std::invalid_argument("lifetime needs a hold segment");
  if (lifetime.samples < 3) throw std::invalid_argument("lifetime needs >= 3 hold samples");
  LifetimeFit fit;
  // Without a loss channel the norm is conserved and there is nothing to fit.
  if (params.gamma_ee == 0.0) return fit;

  std::vector<double> times(lifetime.samples);
  for (int j = 0; j < lifetime.samples; ++j) {
    times[j] = ramp.ramp_time() + ramp.t_hold * j / (lifetime.samples - 1);
  }
  const EvolutionResult ev = evolve_nonhermitian(params, ramp, bare_state(Bare::gg), times, options);
  fit.norm2_at_ramp_end = ev.norm2.front();

  // Straight-line fit of log(norm2) over samples [lo, hi); returns (decay rate, rms residual).
  auto line_fit = [&](Eigen::Index lo, Eigen::Index hi) {
    const Eigen::Index m = hi - lo;
    Eigen::MatrixX2d design(m, 2);
    Eigen::VectorXd logs(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      design(j, 0) = 1.0;
      design(j, 1) = times[lo + j] - times.front();
      logs(j) = std::log(ev.norm2[lo + j]);
    }
    const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(logs);
    const Eigen::VectorXd resid = logs - design * coef;
    return std::pair{-coef(1), std::sqrt(resid.squaredNorm() / static_cast<double>(m))};
  };
  const Eigen::Index m = lifetime.samples;
  const auto [rate, rms] = line_fit(0, m);
  fit.gamma = std::max(0.0, rate);
  fit.rms_log_residual = rms;
  // Admixed faster branches make the early rate exceed the late one even when
  // the absolute residual is tiny compared with the total decay.
  const double early = line_fit(0, m / 2 + 1).first;
  const double late = line_fit(m / 2, m).first;
  fit.rate_drift = std::abs(early - late) / std::max(std::abs(rate), 1e-300);
  fit.non_exponential = fit.rms_log_residual > lifetime.non_exponential_threshold ||
                        fit.rate_drift > lifetime.rate_drift_threshold;
  return fit;
}

}  // namespace zeno
