#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "zeno/dynamics.hpp"
#include "zeno/spectrum.hpp"

using namespace zeno;
using cd = std::complex<double>;

namespace {

std::vector<double> uniform_times(double t_end, int n) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = t_end * i / (n - 1);
  return t;
}

// Asymptotic Kolmogorov distribution tail P(sqrt(n) D > x).
double kolmogorov_tail(double x) {
  if (x < 0.2) return 1.0;
  double sum = 0;
  for (int k = 1; k <= 100; ++k) {
    sum += (k % 2 ? 2.0 : -2.0) * std::exp(-2.0 * k * k * x * x);
  }
  return std::clamp(sum, 0.0, 1.0);
}

RampProtocol descending_ramp(double delta_f_hz, double hold_ms = 0.0) {
  return RampProtocol::with_default_timing(hz(1500), hz(delta_f_hz), hz_per_ms(11.1), hz(150),
                                         ms(hold_ms));
}

}  // namespace

TEST_CASE("ramp protocol") {
  const RampProtocol r = descending_ramp(-1500, 10);
  CHECK(r.delta_dot < 0);
  CHECK(r.t_delta == doctest::Approx(3000.0 / 11.1 * 1e-3));
  CHECK(r.t_omega == doctest::Approx(r.ramp_time() / 10));
  CHECK(r.drive_at(0).omega == 0.0);
  CHECK(r.drive_at(r.t_omega / 2).omega == doctest::Approx(hz(75)));
  CHECK(r.drive_at(r.t_omega / 2).delta == hz(1500));
  CHECK(r.drive_at(r.t_omega + r.t_delta / 2).delta == doctest::Approx(0.0).scale(hz(1)));
  CHECK(r.drive_at(r.end_time()).delta == hz(-1500));
  CHECK(r.rates_at(r.t_omega + 1e-6).delta_dot == r.delta_dot);

  RampProtocol bad = r;
  bad.delta_dot = -bad.delta_dot;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = r;
  bad.t_hold = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  const RampProtocol flat = RampProtocol::with_default_timing(hz(1500), hz(1500), hz_per_ms(11.1), hz(150));
  CHECK(flat.ramp_time() == 0.0);

  RampProtocol intensity = r;
  intensity.shape = OmegaRampShape::linear_intensity;
  CHECK(std::pow(intensity.drive_at(r.t_omega / 4).omega / hz(150), 2) == doctest::Approx(0.25));
  CHECK(parse_omega_ramp_shape("linear_intensity") == OmegaRampShape::linear_intensity);
  CHECK_THROWS_AS(parse_omega_ramp_shape("cubic"), std::invalid_argument);
}

TEST_CASE("isolated lossy level") {
  const PairParams p{0, 0, 0, hz(1000), 0};
  const auto ramp = RampProtocol::constant(0.0, 0.0, 5e-3);
  const auto times = uniform_times(5e-3, 51);
  const EvolutionResult ee = evolve_nonhermitian(p, ramp, bare_state(Bare::ee), times);
  const EvolutionResult gg = evolve_nonhermitian(p, ramp, bare_state(Bare::gg), times);
  for (std::size_t i = 0; i < times.size(); ++i) {
    CHECK(std::abs(ee.norm2[i] - std::exp(-p.gamma_ee * times[i])) <= 1e-8);
    CHECK(gg.norm2[i] == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("spin-1 rotation transfers gg to ee at Omega t = pi") {
  const PairParams p{0, 0, 0, 0, hz(150)};
  const double t = std::acos(-1.0) / p.omega;
  const auto ramp = RampProtocol::constant(0.0, p.omega, t);
  const std::vector<double> times{t};
  const EvolutionResult r = evolve_nonhermitian(p, ramp, bare_state(Bare::gg), times);
  CHECK(r.populations[0][2] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("norm decay law along the descending ramp") {
  const PairParams p = PairParams::ytterbium();
  const RampProtocol ramp = descending_ramp(-1000);
  const double h = 1e-5;
  std::vector<double> centers;
  for (double t = 0.02; t < ramp.ramp_time() - 0.01; t += 0.02) centers.push_back(t);
  std::vector<double> times;
  for (double c : centers) {
    for (int k = -2; k <= 2; ++k) times.push_back(c + k * h);
  }
  const EvolutionResult r = evolve_nonhermitian(p, ramp, bare_state(Bare::gg), times);
  for (std::size_t i = 1; i < r.norm2.size(); ++i) CHECK(r.norm2[i] <= r.norm2[i - 1]);
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double* n = &r.norm2[5 * c];
    const double deriv = (n[0] - 8 * n[1] + 8 * n[3] - n[4]) / (12 * h);
    CHECK(std::abs(deriv + p.gamma_ee * r.populations[5 * c + 2][2]) <= 1e-5 * p.gamma_ee);
  }
}

TEST_CASE("coherent evolution is time reversible") {
  PairParams p = PairParams::ytterbium();
  p.gamma_ee = 0;
  const RampProtocol ramp = descending_ramp(-500);
  const auto bp = ramp.breakpoints();
  const DriveFunction drive = [&](double t) { return ramp.drive_at(t); };
  const PairState psi0 = bare_state(Bare::gg);
  const PairState fwd = propagate(p, drive, psi0, 0.0, ramp.ramp_time(), bp);
  const PairState back = propagate(p, drive, fwd, ramp.ramp_time(), 0.0, bp);
  CHECK(std::norm(psi0.dot(back)) >= 1 - 1e-6);
  CHECK(std::norm(psi0.dot(fwd)) < 0.5);
}

TEST_CASE("tighter tolerance barely moves the result") {
  const PairParams p = PairParams::ytterbium();
  const RampProtocol ramp = descending_ramp(0);
  const std::vector<double> t{ramp.ramp_time()};
  OdeOptions tight;
  tight.rtol = 0.5e-10;
  tight.atol = 0.5e-13;
  const double a = evolve_nonhermitian(p, ramp, bare_state(Bare::gg), t).norm2[0];
  const double b = evolve_nonhermitian(p, ramp, bare_state(Bare::gg), t, tight).norm2[0];
  CHECK(std::abs(a - b) < 1e-7);
}

TEST_CASE("integration failures report the last good time") {
  const PairParams p = PairParams::ytterbium();
  OdeOptions starved;
  starved.max_steps = 10;
  const std::vector<double> t{0.1};
  try {
    evolve_nonhermitian(p, descending_ramp(0), bare_state(Bare::gg), t, starved);
    FAIL("expected IntegrationError");
  } catch (const IntegrationError& e) {
    CHECK(e.last_good_time() > 0.0);
    CHECK(e.last_good_time() < 0.1);
  }
}

TEST_CASE("input validation") {
  const PairParams p = PairParams::ytterbium();
  const RampProtocol ramp = descending_ramp(0);
  const std::vector<double> t{0.0, 0.01};
  CHECK_THROWS_AS(evolve_nonhermitian(p, ramp, 2.0 * bare_state(Bare::gg), t), std::invalid_argument);
  const std::vector<double> unordered{0.01, 0.0};
  CHECK_THROWS_AS(evolve_nonhermitian(p, ramp, bare_state(Bare::gg), unordered), std::invalid_argument);

  DensityMatrix rho = pure_density(bare_state(Bare::gg));
  rho(0, 0) = 2.0;
  CHECK_THROWS_AS(evolve_lindblad(p, ramp, rho, t), std::invalid_argument);
  rho = DensityMatrix::Zero();
  rho(0, 0) = 1.5;
  rho(1, 1) = -0.5;
  CHECK_THROWS_AS(evolve_lindblad(p, ramp, rho, t), std::invalid_argument);
  rho = pure_density(bare_state(Bare::gg));
  rho(0, 1) = 0.3;
  CHECK_THROWS_AS(evolve_lindblad(p, ramp, rho, t), std::invalid_argument);

  TrajectoryOptions none;
  none.n_traj = 0;
  CHECK_THROWS_AS(evolve_trajectories(p, ramp, bare_state(Bare::gg), t, none), std::invalid_argument);
}

TEST_CASE("Lindblad evolution") {
  SUBCASE("decay into vacuum") {
    const PairParams p{0, 0, 0, hz(1000), 0};
    const auto times = uniform_times(3e-3, 31);
    const LindbladResult r = evolve_lindblad(p, RampProtocol::constant(0, 0, 3e-3),
                                             pure_density(bare_state(Bare::ee)), times);
    for (std::size_t i = 0; i < times.size(); ++i) {
      CHECK(r.rho[i](kVacuum, kVacuum).real() ==
            doctest::Approx(1 - std::exp(-p.gamma_ee * times[i])).epsilon(1e-8));
    }
  }
  SUBCASE("pair block equals the non-Hermitian outer product") {
    const PairParams p = PairParams::ytterbium();
    const RampProtocol ramp = descending_ramp(-1500);
    const auto times = uniform_times(ramp.ramp_time(), 28);
    const PairState psi0 = bare_state(Bare::gg);
    const LindbladResult lb = evolve_lindblad(p, ramp, pure_density(psi0), times);
    const EvolutionResult nh = evolve_nonhermitian(p, ramp, psi0, times);
    for (std::size_t i = 0; i < times.size(); ++i) {
      CHECK(std::abs(lb.trace[i] - 1.0) <= 1e-9);
      const PairOperator outer = nh.states[i] * nh.states[i].adjoint();
      const double err = (lb.rho[i].topLeftCorner<3, 3>() - outer).cwiseAbs().maxCoeff();
      CHECK(err <= 1e-7);
      CHECK(std::abs(lb.pair_trace[i] - nh.norm2[i]) <= 1e-7);
    }
  }
}

TEST_CASE("quantum trajectories") {
  const PairParams yb = PairParams::ytterbium();

  SUBCASE("no loss, no jumps") {
    PairParams p = yb;
    p.gamma_ee = 0;
    const RampProtocol ramp = descending_ramp(0);
    const auto times = uniform_times(ramp.ramp_time(), 5);
    TrajectoryOptions o;
    o.n_traj = 500;
    const TrajectoryResult r = evolve_trajectories(p, ramp, bare_state(Bare::gg), times, o);
    for (double s : r.survival) CHECK(s == 1.0);
  }

  SUBCASE("survival follows the norm within 3 sigma") {
    const RampProtocol ramp = descending_ramp(-1500);
    const auto times = uniform_times(ramp.ramp_time(), 31);
    TrajectoryOptions o;
    o.n_traj = 10000;
    o.seed = 7;
    const TrajectoryResult mc = evolve_trajectories(yb, ramp, bare_state(Bare::gg), times, o);
    const EvolutionResult nh = evolve_nonhermitian(yb, ramp, bare_state(Bare::gg), times);
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double n2 = nh.norm2[i];
      const double sigma = std::sqrt(n2 * (1 - n2) / o.n_traj);
      CHECK(std::abs(mc.survival[i] - n2) <= 3 * sigma + 1e-12);
      // Survivors all share the normalized no-jump state, so the mean is
      // binomial noise scaled by that state's population.
      for (int b = 0; b < 3; ++b) {
        const double conditional = nh.populations[i][b] / n2;
        CHECK(std::abs(mc.populations[i][b] - nh.populations[i][b]) <=
              3 * conditional * sigma + 1e-12);
      }
    }
  }

  SUBCASE("holding times are exponential") {
    const PairParams p{0, 0, 0, hz(1000), 0};
    const double t_end = 25.0 / p.gamma_ee;
    const std::vector<double> times{0.0, t_end};
    TrajectoryOptions o;
    o.n_traj = 10000;
    o.seed = 2024;
    const TrajectoryResult r = evolve_trajectories(p, RampProtocol::constant(0, 0, t_end),
                                                   bare_state(Bare::ee), times, o);
    std::vector<double> jumps = r.jump_times;
    std::sort(jumps.begin(), jumps.end());
    REQUIRE(std::isfinite(jumps.back()));
    double d = 0;
    const double n = static_cast<double>(jumps.size());
    for (std::size_t i = 0; i < jumps.size(); ++i) {
      const double cdf = 1 - std::exp(-p.gamma_ee * jumps[i]);
      d = std::max({d, std::abs(cdf - i / n), std::abs((i + 1) / n - cdf)});
    }
    CHECK(kolmogorov_tail(std::sqrt(n) * d) > 0.01);
  }

  SUBCASE("shared and separate no-jump paths agree exactly") {
    const RampProtocol ramp = descending_ramp(0);
    const auto times = uniform_times(ramp.ramp_time(), 7);
    TrajectoryOptions shared;
    shared.n_traj = 300;
    shared.seed = 99;
    TrajectoryOptions separate = shared;
    separate.share_no_jump_path = false;
    separate.jobs = 3;
    const auto a = evolve_trajectories(yb, ramp, bare_state(Bare::gg), times, shared);
    const auto b = evolve_trajectories(yb, ramp, bare_state(Bare::gg), times, separate);
    CHECK(a.jump_times == b.jump_times);
    CHECK(a.survival == b.survival);
    for (std::size_t i = 0; i < times.size(); ++i) {
      for (int k = 0; k < 3; ++k) {
        CHECK(a.populations[i][k] == doctest::Approx(b.populations[i][k]).epsilon(1e-12));
      }
    }
  }

  SUBCASE("seeded determinism independent of jobs") {
    const RampProtocol ramp = descending_ramp(500);
    const auto times = uniform_times(ramp.ramp_time(), 4);
    TrajectoryOptions o;
    o.n_traj = 2000;
    o.seed = 5;
    const auto a = evolve_trajectories(yb, ramp, bare_state(Bare::gg), times, o);
    o.jobs = 4;
    const auto b = evolve_trajectories(yb, ramp, bare_state(Bare::gg), times, o);
    CHECK(a.jump_times == b.jump_times);
    o.seed = 6;
    const auto c = evolve_trajectories(yb, ramp, bare_state(Bare::gg), times, o);
    CHECK(a.jump_times != c.jump_times);
    CHECK(trajectory_threshold(5, 0) == trajectory_threshold(5, 0));
    CHECK(trajectory_threshold(5, 0) != trajectory_threshold(5, 1));
  }
}

TEST_CASE("prepared-state lifetime") {
  const PairParams yb = PairParams::ytterbium();

  SUBCASE("far off resonance matches the dressed-state rate") {
    const RampProtocol ramp = descending_ramp(-1500, 50);
    const LifetimeFit fit = prepared_state_lifetime(yb, ramp);
    const std::vector<double> deltas = linear_grid(hz(-1500), hz(1500), hz(1));
    std::vector<double> down(deltas.rbegin(), deltas.rend());
    const SpectralSweep sweep = sweep_spectrum(yb, down);
    const double branch_gamma = sweep.states.back()[index(Bare::gg)].gamma;
    CHECK(fit.gamma < 0.01 * yb.gamma_ee);
    CHECK(fit.gamma == doctest::Approx(branch_gamma).epsilon(0.05));
  }
  SUBCASE("single exponential at the lifetime-measurement detuning") {
    const LifetimeFit fit = prepared_state_lifetime(yb, descending_ramp(650, 50));
    CHECK_FALSE(fit.non_exponential);
    CHECK(fit.gamma > 0.0);
  }
  SUBCASE("no loss, no decay") {
    PairParams p = yb;
    p.gamma_ee = 0;
    CHECK(prepared_state_lifetime(p, descending_ramp(0, 10)).gamma == 0.0);
  }
  SUBCASE("needs a hold") {
    CHECK_THROWS_AS(prepared_state_lifetime(yb, descending_ramp(0)), std::invalid_argument);
  }
}
