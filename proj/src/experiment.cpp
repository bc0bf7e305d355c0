#include "zeno/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/tools/minima.hpp>

#include "zeno/parallel.hpp"

namespace zeno {

void EnsembleModel::validate() const {
  if (!(n1 >= 0.0) || !(n2 >= 0.0) || !std::isfinite(n1) || !std::isfinite(n2)) {
    throw std::invalid_argument("site counts n1, n2 must be finite and >= 0");
  }
  if (!(eta_rp > 0.0 && eta_rp <= 1.0)) throw std::invalid_argument("eta_rp must lie in (0, 1]");
}

namespace {

void require_probability(double p, const char* name) {
  // Integrators deliver probabilities a few ulps outside [0, 1].
  if (!(p >= -1e-12 && p <= 1.0 + 1e-12)) {
    throw std::invalid_argument(std::string("probability ") + name + " outside [0, 1]");
  }
}

}  // namespace

Observables observables(const EnsembleModel& model, const PairProbabilities& pair,
                        const SingleProbabilities& single) {
  model.validate();
  require_probability(pair.gg, "P_gg");
  require_probability(pair.eg, "P_eg");
  require_probability(pair.ee, "P_ee");
  require_probability(pair.survival(), "P_gg + P_eg + P_ee");
  require_probability(single.g, "P_g");
  require_probability(single.e, "P_e");
  require_probability(single.g + single.e, "P_g + P_e");

  Observables o;
  o.n_g = model.n1 * single.g + model.n2 * (pair.eg + 2.0 * pair.gg);
  o.n_e = model.n1 * single.e + model.n2 * (pair.eg + 2.0 * pair.ee);
  o.n_e_detected = model.eta_rp * o.n_e;
  o.n_total_detected = o.n_g + o.n_e_detected;
  o.n_lost = 2.0 * model.n2 * (1.0 - pair.survival());
  return o;
}

Eigen::Matrix2cd single_atom_hamiltonian(double delta, double omega) {
  Eigen::Matrix2cd h;
  h << delta / 2.0, omega / 2.0, omega / 2.0, -delta / 2.0;
  return h;
}

TwoLevelResult two_level_evolve(double omega, const RampProtocol& ramp,
                                std::span<const double> sample_times, const OdeOptions& options) {
  ramp.validate();
  if (!(omega >= 0.0) || !std::isfinite(omega)) throw std::invalid_argument("omega must be >= 0");
  for (std::size_t i = 0; i < sample_times.size(); ++i) {
    if (!(sample_times[i] >= 0.0) || (i > 0 && sample_times[i] < sample_times[i - 1])) {
      throw std::invalid_argument("sample times must be ascending and >= 0");
    }
  }
  auto rhs = [&](double t, const AtomState& y) -> AtomState {
    const Drive d = ramp.drive_at(t);
    const double envelope = ramp.omega_nominal > 0.0 ? d.omega / ramp.omega_nominal : 1.0;
    return std::complex<double>(0, -1) * (single_atom_hamiltonian(d.delta, omega * envelope) * y);
  };
  DormandPrince<AtomState, decltype(rhs)> solver(rhs, 0.0, AtomState(1.0, 0.0), options);

  const auto kinks = ramp.breakpoints();
  TwoLevelResult out;
  for (double t : sample_times) {
    for (double b : kinks) {
      if (b > solver.time() && b < t) solver.advance_to(b);
    }
    solver.advance_to(t);
    const AtomState& y = solver.state();
    out.times.push_back(t);
    out.states.push_back(y);
    out.p_g.push_back(std::norm(y(0)));
    out.p_e.push_back(std::norm(y(1)));
  }
  return out;
}

namespace {

// Adiabatic states of the single atom with mixing angle theta = atan2(Omega, delta):
// the upper one is g-like for delta > 0, the lower one for delta < 0.
AtomState adiabatic_state(double delta, double omega, bool upper) {
  const double theta = std::atan2(omega, delta);
  return upper ? AtomState(std::cos(theta / 2.0), std::sin(theta / 2.0))
               : AtomState(-std::sin(theta / 2.0), std::cos(theta / 2.0));
}

}  // namespace

LandauZenerResult landau_zener_transfer(double omega, double delta_i, double delta_f, double delta_dot,
                                        const OdeOptions& options) {
  if (!(omega >= 0.0) || !std::isfinite(omega) || delta_dot == 0.0 || delta_i == delta_f ||
      (delta_f - delta_i) * delta_dot < 0.0) {
    throw std::invalid_argument("Landau-Zener sweep needs omega >= 0 and a speed toward delta_f");
  }
  auto rhs = [&](double t, const AtomState& y) -> AtomState {
    return std::complex<double>(0, -1) * (single_atom_hamiltonian(delta_i + delta_dot * t, omega) * y);
  };
  const bool upper = delta_i > 0.0;
  DormandPrince<AtomState, decltype(rhs)> solver(rhs, 0.0, adiabatic_state(delta_i, omega, upper), options);
  solver.advance_to((delta_f - delta_i) / delta_dot);
  const AtomState& psi = solver.state();

  LandauZenerResult r;
  r.transfer = std::norm(adiabatic_state(delta_f, omega, upper).dot(psi));
  r.bare_transfer = std::norm(psi(1));
  r.analytic = 1.0 - std::exp(-std::numbers::pi * omega * omega / (2.0 * std::abs(delta_dot)));
  r.ends_near_resonance = std::abs(delta_f) < 2.0 * omega;
  return r;
}

// ---------------------------------------------------------------- fitting

namespace {

struct Profile {
  double f1 = 0.0, f2 = 0.0, rss = std::numeric_limits<double>::infinity();
};

// Bounded weighted linear least squares for (f1, f2) at fixed gamma. With two
// unknowns the active-set enumeration is exact.
Profile profile_at(double gamma, std::span<const double> t, std::span<const double> y,
                   std::span<const double> w) {
  double s11 = 0, s12 = 0, s22 = 0, b1 = 0, b2 = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double e = std::exp(-gamma * t[i]);
    s11 += w[i];
    s12 += w[i] * e;
    s22 += w[i] * e * e;
    b1 += w[i] * y[i];
    b2 += w[i] * e * y[i];
  }
  auto rss_of = [&](double f1, double f2) {
    double r = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double d = y[i] - f1 - f2 * std::exp(-gamma * t[i]);
      r += w[i] * d * d;
    }
    return r;
  };
  Profile best;
  auto consider = [&](double f1, double f2) {
    if (f1 < 0.0 || f2 < 0.0) return;
    const double r = rss_of(f1, f2);
    if (r < best.rss) best = {f1, f2, r};
  };
  const double det = s11 * s22 - s12 * s12;
  if (det > 1e-14 * s11 * s22) consider((b1 * s22 - b2 * s12) / det, (s11 * b2 - s12 * b1) / det);
  consider(std::max(0.0, b1 / s11), 0.0);
  consider(0.0, std::max(0.0, b2 / s22));
  consider(0.0, 0.0);
  return best;
}

double initial_gamma(std::span<const double> t, std::span<const double> y) {
  const double lo = *std::min_element(y.begin(), y.end());
  const double hi = *std::max_element(y.begin(), y.end());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double d = y[i] - lo;
    if (!(d > 1e-3 * (hi - lo))) continue;
    const double l = std::log(d);
    sx += t[i];
    sy += l;
    sxx += t[i] * t[i];
    sxy += t[i] * l;
    ++m;
  }
  const double den = m * sxx - sx * sx;
  if (m < 2 || !(den > 0.0)) return 0.0;
  return std::max(0.0, -(m * sxy - sx * sy) / den);
}

}  // namespace

DecayFit fit_decay(std::span<const double> times, std::span<const double> counts,
                   std::span<const double> weights, const FitOptions& options) {
  const std::size_t n = times.size();
  if (n < 4) throw std::invalid_argument("fit_decay needs at least 4 points");
  if (counts.size() != n) throw std::invalid_argument("times and counts differ in length");
  if (!weights.empty() && weights.size() != n) throw std::invalid_argument("weights differ in length");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(times[i]) || times[i] < 0.0) throw std::invalid_argument("times must be >= 0");
    if (!std::isfinite(counts[i])) throw std::invalid_argument("counts must be finite");
    if (!weights.empty() && !(weights[i] > 0.0 && std::isfinite(weights[i]))) {
      throw std::invalid_argument("weights must be positive");
    }
  }
  const auto [tmin, tmax] = std::minmax_element(times.begin(), times.end());
  const double span = *tmax - *tmin;
  if (!(span > 0.0)) throw std::invalid_argument("times must not all be equal");

  std::vector<double> w(weights.begin(), weights.end());
  if (w.empty()) w.assign(n, 1.0);

  int evaluations = 0;
  auto objective = [&](double gamma) {
    ++evaluations;
    return profile_at(gamma, times, counts, w).rss;
  };

  // Coarse logarithmic scan brackets the global minimum; gamma = 0 is scanned too.
  const double g0 = initial_gamma(times, counts);
  std::vector<double> grid{0.0};
  for (int k = 0; k <= 80; ++k) grid.push_back(1e-3 / span * std::pow(10.0, 6.0 * k / 80.0));
  if (g0 > 0.0) grid.push_back(g0);
  std::sort(grid.begin(), grid.end());
  std::size_t best = 0;
  std::vector<double> values(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    values[k] = objective(grid[k]);
    if (values[k] < values[best]) best = k;
  }

  double gamma = grid[best];
  if (best > 0) {
    const double a = grid[best - 1];
    const double b = best + 1 < grid.size() ? grid[best + 1] : grid[best];
    std::uintmax_t cap = static_cast<std::uintmax_t>(std::max(1, options.max_evaluations - evaluations));
    const std::uintmax_t allowed = cap;
    const auto [x, fx] = boost::math::tools::brent_find_minima(
        objective, a, b, std::numeric_limits<double>::digits / 2, cap);
    if (fx <= values[best]) gamma = x;
    if (cap >= allowed) {
      DecayFit partial;
      const Profile p = profile_at(gamma, times, counts, w);
      partial.f1 = p.f1;
      partial.f2 = p.f2;
      partial.gamma = gamma;
      partial.rss = p.rss;
      partial.evaluations = evaluations;
      throw FitError("decay fit did not converge within the evaluation cap", partial);
    }
  }

  const Profile p = profile_at(gamma, times, counts, w);
  DecayFit fit;
  fit.f1 = p.f1;
  fit.f2 = p.f2;
  fit.gamma = gamma;
  fit.rss = p.rss;
  fit.evaluations = evaluations;
  fit.no_decay_resolved = gamma == 0.0 || p.f2 <= 1e-12 * std::max(1.0, std::abs(p.f1));

  Eigen::MatrixX3d jac(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    const double e = std::exp(-gamma * times[i]);
    const double sw = std::sqrt(w[i]);
    jac.row(static_cast<Eigen::Index>(i)) << sw, sw * e, -sw * p.f2 * times[i] * e;
  }
  const double dof = static_cast<double>(n) - 3.0;
  const double s2 = dof > 0.0 ? p.rss / dof : 0.0;
  const Eigen::Matrix3d info = jac.transpose() * jac;
  fit.covariance = s2 * info.completeOrthogonalDecomposition().pseudoInverse();
  return fit;
}

// ---------------------------------------------------------------- figures

std::vector<Figure1Panel> figure1_pipeline(const PairParams& params, std::span<const double> omega_ratios,
                                           std::span<const double> deltas) {
  std::vector<Figure1Panel> panels;
  for (double ratio : omega_ratios) {
    if (!(ratio >= 0.0) || !std::isfinite(ratio)) throw std::invalid_argument("omega ratio must be >= 0");
    PairParams p = params;
    p.omega = ratio * params.gamma_ee;
    const SpectralSweep sweep = sweep_spectrum(p, deltas);

    Figure1Panel panel;
    panel.omega_over_gamma = ratio;
    panel.deltas.assign(deltas.begin(), deltas.end());
    panel.near_exceptional = sweep.any_near_exceptional;
    for (const Triplet& t : sweep.states) {
      panel.epsilon.push_back({t[0].epsilon, t[1].epsilon, t[2].epsilon});
      panel.gamma.push_back({t[0].gamma, t[1].gamma, t[2].gamma});
      std::array<std::array<double, 3>, 3> w{};
      for (int b = 0; b < 3; ++b) {
        for (Bare c : {Bare::gg, Bare::eg, Bare::ee}) w[b][index(c)] = t[b].weight(c);
      }
      panel.weights.push_back(w);
    }
    if (p.gamma_ee > 0.0 && !lambda12_approx(p, deltas.front()).outside_zeno_regime) {
      std::vector<std::array<std::complex<double>, 2>> overlay;
      const PQ pq = derive_pq(p);
      for (double d : deltas) {
        const ZenoEigenvalues z = lambda12_approx(p, d);
        const EffectiveTwoLevel e = build_effective_two_level(p, d);
        // The closed form is traceless; restore the mean of the two diagonal
        // energies, E_gg - delta'/2.
        const double offset = (d - pq.p - pq.q) - e.delta_prime / 2.0;
        overlay.push_back({z.upper + offset, z.lower + offset});
      }
      panel.zeno_overlay = std::move(overlay);
    }
    panels.push_back(std::move(panel));
  }
  return panels;
}

namespace {

std::vector<double> stops_beyond(double delta_i, int direction, std::span<const double> stops) {
  std::vector<double> kept;
  for (double d : stops) {
    if (direction * (d - delta_i) > 0.0) kept.push_back(d);
  }
  return kept;
}

}  // namespace

std::vector<Figure3Row> figure3_pipeline(const PairParams& params, const Figure3Options& options,
                                         std::span<const double> ascending_stops,
                                         std::span<const double> descending_stops) {
  params.validate();
  if (!(options.delta_dot > 0.0) || !(options.t_hold > 0.0) || !(options.start > 0.0)) {
    throw std::invalid_argument("figure 3 needs a positive speed, start detuning and hold");
  }
  const int alpha = index(Bare::gg);
  std::vector<Figure3Row> rows;
  for (int direction : {+1, -1}) {
    const double delta_i = -direction * options.start;
    const std::vector<double> stops =
        stops_beyond(delta_i, direction, direction > 0 ? ascending_stops : descending_stops);
    if (stops.empty()) continue;
    const TransportTable table(params, delta_i, options.omega, options.shape, stops, options.transport);
    std::vector<Figure3Row> part(stops.size());
    parallel_for(stops.size(), options.jobs, [&](std::size_t i) {
      const RampProtocol ramp = RampProtocol::with_default_timing(delta_i, stops[i], options.delta_dot,
                                                                options.omega, options.t_hold, options.shape);
      const LifetimeFit fit = prepared_state_lifetime(params, ramp, options.lifetime, options.ode);
      const DressedState& followed = table.stop_states(i)[alpha];
      Figure3Row& r = part[i];
      r.ascending = direction > 0;
      r.delta_f = stops[i];
      r.gamma_sim = fit.gamma;
      r.non_exponential = fit.non_exponential;
      r.gamma_branch = followed.gamma;
      PairParams driven = params;
      driven.omega = options.omega;
      r.gamma_pert = perturbative_rate_matching(driven, stops[i], followed.right);
      r.max_margin = table.evaluate(i, ramp, alpha).max_margin;
    });
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

std::vector<Figure4Row> figure4_pipeline(const EnsembleModel& model, const PairParams& params,
                                         const Figure4Options& options, std::span<const double> stops) {
  model.validate();
  params.validate();
  if (!(options.delta_dot > 0.0)) throw std::invalid_argument("figure 4 needs a positive speed");
  if (options.t_hold > 0.0 && options.hold_samples < 4) {
    throw std::invalid_argument("hold curves need at least 4 samples");
  }
  if (stops.empty()) throw std::invalid_argument("figure 4 needs at least one final detuning");
  const int alpha = index(Bare::gg);
  const TransportTable table(params, options.delta_i, options.omega, options.shape, stops, options.transport);

  std::vector<Figure4Row> rows(stops.size());
  parallel_for(stops.size(), options.jobs, [&](std::size_t i) {
    const RampProtocol ramp = RampProtocol::with_default_timing(
        options.delta_i, stops[i], options.delta_dot, options.omega, options.t_hold, options.shape);
    const double t_r = ramp.ramp_time();
    std::vector<double> times{t_r};
    if (options.t_hold > 0.0) {
      for (int j = 1; j < options.hold_samples; ++j) {
        times.push_back(t_r + options.t_hold * j / (options.hold_samples - 1));
      }
    }
    const EvolutionResult pairs = evolve_nonhermitian(params, ramp, bare_state(Bare::gg), times, options.ode);
    const TwoLevelResult singles = two_level_evolve(options.omega, ramp, times, options.ode);

    auto observed = [&](std::size_t j) {
      const auto& pop = pairs.populations[j];
      return observables(model, {pop[0], pop[1], pop[2]}, {singles.p_g[j], singles.p_e[j]});
    };

    Figure4Row& r = rows[i];
    r.delta_f = stops[i];
    r.obs = observed(0);
    r.n1 = model.n1 * (singles.p_g[0] + singles.p_e[0]);
    r.survival_exact = pairs.norm2[0];
    r.n2 = 2.0 * model.n2 * r.survival_exact;
    r.survival_adiabatic = table.evaluate(i, ramp, alpha).survival;
    r.n2_adiabatic = 2.0 * model.n2 * r.survival_adiabatic;

    const auto& pop = pairs.populations[0];
    r.hold_f1_expected = model.n1 * (singles.p_g[0] + model.eta_rp * singles.p_e[0]);
    r.hold_f2_expected =
        model.n2 * (2.0 * pop[0] + pop[1] + model.eta_rp * (pop[1] + 2.0 * pop[2]));
    if (options.t_hold > 0.0) {
      std::vector<double> hold_t, counts;
      for (std::size_t j = 0; j < times.size(); ++j) {
        hold_t.push_back(times[j] - t_r);
        counts.push_back(observed(j).n_total_detected);
      }
      r.hold_fit = fit_decay(hold_t, counts);
    }
  });
  return rows;
}

}  // namespace zeno
