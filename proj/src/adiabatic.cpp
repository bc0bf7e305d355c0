#include "zeno/adiabatic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "zeno/parallel.hpp"

namespace zeno {

namespace {

using C = std::complex<double>;

enum class Leg { intensity, detuning };

PairOperator hamiltonian_on(const PairParams& params, Leg leg, double s, double delta_i,
                            double omega_nominal) {
  return leg == Leg::intensity ? build_heff(params, delta_i, s) : build_heff(params, s, omega_nominal);
}

PairOperator dh_ds(Leg leg) {
  return leg == Leg::intensity ? spin_x() : PairOperator(-spin_z());
}

Eigen::RowVector3cd phase_reference(const PairVector& v, PhaseConvention convention) {
  if (convention == PhaseConvention::component_sum) return Eigen::RowVector3cd::Ones();
  Eigen::RowVector3cd e = Eigen::RowVector3cd::Zero();
  e(largest_component(v)) = 1.0;
  return e;
}

// Rotates the pair so that ell . right is real positive; keeps left . right = 1.
void apply_phase(DressedState& s, const Eigen::RowVector3cd& ell) {
  const C z = (ell * s.right)(0);
  const double mag = std::abs(z);
  if (mag == 0.0) return;
  const C u = std::conj(z) / mag;
  s.right *= u;
  s.left *= std::conj(u);
}

using Refs = std::array<Eigen::RowVector3cd, 3>;

Triplet labelled_like(const Triplet& reference, const PairOperator& h) {
  Triplet t = diagonalize(h).states;
  match_branches(reference, t);
  return t;
}

// c(beta, alpha) = <lbar_beta| d lambda_alpha / ds> in the gauge where
// refs[b] . right_b stays real positive; `t` must already carry that gauge.
// Off-diagonals follow from differentiating H r = lambda r; the diagonal from
// the unit norm (real part) and the gauge condition (imaginary part).
Eigen::Matrix3cd partial_connection(Leg leg, const Triplet& t, const Refs& refs) {
  const PairOperator dh = dh_ds(leg);
  Eigen::Matrix3cd c = Eigen::Matrix3cd::Zero();
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (b == a) continue;
      const C num = (t[b].left * dh * t[a].right)(0);
      // Exactly uncoupled crossings (Omega = 0) carry no transport.
      if (num == C(0)) continue;
      c(b, a) = num / (t[a].lambda() - t[b].lambda());
    }
    C norm_sum = 0, gauge_sum = 0;
    for (int b = 0; b < 3; ++b) {
      if (b == a) continue;
      norm_sum += c(b, a) * t[a].right.dot(t[b].right);
      gauge_sum += c(b, a) * (refs[a] * t[b].right)(0);
    }
    const C anchor = (refs[a] * t[a].right)(0);
    c(a, a) = C(-norm_sum.real(), -(gauge_sum / anchor).imag());
  }
  return c;
}

Refs refs_of(const Triplet& t, PhaseConvention convention) {
  Refs r;
  for (int b = 0; b < 3; ++b) r[b] = phase_reference(t[b].right, convention);
  return r;
}

Triplet with_refs(Triplet t, const Refs& refs) {
  for (int b = 0; b < 3; ++b) apply_phase(t[b], refs[b]);
  return t;
}

}  // namespace

Eigen::Matrix3cd connection_matrix(DriveRates rates, const Triplet& states,
                                   const ConnectionOptions& options) {
  const Refs refs = refs_of(states, options.phase);
  const Triplet center = with_refs(states, refs);
  Eigen::Matrix3cd c = Eigen::Matrix3cd::Zero();
  if (rates.delta_dot != 0.0) c += rates.delta_dot * partial_connection(Leg::detuning, center, refs);
  if (rates.omega_dot != 0.0) c += rates.omega_dot * partial_connection(Leg::intensity, center, refs);
  return c;
}

C berry_connection(DriveRates rates, const Triplet& states, int alpha, int beta, double ramp_time,
                   const ConnectionOptions& options) {
  const Eigen::Matrix3cd c = connection_matrix(rates, states, options);
  return C(0, 1) * ramp_time * c(beta, alpha);
}

Triplet initial_triplet(const PairParams& params, double delta_i) {
  Triplet t = diagonalize(build_heff(params, delta_i, 0.0)).states;
  label_by_bare_character(t);
  return t;
}

namespace {

struct CellIntegrand {
  const PairParams& params;
  Leg leg;
  double delta_i;
  double omega_nominal;
  OmegaRampShape shape;
  const Triplet& start;  // labelled, in the gauge of refs
  const Refs& refs;

  // dt/ds divided by t_omega on the intensity leg; 1 on the detuning leg.
  double weight(double s) const {
    if (leg == Leg::detuning) return 1.0;
    if (omega_nominal == 0.0) return 0.0;
    return shape == OmegaRampShape::linear_field ? 1.0 / omega_nominal
                                                 : 2.0 * s / (omega_nominal * omega_nominal);
  }

  Eigen::Array<double, 12, 1> operator()(double s) const {
    const Triplet t = with_refs(
        labelled_like(start, hamiltonian_on(params, leg, s, delta_i, omega_nominal)), refs);
    const Eigen::Matrix3cd c = partial_connection(leg, t, refs);
    const double w = weight(s);
    Eigen::Array<double, 12, 1> f;
    for (int b = 0; b < 3; ++b) {
      f(4 * b + 0) = t[b].gamma * w;
      f(4 * b + 1) = 2.0 * c(b, b).real();
      f(4 * b + 2) = -t[b].epsilon * w;
      f(4 * b + 3) = -c(b, b).imag();
    }
    return f;
  }
};

using Vec12 = Eigen::Array<double, 12, 1>;

Vec12 adaptive_gk15(const CellIntegrand& f, double a, double b, double rel_tol, int depth) {
  const auto& xk = boost::math::quadrature::gauss_kronrod<double, 15>::abscissa();
  const auto& wk = boost::math::quadrature::gauss_kronrod<double, 15>::weights();
  const auto& wg = boost::math::quadrature::gauss<double, 7>::weights();
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);

  Vec12 kronrod = Vec12::Zero(), gauss = Vec12::Zero(), peak = Vec12::Zero();
  for (std::size_t i = 0; i < xk.size(); ++i) {
    const int signs = xk[i] == 0.0 ? 1 : 2;
    for (int sgn = 0; sgn < signs; ++sgn) {
      const double x = mid + (sgn == 0 ? 1.0 : -1.0) * half * xk[i];
      const Vec12 v = f(x);
      kronrod += wk[i] * v;
      if (i % 2 == 0) gauss += wg[i / 2] * v;
      peak = peak.max(v.abs());
    }
  }
  kronrod *= half;
  gauss *= half;
  // Rates and energies share a round-off floor. Connection integrals are
  // dimensionless and may vanish identically (real eigenvectors), so they get
  // an absolute one.
  double energy_scale = 0.0;
  for (int i = 0; i < 12; i += 2) energy_scale = std::max(energy_scale, peak(i));
  Vec12 floor;
  for (int i = 0; i < 12; ++i) {
    floor(i) = i % 2 == 0 ? 1e-3 * rel_tol * std::abs(b - a) * energy_scale : 1e-15;
  }
  const Vec12 err = (kronrod - gauss).abs();
  const Vec12 allowed = (rel_tol * kronrod.abs().max(std::abs(b - a) * peak)).max(floor);
  if ((err <= allowed).all() || depth <= 0) return kronrod;
  return adaptive_gk15(f, a, mid, rel_tol, depth - 1) + adaptive_gk15(f, mid, b, rel_tol, depth - 1);
}

}  // namespace

TransportTable::TransportTable(const PairParams& params, double delta_i, double omega_nominal,
                               OmegaRampShape shape, std::span<const double> stops,
                               const TransportOptions& options)
    : params_(params), delta_i_(delta_i), omega_nominal_(omega_nominal), shape_(shape) {
  params.validate();
  if (stops.empty()) throw std::invalid_argument("transport table needs at least one stop");
  if (!(options.cell_hz > 0.0)) throw std::invalid_argument("cell_hz must be > 0");
  int dir = 0;
  for (double d : stops) {
    if (!std::isfinite(d)) throw std::invalid_argument("non-finite stop");
    const int s = d > delta_i ? 1 : (d < delta_i ? -1 : 0);
    if (s != 0 && dir != 0 && s != dir) {
      throw std::invalid_argument("all stops must lie on one side of delta_i");
    }
    if (s != 0) dir = s;
  }
  stops_.assign(stops.begin(), stops.end());

  // Nodes: intensity leg at fixed delta_i, then the detuning leg through every stop.
  const double cell = hz(options.cell_hz);
  std::vector<double> omega_nodes{0.0};
  if (omega_nominal > 0.0) omega_nodes = linear_grid(0.0, omega_nominal, cell);
  for (double w : omega_nodes) {
    Node n;
    n.s = w;
    n.intensity_leg = true;
    nodes_.push_back(std::move(n));
  }
  intensity_end_ = nodes_.size() - 1;

  std::vector<double> ordered = stops_;
  std::sort(ordered.begin(), ordered.end(),
            [&](double a, double b) { return dir * a < dir * b; });
  ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());
  double last = delta_i;
  for (double stop : ordered) {
    if (stop == delta_i) continue;
    const double span = std::abs(stop - last);
    const auto pieces = static_cast<long>(std::ceil(span / cell - 1e-9));
    for (long k = 1; k <= pieces; ++k) {
      Node n;
      n.s = k == pieces ? stop : last + dir * span * static_cast<double>(k) / static_cast<double>(pieces);
      n.intensity_leg = false;
      nodes_.push_back(std::move(n));
    }
    last = stop;
  }

  // Branch tracking along the joined path u = Omega, then Omega_N + |delta - delta_i|.
  std::vector<double> u(nodes_.size());
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    u[k] = nodes_[k].intensity_leg ? nodes_[k].s : omega_nominal + std::abs(nodes_[k].s - delta_i);
  }
  const OperatorPath path = [&](double v) {
    return v <= omega_nominal ? build_heff(params, delta_i, v)
                              : build_heff(params, delta_i + dir * (v - omega_nominal), omega_nominal);
  };
  const TrackedPath tracked = track_branches(path, u);
  near_exceptional_ = tracked.any_near_exceptional;
  for (std::size_t k = 0; k < nodes_.size(); ++k) nodes_[k].states = tracked.states[k];

  const PhaseConvention convention = options.connection.phase;
  auto leg_of_node = [&](std::size_t k) {
    // The junction belongs to the detuning leg when there is one.
    if (k == intensity_end_ && k + 1 < nodes_.size()) return Leg::detuning;
    return nodes_[k].intensity_leg ? Leg::intensity : Leg::detuning;
  };

  const std::size_t n_cells = nodes_.size() - 1;
  std::vector<Vec12> cell_integral(n_cells, Vec12::Zero());
  std::vector<Refs> refs(nodes_.size());
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    refs[k] = refs_of(nodes_[k].states, convention);
    nodes_[k].states = with_refs(nodes_[k].states, refs[k]);
  }

  parallel_for(nodes_.size(), options.jobs, [&](std::size_t k) {
    Node& node = nodes_[k];
    const Leg leg = leg_of_node(k);
    node.connection = partial_connection(leg, node.states, refs[k]);
    const PairOperator dh = dh_ds(leg);
    for (int b = 0; b < 3; ++b) {
      for (int a = 0; a < 3; ++a) {
        node.coupling[b][a] = std::abs((node.states[b].left * dh * node.states[a].right)(0));
      }
    }
    if (k == n_cells) return;
    const Leg cell_leg = nodes_[k + 1].intensity_leg ? Leg::intensity : Leg::detuning;
    const double a = cell_leg == Leg::intensity ? node.s : (k == intensity_end_ ? delta_i : node.s);
    const double b = nodes_[k + 1].s;
    const CellIntegrand f{params, cell_leg, delta_i, omega_nominal, shape, node.states, refs[k]};
    cell_integral[k] = adaptive_gk15(f, a, b, options.rel_tol, options.max_depth);
  });

  // Running sums, split by leg so the dissipative parts can be rescaled later.
  // Without drive the intensity leg is a hold of length t_omega at Omega = 0.
  Vec12 intensity = Vec12::Zero(), detuning = Vec12::Zero();
  if (omega_nominal == 0.0) {
    for (int b = 0; b < 3; ++b) {
      intensity(4 * b) = nodes_[0].states[b].gamma;
      intensity(4 * b + 2) = -nodes_[0].states[b].epsilon;
    }
  }
  intensity_sums_.assign(nodes_.size(), Vec12::Zero());
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (k > 0) {
      const bool on_intensity = nodes_[k].intensity_leg;
      (on_intensity ? intensity : detuning) += cell_integral[k - 1];
      // Switching the phase reference at node k shifts phi by arg(ell_k . v).
      for (int b = 0; b < 3; ++b) {
        DressedState prev_gauge = nodes_[k].states[b];
        apply_phase(prev_gauge, refs[k - 1][b]);
        const double jump = std::arg((refs[k][b] * prev_gauge.right)(0));
        (on_intensity ? intensity : detuning)(4 * b + 3) += jump;
      }
    }
    intensity_sums_[k] = intensity;
    nodes_[k].cumulative = detuning;
  }

  stop_node_.resize(stops_.size());
  for (std::size_t i = 0; i < stops_.size(); ++i) {
    if (stops_[i] == delta_i) {
      stop_node_[i] = intensity_end_;
      continue;
    }
    for (std::size_t k = intensity_end_ + 1; k < nodes_.size(); ++k) {
      if (nodes_[k].s == stops_[i]) {
        stop_node_[i] = k;
        break;
      }
    }
  }
}

std::size_t TransportTable::stop_index(double delta_f) const {
  for (std::size_t i = 0; i < stops_.size(); ++i) {
    if (std::abs(stops_[i] - delta_f) <= 1e-9 * std::max(1.0, std::abs(delta_f))) return i;
  }
  throw std::out_of_range("detuning is not a stop of this transport table");
}

TransportReport TransportTable::evaluate(std::size_t stop, const RampProtocol& ramp, int alpha,
                                         bool with_profile) const {
  if (stop >= stops_.size()) throw std::out_of_range("transport stop index out of range");
  if (alpha < 0 || alpha > 2) throw std::invalid_argument("branch id must be 0, 1 or 2");
  const double tol = 1e-9 * std::max({1.0, std::abs(delta_i_), std::abs(stops_[stop])});
  if (std::abs(ramp.delta_i - delta_i_) > tol || std::abs(ramp.delta_f - stops_[stop]) > tol ||
      std::abs(ramp.omega_nominal - omega_nominal_) > 1e-9 * std::max(1.0, omega_nominal_) ||
      ramp.shape != shape_) {
    throw std::invalid_argument("ramp does not match the transport table");
  }
  const double t_omega = ramp.t_omega;
  const double delta_dot = ramp.delta_dot;
  const double t_r = ramp.ramp_time();

  auto kappa_parts = [&](std::size_t k, int b) {
    const Vec12& in = intensity_sums_[k];
    const Vec12& de = nodes_[k].cumulative;
    const double de_dis = de(4 * b) == 0.0 ? 0.0 : de(4 * b) / delta_dot;
    return std::pair{t_omega * in(4 * b) + de_dis, in(4 * b + 1) + de(4 * b + 1)};
  };
  auto phi_of = [&](std::size_t k, int b) {
    const Vec12& in = intensity_sums_[k];
    const Vec12& de = nodes_[k].cumulative;
    const double de_dyn = de(4 * b + 2) == 0.0 ? 0.0 : de(4 * b + 2) / delta_dot;
    return t_omega * in(4 * b + 2) + de_dyn + in(4 * b + 3) + de(4 * b + 3);
  };

  const std::size_t end = stop_node_[stop];
  TransportReport rep;
  rep.alpha = alpha;
  const auto [dis, geo] = kappa_parts(end, alpha);
  rep.kappa_dissipative = dis;
  rep.kappa_geometric = geo;
  rep.kappa = dis + geo;
  rep.survival = std::exp(-rep.kappa);
  rep.phi = phi_of(end, alpha);
  rep.near_exceptional = near_exceptional_;

  for (std::size_t k = 0; k <= end; ++k) {
    const Node& node = nodes_[k];
    const bool detuning_leg = !(node.intensity_leg && (k < intensity_end_ || end == intensity_end_));
    double t = 0.0;
    if (!node.intensity_leg) {
      t = t_omega + (node.s - delta_i_) / delta_dot;
    } else if (omega_nominal_ > 0.0) {
      const double f = node.s / omega_nominal_;
      t = t_omega * (shape_ == OmegaRampShape::linear_field ? f : f * f);
    }
    if (k == intensity_end_) t = t_omega;
    double s_dot = ramp.delta_dot;
    if (!detuning_leg) {
      // A sudden switch-on has no adiabatic rate; the Omega = 0 node of a
      // linear-intensity ramp is sampled just after the start.
      s_dot = t_omega > 0.0
                  ? ramp.rates_at(std::clamp(t, 1e-9 * t_omega, t_omega * (1 - 1e-12))).omega_dot
                  : 0.0;
    }
    std::array<double, 3> kappa{};
    for (int b = 0; b < 3; ++b) {
      const auto [d, g] = kappa_parts(k, b);
      kappa[b] = d + g;
    }
    std::array<double, 3> margin{};
    for (int b = 0; b < 3; ++b) {
      if (b == alpha) continue;
      const double lhs = 0.5 * std::abs(s_dot) * node.coupling[b][alpha];
      const double gap2 = std::norm(node.states[alpha].lambda() - node.states[b].lambda());
      const double rhs = gap2 * std::exp(-(kappa[alpha] - kappa[b]));
      margin[b] = lhs == 0.0 ? 0.0 : lhs / rhs;
    }
    rep.max_margin = std::max({rep.max_margin, margin[0], margin[1], margin[2]});
    if (!with_profile) continue;

    TransportPoint p;
    p.t = t;
    p.x = t_r > 0.0 ? t / t_r : 1.0;
    p.delta = node.intensity_leg ? delta_i_ : node.s;
    p.omega = node.intensity_leg ? node.s : omega_nominal_;
    if (k == intensity_end_) {
      p.delta = delta_i_;
      p.omega = omega_nominal_;
    }
    for (int b = 0; b < 3; ++b) {
      p.epsilon[b] = node.states[b].epsilon;
      p.gamma[b] = node.states[b].gamma;
    }
    p.berry = C(0, 1) * t_r * s_dot * node.connection(alpha, alpha);
    p.running_kappa = kappa;
    p.margin = margin;
    rep.profile.push_back(p);
  }
  return rep;
}

TransportReport transport_integrals(const PairParams& params, const RampProtocol& ramp, int alpha,
                                    const TransportOptions& options) {
  ramp.validate();
  const std::vector<double> stops{ramp.delta_f};
  const TransportTable table(params, ramp.delta_i, ramp.omega_nominal, ramp.shape, stops, options);
  return table.evaluate(0, ramp, alpha, true);
}

std::vector<MarginRow> adiabaticity_criterion(const PairParams& params, const RampProtocol& ramp,
                                              int alpha, const TransportOptions& options) {
  const TransportReport rep = transport_integrals(params, ramp, alpha, options);
  std::vector<MarginRow> rows;
  rows.reserve(rep.profile.size());
  for (const TransportPoint& p : rep.profile) {
    MarginRow r;
    r.x = p.x;
    r.delta = p.delta;
    r.margin = p.margin;
    for (int b = 0; b < 3; ++b) {
      r.survival_ratio[b] = std::exp(-(p.running_kappa[alpha] - p.running_kappa[b]));
    }
    rows.push_back(r);
  }
  return rows;
}

AdiabaticComparison adiabatic_vs_exact(const TransportTable& table, const PairParams& params,
                                       std::size_t stop, const RampProtocol& ramp, int alpha,
                                       const OdeOptions& ode) {
  AdiabaticComparison out;
  out.transport = table.evaluate(stop, ramp, alpha, false);
  out.survival_adiabatic = out.transport.survival;

  const PairState psi0 = initial_triplet(params, ramp.delta_i)[alpha].right;
  const std::vector<double> times{ramp.ramp_time()};
  const EvolutionResult ev = evolve_nonhermitian(params, ramp, psi0, times, ode);
  const PairState& psi = ev.states.back();
  out.survival_exact = ev.norm2.back();

  Triplet end = diagonalize(build_heff(params, ramp.delta_f, ramp.omega_nominal)).states;
  match_branches(table.stop_states(stop), end);
  out.fidelity = out.survival_exact > 0.0
                     ? std::norm(end[alpha].right.dot(psi)) / out.survival_exact
                     : 0.0;
  return out;
}

AdiabaticComparison adiabatic_vs_exact(const PairParams& params, const RampProtocol& ramp, int alpha,
                                       const TransportOptions& options, const OdeOptions& ode) {
  ramp.validate();
  const std::vector<double> stops{ramp.delta_f};
  const TransportTable table(params, ramp.delta_i, ramp.omega_nominal, ramp.shape, stops, options);
  return adiabatic_vs_exact(table, params, 0, ramp, alpha, ode);
}

}  // namespace zeno
