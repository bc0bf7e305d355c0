#include "zeno/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "zeno/cubic.hpp"

namespace zeno {
namespace {

using Perm = std::array<int, 3>;

constexpr std::array<Perm, 6> kPermutations{{
    {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

// Best and runner-up assignment of rows to columns for a 3x3 score matrix.
struct Assignment {
  Perm perm{0, 1, 2};
  double best = 0.0;
  double runner_up = -std::numeric_limits<double>::infinity();
};

Assignment best_assignment(const Eigen::Matrix3d& score) {
  Assignment a;
  a.best = -std::numeric_limits<double>::infinity();
  for (const Perm& p : kPermutations) {
    const double s = score(0, p[0]) + score(1, p[1]) + score(2, p[2]);
    if (s > a.best) {
      a.runner_up = a.best;
      a.best = s;
      a.perm = p;
    } else if (s > a.runner_up) {
      a.runner_up = s;
    }
  }
  return a;
}

// Triplet reordered so that out[perm[n]] = in[n], with ids set accordingly.
Triplet relabel(const Triplet& in, const Perm& perm, const std::array<int, 3>& ids) {
  Triplet out;
  for (int n = 0; n < 3; ++n) {
    out[ids[perm[n]]] = in[n];
    out[ids[perm[n]]].branch_id = ids[perm[n]];
  }
  return out;
}

// Bilinear cross product (no conjugation): a . (a x b) = b . (a x b) = 0.
PairVector bilinear_cross(const Eigen::RowVector3cd& a, const Eigen::RowVector3cd& b) {
  return PairVector(a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2),
                    a(0) * b(1) - a(1) * b(0));
}

// Roots closer than this (relative to ||H||) are treated as one degenerate
// cluster; Cardano's double roots are only accurate to ~sqrt(eps).
constexpr double kDegenerateRootTolerance = 1e-7;

// Eigenvectors of a 2x2 matrix, or the unit vectors if it is a multiple of
// the identity.
std::array<Eigen::Vector2cd, 2> eigenvectors_2x2(const Eigen::Matrix2cd& m, double scale) {
  using C = std::complex<double>;
  const C mean = 0.5 * (m(0, 0) + m(1, 1));
  const C half_diff = 0.5 * (m(0, 0) - m(1, 1));
  const C root = std::sqrt(half_diff * half_diff + m(0, 1) * m(1, 0));
  if (std::abs(half_diff) + std::abs(m(0, 1)) + std::abs(m(1, 0)) <= 1e-14 * scale) {
    return {Eigen::Vector2cd::Unit(0), Eigen::Vector2cd::Unit(1)};
  }
  std::array<Eigen::Vector2cd, 2> out;
  const std::array<C, 2> mu{mean + root, mean - root};
  for (int k = 0; k < 2; ++k) {
    const Eigen::Vector2cd a(m(0, 1), mu[k] - m(0, 0));
    const Eigen::Vector2cd b(mu[k] - m(1, 1), m(1, 0));
    out[k] = (a.norm() >= b.norm() ? a : b).normalized();
  }
  return out;
}

}  // namespace

int largest_component(const PairVector& v) {
  int k = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(v(i)) > std::abs(v(k))) k = i;
  }
  return k;
}

void fix_phase(PairVector& v, int k) {
  const double mag = std::abs(v(k));
  if (mag > 0.0) v *= std::conj(v(k)) / mag;
  v(k) = std::abs(v(k));
}

Diagonalization diagonalize(const PairOperator& h) {
  using C = std::complex<double>;
  const C c2 = -h.trace();
  const C c1 = (h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0)) + (h(0, 0) * h(2, 2) - h(0, 2) * h(2, 0)) +
               (h(1, 1) * h(2, 2) - h(1, 2) * h(2, 1));
  const C c0 = -h.determinant();
  const std::array<C, 3> roots = solve_cubic<double>(c2, c1, c0);

  const double scale = std::max(h.norm(), std::numeric_limits<double>::min());
  std::array<PairVector, 3> vecs;
  std::array<bool, 3> done{false, false, false};

  for (int i = 0; i < 3; ++i) {
    if (done[i]) continue;
    std::vector<int> cluster{i};
    for (int j = i + 1; j < 3; ++j) {
      if (std::abs(roots[j] - roots[i]) <= kDegenerateRootTolerance * scale) cluster.push_back(j);
    }

    if (cluster.size() == 1) {
      // The null vector of H - lambda is the largest cross product of two rows.
      const PairOperator a = h - roots[i] * PairOperator::Identity();
      PairVector best = PairVector::Zero();
      for (const auto& [r, s] : {std::pair{0, 1}, std::pair{0, 2}, std::pair{1, 2}}) {
        const PairVector c = bilinear_cross(a.row(r), a.row(s));
        if (c.norm() > best.norm()) best = c;
      }
      vecs[i] = best.norm() > 0.0 ? PairVector(best.normalized()) : PairVector::Unit(i);
      done[i] = true;
      continue;
    }

    // Degenerate cluster: near-null right singular space of H - mean, then the
    // compressed operator on it.
    C mean = 0.0;
    for (int j : cluster) mean += roots[j];
    mean /= static_cast<double>(cluster.size());
    const PairOperator a = h - mean * PairOperator::Identity();
    const Eigen::JacobiSVD<PairOperator> svd(a, Eigen::ComputeFullV);
    if (cluster.size() == 3) {
      for (int k = 0; k < 3; ++k) {
        vecs[cluster[k]] = (a.norm() <= 1e-14 * scale) ? PairVector(PairVector::Unit(k))
                                                       : PairVector(svd.matrixV().col(k));
        done[cluster[k]] = true;
      }
      continue;
    }
    Eigen::Matrix<C, 3, 2> q;
    q.col(0) = svd.matrixV().col(1);
    q.col(1) = svd.matrixV().col(2);
    const Eigen::Matrix2cd m = q.adjoint() * h * q;
    const auto sub = eigenvectors_2x2(m, scale);
    for (int k = 0; k < 2; ++k) {
      vecs[cluster[k]] = (q * sub[k]).normalized();
      done[cluster[k]] = true;
    }
  }

  PairOperator right;
  for (int n = 0; n < 3; ++n) {
    fix_phase(vecs[n], largest_component(vecs[n]));
    right.col(n) = vecs[n];
  }

  Diagonalization d;
  const Eigen::JacobiSVD<PairOperator> svd(right);
  const auto& sv = svd.singularValues();
  d.condition = sv(2) > 0.0 ? sv(0) / sv(2) : std::numeric_limits<double>::infinity();
  d.near_exceptional = !(d.condition < kExceptionalConditionThreshold);

  const PairOperator left =
      std::isfinite(d.condition) ? PairOperator(right.inverse())
                                 : PairOperator(right.completeOrthogonalDecomposition().pseudoInverse());

  const PairOperator herm = (h + h.adjoint()) / 2.0;
  const PairOperator anti = (h - h.adjoint()) / C(0.0, 2.0);
  for (int n = 0; n < 3; ++n) {
    DressedState& s = d.states[n];
    s.right = vecs[n];
    s.left = left.row(n);
    s.epsilon = (s.right.adjoint() * herm * s.right)(0).real();
    s.gamma = -2.0 * (s.right.adjoint() * anti * s.right)(0).real();
  }
  return d;
}

void label_by_bare_character(Triplet& states) {
  Eigen::Matrix3d score;
  for (int n = 0; n < 3; ++n) {
    for (int b = 0; b < 3; ++b) score(n, b) = std::norm(states[n].right(b));
  }
  const Assignment a = best_assignment(score);
  states = relabel(states, a.perm, {0, 1, 2});
}

double match_branches(const Triplet& previous, Triplet& next) {
  Eigen::Matrix3d score;
  for (int n = 0; n < 3; ++n) {
    for (int m = 0; m < 3; ++m) score(n, m) = std::abs((previous[n].left * next[m].right)(0));
  }
  const Assignment a = best_assignment(score);
  // previous row n maps to next column perm[n]; invert to relabel next.
  Perm inverse{};
  for (int n = 0; n < 3; ++n) inverse[a.perm[n]] = n;
  std::array<int, 3> ids{};
  for (int n = 0; n < 3; ++n) ids[n] = previous[n].branch_id;
  Triplet out;
  for (int m = 0; m < 3; ++m) {
    const int id = ids[inverse[m]];
    out[id] = next[m];
    out[id].branch_id = id;
  }
  next = out;
  return a.best - a.runner_up;
}

namespace {

struct Tracker {
  const OperatorPath& path;
  const TrackOptions& options;
  bool near_exceptional = false;

  Triplet fresh(double s) {
    Diagonalization d = diagonalize(path(s));
    near_exceptional = near_exceptional || d.near_exceptional;
    return d.states;
  }

  // Labels `next` (at sb) from `prev` (at sa), bisecting while ambiguous.
  Triplet advance(const Triplet& prev, double sa, Triplet next, double sb, int depth) {
    Triplet attempt = next;
    if (match_branches(prev, attempt) >= options.ambiguity) return attempt;
    if (depth >= options.max_depth) {
      throw BranchTrackingError("ambiguous branch assignment between s=" + std::to_string(sa) +
                                " and s=" + std::to_string(sb));
    }
    const double sm = 0.5 * (sa + sb);
    const Triplet mid = advance(prev, sa, fresh(sm), sm, depth + 1);
    return advance(mid, sm, std::move(next), sb, depth + 1);
  }
};

}  // namespace

TrackedPath track_branches(const OperatorPath& path, std::span<const double> grid,
                           const TrackOptions& options) {
  TrackedPath out;
  if (grid.empty()) return out;
  Tracker tracker{path, options};
  out.grid.assign(grid.begin(), grid.end());
  out.states.reserve(grid.size());
  out.condition.reserve(grid.size());

  Diagonalization first = diagonalize(path(grid[0]));
  label_by_bare_character(first.states);
  out.states.push_back(first.states);
  out.condition.push_back(first.condition);
  tracker.near_exceptional = first.near_exceptional;

  for (std::size_t k = 1; k < grid.size(); ++k) {
    Diagonalization d = diagonalize(path(grid[k]));
    tracker.near_exceptional = tracker.near_exceptional || d.near_exceptional;
    out.states.push_back(tracker.advance(out.states.back(), grid[k - 1], d.states, grid[k], 0));
    out.condition.push_back(d.condition);
  }
  out.any_near_exceptional = tracker.near_exceptional;
  return out;
}

namespace {

void require_strictly_monotone(std::span<const double> grid, const char* what) {
  if (grid.empty()) throw std::invalid_argument(std::string(what) + ": empty grid");
  if (grid.size() < 2) return;
  const bool up = grid[1] > grid[0];
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const bool ok = up ? grid[k] > grid[k - 1] : grid[k] < grid[k - 1];
    if (!ok) throw std::invalid_argument(std::string(what) + ": grid must be strictly monotone");
  }
}

}  // namespace

SpectralSweep sweep_spectrum(const PairParams& params, std::span<const double> deltas,
                             const TrackOptions& options) {
  params.validate();
  require_strictly_monotone(deltas, "sweep_spectrum");
  const OperatorPath path = [&params](double delta) { return build_heff(params, delta); };
  TrackedPath tracked = track_branches(path, deltas, options);
  return {std::move(tracked.grid), std::move(tracked.states), tracked.any_near_exceptional};
}

std::vector<std::array<double, 3>> perturbative_decay_rates(const PairParams& params,
                                                            std::span<const double> deltas) {
  PairParams coherent = params;
  coherent.gamma_ee = 0.0;
  const SpectralSweep sweep = sweep_spectrum(coherent, deltas);
  std::vector<std::array<double, 3>> rates(sweep.states.size());
  for (std::size_t k = 0; k < rates.size(); ++k) {
    for (int b = 0; b < 3; ++b) rates[k][b] = params.gamma_ee * sweep.states[k][b].weight(Bare::ee);
  }
  return rates;
}

double perturbative_rate_matching(const PairParams& params, double delta,
                                  const PairVector& dressed_right) {
  PairParams coherent = params;
  coherent.gamma_ee = 0.0;
  const Eigen::SelfAdjointEigenSolver<PairOperator> es(build_heff(coherent, delta));
  Eigen::Index best = 0;
  (es.eigenvectors().adjoint() * dressed_right).cwiseAbs().maxCoeff(&best);
  return params.gamma_ee * std::norm(es.eigenvectors()(index(Bare::ee), best));
}

CrossoverReport zeno_crossover_report(const PairParams& params, double delta,
                                      std::span<const double> omegas) {
  params.validate();
  require_strictly_monotone(omegas, "zeno_crossover_report");
  const OperatorPath path = [&](double omega) { return build_heff(params, delta, omega); };
  const TrackedPath tracked = track_branches(path, omegas);

  CrossoverReport report;
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    CrossoverRow row;
    row.omega = omegas[k];
    for (int b = 0; b < 3; ++b) row.gamma[b] = tracked.states[k][b].gamma;
    row.gamma_min = *std::min_element(row.gamma.begin(), row.gamma.end());
    report.rows.push_back(row);
  }
  std::vector<const CrossoverRow*> by_omega;
  for (const auto& r : report.rows) by_omega.push_back(&r);
  std::sort(by_omega.begin(), by_omega.end(),
            [](const CrossoverRow* a, const CrossoverRow* b) { return a->omega < b->omega; });
  for (std::size_t k = 1; k < by_omega.size(); ++k) {
    if (by_omega[k]->gamma_min < by_omega[k - 1]->gamma_min) report.gamma_min_monotone = false;
  }
  return report;
}

std::vector<double> linear_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw std::invalid_argument("linear_grid: need step > 0 and hi >= lo");
  }
  std::vector<double> g;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  g.reserve(static_cast<std::size_t>(n) + 2);
  for (long k = 0; k <= n; ++k) g.push_back(lo + static_cast<double>(k) * step);
  if (hi - g.back() > 1e-9 * step) g.push_back(hi);
  return g;
}

}  // namespace zeno
