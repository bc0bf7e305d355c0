#pragma once

#include <array>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "zeno/hamiltonian.hpp"

namespace zeno {

/// Eigen-triplet of a 3x3 pair operator: lambda = epsilon - i gamma / 2.
///
/// `right` has unit Euclidean norm with its largest-magnitude component real
/// and positive. `left` is the matching row of the inverse right-eigenvector
/// matrix, so `left * right` is the biorthogonal pairing (no conjugation).
struct DressedState {
  double epsilon = 0.0;
  double gamma = 0.0;
  PairVector right = PairVector::Zero();
  Eigen::RowVector3cd left = Eigen::RowVector3cd::Zero();
  int branch_id = -1;

  std::complex<double> lambda() const { return {epsilon, -gamma / 2.0}; }
  /// |<b|lambda>|^2 in the bare basis.
  double weight(Bare b) const { return std::norm(right(index(b))); }
};

using Triplet = std::array<DressedState, 3>;

inline constexpr double kExceptionalConditionThreshold = 1e6;

struct Diagonalization {
  Triplet states;
  double condition = 1.0;  // 2-norm condition number of the right-eigenvector matrix
  bool near_exceptional = false;
};

/// Eigenvalues from the characteristic cubic, eigenvectors as null vectors of
/// H - lambda. Each eigenvalue is then re-evaluated as the split Rayleigh
/// quotient <r|A|r> + i <r|K|r> with A, K the Hermitian and anti-Hermitian
/// parts of H; this keeps tiny decay rates accurate to full relative precision.
/// States are returned in no particular order with branch_id = -1.
Diagonalization diagonalize(const PairOperator& h);

/// Rotates `v` so that component `k` is real and positive.
void fix_phase(PairVector& v, int k);
int largest_component(const PairVector& v);

class BranchTrackingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrackOptions {
  double ambiguity = 1e-3;  // minimum score gap between the two best assignments
  int max_depth = 16;       // grid bisection depth before giving up
};

/// Branch-tracked eigensystems along a monotone parameter grid.
///
/// Branch ids are assigned at the first grid point by bare-state character
/// (id == index(Bare)). Adjacent points are matched by maximizing
/// |<lambda-bar_n(s_k)|lambda_m(s_k+1)>| over all assignments; an ambiguous
/// step is bisected. The result is ordered by branch id at every point.
using OperatorPath = std::function<PairOperator(double)>;

struct TrackedPath {
  std::vector<double> grid;
  std::vector<Triplet> states;
  std::vector<double> condition;
  bool any_near_exceptional = false;
};

TrackedPath track_branches(const OperatorPath& path, std::span<const double> grid,
                           const TrackOptions& options = {});

/// Assigns branch ids of `next` by best overlap with `previous` (already
/// labelled). Returns the gap between the best and second-best assignment.
double match_branches(const Triplet& previous, Triplet& next);

/// Labels a freshly diagonalized triplet by bare-state character.
void label_by_bare_character(Triplet& states);

struct SpectralSweep {
  std::vector<double> deltas;
  std::vector<Triplet> states;  // states[k][branch_id]
  bool any_near_exceptional = false;
};

/// Throws std::invalid_argument unless `deltas` is strictly monotone.
SpectralSweep sweep_spectrum(const PairParams& params, std::span<const double> deltas,
                             const TrackOptions& options = {});

/// gamma_n = Gamma_ee |<ee|h_n>|^2 on the eigenvectors of the coherent part
/// alone, tracked by branch id like sweep_spectrum. rates[k][branch_id].
std::vector<std::array<double, 3>> perturbative_decay_rates(const PairParams& params,
                                                            std::span<const double> deltas);

/// Perturbative rate of the coherent-part eigenvector that best overlaps the
/// given non-Hermitian right eigenvector at the same detuning.
double perturbative_rate_matching(const PairParams& params, double delta,
                                  const PairVector& dressed_right);

struct CrossoverRow {
  double omega = 0.0;
  std::array<double, 3> gamma{};  // by branch id, tracked in omega
  double gamma_min = 0.0;
};

struct CrossoverReport {
  std::vector<CrossoverRow> rows;
  bool gamma_min_monotone = true;  // non-decreasing with omega
};

CrossoverReport zeno_crossover_report(const PairParams& params, double delta,
                                      std::span<const double> omegas);

/// Uniform grid [lo, hi] with spacing `step` (last point clipped to hi).
std::vector<double> linear_grid(double lo, double hi, double step);

}  // namespace zeno
