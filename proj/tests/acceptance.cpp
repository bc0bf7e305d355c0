// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.
// Exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "zeno/adiabatic.hpp"
#include "zeno/dynamics.hpp"
#include "zeno/experiment.hpp"
#include "zeno/spectrum.hpp"

using namespace zeno;
namespace fs = std::filesystem;

namespace {

constexpr double kSumRuleTol = 1e-10;
constexpr double kOverlapTol = 1e-9;
constexpr double kZenoBranchTol = 0.10;
constexpr double kZenoXRange = 5.0;
constexpr double kGammaEffTol = 1e-12;
constexpr double kSlopeEgTol = 0.1;
constexpr double kSlopeSlowTol = 0.2;
constexpr double kEnhancementTarget = 100.0;
constexpr double kEnhancementFloor = 50.0;
constexpr double kNormTraceTol = 1e-7;
constexpr double kMcSigmas = 3.0;
constexpr double kTransportTol = 0.05;
constexpr double kTransportSlowTol = 0.02;
constexpr double kLowerBoundSlack = 1e-6;
constexpr double kN2Tol = 0.02;
constexpr double kN1Tol = 0.01;
constexpr double kLzTol = 1e-3;
constexpr double kFitNoisyTol = 0.05;
constexpr double kFitExactTol = 1e-6;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("%s  %2d  %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sx += x[i], sy += y[i], sxx += x[i] * x[i], sxy += x[i] * y[i];
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Random drive points with the ytterbium p, q, all scaled by Gamma_ee.
std::vector<std::pair<PairParams, double>> random_points(int n) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ratio(0.0, 2.0), detuning(-3.0, 3.0);
  const PairParams yb = PairParams::ytterbium();
  std::vector<std::pair<PairParams, double>> out;
  for (int i = 0; i < n; ++i) {
    PairParams p = yb;
    p.omega = ratio(rng) * yb.gamma_ee;
    out.emplace_back(p, detuning(rng) * yb.gamma_ee);
  }
  return out;
}

void criteria_1_2() {
  const auto start = Clock::now();
  const auto points = random_points(1000);
  double worst_sum = 0, worst_overlap = 0;
  for (const auto& [p, delta] : points) {
    const Diagonalization d = diagonalize(build_heff(p, delta));
    double sum = 0;
    for (const DressedState& s : d.states) {
      sum += s.gamma;
      const double predicted = p.gamma_ee * s.weight(Bare::ee);
      const double scale = std::max(s.gamma, predicted);
      if (scale > 0) worst_overlap = std::max(worst_overlap, std::abs(s.gamma - predicted) / scale);
    }
    worst_sum = std::max(worst_sum, std::abs(sum / p.gamma_ee - 1));
  }
  const double elapsed = seconds_since(start);
  report(1, worst_sum <= kSumRuleTol && elapsed < 1.0,
         fmt("sum rule: max |sum gamma / Gamma - 1| = %.3g (tol %.0e), %.3f s (limit 1 s)", worst_sum, kSumRuleTol,
             elapsed));
  report(2, worst_overlap <= kOverlapTol,
         fmt("gamma_n = Gamma |<ee|lambda_n>|^2: max relative error %.3g (tol %.0e)", worst_overlap, kOverlapTol));
}

void criterion_3() {
  const PairParams p = PairParams::ytterbium();
  const PQ pq = derive_pq(p);
  // x = 2 (p - q - delta) / Gamma, so |x| <= 5 spans p - q -+ 2.5 Gamma.
  const double center = pq.p - pq.q, half = 0.5 * kZenoXRange * p.gamma_ee;
  const std::vector<double> deltas = linear_grid(center - half, center + half, hz(1.0));
  const SpectralSweep sweep = sweep_spectrum(p, deltas);
  std::array<double, 2> worst{0.0, 0.0};
  double worst_x = 0.0;
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    const ZenoEigenvalues z = lambda12_approx(p, deltas[k]);
    const std::array<double, 2> closed{-2 * z.upper.imag(), -2 * z.lower.imag()};
    const std::array<double, 2> full{sweep.states[k][0].gamma, sweep.states[k][1].gamma};
    // Pair the two lossless branches with the closed form in the kinder order.
    std::array<double, 2> direct{}, swapped{};
    for (int b = 0; b < 2; ++b) {
      direct[b] = std::abs(full[b] / closed[b] - 1);
      swapped[b] = std::abs(full[b] / closed[1 - b] - 1);
    }
    const auto& err = std::max(direct[0], direct[1]) <= std::max(swapped[0], swapped[1]) ? direct : swapped;
    if (std::max(err[0], err[1]) > std::max(worst[0], worst[1])) worst_x = build_effective_two_level(p, deltas[k]).x;
    for (int b = 0; b < 2; ++b) worst[b] = std::max(worst[b], err[b]);
  }
  const EffectiveTwoLevel at_zero = build_effective_two_level(p, center);
  const double oracle = 2 * p.omega * p.omega / p.gamma_ee;
  const double gamma_eff_err = std::abs(at_zero.gamma_eff / oracle - 1);
  const bool pass = worst[0] <= kZenoBranchTol && worst[1] <= kZenoBranchTol && gamma_eff_err <= kGammaEffTol;
  report(3, pass,
         fmt("Zeno reduction over |x| <= %.0f: max relative gamma error gg-branch %.3g, eg-branch %.3g "
             "(tol %.2f, worst near x = %.2f); Gamma_eff(x=0) vs 2 Omega^2/Gamma %.3g (tol %.0e)",
             kZenoXRange, worst[0], worst[1], kZenoBranchTol, worst_x, gamma_eff_err, kGammaEffTol));
}

void criterion_4() {
  const auto start = Clock::now();
  const PairParams p = PairParams::ytterbium();
  bool pass = true;
  std::string detail = "far-detuned log-log slopes:";
  for (double side : {-1.0, 1.0}) {
    std::vector<double> lx, ly_eg, ly_slow;
    for (double lg = std::log10(5000.0); lg <= std::log10(50000.0) + 1e-12; lg += 0.02) {
      const double delta = side * hz(std::pow(10.0, lg));
      Triplet t = diagonalize(build_heff(p, delta)).states;
      label_by_bare_character(t);
      lx.push_back(std::log(std::abs(delta)));
      ly_eg.push_back(std::log(t[index(Bare::eg)].gamma));
      ly_slow.push_back(std::log(std::min({t[0].gamma, t[1].gamma, t[2].gamma})));
    }
    const double s_eg = slope(lx, ly_eg), s_slow = slope(lx, ly_slow);
    pass = pass && std::abs(s_eg + 2.0) <= kSlopeEgTol && std::abs(s_slow + 4.0) <= kSlopeSlowTol;
    detail += fmt(" %s side eg %.3f, slowest %.3f;", side < 0 ? "negative" : "positive", s_eg, s_slow);
  }
  const double elapsed = seconds_since(start);
  pass = pass && elapsed < 10.0;
  report(4, pass, detail + fmt(" targets -2 +- %.1f and -4 +- %.1f, %.2f s (limit 10 s)", kSlopeEgTol,
                               kSlopeSlowTol, elapsed));
}

void criterion_5() {
  const PairParams p = PairParams::ytterbium();
  const int alpha = index(Bare::gg);
  double best = 0.0, best_at = 0.0;
  std::string best_dir;
  for (double start : {hz(1500), hz(-1500)}) {
    // The followed branch is the one leaving gg at the start of the ramp.
    const std::vector<double> up = linear_grid(hz(-1500), hz(1500), hz(1.0));
    std::vector<double> deltas = up;
    if (start > 0) std::reverse(deltas.begin(), deltas.end());
    const SpectralSweep sweep = sweep_spectrum(p, deltas);
    for (std::size_t k = 0; k < deltas.size(); ++k) {
      const DressedState& s = sweep.states[k][alpha];
      const double ratio = perturbative_rate_matching(p, deltas[k], s.right) / s.gamma;
      if (ratio > best) {
        best = ratio;
        best_at = to_hz(deltas[k]);
        best_dir = start > 0 ? "descending" : "ascending";
      }
    }
  }
  report(5, best >= kEnhancementTarget && best >= kEnhancementFloor,
         fmt("Zeno enhancement: max gamma_pert / gamma_full = %.2f at delta_f = %.0f Hz (%s) "
             "(target %.0f, hard floor %.0f)",
             best, best_at, best_dir.c_str(), kEnhancementTarget, kEnhancementFloor));
}

void criterion_6() {
  const auto start = Clock::now();
  const PairParams p = PairParams::ytterbium();
  const RampProtocol ramp = RampProtocol::with_default_timing(hz(1500), hz(-1500), hz_per_ms(11.1), hz(150));
  std::vector<double> times;
  for (int i = 0; i <= 200; ++i) times.push_back(ramp.end_time() * i / 200);
  const PairState psi0 = bare_state(Bare::gg);
  const EvolutionResult nh = evolve_nonhermitian(p, ramp, psi0, times);
  const LindbladResult lb = evolve_lindblad(p, ramp, pure_density(psi0), times);
  TrajectoryOptions traj;
  traj.n_traj = 10000;
  traj.seed = 7;
  const TrajectoryResult mc = evolve_trajectories(p, ramp, psi0, times, traj);
  double worst_trace = 0, worst_sigma = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    worst_trace = std::max(worst_trace, std::abs(nh.norm2[i] - lb.pair_trace[i]));
    const double q = nh.norm2[i];
    const double sigma = std::sqrt(q * (1 - q) / static_cast<double>(traj.n_traj));
    const double miss = std::abs(mc.survival[i] - q);
    if (miss > 0) worst_sigma = std::max(worst_sigma, sigma > 0 ? miss / sigma : INFINITY);
  }
  const double elapsed = seconds_since(start);
  report(6, worst_trace <= kNormTraceTol && worst_sigma <= kMcSigmas && elapsed < 60.0,
         fmt("dynamics equivalence: max |norm2 - Lindblad pair trace| = %.3g (tol %.0e); "
             "MC survival worst %.2f binomial sigma (tol %.0f), final survival %.4f; %.1f s (limit 60 s)",
             worst_trace, kNormTraceTol, worst_sigma, kMcSigmas, nh.norm2.back(), elapsed));
}

void criterion_7() {
  const PairParams p = PairParams::ytterbium();
  const int alpha = index(Bare::gg);
  const double delta_i = hz(1500), omega = hz(150);
  const std::vector<double> stops = linear_grid(hz(-1500), hz(1490), hz(10.0));
  std::vector<double> descending(stops.rbegin(), stops.rend());
  const TransportTable table(p, delta_i, omega, OmegaRampShape::linear_field, descending);
  std::array<double, 2> worst_ratio{0, 0}, worst_gap{0, 0}, gap_at{0, 0};
  const std::array<double, 2> speeds{11.1, 11.1 / 4};
  for (int s = 0; s < 2; ++s) {
    for (std::size_t i = 0; i < descending.size(); ++i) {
      const RampProtocol ramp =
          RampProtocol::with_default_timing(delta_i, descending[i], hz_per_ms(speeds[s]), omega);
      const AdiabaticComparison c = adiabatic_vs_exact(table, p, i, ramp, alpha);
      worst_ratio[s] = std::max(worst_ratio[s], std::abs(c.survival_exact / c.survival_adiabatic - 1));
      const double gap = c.survival_exact - c.survival_adiabatic;
      if (gap < worst_gap[s]) {
        worst_gap[s] = gap;
        gap_at[s] = to_hz(descending[i]);
      }
    }
  }
  const bool ratios = worst_ratio[0] <= kTransportTol && worst_ratio[1] <= kTransportSlowTol;
  const bool bound = worst_gap[0] >= -kLowerBoundSlack && worst_gap[1] >= -kLowerBoundSlack;
  report(7, ratios && bound,
         fmt("adiabatic transport on %zu stops: max |P_exact/e^-kappa - 1| = %.3g (tol %.2f), at speed/4 %.3g "
             "(tol %.2f); min P_exact - e^-kappa = %.3g at %.0f Hz, at speed/4 %.3g at %.0f Hz (floor %.0e)",
             descending.size(), worst_ratio[0], kTransportTol, worst_ratio[1], kTransportSlowTol, worst_gap[0],
             gap_at[0], worst_gap[1], gap_at[1], -kLowerBoundSlack));
}

void criterion_8() {
  const PairParams p = PairParams::ytterbium();
  const EnsembleModel model{100, 100, 0.8};
  Figure4Options opt;
  opt.delta_i = hz(1500);
  opt.delta_dot = hz_per_ms(11.1);
  opt.omega = hz(150);
  const std::vector<double> up = linear_grid(hz(-1500), hz(1500), hz(50.0));
  const std::vector<double> stops(up.rbegin(), up.rend());
  const auto rows = figure4_pipeline(model, p, opt, stops);
  double n2_scaled = 0, n2_relative = 0, n1_dev = 0;
  for (const Figure4Row& r : rows) {
    n2_scaled = std::max(n2_scaled, std::abs(r.n2 - r.n2_adiabatic) / (2 * model.n2));
    n2_relative = std::max(n2_relative, std::abs(r.n2 / r.n2_adiabatic - 1));
    n1_dev = std::max(n1_dev, std::abs(r.n1 / model.n1 - 1));
  }
  report(8, n2_relative <= kN2Tol && n1_dev <= kN1Tol,
         fmt("figure-4 consistency on %zu stops: max |N2 / (N2(delta_i) P_s) - 1| = %.3g (tol %.2f; on the "
             "N2(delta_i) scale %.3g); max |N1/n1 - 1| = %.3g (tol %.2f)",
             rows.size(), n2_relative, kN2Tol, n2_scaled, n1_dev, kN1Tol));
}

void criterion_9() {
  const double omega = hz(150);
  double worst = 0;
  for (double speed : {11.1, 35.1, 111.0, 351.0, 1110.0}) {
    for (double dir : {-1.0, 1.0}) {
      const LandauZenerResult r = landau_zener_transfer(omega, -dir * hz(5000), dir * hz(5000), dir * hz_per_ms(speed));
      const double oracle = 1.0 - std::exp(-M_PI * omega * omega / (2 * hz_per_ms(speed)));
      worst = std::max(worst, std::abs(r.transfer - oracle));
    }
  }
  report(9, worst <= kLzTol,
         fmt("Landau-Zener over 11.1..1110 Hz/ms, both directions: max |P - P_LZ| = %.3g (tol %.0e)", worst, kLzTol));
}

void criterion_10() {
  std::vector<double> t(20);
  for (int i = 0; i < 20; ++i) t[i] = 0.4 * i / 19;
  auto model = [&](double f1, double f2, double g) {
    std::vector<double> y;
    for (double x : t) y.push_back(f1 + f2 * std::exp(-g * x));
    return y;
  };
  const DecayFit exact = fit_decay(t, model(500, 1500, 8));
  const double exact_err =
      std::max({std::abs(exact.f1 / 500 - 1), std::abs(exact.f2 / 1500 - 1), std::abs(exact.gamma / 8 - 1)});
  std::vector<double> errors;
  for (int seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.05);
    std::vector<double> y = model(500, 1500, 8);
    for (double& v : y) v *= 1 + noise(rng);
    errors.push_back(std::abs(fit_decay(t, y).gamma / 8 - 1));
  }
  const double med = median(errors);
  report(10, exact_err <= kFitExactTol && med < kFitNoisyTol,
         fmt("decay fit: noiseless max relative error %.3g (tol %.0e); 5%% noise, 10 seeds: median |dgamma/gamma| "
             "= %.4f (tol %.2f)",
             exact_err, kFitExactTol, med, kFitNoisyTol));
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[e.path().filename().string()] = s.str();
  }
  return files;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ZENO_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion_11() {
  const fs::path root = fs::temp_directory_path() / "zeno_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream data(root / "decay.csv");
    data << "t_s,counts\n";
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 0.05);
    for (int i = 0; i < 20; ++i) {
      const double x = 0.4 * i / 19;
      data << x << ',' << (500 + 1500 * std::exp(-8 * x)) * (1 + noise(rng)) << '\n';
    }
  }
  const std::vector<std::pair<std::string, std::string>> commands{
      {"spectrum", "spectrum"},
      {"evolve_nh", "evolve --method nh"},
      {"evolve_lindblad", "evolve --method lindblad"},
      {"evolve_mc", "evolve --method mc --n-traj 2000 --seed 11 -j 2"},
      {"fig1", "figures fig1"},
      {"fig3", "figures fig3"},
      {"fig4", "figures fig4"},
      {"transport", "transport"},
      {"lifetime", "--set ramp.delta_f_hz=0 --set ramp.t_hold_ms=20 lifetime"},
      {"fit", "fit --input " + (root / "decay.csv").string()},
  };
  int reproducible = 0;
  std::string broken;
  std::size_t files = 0;
  for (const auto& [name, args] : commands) {
    const fs::path out = root / name;
    std::array<std::map<std::string, std::string>, 2> runs;
    bool ok = true;
    for (auto& r : runs) {
      fs::remove_all(out);
      ok = ok && run_cli(args + " -o " + out.string()) == 0;
      if (ok) r = snapshot(out);
    }
    ok = ok && !runs[0].empty() && runs[0] == runs[1];
    files += runs[0].size();
    if (ok) {
      ++reproducible;
    } else {
      broken += " " + name;
    }
  }
  report(11, reproducible == static_cast<int>(commands.size()),
         fmt("determinism: %d of %zu CLI commands byte-identical across two runs (%zu files)%s%s", reproducible,
             commands.size(), files, broken.empty() ? "" : "; differing:", broken.c_str()));
}

}  // namespace

int main() {
  criteria_1_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_11();
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
