// Command-line front end: resolves the configuration, runs one command,
// writes its tables and a JSON summary into the output directory.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 numerical
// failure, 3 a --check assertion failed.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "zeno/adiabatic.hpp"
#include "zeno/config.hpp"
#include "zeno/dynamics.hpp"
#include "zeno/experiment.hpp"
#include "zeno/report.hpp"
#include "zeno/spectrum.hpp"
#include "zeno/units.hpp"

using namespace zeno;

namespace {

constexpr int kUsage = 1;
constexpr int kNumerical = 2;
constexpr int kCheckFailed = 3;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Output {
  std::vector<Table> tables;
  Summary summary;
};

Check check_at_most(std::string name, double value, double tolerance) {
  return {std::move(name), value <= tolerance, value, tolerance};
}

Check check_at_least(std::string name, double value, double threshold) {
  return {std::move(name), value >= threshold, value, threshold};
}

// ---------------------------------------------------------------- spectrum

void spectrum_tables(const Figure1Panel& panel, const std::string& prefix, Output& out) {
  const bool overlay = panel.zeno_overlay.has_value();
  Table re{prefix + "_re", {"delta_hz", "branch_id", "epsilon_hz", "w_gg", "w_eg", "w_ee"}, {}};
  Table im{prefix + "_im", {"delta_hz", "branch_id", "gamma_hz", "w_gg", "w_eg", "w_ee"}, {}};
  if (overlay) {
    re.columns.insert(re.columns.end(), {"overlay_upper_hz", "overlay_lower_hz"});
    im.columns.insert(im.columns.end(), {"overlay_upper_hz", "overlay_lower_hz"});
  }
  for (std::size_t k = 0; k < panel.deltas.size(); ++k) {
    for (int b = 0; b < 3; ++b) {
      const auto& w = panel.weights[k][b];
      std::vector<double> r{to_hz(panel.deltas[k]), double(b), to_hz(panel.epsilon[k][b]), w[0], w[1], w[2]};
      std::vector<double> i{to_hz(panel.deltas[k]), double(b), to_hz(panel.gamma[k][b]), w[0], w[1], w[2]};
      if (overlay) {
        const auto& o = (*panel.zeno_overlay)[k];
        r.insert(r.end(), {to_hz(o[0].real()), to_hz(o[1].real())});
        // Decay rate of lambda = epsilon - i gamma / 2.
        i.insert(i.end(), {to_hz(-2.0 * o[0].imag()), to_hz(-2.0 * o[1].imag())});
      }
      re.add(std::move(r));
      im.add(std::move(i));
    }
  }
  if (panel.near_exceptional) {
    out.summary.warnings.push_back(prefix + ": spectrum passes near an exceptional point");
  }
  out.tables.push_back(std::move(re));
  out.tables.push_back(std::move(im));
}

std::vector<Figure1Panel> spectrum_panels(const RunConfig& cfg, Output& out) {
  const PairParams params = cfg.pair_params();
  const std::vector<double> grid = cfg.detuning_grid();
  const std::vector<double> ratios{cfg.figures.zeno_ratio, cfg.figures.strong_ratio};
  std::vector<Figure1Panel> panels = figure1_pipeline(params, ratios, grid);
  out.summary.metrics["zeno_ratio"] = cfg.figures.zeno_ratio;
  out.summary.metrics["strong_ratio"] = cfg.figures.strong_ratio;
  out.summary.metrics["grid_points"] = grid.size();
  return panels;
}

Output cmd_spectrum(const RunConfig& cfg, const std::string& prefix) {
  Output out;
  const auto panels = spectrum_panels(cfg, out);
  spectrum_tables(panels[0], prefix + "_zeno", out);
  spectrum_tables(panels[1], prefix + "_strong", out);
  return out;
}

Output cmd_fig1(const RunConfig& cfg, bool check) {
  Output out;
  const auto panels = spectrum_panels(cfg, out);
  spectrum_tables(panels[0], "fig1_zeno", out);
  spectrum_tables(panels[1], "fig1_strong", out);
  if (!check) return out;
  const PairParams params = cfg.pair_params();
  const PQ pq = derive_pq(params);
  double lo = 1e300, hi = -1e300, floor = 1e300;
  for (std::size_t k = 0; k < panels[0].deltas.size(); ++k) {
    lo = std::min(lo, panels[0].gamma[k][2] / params.gamma_ee);
    hi = std::max(hi, panels[0].gamma[k][2] / params.gamma_ee);
  }
  for (std::size_t k = 0; k < panels[1].deltas.size(); ++k) {
    if (std::abs(panels[1].deltas[k] - (pq.p + pq.q)) > hz(300)) continue;
    for (double g : panels[1].gamma[k]) floor = std::min(floor, g / params.gamma_ee);
  }
  out.summary.metrics["zeno_gamma3_min_over_gamma_ee"] = lo;
  out.summary.metrics["zeno_gamma3_max_over_gamma_ee"] = hi;
  out.summary.metrics["strong_min_gamma_near_resonance_over_gamma_ee"] = floor;
  out.summary.checks.push_back(check_at_least("zeno_gamma3_min", lo, 0.9));
  out.summary.checks.push_back(check_at_most("zeno_gamma3_max", hi, 1.0));
  out.summary.checks.push_back(check_at_least("strong_gamma_floor", floor, 0.05));
  return out;
}

// ---------------------------------------------------------------- evolve

std::vector<double> sample_times(const RunConfig& cfg, const RampProtocol& ramp) {
  const int n = cfg.numerics.samples;
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = ramp.end_time() * i / (n - 1);
  return t;
}

Output cmd_evolve(const RunConfig& cfg, const std::string& method) {
  Output out;
  const PairParams params = cfg.pair_params();
  const RampProtocol ramp = cfg.ramp_protocol();
  const std::vector<double> times = sample_times(cfg, ramp);
  const PairState psi0 = bare_state(Bare::gg);
  out.summary.metrics["method"] = method;
  if (method == "nh") {
    const EvolutionResult r = evolve_nonhermitian(params, ramp, psi0, times, cfg.ode());
    Table t{"evolve_nh",
            {"t_s", "re_c_gg", "im_c_gg", "re_c_eg", "im_c_eg", "re_c_ee", "im_c_ee", "norm2", "p_gg", "p_eg",
             "p_ee"},
            {}};
    for (std::size_t i = 0; i < times.size(); ++i) {
      const PairState& c = r.states[i];
      const auto& p = r.populations[i];
      t.add({times[i], c(0).real(), c(0).imag(), c(1).real(), c(1).imag(), c(2).real(), c(2).imag(), r.norm2[i],
             p[0], p[1], p[2]});
    }
    out.summary.metrics["final_norm2"] = r.norm2.back();
    out.tables.push_back(std::move(t));
  } else if (method == "lindblad") {
    const LindbladResult r = evolve_lindblad(params, ramp, pure_density(psi0), times, cfg.ode());
    Table t{"evolve_lindblad", {"t_s", "norm2", "p_gg", "p_eg", "p_ee", "trace"}, {}};
    for (std::size_t i = 0; i < times.size(); ++i) {
      const DensityMatrix& rho = r.rho[i];
      t.add({times[i], r.pair_trace[i], rho(0, 0).real(), rho(1, 1).real(), rho(2, 2).real(), r.trace[i]});
    }
    out.summary.metrics["final_norm2"] = r.pair_trace.back();
    out.tables.push_back(std::move(t));
  } else {
    TrajectoryOptions traj;
    traj.n_traj = cfg.numerics.n_traj;
    traj.seed = cfg.numerics.seed;
    traj.jobs = cfg.numerics.jobs;
    const TrajectoryResult r = evolve_trajectories(params, ramp, psi0, times, traj, cfg.ode());
    Table t{"evolve_mc", {"t_s", "survival", "survival_stderr", "p_gg", "p_eg", "p_ee"}, {}};
    for (std::size_t i = 0; i < times.size(); ++i) {
      const auto& p = r.populations[i];
      t.add({times[i], r.survival[i], r.survival_stderr[i], p[0], p[1], p[2]});
    }
    out.summary.metrics["final_survival"] = r.survival.back();
    out.summary.metrics["final_survival_stderr"] = r.survival_stderr.back();
    out.tables.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------- figures 3, 4

Output cmd_fig3(const RunConfig& cfg, bool check) {
  Output out;
  const PairParams params = cfg.pair_params();
  Figure3Options opt;
  opt.delta_dot = hz_per_ms(cfg.ramp.speed_hz_per_ms);
  opt.omega = hz(cfg.physical.omega_hz);
  opt.start = hz(std::abs(cfg.ramp.delta_i_hz));
  opt.t_hold = ms(cfg.figures.fig3_hold_ms);
  opt.shape = cfg.ramp.omega_ramp_shape;
  opt.lifetime.samples = cfg.numerics.lifetime_samples;
  opt.transport = cfg.transport();
  opt.ode = cfg.ode();
  opt.jobs = cfg.numerics.jobs;
  if (!(opt.start > 0.0)) throw UsageError("figure 3 needs a nonzero ramp.delta_i_hz");
  const std::vector<double> stops =
      linear_grid(hz(cfg.numerics.grid_lo_hz), hz(cfg.numerics.grid_hi_hz), hz(cfg.figures.fig3_step_hz));
  const std::vector<Figure3Row> rows = figure3_pipeline(params, opt, stops, stops);

  const std::vector<std::string> columns{"delta_f_hz",         "gamma_sim_per_s", "gamma_branch_per_s",
                                         "gamma_pert_per_s",   "enhancement",     "max_margin",
                                         "non_exponential"};
  Table up{"fig3_ascending", columns, {}};
  Table down{"fig3_descending", columns, {}};
  double best = 0.0, best_at = 0.0, worst_dev = 0.0, worst_dev_exponential = 0.0;
  int consistent_points = 0, flagged = 0;
  for (const Figure3Row& r : rows) {
    const double enhancement = r.gamma_branch > 0.0 ? r.gamma_pert / r.gamma_branch : 0.0;
    (r.ascending ? up : down)
        .add({to_hz(r.delta_f), r.gamma_sim, r.gamma_branch, r.gamma_pert, enhancement, r.max_margin,
              r.non_exponential ? 1.0 : 0.0});
    if (enhancement > best) {
      best = enhancement;
      best_at = to_hz(r.delta_f);
    }
    if (r.max_margin < 0.1 && r.gamma_branch > 0.0) {
      const double dev = std::abs(r.gamma_sim / r.gamma_branch - 1.0);
      worst_dev = std::max(worst_dev, dev);
      if (!r.non_exponential) worst_dev_exponential = std::max(worst_dev_exponential, dev);
      ++consistent_points;
    }
    if (r.non_exponential) ++flagged;
  }
  out.summary.metrics["max_enhancement"] = best;
  out.summary.metrics["max_enhancement_delta_f_hz"] = best_at;
  out.summary.metrics["max_lifetime_deviation_where_adiabatic"] = worst_dev;
  out.summary.metrics["max_lifetime_deviation_where_adiabatic_and_exponential"] = worst_dev_exponential;
  out.summary.metrics["adiabatic_points"] = consistent_points;
  out.summary.metrics["non_exponential_points"] = flagged;
  if (flagged > 0) {
    out.summary.warnings.push_back(std::to_string(flagged) + " hold curves are not single exponentials");
  }
  out.tables.push_back(std::move(up));
  out.tables.push_back(std::move(down));
  if (check) {
    out.summary.checks.push_back(check_at_least("max_enhancement", best, 100.0));
  }
  return out;
}

Output cmd_fig4(const RunConfig& cfg, bool check) {
  Output out;
  const PairParams params = cfg.pair_params();
  const EnsembleModel model = cfg.ensemble_model();
  Figure4Options opt;
  opt.delta_i = hz(cfg.ramp.delta_i_hz);
  opt.delta_dot = hz_per_ms(cfg.ramp.speed_hz_per_ms);
  opt.omega = hz(cfg.physical.omega_hz);
  opt.t_hold = ms(cfg.figures.fig4_hold_ms);
  opt.hold_samples = cfg.figures.hold_samples;
  opt.shape = cfg.ramp.omega_ramp_shape;
  opt.transport = cfg.transport();
  opt.ode = cfg.ode();
  opt.jobs = cfg.numerics.jobs;
  // Ramps run from delta_i towards the far end of the grid.
  const double direction = opt.delta_i > 0.0 ? -1.0 : 1.0;
  std::vector<double> stops;
  for (double d : linear_grid(hz(cfg.numerics.grid_lo_hz), hz(cfg.numerics.grid_hi_hz), hz(cfg.figures.fig4_step_hz))) {
    if (direction * (d - opt.delta_i) >= 0.0) stops.push_back(d);
  }
  if (direction < 0) std::reverse(stops.begin(), stops.end());
  if (stops.empty()) throw UsageError("figure 4 grid holds no final detuning on the ramp side of delta_i");
  const std::vector<Figure4Row> rows = figure4_pipeline(model, params, opt, stops);

  Table ng{"fig4_ng", {"delta_f_hz", "n_g"}, {}};
  Table nt{"fig4_ntotal", {"delta_f_hz", "n_total_detected"}, {}};
  const bool fits = opt.t_hold > 0.0;
  if (fits) {
    nt.columns.insert(nt.columns.end(), {"hold_f1", "hold_f2", "hold_gamma_per_s", "hold_f1_expected",
                                         "hold_f2_expected"});
  }
  Table n1{"fig4_n1", {"delta_f_hz", "n1"}, {}};
  Table n2{"fig4_n2", {"delta_f_hz", "n2", "n2_adiabatic"}, {}};
  double n2_dev = 0.0, n1_dev = 0.0;
  for (const Figure4Row& r : rows) {
    const double df = to_hz(r.delta_f);
    ng.add({df, r.obs.n_g});
    std::vector<double> t{df, r.obs.n_total_detected};
    if (fits) {
      const DecayFit& f = *r.hold_fit;
      t.insert(t.end(), {f.f1, f.f2, f.gamma, r.hold_f1_expected, r.hold_f2_expected});
    }
    nt.add(std::move(t));
    n1.add({df, r.n1});
    n2.add({df, r.n2, r.n2_adiabatic});
    if (model.n2 > 0.0) n2_dev = std::max(n2_dev, std::abs(r.n2 - r.n2_adiabatic) / (2.0 * model.n2));
    if (model.n1 > 0.0) n1_dev = std::max(n1_dev, std::abs(r.n1 / model.n1 - 1.0));
  }
  out.summary.metrics["max_n2_deviation"] = n2_dev;
  out.summary.metrics["max_n1_deviation"] = n1_dev;
  out.summary.metrics["stops"] = rows.size();
  for (Table* t : {&ng, &nt, &n1, &n2}) out.tables.push_back(std::move(*t));
  if (check) {
    out.summary.checks.push_back(check_at_most("n2_dynamics_vs_transport", n2_dev, 0.02));
    out.summary.checks.push_back(check_at_most("n1_constant", n1_dev, 0.01));
  }
  return out;
}

// ---------------------------------------------------------------- transport, lifetime, fit

int parse_branch(const std::string& name) {
  if (name == "gg") return index(Bare::gg);
  if (name == "eg") return index(Bare::eg);
  return index(Bare::ee);
}

Output cmd_transport(const RunConfig& cfg, const std::string& branch) {
  Output out;
  const int alpha = parse_branch(branch);
  const TransportReport rep = transport_integrals(cfg.pair_params(), cfg.ramp_protocol(), alpha, cfg.transport());
  Table t{"transport",
          {"x", "t_s", "delta_hz", "omega_hz", "epsilon_hz", "gamma_hz", "re_berry", "im_berry", "running_kappa",
           "margin_gg", "margin_eg", "margin_ee"},
          {}};
  for (const TransportPoint& p : rep.profile) {
    t.add({p.x, p.t, to_hz(p.delta), to_hz(p.omega), to_hz(p.epsilon[alpha]), to_hz(p.gamma[alpha]), p.berry.real(),
           p.berry.imag(), p.running_kappa[alpha], p.margin[0], p.margin[1], p.margin[2]});
  }
  auto& m = out.summary.metrics;
  m["branch"] = branch;
  m["kappa"] = rep.kappa;
  m["kappa_dissipative"] = rep.kappa_dissipative;
  m["kappa_geometric"] = rep.kappa_geometric;
  m["phi"] = rep.phi;
  m["survival"] = rep.survival;
  m["max_margin"] = rep.max_margin;
  if (rep.near_exceptional) out.summary.warnings.push_back("transport path passes near an exceptional point");
  out.tables.push_back(std::move(t));
  return out;
}

Output cmd_lifetime(const RunConfig& cfg) {
  Output out;
  const RampProtocol ramp = cfg.ramp_protocol();
  if (!(ramp.t_hold > 0.0)) throw UsageError("lifetime needs ramp.t_hold_ms > 0");
  LifetimeOptions lt;
  lt.samples = cfg.numerics.lifetime_samples;
  const LifetimeFit fit = prepared_state_lifetime(cfg.pair_params(), ramp, lt, cfg.ode());
  Table t{"lifetime", {"delta_f_hz", "gamma_per_s", "norm2_at_ramp_end", "rms_log_residual", "non_exponential"}, {}};
  t.add({cfg.ramp.delta_f_hz, fit.gamma, fit.norm2_at_ramp_end, fit.rms_log_residual, fit.non_exponential ? 1.0 : 0.0});
  auto& m = out.summary.metrics;
  m["gamma_per_s"] = fit.gamma;
  m["norm2_at_ramp_end"] = fit.norm2_at_ramp_end;
  m["rms_log_residual"] = fit.rms_log_residual;
  m["non_exponential"] = fit.non_exponential;
  if (fit.non_exponential) out.summary.warnings.push_back("hold decay is not a single exponential");
  out.tables.push_back(std::move(t));
  return out;
}

// Reads "t_s,counts[,weight]" rows; '#' lines and one non-numeric header are skipped.
void read_samples(const std::string& path, std::vector<double>& t, std::vector<double>& y, std::vector<double>& w) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read fit input '" + path + "'");
  std::string line;
  bool header_seen = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> values;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (header_seen || !t.empty()) throw UsageError(path + ":" + std::to_string(line_no) + ": not numeric");
      header_seen = true;
      continue;
    }
    if (values.size() < 2 || values.size() > 3) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected 2 or 3 columns");
    }
    t.push_back(values[0]);
    y.push_back(values[1]);
    if (values.size() == 3) w.push_back(values[2]);
  }
  if (!w.empty() && w.size() != t.size()) throw UsageError(path + ": weights given on some rows only");
}

Output cmd_fit(const std::string& path) {
  Output out;
  std::vector<double> t, y, w;
  read_samples(path, t, y, w);
  const DecayFit f = fit_decay(t, y, w);
  Table table{"fit", {"t_s", "counts", "model", "residual"}, {}};
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double model = f.f1 + f.f2 * std::exp(-f.gamma * t[i]);
    table.add({t[i], y[i], model, y[i] - model});
  }
  auto& m = out.summary.metrics;
  m["f1"] = f.f1;
  m["f2"] = f.f2;
  m["gamma_per_s"] = f.gamma;
  m["f1_stderr"] = std::sqrt(std::max(f.covariance(0, 0), 0.0));
  m["f2_stderr"] = std::sqrt(std::max(f.covariance(1, 1), 0.0));
  m["gamma_stderr"] = std::sqrt(std::max(f.covariance(2, 2), 0.0));
  m["rss"] = f.rss;
  m["evaluations"] = f.evaluations;
  m["no_decay_resolved"] = f.no_decay_resolved;
  if (f.no_decay_resolved) out.summary.warnings.push_back("no decay resolved");
  out.tables.push_back(std::move(table));
  return out;
}

// ---------------------------------------------------------------- driver

int finish(Output out, const RunConfig& cfg, const std::string& command) {
  out.summary.command = command;
  // Everything is computed before the first file is written.
  for (const Table& t : out.tables) ensure_finite(t);
  for (const Table& t : out.tables) out.summary.files.push_back(write_table(t, cfg, command).filename().string());
  write_summary(out.summary, cfg);
  for (const std::string& w : out.summary.warnings) std::cerr << "warning: " << w << '\n';
  for (const Check& c : out.summary.checks) {
    std::cerr << (c.pass ? "PASS " : "FAIL ") << c.name << " value=" << c.value << " tolerance=" << c.tolerance
              << '\n';
  }
  return out.summary.all_pass() ? 0 : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation of laser-driven lossy atom pairs: spectra, dynamics, transport and figure data"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  bool dump = false;
  std::optional<unsigned> jobs;
  std::optional<std::string> output_dir;
  std::optional<std::string> format;
  app.add_option("--config,-c", config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "Override a config key, section.key=value (repeatable)");
  app.add_flag("--dump-config", dump, "Print the resolved configuration and exit");
  app.add_option("--jobs,-j", jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--output,-o", output_dir, "Output directory (created if missing)");
  app.add_option("--format", format, "Table format")->check(CLI::IsMember({"csv", "json"}));

  auto* spectrum = app.add_subcommand("spectrum", "Complex spectra in the Zeno and strong-drive regimes");
  std::optional<double> omega_ratio, strong_ratio;
  spectrum->add_option("--omega-ratio", omega_ratio, "Omega / Gamma_ee of the Zeno panel");
  spectrum->add_option("--strong-ratio", strong_ratio, "Omega / Gamma_ee of the strong-drive panel");

  auto* evolve = app.add_subcommand("evolve", "Propagate |gg> along the configured ramp");
  std::string method = "nh";
  std::optional<std::uint64_t> n_traj, seed;
  evolve->add_option("--method", method, "nh, lindblad or mc")->check(CLI::IsMember({"nh", "lindblad", "mc"}));
  evolve->add_option("--n-traj", n_traj, "Monte Carlo trajectories")->check(CLI::PositiveNumber);
  evolve->add_option("--seed", seed, "Monte Carlo seed");

  auto* figures = app.add_subcommand("figures", "Figure datasets");
  std::string which;
  bool check = false;
  figures->add_option("which", which, "fig1, fig3 or fig4")->required()->check(CLI::IsMember({"fig1", "fig3", "fig4"}));
  figures->add_flag("--check", check, "Run the figure's acceptance assertions");

  auto* transport = app.add_subcommand("transport", "Adiabatic transport integrals along the ramp");
  std::string branch = "gg";
  transport->add_option("--branch", branch, "Followed branch: gg, eg or ee")->check(CLI::IsMember({"gg", "eg", "ee"}));

  auto* lifetime = app.add_subcommand("lifetime", "Decay rate of the prepared state during the hold");

  auto* fit = app.add_subcommand("fit", "Fit f1 + f2 exp(-gamma t) to a CSV of t_s,counts[,weight]");
  std::string fit_input;
  fit->add_option("--input", fit_input, "Input CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_config(config_path);
    for (const std::string& o : overrides) apply_override(cfg, o);
    if (jobs) cfg.numerics.jobs = *jobs;
    if (output_dir) cfg.output.directory = *output_dir;
    if (format) set_config_value(cfg, "output", "format", *format);
    if (omega_ratio) cfg.figures.zeno_ratio = *omega_ratio;
    if (strong_ratio) cfg.figures.strong_ratio = *strong_ratio;
    if (n_traj) cfg.numerics.n_traj = *n_traj;
    if (seed) cfg.numerics.seed = *seed;
    cfg.validate();
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kUsage;
  }

  if (dump) {
    std::cout << dump_config(cfg);
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return kUsage;
  }

  try {
    prepare_output_dir(cfg.output.directory);
    if (*spectrum) return finish(cmd_spectrum(cfg, "spectrum"), cfg, "spectrum");
    if (*evolve) return finish(cmd_evolve(cfg, method), cfg, "evolve_" + method);
    if (*figures) {
      if (which == "fig1") return finish(cmd_fig1(cfg, check), cfg, "fig1");
      if (which == "fig3") return finish(cmd_fig3(cfg, check), cfg, "fig3");
      return finish(cmd_fig4(cfg, check), cfg, "fig4");
    }
    if (*transport) return finish(cmd_transport(cfg, branch), cfg, "transport");
    if (*lifetime) return finish(cmd_lifetime(cfg), cfg, "lifetime");
    if (*fit) return finish(cmd_fit(fit_input), cfg, "fit");
  } catch (const OutputError& e) {
    std::cerr << "output error: " << e.what() << '\n';
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  }
  return kUsage;
}
