#include "zeno/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "zeno/spectrum.hpp"
#include "zeno/units.hpp"

namespace zeno {

std::string to_string(PqConvention convention) {
  return convention == PqConvention::half_difference ? "half_difference" : "full_difference";
}

std::string to_string(OutputFormat format) { return format == OutputFormat::csv ? "csv" : "json"; }

namespace {

[[noreturn]] void bad_value(const std::string& what, const std::string& value) {
  throw ConfigError("cannot parse " + what + " from '" + value + "'");
}

// Shortest text that reads back to the same double.
std::string format_value(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}
std::string format_value(int v) { return std::to_string(v); }
std::string format_value(unsigned v) { return std::to_string(v); }
std::string format_value(std::uint64_t v) { return std::to_string(v); }
std::string format_value(const std::string& v) { return v; }
std::string format_value(const std::optional<double>& v) { return v ? format_value(*v) : "none"; }
std::string format_value(OmegaRampShape v) { return to_string(v); }
std::string format_value(PqConvention v) { return to_string(v); }
std::string format_value(OutputFormat v) { return to_string(v); }

// Whole-string numeric parsing; trailing garbage is an error.
template <class T>
T parse_number(const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) bad_value("a number", text);
  return v;
}

void parse_value(const std::string& s, double& out) { out = parse_number<double>(s); }
void parse_value(const std::string& s, int& out) { out = parse_number<int>(s); }
void parse_value(const std::string& s, unsigned& out) { out = parse_number<unsigned>(s); }
void parse_value(const std::string& s, std::uint64_t& out) { out = parse_number<std::uint64_t>(s); }
void parse_value(const std::string& s, std::string& out) { out = s; }
void parse_value(const std::string& s, std::optional<double>& out) {
  if (s == "none") {
    out.reset();
  } else {
    out = parse_number<double>(s);
  }
}
void parse_value(const std::string& s, OmegaRampShape& out) {
  try {
    out = parse_omega_ramp_shape(s);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}
void parse_value(const std::string& s, PqConvention& out) {
  if (s == "half_difference") {
    out = PqConvention::half_difference;
  } else if (s == "full_difference") {
    out = PqConvention::full_difference;
  } else {
    throw ConfigError("pq_convention must be half_difference or full_difference, got '" + s + "'");
  }
}
void parse_value(const std::string& s, OutputFormat& out) {
  if (s == "csv") {
    out = OutputFormat::csv;
  } else if (s == "json") {
    out = OutputFormat::json;
  } else {
    throw ConfigError("output format must be csv or json, got '" + s + "'");
  }
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Section, class T>
Field field(const char* section, const char* key, Section RunConfig::*group, T Section::*member) {
  return {section, key,
          [group, member](RunConfig& c, const std::string& v) { parse_value(v, c.*group.*member); },
          [group, member](const RunConfig& c) { return format_value(c.*group.*member); }};
}

// Registry order is the dump order.
const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      field("physical", "u_gg_hz", &RunConfig::physical, &PhysicalConfig::u_gg_hz),
      field("physical", "u_eg_ratio", &RunConfig::physical, &PhysicalConfig::u_eg_ratio),
      field("physical", "u_ee_ratio", &RunConfig::physical, &PhysicalConfig::u_ee_ratio),
      field("physical", "p_hz", &RunConfig::physical, &PhysicalConfig::p_hz),
      field("physical", "q_hz", &RunConfig::physical, &PhysicalConfig::q_hz),
      field("physical", "pq_convention", &RunConfig::physical, &PhysicalConfig::pq_convention),
      field("physical", "gamma_ee_hz", &RunConfig::physical, &PhysicalConfig::gamma_ee_hz),
      field("physical", "gamma_ratio", &RunConfig::physical, &PhysicalConfig::gamma_ratio),
      field("physical", "omega_hz", &RunConfig::physical, &PhysicalConfig::omega_hz),
      field("ramp", "delta_i_hz", &RunConfig::ramp, &RampConfig::delta_i_hz),
      field("ramp", "delta_f_hz", &RunConfig::ramp, &RampConfig::delta_f_hz),
      field("ramp", "speed_hz_per_ms", &RunConfig::ramp, &RampConfig::speed_hz_per_ms),
      field("ramp", "t_hold_ms", &RunConfig::ramp, &RampConfig::t_hold_ms),
      field("ramp", "omega_ramp_shape", &RunConfig::ramp, &RampConfig::omega_ramp_shape),
      field("numerics", "rtol", &RunConfig::numerics, &NumericsConfig::rtol),
      field("numerics", "atol", &RunConfig::numerics, &NumericsConfig::atol),
      field("numerics", "quad_rel_tol", &RunConfig::numerics, &NumericsConfig::quad_rel_tol),
      field("numerics", "quad_depth", &RunConfig::numerics, &NumericsConfig::quad_depth),
      field("numerics", "cell_hz", &RunConfig::numerics, &NumericsConfig::cell_hz),
      field("numerics", "grid_lo_hz", &RunConfig::numerics, &NumericsConfig::grid_lo_hz),
      field("numerics", "grid_hi_hz", &RunConfig::numerics, &NumericsConfig::grid_hi_hz),
      field("numerics", "grid_step_hz", &RunConfig::numerics, &NumericsConfig::grid_step_hz),
      field("numerics", "samples", &RunConfig::numerics, &NumericsConfig::samples),
      field("numerics", "lifetime_samples", &RunConfig::numerics, &NumericsConfig::lifetime_samples),
      field("numerics", "n_traj", &RunConfig::numerics, &NumericsConfig::n_traj),
      field("numerics", "seed", &RunConfig::numerics, &NumericsConfig::seed),
      field("numerics", "jobs", &RunConfig::numerics, &NumericsConfig::jobs),
      field("figures", "zeno_ratio", &RunConfig::figures, &FiguresConfig::zeno_ratio),
      field("figures", "strong_ratio", &RunConfig::figures, &FiguresConfig::strong_ratio),
      field("figures", "fig3_step_hz", &RunConfig::figures, &FiguresConfig::fig3_step_hz),
      field("figures", "fig3_hold_ms", &RunConfig::figures, &FiguresConfig::fig3_hold_ms),
      field("figures", "fig4_step_hz", &RunConfig::figures, &FiguresConfig::fig4_step_hz),
      field("figures", "fig4_hold_ms", &RunConfig::figures, &FiguresConfig::fig4_hold_ms),
      field("figures", "hold_samples", &RunConfig::figures, &FiguresConfig::hold_samples),
      field("ensemble", "n1", &RunConfig::ensemble, &EnsembleConfig::n1),
      field("ensemble", "n2", &RunConfig::ensemble, &EnsembleConfig::n2),
      field("ensemble", "eta_rp", &RunConfig::ensemble, &EnsembleConfig::eta_rp),
      field("output", "directory", &RunConfig::output, &OutputConfig::directory),
      field("output", "format", &RunConfig::output, &OutputConfig::format),
      field("output", "precision", &RunConfig::output, &OutputConfig::precision),
  };
  return all;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

bool finite_all(std::initializer_list<double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

std::vector<ConfigEntry> config_entries(const RunConfig& config) {
  std::vector<ConfigEntry> out;
  for (const Field& f : fields()) out.push_back({f.section, f.key, f.get(config)});
  return out;
}

void set_config_value(RunConfig& config, const std::string& section, const std::string& key,
                      const std::string& value) {
  for (const Field& f : fields()) {
    if (f.section == section && f.key == key) {
      try {
        f.set(config, value);
      } catch (const ConfigError& e) {
        throw ConfigError(section + "." + key + ": " + e.what());
      }
      return;
    }
  }
  throw ConfigError("unknown config key '" + section + "." + key + "'");
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("override must look like section.key=value, got '" + assignment + "'");
  }
  set_config_value(config, assignment.substr(0, dot), assignment.substr(dot + 1, eq - dot - 1),
                   assignment.substr(eq + 1));
}

RunConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  auto check_section = [](const std::string& section) {
    const bool known = std::any_of(fields().begin(), fields().end(),
                                   [&](const Field& f) { return f.section == section; });
    if (!known) throw ConfigError("unknown config section '" + section + "'");
  };
  // The parser drops empty sections, so headers are checked on the raw text.
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    const auto open = line.find_first_not_of(" \t");
    const auto close = line.find_last_not_of(" \t\r");
    if (open != std::string::npos && line[open] == '[' && line[close] == ']') {
      check_section(line.substr(open + 1, close - open - 1));
    }
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) throw ConfigError("config key '" + section + "' outside a section");
    check_section(section);
    for (const auto& [key, value] : body) {
      if (!value.empty()) throw ConfigError("nested config key under '" + section + "." + key + "'");
      set_config_value(config, section, key, value.data());
    }
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string dump_config(const RunConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const ConfigEntry& e : config_entries(config)) {
    if (e.section != section) {
      if (!section.empty()) out << '\n';
      section = e.section;
      out << '[' << section << "]\n";
    }
    out << e.key << " = " << e.value << '\n';
  }
  return out.str();
}

PairParams RunConfig::pair_params() const {
  const PhysicalConfig& ph = physical;
  PairParams p;
  p.u_gg = hz(ph.u_gg_hz);
  p.u_eg = ph.u_eg_ratio * p.u_gg;
  p.u_ee = ph.u_ee_ratio * p.u_gg;
  if (ph.p_hz && ph.q_hz) {
    // full_difference reads p twice as large and q with the opposite sign.
    const bool full = ph.pq_convention == PqConvention::full_difference;
    p = with_pq(p, {hz(full ? *ph.p_hz / 2.0 : *ph.p_hz), hz(full ? -*ph.q_hz : *ph.q_hz)});
  }
  p.gamma_ee = ph.gamma_ee_hz ? hz(*ph.gamma_ee_hz) : ph.gamma_ratio * p.u_gg;
  p.omega = hz(ph.omega_hz);
  return p;
}

RampProtocol RunConfig::ramp_protocol() const {
  return RampProtocol::with_default_timing(hz(ramp.delta_i_hz), hz(ramp.delta_f_hz),
                                           hz_per_ms(ramp.speed_hz_per_ms), hz(physical.omega_hz),
                                           ms(ramp.t_hold_ms), ramp.omega_ramp_shape);
}

OdeOptions RunConfig::ode() const {
  OdeOptions o;
  o.rtol = numerics.rtol;
  o.atol = numerics.atol;
  return o;
}

TransportOptions RunConfig::transport() const {
  TransportOptions t;
  t.cell_hz = numerics.cell_hz;
  t.rel_tol = numerics.quad_rel_tol;
  t.max_depth = numerics.quad_depth;
  t.jobs = numerics.jobs;
  return t;
}

EnsembleModel RunConfig::ensemble_model() const { return {ensemble.n1, ensemble.n2, ensemble.eta_rp}; }

std::vector<double> RunConfig::detuning_grid() const {
  const NumericsConfig& n = numerics;
  require(finite_all({n.grid_lo_hz, n.grid_hi_hz, n.grid_step_hz}), "detuning grid must be finite");
  require(n.grid_step_hz > 0.0 && n.grid_hi_hz >= n.grid_lo_hz,
          "empty detuning grid: need grid_step_hz > 0 and grid_hi_hz >= grid_lo_hz");
  return linear_grid(hz(n.grid_lo_hz), hz(n.grid_hi_hz), hz(n.grid_step_hz));
}

void RunConfig::validate() const {
  const PhysicalConfig& ph = physical;
  require(ph.p_hz.has_value() == ph.q_hz.has_value(), "p_hz and q_hz must be given together");
  require(finite_all({ph.u_gg_hz, ph.u_eg_ratio, ph.u_ee_ratio, ph.gamma_ratio, ph.omega_hz}),
          "physical parameters must be finite");
  require(!ph.gamma_ee_hz || std::isfinite(*ph.gamma_ee_hz), "gamma_ee_hz must be finite");
  require(!ph.p_hz || (std::isfinite(*ph.p_hz) && std::isfinite(*ph.q_hz)), "p_hz, q_hz must be finite");
  try {
    pair_params().validate();
    ramp_protocol().validate();
    ensemble_model().validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  require(ramp.speed_hz_per_ms > 0.0, "ramp speed_hz_per_ms must be > 0");

  const NumericsConfig& n = numerics;
  require(n.rtol > 0.0 && n.rtol < 1.0 && n.atol > 0.0, "integrator tolerances must be in (0, 1)");
  require(n.quad_rel_tol > 0.0 && n.quad_rel_tol < 1.0, "quad_rel_tol must be in (0, 1)");
  require(n.quad_depth >= 0 && n.quad_depth <= 30, "quad_depth must be in [0, 30]");
  require(n.cell_hz > 0.0 && std::isfinite(n.cell_hz), "cell_hz must be > 0");
  require(n.samples >= 2, "samples must be >= 2");
  require(n.lifetime_samples >= 3, "lifetime_samples must be >= 3");
  require(n.n_traj >= 1, "n_traj must be >= 1");
  require(n.jobs >= 1, "jobs must be >= 1");
  detuning_grid();

  const FiguresConfig& f = figures;
  require(f.zeno_ratio >= 0.0 && f.strong_ratio >= 0.0, "omega ratios must be >= 0");
  require(f.fig3_step_hz > 0.0 && f.fig4_step_hz > 0.0, "figure grid steps must be > 0");
  require(f.fig3_hold_ms > 0.0 && f.fig4_hold_ms >= 0.0, "figure holds must be positive");
  require(f.hold_samples >= 4, "hold_samples must be >= 4");

  require(!output.directory.empty(), "output directory must not be empty");
  require(output.precision >= 1 && output.precision <= 17, "output precision must be in [1, 17]");
}

}  // namespace zeno
