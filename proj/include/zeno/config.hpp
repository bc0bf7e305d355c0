#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "zeno/adiabatic.hpp"
#include "zeno/dynamics.hpp"
#include "zeno/experiment.hpp"
#include "zeno/hamiltonian.hpp"
#include "zeno/ode.hpp"
#include "zeno/ramp.hpp"

namespace zeno {

/// Bad configuration input: unknown key, malformed value or a value that
/// violates a physical or numerical invariant.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// How explicit p, q values in a config are read.
///   half_difference: p = (U_ee - U_gg)/2, q = U_eg - (U_gg + U_ee)/2
///   full_difference: p = U_ee - U_gg,       q = (U_ee + U_gg)/2 - U_eg
enum class PqConvention { half_difference, full_difference };

enum class OutputFormat { csv, json };

/// Frequencies in Hz, speeds in Hz/ms, times in ms.
struct PhysicalConfig {
  double u_gg_hz = 1400.0;
  double u_eg_ratio = 0.905;
  double u_ee_ratio = 1.21;
  std::optional<double> p_hz;  // with q_hz, replaces the two ratios
  std::optional<double> q_hz;
  PqConvention pq_convention = PqConvention::half_difference;
  std::optional<double> gamma_ee_hz;  // replaces gamma_ratio when set
  double gamma_ratio = 1.02;          // hbar Gamma_ee / U_gg
  double omega_hz = 150.0;
};

struct RampConfig {
  double delta_i_hz = 1500.0;
  double delta_f_hz = -1500.0;
  double speed_hz_per_ms = 11.1;
  double t_hold_ms = 0.0;
  OmegaRampShape omega_ramp_shape = OmegaRampShape::linear_field;
};

struct NumericsConfig {
  double rtol = 1e-10;
  double atol = 1e-13;
  double quad_rel_tol = 1e-10;
  int quad_depth = 10;
  double cell_hz = 1.0;
  double grid_lo_hz = -1500.0;
  double grid_hi_hz = 1500.0;
  double grid_step_hz = 5.0;
  int samples = 201;
  int lifetime_samples = 41;
  std::uint64_t n_traj = 10000;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
};

struct FiguresConfig {
  double zeno_ratio = 0.1;
  double strong_ratio = 1.0;
  double fig3_step_hz = 25.0;
  double fig3_hold_ms = 50.0;
  double fig4_step_hz = 50.0;
  double fig4_hold_ms = 100.0;
  int hold_samples = 21;
};

struct EnsembleConfig {
  double n1 = 1.0;
  double n2 = 1.0;
  double eta_rp = 0.8;
};

struct OutputConfig {
  std::string directory = "out";
  OutputFormat format = OutputFormat::csv;
  int precision = 12;
};

struct RunConfig {
  PhysicalConfig physical;
  RampConfig ramp;
  NumericsConfig numerics;
  FiguresConfig figures;
  EnsembleConfig ensemble;
  OutputConfig output;

  /// Throws ConfigError when any derived object fails its own validation.
  void validate() const;

  PairParams pair_params() const;
  RampProtocol ramp_protocol() const;
  OdeOptions ode() const;
  TransportOptions transport() const;
  EnsembleModel ensemble_model() const;
  /// Detuning grid in rad/s; throws ConfigError when empty.
  std::vector<double> detuning_grid() const;
};

struct ConfigEntry {
  std::string section;
  std::string key;
  std::string value;
};

/// Every key in a fixed order with its value in canonical text form.
std::vector<ConfigEntry> config_entries(const RunConfig& config);

/// Sets one key; `value` uses the text form of config_entries.
void set_config_value(RunConfig& config, const std::string& section, const std::string& key,
                      const std::string& value);

/// Applies "section.key=value".
void apply_override(RunConfig& config, const std::string& assignment);

/// Reads an INI file over the defaults. Unknown sections or keys are errors.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text);

/// INI text that parse_config reads back to the same configuration.
std::string dump_config(const RunConfig& config);

std::string to_string(PqConvention convention);
std::string to_string(OutputFormat format);

}  // namespace zeno
