#pragma once

#include <array>
#include <string>

namespace zeno {

enum class OmegaRampShape { linear_field, linear_intensity };

OmegaRampShape parse_omega_ramp_shape(const std::string& name);
std::string to_string(OmegaRampShape shape);

struct Drive {
  double delta = 0.0;  // rad/s
  double omega = 0.0;  // rad/s
};

struct DriveRates {
  double delta_dot = 0.0;  // rad/s^2
  double omega_dot = 0.0;  // rad/s^2
};

/// Piecewise drive schedule starting at t = 0:
///   [0, t_omega]                     Omega: 0 -> omega_nominal at delta_i
///   [t_omega, t_omega + t_delta]     delta: delta_i -> delta_f at delta_dot
///   [.., .. + t_hold]                constant
/// Times in s, frequencies in rad/s, delta_dot in rad/s^2.
struct RampProtocol {
  double delta_i = 0.0;
  double delta_f = 0.0;
  double delta_dot = 0.0;
  double omega_nominal = 0.0;
  double t_omega = 0.0;
  double t_delta = 0.0;
  double t_hold = 0.0;
  OmegaRampShape shape = OmegaRampShape::linear_field;

  /// Intensity ramp lasting a tenth of the total ramp time, t_omega = t_delta / 9.
  /// |delta_dot| is taken as a speed; its sign follows delta_f - delta_i.
  static RampProtocol with_default_timing(double delta_i, double delta_f, double speed,
                                        double omega_nominal, double t_hold = 0.0,
                                        OmegaRampShape shape = OmegaRampShape::linear_field);

  /// Constant drive for `duration` (no ramp legs).
  static RampProtocol constant(double delta, double omega, double duration);

  /// Throws std::invalid_argument on negative durations, non-finite fields or
  /// a t_delta inconsistent with (delta_f - delta_i) / delta_dot.
  void validate() const;

  double ramp_time() const { return t_omega + t_delta; }
  double end_time() const { return t_omega + t_delta + t_hold; }
  /// Ends of the intensity leg, the detuning leg and the hold.
  std::array<double, 3> breakpoints() const { return {t_omega, ramp_time(), end_time()}; }

  Drive drive_at(double t) const;
  /// One-sided (right) derivative at leg boundaries.
  DriveRates rates_at(double t) const;
  /// Time-reversed schedule over [0, ramp_time()] (hold dropped); the
  /// reversed drive at t equals drive_at(ramp_time() - t).
  Drive reversed_drive_at(double t) const { return drive_at(ramp_time() - t); }
};

}  // namespace zeno
