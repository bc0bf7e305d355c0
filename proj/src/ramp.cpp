#include "zeno/ramp.hpp"

#include <cmath>
#include <stdexcept>

namespace zeno {

OmegaRampShape parse_omega_ramp_shape(const std::string& name) {
  if (name == "linear_field") return OmegaRampShape::linear_field;
  if (name == "linear_intensity") return OmegaRampShape::linear_intensity;
  throw std::invalid_argument("omega_ramp_shape must be linear_field or linear_intensity, got '" +
                              name + "'");
}

std::string to_string(OmegaRampShape shape) {
  return shape == OmegaRampShape::linear_field ? "linear_field" : "linear_intensity";
}

RampProtocol RampProtocol::with_default_timing(double delta_i, double delta_f, double speed,
                                             double omega_nominal, double t_hold,
                                             OmegaRampShape shape) {
  RampProtocol r;
  r.delta_i = delta_i;
  r.delta_f = delta_f;
  r.omega_nominal = omega_nominal;
  r.t_hold = t_hold;
  r.shape = shape;
  const double span = delta_f - delta_i;
  r.delta_dot = span < 0 ? -std::abs(speed) : std::abs(speed);
  r.t_delta = span == 0.0 ? 0.0 : span / r.delta_dot;
  r.t_omega = r.t_delta / 9.0;
  r.validate();
  return r;
}

RampProtocol RampProtocol::constant(double delta, double omega, double duration) {
  RampProtocol r;
  r.delta_i = r.delta_f = delta;
  r.omega_nominal = omega;
  r.t_hold = duration;
  r.validate();
  return r;
}

void RampProtocol::validate() const {
  for (double v : {delta_i, delta_f, delta_dot, omega_nominal, t_omega, t_delta, t_hold}) {
    if (!std::isfinite(v)) throw std::invalid_argument("ramp field is not finite");
  }
  if (omega_nominal < 0) throw std::invalid_argument("ramp omega_nominal must be >= 0");
  if (t_omega < 0 || t_delta < 0 || t_hold < 0) {
    throw std::invalid_argument("ramp durations must be >= 0");
  }
  const double span = delta_f - delta_i;
  if (span != 0.0) {
    if (delta_dot == 0.0 || (span > 0) != (delta_dot > 0)) {
      throw std::invalid_argument("sign of delta_dot must follow delta_f - delta_i");
    }
    if (std::abs(t_delta * delta_dot - span) > 1e-9 * std::abs(span)) {
      throw std::invalid_argument("t_delta inconsistent with (delta_f - delta_i) / delta_dot");
    }
  } else if (t_delta != 0.0 && delta_dot != 0.0) {
    throw std::invalid_argument("nonzero delta_dot over a zero-length detuning leg");
  }
}

Drive RampProtocol::drive_at(double t) const {
  if (t < t_omega) {
    const double s = std::max(t, 0.0) / t_omega;
    const double frac = shape == OmegaRampShape::linear_field ? s : std::sqrt(s);
    return {delta_i, omega_nominal * frac};
  }
  if (t < t_omega + t_delta) return {delta_i + delta_dot * (t - t_omega), omega_nominal};
  return {delta_f, omega_nominal};
}

DriveRates RampProtocol::rates_at(double t) const {
  if (t < t_omega) {
    if (shape == OmegaRampShape::linear_field) return {0.0, omega_nominal / t_omega};
    const double s = std::max(t, 0.0) / t_omega;
    return {0.0, 0.5 * omega_nominal / (t_omega * std::sqrt(s))};
  }
  if (t < t_omega + t_delta) return {delta_dot, 0.0};
  return {0.0, 0.0};
}

}  // namespace zeno
