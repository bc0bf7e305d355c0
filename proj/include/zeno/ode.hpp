#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <type_traits>

#include <Eigen/Core>

namespace zeno {

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-13;
  double initial_step = 0.0;  // 0 picks a step from the initial derivative
  double max_step = std::numeric_limits<double>::infinity();
  long max_steps = 200'000'000;
};

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double last_good_time)
      : std::runtime_error(what + " (last good t = " + std::to_string(last_good_time) + " s)"),
        last_good_time_(last_good_time) {}
  double last_good_time() const { return last_good_time_; }

 private:
  double last_good_time_;
};

/// One accepted step, enough for cubic Hermite interpolation inside it.
template <class State>
struct StepRecord {
  double t0 = 0.0;
  double t1 = 0.0;
  State y0, f0, y1, f1;
};

template <class State>
State hermite(const StepRecord<State>& s, double t) {
  const double h = s.t1 - s.t0;
  const double u = (t - s.t0) / h;
  const double u2 = u * u;
  const double u3 = u2 * u;
  return (2 * u3 - 3 * u2 + 1) * s.y0 + (u3 - 2 * u2 + u) * h * s.f0 + (-2 * u3 + 3 * u2) * s.y1 +
         (u3 - u2) * h * s.f1;
}

namespace detail {

template <class State>
auto real_view(const State& s) {
  static_assert(std::is_same_v<typename State::Scalar, std::complex<double>>,
                "integrator states are complex<double> Eigen objects");
  return Eigen::Map<const Eigen::ArrayXd>(reinterpret_cast<const double*>(s.data()), 2 * s.size());
}

}  // namespace detail

/// Adaptive Dormand-Prince 5(4) integrator with FSAL, for fixed-size complex
/// Eigen states. `advance_to` always lands exactly on the requested time, so
/// ramp breakpoints and sample times are hit without interpolation. Works in
/// either time direction.
template <class State, class Rhs>
class DormandPrince {
 public:
  DormandPrince(Rhs rhs, double t0, State y0, OdeOptions options = {})
      : rhs_(std::move(rhs)), options_(options), t_(t0), y_(std::move(y0)) {
    f_ = rhs_(t_, y_);
  }

  double time() const { return t_; }
  const State& state() const { return y_; }
  const State& derivative() const { return f_; }
  long accepted_steps() const { return accepted_; }
  long rejected_steps() const { return rejected_; }

  /// Calls on_step(const StepRecord<State>&) after every accepted step; a
  /// false return stops integration there and advance_to returns false.
  template <class OnStep>
  bool advance_to(double t_target, OnStep&& on_step) {
    const double span = t_target - t_;
    // Targets within a few ulps of the current time count as reached.
    if (std::abs(span) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t_))) {
      t_ = t_target;
      return true;
    }
    const double dir = span > 0 ? 1.0 : -1.0;
    if (h_ == 0.0 || (h_ > 0) != (dir > 0)) h_ = dir * initial_step(std::abs(span));

    while (dir * (t_target - t_) > 0.0) {
      if (accepted_ + rejected_ >= options_.max_steps) {
        throw IntegrationError("integrator step budget exhausted", t_);
      }
      double h = dir * std::min({std::abs(h_), options_.max_step});
      const double remaining = t_target - t_;
      bool last = false;
      if (std::abs(h) >= std::abs(remaining) * (1.0 - 1e-12)) {
        h = remaining;
        last = true;
      }
      if (std::abs(h) <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t_))) {
        throw IntegrationError("step size underflow; tolerance not reachable", t_);
      }

      const double err = attempt(h);
      if (!(err <= 1.0)) {
        ++rejected_;
        const double fac = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
        h_ = h * fac;
        continue;
      }

      ++accepted_;
      StepRecord<State> rec{t_, last ? t_target : t_ + h, y_, f_, y_new_, f_new_};
      t_ = rec.t1;
      y_ = y_new_;
      f_ = f_new_;
      const double fac = err > 0.0 ? std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2))) : 5.0;
      // A step shortened to hit the target does not shrink the natural step.
      if (!last || std::abs(h * fac) > std::abs(h_)) h_ = h * fac;
      if (!on_step(std::as_const(rec))) return false;
    }
    return true;
  }

  bool advance_to(double t_target) {
    return advance_to(t_target, [](const StepRecord<State>&) { return true; });
  }

 private:
  double initial_step(double span) const {
    if (options_.initial_step > 0.0) return std::min(options_.initial_step, span);
    const auto y = detail::real_view(y_);
    const auto f = detail::real_view(f_);
    const Eigen::ArrayXd sc = options_.atol + options_.rtol * y.abs();
    const double d0 = std::sqrt((y / sc).square().mean());
    const double d1 = std::sqrt((f / sc).square().mean());
    double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    return std::min(h, span);
  }

  // One trial step; fills y_new_, f_new_ and returns the scaled error norm.
  double attempt(double h) {
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                     a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                     b6 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    const State& k1 = f_;
    const State k2 = rhs_(t_ + h / 5, (y_ + h * a21 * k1).eval());
    const State k3 = rhs_(t_ + 3 * h / 10, (y_ + h * (a31 * k1 + a32 * k2)).eval());
    const State k4 = rhs_(t_ + 4 * h / 5, (y_ + h * (a41 * k1 + a42 * k2 + a43 * k3)).eval());
    const State k5 = rhs_(t_ + 8 * h / 9,
                          (y_ + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)).eval());
    const State k6 = rhs_(t_ + h, (y_ + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)).eval());
    y_new_ = y_ + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    f_new_ = rhs_(t_ + h, y_new_);
    const State err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * f_new_);

    const auto y0 = detail::real_view(y_);
    const auto y1 = detail::real_view(y_new_);
    const auto e = detail::real_view(err);
    const Eigen::ArrayXd sc = options_.atol + options_.rtol * y0.abs().max(y1.abs());
    return std::sqrt((e / sc).square().mean());
  }

  Rhs rhs_;
  OdeOptions options_;
  double t_;
  State y_, f_, y_new_, f_new_;
  double h_ = 0.0;
  long accepted_ = 0;
  long rejected_ = 0;
};

}  // namespace zeno
