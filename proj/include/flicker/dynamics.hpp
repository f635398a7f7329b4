#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "flicker/rng.hpp"

namespace flicker::dynamics {

/// Drift of the training family:
///   f(x) = p - x + a*x + b*x^2 + c*x^3 + d*x^4 + e*x^5 + f*x^6 + g*x^7.
/// The training sampler always produces b == 0 and g < 0 (confining tails).
struct PolyDrift {
  double a = 0, b = 0, c = 0, d = 0, e = 0, f = 0, g = 0;
  double p = 0;  // control parameter

  /// Polynomial term P(x) = a*x + ... + g*x^7 (without p and -x).
  double poly(double x) const;
  /// P'(x).
  double poly_deriv(double x) const;
};

enum class Family { cubic, exponential, tanh, hill, logistic, arctan };

const char* family_name(Family f);
Family family_from_name(const std::string& name);

/// One of the six held-out test systems:  f(x) = b - x + h(x), with h the
/// family nonlinearity. `fixed_params` holds exactly the named constants the
/// family's formula uses (cubic: D; the others have none).
struct NamedDrift {
  Family family = Family::cubic;
  double b = 0;  // control parameter
  std::map<std::string, double> fixed_params;
};

/// NamedDrift with validated fixed parameters (cubic gets D, default 1.5).
NamedDrift make_named(Family family, double b);
NamedDrift make_named(Family family, double b, double cubic_d);

/// Nonlinearity h(x) of a named family and its derivative h'(x).
double nonlinearity(Family family, double x, double cubic_d);
double nonlinearity_deriv(Family family, double x, double cubic_d);

using Drift = std::variant<PolyDrift, NamedDrift>;

/// Deterministic part of dx/dt at state x, using the drift's embedded
/// control parameter. Pure; throws NumericError on non-finite input.
double eval_drift(const Drift& drift, double x);

/// Same, with the control parameter (p or b) overridden.
double eval_drift_at(const Drift& drift, double x, double control);

/// Control value of the drift as stored (p for PolyDrift, b for NamedDrift).
double drift_control(const Drift& drift);

/// Time profile for a control parameter or noise amplitude over [0, T].
struct Schedule {
  enum class Kind { constant, linear_ramp, triangular_bump };

  Kind kind = Kind::constant;
  double start_value = 0;
  double end_value = 0;   // linear_ramp only
  double peak_value = 0;  // triangular_bump only
  std::pair<double, double> active_window = {0.0, 1.0};  // fractions of T

  static Schedule constant(double value);
  static Schedule linear_ramp(double start, double end);
  static Schedule triangular_bump(double base, double peak,
                                  std::pair<double, double> window);

  /// Value at time t for total duration T.
  double value(double t, double total) const;
  std::string describe() const;
};

struct Trajectory {
  std::vector<double> values;  // x(t), length steps + 1, x0 first
  double dt = 0;
  std::uint64_t seed = 0;
  std::string drift_meta;  // human-readable drift + schedule description
};

struct CriticalPoint {
  double x_star = 0;
  double p_star = 0;
  double y_star = 0;  // x_star - p_star
};

struct SimulateOptions {
  double overflow_bound = 1e6;
};

/// Euler-Maruyama path:
///   x_{n+1} = x_n + f(x_n; param(t_n)) dt + sigma(t_n) sqrt(dt) z_n,
/// t_n = n*dt, z_n standard normal from SplitMix64(seed). The state is not
/// clamped; |x| beyond the overflow bound raises NumericError naming the step.
Trajectory simulate(const Drift& drift, const Schedule& param_schedule,
                    const Schedule& noise_schedule, double x0,
                    std::size_t steps, double dt, std::uint64_t seed,
                    const SimulateOptions& options = {});

/// All sign-change-bracketed roots of eval_drift on [interval.first,
/// interval.second], bisected to 1e-10 and sorted ascending.
std::vector<double> equilibria(const Drift& drift,
                               std::pair<double, double> interval = {-20, 20},
                               std::size_t grid_size = 4001);

/// Saddle-node of the training drift: the largest x* in (0, x0) with
/// P'(x*) = 1, where x0 is the largest positive equilibrium at the embedded
/// p. Returns p* = x* - P(x*) and y* = P(x*). Throws NumericError when no
/// saddle-node exists (the sampler then redraws).
CriticalPoint critical_point(const PolyDrift& drift);

/// Saddle-node control value for a named family: starting from the largest
/// equilibrium at the embedded b, walks down the equilibrium curve
/// b(x) = x - h(x) to its first stationary point and returns b there
/// (refined to 1e-8). This is the fold the upper state hits as b decreases.
double critical_control(const NamedDrift& drift);

/// CSV export with header `t,x` (full-precision decimals) plus a
/// human-readable key-value metadata sidecar at `csv_path + ".meta"`.
void write_trajectory_csv(const Trajectory& trajectory,
                          const std::string& csv_path);

}  // namespace flicker::dynamics
