#include "flicker/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "flicker/errors.hpp"

namespace flicker::dynamics {

double PolyDrift::poly(double x) const {
  // Horner over a + bx + cx^2 + ... + gx^6, then one extra x.
  return x * (a + x * (b + x * (c + x * (d + x * (e + x * (f + x * g))))));
}

double PolyDrift::poly_deriv(double x) const {
  return a + x * (2 * b + x * (3 * c + x * (4 * d + x * (5 * e + x * (6 * f + x * 7 * g)))));
}

const char* family_name(Family f) {
  switch (f) {
    case Family::cubic: return "cubic";
    case Family::exponential: return "exponential";
    case Family::tanh: return "tanh";
    case Family::hill: return "hill";
    case Family::logistic: return "logistic";
    case Family::arctan: return "arctan";
  }
  return "?";
}

Family family_from_name(const std::string& name) {
  for (Family f : {Family::cubic, Family::exponential, Family::tanh,
                   Family::hill, Family::logistic, Family::arctan}) {
    if (name == family_name(f)) return f;
  }
  throw DataError("unknown drift family: " + name);
}

NamedDrift make_named(Family family, double b) {
  return make_named(family, b, 1.5);
}

NamedDrift make_named(Family family, double b, double cubic_d) {
  NamedDrift d;
  d.family = family;
  d.b = b;
  if (family == Family::cubic) d.fixed_params["D"] = cubic_d;
  return d;
}

namespace {

double cubic_d_of(const NamedDrift& d) {
  auto it = d.fixed_params.find("D");
  if (it == d.fixed_params.end() || d.fixed_params.size() != 1)
    throw DataError("cubic drift requires exactly the fixed parameter D");
  return it->second;
}

double fixed_d_or_check(const NamedDrift& d) {
  if (d.family == Family::cubic) return cubic_d_of(d);
  if (!d.fixed_params.empty())
    throw DataError(std::string(family_name(d.family)) +
                    " drift takes no fixed parameters");
  return 0.0;
}

void check_finite_state(double x) {
  if (!std::isfinite(x)) throw NumericError("drift evaluated at non-finite state");
}

}  // namespace

double nonlinearity(Family family, double x, double cubic_d) {
  switch (family) {
    case Family::cubic: return cubic_d * x - x * x * x;
    case Family::exponential: return 2.0 * (1.0 - std::exp(-2.0 * x * x));
    case Family::tanh: return 2.0 * std::tanh(x);
    case Family::hill: {
      const double x6 = x * x * x * x * x * x;
      return 1.5 * x6 / (1.0 + x6);
    }
    case Family::logistic: return 1.0 / (1.0 + std::exp(-10.0 * x));
    case Family::arctan: return std::atan(10.0 * x);
  }
  return 0.0;
}

double nonlinearity_deriv(Family family, double x, double cubic_d) {
  switch (family) {
    case Family::cubic: return cubic_d - 3.0 * x * x;
    case Family::exponential: return 8.0 * x * std::exp(-2.0 * x * x);
    case Family::tanh: {
      const double c = std::cosh(x);
      return 2.0 / (c * c);
    }
    case Family::hill: {
      const double x5 = x * x * x * x * x;
      const double x6 = x5 * x;
      const double denom = 1.0 + x6;
      return 9.0 * x5 / (denom * denom);
    }
    case Family::logistic: {
      const double s = 1.0 / (1.0 + std::exp(-10.0 * x));
      return 10.0 * s * (1.0 - s);
    }
    case Family::arctan: return 10.0 / (1.0 + 100.0 * x * x);
  }
  return 0.0;
}

double eval_drift_at(const Drift& drift, double x, double control) {
  check_finite_state(x);
  if (const auto* pd = std::get_if<PolyDrift>(&drift)) {
    return control - x + pd->poly(x);
  }
  const auto& nd = std::get<NamedDrift>(drift);
  return control - x + nonlinearity(nd.family, x, fixed_d_or_check(nd));
}

double eval_drift(const Drift& drift, double x) {
  return eval_drift_at(drift, x, drift_control(drift));
}

double drift_control(const Drift& drift) {
  if (const auto* pd = std::get_if<PolyDrift>(&drift)) return pd->p;
  return std::get<NamedDrift>(drift).b;
}

Schedule Schedule::constant(double value) {
  Schedule s;
  s.kind = Kind::constant;
  s.start_value = value;
  s.end_value = value;
  return s;
}

Schedule Schedule::linear_ramp(double start, double end) {
  Schedule s;
  s.kind = Kind::linear_ramp;
  s.start_value = start;
  s.end_value = end;
  return s;
}

Schedule Schedule::triangular_bump(double base, double peak,
                                   std::pair<double, double> window) {
  Schedule s;
  s.kind = Kind::triangular_bump;
  s.start_value = base;
  s.peak_value = peak;
  s.active_window = window;
  return s;
}

double Schedule::value(double t, double total) const {
  switch (kind) {
    case Kind::constant:
      return start_value;
    case Kind::linear_ramp: {
      if (total <= 0) return start_value;
      const double u = std::clamp(t / total, 0.0, 1.0);
      return start_value + (end_value - start_value) * u;
    }
    case Kind::triangular_bump: {
      if (total <= 0) return start_value;
      const double u = t / total;
      const double lo = active_window.first;
      const double hi = active_window.second;
      if (u <= lo || u >= hi || hi <= lo) return start_value;
      const double mid = 0.5 * (lo + hi);
      const double rise = u < mid ? (u - lo) / (mid - lo) : (hi - u) / (hi - mid);
      return start_value + (peak_value - start_value) * rise;
    }
  }
  return start_value;
}

std::string Schedule::describe() const {
  std::ostringstream out;
  switch (kind) {
    case Kind::constant:
      out << "constant(" << start_value << ")";
      break;
    case Kind::linear_ramp:
      out << "linear_ramp(" << start_value << " -> " << end_value << ")";
      break;
    case Kind::triangular_bump:
      out << "triangular_bump(base=" << start_value << ", peak=" << peak_value
          << ", window=[" << active_window.first << "," << active_window.second
          << "])";
      break;
  }
  return out.str();
}

namespace {

std::string describe_drift(const Drift& drift) {
  std::ostringstream out;
  if (const auto* pd = std::get_if<PolyDrift>(&drift)) {
    out << "poly(a=" << pd->a << ",b=" << pd->b << ",c=" << pd->c
        << ",d=" << pd->d << ",e=" << pd->e << ",f=" << pd->f
        << ",g=" << pd->g << ",p=" << pd->p << ")";
  } else {
    const auto& nd = std::get<NamedDrift>(drift);
    out << family_name(nd.family) << "(b=" << nd.b;
    for (const auto& [k, v] : nd.fixed_params) out << "," << k << "=" << v;
    out << ")";
  }
  return out.str();
}

}  // namespace

Trajectory simulate(const Drift& drift, const Schedule& param_schedule,
                    const Schedule& noise_schedule, double x0,
                    std::size_t steps, double dt, std::uint64_t seed,
                    const SimulateOptions& options) {
  if (steps < 1) throw DataError("simulate: steps must be >= 1");
  if (!(dt > 0)) throw DataError("simulate: dt must be positive");
  check_finite_state(x0);

  Trajectory traj;
  traj.values.resize(steps + 1);
  traj.dt = dt;
  traj.seed = seed;
  {
    std::ostringstream meta;
    meta << "drift=" << describe_drift(drift) << "\n"
         << "param=" << param_schedule.describe() << "\n"
         << "noise=" << noise_schedule.describe();
    traj.drift_meta = meta.str();
  }

  const double total = static_cast<double>(steps) * dt;
  const double sqrt_dt = std::sqrt(dt);
  Rng rng(seed);
  double x = x0;
  traj.values[0] = x;

  auto run = [&](auto&& f) {
    for (std::size_t n = 0; n < steps; ++n) {
      const double t = static_cast<double>(n) * dt;
      const double control = param_schedule.value(t, total);
      const double sigma = noise_schedule.value(t, total);
      x += f(x, control) * dt + sigma * sqrt_dt * rng.gaussian();
      if (!(std::abs(x) <= options.overflow_bound)) {
        std::ostringstream msg;
        msg << "simulate: state overflow (|x| > " << options.overflow_bound
            << ") at step " << (n + 1);
        throw NumericError(msg.str());
      }
      traj.values[n + 1] = x;
    }
  };

  if (const auto* pd = std::get_if<PolyDrift>(&drift)) {
    const PolyDrift local = *pd;
    run([&local](double xs, double control) {
      return control - xs + local.poly(xs);
    });
  } else {
    const auto& nd = std::get<NamedDrift>(drift);
    const Family family = nd.family;
    const double D = fixed_d_or_check(nd);
    run([family, D](double xs, double control) {
      return control - xs + nonlinearity(family, xs, D);
    });
  }
  return traj;
}

namespace {

/// Bisection to |interval| <= tol; assumes f(lo) and f(hi) bracket a root.
template <typename F>
double bisect(F&& f, double lo, double hi, double flo, double tol) {
  for (int iter = 0; iter < 200 && hi - lo > tol; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((flo < 0) != (fm < 0)) {
      hi = mid;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> equilibria(const Drift& drift,
                               std::pair<double, double> interval,
                               std::size_t grid_size) {
  if (grid_size < 2) throw DataError("equilibria: grid_size must be >= 2");
  const double lo = interval.first;
  const double hi = interval.second;
  if (!(hi > lo)) throw DataError("equilibria: degenerate search interval");

  auto f = [&](double x) { return eval_drift(drift, x); };
  const double step = (hi - lo) / static_cast<double>(grid_size - 1);
  std::vector<double> roots;
  double x_prev = lo;
  double f_prev = f(lo);
  for (std::size_t i = 1; i < grid_size; ++i) {
    const double x = (i + 1 == grid_size) ? hi : lo + step * static_cast<double>(i);
    const double fx = f(x);
    if (f_prev == 0.0) {
      roots.push_back(x_prev);
    } else if ((f_prev < 0) != (fx < 0)) {
      roots.push_back(bisect(f, x_prev, x, f_prev, 1e-10));
    }
    x_prev = x;
    f_prev = fx;
  }
  if (f_prev == 0.0) roots.push_back(x_prev);
  std::sort(roots.begin(), roots.end());
  // Exact zeros at grid nodes can also be caught by the neighboring bracket.
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [](double u, double v) { return v - u < 1e-8; }),
              roots.end());
  return roots;
}

namespace {

/// Largest equilibrium of the drift on the default interval; NumericError if
/// the drift has no equilibrium there.
double largest_equilibrium(const Drift& drift) {
  const auto roots = equilibria(drift);
  if (roots.empty())
    throw NumericError("drift has no equilibrium on the search interval");
  return roots.back();
}

}  // namespace

CriticalPoint critical_point(const PolyDrift& drift) {
  const auto roots = equilibria(Drift{drift});
  double x0 = 0;
  bool found = false;
  for (auto it = roots.rbegin(); it != roots.rend(); ++it) {
    if (*it > 0) {
      x0 = *it;
      found = true;
      break;
    }
  }
  if (!found) throw NumericError("critical_point: no positive equilibrium");

  // Walk down from x0 looking for the first crossing of P'(x) = 1.
  auto slope_gap = [&](double x) { return drift.poly_deriv(x) - 1.0; };
  const std::size_t grid = 4001;
  const double step = x0 / static_cast<double>(grid - 1);
  double x_hi = x0;
  double f_hi = slope_gap(x_hi);
  for (std::size_t i = 1; i < grid; ++i) {
    const double x = x0 - step * static_cast<double>(i);
    const double fx = slope_gap(x);
    if (fx == 0.0 || (f_hi < 0) != (fx < 0)) {
      const double x_star =
          fx == 0.0 ? x : bisect(slope_gap, x, x_hi, fx, 1e-10);
      CriticalPoint cp;
      cp.x_star = x_star;
      cp.y_star = drift.poly(x_star);
      cp.p_star = x_star - cp.y_star;
      return cp;
    }
    x_hi = x;
    f_hi = fx;
  }
  throw NumericError("no saddle-node found");
}

double critical_control(const NamedDrift& drift) {
  const double D = fixed_d_or_check(drift);
  const double x0 = largest_equilibrium(Drift{drift});

  // Stationary point of the equilibrium curve b(x) = x - h(x), scanning
  // downward from the current state's branch.
  auto curve_slope = [&](double x) {
    return 1.0 - nonlinearity_deriv(drift.family, x, D);
  };
  const double lo_limit = -20.0;
  const std::size_t grid = 8001;
  const double step = (x0 - lo_limit) / static_cast<double>(grid - 1);
  double x_hi = x0;
  double f_hi = curve_slope(x_hi);
  for (std::size_t i = 1; i < grid; ++i) {
    const double x = x0 - step * static_cast<double>(i);
    const double fx = curve_slope(x);
    if (fx == 0.0 || (f_hi < 0) != (fx < 0)) {
      const double x_fold = fx == 0.0 ? x : bisect(curve_slope, x, x_hi, fx, 1e-8);
      return x_fold - nonlinearity(drift.family, x_fold, D);
    }
    x_hi = x;
    f_hi = fx;
  }
  throw NumericError("critical_control: no stationary point of the equilibrium curve");
}

void write_trajectory_csv(const Trajectory& trajectory,
                          const std::string& csv_path) {
  std::ofstream out(csv_path);
  if (!out) throw DataError("cannot open for writing: " + csv_path);
  out << "t,x\n";
  char line[80];
  for (std::size_t i = 0; i < trajectory.values.size(); ++i) {
    std::snprintf(line, sizeof line, "%.17g,%.17g\n",
                  static_cast<double>(i) * trajectory.dt, trajectory.values[i]);
    out << line;
  }
  if (!out) throw DataError("write failed: " + csv_path);

  std::ofstream meta(csv_path + ".meta");
  if (!meta) throw DataError("cannot open for writing: " + csv_path + ".meta");
  meta << "format=trajectory-meta v1\n"
       << trajectory.drift_meta << "\n"
       << "dt=" << trajectory.dt << "\n"
       << "seed=" << trajectory.seed << "\n"
       << "values=" << trajectory.values.size() << "\n";
}

}  // namespace flicker::dynamics
