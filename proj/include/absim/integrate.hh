/*
 * integrate.hh
 *
 * classic fixed-step Runge-Kutta-4 under a constant input, plus a
 * step-halving (Richardson) estimate of the integration error budget nu
 */

#ifndef ABSIM_INTEGRATE_HH_
#define ABSIM_INTEGRATE_HH_

#include <cmath>
#include <string>
#include <vector>

#include "absim/system.hh"

namespace absim {

namespace detail {

/* one RK4 step of width h in place; scratch holds 5n doubles */
inline void rk4_step(const ControlSystem& sys, double* x, const double* u, double h,
                     double* scratch) {
  const int n = sys.n();
  double* k1 = scratch;
  double* k2 = k1 + n;
  double* k3 = k2 + n;
  double* k4 = k3 + n;
  double* xt = k4 + n;
  sys.eval_field_unchecked(x, u, k1);
  for (int i = 0; i < n; ++i) xt[i] = x[i] + 0.5 * h * k1[i];
  sys.eval_field_unchecked(xt, u, k2);
  for (int i = 0; i < n; ++i) xt[i] = x[i] + 0.5 * h * k2[i];
  sys.eval_field_unchecked(xt, u, k3);
  for (int i = 0; i < n; ++i) xt[i] = x[i] + h * k3[i];
  sys.eval_field_unchecked(xt, u, k4);
  for (int i = 0; i < n; ++i)
    x[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

}  // namespace detail

/* state reached at time tau from x0 under the constant input u */
inline Vec flow(const ControlSystem& sys, const Vec& x0, const Vec& u, double tau, int steps) {
  if (static_cast<int>(x0.size()) != sys.n())
    throw Error(errc::argument, "initial state has wrong dimension");
  sys.check_input(u);
  if (steps < 1) throw Error(errc::argument, "steps must be at least 1");
  if (tau < 0.0) throw Error(errc::argument, "tau must be nonnegative");
  Vec x = x0;
  if (tau == 0.0) return x;
  const double h = tau / steps;
  std::vector<double> scratch(5 * static_cast<std::size_t>(sys.n()));
  for (int s = 0; s < steps; ++s) {
    try {
      detail::rk4_step(sys, x.data(), u.data(), h, scratch.data());
    } catch (const Error& e) {
      throw Error(errc::divergence,
                  "integration diverged at step " + std::to_string(s) + ": " + e.what());
    }
    for (double c : x)
      if (!std::isfinite(c))
        throw Error(errc::divergence,
                    "integration diverged at step " + std::to_string(s));
  }
  return x;
}

struct FlowPath {
  std::vector<double> times;
  std::vector<Vec> states;
};

/* as flow, recording `record_points` evenly spaced intermediate states
 * (the endpoint included, the initial state not) */
inline FlowPath flow_path(const ControlSystem& sys, const Vec& x0, const Vec& u, double tau,
                          int steps, int record_points) {
  if (record_points < 1 || record_points > steps)
    throw Error(errc::argument, "record_points must lie in [1, steps]");
  sys.check_input(u);
  if (static_cast<int>(x0.size()) != sys.n())
    throw Error(errc::argument, "initial state has wrong dimension");
  FlowPath path;
  if (tau < 0.0) throw Error(errc::argument, "tau must be nonnegative");
  Vec x = x0;
  if (tau == 0.0) {
    path.times.push_back(0.0);
    path.states.push_back(x);
    return path;
  }
  const double h = tau / steps;
  std::vector<double> scratch(5 * static_cast<std::size_t>(sys.n()));
  int next_record = 1;
  for (int s = 0; s < steps; ++s) {
    try {
      detail::rk4_step(sys, x.data(), u.data(), h, scratch.data());
    } catch (const Error& e) {
      throw Error(errc::divergence,
                  "integration diverged at step " + std::to_string(s) + ": " + e.what());
    }
    for (double c : x)
      if (!std::isfinite(c))
        throw Error(errc::divergence,
                    "integration diverged at step " + std::to_string(s));
    if ((s + 1) == (next_record * steps) / record_points) {
      path.times.push_back(h * (s + 1));
      path.states.push_back(x);
      ++next_record;
    }
  }
  return path;
}

/* advisory integration-error budget: 10 * 16/15 * max step-halving
 * difference over the supplied samples (Richardson for order 4) */
inline double estimate_nu(const ControlSystem& sys, const std::vector<Vec>& states,
                          const std::vector<Vec>& labels, double tau, int steps) {
  if (states.empty() || labels.empty())
    throw Error(errc::argument, "estimate_nu needs non-empty state and label samples");
  if (tau == 0.0) return 0.0;
  double worst = 0.0;
  for (const auto& q : states)
    for (const auto& l : labels) {
      const Vec a = flow(sys, q, l, tau, steps);
      const Vec b = flow(sys, q, l, tau, 2 * steps);
      worst = std::max(worst, inf_dist(a, b));
    }
  return 10.0 * worst * (16.0 / 15.0);
}

}  // namespace absim

#endif /* ABSIM_INTEGRATE_HH_ */
