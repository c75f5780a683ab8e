/*
 * synthesis.hh
 *
 * reachability-game controller synthesis on finite transition systems
 * with adversarial nondeterminism, waypoint-sequence specifications,
 * and refinement to the continuous system by closed-loop simulation
 * with an eps-tube check at sampling instants
 */

#ifndef ABSIM_SYNTHESIS_HH_
#define ABSIM_SYNTHESIS_HH_

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "absim/abstraction.hh"
#include "absim/integrate.hh"
#include "absim/transition_system.hh"

namespace absim {

struct SequenceSpec {
  std::vector<std::vector<int>> legs; /* ordered target state sets */
  std::vector<int> safe;              /* empty: all states allowed */
};

/* one solved reachability leg: value[q] is the number of steps to the
 * target (-1 outside the winning set), policy[q] the chosen label */
struct ReachResult {
  std::vector<int> value;
  std::vector<int> policy;
  std::vector<int> winning; /* ascending */
};

/* states q admitting a label whose successor set is non-empty and
 * entirely inside W (adversarial nondeterminism) */
inline std::vector<int> controllable_pre(const TransitionSystem& ts, const std::vector<int>& w) {
  std::vector<char> in_w(static_cast<std::size_t>(ts.num_states()), 0);
  for (int q : w) {
    if (q < 0 || q >= ts.num_states()) throw Error(errc::argument, "state index out of range");
    in_w[static_cast<std::size_t>(q)] = 1;
  }
  std::vector<int> out;
  for (int q = 0; q < ts.num_states(); ++q) {
    auto edges = ts.out(q);
    std::size_t i = 0;
    bool found = false;
    while (i < edges.size() && !found) {
      const int label = edges[i].label;
      bool all_in = true;
      for (; i < edges.size() && edges[i].label == label; ++i)
        if (!in_w[static_cast<std::size_t>(edges[i].to)]) all_in = false;
      found = all_in;
    }
    if (found) out.push_back(q);
  }
  return out;
}

/* backward fixed point W0 = target, W_{k+1} = W_k u (pre(W_k) n safe);
 * each winning state is mapped, at its first inclusion round, to the
 * label with the smallest worst-case landing distance (ties: smallest
 * label index), so the refined trajectory keeps the largest margin */
inline ReachResult solve_reach(const TransitionSystem& ts, const std::vector<int>& target,
                               const std::vector<int>& safe = {}) {
  const int nq = ts.num_states();
  std::vector<char> is_safe(static_cast<std::size_t>(nq), safe.empty() ? 1 : 0);
  for (int q : safe) {
    if (q < 0 || q >= nq) throw Error(errc::argument, "safe state index out of range");
    is_safe[static_cast<std::size_t>(q)] = 1;
  }
  ReachResult res;
  res.value.assign(static_cast<std::size_t>(nq), -1);
  res.policy.assign(static_cast<std::size_t>(nq), -1);
  for (int q : target) {
    if (q < 0 || q >= nq) throw Error(errc::argument, "target state index out of range");
    if (!is_safe[static_cast<std::size_t>(q)])
      throw Error(errc::argument, "target must be contained in the safe set");
    res.value[static_cast<std::size_t>(q)] = 0;
  }

  for (int round = 1;; ++round) {
    bool grew = false;
    for (int q = 0; q < nq; ++q) {
      if (res.value[static_cast<std::size_t>(q)] >= 0 || !is_safe[static_cast<std::size_t>(q)])
        continue;
      auto edges = ts.out(q);
      int best_label = -1;
      double best_dist = std::numeric_limits<double>::infinity();
      std::size_t i = 0;
      while (i < edges.size()) {
        const int label = edges[i].label;
        bool all_in = true;
        double worst = 0.0;
        for (; i < edges.size() && edges[i].label == label; ++i) {
          const int v = res.value[static_cast<std::size_t>(edges[i].to)];
          if (v < 0 || v >= round) all_in = false;
          worst = std::max(worst, edges[i].dist);
        }
        if (all_in && worst < best_dist) {
          best_dist = worst;
          best_label = label;
        }
      }
      if (best_label >= 0) {
        res.value[static_cast<std::size_t>(q)] = round;
        res.policy[static_cast<std::size_t>(q)] = best_label;
        grew = true;
      }
    }
    if (!grew) break;
  }
  for (int q = 0; q < nq; ++q)
    if (res.value[static_cast<std::size_t>(q)] >= 0) res.winning.push_back(q);
  return res;
}

struct Plan {
  int start = 0;
  std::vector<int> labels;    /* label index applied per sampling interval */
  std::vector<int> waypoints; /* abstract state expected at each instant */
  std::vector<ReachResult> legs;
};

/* solve each leg and execute greedily from `start`, concatenating the
 * per-leg label choices; nondeterministic successors resolve to the one
 * nearest the predicted endpoint (ties: smallest state index) */
inline Plan synth_sequence(const TransitionSystem& ts, const SequenceSpec& spec, int start) {
  if (spec.legs.empty()) throw Error(errc::argument, "specification needs at least one leg");
  if (start < 0 || start >= ts.num_states())
    throw Error(errc::argument, "start state index out of range");
  Plan plan;
  plan.start = start;
  for (const auto& leg : spec.legs) {
    if (leg.empty()) throw Error(errc::argument, "empty leg target set");
    plan.legs.push_back(solve_reach(ts, leg, spec.safe));
  }
  int cur = start;
  for (std::size_t li = 0; li < spec.legs.size(); ++li) {
    const auto& leg = plan.legs[li];
    if (leg.value[static_cast<std::size_t>(cur)] < 0)
      throw Error(errc::synthesis, "leg " + std::to_string(li) + " is infeasible from state " +
                                       std::to_string(cur));
    int guard = 0;
    while (leg.value[static_cast<std::size_t>(cur)] > 0) {
      const int label = leg.policy[static_cast<std::size_t>(cur)];
      const auto g = ts.group(cur, label);
      int next = -1;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& tr : g) {
        if (tr.dist < best) {
          best = tr.dist;
          next = tr.to;
        }
      }
      if (next < 0)
        throw Error(errc::synthesis, "controller points at a label with no successors");
      plan.labels.push_back(label);
      plan.waypoints.push_back(next);
      cur = next;
      if (++guard > ts.num_states())
        throw Error(errc::synthesis, "controller failed to make progress");
    }
  }
  return plan;
}

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> inputs; /* input applied at each sampled time */
};

struct TubeInstant {
  int index = 0;
  double time = 0.0;
  int waypoint = 0;
  double distance = 0.0;
  bool ok = false;
};

struct TubeReport {
  bool pass = true;
  double eps = 0.0;
  std::vector<TubeInstant> instants;
};

/* apply each label of the plan as a constant input for tau and compare
 * the continuous state against the abstract waypoint at every sampling
 * instant */
inline std::pair<Trajectory, TubeReport> simulate_closed_loop(
    const ControlSystem& sys, const TransitionSystem& ts, const Plan& plan, const Vec& x0,
    const AbstractionParams& p, int steps = 100, int substeps = 10) {
  p.validate();
  if (plan.labels.size() != plan.waypoints.size())
    throw Error(errc::argument, "plan labels and waypoints disagree in length");
  if (static_cast<int>(x0.size()) != sys.n())
    throw Error(errc::argument, "initial state has wrong dimension");
  const double tol = 1e-12 * std::max(1.0, p.eps);
  if (inf_dist(x0, ts.states[static_cast<std::size_t>(plan.start)]) > p.eps + tol)
    throw Error(errc::argument, "initial state lies outside eps of the plan's start state");

  Trajectory traj;
  TubeReport tube;
  tube.eps = p.eps;
  const Vec zero_u(static_cast<std::size_t>(sys.m()), 0.0);
  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  traj.inputs.push_back(plan.labels.empty() ? zero_u
                                            : ts.labels[static_cast<std::size_t>(plan.labels[0])]);

  Vec x = x0;
  for (std::size_t i = 0; i < plan.labels.size(); ++i) {
    const Vec& u = ts.labels[static_cast<std::size_t>(plan.labels[i])];
    const auto path = flow_path(sys, x, u, p.tau, steps, std::min(substeps, steps));
    for (std::size_t j = 0; j < path.times.size(); ++j) {
      traj.times.push_back(p.tau * static_cast<double>(i) + path.times[j]);
      traj.states.push_back(path.states[j]);
      traj.inputs.push_back(u);
    }
    x = path.states.back();
    TubeInstant inst;
    inst.index = static_cast<int>(i + 1);
    inst.time = p.tau * static_cast<double>(i + 1);
    inst.waypoint = plan.waypoints[i];
    inst.distance = inf_dist(x, ts.states[static_cast<std::size_t>(plan.waypoints[i])]);
    inst.ok = inst.distance <= p.eps + tol;
    tube.pass = tube.pass && inst.ok;
    tube.instants.push_back(inst);
  }
  return {std::move(traj), std::move(tube)};
}

/* feedback variant: re-quantize the continuous state at every instant
 * and look the label up in the current leg's policy; legs advance when
 * the quantized state enters the leg target */
inline std::pair<Trajectory, TubeReport> simulate_feedback(
    const ControlSystem& sys, const TransitionSystem& ts, const SequenceSpec& spec,
    const std::vector<ReachResult>& legs, const Vec& x0, const AbstractionParams& p,
    int steps = 100, int substeps = 10, int max_intervals = 1000) {
  p.validate();
  if (legs.size() != spec.legs.size())
    throw Error(errc::argument, "one solved leg per specification leg required");
  Trajectory traj;
  TubeReport tube;
  tube.eps = p.eps;
  const Vec zero_u(static_cast<std::size_t>(sys.m()), 0.0);
  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  traj.inputs.push_back(zero_u);

  auto quantize = [&](const Vec& x) {
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (int q = 0; q < ts.num_states(); ++q) {
      const double d = inf_dist(x, ts.states[static_cast<std::size_t>(q)]);
      if (d < bd) {
        bd = d;
        best = q;
      }
    }
    return best;
  };

  Vec x = x0;
  std::size_t leg = 0;
  int instant = 0;
  while (leg < spec.legs.size() && instant < max_intervals) {
    const int q = quantize(x);
    const auto& target = spec.legs[leg];
    if (std::find(target.begin(), target.end(), q) != target.end()) {
      ++leg;
      continue;
    }
    const int label = legs[leg].policy[static_cast<std::size_t>(q)];
    if (label < 0)
      throw Error(errc::synthesis, "feedback run left the winning set of leg " +
                                       std::to_string(leg) + " at state " + std::to_string(q));
    const Vec& u = ts.labels[static_cast<std::size_t>(label)];
    const auto path = flow_path(sys, x, u, p.tau, steps, std::min(substeps, steps));
    for (std::size_t j = 0; j < path.times.size(); ++j) {
      traj.times.push_back(p.tau * instant + path.times[j]);
      traj.states.push_back(path.states[j]);
      traj.inputs.push_back(u);
    }
    x = path.states.back();
    ++instant;
    TubeInstant inst;
    inst.index = instant;
    inst.time = p.tau * instant;
    inst.waypoint = quantize(x);
    inst.distance = inf_dist(x, ts.states[static_cast<std::size_t>(inst.waypoint)]);
    inst.ok = inst.distance <= p.eps;
    tube.pass = tube.pass && inst.ok;
    tube.instants.push_back(inst);
  }
  if (leg < spec.legs.size())
    throw Error(errc::synthesis, "feedback run exhausted the interval budget before finishing");
  return {std::move(traj), std::move(tube)};
}

}  // namespace absim

#endif /* ABSIM_SYNTHESIS_HH_ */
