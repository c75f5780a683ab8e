/*
 * abstraction.hh
 *
 * construction of the finite symbolic model of a digital control
 * system: states are the eta-lattice of the working box, labels the
 * mu-lattice of the input box, and q -l-> p whenever the numerical
 * flow endpoint from q under l lies within eta/2 - nu of p; plus an
 * empirical check of the candidate bisimulation relation between the
 * sampled concrete system and the symbolic model
 */

#ifndef ABSIM_ABSTRACTION_HH_
#define ABSIM_ABSTRACTION_HH_

#include <chrono>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "absim/integrate.hh"
#include "absim/lattice.hh"
#include "absim/transition_system.hh"

namespace absim {

struct BuildOptions {
  int steps = 100; /* RK4 steps per sampling interval */
  bool force = false;
  int threads = 0; /* 0: hardware concurrency */
};

struct BuildTiming {
  double lattice_seconds = 0.0;
  double integrate_seconds = 0.0;
  double merge_seconds = 0.0;
};

namespace detail {

/* per-axis index ranges of the state lattice covering the working box */
struct StateGrid {
  std::vector<AxisWindow> windows;
  std::vector<std::int64_t> strides; /* lex order: first axis most significant */
  double step;

  std::int64_t size() const {
    std::int64_t s = 1;
    for (const auto& w : windows) s *= w.k_hi - w.k_lo + 1;
    return s;
  }

  /* indices of lattice states within the closed inf-ball of radius r
   * around x (relative tolerance on the ball test), ascending */
  void ball(const double* x, int n, double r, std::vector<int>& out) const {
    out.clear();
    thread_local std::vector<std::int64_t> klo, khi, cur;
    klo.resize(static_cast<std::size_t>(n));
    khi.resize(static_cast<std::size_t>(n));
    cur.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const double tlo = (x[i] - r) / step;
      const double thi = (x[i] + r) / step;
      std::int64_t lo = static_cast<std::int64_t>(
          std::ceil(tlo - 1e-12 * std::max(1.0, std::fabs(tlo))));
      std::int64_t hi = static_cast<std::int64_t>(
          std::floor(thi + 1e-12 * std::max(1.0, std::fabs(thi))));
      lo = std::max(lo, windows[static_cast<std::size_t>(i)].k_lo);
      hi = std::min(hi, windows[static_cast<std::size_t>(i)].k_hi);
      if (hi < lo) return; /* ball misses the lattice on this axis */
      klo[static_cast<std::size_t>(i)] = lo;
      khi[static_cast<std::size_t>(i)] = hi;
      cur[static_cast<std::size_t>(i)] = lo;
    }
    for (;;) {
      std::int64_t idx = 0;
      for (int i = 0; i < n; ++i)
        idx += (cur[static_cast<std::size_t>(i)] - windows[static_cast<std::size_t>(i)].k_lo) *
               strides[static_cast<std::size_t>(i)];
      out.push_back(static_cast<int>(idx));
      int i = n - 1;
      for (; i >= 0; --i) {
        if (++cur[static_cast<std::size_t>(i)] <= khi[static_cast<std::size_t>(i)]) break;
        cur[static_cast<std::size_t>(i)] = klo[static_cast<std::size_t>(i)];
      }
      if (i < 0) break;
    }
  }
};

inline StateGrid make_state_grid(const Box& box, double step) {
  StateGrid g;
  g.step = step;
  for (const auto& iv : box) g.windows.push_back(axis_window(iv.lo, iv.hi, step));
  g.strides.assign(g.windows.size(), 1);
  for (std::size_t i = g.windows.size(); i-- > 1;)
    g.strides[i - 1] =
        g.strides[i] * (g.windows[i].k_hi - g.windows[i].k_lo + 1);
  return g;
}

}  // namespace detail

/* build the symbolic model; refuses when the precision inequality fails
 * unless opts.force is set */
inline TransitionSystem build_abstraction(const ControlSystem& sys,
                                          const StabilityCertificate& cert,
                                          const AbstractionParams& p,
                                          const BuildOptions& opts = {},
                                          BuildTiming* timing = nullptr) {
  using clock = std::chrono::steady_clock;
  p.validate();
  if (opts.steps < 1) throw Error(errc::argument, "steps must be at least 1");
  const auto cond = check_iss_condition(cert, p);
  if (!cond.holds && !opts.force)
    throw Error(errc::condition,
                "precision condition beta(eps,tau)+gamma(mu)+eta/2 <= eps fails (lhs = " +
                    std::to_string(cond.lhs) + ", eps = " + std::to_string(p.eps) +
                    "); pass force to build anyway");

  const auto t0 = clock::now();
  TransitionSystem ts;
  ts.states = lattice_points(sys.work_box(), p.eta);
  ts.labels = lattice_points(sys.input_box(), p.mu);
  if (ts.states.empty())
    throw Error(errc::argument, "state lattice is empty: eta too coarse for the working box");
  if (ts.labels.empty())
    throw Error(errc::argument, "input lattice is empty: mu too coarse for the input box");
  const auto grid = detail::make_state_grid(sys.work_box(), p.eta);
  const auto t1 = clock::now();

  const int nq = ts.num_states();
  const int nl = ts.num_labels();
  const double radius = p.eta / 2.0 - p.nu;
  const std::uint64_t total = static_cast<std::uint64_t>(nq) * static_cast<std::uint64_t>(nl);

  unsigned nthreads = opts.threads > 0 ? static_cast<unsigned>(opts.threads)
                                       : std::max(1u, std::thread::hardware_concurrency());
  nthreads = static_cast<unsigned>(std::min<std::uint64_t>(nthreads, total));
  std::vector<std::vector<Transition>> chunks(nthreads);

  detail::parallel_chunks(total, static_cast<int>(nthreads),
                          [&](int tid, std::uint64_t lo, std::uint64_t hi) {
    auto& out = chunks[static_cast<std::size_t>(tid)];
    const int n = sys.n();
    Vec x(static_cast<std::size_t>(n));
    std::vector<double> scratch(5 * static_cast<std::size_t>(n));
    std::vector<int> hits;
    const double h = p.tau / opts.steps;
    for (std::uint64_t k = lo; k < hi; ++k) {
      const int qi = static_cast<int>(k / static_cast<std::uint64_t>(nl));
      const int li = static_cast<int>(k % static_cast<std::uint64_t>(nl));
      const Vec& q = ts.states[static_cast<std::size_t>(qi)];
      const Vec& l = ts.labels[static_cast<std::size_t>(li)];
      x = q;
      for (int s = 0; s < opts.steps; ++s) {
        try {
          detail::rk4_step(sys, x.data(), l.data(), h, scratch.data());
        } catch (const Error& e) {
          throw Error(errc::divergence, "integration diverged at state " + std::to_string(qi) +
                                            ", label " + std::to_string(li) + ": " + e.what());
        }
      }
      for (double c : x)
        if (!std::isfinite(c))
          throw Error(errc::divergence, "integration diverged at state " + std::to_string(qi) +
                                            ", label " + std::to_string(li));
      grid.ball(x.data(), n, radius, hits);
      for (int pi : hits)
        out.push_back(
            {qi, li, pi, inf_dist(x, ts.states[static_cast<std::size_t>(pi)])});
    }
  });
  const auto t2 = clock::now();

  std::size_t count = 0;
  for (const auto& c : chunks) count += c.size();
  ts.transitions.reserve(count);
  for (auto& c : chunks) {
    ts.transitions.insert(ts.transitions.end(), c.begin(), c.end());
    c.clear();
    c.shrink_to_fit();
  }
  ts.finalize();
  const auto t3 = clock::now();

  if (timing) {
    const auto sec = [](auto d) { return std::chrono::duration<double>(d).count(); };
    timing->lattice_seconds = sec(t1 - t0);
    timing->integrate_seconds = sec(t2 - t1);
    timing->merge_seconds = sec(t3 - t2);
  }
  return ts;
}

/* ---- empirical relation check ---- */

struct VerifyOptions {
  int init_samples = 50;
  int horizon = 3;
  std::uint64_t seed = 0;
  int label_samples = 5; /* uniform sub-grid of the label set */
  int steps = 100;
};

struct VerifyViolation {
  int run = 0;
  int round = 0;
  std::string kind; /* "uncovered", "blocked", "forward", "backward" */
  int state = 0;    /* abstract state of the pair */
  int label = -1;
  double distance = 0.0;
  Vec x; /* concrete state when detected */
};

struct VerifyReport {
  bool pass = false;
  int runs = 0;
  std::uint64_t checks = 0;
  double max_distance = 0.0; /* largest matched-pair output distance seen */
  std::optional<VerifyViolation> first;
};

/* draw initial states in X, pair each with every lattice state within
 * eps, then for `horizon` rounds check both bisimulation conditions
 * along concrete flows and abstract transitions, matching labels as in
 * the digital construction (l1 = l2) */
inline VerifyReport verify_relation(const ControlSystem& sys, const TransitionSystem& ts,
                                    const AbstractionParams& p, const VerifyOptions& opts = {}) {
  p.validate();
  if (opts.init_samples < 1) throw Error(errc::argument, "need at least one initial sample");
  if (opts.horizon < 0) throw Error(errc::argument, "horizon must be nonnegative");
  if (opts.label_samples < 1) throw Error(errc::argument, "need at least one label sample");
  const int n = sys.n();
  const auto grid = detail::make_state_grid(sys.work_box(), p.eta);
  const double tol = 1e-12 * std::max(1.0, p.eps);

  /* uniform label sub-grid */
  std::vector<int> sub;
  const int nl = ts.num_labels();
  if (nl < 1) throw Error(errc::argument, "transition system has no labels");
  const int k = std::min(opts.label_samples, nl);
  for (int j = 0; j < k; ++j) {
    const int idx = k == 1 ? 0
                           : static_cast<int>((static_cast<std::int64_t>(j) * (nl - 1)) / (k - 1));
    if (sub.empty() || sub.back() != idx) sub.push_back(idx);
  }

  std::mt19937_64 rng(opts.seed);
  const auto u01 = [&rng]() {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };

  VerifyReport rep;
  rep.pass = true;
  std::vector<int> hits;

  struct Pair {
    Vec x;
    int q;
  };

  for (int s = 0; s < opts.init_samples; ++s) {
    Vec x0(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto& iv = sys.work_box()[static_cast<std::size_t>(i)];
      x0[static_cast<std::size_t>(i)] = iv.lo + (iv.hi - iv.lo) * u01();
    }
    grid.ball(x0.data(), n, p.eps + tol, hits);
    if (hits.empty()) {
      rep.pass = false;
      if (!rep.first) rep.first = {s, 0, "uncovered", -1, -1, 0.0, x0};
      continue;
    }
    for (int q0 : hits) {
      ++rep.runs;
      Pair cur{x0, q0};
      bool alive = true;
      for (int round = 1; round <= opts.horizon && alive; ++round) {
        int advance_label = sub[static_cast<std::size_t>(rng() % sub.size())];
        Vec x_adv;
        int q_adv = -1;
        for (int li : sub) {
          const Vec x1 =
              flow(sys, cur.x, ts.labels[static_cast<std::size_t>(li)], p.tau, opts.steps);
          const auto g = ts.group(cur.q, li);
          ++rep.checks;
          if (g.empty()) {
            rep.pass = false;
            if (!rep.first)
              rep.first = {s, round, "blocked", cur.q, li, 0.0, x1};
            if (li == advance_label) alive = false;
            continue;
          }
          double dmin = std::numeric_limits<double>::infinity();
          double dmax = 0.0;
          int best = -1;
          for (const auto& tr : g) {
            const double d = inf_dist(x1, ts.states[static_cast<std::size_t>(tr.to)]);
            if (d < dmin) {
              dmin = d;
              best = tr.to;
            }
            dmax = std::max(dmax, d);
          }
          rep.max_distance = std::max(rep.max_distance, dmin);
          if (dmin > p.eps + tol) {
            /* the concrete move cannot be matched by any abstract move */
            rep.pass = false;
            if (!rep.first)
              rep.first = {s, round, "forward", cur.q, li, dmin, x1};
          }
          if (dmax > p.eps + tol) {
            /* some abstract move is not tracked by the concrete flow */
            rep.pass = false;
            if (!rep.first)
              rep.first = {s, round, "backward", cur.q, li, dmax, x1};
          }
          if (li == advance_label) {
            if (dmin <= p.eps + tol) {
              x_adv = x1;
              q_adv = best;
            } else {
              alive = false;
            }
          }
        }
        if (alive && q_adv >= 0) {
          cur.x = std::move(x_adv);
          cur.q = q_adv;
        } else {
          alive = false;
        }
      }
    }
  }
  return rep;
}

}  // namespace absim

#endif /* ABSIM_ABSTRACTION_HH_ */
