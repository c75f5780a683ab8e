/*
 * transition_system.hh
 *
 * finite metric transition systems: indexed states with vector outputs
 * under the infinity norm, indexed labels carrying input vectors, and a
 * nondeterministic labeled transition relation; greatest approximate
 * (bi)simulation relations computed by worklist pruning
 */

#ifndef ABSIM_TRANSITION_SYSTEM_HH_
#define ABSIM_TRANSITION_SYSTEM_HH_

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "absim/system.hh"

namespace absim {

struct Transition {
  int from;
  int label;
  int to;
  /* distance from the predicted flow endpoint to the successor output;
   * zero for hand-built systems */
  double dist = 0.0;

  friend bool operator<(const Transition& a, const Transition& b) {
    if (a.from != b.from) return a.from < b.from;
    if (a.label != b.label) return a.label < b.label;
    return a.to < b.to;
  }
};

class TransitionSystem {
 public:
  std::vector<Vec> states; /* output H(q) per state */
  std::vector<Vec> labels; /* input vector per label */
  std::vector<Transition> transitions;

  int output_dim() const { return states.empty() ? 0 : static_cast<int>(states[0].size()); }
  int num_states() const { return static_cast<int>(states.size()); }
  int num_labels() const { return static_cast<int>(labels.size()); }

  /* sort transitions, validate indices, build the per-state index */
  void finalize() {
    const int nq = num_states();
    const int nl = num_labels();
    for (std::size_t i = 1; i < states.size(); ++i)
      if (states[i].size() != states[0].size())
        throw Error(errc::argument, "state outputs must share one dimension");
    for (std::size_t i = 1; i < labels.size(); ++i)
      if (labels[i].size() != labels[0].size())
        throw Error(errc::argument, "label vectors must share one dimension");
    for (const auto& t : transitions)
      if (t.from < 0 || t.from >= nq || t.to < 0 || t.to >= nq || t.label < 0 || t.label >= nl)
        throw Error(errc::argument, "transition references an invalid state or label index");
    std::sort(transitions.begin(), transitions.end());
    transitions.erase(std::unique(transitions.begin(), transitions.end(),
                                  [](const Transition& a, const Transition& b) {
                                    return a.from == b.from && a.label == b.label && a.to == b.to;
                                  }),
                      transitions.end());
    offsets_.assign(static_cast<std::size_t>(nq) + 1, 0);
    for (const auto& t : transitions) ++offsets_[static_cast<std::size_t>(t.from) + 1];
    for (std::size_t i = 1; i < offsets_.size(); ++i) offsets_[i] += offsets_[i - 1];
  }

  std::span<const Transition> out(int state) const {
    return {transitions.data() + offsets_[static_cast<std::size_t>(state)],
            transitions.data() + offsets_[static_cast<std::size_t>(state) + 1]};
  }

  /* successors of state under label, ascending */
  std::vector<int> successors(int state, int label) const {
    check_state(state);
    if (label < 0 || label >= num_labels())
      throw Error(errc::argument, "label index out of range");
    std::vector<int> out_states;
    for (const auto& t : group(state, label)) out_states.push_back(t.to);
    return out_states;
  }

  /* contiguous transition group of one (state, label) pair */
  std::span<const Transition> group(int state, int label) const {
    auto o = out(state);
    const Transition probe{state, label, -1, 0.0};
    auto lo = std::lower_bound(o.begin(), o.end(), probe);
    auto hi = lo;
    while (hi != o.end() && hi->label == label) ++hi;
    return o.subspan(static_cast<std::size_t>(lo - o.begin()),
                     static_cast<std::size_t>(hi - lo));
  }

  bool finalized() const { return offsets_.size() == states.size() + 1; }

 private:
  std::vector<std::size_t> offsets_;

  void check_state(int q) const {
    if (q < 0 || q >= num_states()) throw Error(errc::argument, "state index out of range");
  }
};

struct ApproxRelation {
  double eps = 0.0;
  std::vector<std::pair<int, int>> pairs; /* sorted */

  bool contains(int a, int b) const {
    return std::binary_search(pairs.begin(), pairs.end(), std::make_pair(a, b));
  }
};

namespace detail {

/* union of successors over all labels, sorted unique; labels do not
 * constrain the relation, only the one-step successor sets do */
inline std::vector<std::vector<int>> successor_union(const TransitionSystem& t) {
  std::vector<std::vector<int>> s(static_cast<std::size_t>(t.num_states()));
  for (const auto& tr : t.transitions) s[static_cast<std::size_t>(tr.from)].push_back(tr.to);
  for (auto& v : s) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return s;
}

inline std::vector<std::vector<int>> predecessor_union(const TransitionSystem& t) {
  std::vector<std::vector<int>> p(static_cast<std::size_t>(t.num_states()));
  for (const auto& tr : t.transitions) p[static_cast<std::size_t>(tr.to)].push_back(tr.from);
  for (auto& v : p) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return p;
}

inline ApproxRelation greatest_relation(const TransitionSystem& t1, const TransitionSystem& t2,
                                        double eps, bool bidirectional) {
  if (eps < 0.0) throw Error(errc::argument, "eps must be nonnegative");
  if (t1.output_dim() != t2.output_dim())
    throw Error(errc::argument, "transition systems must share one output dimension");
  const int n1 = t1.num_states();
  const int n2 = t2.num_states();
  const auto succ1 = successor_union(t1);
  const auto succ2 = successor_union(t2);
  const auto pred1 = predecessor_union(t1);
  const auto pred2 = predecessor_union(t2);

  std::vector<char> rel(static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2), 0);
  auto at = [&](int a, int b) -> char& {
    return rel[static_cast<std::size_t>(a) * static_cast<std::size_t>(n2) +
               static_cast<std::size_t>(b)];
  };
  for (int a = 0; a < n1; ++a)
    for (int b = 0; b < n2; ++b)
      if (inf_dist(t1.states[static_cast<std::size_t>(a)],
                   t2.states[static_cast<std::size_t>(b)]) <= eps)
        at(a, b) = 1;

  auto ok = [&](int a, int b) {
    for (int p1 : succ1[static_cast<std::size_t>(a)]) {
      bool matched = false;
      for (int p2 : succ2[static_cast<std::size_t>(b)])
        if (at(p1, p2)) {
          matched = true;
          break;
        }
      if (!matched) return false;
    }
    if (bidirectional) {
      for (int p2 : succ2[static_cast<std::size_t>(b)]) {
        bool matched = false;
        for (int p1 : succ1[static_cast<std::size_t>(a)])
          if (at(p1, p2)) {
            matched = true;
            break;
          }
        if (!matched) return false;
      }
    }
    return true;
  };

  /* worklist: re-examine only predecessors of deleted pairs */
  std::vector<std::pair<int, int>> work;
  for (int a = 0; a < n1; ++a)
    for (int b = 0; b < n2; ++b)
      if (at(a, b)) work.emplace_back(a, b);
  while (!work.empty()) {
    const auto [a, b] = work.back();
    work.pop_back();
    if (!at(a, b)) continue;
    if (ok(a, b)) continue;
    at(a, b) = 0;
    for (int pa : pred1[static_cast<std::size_t>(a)])
      for (int pb : pred2[static_cast<std::size_t>(b)])
        if (at(pa, pb)) work.emplace_back(pa, pb);
  }

  ApproxRelation r;
  r.eps = eps;
  for (int a = 0; a < n1; ++a)
    for (int b = 0; b < n2; ++b)
      if (at(a, b)) r.pairs.emplace_back(a, b);
  return r;
}

}  // namespace detail

/* greatest eps-approximate bisimulation relation (possibly empty) */
inline ApproxRelation greatest_bisim(const TransitionSystem& t1, const TransitionSystem& t2,
                                     double eps) {
  return detail::greatest_relation(t1, t2, eps, /*bidirectional=*/true);
}

/* greatest eps-approximate simulation relation of t1 by t2 */
inline ApproxRelation greatest_sim(const TransitionSystem& t1, const TransitionSystem& t2,
                                   double eps) {
  return detail::greatest_relation(t1, t2, eps, /*bidirectional=*/false);
}

/* bisimilar iff the greatest relation is total in both directions */
inline bool is_bisimilar(const TransitionSystem& t1, const TransitionSystem& t2, double eps) {
  const auto r = greatest_bisim(t1, t2, eps);
  std::vector<char> left(static_cast<std::size_t>(t1.num_states()), 0);
  std::vector<char> right(static_cast<std::size_t>(t2.num_states()), 0);
  for (const auto& [a, b] : r.pairs) {
    left[static_cast<std::size_t>(a)] = 1;
    right[static_cast<std::size_t>(b)] = 1;
  }
  return std::all_of(left.begin(), left.end(), [](char c) { return c != 0; }) &&
         std::all_of(right.begin(), right.end(), [](char c) { return c != 0; });
}

}  // namespace absim

#endif /* ABSIM_TRANSITION_SYSTEM_HH_ */
