/*
 * io.hh
 *
 * file formats: canonical JSON artifacts (fixed key order, floats at 17
 * significant digits so identical runs give byte-identical files), the
 * transition-system JSON quintuple, graphviz DOT export, trajectory CSV
 * and the run configuration schema
 */

#ifndef ABSIM_IO_HH_
#define ABSIM_IO_HH_

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "absim/abstraction.hh"
#include "absim/lattice.hh"
#include "absim/synthesis.hh"
#include "absim/system.hh"
#include "absim/transition_system.hh"

namespace absim {

using ordered_json = nlohmann::ordered_json;

namespace io {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline void escape_string(std::string& out, const std::string& s) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

/* canonical dump: insertion-ordered keys, %.17g doubles */
inline void dump_canonical(const ordered_json& j, std::string& out) {
  switch (j.type()) {
    case nlohmann::detail::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        escape_string(out, it.key());
        out += ':';
        dump_canonical(it.value(), out);
      }
      out += '}';
      break;
    }
    case nlohmann::detail::value_t::array: {
      out += '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ',';
        first = false;
        dump_canonical(v, out);
      }
      out += ']';
      break;
    }
    case nlohmann::detail::value_t::string: escape_string(out, j.get_ref<const std::string&>()); break;
    case nlohmann::detail::value_t::boolean: out += j.get<bool>() ? "true" : "false"; break;
    case nlohmann::detail::value_t::number_integer:
      out += std::to_string(j.get<std::int64_t>());
      break;
    case nlohmann::detail::value_t::number_unsigned:
      out += std::to_string(j.get<std::uint64_t>());
      break;
    case nlohmann::detail::value_t::number_float: out += fmt17(j.get<double>()); break;
    default: out += "null";
  }
}

inline std::string dump_canonical(const ordered_json& j) {
  std::string s;
  dump_canonical(j, s);
  s += '\n';
  return s;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(errc::io, "cannot open '" + path + "' for writing");
  f << content;
  if (!f) throw Error(errc::io, "failed writing '" + path + "'");
}

inline ordered_json read_json_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(errc::io, "cannot open '" + path + "'");
  try {
    return ordered_json::parse(f);
  } catch (const std::exception& e) {
    throw Error(errc::config, "malformed JSON in '" + path + "': " + e.what());
  }
}

}  // namespace io

/* ---- transition system <-> JSON ---- */

inline std::string ts_to_json(const TransitionSystem& ts) {
  std::string s;
  s.reserve(64 + ts.transitions.size() * 24);
  s += "{\"format\":\"absim-ts\",\"dim\":";
  s += std::to_string(ts.output_dim());
  auto emit_vecs = [&s](const std::vector<Vec>& vs) {
    s += '[';
    for (std::size_t i = 0; i < vs.size(); ++i) {
      if (i) s += ',';
      s += '[';
      for (std::size_t j = 0; j < vs[i].size(); ++j) {
        if (j) s += ',';
        s += io::fmt17(vs[i][j]);
      }
      s += ']';
    }
    s += ']';
  };
  s += ",\"states\":";
  emit_vecs(ts.states);
  s += ",\"labels\":";
  emit_vecs(ts.labels);
  s += ",\"transitions\":[";
  for (std::size_t i = 0; i < ts.transitions.size(); ++i) {
    const auto& t = ts.transitions[i];
    if (i) s += ',';
    s += '[';
    s += std::to_string(t.from);
    s += ',';
    s += std::to_string(t.label);
    s += ',';
    s += std::to_string(t.to);
    s += ',';
    s += io::fmt17(t.dist);
    s += ']';
  }
  s += "]}\n";
  return s;
}

inline TransitionSystem ts_from_json(const ordered_json& j) {
  TransitionSystem ts;
  if (!j.is_object() || !j.contains("states") || !j.contains("labels") ||
      !j.contains("transitions"))
    throw Error(errc::config, "transition-system JSON needs states, labels and transitions");
  for (const auto& st : j.at("states")) ts.states.push_back(st.get<Vec>());
  for (const auto& lb : j.at("labels")) ts.labels.push_back(lb.get<Vec>());
  for (const auto& tr : j.at("transitions")) {
    if (!tr.is_array() || tr.size() < 3)
      throw Error(errc::config, "each transition needs [from, label, to]");
    Transition t;
    t.from = tr[0].get<int>();
    t.label = tr[1].get<int>();
    t.to = tr[2].get<int>();
    t.dist = tr.size() > 3 ? tr[3].get<double>() : 0.0;
    ts.transitions.push_back(t);
  }
  ts.finalize();
  return ts;
}

inline TransitionSystem load_ts(const std::string& path) {
  return ts_from_json(io::read_json_file(path));
}

/* ---- DOT export ---- */

/* one node per state labeled with its output vector and carrying its
 * 1-based position as an `id` attribute; one edge per transition
 * labeled with the input value */
inline std::string ts_to_dot(const TransitionSystem& ts, const std::string& name = "ts") {
  std::string s = "digraph " + name + " {\n  node [shape=circle];\n";
  auto coord = [](const Vec& v) {
    std::string t = "(";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) t += ", ";
      t += io::fmt_short(v[i]);
    }
    t += ")";
    return t;
  };
  for (int q = 0; q < ts.num_states(); ++q) {
    s += "  q" + std::to_string(q + 1) + " [label=\"" +
         coord(ts.states[static_cast<std::size_t>(q)]) + "\", id=\"" + std::to_string(q + 1) +
         "\"];\n";
  }
  for (const auto& t : ts.transitions) {
    const Vec& l = ts.labels[static_cast<std::size_t>(t.label)];
    std::string lab = l.size() == 1 ? io::fmt_short(l[0]) : coord(l);
    s += "  q" + std::to_string(t.from + 1) + " -> q" + std::to_string(t.to + 1) + " [label=\"" +
         lab + "\"];\n";
  }
  s += "}\n";
  return s;
}

/* ---- trajectory CSV ---- */

inline std::string trajectory_to_csv(const Trajectory& traj, int n, int m) {
  std::string s = "t";
  for (int i = 1; i <= n; ++i) s += ",x" + std::to_string(i);
  for (int i = 1; i <= m; ++i) s += ",u" + std::to_string(i);
  s += '\n';
  for (std::size_t r = 0; r < traj.times.size(); ++r) {
    s += io::fmt17(traj.times[r]);
    for (double c : traj.states[r]) {
      s += ',';
      s += io::fmt17(c);
    }
    for (double c : traj.inputs[r]) {
      s += ',';
      s += io::fmt17(c);
    }
    s += '\n';
  }
  return s;
}

/* ---- report JSON builders ---- */

inline ordered_json condition_to_json(const ConditionReport& r) {
  return ordered_json{{"holds", r.holds}, {"lhs", r.lhs}, {"slack", r.slack}};
}

inline ordered_json lyap_report_to_json(const LyapReport& r) {
  ordered_json j{{"pass", r.pass},
                 {"max_violation", r.max_violation},
                 {"points", r.points}};
  j["worst_x"] = r.worst_x;
  j["worst_y"] = r.worst_y;
  if (!r.worst_u.empty()) {
    j["worst_u"] = r.worst_u;
    j["worst_v"] = r.worst_v;
  }
  return j;
}

inline ordered_json verify_report_to_json(const VerifyReport& r) {
  ordered_json j{{"pass", r.pass},
                 {"runs", r.runs},
                 {"checks", r.checks},
                 {"max_distance", r.max_distance}};
  if (r.first) {
    j["violation"] = ordered_json{{"run", r.first->run},       {"round", r.first->round},
                                  {"kind", r.first->kind},     {"state", r.first->state},
                                  {"label", r.first->label},   {"distance", r.first->distance},
                                  {"x", r.first->x}};
  } else {
    j["violation"] = nullptr;
  }
  return j;
}

inline ordered_json relation_to_json(const ApproxRelation& r, std::optional<bool> bisimilar) {
  ordered_json j{{"eps", r.eps}, {"pairs", ordered_json::array()}};
  for (const auto& [a, b] : r.pairs) j["pairs"].push_back(ordered_json::array({a, b}));
  if (bisimilar) j["bisimilar"] = *bisimilar;
  return j;
}

inline ordered_json tube_report_to_json(const TubeReport& r) {
  ordered_json j{{"pass", r.pass}, {"eps", r.eps}, {"instants", ordered_json::array()}};
  for (const auto& in : r.instants)
    j["instants"].push_back(ordered_json{{"index", in.index},
                                         {"time", in.time},
                                         {"waypoint", in.waypoint},
                                         {"distance", in.distance},
                                         {"ok", in.ok}});
  return j;
}

inline ordered_json plan_to_json(const TransitionSystem& ts, const Plan& plan) {
  ordered_json j{{"start", plan.start},
                 {"labels", plan.labels},
                 {"waypoints", plan.waypoints}};
  j["label_values"] = ordered_json::array();
  for (int li : plan.labels) j["label_values"].push_back(ts.labels[static_cast<std::size_t>(li)]);
  j["legs"] = ordered_json::array();
  for (const auto& leg : plan.legs) {
    ordered_json policy = ordered_json::object();
    for (std::size_t q = 0; q < leg.policy.size(); ++q)
      if (leg.policy[q] >= 0) policy[std::to_string(q)] = leg.policy[q];
    j["legs"].push_back(ordered_json{{"winning", leg.winning}, {"policy", policy}});
  }
  return j;
}

/* ---- configuration ---- */

struct SpecBlock {
  SequenceSpec spec;
  int start = 0;
};

struct SimBlock {
  Vec x0;
  int substeps = 10;
};

struct Config {
  std::optional<ControlSystem> system;
  StabilityCertificate cert;
  AbstractionParams params;
  int steps = 100;
  std::optional<LyapunovCertificate> lyap;
  std::optional<SpecBlock> spec;
  std::optional<SimBlock> sim;

  const ControlSystem& require_system() const {
    if (!system) throw Error(errc::config, "configuration lacks a system block");
    return *system;
  }
};

namespace io {

inline const ordered_json& need(const ordered_json& j, const char* key, const char* where) {
  if (!j.contains(key))
    throw Error(errc::config, std::string("missing '") + key + "' in " + where);
  return j.at(key);
}

inline double need_num(const ordered_json& j, const char* key, const char* where) {
  const auto& v = need(j, key, where);
  if (!v.is_number()) throw Error(errc::config, std::string("'") + key + "' must be a number");
  return v.get<double>();
}

inline Box parse_box(const ordered_json& j, const char* where) {
  Box b;
  if (!j.is_array()) throw Error(errc::config, std::string(where) + " must be an array of [lo, hi]");
  for (const auto& iv : j) {
    if (!iv.is_array() || iv.size() != 2)
      throw Error(errc::config, std::string(where) + " entries must be [lo, hi] pairs");
    b.push_back({iv[0].get<double>(), iv[1].get<double>()});
  }
  return b;
}

inline KinfGain parse_kinf(const ordered_json& j, const char* where) {
  KinfGain g{need_num(j, "k", where), j.value("p", 1.0)};
  g.validate();
  return g;
}

}  // namespace io

inline Config parse_config(const ordered_json& j) {
  Config cfg;

  const auto& sys = io::need(j, "system", "configuration");
  const int n = static_cast<int>(io::need_num(sys, "n", "system"));
  const int m = static_cast<int>(io::need_num(sys, "m", "system"));
  std::vector<Expression> f;
  for (const auto& e : io::need(sys, "f", "system")) {
    if (!e.is_string()) throw Error(errc::config, "system.f entries must be expression strings");
    f.push_back(Expression::parse(e.get<std::string>()));
  }
  cfg.system.emplace(n, m, std::move(f), io::parse_box(io::need(sys, "U", "system"), "system.U"),
                     io::parse_box(io::need(sys, "X", "system"), "system.X"));

  const auto& cert = io::need(j, "certificate", "configuration");
  const auto& beta = io::need(cert, "beta", "certificate");
  cfg.cert.beta = KLGain{io::need_num(beta, "c", "certificate.beta"),
                         io::need_num(beta, "lambda", "certificate.beta"), beta.value("p", 1.0)};
  cfg.cert.beta.validate();
  if (cert.contains("gamma") && !cert.at("gamma").is_null())
    cfg.cert.gamma = io::parse_kinf(cert.at("gamma"), "certificate.gamma");

  const auto& par = io::need(j, "params", "configuration");
  cfg.params.eps = io::need_num(par, "eps", "params");
  cfg.params.tau = io::need_num(par, "tau", "params");
  cfg.params.eta = io::need_num(par, "eta", "params");
  cfg.params.mu = io::need_num(par, "mu", "params");
  cfg.params.nu = par.value("nu", 0.0);
  cfg.steps = static_cast<int>(par.value("steps", 100.0));
  cfg.params.validate();

  if (j.contains("lyapunov")) {
    const auto& ly = j.at("lyapunov");
    LyapunovCertificate lc;
    lc.V = Expression::parse(io::need(ly, "V", "lyapunov").get<std::string>());
    lc.alpha1 = io::parse_kinf(io::need(ly, "alpha1", "lyapunov"), "lyapunov.alpha1");
    lc.alpha2 = io::parse_kinf(io::need(ly, "alpha2", "lyapunov"), "lyapunov.alpha2");
    lc.rho = io::parse_kinf(io::need(ly, "rho", "lyapunov"), "lyapunov.rho");
    if (ly.contains("sigma") && !ly.at("sigma").is_null())
      lc.sigma = io::parse_kinf(ly.at("sigma"), "lyapunov.sigma");
    lc.norm2 = ly.value("norm2", false);
    cfg.lyap = std::move(lc);
  }

  if (j.contains("spec")) {
    const auto& sp = j.at("spec");
    SpecBlock sb;
    for (const auto& leg : io::need(sp, "legs", "spec")) sb.spec.legs.push_back(leg.get<std::vector<int>>());
    if (sp.contains("safe")) sb.spec.safe = sp.at("safe").get<std::vector<int>>();
    sb.start = static_cast<int>(io::need_num(sp, "start", "spec"));
    cfg.spec = std::move(sb);
  }

  if (j.contains("sim")) {
    const auto& sm = j.at("sim");
    SimBlock sb;
    sb.x0 = io::need(sm, "x0", "sim").get<Vec>();
    sb.substeps = static_cast<int>(sm.value("substeps", 10.0));
    cfg.sim = std::move(sb);
  }
  return cfg;
}

inline Config load_config(const std::string& path) {
  return parse_config(io::read_json_file(path));
}

}  // namespace absim

#endif /* ABSIM_IO_HH_ */
