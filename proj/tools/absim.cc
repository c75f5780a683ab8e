/*
 * absim.cc
 *
 * batch front end: precision checks, Lyapunov spot checks, abstraction
 * construction, relation computation, empirical verification, controller
 * synthesis and closed-loop simulation, driven by one JSON configuration
 *
 * exit codes: 0 success / check passed, 1 checked failure, 2 usage or
 * configuration error; errors go to stderr as one JSON object
 */

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "absim/absim.hh"

namespace {

int exit_code_for(absim::errc k) {
  switch (k) {
    case absim::errc::syntax:
    case absim::errc::argument:
    case absim::errc::certificate:
    case absim::errc::config:
    case absim::errc::io: return 2;
    default: return 1;
  }
}

void emit_error(const absim::Error& e) {
  absim::ordered_json j{{"error", {{"kind", absim::errc_name(e.kind())}, {"message", e.what()}}}};
  std::cerr << absim::io::dump_canonical(j);
}

void print_report(const absim::ordered_json& j) { std::cout << absim::io::dump_canonical(j); }

struct CommonArgs {
  std::string config_path;
  int threads = 0;
};

absim::TransitionSystem obtain_ts(const absim::Config& cfg, const std::string& ts_path,
                                  bool force, int threads) {
  if (!ts_path.empty()) return absim::load_ts(ts_path);
  absim::BuildOptions opts;
  opts.steps = cfg.steps;
  opts.force = force;
  opts.threads = threads;
  return absim::build_abstraction(cfg.require_system(), cfg.cert, cfg.params, opts);
}

int cmd_params(const CommonArgs& a) {
  const auto cfg = absim::load_config(a.config_path);
  absim::ordered_json rep;
  const auto gas = absim::check_gas_condition(cfg.cert, cfg.params);
  rep["gas"] = absim::condition_to_json(gas);
  bool governing = gas.holds;
  if (cfg.cert.gamma) {
    const auto iss = absim::check_iss_condition(cfg.cert, cfg.params);
    rep["iss"] = absim::condition_to_json(iss);
    governing = iss.holds;
  } else {
    rep["iss"] = nullptr;
  }
  try {
    const auto sugg = absim::suggest_params(cfg.cert, cfg.params.eps, cfg.params.tau,
                                            /*gas_mode=*/!cfg.cert.gamma.has_value());
    rep["suggested"] = absim::ordered_json{{"tau", sugg.tau},
                                           {"eta", sugg.eta},
                                           {"mu", sugg.mu},
                                           {"eps", sugg.eps},
                                           {"nu", sugg.nu}};
  } catch (const absim::Error& e) {
    rep["suggested"] = absim::ordered_json{{"error", e.what()}};
  }
  print_report(rep);
  return governing ? 0 : 1;
}

int cmd_lyap(const CommonArgs& a, int density) {
  const auto cfg = absim::load_config(a.config_path);
  if (!cfg.lyap) throw absim::Error(absim::errc::config, "configuration lacks a lyapunov block");
  absim::SampleSpec grid;
  grid.points_per_axis = density;
  grid.threads = a.threads;
  const auto bounds = absim::lyap_check_bounds(cfg.require_system(), *cfg.lyap, grid);
  const auto diss = absim::lyap_check_dissipation(cfg.require_system(), *cfg.lyap, grid);
  absim::ordered_json rep{{"bounds", absim::lyap_report_to_json(bounds)},
                          {"dissipation", absim::lyap_report_to_json(diss)}};
  print_report(rep);
  return bounds.pass && diss.pass ? 0 : 1;
}

int cmd_abstract(const CommonArgs& a, const std::string& out_path, const std::string& dot_path,
                 bool force) {
  const auto cfg = absim::load_config(a.config_path);
  absim::BuildOptions opts;
  opts.steps = cfg.steps;
  opts.force = force;
  opts.threads = a.threads;
  absim::BuildTiming timing;
  const auto ts = absim::build_abstraction(cfg.require_system(), cfg.cert, cfg.params, opts,
                                           &timing);
  absim::io::write_file(out_path, absim::ts_to_json(ts));
  if (!dot_path.empty()) absim::io::write_file(dot_path, absim::ts_to_dot(ts));
  absim::ordered_json rep{{"states", ts.num_states()},
                          {"labels", ts.num_labels()},
                          {"transitions", ts.transitions.size()},
                          {"timing",
                           {{"lattice_seconds", timing.lattice_seconds},
                            {"integrate_seconds", timing.integrate_seconds},
                            {"merge_seconds", timing.merge_seconds}}},
                          {"output", out_path}};
  print_report(rep);
  return 0;
}

int cmd_bisim(const std::string& t1_path, const std::string& t2_path, double eps,
              const std::string& out_path) {
  const auto t1 = absim::load_ts(t1_path);
  const auto t2 = absim::load_ts(t2_path);
  const auto rel = absim::greatest_bisim(t1, t2, eps);
  const bool bi = absim::is_bisimilar(t1, t2, eps);
  if (!out_path.empty())
    absim::io::write_file(out_path, absim::io::dump_canonical(absim::relation_to_json(rel, bi)));
  absim::ordered_json rep{{"eps", eps},
                          {"pairs", rel.pairs.size()},
                          {"bisimilar", bi}};
  print_report(rep);
  return bi ? 0 : 1;
}

int cmd_verify(const CommonArgs& a, const std::string& ts_path, bool force,
               const absim::VerifyOptions& vo, const std::string& out_path) {
  const auto cfg = absim::load_config(a.config_path);
  auto opts = vo;
  opts.steps = cfg.steps;
  const auto ts = obtain_ts(cfg, ts_path, force, a.threads);
  const auto rep = absim::verify_relation(cfg.require_system(), ts, cfg.params, opts);
  const auto j = absim::verify_report_to_json(rep);
  if (!out_path.empty()) absim::io::write_file(out_path, absim::io::dump_canonical(j));
  print_report(j);
  return rep.pass ? 0 : 1;
}

int cmd_synth(const CommonArgs& a, const std::string& ts_path, bool force,
              const std::string& out_path) {
  const auto cfg = absim::load_config(a.config_path);
  if (!cfg.spec) throw absim::Error(absim::errc::config, "configuration lacks a spec block");
  const auto ts = obtain_ts(cfg, ts_path, force, a.threads);
  const auto plan = absim::synth_sequence(ts, cfg.spec->spec, cfg.spec->start);
  const auto j = absim::plan_to_json(ts, plan);
  if (!out_path.empty()) absim::io::write_file(out_path, absim::io::dump_canonical(j));
  print_report(j);
  return 0;
}

int cmd_simulate(const CommonArgs& a, const std::string& ts_path, bool force,
                 const std::string& plan_path, const std::string& traj_path,
                 const std::string& report_path, bool feedback) {
  const auto cfg = absim::load_config(a.config_path);
  if (!cfg.sim) throw absim::Error(absim::errc::config, "configuration lacks a sim block");
  const auto ts = obtain_ts(cfg, ts_path, force, a.threads);

  absim::Plan plan;
  if (!plan_path.empty()) {
    const auto j = absim::io::read_json_file(plan_path);
    plan.start = j.at("start").get<int>();
    plan.labels = j.at("labels").get<std::vector<int>>();
    plan.waypoints = j.at("waypoints").get<std::vector<int>>();
  } else {
    if (!cfg.spec)
      throw absim::Error(absim::errc::config, "no plan file given and no spec block to synthesize from");
    plan = absim::synth_sequence(ts, cfg.spec->spec, cfg.spec->start);
  }

  std::pair<absim::Trajectory, absim::TubeReport> run;
  if (feedback) {
    if (!cfg.spec)
      throw absim::Error(absim::errc::config, "feedback mode needs a spec block");
    std::vector<absim::ReachResult> legs = plan.legs;
    if (legs.empty())
      for (const auto& leg : cfg.spec->spec.legs)
        legs.push_back(absim::solve_reach(ts, leg, cfg.spec->spec.safe));
    run = absim::simulate_feedback(cfg.require_system(), ts, cfg.spec->spec, legs, cfg.sim->x0,
                                   cfg.params, cfg.steps, cfg.sim->substeps);
  } else {
    run = absim::simulate_closed_loop(cfg.require_system(), ts, plan, cfg.sim->x0, cfg.params,
                                      cfg.steps, cfg.sim->substeps);
  }
  if (!traj_path.empty())
    absim::io::write_file(traj_path, absim::trajectory_to_csv(run.first, cfg.require_system().n(),
                                                              cfg.require_system().m()));
  const auto j = absim::tube_report_to_json(run.second);
  if (!report_path.empty()) absim::io::write_file(report_path, absim::io::dump_canonical(j));
  print_report(j);
  return run.second.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite symbolic models of digital control systems with quantified precision"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string ts_path, out_path, dot_path, plan_path, traj_path, report_path;
  bool force = false, feedback = false;
  double eps = 0.0;
  int density = 9;
  absim::VerifyOptions vo;
  std::string t1_path, t2_path;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "configuration JSON")->required();
  };

  auto* sp = app.add_subcommand("params", "evaluate the precision inequalities and suggest a split");
  add_config(sp);

  auto* sl = app.add_subcommand("lyap", "numeric spot check of the Lyapunov conditions");
  add_config(sl);
  sl->add_option("--density", density, "grid points per axis (default 9)");
  sl->add_option("--threads", common.threads, "worker threads (default: all cores)");

  auto* sa = app.add_subcommand("abstract", "build the symbolic model");
  add_config(sa);
  sa->add_option("-o,--output", out_path, "transition-system JSON output")->required();
  sa->add_option("--dot", dot_path, "also write a graphviz DOT file");
  sa->add_flag("--force", force, "build even when the precision condition fails");
  sa->add_option("--threads", common.threads, "worker threads (default: all cores)");

  auto* sb = app.add_subcommand("bisim", "greatest approximate bisimulation of two systems");
  sb->add_option("t1", t1_path, "first transition-system JSON")->required();
  sb->add_option("t2", t2_path, "second transition-system JSON")->required();
  sb->add_option("--eps", eps, "precision")->required();
  sb->add_option("-o,--output", out_path, "relation JSON output");

  auto* sv = app.add_subcommand("verify", "empirical check of the candidate relation");
  add_config(sv);
  sv->add_option("--ts", ts_path, "reuse a built transition-system JSON");
  sv->add_flag("--force", force, "build even when the precision condition fails");
  sv->add_option("--samples", vo.init_samples, "initial states (default 50)");
  sv->add_option("--horizon", vo.horizon, "rounds (default 3)");
  sv->add_option("--seed", vo.seed, "PRNG seed (default 0)");
  sv->add_option("--labels", vo.label_samples, "label sub-grid size (default 5)");
  sv->add_option("--threads", common.threads, "worker threads for a fresh build");
  sv->add_option("-o,--output", out_path, "report JSON output");

  auto* sy = app.add_subcommand("synth", "synthesize the waypoint-sequence controller");
  add_config(sy);
  sy->add_option("--ts", ts_path, "reuse a built transition-system JSON");
  sy->add_flag("--force", force, "build even when the precision condition fails");
  sy->add_option("-o,--output", out_path, "controller JSON output");
  sy->add_option("--threads", common.threads, "worker threads for a fresh build");

  auto* sm = app.add_subcommand("simulate", "refine the controller against the continuous system");
  add_config(sm);
  sm->add_option("--ts", ts_path, "reuse a built transition-system JSON");
  sm->add_flag("--force", force, "build even when the precision condition fails");
  sm->add_option("--plan", plan_path, "controller JSON from synth (default: re-synthesize)");
  sm->add_option("--traj", traj_path, "trajectory CSV output");
  sm->add_option("--report", report_path, "tube report JSON output");
  sm->add_flag("--feedback", feedback, "re-quantize the state each instant");
  sm->add_option("--threads", common.threads, "worker threads for a fresh build");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sp->parsed()) return cmd_params(common);
    if (sl->parsed()) return cmd_lyap(common, density);
    if (sa->parsed()) return cmd_abstract(common, out_path, dot_path, force);
    if (sb->parsed()) return cmd_bisim(t1_path, t2_path, eps, out_path);
    if (sv->parsed()) return cmd_verify(common, ts_path, force, vo, out_path);
    if (sy->parsed()) return cmd_synth(common, ts_path, force, out_path);
    if (sm->parsed())
      return cmd_simulate(common, ts_path, force, plan_path, traj_path, report_path, feedback);
  } catch (const absim::Error& e) {
    emit_error(e);
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    absim::ordered_json j{{"error", {{"kind", "internal"}, {"message", e.what()}}}};
    std::cerr << absim::io::dump_canonical(j);
    return 2;
  }
  return 2;
}
