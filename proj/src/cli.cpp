#include "gpg/cli.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace gpg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string resolve_out_dir(const CliOptions& opts, const std::string& name) {
  if (!opts.out_dir.empty()) return opts.out_dir;
  if (const char* root = std::getenv("GPG_OUT"); root && *root)
    return (fs::path(root) / name).string();
  return name;
}

std::string run_name(const CliOptions& opts, const char* command) {
  return fs::path(opts.config_path).stem().string() + "." + command;
}

void apply_overrides(ExperimentConfig& cfg, const CliOptions& opts) {
  if (opts.seed) cfg.run.seed = *opts.seed;
  if (opts.threads) cfg.train.threads = *opts.threads;
}

RunConfig eval_run_config(const ExperimentConfig& cfg) {
  RunConfig run = cfg.run;
  if (cfg.eval_horizon > 0) run.horizon = cfg.eval_horizon;
  return run;
}

// Exit codes: ConfigError / bad arguments -> 2, anything else -> 1.
int guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

json metrics_to_json(const TransferMetrics& m) {
  json per = json::array();
  for (const auto& e : m.per_episode)
    per.push_back({{"success", e.success},
                   {"time_to_cover", e.time_to_cover},
                   {"collisions", e.collisions},
                   {"steps", e.steps}});
  json j = {{"episodes", m.episodes},
            {"success_rate", m.success_rate},
            {"mean_collisions", m.mean_collisions},
            {"per_episode", per}};
  if (std::isnan(m.mean_time_to_cover))
    j["mean_time_to_cover"] = nullptr;
  else
    j["mean_time_to_cover"] = m.mean_time_to_cover;
  return j;
}

void run_policy_eval(const CliOptions& opts, const char* command,
                     const std::string& metrics_filename) {
  if (opts.checkpoint_path.empty())
    throw std::invalid_argument("--checkpoint is required");
  ExperimentConfig cfg = load_config(opts.config_path);
  apply_overrides(cfg, opts);

  auto [policy, meta] = load_policy(opts.checkpoint_path);
  RunConfig run = eval_run_config(cfg);

  TransferOptions topts;
  topts.record_traces = true;
  if (cfg.has_eval_formation) {
    const FormationSpec spec = cfg.eval_formation;
    const double spacing = cfg.formation_spacing;
    const int n = run.n_robots;
    topts.world_source = [spec, spacing, n](int, Rng& rng) {
      return make_formation(spec, n, spacing, rng);
    };
  }
  const TransferMetrics metrics =
      transfer_eval(policy, meta, run, cfg.eval_episodes, topts);

  const fs::path out = resolve_out_dir(opts, run_name(opts, command));
  fs::create_directories(out);
  {
    std::ofstream f(out / metrics_filename);
    f << metrics_to_json(metrics).dump(2) << "\n";
  }
  for (std::size_t e = 0; e < metrics.traces.size(); ++e) {
    char name[32];
    std::snprintf(name, sizeof name, "ep_%04zu.traj.json", e);
    write_trajectory_json(metrics.traces[e], run.dt, (out / name).string());
  }
  std::cerr << command << ": success_rate=" << metrics.success_rate
            << " mean_collisions=" << metrics.mean_collisions << " -> "
            << out.string() << "\n";
}

}  // namespace

void write_trajectory_json(const EpisodeTrace& trace, double dt,
                           const std::string& path) {
  json j;
  j["dt"] = dt;
  j["obstacle_radius"] = trace.initial.obstacle_radius;
  j["success"] = trace.reached_full_coverage;
  json goals = json::array();
  for (int g = 0; g < trace.initial.goal_positions.rows(); ++g)
    goals.push_back({trace.initial.goal_positions(g, 0),
                     trace.initial.goal_positions(g, 1)});
  j["goals"] = goals;
  json obstacles = json::array();
  for (int o = 0; o < trace.initial.n_obstacles(); ++o)
    obstacles.push_back({trace.initial.obstacle_positions(o, 0),
                         trace.initial.obstacle_positions(o, 1)});
  j["obstacles"] = obstacles;
  json steps = json::array();
  auto positions_row = [](const Mat& p) {
    json row = json::array();
    for (int i = 0; i < p.rows(); ++i) row.push_back({p(i, 0), p(i, 1)});
    return row;
  };
  steps.push_back(positions_row(trace.initial.robot_positions));
  json covered = json::array();
  for (const auto& s : trace.steps) {
    steps.push_back(positions_row(s.positions_after));
    covered.push_back(s.covered);
  }
  j["steps"] = steps;
  j["covered"] = covered;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write trajectory to " + path);
  f << j.dump(2) << "\n";
}

namespace {

struct RenderRow {
  long t;
  int kind;  // 0 goal, 1 obstacle, 2 robot (canonical emission order)
  long id;
  double x, y;
};

const char* kKindNames[] = {"goal", "obstacle", "robot"};

void emit_render_rows(const std::vector<RenderRow>& rows, std::ostream& out) {
  out << "t,entity_kind,id,x,y\n";
  for (const auto& r : rows)
    out << r.t << "," << kKindNames[r.kind] << "," << r.id << ","
        << format_double(r.x) << "," << format_double(r.y) << "\n";
}

std::vector<RenderRow> rows_from_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("render: cannot open " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("render: malformed trajectory JSON: " +
                                std::string(e.what()));
  }
  if (!j.contains("goals") || !j.contains("steps"))
    throw std::invalid_argument("render: trajectory JSON missing goals/steps");
  std::vector<RenderRow> rows;
  long id = 0;
  for (const auto& g : j["goals"])
    rows.push_back({0, 0, id++, g.at(0).get<double>(), g.at(1).get<double>()});
  id = 0;
  if (j.contains("obstacles"))
    for (const auto& o : j["obstacles"])
      rows.push_back({0, 1, id++, o.at(0).get<double>(), o.at(1).get<double>()});
  long t = 0;
  for (const auto& step : j["steps"]) {
    id = 0;
    for (const auto& r : step)
      rows.push_back({t, 2, id++, r.at(0).get<double>(), r.at(1).get<double>()});
    ++t;
  }
  return rows;
}

std::vector<RenderRow> rows_from_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("render: cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != "t,entity_kind,id,x,y")
    throw std::invalid_argument("render: bad CSV header in " + path);
  std::vector<RenderRow> rows;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string t_s, kind_s, id_s, x_s, y_s;
    if (!std::getline(ss, t_s, ',') || !std::getline(ss, kind_s, ',') ||
        !std::getline(ss, id_s, ',') || !std::getline(ss, x_s, ',') ||
        !std::getline(ss, y_s))
      throw std::invalid_argument("render: bad CSV row at line " +
                                  std::to_string(lineno));
    RenderRow r;
    int kind = -1;
    for (int k = 0; k < 3; ++k)
      if (kind_s == kKindNames[k]) kind = k;
    if (kind < 0)
      throw std::invalid_argument("render: unknown entity kind at line " +
                                  std::to_string(lineno));
    try {
      r.t = std::stol(t_s);
      r.kind = kind;
      r.id = std::stol(id_s);
      r.x = std::stod(x_s);
      r.y = std::stod(y_s);
    } catch (const std::exception&) {
      throw std::invalid_argument("render: bad CSV value at line " +
                                  std::to_string(lineno));
    }
    rows.push_back(r);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const RenderRow& a, const RenderRow& b) {
                     if (a.kind != b.kind) return a.kind < b.kind;
                     if (a.t != b.t) return a.t < b.t;
                     return a.id < b.id;
                   });
  return rows;
}

}  // namespace

void render_trajectory(const std::string& input_path, std::ostream& out) {
  const std::string ext = fs::path(input_path).extension().string();
  std::vector<RenderRow> rows;
  if (ext == ".csv")
    rows = rows_from_csv(input_path);
  else
    rows = rows_from_json(input_path);
  emit_render_rows(rows, out);
}

int cmd_train(const CliOptions& opts) {
  return guarded([&]() {
    ExperimentConfig cfg = load_config(opts.config_path);
    apply_overrides(cfg, opts);
    const fs::path out = !cfg.out_dir.empty() && opts.out_dir.empty()
                             ? fs::path(cfg.out_dir)
                             : fs::path(resolve_out_dir(opts, run_name(opts, "train")));
    fs::create_directories(out);
    write_resolved_config(cfg, (out / "resolved.cfg").string());

    std::ofstream csv(out / "train.csv");
    csv << "iteration,mean_return,coverage,collision_rate,grad_norm\n";
    int printed = 0;
    const TrainOutput result =
        train(cfg.run, cfg.train, [&](const TrainReportRow& row) {
          csv << row.iteration << "," << format_double(row.mean_return) << ","
              << format_double(row.coverage) << ","
              << format_double(row.collision_rate) << ","
              << format_double(row.grad_norm) << "\n";
          csv.flush();
          if (row.iteration % 10 == 0 || row.skipped) {
            std::fprintf(stderr,
                         "[train] iter %d return=%.3f coverage=%.3f grad=%.3g "
                         "(%.2fs)%s\n",
                         row.iteration, row.mean_return, row.coverage,
                         row.grad_norm, row.seconds,
                         row.skipped ? " [skipped: non-finite gradient]" : "");
            ++printed;
          }
        });
    (void)printed;

    const PolicyMeta meta = meta_from_config(cfg.run);
    save_policy(result.final_policy, meta, (out / "checkpoint_final.gpgp").string());
    save_policy(result.best_policy, meta, (out / "checkpoint_best.gpgp").string());
    std::cerr << "train: " << result.report.rows.size() << " iterations, best return "
              << result.report.best_return << " at iteration "
              << result.report.best_iteration << " -> " << out.string() << "\n";
  });
}

int cmd_eval(const CliOptions& opts) {
  return guarded([&]() { run_policy_eval(opts, "eval", "eval_metrics.json"); });
}

int cmd_transfer(const CliOptions& opts) {
  return guarded(
      [&]() { run_policy_eval(opts, "transfer", "transfer_metrics.json"); });
}

int cmd_compare(const CliOptions& opts) {
  return guarded([&]() {
    if (opts.checkpoint_path.empty())
      throw std::invalid_argument("--checkpoint is required");
    ExperimentConfig cfg = load_config(opts.config_path);
    apply_overrides(cfg, opts);
    if (cfg.formations.empty())
      throw ConfigError(opts.config_path, 0, "formations: required for compare");

    auto [policy, meta] = load_policy(opts.checkpoint_path);
    CompareOptions copts;
    copts.runs = cfg.compare_runs;
    copts.spacing = cfg.formation_spacing;
    copts.vo = cfg.train.vo;
    const auto results = compare_run(policy, meta, eval_run_config(cfg),
                                     cfg.formations, copts);

    const fs::path out = resolve_out_dir(opts, run_name(opts, "compare"));
    fs::create_directories(out);
    std::ofstream csv(out / "table1.csv");
    csv << "formation,capt_T,capt_C,gpg_T,gpg_C,gpgvo_T,gpgvo_C,"
           "capt_T_std,capt_C_std,gpg_T_std,gpg_C_std,gpgvo_T_std,gpgvo_C_std\n";
    json timing;
    for (const auto& r : results) {
      csv << to_string(r.spec) << "," << format_double(r.capt.time_mean) << ","
          << format_double(r.capt.collisions_mean) << ","
          << format_double(r.gpg.time_mean) << ","
          << format_double(r.gpg.collisions_mean) << ","
          << format_double(r.gpg_vo.time_mean) << ","
          << format_double(r.gpg_vo.collisions_mean) << ","
          << format_double(r.capt.time_std) << ","
          << format_double(r.capt.collisions_std) << ","
          << format_double(r.gpg.time_std) << ","
          << format_double(r.gpg.collisions_std) << ","
          << format_double(r.gpg_vo.time_std) << ","
          << format_double(r.gpg_vo.collisions_std) << "\n";
      timing[to_string(r.spec)] = {
          {"capt_planning_seconds", r.capt.planning_seconds_mean},
          {"gpg_planning_seconds", r.gpg.planning_seconds_mean},
          {"gpgvo_planning_seconds", r.gpg_vo.planning_seconds_mean}};
    }
    // Wall-clock measurements are not part of the deterministic contract and
    // live in a separate file.
    std::ofstream tf(out / "timing.json");
    tf << timing.dump(2) << "\n";
    std::cerr << "compare: " << results.size() << " formations -> "
              << out.string() << "\n";
  });
}

int cmd_sweep(const CliOptions& opts) {
  return guarded([&]() {
    ExperimentConfig cfg = load_config(opts.config_path);
    apply_overrides(cfg, opts);
    if (cfg.sweep_k.empty() || cfg.sweep_m.empty())
      throw ConfigError(opts.config_path, 0, "sweep_k and sweep_m: required for sweep");

    const fs::path out = resolve_out_dir(opts, run_name(opts, "sweep"));
    fs::create_directories(out);
    std::ofstream csv(out / "sweep.csv");
    csv << "k,m,success_pct\n";
    csv.flush();

    for (int k : cfg.sweep_k) {
      for (int m : cfg.sweep_m) {
        RunConfig run = cfg.run;
        run.k_taps = k;
        run.m_robots = std::min(m, run.n_robots - 1);
        run.m_goals = std::min(m, run.n_robots);
        run.layer_widths.clear();
        run.seed = cfg.run.seed + 1000ULL * k + m;
        run.apply_defaults();
        run.validate();

        TrainParams tp = cfg.train;
        if (cfg.sweep_iterations > 0) tp.iterations = cfg.sweep_iterations;
        const TrainOutput trained = train(run, tp);

        RunConfig eval_run = run;
        if (cfg.eval_horizon > 0) eval_run.horizon = cfg.eval_horizon;
        const TransferMetrics metrics =
            transfer_eval(trained.best_policy, meta_from_config(run), eval_run,
                          cfg.sweep_eval_runs);
        int ok = 0;
        for (const auto& e : metrics.per_episode)
          ok += (e.success && e.collisions == 0) ? 1 : 0;
        const double pct = 100.0 * ok / cfg.sweep_eval_runs;
        csv << k << "," << m << "," << format_double(pct) << "\n";
        csv.flush();
        std::cerr << "sweep: K=" << k << " M=" << m << " success=" << pct
                  << "%\n";
      }
    }
  });
}

int cmd_render(const CliOptions& opts) {
  return guarded([&]() {
    const fs::path input(opts.config_path);
    const fs::path out = resolve_out_dir(opts, input.stem().stem().string() + ".render");
    fs::create_directories(out);
    std::ofstream f(out / "trajectory.csv");
    render_trajectory(input.string(), f);
    std::cerr << "render: " << input.string() << " -> "
              << (out / "trajectory.csv").string() << "\n";
  });
}

}  // namespace gpg
