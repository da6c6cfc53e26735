#include "gpg/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace gpg {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct Parser {
  std::string file;
  int line = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(file, line, msg);
  }

  long long to_int(const std::string& key, const std::string& v) const {
    try {
      std::size_t used = 0;
      const long long x = std::stoll(v, &used);
      if (used != v.size()) throw std::invalid_argument("");
      return x;
    } catch (const std::exception&) {
      fail(key + ": expected an integer, got '" + v + "'");
    }
  }

  double to_double(const std::string& key, const std::string& v) const {
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument("");
      return x;
    } catch (const std::exception&) {
      fail(key + ": expected a number, got '" + v + "'");
    }
  }

  bool to_bool(const std::string& key, const std::string& v) const {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(key + ": expected true/false, got '" + v + "'");
  }

  std::vector<int> to_int_list(const std::string& key,
                               const std::string& v) const {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) fail(key + ": empty list entry");
      out.push_back(static_cast<int>(to_int(key, item)));
    }
    if (out.empty()) fail(key + ": expected a comma-separated list");
    return out;
  }
};

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "cannot open config file");

  ExperimentConfig cfg;
  Parser p;
  p.file = path;

  std::map<std::string, std::function<void(const std::string&)>> keys;

  // run config
  keys["n_robots"] = [&](const std::string& v) { cfg.run.n_robots = (int)p.to_int("n_robots", v); };
  keys["coverage_radius"] = [&](const std::string& v) { cfg.run.coverage_radius = p.to_double("coverage_radius", v); };
  keys["m_robots"] = [&](const std::string& v) { cfg.run.m_robots = (int)p.to_int("m_robots", v); };
  keys["m_goals"] = [&](const std::string& v) { cfg.run.m_goals = (int)p.to_int("m_goals", v); };
  keys["m_obstacles"] = [&](const std::string& v) { cfg.run.m_obstacles = (int)p.to_int("m_obstacles", v); };
  keys["n_obstacles"] = [&](const std::string& v) { cfg.run.n_obstacles = (int)p.to_int("n_obstacles", v); };
  keys["obstacle_radius"] = [&](const std::string& v) { cfg.run.obstacle_radius = p.to_double("obstacle_radius", v); };
  keys["k_taps"] = [&](const std::string& v) { cfg.run.k_taps = (int)p.to_int("k_taps", v); };
  keys["layers"] = [&](const std::string& v) { cfg.run.layers = (int)p.to_int("layers", v); };
  keys["layer_widths"] = [&](const std::string& v) { cfg.run.layer_widths = p.to_int_list("layer_widths", v); };
  keys["hidden_width"] = [&](const std::string& v) { cfg.run.hidden_width = (int)p.to_int("hidden_width", v); };
  keys["gamma"] = [&](const std::string& v) { cfg.run.gamma = p.to_double("gamma", v); };
  keys["horizon"] = [&](const std::string& v) { cfg.run.horizon = (int)p.to_int("horizon", v); };
  keys["dynamics"] = [&](const std::string& v) {
    try {
      cfg.run.dynamics = dynamics_from_string(v);
    } catch (const std::exception& e) {
      p.fail(e.what());
    }
  };
  keys["dt"] = [&](const std::string& v) { cfg.run.dt = p.to_double("dt", v); };
  keys["a_max"] = [&](const std::string& v) { cfg.run.a_max = p.to_double("a_max", v); };
  keys["seed"] = [&](const std::string& v) { cfg.run.seed = (std::uint64_t)p.to_int("seed", v); };
  keys["arena_half_width"] = [&](const std::string& v) { cfg.run.arena_half_width = p.to_double("arena_half_width", v); };
  keys["min_spawn_separation"] = [&](const std::string& v) { cfg.run.min_spawn_separation = p.to_double("min_spawn_separation", v); };
  keys["robot_radius"] = [&](const std::string& v) { cfg.run.robot_radius = p.to_double("robot_radius", v); };
  keys["sense_range"] = [&](const std::string& v) { cfg.run.sense_range = p.to_double("sense_range", v); };
  keys["absolute_observations"] = [&](const std::string& v) { cfg.run.absolute_observations = p.to_bool("absolute_observations", v); };
  keys["normalize_graph"] = [&](const std::string& v) { cfg.run.normalize_graph = p.to_bool("normalize_graph", v); };

  // training
  keys["iterations"] = [&](const std::string& v) { cfg.train.iterations = (int)p.to_int("iterations", v); };
  keys["batch_size"] = [&](const std::string& v) { cfg.train.batch_size = (int)p.to_int("batch_size", v); };
  keys["step_size"] = [&](const std::string& v) { cfg.train.step_size = p.to_double("step_size", v); };
  keys["step_size_final"] = [&](const std::string& v) { cfg.train.step_size_final = p.to_double("step_size_final", v); };
  keys["beta1"] = [&](const std::string& v) { cfg.train.beta1 = p.to_double("beta1", v); };
  keys["beta2"] = [&](const std::string& v) { cfg.train.beta2 = p.to_double("beta2", v); };
  keys["adam_eps"] = [&](const std::string& v) { cfg.train.adam_eps = p.to_double("adam_eps", v); };
  keys["baseline"] = [&](const std::string& v) { cfg.train.baseline = p.to_bool("baseline", v); };
  keys["literal_estimator"] = [&](const std::string& v) { cfg.train.literal_estimator = p.to_bool("literal_estimator", v); };
  keys["normalize_advantages"] = [&](const std::string& v) { cfg.train.normalize_advantages = p.to_bool("normalize_advantages", v); };
  keys["grad_clip"] = [&](const std::string& v) { cfg.train.grad_clip = p.to_double("grad_clip", v); };
  keys["std_init"] = [&](const std::string& v) { cfg.train.std_init = p.to_double("std_init", v); };
  keys["target_coverage"] = [&](const std::string& v) { cfg.train.target_coverage = p.to_double("target_coverage", v); };
  keys["coverage_window"] = [&](const std::string& v) { cfg.train.coverage_window = (int)p.to_int("coverage_window", v); };
  keys["threads"] = [&](const std::string& v) { cfg.train.threads = (int)p.to_int("threads", v); };
  keys["train_with_vo"] = [&](const std::string& v) { cfg.train.train_with_vo = p.to_bool("train_with_vo", v); };
  keys["vo_penalty"] = [&](const std::string& v) { cfg.train.vo_penalty = p.to_double("vo_penalty", v); };
  keys["vo_time_horizon"] = [&](const std::string& v) { cfg.train.vo.time_horizon = p.to_double("vo_time_horizon", v); };
  keys["vo_safety_radius"] = [&](const std::string& v) { cfg.train.vo.safety_radius = p.to_double("vo_safety_radius", v); };

  // evaluation / comparison / sweep
  keys["eval_episodes"] = [&](const std::string& v) { cfg.eval_episodes = (int)p.to_int("eval_episodes", v); };
  keys["eval_horizon"] = [&](const std::string& v) { cfg.eval_horizon = (int)p.to_int("eval_horizon", v); };
  keys["formations"] = [&](const std::string& v) {
    cfg.formations.clear();
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ';')) {
      item = trim(item);
      if (item.empty()) continue;
      try {
        cfg.formations.push_back(parse_formation(item));
      } catch (const std::exception& e) {
        p.fail(e.what());
      }
    }
    if (cfg.formations.empty()) p.fail("formations: empty list");
  };
  keys["eval_formation"] = [&](const std::string& v) {
    try {
      cfg.eval_formation = parse_formation(v);
      cfg.has_eval_formation = true;
    } catch (const std::exception& e) {
      p.fail(e.what());
    }
  };
  keys["formation_spacing"] = [&](const std::string& v) { cfg.formation_spacing = p.to_double("formation_spacing", v); };
  keys["compare_runs"] = [&](const std::string& v) { cfg.compare_runs = (int)p.to_int("compare_runs", v); };
  keys["sweep_k"] = [&](const std::string& v) { cfg.sweep_k = p.to_int_list("sweep_k", v); };
  keys["sweep_m"] = [&](const std::string& v) { cfg.sweep_m = p.to_int_list("sweep_m", v); };
  keys["sweep_eval_runs"] = [&](const std::string& v) { cfg.sweep_eval_runs = (int)p.to_int("sweep_eval_runs", v); };
  keys["sweep_iterations"] = [&](const std::string& v) { cfg.sweep_iterations = (int)p.to_int("sweep_iterations", v); };
  keys["out_dir"] = [&](const std::string& v) { cfg.out_dir = v; };

  std::string raw;
  while (std::getline(in, raw)) {
    ++p.line;
    const auto hash = raw.find('#');
    std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) p.fail("expected key=value");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    auto it = keys.find(key);
    if (it == keys.end()) p.fail("unknown key '" + key + "'");
    if (value.empty()) p.fail(key + ": empty value");
    it->second(value);
  }

  cfg.run.apply_defaults();
  try {
    cfg.run.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, 0, e.what());
  }
  if (cfg.train.iterations < 1) throw ConfigError(path, 0, "iterations: must be positive");
  if (cfg.train.batch_size < 1) throw ConfigError(path, 0, "batch_size: must be positive");
  if (cfg.eval_episodes < 0) throw ConfigError(path, 0, "eval_episodes: must be >= 0");
  return cfg;
}

void write_resolved_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write resolved config to " + path);
  const RunConfig& r = cfg.run;
  out << "# resolved configuration (all defaults materialized)\n";
  out << "n_robots=" << r.n_robots << "\n";
  out << "coverage_radius=" << format_double(r.coverage_radius) << "\n";
  out << "m_robots=" << r.m_robots << "\n";
  out << "m_goals=" << r.m_goals << "\n";
  out << "m_obstacles=" << r.m_obstacles << "\n";
  out << "n_obstacles=" << r.n_obstacles << "\n";
  out << "obstacle_radius=" << format_double(r.obstacle_radius) << "\n";
  out << "k_taps=" << r.k_taps << "\n";
  out << "layers=" << r.layers << "\n";
  out << "layer_widths=";
  for (std::size_t i = 0; i < r.layer_widths.size(); ++i)
    out << (i ? "," : "") << r.layer_widths[i];
  out << "\n";
  out << "hidden_width=" << r.hidden_width << "\n";
  out << "gamma=" << format_double(r.gamma) << "\n";
  out << "horizon=" << r.horizon << "\n";
  out << "dynamics=" << to_string(r.dynamics) << "\n";
  out << "dt=" << format_double(r.dt) << "\n";
  out << "a_max=" << format_double(r.a_max) << "\n";
  out << "seed=" << r.seed << "\n";
  out << "arena_half_width=" << format_double(r.arena_half_width) << "\n";
  out << "min_spawn_separation=" << format_double(r.min_spawn_separation) << "\n";
  out << "robot_radius=" << format_double(r.robot_radius) << "\n";
  out << "sense_range=" << format_double(r.sense_range) << "\n";
  out << "absolute_observations=" << (r.absolute_observations ? "true" : "false") << "\n";
  out << "normalize_graph=" << (r.normalize_graph ? "true" : "false") << "\n";
  const TrainParams& t = cfg.train;
  out << "iterations=" << t.iterations << "\n";
  out << "batch_size=" << t.batch_size << "\n";
  out << "step_size=" << format_double(t.step_size) << "\n";
  out << "step_size_final=" << format_double(t.step_size_final) << "\n";
  out << "beta1=" << format_double(t.beta1) << "\n";
  out << "beta2=" << format_double(t.beta2) << "\n";
  out << "adam_eps=" << format_double(t.adam_eps) << "\n";
  out << "baseline=" << (t.baseline ? "true" : "false") << "\n";
  out << "literal_estimator=" << (t.literal_estimator ? "true" : "false") << "\n";
  out << "normalize_advantages=" << (t.normalize_advantages ? "true" : "false") << "\n";
  out << "grad_clip=" << format_double(t.grad_clip) << "\n";
  out << "std_init=" << format_double(t.std_init > 0.0 ? t.std_init : 0.5 * r.a_max) << "\n";
  out << "target_coverage=" << format_double(t.target_coverage) << "\n";
  out << "coverage_window=" << t.coverage_window << "\n";
  out << "threads=" << t.threads << "\n";
  out << "train_with_vo=" << (t.train_with_vo ? "true" : "false") << "\n";
  out << "vo_penalty=" << format_double(t.vo_penalty) << "\n";
  out << "vo_time_horizon=" << format_double(t.vo.time_horizon) << "\n";
  out << "vo_safety_radius=" << format_double(t.vo.safety_radius) << "\n";
  out << "eval_episodes=" << cfg.eval_episodes << "\n";
  if (cfg.eval_horizon > 0) out << "eval_horizon=" << cfg.eval_horizon << "\n";
  if (!cfg.formations.empty()) {
    out << "formations=";
    for (std::size_t i = 0; i < cfg.formations.size(); ++i)
      out << (i ? ";" : "") << to_string(cfg.formations[i]);
    out << "\n";
  }
  if (cfg.has_eval_formation)
    out << "eval_formation=" << to_string(cfg.eval_formation) << "\n";
  out << "formation_spacing=" << format_double(cfg.formation_spacing) << "\n";
  out << "compare_runs=" << cfg.compare_runs << "\n";
  if (!cfg.sweep_k.empty()) {
    out << "sweep_k=";
    for (std::size_t i = 0; i < cfg.sweep_k.size(); ++i)
      out << (i ? "," : "") << cfg.sweep_k[i];
    out << "\n";
  }
  if (!cfg.sweep_m.empty()) {
    out << "sweep_m=";
    for (std::size_t i = 0; i < cfg.sweep_m.size(); ++i)
      out << (i ? "," : "") << cfg.sweep_m[i];
    out << "\n";
  }
  out << "sweep_eval_runs=" << cfg.sweep_eval_runs << "\n";
  out << "sweep_iterations=" << cfg.sweep_iterations << "\n";
  if (!cfg.out_dir.empty()) out << "out_dir=" << cfg.out_dir << "\n";
}

}  // namespace gpg
