#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gpg/cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gpg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("gpg_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  f << text;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const char* kTinyTrainCfg =
    "# tiny smoke-test config\n"
    "n_robots=3\n"
    "m_robots=1\n"
    "m_goals=2\n"
    "horizon=15\n"
    "hidden_width=8\n"
    "iterations=3\n"
    "batch_size=4\n"
    "threads=2\n"
    "eval_episodes=2\n"
    "seed=5\n";

}  // namespace

TEST_CASE("config: valid file loads with defaults materialized") {
  TempDir dir("cfg_ok");
  write_file(dir.file("a.cfg"), kTinyTrainCfg);
  ExperimentConfig cfg = load_config(dir.file("a.cfg"));
  CHECK(cfg.run.n_robots == 3);
  CHECK(cfg.run.layer_widths.size() == 3);
  CHECK(cfg.run.layer_widths.front() == 8);  // 2*(1+2+0+1)
  CHECK(cfg.run.robot_radius > 0.0);
  CHECK(cfg.train.iterations == 3);
}

TEST_CASE("config: bad gamma is reported with the field name") {
  TempDir dir("cfg_gamma");
  write_file(dir.file("a.cfg"), "n_robots=3\nm_robots=1\nm_goals=2\ngamma=1.5\n");
  try {
    load_config(dir.file("a.cfg"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("gamma") != std::string::npos);
  }
}

TEST_CASE("config: unknown keys and malformed lines are line-anchored errors") {
  TempDir dir("cfg_unknown");
  write_file(dir.file("a.cfg"), "n_robots=3\nnot_a_key=1\n");
  try {
    load_config(dir.file("a.cfg"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("not_a_key") != std::string::npos);
  }
  write_file(dir.file("b.cfg"), "n_robots 3\n");
  CHECK_THROWS_AS(load_config(dir.file("b.cfg")), ConfigError);
  write_file(dir.file("c.cfg"), "n_robots=zebra\n");
  CHECK_THROWS_AS(load_config(dir.file("c.cfg")), ConfigError);
  CHECK_THROWS_AS(load_config(dir.file("missing.cfg")), ConfigError);
}

TEST_CASE("config: resolved snapshot reloads to the identical configuration") {
  TempDir dir("cfg_resolved");
  write_file(dir.file("a.cfg"), kTinyTrainCfg);
  ExperimentConfig cfg = load_config(dir.file("a.cfg"));
  write_resolved_config(cfg, dir.file("resolved.cfg"));
  ExperimentConfig back = load_config(dir.file("resolved.cfg"));
  write_resolved_config(back, dir.file("resolved2.cfg"));
  CHECK(read_file(dir.file("resolved.cfg")) == read_file(dir.file("resolved2.cfg")));
}

TEST_CASE("cmd_train writes outputs and reruns byte-identically") {
  TempDir dir("train");
  write_file(dir.file("a.cfg"), kTinyTrainCfg);
  CliOptions opts;
  opts.config_path = dir.file("a.cfg");
  opts.out_dir = dir.file("out1");
  REQUIRE(cmd_train(opts) == 0);
  CHECK(fs::exists(dir.file("out1") + "/train.csv"));
  CHECK(fs::exists(dir.file("out1") + "/checkpoint_final.gpgp"));
  CHECK(fs::exists(dir.file("out1") + "/checkpoint_best.gpgp"));
  CHECK(fs::exists(dir.file("out1") + "/resolved.cfg"));
  const std::string csv = read_file(dir.file("out1") + "/train.csv");
  CHECK(csv.find("iteration,mean_return,coverage,collision_rate,grad_norm") == 0);
  CHECK(csv.find("\n0,") != std::string::npos);

  opts.out_dir = dir.file("out2");
  REQUIRE(cmd_train(opts) == 0);
  CHECK(read_file(dir.file("out2") + "/train.csv") == csv);
  CHECK(read_file(dir.file("out1") + "/checkpoint_final.gpgp") ==
        read_file(dir.file("out2") + "/checkpoint_final.gpgp"));
}

TEST_CASE("cmd_train rejects invalid configs with exit code 2") {
  TempDir dir("train_bad");
  write_file(dir.file("bad.cfg"), "n_robots=3\ngamma=1.5\n");
  CliOptions opts;
  opts.config_path = dir.file("bad.cfg");
  opts.out_dir = dir.file("out");
  CHECK(cmd_train(opts) == 2);
}

TEST_CASE("cmd_eval / cmd_transfer produce metrics and reject misuse") {
  TempDir dir("eval");
  write_file(dir.file("a.cfg"), kTinyTrainCfg);
  CliOptions train_opts;
  train_opts.config_path = dir.file("a.cfg");
  train_opts.out_dir = dir.file("train_out");
  REQUIRE(cmd_train(train_opts) == 0);

  CliOptions opts;
  opts.config_path = dir.file("a.cfg");
  opts.checkpoint_path = dir.file("train_out") + "/checkpoint_final.gpgp";
  opts.out_dir = dir.file("eval_out");
  REQUIRE(cmd_eval(opts) == 0);
  const std::string metrics = read_file(dir.file("eval_out") + "/eval_metrics.json");
  CHECK(metrics.find("\"success_rate\"") != std::string::npos);
  CHECK(fs::exists(dir.file("eval_out") + "/ep_0000.traj.json"));

  // transfer to a larger swarm with matching sensing counts
  std::string transfer_cfg = std::string(kTinyTrainCfg) + "\n";
  write_file(dir.file("b.cfg"), transfer_cfg.replace(transfer_cfg.find("n_robots=3"),
                                                     10, "n_robots=6"));
  CliOptions topts;
  topts.config_path = dir.file("b.cfg");
  topts.checkpoint_path = opts.checkpoint_path;
  topts.out_dir = dir.file("transfer_out");
  REQUIRE(cmd_transfer(topts) == 0);
  CHECK(fs::exists(dir.file("transfer_out") + "/transfer_metrics.json"));

  // rerun is byte-identical
  CliOptions topts2 = topts;
  topts2.out_dir = dir.file("transfer_out2");
  REQUIRE(cmd_transfer(topts2) == 0);
  CHECK(read_file(dir.file("transfer_out") + "/transfer_metrics.json") ==
        read_file(dir.file("transfer_out2") + "/transfer_metrics.json"));

  // zero episodes -> exit 2
  std::string zero_cfg = std::string(kTinyTrainCfg);
  write_file(dir.file("zero.cfg"),
             zero_cfg.replace(zero_cfg.find("eval_episodes=2"), 15,
                              "eval_episodes=0"));
  CliOptions zopts = topts;
  zopts.config_path = dir.file("zero.cfg");
  zopts.out_dir = dir.file("zero_out");
  CHECK(cmd_transfer(zopts) == 2);

  // width mismatch -> exit 2
  std::string mism = std::string(kTinyTrainCfg);
  write_file(dir.file("mism.cfg"),
             mism.replace(mism.find("m_goals=2"), 9, "m_goals=1"));
  CliOptions mopts = topts;
  mopts.config_path = dir.file("mism.cfg");
  mopts.out_dir = dir.file("mism_out");
  CHECK(cmd_transfer(mopts) == 2);

  // missing checkpoint flag -> exit 2
  CliOptions none = topts;
  none.checkpoint_path.clear();
  CHECK(cmd_transfer(none) == 2);
}

TEST_CASE("render: JSON trajectory to long CSV with the expected row count") {
  TempDir dir("render");
  // N=3, T=10 -> 3*(10+1) robot rows + 3 goal rows
  EpisodeTrace trace;
  trace.initial.robot_positions = Mat::Zero(3, 2);
  trace.initial.goal_positions = Mat::Ones(3, 2);
  trace.initial.obstacle_positions.resize(0, 2);
  for (int t = 0; t < 10; ++t) {
    StepRecord rec;
    rec.positions_after = Mat::Constant(3, 2, 0.1 * (t + 1));
    rec.reward = -3;
    rec.covered = 0;
    trace.steps.push_back(rec);
  }
  write_trajectory_json(trace, 0.1, dir.file("ep.traj.json"));

  std::stringstream out;
  render_trajectory(dir.file("ep.traj.json"), out);
  const std::string csv = out.str();
  int lines = 0;
  for (char c : csv)
    if (c == '\n') ++lines;
  CHECK(lines == 1 + 3 + 3 * 11);  // header + goals + robots

  // round trip: rendering the rendered CSV is the identity
  write_file(dir.file("ep.csv"), csv);
  std::stringstream out2;
  render_trajectory(dir.file("ep.csv"), out2);
  CHECK(out2.str() == csv);
}

TEST_CASE("render: empty episode gives a header-only CSV; junk is rejected") {
  TempDir dir("render_edge");
  write_file(dir.file("empty.json"),
             R"({"dt":0.1,"goals":[],"obstacles":[],"steps":[],"covered":[]})");
  std::stringstream out;
  render_trajectory(dir.file("empty.json"), out);
  CHECK(out.str() == "t,entity_kind,id,x,y\n");

  write_file(dir.file("junk.json"), "{not json");
  CHECK_THROWS_AS(
      [&] {
        std::stringstream sink;
        render_trajectory(dir.file("junk.json"), sink);
      }(),
      std::invalid_argument);

  CliOptions opts;
  opts.config_path = dir.file("junk.json");
  opts.out_dir = dir.file("out");
  CHECK(cmd_render(opts) == 2);

  opts.config_path = dir.file("empty.json");
  opts.out_dir = dir.file("out_ok");
  CHECK(cmd_render(opts) == 0);
  CHECK(fs::exists(dir.file("out_ok") + "/trajectory.csv"));
}

TEST_CASE("cmd_compare writes the table with CAPT collision-free columns") {
  TempDir dir("compare");
  std::string cfg = std::string(kTinyTrainCfg) +
                    "formations=line_to_circle:1.5;line_to_circle:2.5\n"
                    "compare_runs=2\n"
                    "arena_half_width=6\n"
                    "dynamics=single_integrator\n"
                    "a_max=1.0\n";
  write_file(dir.file("a.cfg"), cfg);
  CliOptions train_opts;
  train_opts.config_path = dir.file("a.cfg");
  train_opts.out_dir = dir.file("train_out");
  REQUIRE(cmd_train(train_opts) == 0);

  CliOptions opts;
  opts.config_path = dir.file("a.cfg");
  opts.checkpoint_path = dir.file("train_out") + "/checkpoint_final.gpgp";
  opts.out_dir = dir.file("cmp_out");
  REQUIRE(cmd_compare(opts) == 0);
  const std::string table = read_file(dir.file("cmp_out") + "/table1.csv");
  CHECK(table.find("formation,capt_T,capt_C,gpg_T,gpg_C,gpgvo_T,gpgvo_C") == 0);
  // 2 formations -> header + 2 rows
  int lines = 0;
  for (char c : table)
    if (c == '\n') ++lines;
  CHECK(lines == 3);

  // CAPT collision column is zero on obstacle-free formations
  std::stringstream ss(table);
  std::string line;
  std::getline(ss, line);  // header
  while (std::getline(ss, line)) {
    std::stringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');  // formation
    std::getline(row, cell, ',');  // capt_T
    std::getline(row, cell, ',');  // capt_C
    CHECK(cell == "0");
  }

  CliOptions opts2 = opts;
  opts2.out_dir = dir.file("cmp_out2");
  REQUIRE(cmd_compare(opts2) == 0);
  CHECK(read_file(dir.file("cmp_out2") + "/table1.csv") == table);
}

TEST_CASE("cmd_sweep: singleton grid yields one in-range row") {
  TempDir dir("sweep");
  std::string cfg = std::string(kTinyTrainCfg) +
                    "sweep_k=2\nsweep_m=2\nsweep_eval_runs=4\nsweep_iterations=2\n";
  write_file(dir.file("a.cfg"), cfg);
  CliOptions opts;
  opts.config_path = dir.file("a.cfg");
  opts.out_dir = dir.file("out");
  REQUIRE(cmd_sweep(opts) == 0);
  const std::string csv = read_file(dir.file("out") + "/sweep.csv");
  std::stringstream ss(csv);
  std::string header, row, extra;
  REQUIRE(std::getline(ss, header));
  CHECK(header == "k,m,success_pct");
  REQUIRE(std::getline(ss, row));
  CHECK_FALSE(std::getline(ss, extra));
  std::stringstream rs(row);
  std::string k, m, pct;
  std::getline(rs, k, ',');
  std::getline(rs, m, ',');
  std::getline(rs, pct, ',');
  CHECK(k == "2");
  CHECK(m == "2");
  const double val = std::stod(pct);
  CHECK(val >= 0.0);
  CHECK(val <= 100.0);

  // missing grid -> exit 2
  write_file(dir.file("nogrid.cfg"), kTinyTrainCfg);
  CliOptions bad;
  bad.config_path = dir.file("nogrid.cfg");
  bad.out_dir = dir.file("out_bad");
  CHECK(cmd_sweep(bad) == 2);
}
