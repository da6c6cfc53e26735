#pragma once

#include "gpg/compare.hpp"

#include <string>

namespace gpg {

/// Config-file problem with a line anchor; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& file, int line, const std::string& message)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + message),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Everything a command needs: the run config plus training, evaluation,
/// comparison and sweep settings.
struct ExperimentConfig {
  RunConfig run;
  TrainParams train;
  int eval_episodes = 50;
  int eval_horizon = 0;  // 0 = use run.horizon
  std::vector<FormationSpec> formations;
  FormationSpec eval_formation;
  bool has_eval_formation = false;
  double formation_spacing = 0.5;
  int compare_runs = 20;
  std::vector<int> sweep_k;
  std::vector<int> sweep_m;
  int sweep_eval_runs = 100;
  int sweep_iterations = 0;  // 0 = train.iterations
  std::string out_dir;
};

/// Flat key=value text format, '#' comments, unknown keys are errors.
ExperimentConfig load_config(const std::string& path);

/// Writes every key with its resolved value; reloading the result yields an
/// identical configuration.
void write_resolved_config(const ExperimentConfig& cfg, const std::string& path);

/// Deterministic float formatting shared by all CSV writers.
std::string format_double(double v);

}  // namespace gpg
