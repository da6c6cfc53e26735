#pragma once

#include "gpg/baselines.hpp"
#include "gpg/policy.hpp"

#include <functional>
#include <optional>

namespace gpg {

/// One recorded environment transition. Observation/graph are only kept when
/// the rollout is collected for gradient estimation.
struct StepRecord {
  Mat observation;          // N x d
  GraphShiftOperator graph;
  Mat actions;              // pre-clip policy samples
  Vec log_probs;
  Mat positions_after;      // N x 2
  double reward = 0.0;
  int covered = 0;
  int collisions = 0;
  int vo_interventions = 0;
};

struct EpisodeTrace {
  WorldState initial;
  std::vector<StepRecord> steps;
  bool reached_full_coverage = false;

  int length() const { return static_cast<int>(steps.size()); }
  double episode_return() const;  // plain sum of rewards
  int total_collisions() const;
  double end_coverage_fraction() const;
};

/// G_t = sum_{s >= t} gamma^{s-t} r_s.
Vec discounted_returns(const Vec& rewards, double gamma);

struct VOBackup {
  VOConfig config;
  double training_penalty = 1.0;  // subtracted per intervening robot per step
};

struct RolloutOptions {
  bool for_training = true;
  std::optional<WorldState> initial_world;  // default: spawn(cfg)
  const VOBackup* vo = nullptr;
  double* forward_seconds = nullptr;  // accumulates policy inference time
};

EpisodeTrace rollout_episode(const RunConfig& cfg, const GaussianPolicy& policy,
                             Rng rng, const RolloutOptions& opts = {});

struct TrainParams {
  int iterations = 500;
  int batch_size = 32;
  double step_size = 3e-4;
  double step_size_final = 0.0;  // >0: exponential decay to this value
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool baseline = true;
  bool literal_estimator = false;  // paper-style whole-trajectory weights
  bool normalize_advantages = false;  // rescale weights by their batch RMS
  double grad_clip = 10.0;
  double std_init = -1.0;          // default 0.5 * a_max
  double target_coverage = 0.0;    // early stop when rolling mean reaches it
  int coverage_window = 20;
  int threads = 0;                 // 0 = hardware concurrency
  bool train_with_vo = false;
  VOConfig vo;
  double vo_penalty = 1.0;
};

struct TrainReportRow {
  int iteration = 0;
  double mean_return = 0.0;
  double coverage = 0.0;        // mean end-of-episode coverage fraction
  double collision_rate = 0.0;  // mean collisions per episode
  double grad_norm = 0.0;
  double seconds = 0.0;         // wall clock, reporting only (not in CSV)
  bool skipped = false;         // non-finite gradient, update skipped
};

struct TrainReport {
  std::vector<TrainReportRow> rows;
  int best_iteration = -1;
  double best_return = 0.0;
};

struct AdamState {
  Vec m, v;
  long t = 0;
};

/// One REINFORCE update from a batch of traces. Returns the report row;
/// policy/state are untouched when the gradient is non-finite.
TrainReportRow policy_gradient_step(const std::vector<EpisodeTrace>& batch,
                                    GaussianPolicy& policy, AdamState& adam,
                                    const TrainParams& params, double gamma,
                                    int iteration);

struct TrainOutput {
  GaussianPolicy final_policy;
  GaussianPolicy best_policy;
  TrainReport report;
};

using IterationCallback = std::function<void(const TrainReportRow&)>;

/// Full training loop: batches of parallel rollouts + gradient steps.
/// Deterministic given (config.seed, params); independent of thread count.
TrainOutput train(const RunConfig& cfg, const TrainParams& params,
                  const IterationCallback& on_iteration = nullptr);

struct EpisodeMetrics {
  bool success = false;
  double time_to_cover = 0.0;  // seconds (steps * dt), horizon-capped
  int collisions = 0;
  int steps = 0;
};

struct TransferMetrics {
  int episodes = 0;
  double success_rate = 0.0;
  double mean_time_to_cover = 0.0;  // over successful episodes; NaN if none
  double mean_collisions = 0.0;
  std::vector<EpisodeMetrics> per_episode;
  std::vector<EpisodeTrace> traces;  // kept when record_traces is set
};

using WorldSource = std::function<WorldState(int episode_index, Rng& rng)>;

struct TransferOptions {
  bool record_traces = false;
  const VOBackup* vo = nullptr;
  WorldSource world_source;  // default: spawn(eval_cfg)
};

/// Runs the frozen policy (std floored to 1e-3) for `episodes` episodes on
/// eval_cfg. Throws std::invalid_argument on checkpoint/config width
/// mismatch or episodes < 1.
TransferMetrics transfer_eval(const GaussianPolicy& policy,
                              const PolicyMeta& meta, const RunConfig& eval_cfg,
                              int episodes, const TransferOptions& opts = {});

}  // namespace gpg
