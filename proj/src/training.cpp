#include "gpg/training.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

namespace gpg {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Flat parameter layout: filter (taps then biases) followed by log_std.
Vec pack_params(const GaussianPolicy& p) {
  const Vec h = p.filter.to_flat();
  Vec theta(h.size() + 2);
  theta.head(h.size()) = h;
  theta(h.size()) = p.log_std(0);
  theta(h.size() + 1) = p.log_std(1);
  return theta;
}

void unpack_params(const Vec& theta, GaussianPolicy& p) {
  const auto widths = p.filter.widths();
  p.filter = FilterTensor::from_flat(theta.head(theta.size() - 2),
                                     widths, p.filter.k_taps());
  p.log_std(0) = theta(theta.size() - 2);
  p.log_std(1) = theta(theta.size() - 1);
}

// Runs fn(i) for i in [0, count) across workers; results must be written to
// pre-sized slots so the reduction order stays index-deterministic.
void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&]() {
      try {
        for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

double EpisodeTrace::episode_return() const {
  double r = 0.0;
  for (const auto& s : steps) r += s.reward;
  return r;
}

int EpisodeTrace::total_collisions() const {
  int c = 0;
  for (const auto& s : steps) c += s.collisions;
  return c;
}

double EpisodeTrace::end_coverage_fraction() const {
  if (steps.empty()) return 0.0;
  return static_cast<double>(steps.back().covered) / initial.n_robots();
}

Vec discounted_returns(const Vec& rewards, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw std::invalid_argument("discounted_returns: gamma must be in [0, 1]");
  Vec g(rewards.size());
  double acc = 0.0;
  for (int t = static_cast<int>(rewards.size()) - 1; t >= 0; --t) {
    acc = rewards(t) + gamma * acc;
    g(t) = acc;
  }
  return g;
}

EpisodeTrace rollout_episode(const RunConfig& cfg, const GaussianPolicy& policy,
                             Rng rng, const RolloutOptions& opts) {
  EpisodeTrace trace;
  WorldState world =
      opts.initial_world ? *opts.initial_world : spawn(cfg, rng);
  world.time_index = 0;
  trace.initial = world;

  Mat prev_positions = world.robot_positions;
  while (true) {
    const Observation obs = build_observation(world, cfg);
    const GraphShiftOperator graph = build_graph(world, cfg);

    double t0 = 0.0;
    if (opts.forward_seconds) t0 = now_seconds();
    ActResult act_res = act(obs.rows, graph, policy, rng);
    if (opts.forward_seconds) *opts.forward_seconds += now_seconds() - t0;

    Mat applied = act_res.actions;
    int interventions = 0;
    if (opts.vo) {
      // Neighbor velocities are finite-differenced from the previous step.
      Mat velocities = (world.robot_positions - prev_positions) / cfg.dt;
      if (opts.forward_seconds) t0 = now_seconds();
      VOConfig vo_cfg = opts.vo->config;
      vo_cfg.max_speed = cfg.a_max;
      const VOResult vo = vo_filter(world.robot_positions, velocities,
                                    act_res.actions, vo_cfg);
      if (opts.forward_seconds) *opts.forward_seconds += now_seconds() - t0;
      applied = vo.safe_actions;
      for (bool b : vo.interventions) interventions += b ? 1 : 0;
    }

    prev_positions = world.robot_positions;
    StepOutcome outcome = step(world, applied, cfg);

    StepRecord rec;
    if (opts.for_training) {
      rec.observation = obs.rows;
      rec.graph = graph;
      rec.actions = act_res.actions;
      rec.log_probs = act_res.log_probs;
    }
    rec.positions_after = outcome.next_state.robot_positions;
    rec.reward = outcome.reward;
    if (opts.vo && opts.for_training)
      rec.reward -= opts.vo->training_penalty * interventions;
    rec.covered = outcome.covered_count;
    rec.collisions = outcome.collisions_this_step;
    rec.vo_interventions = interventions;
    trace.steps.push_back(std::move(rec));

    world = std::move(outcome.next_state);
    if (outcome.done) {
      trace.reached_full_coverage = outcome.covered_count == cfg.n_robots;
      break;
    }
  }
  return trace;
}

TrainReportRow policy_gradient_step(const std::vector<EpisodeTrace>& batch,
                                    GaussianPolicy& policy, AdamState& adam,
                                    const TrainParams& params, double gamma,
                                    int iteration) {
  if (batch.empty())
    throw std::invalid_argument("policy_gradient_step: empty batch");

  TrainReportRow row;
  row.iteration = iteration;
  for (const auto& ep : batch) {
    row.mean_return += ep.episode_return();
    row.coverage += ep.end_coverage_fraction();
    row.collision_rate += ep.total_collisions();
  }
  const double b = static_cast<double>(batch.size());
  row.mean_return /= b;
  row.coverage /= b;
  row.collision_rate /= b;

  // Per-episode reward-to-go; the baseline is the per-time-step batch mean
  // over the episodes still running at t, so stragglers are compared against
  // other stragglers rather than against already-finished episodes.
  std::vector<Vec> returns;
  returns.reserve(batch.size());
  int max_len = 0;
  for (const auto& ep : batch) {
    Vec rewards(ep.length());
    for (int t = 0; t < ep.length(); ++t) rewards(t) = ep.steps[t].reward;
    returns.push_back(discounted_returns(rewards, gamma));
    max_len = std::max(max_len, ep.length());
  }
  Vec baseline = Vec::Zero(max_len);
  if (params.baseline && !params.literal_estimator) {
    Vec alive = Vec::Zero(max_len);
    for (const auto& g : returns)
      for (int t = 0; t < g.size(); ++t) {
        baseline(t) += g(t);
        alive(t) += 1.0;
      }
    for (int t = 0; t < max_len; ++t) baseline(t) /= alive(t);
  }

  double weight_scale = 1.0;
  if (params.normalize_advantages && !params.literal_estimator) {
    double sum_sq = 0.0;
    long count = 0;
    for (const auto& g : returns)
      for (int t = 0; t < g.size(); ++t) {
        const double w = g(t) - baseline(t);
        sum_sq += w * w;
        ++count;
      }
    const double rms = std::sqrt(sum_sq / std::max<long>(count, 1));
    weight_scale = 1.0 / std::max(rms, 1e-8);
  }

  FilterTensor grad_filter =
      FilterTensor::zeros(policy.filter.widths(), policy.filter.k_taps());
  Vec2 grad_log_std = Vec2::Zero();
  const Vec2 std = policy.stddev();

  for (std::size_t e = 0; e < batch.size(); ++e) {
    const EpisodeTrace& ep = batch[e];
    for (int t = 0; t < ep.length(); ++t) {
      const StepRecord& srec = ep.steps[t];
      if (srec.observation.size() == 0)
        throw std::invalid_argument(
            "policy_gradient_step: trace was not collected for training");
      const double weight =
          params.literal_estimator
              ? returns[e](0)
              : (returns[e](t) - baseline(t)) * weight_scale;
      if (weight == 0.0) continue;

      ForwardTrace ftrace;
      const Mat mean =
          gnn_forward(srec.observation, srec.graph, policy.filter, &ftrace);
      Mat upstream(mean.rows(), 2);
      for (int i = 0; i < mean.rows(); ++i)
        for (int c = 0; c < 2; ++c) {
          const double z = (srec.actions(i, c) - mean(i, c)) / std(c);
          upstream(i, c) = weight * z / std(c);
          grad_log_std(c) += weight * (z * z - 1.0);
        }
      const GnnGradients g =
          gnn_backward(ftrace, srec.graph, policy.filter, upstream);
      for (int l = 0; l < grad_filter.layers(); ++l) {
        for (int k = 0; k < grad_filter.k_taps(); ++k)
          grad_filter.taps[l][k] += g.filter.taps[l][k];
        grad_filter.biases[l] += g.filter.biases[l];
      }
    }
  }

  Vec grad(grad_filter.parameter_count() + 2);
  grad.head(grad.size() - 2) = grad_filter.to_flat();
  grad(grad.size() - 2) = grad_log_std(0);
  grad(grad.size() - 1) = grad_log_std(1);
  grad /= b;

  if (!grad.allFinite()) {
    row.skipped = true;
    row.grad_norm = std::numeric_limits<double>::quiet_NaN();
    return row;
  }

  const double norm = grad.norm();
  row.grad_norm = norm;
  if (params.grad_clip > 0.0 && norm > params.grad_clip)
    grad *= params.grad_clip / norm;

  if (adam.t == 0) {
    adam.m = Vec::Zero(grad.size());
    adam.v = Vec::Zero(grad.size());
  }
  adam.t += 1;
  adam.m = params.beta1 * adam.m + (1.0 - params.beta1) * grad;
  adam.v = params.beta2 * adam.v +
           (1.0 - params.beta2) * grad.cwiseProduct(grad).eval();
  const double bc1 = 1.0 - std::pow(params.beta1, double(adam.t));
  const double bc2 = 1.0 - std::pow(params.beta2, double(adam.t));

  double lr = params.step_size;
  if (params.step_size_final > 0.0 && params.iterations > 1)
    lr *= std::pow(params.step_size_final / params.step_size,
                   double(iteration) / (params.iterations - 1));

  Vec theta = pack_params(policy);
  for (int i = 0; i < theta.size(); ++i) {
    const double mhat = adam.m(i) / bc1;
    const double vhat = adam.v(i) / bc2;
    theta(i) += lr * mhat / (std::sqrt(vhat) + params.adam_eps);
  }
  unpack_params(theta, policy);
  return row;
}

TrainOutput train(const RunConfig& cfg, const TrainParams& params,
                  const IterationCallback& on_iteration) {
  RunConfig run = cfg;
  run.apply_defaults();
  run.validate();

  const int threads = resolve_threads(params.threads);
  Rng master(run.seed);
  Rng param_rng = master.substream(0x7f00000000000000ULL);

  TrainOutput out;
  out.final_policy.filter =
      FilterTensor::random_init(run.layer_widths, run.k_taps, param_rng);
  const double std_init =
      params.std_init > 0.0 ? params.std_init : 0.5 * run.a_max;
  out.final_policy.log_std.setConstant(std::log(std_init));
  out.best_policy = out.final_policy;

  VOBackup vo_backup;
  vo_backup.config = params.vo;
  vo_backup.training_penalty = params.vo_penalty;

  AdamState adam;
  std::vector<double> coverage_window;
  for (int iter = 0; iter < params.iterations; ++iter) {
    const double t_start = now_seconds();
    std::vector<EpisodeTrace> batch(params.batch_size);
    const GaussianPolicy snapshot = out.final_policy;
    parallel_for(params.batch_size, threads, [&](int b) {
      const std::uint64_t episode_index =
          static_cast<std::uint64_t>(iter) * params.batch_size + b;
      RolloutOptions opts;
      opts.for_training = true;
      opts.vo = params.train_with_vo ? &vo_backup : nullptr;
      batch[b] = rollout_episode(run, snapshot, master.substream(episode_index),
                                 opts);
    });

    TrainReportRow row = policy_gradient_step(batch, out.final_policy, adam,
                                              params, run.gamma, iter);
    row.seconds = now_seconds() - t_start;
    if (out.report.best_iteration < 0 || row.mean_return > out.report.best_return) {
      out.report.best_iteration = iter;
      out.report.best_return = row.mean_return;
      out.best_policy = out.final_policy;
    }
    out.report.rows.push_back(row);
    if (on_iteration) on_iteration(row);

    if (params.target_coverage > 0.0) {
      coverage_window.push_back(row.coverage);
      if (static_cast<int>(coverage_window.size()) > params.coverage_window)
        coverage_window.erase(coverage_window.begin());
      if (static_cast<int>(coverage_window.size()) >= params.coverage_window) {
        double mean = 0.0;
        for (double c : coverage_window) mean += c;
        mean /= coverage_window.size();
        if (mean >= params.target_coverage) break;
      }
    }
  }
  return out;
}

TransferMetrics transfer_eval(const GaussianPolicy& policy,
                              const PolicyMeta& meta, const RunConfig& eval_cfg,
                              int episodes, const TransferOptions& opts) {
  if (episodes < 1)
    throw std::invalid_argument("transfer_eval: episodes must be positive");
  RunConfig cfg = eval_cfg;
  cfg.apply_defaults();
  cfg.validate();
  check_transfer_compatible(policy, meta, cfg);

  GaussianPolicy frozen = policy;
  frozen.log_std.setConstant(std::log(kStdFloor));

  TransferMetrics metrics;
  metrics.episodes = episodes;
  metrics.per_episode.resize(episodes);
  if (opts.record_traces) metrics.traces.resize(episodes);

  Rng master(cfg.seed);
  for (int e = 0; e < episodes; ++e) {
    Rng ep_rng = master.substream(e);
    RolloutOptions ropts;
    ropts.for_training = false;
    ropts.vo = opts.vo;
    if (opts.world_source) ropts.initial_world = opts.world_source(e, ep_rng);
    EpisodeTrace trace = rollout_episode(cfg, frozen, ep_rng, ropts);

    EpisodeMetrics em;
    em.success = trace.reached_full_coverage;
    em.steps = trace.length();
    em.collisions = trace.total_collisions();
    int cover_step = trace.length();
    for (int t = 0; t < trace.length(); ++t)
      if (trace.steps[t].covered == cfg.n_robots) {
        cover_step = t + 1;
        break;
      }
    em.time_to_cover = cover_step * cfg.dt;
    metrics.per_episode[e] = em;
    if (opts.record_traces) metrics.traces[e] = std::move(trace);
  }

  int successes = 0;
  double time_sum = 0.0, collision_sum = 0.0;
  for (const auto& em : metrics.per_episode) {
    successes += em.success ? 1 : 0;
    if (em.success) time_sum += em.time_to_cover;
    collision_sum += em.collisions;
  }
  metrics.success_rate = static_cast<double>(successes) / episodes;
  metrics.mean_time_to_cover =
      successes > 0 ? time_sum / successes
                    : std::numeric_limits<double>::quiet_NaN();
  metrics.mean_collisions = collision_sum / episodes;
  return metrics;
}

}  // namespace gpg
