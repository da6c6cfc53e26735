#include "gpg/compare.hpp"

#include <chrono>
#include <cmath>

namespace gpg {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct Accumulator {
  std::vector<double> times, collisions;
  double planning = 0.0;

  void add(double t, double c) {
    times.push_back(t);
    collisions.push_back(c);
  }
  MethodStats stats() const {
    MethodStats s;
    const double n = static_cast<double>(times.size());
    for (double t : times) s.time_mean += t;
    for (double c : collisions) s.collisions_mean += c;
    s.time_mean /= n;
    s.collisions_mean /= n;
    for (double t : times)
      s.time_std += (t - s.time_mean) * (t - s.time_mean);
    for (double c : collisions)
      s.collisions_std += (c - s.collisions_mean) * (c - s.collisions_mean);
    s.time_std = std::sqrt(s.time_std / n);
    s.collisions_std = std::sqrt(s.collisions_std / n);
    s.planning_seconds_mean = planning / n;
    return s;
  }
};

// Coverage time along a CAPT waypoint sequence, on the same dt grid and
// with the same coverage test the policy rollouts use.
double capt_cover_time(const CaptPlan& plan, const WorldState& world,
                       const RunConfig& cfg) {
  WorldState probe = world;
  for (std::size_t s = 0; s < plan.waypoints.size(); ++s) {
    probe.robot_positions = plan.waypoints[s];
    auto [reward, covered] = coverage_reward(probe, cfg.coverage_radius);
    (void)reward;
    if (covered == probe.n_robots()) return s * cfg.dt;
  }
  return plan.arrival_time;
}

int capt_collision_count(const CaptPlan& plan, const WorldState& world,
                         double robot_radius) {
  WorldState probe = world;
  int total = 0;
  for (const auto& wp : plan.waypoints) {
    probe.robot_positions = wp;
    total += count_collisions(probe, robot_radius);
  }
  return total;
}

}  // namespace

std::vector<FormationComparison> compare_run(
    const GaussianPolicy& policy, const PolicyMeta& meta,
    const RunConfig& eval_cfg, const std::vector<FormationSpec>& formations,
    const CompareOptions& opts) {
  RunConfig cfg = eval_cfg;
  cfg.apply_defaults();
  cfg.validate();
  check_transfer_compatible(policy, meta, cfg);
  if (opts.runs < 1)
    throw std::invalid_argument("compare_run: runs must be positive");

  GaussianPolicy frozen = policy;
  frozen.log_std.setConstant(std::log(kStdFloor));

  VOBackup vo_backup;
  vo_backup.config = opts.vo;

  std::vector<FormationComparison> results;
  Rng master(cfg.seed);
  std::uint64_t instance = 0;
  for (const auto& spec : formations) {
    Accumulator capt_acc, gpg_acc, vo_acc;
    for (int run = 0; run < opts.runs; ++run, ++instance) {
      Rng world_rng = master.substream(instance * 4);
      const WorldState world = make_formation(spec, cfg.n_robots, opts.spacing,
                                              world_rng);

      double t0 = now_seconds();
      const CaptPlan plan = capt_plan(world, cfg.a_max, cfg.dt);
      capt_acc.planning += now_seconds() - t0;
      capt_acc.add(capt_cover_time(plan, world, cfg),
                   capt_collision_count(plan, world, cfg.robot_radius));

      {
        RolloutOptions ropts;
        ropts.for_training = false;
        ropts.initial_world = world;
        double forward_seconds = 0.0;
        ropts.forward_seconds = &forward_seconds;
        EpisodeTrace trace =
            rollout_episode(cfg, frozen, master.substream(instance * 4 + 1), ropts);
        gpg_acc.planning += forward_seconds;
        double cover_time = cfg.horizon * cfg.dt;
        for (int t = 0; t < trace.length(); ++t)
          if (trace.steps[t].covered == cfg.n_robots) {
            cover_time = (t + 1) * cfg.dt;
            break;
          }
        gpg_acc.add(cover_time, trace.total_collisions());
      }

      {
        RolloutOptions ropts;
        ropts.for_training = false;
        ropts.initial_world = world;
        ropts.vo = &vo_backup;
        double forward_seconds = 0.0;
        ropts.forward_seconds = &forward_seconds;
        EpisodeTrace trace =
            rollout_episode(cfg, frozen, master.substream(instance * 4 + 2), ropts);
        vo_acc.planning += forward_seconds;
        double cover_time = cfg.horizon * cfg.dt;
        for (int t = 0; t < trace.length(); ++t)
          if (trace.steps[t].covered == cfg.n_robots) {
            cover_time = (t + 1) * cfg.dt;
            break;
          }
        vo_acc.add(cover_time, trace.total_collisions());
      }
    }
    FormationComparison fc;
    fc.spec = spec;
    fc.capt = capt_acc.stats();
    fc.gpg = gpg_acc.stats();
    fc.gpg_vo = vo_acc.stats();
    results.push_back(fc);
  }
  return results;
}

}  // namespace gpg
