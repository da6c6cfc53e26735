#include "gpg/env.hpp"

#include <algorithm>
#include <cmath>

namespace gpg {

namespace {

constexpr int kSpawnBudget = 10000;


double min_distance_to_rows(const Mat& rows, const RowVec2& p, int count) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < count; ++i)
    best = std::min(best, (rows.row(i) - p).norm());
  return best;
}

// Samples one point subject to a feasibility predicate, sharing the global
// rejection budget across the whole spawn.
RowVec2 sample_point(const RunConfig& cfg, Rng& rng, int& rejections,
                     const std::function<bool(const RowVec2&)>& ok) {
  while (true) {
    RowVec2 p(rng.uniform(-cfg.arena_half_width, cfg.arena_half_width),
              rng.uniform(-cfg.arena_half_width, cfg.arena_half_width));
    if (ok(p)) return p;
    if (++rejections > kSpawnBudget)
      throw std::runtime_error(
          "spawn: rejection budget exhausted; arena cannot fit the requested "
          "entities at min_spawn_separation");
  }
}

}  // namespace

WorldState spawn(const RunConfig& cfg, Rng& rng) {
  const int n = cfg.n_robots;
  const double sep = cfg.min_spawn_separation;
  WorldState w;
  w.obstacle_radius = cfg.n_obstacles > 0 ? cfg.obstacle_radius : 0.0;
  w.obstacle_positions.resize(cfg.n_obstacles, 2);
  w.robot_positions.resize(n, 2);
  w.goal_positions.resize(n, 2);

  int rejections = 0;
  for (int i = 0; i < cfg.n_obstacles; ++i) {
    w.obstacle_positions.row(i) =
        sample_point(cfg, rng, rejections, [&](const RowVec2& p) {
          return min_distance_to_rows(w.obstacle_positions, p, i) >=
                 sep + 2.0 * cfg.obstacle_radius;
        });
  }
  auto clear_of_obstacles = [&](const RowVec2& p) {
    return cfg.n_obstacles == 0 ||
           min_distance_to_rows(w.obstacle_positions, p, cfg.n_obstacles) >=
               sep + cfg.obstacle_radius;
  };
  for (int i = 0; i < n; ++i) {
    w.robot_positions.row(i) =
        sample_point(cfg, rng, rejections, [&](const RowVec2& p) {
          return min_distance_to_rows(w.robot_positions, p, i) >= sep &&
                 clear_of_obstacles(p);
        });
  }
  for (int i = 0; i < n; ++i) {
    w.goal_positions.row(i) =
        sample_point(cfg, rng, rejections, [&](const RowVec2& p) {
          return min_distance_to_rows(w.goal_positions, p, i) >= sep &&
                 clear_of_obstacles(p);
        });
  }
  return w;
}

std::pair<double, int> coverage_reward(const WorldState& w,
                                       double coverage_radius) {
  const int n = w.n_robots();
  int covered = 0;
  for (int g = 0; g < n; ++g) {
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < n; ++r)
      best = std::min(best,
                      (w.goal_positions.row(g) - w.robot_positions.row(r)).norm());
    if (best <= coverage_radius) ++covered;
  }
  return {static_cast<double>(covered - n), covered};
}

int count_collisions(const WorldState& w, double robot_radius) {
  const int n = w.n_robots();
  int count = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if ((w.robot_positions.row(i) - w.robot_positions.row(j)).norm() <
          2.0 * robot_radius)
        ++count;
  for (int i = 0; i < n; ++i)
    for (int o = 0; o < w.n_obstacles(); ++o)
      if ((w.robot_positions.row(i) - w.obstacle_positions.row(o)).norm() <
          robot_radius + w.obstacle_radius)
        ++count;
  return count;
}

StepOutcome step(const WorldState& w, const Mat& actions,
                 const RunConfig& cfg) {
  const int n = w.n_robots();
  if (actions.rows() != n || actions.cols() != 2)
    throw std::invalid_argument("step: actions must be N x 2");
  if (!actions.allFinite())
    throw std::invalid_argument("step: actions contain non-finite values");

  StepOutcome out;
  out.next_state = w;
  out.next_state.time_index = w.time_index + 1;
  for (int i = 0; i < n; ++i) {
    RowVec2 a = actions.row(i);
    double norm = a.norm();
    if (norm > cfg.a_max) a *= cfg.a_max / norm;
    if (cfg.dynamics == Dynamics::single_integrator) a *= cfg.dt;
    RowVec2 next = w.robot_positions.row(i) + a;
    next(0) = std::clamp(next(0), -cfg.arena_half_width, cfg.arena_half_width);
    next(1) = std::clamp(next(1), -cfg.arena_half_width, cfg.arena_half_width);
    out.next_state.robot_positions.row(i) = next;
  }
  auto [reward, covered] = coverage_reward(out.next_state, cfg.coverage_radius);
  out.reward = reward;
  out.covered_count = covered;
  out.collisions_this_step = count_collisions(out.next_state, cfg.robot_radius);
  out.done = covered == n || out.next_state.time_index >= cfg.horizon;
  return out;
}

std::vector<int> nearest_indices(const Mat& points, const RowVec2& from, int m,
                                 int skip_index) {
  std::vector<std::pair<double, int>> dist;
  dist.reserve(points.rows());
  for (int i = 0; i < points.rows(); ++i) {
    if (i == skip_index) continue;
    dist.emplace_back((points.row(i) - from).squaredNorm(), i);
  }
  int take = std::min<int>(m, static_cast<int>(dist.size()));
  std::partial_sort(dist.begin(), dist.begin() + take, dist.end());
  std::vector<int> out(take);
  for (int i = 0; i < take; ++i) out[i] = dist[i].second;
  return out;
}

Observation build_observation(const WorldState& w, const RunConfig& cfg) {
  const int n = w.n_robots();
  const int d = cfg.observation_width();
  Observation obs;
  obs.rows.setZero(n, d);

  const double range = cfg.sense_range > 0.0 ? cfg.sense_range
                                             : 10.0 * cfg.coverage_radius;
  auto store = [&](int row, int slot, const RowVec2& entity,
                   const RowVec2& own) {
    if (cfg.absolute_observations) {
      obs.rows.block<1, 2>(row, 2 * slot) = entity;
      return;
    }
    RowVec2 rel = entity - own;
    double norm = rel.norm();
    if (norm > range) rel *= range / norm;  // saturate, keep direction
    obs.rows.block<1, 2>(row, 2 * slot) = rel;
  };

  for (int i = 0; i < n; ++i) {
    RowVec2 own = w.robot_positions.row(i);
    int slot = 0;
    if (cfg.absolute_observations)
      obs.rows.block<1, 2>(i, 0) = own;
    ++slot;  // relative mode leaves the own-position slot at zero
    for (int j : nearest_indices(w.robot_positions, own, cfg.m_robots, i))
      store(i, slot++, w.robot_positions.row(j), own);
    slot = 1 + cfg.m_robots;
    for (int j : nearest_indices(w.goal_positions, own, cfg.m_goals, -1))
      store(i, slot++, w.goal_positions.row(j), own);
    slot = 1 + cfg.m_robots + cfg.m_goals;
    if (cfg.m_obstacles > 0 && w.n_obstacles() > 0) {
      for (int j :
           nearest_indices(w.obstacle_positions, own, cfg.m_obstacles, -1))
        store(i, slot++, w.obstacle_positions.row(j), own);
    }
  }
  return obs;
}

GraphShiftOperator graph_from_matrix(const Mat& s, bool normalize) {
  GraphShiftOperator g;
  g.S = s;
  g.normalized = normalize;
  const int n = static_cast<int>(s.rows());
  g.in_neighbors.resize(n);
  g.edge_weights.resize(n);
  std::vector<double> in_degree(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (s(i, j) != 0.0) in_degree[i] += 1.0;
  if (normalize) g.W = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (s(i, j) == 0.0) continue;
      g.in_neighbors[i].push_back(j);
      const double w =
          normalize ? 1.0 / std::sqrt(in_degree[i] * in_degree[j]) : 1.0;
      g.edge_weights[i].push_back(w);
      if (normalize) g.W(i, j) = w;
    }
  }
  return g;
}

GraphShiftOperator build_graph(const WorldState& w, const RunConfig& cfg) {
  const int n = w.n_robots();
  Mat s = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    s(i, i) = 1.0;
    for (int j :
         nearest_indices(w.robot_positions, w.robot_positions.row(i),
                         cfg.m_robots, i))
      s(i, j) = 1.0;
  }
  return graph_from_matrix(s, cfg.normalize_graph);
}

}  // namespace gpg
