#include "gpg/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace gpg {

Assignment hungarian_assign(const Mat& cost) {
  if (cost.rows() != cost.cols() || cost.rows() < 1)
    throw std::invalid_argument("hungarian_assign: cost must be square and nonempty");
  if (!cost.allFinite())
    throw std::invalid_argument("hungarian_assign: non-finite cost entries");
  const int n = static_cast<int>(cost.rows());

  // Shortest augmenting path with potentials (1-based scratch arrays).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }

  Assignment a;
  a.mapping.assign(n, -1);
  for (int j = 1; j <= n; ++j)
    if (match[j]) a.mapping[match[j] - 1] = j - 1;
  for (int i = 0; i < n; ++i) a.total_cost += cost(i, a.mapping[i]);
  return a;
}

CaptPlan capt_plan(const WorldState& world, double speed, double dt,
                   bool squared_costs) {
  if (world.n_obstacles() > 0)
    throw std::runtime_error("capt_plan: obstacles are not supported");
  if (!(speed > 0.0) || !(dt > 0.0))
    throw std::invalid_argument("capt_plan: speed and dt must be positive");
  const int n = world.n_robots();

  Mat cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double d2 =
          (world.robot_positions.row(i) - world.goal_positions.row(j))
              .squaredNorm();
      cost(i, j) = squared_costs ? d2 : std::sqrt(d2);
    }

  CaptPlan plan;
  plan.assignment = hungarian_assign(cost);

  double max_dist = 0.0;
  for (int i = 0; i < n; ++i)
    max_dist = std::max(
        max_dist, (world.goal_positions.row(plan.assignment.mapping[i]) -
                   world.robot_positions.row(i))
                      .norm());
  plan.arrival_time = max_dist / speed;

  const int steps =
      plan.arrival_time == 0.0
          ? 0
          : static_cast<int>(std::ceil(plan.arrival_time / dt - 1e-12));
  plan.waypoints.reserve(steps + 1);
  for (int s = 0; s <= steps; ++s) {
    const double tau = std::min(s * dt, plan.arrival_time);
    const double frac = plan.arrival_time == 0.0 ? 1.0 : tau / plan.arrival_time;
    Mat pos(n, 2);
    for (int i = 0; i < n; ++i)
      pos.row(i) =
          world.robot_positions.row(i) +
          frac * (world.goal_positions.row(plan.assignment.mapping[i]) -
                  world.robot_positions.row(i));
    plan.waypoints.push_back(std::move(pos));
  }
  return plan;
}

double closest_approach(const RowVec2& rel_pos, const RowVec2& rel_vel,
                        double horizon) {
  const double vv = rel_vel.squaredNorm();
  double t = 0.0;
  if (vv > 0.0) t = std::clamp(-rel_pos.dot(rel_vel) / vv, 0.0, horizon);
  const double at_t = (rel_pos + t * rel_vel).norm();
  return std::min(at_t, rel_pos.norm());
}

bool vo_velocity_unsafe(const RowVec2& rel_pos, const RowVec2& v,
                        const RowVec2& nbr_vel, const VOConfig& cfg) {
  const RowVec2 rel_vel = nbr_vel - v;  // neighbor motion relative to us
  if (rel_pos.norm() < cfg.safety_radius)
    return rel_pos.dot(rel_vel) < 0.0;  // already inside: unsafe if approaching
  return closest_approach(rel_pos, rel_vel, cfg.time_horizon) <
         cfg.safety_radius;
}

namespace {

bool velocity_safe_against_all(int robot, const RowVec2& v,
                               const Mat& positions, const Mat& velocities,
                               const VOConfig& cfg) {
  for (int m = 0; m < positions.rows(); ++m) {
    if (m == robot) continue;
    const RowVec2 rel = positions.row(m) - positions.row(robot);
    if (vo_velocity_unsafe(rel, v, velocities.row(m), cfg)) return false;
  }
  return true;
}

}  // namespace

VOResult vo_filter(const Mat& positions, const Mat& velocities,
                   const Mat& nominal, const VOConfig& cfg) {
  const int n = static_cast<int>(positions.rows());
  VOResult res;
  res.safe_actions = nominal;
  res.interventions.assign(n, false);

  for (int r = 0; r < n; ++r) {
    const RowVec2 nom = nominal.row(r);
    if (velocity_safe_against_all(r, nom, positions, velocities, cfg)) continue;

    // Deterministic scan of the direction x magnitude grid; ties in
    // deviation prefer the candidate on the robot's right so reciprocal
    // head-on pairs break symmetry compatibly.
    const RowVec2 heading = nom.norm() > 0.0 ? RowVec2(nom / nom.norm())
                                             : RowVec2(1.0, 0.0);
    bool found = false;
    double best_dev = 0.0;
    bool best_right = false;
    RowVec2 best = RowVec2::Zero();
    for (int i = 0; i < cfg.n_directions; ++i) {
      const double theta = 2.0 * std::numbers::pi * i / cfg.n_directions;
      const RowVec2 dir(std::cos(theta), std::sin(theta));
      for (int j = 1; j <= cfg.n_magnitudes; ++j) {
        const RowVec2 cand = dir * (cfg.max_speed * j / cfg.n_magnitudes);
        if (!velocity_safe_against_all(r, cand, positions, velocities, cfg))
          continue;
        const double dev = (cand - nom).norm();
        const bool right =
            heading(0) * cand(1) - heading(1) * cand(0) < 0.0;
        const bool better =
            !found || dev < best_dev - 1e-12 ||
            (std::abs(dev - best_dev) <= 1e-12 && right && !best_right);
        if (better) {
          found = true;
          best_dev = dev;
          best_right = right;
          best = cand;
        }
      }
    }
    res.safe_actions.row(r) = found ? best : RowVec2::Zero();
    res.interventions[r] = true;
  }
  return res;
}

FormationSpec parse_formation(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  FormationSpec spec;
  if (kind == "line_to_circle")
    spec.kind = FormationKind::line_to_circle;
  else if (kind == "line_to_line")
    spec.kind = FormationKind::line_to_line;
  else if (kind == "grid")
    spec.kind = FormationKind::grid;
  else
    throw std::invalid_argument("formation: unknown kind '" + kind + "'");
  if (colon == std::string::npos || colon + 1 >= text.size())
    throw std::invalid_argument("formation: missing parameter in '" + text + "'");
  try {
    spec.param = std::stod(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw std::invalid_argument("formation: bad parameter in '" + text + "'");
  }
  if (!(spec.param > 0.0))
    throw std::invalid_argument("formation: parameter must be positive");
  return spec;
}

std::string to_string(const FormationSpec& spec) {
  std::string kind;
  switch (spec.kind) {
    case FormationKind::line_to_circle: kind = "line_to_circle"; break;
    case FormationKind::line_to_line: kind = "line_to_line"; break;
    case FormationKind::grid: kind = "grid"; break;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s:%.17g", kind.c_str(), spec.param);
  return buf;
}

WorldState make_formation(const FormationSpec& spec, int n_robots,
                          double spacing, Rng& rng) {
  if (n_robots < 1)
    throw std::invalid_argument("formation: n_robots must be positive");
  WorldState w;
  w.robot_positions.resize(n_robots, 2);
  w.goal_positions.resize(n_robots, 2);
  w.obstacle_positions.resize(0, 2);

  const double jitter = 0.1 * spacing;
  auto jit = [&]() { return rng.uniform(-jitter, jitter); };

  // Robots always start on a horizontal line centered at the origin.
  for (int i = 0; i < n_robots; ++i)
    w.robot_positions.row(i) =
        RowVec2((i - 0.5 * (n_robots - 1)) * spacing + jit(), jit());

  switch (spec.kind) {
    case FormationKind::line_to_circle: {
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (int i = 0; i < n_robots; ++i) {
        const double a = phase + 2.0 * std::numbers::pi * i / n_robots;
        w.goal_positions.row(i) =
            RowVec2(spec.param * std::cos(a), spec.param * std::sin(a));
      }
      break;
    }
    case FormationKind::line_to_line: {
      std::vector<int> order(n_robots);
      for (int i = 0; i < n_robots; ++i) order[i] = i;
      for (int i = n_robots - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_int(0, i)]);
      for (int i = 0; i < n_robots; ++i)
        w.goal_positions.row(i) = RowVec2(
            (order[i] - 0.5 * (n_robots - 1)) * spacing + jit(), spec.param + jit());
      break;
    }
    case FormationKind::grid: {
      const int cols = static_cast<int>(std::ceil(std::sqrt(double(n_robots))));
      const double offset = spec.param * (cols + 2);
      for (int i = 0; i < n_robots; ++i) {
        const int cx = i % cols, cy = i / cols;
        w.goal_positions.row(i) =
            RowVec2(offset + cx * spec.param + jit(),
                    (cy - 0.5 * ((n_robots - 1) / cols)) * spec.param + jit());
      }
      break;
    }
  }
  return w;
}

}  // namespace gpg
