#pragma once

#include "gpg/core.hpp"
#include "gpg/env.hpp"

#include <string>

namespace gpg {

/// Minimum-total-cost perfect matching, robot i -> goal mapping[i].
struct Assignment {
  std::vector<int> mapping;
  double total_cost = 0.0;
};

/// O(N^3) shortest-augmenting-path solver. Throws on non-finite or
/// non-square costs.
Assignment hungarian_assign(const Mat& cost);

/// Centralized CAPT-style plan: optimal assignment on squared distances plus
/// synchronized constant-velocity straight lines, all robots arriving at
/// t* = max_i dist_i / speed.
struct CaptPlan {
  Assignment assignment;
  double arrival_time = 0.0;       // t*
  std::vector<Mat> waypoints;      // robot positions at 0, dt, ..., t*
};

/// Throws std::runtime_error if the world contains obstacles.
CaptPlan capt_plan(const WorldState& world, double speed, double dt,
                   bool squared_costs = true);

struct VOConfig {
  double time_horizon = 2.0;   // seconds
  double safety_radius = 0.2;  // >= 2 * robot_radius
  double max_speed = 1.0;      // candidate magnitude bound
  int n_directions = 64;
  int n_magnitudes = 8;
};

struct VOResult {
  Mat safe_actions;                 // N x 2 velocities
  std::vector<bool> interventions;  // true where the nominal was replaced
};

/// True if driving at velocity `v` brings the robot within safety_radius of
/// a neighbor at position offset `rel_pos` moving at `nbr_vel`, inside the
/// horizon.
bool vo_velocity_unsafe(const RowVec2& rel_pos, const RowVec2& v,
                        const RowVec2& nbr_vel, const VOConfig& cfg);

/// Velocity-obstacles backup: unsafe nominal velocities are replaced by the
/// minimum-deviation safe sample (n_directions x n_magnitudes grid); if none
/// is safe the zero velocity is returned and flagged.
VOResult vo_filter(const Mat& positions, const Mat& velocities,
                   const Mat& nominal, const VOConfig& cfg);

/// Closest approach distance between two constant-velocity robots within
/// [0, horizon] (used by the VO tests as the independent oracle).
double closest_approach(const RowVec2& rel_pos, const RowVec2& rel_vel,
                        double horizon);

enum class FormationKind { line_to_circle, line_to_line, grid };

struct FormationSpec {
  FormationKind kind = FormationKind::line_to_circle;
  double param = 2.0;  // circle radius / line gap / grid spacing
};

FormationSpec parse_formation(const std::string& text);
std::string to_string(const FormationSpec& spec);

/// Deterministic start/goal layout for a formation instance; `spacing` sets
/// the start-line pitch and rng adds a small jitter so repeated runs differ.
WorldState make_formation(const FormationSpec& spec, int n_robots,
                          double spacing, Rng& rng);

}  // namespace gpg
