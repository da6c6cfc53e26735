#pragma once

#include "gpg/core.hpp"

namespace gpg {

/// Per-robot local feature rows X(t). Row n concatenates the robot's own
/// position with the m_robots nearest robots, m_goals nearest goals and, when
/// sensed, m_obstacles nearest obstacles, each block sorted by nondecreasing
/// distance. Offsets are stored relative to the robot unless the config asks
/// for absolute coordinates.
struct Observation {
  Mat rows;  // N x d
};

/// M-nearest-robot communication graph with self loops. S stays binary; the
/// optional degree normalization only affects the edge weights the filters
/// diffuse with.
struct GraphShiftOperator {
  Mat S;                                        // N x N, entries in {0,1}
  std::vector<std::vector<int>> in_neighbors;   // per row, ascending, incl. self
  std::vector<std::vector<double>> edge_weights;  // parallel to in_neighbors
  bool normalized = false;
  Mat W;  // weighted shift, only filled when normalized

  int size() const { return static_cast<int>(S.rows()); }
  /// The matrix the filters actually diffuse with.
  const Mat& shift() const { return normalized ? W : S; }
};

/// Rebuilds neighbor lists/weights from a raw binary matrix (used by tests
/// and by code that manufactures graphs directly).
GraphShiftOperator graph_from_matrix(const Mat& s, bool normalize = false);

struct StepOutcome {
  WorldState next_state;
  double reward;        // covered_count - N, in [-N, 0]
  int covered_count;    // in [0, N]
  int collisions_this_step;
  bool done;
};

/// Rejection-samples a world honoring the spawn separations. Throws
/// std::runtime_error once the 10,000-rejection budget is exhausted.
WorldState spawn(const RunConfig& cfg, Rng& rng);

/// Returns (reward, covered_count): covered_count goals have at least one
/// robot within distance R, reward = covered_count - N.
std::pair<double, int> coverage_reward(const WorldState& w, double coverage_radius);

/// Counts robot-robot pairs closer than 2*robot_radius plus robot-obstacle
/// overlaps. Collisions are recorded, never resolved.
int count_collisions(const WorldState& w, double robot_radius);

/// Clips actions to ||a||_2 <= a_max, integrates the configured dynamics and
/// clamps to the arena. Throws std::invalid_argument on non-finite actions.
StepOutcome step(const WorldState& w, const Mat& actions, const RunConfig& cfg);

Observation build_observation(const WorldState& w, const RunConfig& cfg);

GraphShiftOperator build_graph(const WorldState& w, const RunConfig& cfg);

/// Indices of the m nearest rows of points to `from`, ties broken by lower
/// index; skip_index (its own row) is excluded when >= 0.
std::vector<int> nearest_indices(const Mat& points, const RowVec2& from, int m,
                                 int skip_index);

}  // namespace gpg
