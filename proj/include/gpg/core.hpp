#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gpg {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Vec2 = Eigen::Vector2d;
using RowVec2 = Eigen::RowVector2d;

/// Ground-truth simulation state at one discrete time step. Positions are
/// row-per-entity matrices in meters; robots and goals always come in equal
/// numbers.
struct WorldState {
  Mat robot_positions;     // N x 2
  Mat goal_positions;      // N x 2
  Mat obstacle_positions;  // O x 2, possibly empty
  double obstacle_radius = 0.0;
  int time_index = 0;

  int n_robots() const { return static_cast<int>(robot_positions.rows()); }
  int n_obstacles() const { return static_cast<int>(obstacle_positions.rows()); }
  bool finite() const;
};

enum class Dynamics { point_mass, single_integrator };

std::string to_string(Dynamics d);
Dynamics dynamics_from_string(const std::string& s);

/// Per-run environment and policy-shape parameters. Fields left negative pick
/// up derived defaults in apply_defaults().
struct RunConfig {
  int n_robots = 3;
  double coverage_radius = 0.3;  // R
  int m_robots = 1;
  int m_goals = 2;
  int m_obstacles = 0;
  int n_obstacles = 0;
  double obstacle_radius = 0.2;
  int k_taps = 2;                 // K, filter taps per layer
  int layers = 2;                 // L
  std::vector<int> layer_widths;  // d_0..d_L; empty = derive
  double gamma = 0.95;
  int horizon = 200;  // T
  Dynamics dynamics = Dynamics::point_mass;
  double dt = 0.1;
  double a_max = 0.25;
  std::uint64_t seed = 1;
  double arena_half_width = 1.5;
  double min_spawn_separation = 0.4;

  double robot_radius = -1.0;  // default 0.1 * min_spawn_separation
  double sense_range = -1.0;   // default 10 * coverage_radius
  bool absolute_observations = false;
  bool normalize_graph = false;
  int hidden_width = 32;  // used when layer_widths is derived

  int observation_width() const {
    return 2 * (m_robots + m_goals + m_obstacles + 1);
  }
  void apply_defaults();
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Permutation on {0..N-1} stored as an index array: row i of the permuted
/// output is row perm[i] of the input, so applying it computes P^T X and
/// P^T S P by pure index gathers.
struct Permutation {
  std::vector<int> perm;

  static Permutation identity(int n);
  static Permutation random(int n, class Rng& rng);

  int size() const { return static_cast<int>(perm.size()); }
  bool valid() const;
  Permutation inverse() const;
};

Mat permute_rows(const Permutation& p, const Mat& x);
Mat conjugate(const Permutation& p, const Mat& s);
/// Returns (P^T X, P^T S P). Throws on dimension mismatch.
std::pair<Mat, Mat> apply_permutation(const Permutation& p, const Mat& x,
                                      const Mat& s);

/// Deterministic seeded random stream. Same seed gives bit-identical draws
/// on the same build; substream(i) derives an independent stream per episode
/// index.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform01();  // [0, 1), 53-bit resolution
  double uniform(double lo, double hi);
  double normal();                       // standard normal
  int uniform_int(int lo, int hi);       // inclusive bounds
  Rng substream(std::uint64_t index) const;

 private:
  std::uint64_t base_seed_;
  std::uint64_t state_;
};

}  // namespace gpg
