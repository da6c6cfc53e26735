#include "gpg/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gpg {

namespace {

// splitmix64 finalizer; also used to derive well-separated substream seeds.
std::uint64_t scramble(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

bool WorldState::finite() const {
  return robot_positions.allFinite() && goal_positions.allFinite() &&
         (obstacle_positions.size() == 0 || obstacle_positions.allFinite());
}

std::string to_string(Dynamics d) {
  return d == Dynamics::point_mass ? "point_mass" : "single_integrator";
}

Dynamics dynamics_from_string(const std::string& s) {
  if (s == "point_mass") return Dynamics::point_mass;
  if (s == "single_integrator") return Dynamics::single_integrator;
  throw std::invalid_argument("dynamics: unknown kind '" + s + "'");
}

void RunConfig::apply_defaults() {
  if (robot_radius <= 0.0) robot_radius = 0.1 * min_spawn_separation;
  if (sense_range <= 0.0) sense_range = 10.0 * coverage_radius;
  if (layer_widths.empty()) {
    layer_widths.push_back(observation_width());
    for (int l = 1; l < layers; ++l) layer_widths.push_back(hidden_width);
    layer_widths.push_back(2);
  }
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  if (n_robots < 1) fail("n_robots: must be positive");
  if (!(coverage_radius > 0.0)) fail("coverage_radius: must be > 0");
  if (m_robots < 0) fail("m_robots: must be >= 0");
  if (m_goals < 0) fail("m_goals: must be >= 0");
  if (m_obstacles < 0) fail("m_obstacles: must be >= 0");
  if (m_robots > n_robots - 1) fail("m_robots: must be <= n_robots - 1");
  if (m_goals > n_robots) fail("m_goals: must be <= n_robots");
  if (n_obstacles < 0) fail("n_obstacles: must be >= 0");
  if (n_obstacles > 0 && !(obstacle_radius >= 0.0))
    fail("obstacle_radius: must be >= 0");
  if (k_taps < 1) fail("k_taps: must be positive");
  if (layers < 1) fail("layers: must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma: must be in (0, 1]");
  if (horizon < 1) fail("horizon: must be positive");
  if (!(dt > 0.0)) fail("dt: must be > 0");
  if (!(a_max > 0.0)) fail("a_max: must be > 0");
  if (!(arena_half_width > 0.0)) fail("arena_half_width: must be > 0");
  if (!(min_spawn_separation > 0.0))
    fail("min_spawn_separation: must be > 0");
  if (layer_widths.size() != static_cast<std::size_t>(layers) + 1)
    fail("layer_widths: need exactly layers + 1 entries (d_0..d_L)");
  if (layer_widths.front() != observation_width())
    fail("layer_widths: d_0 must equal 2*(m_robots + m_goals + m_obstacles + 1)");
  if (layer_widths.back() != 2) fail("layer_widths: d_L must be 2");
  for (int w : layer_widths)
    if (w < 1) fail("layer_widths: widths must be positive");
}

Permutation Permutation::identity(int n) {
  Permutation p;
  p.perm.resize(n);
  for (int i = 0; i < n; ++i) p.perm[i] = i;
  return p;
}

Permutation Permutation::random(int n, Rng& rng) {
  Permutation p = identity(n);
  for (int i = n - 1; i > 0; --i)
    std::swap(p.perm[i], p.perm[rng.uniform_int(0, i)]);
  return p;
}

bool Permutation::valid() const {
  std::vector<bool> seen(perm.size(), false);
  for (int v : perm) {
    if (v < 0 || v >= size() || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

Permutation Permutation::inverse() const {
  Permutation inv;
  inv.perm.resize(perm.size());
  for (int i = 0; i < size(); ++i) inv.perm[perm[i]] = i;
  return inv;
}

Mat permute_rows(const Permutation& p, const Mat& x) {
  if (x.rows() != p.size())
    throw std::invalid_argument("permute_rows: row count does not match permutation size");
  Mat out(x.rows(), x.cols());
  for (int i = 0; i < p.size(); ++i) out.row(i) = x.row(p.perm[i]);
  return out;
}

Mat conjugate(const Permutation& p, const Mat& s) {
  if (s.rows() != p.size() || s.cols() != p.size())
    throw std::invalid_argument("conjugate: matrix must be N x N with N = permutation size");
  Mat out(s.rows(), s.cols());
  for (int i = 0; i < p.size(); ++i)
    for (int j = 0; j < p.size(); ++j) out(i, j) = s(p.perm[i], p.perm[j]);
  return out;
}

std::pair<Mat, Mat> apply_permutation(const Permutation& p, const Mat& x,
                                      const Mat& s) {
  if (!p.valid()) throw std::invalid_argument("apply_permutation: invalid permutation");
  return {permute_rows(p, x), conjugate(p, s)};
}

Rng::Rng(std::uint64_t seed) : base_seed_(seed), state_(scramble(seed)) {}

std::uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  return scramble(state_);
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

double Rng::normal() {
  // Box-Muller; the spare value is discarded to keep the stream stateless.
  double u1 = uniform01();
  double u2 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

int Rng::uniform_int(int lo, int hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
  std::uint64_t span = static_cast<std::uint64_t>(hi) - lo + 1;
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t r = next_u64();
  while (r >= limit) r = next_u64();
  return lo + static_cast<int>(r % span);
}

Rng Rng::substream(std::uint64_t index) const {
  return Rng(scramble(base_seed_ ^ scramble(index + 0x51AB5F2E7C4D9B31ULL)));
}

}  // namespace gpg
