#pragma once

#include "gpg/gnn.hpp"

#include <string>

namespace gpg {

/// Diagonal-Gaussian policy head on top of the GNN: per-robot mean rows from
/// the filter output, a single trainable log-std pair shared across robots.
struct GaussianPolicy {
  FilterTensor filter;
  Vec2 log_std = Vec2::Zero();

  /// exp(log_std) clamped to [1e-3, 10].
  Vec2 stddev() const;
};

constexpr double kStdFloor = 1e-3;
constexpr double kStdCeil = 10.0;

struct ActTrace {
  ForwardTrace forward;
  Mat mean;     // N x 2
  Mat actions;  // N x 2, the pre-clip samples
};

struct ActResult {
  Mat actions;
  Vec log_probs;  // per robot
  ActTrace trace;
};

/// mu = gnn_forward(X, S, H); a_n ~ Normal(mu_n, diag(std^2)) independently
/// per robot; log_probs are the pre-clip Gaussian log-densities.
ActResult act(const Mat& x, const GraphShiftOperator& s,
              const GaussianPolicy& policy, Rng& rng);

/// Gaussian log-density of each action row under mean/std.
Vec gaussian_log_probs(const Mat& actions, const Mat& mean, const Vec2& std);

struct PolicyGradients {
  FilterTensor filter;  // d(sum_n log pi_n)/dH
  Vec2 log_std;         // d(sum_n log pi_n)/d log_std
};

/// Score-function gradients of the summed per-robot log-probability at the
/// sampled actions. The trace must come from the act call (or an identical
/// re-evaluation) that produced the actions.
PolicyGradients log_prob_grad(const ActTrace& trace, const Mat& actions,
                              const GraphShiftOperator& s,
                              const GaussianPolicy& policy);

/// Sensing/observation shape metadata stored with a checkpoint so transfer
/// runs can validate compatibility.
struct PolicyMeta {
  int m_robots = 0;
  int m_goals = 0;
  int m_obstacles = 0;
  bool absolute_observations = false;
  bool normalize_graph = false;
  Dynamics dynamics = Dynamics::point_mass;
  double sense_range = 0.0;
  double a_max = 0.0;
};

PolicyMeta meta_from_config(const RunConfig& cfg);

/// Checkpoint = the GPGF filter container followed by the log_std pair and
/// the metadata record.
void save_policy(const GaussianPolicy& policy, const PolicyMeta& meta,
                 const std::string& path);
std::pair<GaussianPolicy, PolicyMeta> load_policy(const std::string& path);

/// Throws std::invalid_argument when the eval config is incompatible with
/// the checkpoint (different M counts, observation mode, or widths).
void check_transfer_compatible(const GaussianPolicy& policy,
                               const PolicyMeta& meta, const RunConfig& eval);

}  // namespace gpg
