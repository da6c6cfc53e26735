#include "gpg/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace gpg {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

struct MetaRecord {
  std::uint32_t m_robots, m_goals, m_obstacles;
  std::uint8_t absolute_observations, normalize_graph, dynamics, pad;
  double sense_range, a_max;
};

}  // namespace

Vec2 GaussianPolicy::stddev() const {
  Vec2 s;
  for (int c = 0; c < 2; ++c)
    s(c) = std::clamp(std::exp(log_std(c)), kStdFloor, kStdCeil);
  return s;
}

ActResult act(const Mat& x, const GraphShiftOperator& s,
              const GaussianPolicy& policy, Rng& rng) {
  ActResult res;
  res.trace.mean = gnn_forward(x, s, policy.filter, &res.trace.forward);
  if (!res.trace.mean.allFinite())
    throw std::runtime_error("act: non-finite policy mean");
  const Vec2 std = policy.stddev();
  const int n = static_cast<int>(res.trace.mean.rows());
  res.actions.resize(n, 2);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 2; ++c)
      res.actions(i, c) = res.trace.mean(i, c) + std(c) * rng.normal();
  res.trace.actions = res.actions;
  res.log_probs = gaussian_log_probs(res.actions, res.trace.mean, std);
  return res;
}

Vec gaussian_log_probs(const Mat& actions, const Mat& mean, const Vec2& std) {
  const int n = static_cast<int>(actions.rows());
  Vec lp(n);
  for (int i = 0; i < n; ++i) {
    double v = 0.0;
    for (int c = 0; c < 2; ++c) {
      const double z = (actions(i, c) - mean(i, c)) / std(c);
      v += -std::log(std(c)) - 0.5 * kLog2Pi - 0.5 * z * z;
    }
    lp(i) = v;
  }
  return lp;
}

PolicyGradients log_prob_grad(const ActTrace& trace, const Mat& actions,
                              const GraphShiftOperator& s,
                              const GaussianPolicy& policy) {
  if (actions.rows() != trace.mean.rows() || actions.cols() != 2)
    throw std::invalid_argument("log_prob_grad: action shape mismatch");
  const Vec2 std = policy.stddev();
  const int n = static_cast<int>(actions.rows());

  // d(sum log pi)/d mu = (a - mu) / std^2, back-propagated through the GNN.
  Mat upstream(n, 2);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 2; ++c)
      upstream(i, c) = (actions(i, c) - trace.mean(i, c)) / (std(c) * std(c));

  PolicyGradients g;
  g.filter = gnn_backward(trace.forward, s, policy.filter, upstream).filter;
  g.log_std.setZero();
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 2; ++c) {
      const double z = (actions(i, c) - trace.mean(i, c)) / std(c);
      g.log_std(c) += z * z - 1.0;
    }
  return g;
}

PolicyMeta meta_from_config(const RunConfig& cfg) {
  PolicyMeta m;
  m.m_robots = cfg.m_robots;
  m.m_goals = cfg.m_goals;
  m.m_obstacles = cfg.m_obstacles;
  m.absolute_observations = cfg.absolute_observations;
  m.normalize_graph = cfg.normalize_graph;
  m.dynamics = cfg.dynamics;
  m.sense_range = cfg.sense_range;
  m.a_max = cfg.a_max;
  return m;
}

void save_policy(const GaussianPolicy& policy, const PolicyMeta& meta,
                 const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_policy: cannot open " + path);
  save_filter(policy.filter, out);
  for (int c = 0; c < 2; ++c) {
    double v = policy.log_std(c);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  MetaRecord rec{};
  rec.m_robots = static_cast<std::uint32_t>(meta.m_robots);
  rec.m_goals = static_cast<std::uint32_t>(meta.m_goals);
  rec.m_obstacles = static_cast<std::uint32_t>(meta.m_obstacles);
  rec.absolute_observations = meta.absolute_observations ? 1 : 0;
  rec.normalize_graph = meta.normalize_graph ? 1 : 0;
  rec.dynamics = meta.dynamics == Dynamics::single_integrator ? 1 : 0;
  rec.sense_range = meta.sense_range;
  rec.a_max = meta.a_max;
  out.write(reinterpret_cast<const char*>(&rec), sizeof rec);
  if (!out) throw std::runtime_error("save_policy: write failed for " + path);
}

std::pair<GaussianPolicy, PolicyMeta> load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_policy: cannot open " + path);
  GaussianPolicy policy;
  policy.filter = load_filter(in);
  for (int c = 0; c < 2; ++c) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("load_policy: truncated log_std record");
    policy.log_std(c) = v;
  }
  MetaRecord rec{};
  in.read(reinterpret_cast<char*>(&rec), sizeof rec);
  if (!in) throw std::runtime_error("load_policy: truncated metadata record");
  PolicyMeta meta;
  meta.m_robots = static_cast<int>(rec.m_robots);
  meta.m_goals = static_cast<int>(rec.m_goals);
  meta.m_obstacles = static_cast<int>(rec.m_obstacles);
  meta.absolute_observations = rec.absolute_observations != 0;
  meta.normalize_graph = rec.normalize_graph != 0;
  meta.dynamics = rec.dynamics != 0 ? Dynamics::single_integrator
                                    : Dynamics::point_mass;
  meta.sense_range = rec.sense_range;
  meta.a_max = rec.a_max;
  return {policy, meta};
}

void check_transfer_compatible(const GaussianPolicy& policy,
                               const PolicyMeta& meta, const RunConfig& eval) {
  const auto widths = policy.filter.widths();
  if (eval.observation_width() != widths.front())
    throw std::invalid_argument(
        "transfer: eval observation width " +
        std::to_string(eval.observation_width()) +
        " does not match checkpoint d_0 " + std::to_string(widths.front()));
  if (eval.m_robots != meta.m_robots || eval.m_goals != meta.m_goals ||
      eval.m_obstacles != meta.m_obstacles)
    throw std::invalid_argument(
        "transfer: sensing counts (m_robots, m_goals, m_obstacles) differ "
        "between training and eval");
  if (eval.absolute_observations != meta.absolute_observations)
    throw std::invalid_argument(
        "transfer: observation mode differs between training and eval");
  if (eval.normalize_graph != meta.normalize_graph)
    throw std::invalid_argument(
        "transfer: graph normalization differs between training and eval");
  if (eval.n_robots < std::max(meta.m_robots + 1, meta.m_goals))
    throw std::invalid_argument(
        "transfer: eval n_robots too small for the checkpoint's sensing counts");
}

}  // namespace gpg
