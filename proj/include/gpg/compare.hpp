#pragma once

#include "gpg/training.hpp"

namespace gpg {

/// Aggregated per-method results for one formation: simulated time to full
/// coverage (seconds) and collision counts, plus wall-clock planning time.
struct MethodStats {
  double time_mean = 0.0, time_std = 0.0;
  double collisions_mean = 0.0, collisions_std = 0.0;
  double planning_seconds_mean = 0.0;
};

struct FormationComparison {
  FormationSpec spec;
  MethodStats capt, gpg, gpg_vo;
};

struct CompareOptions {
  int runs = 20;
  double spacing = 0.5;          // start-line pitch
  VOConfig vo;
};

/// Runs CAPT, GPG and GPG+VO on identical instances of each formation.
/// Simulated times and collision counts are deterministic per seed; only the
/// planning_seconds fields carry wall-clock measurements.
std::vector<FormationComparison> compare_run(
    const GaussianPolicy& policy, const PolicyMeta& meta,
    const RunConfig& eval_cfg, const std::vector<FormationSpec>& formations,
    const CompareOptions& opts);

}  // namespace gpg
