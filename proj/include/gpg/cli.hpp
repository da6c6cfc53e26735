#pragma once

#include "gpg/config.hpp"

#include <optional>
#include <string>

namespace gpg {

struct CliOptions {
  std::string config_path;
  std::string checkpoint_path;
  std::string out_dir;  // empty = derive from GPG_OUT / config stem
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
int cmd_train(const CliOptions& opts);
int cmd_eval(const CliOptions& opts);
int cmd_transfer(const CliOptions& opts);
int cmd_compare(const CliOptions& opts);
int cmd_sweep(const CliOptions& opts);
int cmd_render(const CliOptions& opts);  // config_path names the trajectory file

/// Long-format plot CSV (t, entity_kind, id, x, y) for a trajectory file;
/// re-rendering its own output is the identity.
void render_trajectory(const std::string& input_path, std::ostream& out);

/// Episode trace <-> trajectory JSON used by eval/transfer outputs.
void write_trajectory_json(const EpisodeTrace& trace, double dt,
                           const std::string& path);

}  // namespace gpg
