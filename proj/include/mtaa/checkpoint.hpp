#pragma once

#include "mtaa/nn.hpp"

#include <filesystem>
#include <optional>

namespace mtaa {

/// Optimizer and progress state stored alongside the model so training can
/// resume mid-schedule.
struct TrainerState {
  int epoch = 0;  // last completed epoch (1-based)
  double best_val = std::numeric_limits<double>::infinity();
  Vec vel_shared;
  std::vector<Vec> vel_heads;
};

struct Checkpoint {
  ModelParams params;
  std::optional<TrainerState> trainer;
};

/// Binary checkpoint container, version 1. Layout (little-endian):
///   magic "MTAACKPT", u32 version,
///   architecture: i32 input_dim, u32 n_enc_hidden, i32[n], i32 latent_dim,
///     u32 n_head_hidden, i32[n], i32 num_tasks, i32 num_levels, u32 activation,
///   u64 shared length + f64 payload, per head u64 length + f64 payload,
///   u8 has_trainer_state, then i32 epoch, f64 best_val and the velocity
///   vectors in the same shape as the parameters.
/// Save/load round-trips are bit-exact.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mtaa
