#pragma once

#include "mtaa/checkpoint.hpp"
#include "mtaa/data.hpp"
#include "mtaa/metrics.hpp"
#include "mtaa/moo.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mtaa {

enum class TrainMode { kLinear, kMgdaUb };

TrainMode train_mode_from_string(const std::string& name);
std::string to_string(TrainMode mode);

/// Full training configuration. Optimizer defaults follow the reference
/// recipe: momentum SGD at 0.9, initial learning rate 1e-4, halved every 30
/// epochs.
struct TrainConfig {
  TrainMode mode = TrainMode::kMgdaUb;
  Vec linear_weights;  // linear mode; empty means uniform 1/T
  double lr = 1e-4;
  double momentum = 0.9;
  int lr_halve_every = 30;
  int epochs = 30;
  int batch_size = 16;
  std::uint64_t seed = 0;
  EmdConfig emd{};
  Preprocessing preprocessing = Preprocessing::kPadRescale;
  Architecture arch;
  int delta_every = 1;  // recompute delta every k steps in mgda-ub mode
  SplitSpec split{};

  void validate() const;
  /// Fixed task weights for linear mode (uniform when unset).
  TaskWeights linear_task_weights() const;
};

/// Learning rate at 1-based epoch e: lr0 * 0.5^floor((e-1)/halve_every).
double lr_at_epoch(double lr0, int halve_every, int epoch);

struct TrainLog {
  struct EpochRow {
    int epoch = 0;
    double lr = 0.0;
    std::vector<double> train_emd;  // per task
    std::vector<double> val_emd;    // per task
  };
  struct DeltaRow {
    int epoch = 0;
    int step = 0;
    Vec delta;
    double combined_norm = 0.0;
    int iterations = 0;
    bool converged = false;
  };

  TrainMode mode = TrainMode::kLinear;
  bool aborted = false;
  int best_epoch = 0;
  std::vector<EpochRow> epochs;
  std::vector<DeltaRow> deltas;  // mgda-ub mode only
};

std::string format_train_log(const TrainLog& log);
TrainLog parse_train_log(const std::string& text);
void save_train_log(const std::filesystem::path& path, const TrainLog& log);
TrainLog load_train_log(const std::filesystem::path& path);

struct TrainResult {
  ModelParams params;  // best-validation checkpoint
  TrainLog log;
  int best_epoch = 0;
  double best_val = 0.0;  // mean EMD across tasks on the validation split
  bool aborted = false;
  TrainerState final_state;  // resume data: last completed epoch + velocities
};

/// Runs the full loop on `dataset`: seeded split, seeded shuffling, per-step
/// forward/backward, mode-dependent task weighting, momentum updates and the
/// halving schedule. Returns the best-validation checkpoint. A numeric
/// failure aborts and retains the last good checkpoint.
TrainResult train(const TrainConfig& config, const Dataset& dataset,
                  const Checkpoint* resume_from = nullptr);

/// Forward pass of a feature batch through all heads; softmax per row.
std::vector<std::vector<ScoreDistribution>> predict_features(const ModelParams& params,
                                                             const Mat& features);

/// Prediction for manifest records. Image sources run through the given
/// preprocessing strategy; multi-patch rows belonging to one record are
/// pooled by arithmetic mean and renormalized.
std::vector<SampleRecord> predict_records(const ModelParams& params, const Dataset& dataset);

}  // namespace mtaa
