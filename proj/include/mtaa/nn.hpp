#pragma once

#include "mtaa/batch.hpp"
#include "mtaa/common.hpp"
#include "mtaa/score_dist.hpp"

#include <string>
#include <vector>

namespace mtaa {

enum class Activation { kReLU, kTanh, kIdentity };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

/// Layer sizes and activation choice for the shared encoder and the task
/// heads. The encoder maps input_dim -> latent_dim through ReLU hidden
/// layers; each head maps latent_dim -> num_levels logits.
struct Architecture {
  int input_dim = 8;
  std::vector<int> encoder_hidden = {32, 32};
  int latent_dim = 32;
  std::vector<int> head_hidden = {};  // empty: single FC layer per head
  int num_tasks = kNumTasks;
  int num_levels = kNumLevels;
  Activation activation = Activation::kReLU;

  void validate() const;
  std::vector<int> encoder_sizes() const;  // [input, hidden..., latent]
  std::vector<int> head_sizes() const;     // [latent, hidden..., levels]
  int shared_param_count() const;
  int head_param_count() const;

  bool operator==(const Architecture&) const = default;
};

/// Flat parameter vectors for the shared encoder and the per-task heads.
struct ModelParams {
  Architecture arch;
  Vec shared;
  std::vector<Vec> heads;

  static ModelParams Zeros(const Architecture& arch);
  /// Glorot-uniform weights (s = sqrt(6/(fan_in+fan_out))), zero biases.
  /// Draws encoder parameters first, then heads in task order.
  static ModelParams Init(const Architecture& arch, Rng& rng);

  void validate() const;
};

/// Intermediate activations from an encoder forward pass, kept so gradients
/// can be chained back through the encoder.
struct EncoderCache {
  std::vector<Mat> inputs;   // per layer: the layer's input (batch x in)
  std::vector<Mat> preacts;  // per layer: X W^T + b before activation
  Mat reps;                  // final batch x latent representation
};

/// Shared-network forward pass: batch features -> representation batch.
Mat encode(const ModelParams& params, const Mat& features);
EncoderCache encode_with_cache(const ModelParams& params, const Mat& features);

/// Task head forward: representation batch -> batch of level logits.
Mat head_forward(const ModelParams& params, int task, const Mat& reps);

/// Mean-over-batch EMD loss of task `task`. Forward-only; usable as an
/// independent oracle for gradient checks.
double task_loss(const ModelParams& params, const SampleBatch& batch, int task,
                 const EmdConfig& cfg);

struct HeadBackward {
  double loss = 0.0;  // mean EMD over the batch
  Vec head_grad;      // d loss / d head params (flat)
  Mat rep_grad;       // d loss / d representations (batch x latent)
};

/// Head forward + EMD loss + backward through the head only.
HeadBackward head_loss_backward(const ModelParams& params, int task, const Mat& reps,
                                const Mat& targets, const EmdConfig& cfg);

/// Chains a representation-space gradient back through the encoder, yielding
/// the gradient w.r.t. the shared parameters.
Vec encoder_backward(const ModelParams& params, const EncoderCache& cache, const Mat& rep_grad);

/// Which space a gradient vector lives in.
enum class GradSpace { kSharedParams, kRepresentation };

/// Per-task gradients, one flat vector per task, all in the same space.
struct GradientSet {
  std::vector<Vec> grads;
  GradSpace space = GradSpace::kSharedParams;

  int num_tasks() const { return static_cast<int>(grads.size()); }
  void validate() const;
};

/// Mean-over-batch gradient of the task EMD loss, either w.r.t. the shared
/// parameters or w.r.t. the (column-major flattened) representation batch.
Vec backward_task(const ModelParams& params, const SampleBatch& batch, int task,
                  const EmdConfig& cfg, GradSpace space);

/// Gradient of the task loss w.r.t. the task's own head parameters.
Vec backward_task_head(const ModelParams& params, const SampleBatch& batch, int task,
                       const EmdConfig& cfg);

/// Classical momentum SGD: v <- momentum * v + direction; p <- p - lr * v.
void sgd_momentum_step(Vec& params, Vec& velocity, const Vec& direction, double lr,
                       double momentum);

}  // namespace mtaa
