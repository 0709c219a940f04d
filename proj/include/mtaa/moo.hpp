#pragma once

#include "mtaa/nn.hpp"

#include <vector>

namespace mtaa {

/// A point on the task simplex: non-negative weights summing to 1.
/// Holds the solver's delta as well as the fixed weights of the
/// linear-combination baseline.
struct TaskWeights {
  Vec delta;

  static TaskWeights Uniform(int num_tasks);
  /// Validates the simplex invariants (sum within 1e-9, entries >= 0).
  static TaskWeights FromVector(Vec delta);

  int num_tasks() const { return static_cast<int>(delta.size()); }
};

struct SolverReport {
  TaskWeights delta;
  double combined_norm = 0.0;  // ||sum_t delta_t g_t||_2 for the reported delta
  int iterations = 0;
  bool converged = false;
};

inline constexpr int kSolverMaxIter = 250;
inline constexpr double kSolverTol = 1e-6;

/// Closed-form min-norm point on the segment between two gradients.
/// Returns (gamma, 1-gamma) with gamma on g1; equal inputs tie-break to (1, 0).
TaskWeights min_norm_2(const Vec& g1, const Vec& g2);

/// Minimizes ||sum_t delta_t g_t||^2 over the task simplex.
///
/// Initializes at the best two-gradient combination, then runs Frank-Wolfe
/// steps: pick t* = argmin_t g_t . d (lowest index on ties) and line-search
/// between the current combination d and g_{t*} via the two-point solution.
/// The loop stops once the duality gap ||d||^2 - min_t g_t . d falls below
/// tol; `converged` certifies that bound, which is exactly the min-norm
/// support property. A final exact refinement over support subsets removes
/// the solver's residual error for small task counts.
SolverReport frank_wolfe_min_norm(const GradientSet& grads, int max_iter = kSolverMaxIter,
                                  double tol = kSolverTol);

/// MGDA-UB task weighting: one encoder pass, per-task gradients w.r.t. the
/// shared representation batch, then the min-norm solve over those. The
/// Jacobian factor of the representations w.r.t. the shared parameters is a
/// delta-free constant and is omitted.
SolverReport mgda_ub_weights(const ModelParams& params, const SampleBatch& batch,
                             const EmdConfig& cfg);

/// Momentum buffers, one per parameter group.
struct MomentumState {
  Vec shared;
  std::vector<Vec> heads;

  static MomentumState Zeros(const Architecture& arch);
};

/// Everything one optimization step needs from a single encoder pass:
/// cached encoder activations plus per-task head gradients, representation
/// gradients and losses.
struct ForwardState {
  EncoderCache encoder;
  std::vector<HeadBackward> tasks;

  GradientSet representation_gradients() const;
  std::vector<double> losses() const;
};

ForwardState forward_backward_all(const ModelParams& params, const SampleBatch& batch,
                                  const EmdConfig& cfg);

/// Applies one descent step from a prepared ForwardState: the shared
/// parameters move along sum_t delta_t grad_t chained through the encoder,
/// each head along its own unweighted gradient.
void descend(ModelParams& params, const ForwardState& state, const TaskWeights& delta, double lr,
             double momentum, MomentumState& momentum_state);

/// One combined step (forward, backward, delta-weighted update) against a
/// fresh forward pass. Returns the per-task losses observed before the step.
std::vector<double> combine_and_descend(ModelParams& params, const SampleBatch& batch,
                                        const TaskWeights& delta, const EmdConfig& cfg, double lr,
                                        double momentum, MomentumState& momentum_state);

}  // namespace mtaa
