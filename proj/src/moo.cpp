#include "mtaa/moo.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace mtaa {

namespace {

constexpr double kDeltaClamp = 1e-9;       // entries below this are zeroed
constexpr double kTieEpsilon = 1e-12;      // relative margin for candidate comparison

void clamp_and_renormalize(Vec& delta) {
  for (int i = 0; i < delta.size(); ++i)
    if (delta[i] < kDeltaClamp) delta[i] = 0.0;
  const double s = delta.sum();
  if (s <= 0.0) throw NumericFailure("task weights collapsed to zero");
  delta /= s;
}

// gamma minimizing ||gamma a + (1-gamma) b||^2 from the three dot products,
// clamped to [0, 1]; degenerate segment (a == b) tie-breaks to gamma = 1.
double line_search_gamma(double aa, double ab, double bb) {
  const double denom = aa - 2.0 * ab + bb;  // ||a - b||^2
  if (denom <= 0.0) return 1.0;
  const double gamma = (bb - ab) / denom;   // ((b - a) . b) / ||a - b||^2
  return std::min(1.0, std::max(0.0, gamma));
}

double quad_form(const Mat& M, const Vec& delta) { return delta.dot(M * delta); }

// Exact min-norm point over one support subset: solve the equality-KKT
// system min delta' M delta s.t. sum delta = 1 restricted to `idx`, and keep
// the solution only when it is a valid simplex point.
bool subset_solution(const Mat& M, const std::vector<int>& idx, Vec* delta_out, double* value) {
  const int k = static_cast<int>(idx.size());
  const int T = static_cast<int>(M.rows());
  Vec delta_s;
  if (k == 1) {
    delta_s = Vec::Ones(1);
  } else {
    Mat A = Mat::Zero(k + 1, k + 1);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) A(a, b) = 2.0 * M(idx[a], idx[b]);
    A.block(0, k, k, 1).setOnes();
    A.block(k, 0, 1, k).setOnes();
    Vec rhs = Vec::Zero(k + 1);
    rhs[k] = 1.0;
    Eigen::FullPivLU<Mat> lu(A);
    if (!lu.isInvertible()) return false;
    const Vec sol = lu.solve(rhs);
    delta_s = sol.head(k);
    if (!delta_s.allFinite()) return false;
    if (std::abs(delta_s.sum() - 1.0) > 1e-6) return false;
    if ((delta_s.array() < -1e-12).any()) return false;
    delta_s = delta_s.cwiseMax(0.0);
    delta_s /= delta_s.sum();
  }
  Vec full = Vec::Zero(T);
  for (int a = 0; a < k; ++a) full[idx[a]] = delta_s[a];
  *delta_out = full;
  *value = quad_form(M, full);
  return std::isfinite(*value);
}

// Enumerates all non-empty support subsets (small T) and returns the best
// exact candidate. Subsets are visited in bitmask order so ties resolve to
// the lowest-index vertices.
bool exact_refinement(const Mat& M, Vec* best_delta) {
  const int T = static_cast<int>(M.rows());
  bool found = false;
  double best_value = 0.0;
  for (unsigned mask = 1; mask < (1u << T); ++mask) {
    std::vector<int> idx;
    for (int t = 0; t < T; ++t)
      if (mask & (1u << t)) idx.push_back(t);
    Vec cand;
    double value;
    if (!subset_solution(M, idx, &cand, &value)) continue;
    if (!found || value < best_value - kTieEpsilon * std::max(1.0, best_value)) {
      found = true;
      best_value = value;
      *best_delta = cand;
    }
  }
  return found;
}

}  // namespace

TaskWeights TaskWeights::Uniform(int num_tasks) {
  if (num_tasks <= 0) throw InvalidInput("TaskWeights: task count must be positive");
  return {Vec::Constant(num_tasks, 1.0 / num_tasks)};
}

TaskWeights TaskWeights::FromVector(Vec delta) {
  if (delta.size() == 0) throw InvalidInput("TaskWeights: empty weight vector");
  for (int i = 0; i < delta.size(); ++i) {
    if (!std::isfinite(delta[i]) || delta[i] < 0.0) {
      throw InvalidInput("TaskWeights: entries must be non-negative and finite");
    }
  }
  if (std::abs(delta.sum() - 1.0) > 1e-9) {
    throw InvalidInput("TaskWeights: weights must sum to 1");
  }
  return {std::move(delta)};
}

TaskWeights min_norm_2(const Vec& g1, const Vec& g2) {
  if (g1.size() != g2.size()) throw InvalidInput("min_norm_2: dimension mismatch");
  if (!g1.allFinite() || !g2.allFinite()) throw InvalidInput("min_norm_2: non-finite gradient");
  const double gamma = line_search_gamma(g1.dot(g1), g1.dot(g2), g2.dot(g2));
  Vec delta(2);
  delta << gamma, 1.0 - gamma;
  return {delta};
}

SolverReport frank_wolfe_min_norm(const GradientSet& grads, int max_iter, double tol) {
  grads.validate();
  if (max_iter < 0 || tol < 0.0) throw InvalidInput("frank_wolfe_min_norm: bad solver settings");
  const int T = grads.num_tasks();

  SolverReport report;
  if (T == 1) {
    report.delta = {Vec::Ones(1)};
    report.combined_norm = grads.grads[0].norm();
    report.converged = true;
    return report;
  }

  // Gram matrix; every quantity the solver needs lives in delta space.
  Mat M(T, T);
  for (int i = 0; i < T; ++i)
    for (int j = i; j < T; ++j) M(i, j) = M(j, i) = grads.grads[i].dot(grads.grads[j]);

  // Initialize at the best two-gradient combination.
  Vec delta = Vec::Zero(T);
  {
    bool found = false;
    double best = 0.0;
    for (int i = 0; i < T; ++i) {
      for (int j = i + 1; j < T; ++j) {
        const double gamma = line_search_gamma(M(i, i), M(i, j), M(j, j));
        const double value = gamma * gamma * M(i, i) + 2.0 * gamma * (1.0 - gamma) * M(i, j) +
                             (1.0 - gamma) * (1.0 - gamma) * M(j, j);
        if (!found || value < best - kTieEpsilon * std::max(1.0, best)) {
          found = true;
          best = value;
          delta.setZero();
          delta[i] = gamma;
          delta[j] = 1.0 - gamma;
        }
      }
    }
  }

  // Frank-Wolfe iterations. The stopping rule is the duality gap
  // ||d||^2 - min_t g_t . d <= tol/2 (half the reported tolerance, so the
  // converged flag holds with margin under recomputation).
  int iterations = 0;
  bool gap_ok = false;
  for (; iterations < max_iter; ++iterations) {
    const Vec dots = M * delta;           // g_t . d
    const double norm2 = delta.dot(dots); // ||d||^2
    int t_star = 0;
    for (int t = 1; t < T; ++t)
      if (dots[t] < dots[t_star]) t_star = t;
    if (norm2 - dots[t_star] <= 0.5 * tol) {
      gap_ok = true;
      break;
    }
    // line search between d and g_{t*}
    const double gamma = line_search_gamma(norm2, dots[t_star], M(t_star, t_star));
    if (gamma >= 1.0) break;  // no movement possible
    delta *= gamma;
    delta[t_star] += 1.0 - gamma;
  }

  // Exact finish for small task counts: the optimum lies in the relative
  // interior of the face spanned by its support, where the equality-KKT
  // solution is available in closed form.
  if (T <= 12) {
    Vec refined;
    if (exact_refinement(M, &refined) && quad_form(M, refined) < quad_form(M, delta)) {
      delta = refined;
    }
  }

  clamp_and_renormalize(delta);

  const Vec dots = M * delta;
  const double norm2 = delta.dot(dots);
  const double gap = norm2 - dots.minCoeff();

  Vec combined = Vec::Zero(grads.grads[0].size());
  for (int t = 0; t < T; ++t) combined += delta[t] * grads.grads[t];

  report.delta = {delta};
  report.combined_norm = combined.norm();
  report.iterations = iterations;
  report.converged = gap_ok || gap <= tol;
  return report;
}

ForwardState forward_backward_all(const ModelParams& params, const SampleBatch& batch,
                                  const EmdConfig& cfg) {
  if (static_cast<int>(batch.targets.size()) < params.arch.num_tasks) {
    throw InvalidInput("forward_backward_all: batch lacks targets for some tasks");
  }
  ForwardState state;
  state.encoder = encode_with_cache(params, batch.features);
  state.tasks.reserve(params.arch.num_tasks);
  for (int t = 0; t < params.arch.num_tasks; ++t) {
    state.tasks.push_back(
        head_loss_backward(params, t, state.encoder.reps, batch.targets[t], cfg));
  }
  return state;
}

GradientSet ForwardState::representation_gradients() const {
  GradientSet set;
  set.space = GradSpace::kRepresentation;
  for (const HeadBackward& hb : tasks) {
    set.grads.emplace_back(Eigen::Map<const Vec>(hb.rep_grad.data(), hb.rep_grad.size()));
  }
  return set;
}

std::vector<double> ForwardState::losses() const {
  std::vector<double> out;
  for (const HeadBackward& hb : tasks) out.push_back(hb.loss);
  return out;
}

SolverReport mgda_ub_weights(const ModelParams& params, const SampleBatch& batch,
                             const EmdConfig& cfg) {
  const ForwardState state = forward_backward_all(params, batch, cfg);
  return frank_wolfe_min_norm(state.representation_gradients());
}

MomentumState MomentumState::Zeros(const Architecture& arch) {
  MomentumState st;
  st.shared = Vec::Zero(arch.shared_param_count());
  st.heads.assign(arch.num_tasks, Vec::Zero(arch.head_param_count()));
  return st;
}

void descend(ModelParams& params, const ForwardState& state, const TaskWeights& delta, double lr,
             double momentum, MomentumState& momentum_state) {
  const int T = params.arch.num_tasks;
  if (delta.num_tasks() != T) throw InvalidInput("descend: delta size does not match task count");

  Mat combined_rep = Mat::Zero(state.encoder.reps.rows(), state.encoder.reps.cols());
  for (int t = 0; t < T; ++t) combined_rep += delta.delta[t] * state.tasks[t].rep_grad;
  const Vec shared_dir = encoder_backward(params, state.encoder, combined_rep);

  sgd_momentum_step(params.shared, momentum_state.shared, shared_dir, lr, momentum);
  for (int t = 0; t < T; ++t) {
    sgd_momentum_step(params.heads[t], momentum_state.heads[t], state.tasks[t].head_grad, lr,
                      momentum);
  }
}

std::vector<double> combine_and_descend(ModelParams& params, const SampleBatch& batch,
                                        const TaskWeights& delta, const EmdConfig& cfg, double lr,
                                        double momentum, MomentumState& momentum_state) {
  const ForwardState state = forward_backward_all(params, batch, cfg);
  descend(params, state, delta, lr, momentum, momentum_state);
  return state.losses();
}

}  // namespace mtaa
