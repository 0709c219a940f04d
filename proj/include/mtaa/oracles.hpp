#pragma once

#include "mtaa/common.hpp"

#include <functional>
#include <vector>

namespace mtaa {

/// Independent brute-force references used by the verification suites and
/// tests. Nothing here shares code with the analytic paths it checks: the
/// finite-difference probe only calls forward evaluations, the simplex grid
/// only evaluates norms, and the statistics are recomputed long-hand.
namespace oracle {

/// Central finite differences of a scalar function.
Vec finite_difference_grad(const std::function<double(const Vec&)>& f, const Vec& x,
                           double step = 1e-5);

/// Largest relative deviation max(|a-b|) / max(||b||_inf, floor).
double max_relative_error(const Vec& a, const Vec& b, double floor = 1e-8);

/// Exhaustive min ||sum_t w_t g_t|| over the simplex sampled at the given
/// step. Any task count (recursive enumeration); intended for small T.
double grid_min_norm(const std::vector<Vec>& grads, double step = 0.01);

/// Direct-formula Pearson correlation (no shared code with metrics).
double pcc_direct(const Vec& a, const Vec& b);

/// Spearman correlation via O(n^2) rank counting with tie averaging.
double scc_direct(const Vec& a, const Vec& b);

double rmse_direct(const Vec& a, const Vec& b);

}  // namespace oracle

}  // namespace mtaa
