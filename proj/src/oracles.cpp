#include "mtaa/oracles.hpp"

#include <cmath>

namespace mtaa::oracle {

Vec finite_difference_grad(const std::function<double(const Vec&)>& f, const Vec& x, double step) {
  Vec grad(x.size());
  Vec probe = x;
  for (int i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double up = f(probe);
    probe[i] = saved - step;
    const double down = f(probe);
    probe[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double max_relative_error(const Vec& a, const Vec& b, double floor) {
  if (a.size() != b.size()) throw InvalidInput("max_relative_error: length mismatch");
  const double scale = std::max(b.cwiseAbs().maxCoeff(), floor);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

namespace {

void grid_recurse(const std::vector<Vec>& grads, int task, int remaining, int total, Vec& combo,
                  double& best, double step) {
  const int T = static_cast<int>(grads.size());
  if (task == T - 1) {
    const Vec v = combo + (static_cast<double>(remaining) * step) * grads[task];
    best = std::min(best, v.squaredNorm());
    return;
  }
  for (int ticks = 0; ticks <= remaining; ++ticks) {
    Vec next = combo + (static_cast<double>(ticks) * step) * grads[task];
    grid_recurse(grads, task + 1, remaining - ticks, total, next, best, step);
  }
}

}  // namespace

double grid_min_norm(const std::vector<Vec>& grads, double step) {
  if (grads.empty()) throw InvalidInput("grid_min_norm: empty gradient set");
  if (!(step > 0.0 && step <= 1.0)) throw InvalidInput("grid_min_norm: bad step");
  const int total = static_cast<int>(std::lround(1.0 / step));
  Vec combo = Vec::Zero(grads.front().size());
  double best = std::numeric_limits<double>::infinity();
  grid_recurse(grads, 0, total, total, combo, best, 1.0 / total);
  return std::sqrt(best);
}

double pcc_direct(const Vec& a, const Vec& b) {
  const int n = static_cast<int>(a.size());
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (int i = 0; i < n; ++i) {
    sa += a[i];
    sb += b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
    sab += a[i] * b[i];
  }
  const double cov = sab - sa * sb / n;
  const double va = saa - sa * sa / n;
  const double vb = sbb - sb * sb / n;
  return cov / std::sqrt(va * vb);
}

double scc_direct(const Vec& a, const Vec& b) {
  const int n = static_cast<int>(a.size());
  // rank(i) = 1 + #{j : v_j < v_i} + (#{j != i : v_j == v_i}) / 2
  const auto ranks = [n](const Vec& v) {
    Vec r(n);
    for (int i = 0; i < n; ++i) {
      int less = 0, equal = 0;
      for (int j = 0; j < n; ++j) {
        if (v[j] < v[i]) ++less;
        if (j != i && v[j] == v[i]) ++equal;
      }
      r[i] = 1.0 + less + equal / 2.0;
    }
    return r;
  };
  return pcc_direct(ranks(a), ranks(b));
}

double rmse_direct(const Vec& a, const Vec& b) {
  double acc = 0.0;
  for (int i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc / a.size());
}

}  // namespace mtaa::oracle
