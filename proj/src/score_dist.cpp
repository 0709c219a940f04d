#include "mtaa/score_dist.hpp"

#include <cmath>
#include <string>

namespace mtaa {

ScoreDistribution::ScoreDistribution(Vec probs) : probs_(std::move(probs)) {
  if (probs_.size() != kNumLevels) {
    throw InvalidInput("ScoreDistribution: expected " + std::to_string(kNumLevels) +
                       " levels, got " + std::to_string(probs_.size()));
  }
  for (int i = 0; i < probs_.size(); ++i) {
    if (!std::isfinite(probs_[i]) || probs_[i] < 0.0) {
      throw InvalidInput("ScoreDistribution: entry " + std::to_string(i + 1) +
                         " is negative or non-finite");
    }
  }
  const double sum = probs_.sum();
  if (std::abs(sum - 1.0) > kRenormTolerance) {
    throw InvalidInput("ScoreDistribution: probabilities sum to " + std::to_string(sum) +
                       ", expected 1");
  }
  if (std::abs(sum - 1.0) > kSumTolerance) probs_ /= sum;
}

ScoreDistribution ScoreDistribution::FromLogits(const Vec& logits) {
  return ScoreDistribution(softmax(logits));
}

ScoreDistribution ScoreDistribution::Uniform() {
  return ScoreDistribution(Vec::Constant(kNumLevels, 1.0 / kNumLevels));
}

Vec softmax(const Vec& logits) {
  for (int i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) throw InvalidInput("softmax: non-finite logit");
  }
  const Vec shifted = logits.array() - logits.maxCoeff();
  Vec e = shifted.array().exp();
  return e / e.sum();
}

Vec cdf(const ScoreDistribution& d) {
  const Vec& p = d.probs();
  Vec out(p.size());
  double acc = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    acc += p[i];
    out[i] = acc;
  }
  return out;
}

double emd_loss(const ScoreDistribution& y, const ScoreDistribution& yhat, const EmdConfig& cfg) {
  cfg.validate();
  const Vec dy = cdf(y);
  const Vec dp = cdf(yhat);
  const int n = static_cast<int>(dy.size());
  double acc = 0.0;
  for (int c = 0; c < n; ++c) acc += std::pow(std::abs(dy[c] - dp[c]), cfg.r);
  return std::pow(acc / n, 1.0 / cfg.r);
}

namespace {

// sign with the zero subgradient convention at exactly 0
double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Gradient of the loss w.r.t. the predicted probabilities, given both CDFs.
Vec grad_wrt_probs(const Vec& cdf_y, const Vec& cdf_p, double r) {
  const int n = static_cast<int>(cdf_y.size());
  const Vec diff = cdf_p - cdf_y;
  double s = 0.0;
  for (int c = 0; c < n; ++c) s += std::pow(std::abs(diff[c]), r);
  s /= n;
  if (s <= 0.0) return Vec::Zero(n);

  // loss = s^(1/r); dloss/dCDF_p(c) = s^(1/r-1) * |diff|^(r-1) * sgn(diff) / n
  Vec dcdf(n);
  const double outer = std::pow(s, 1.0 / r - 1.0) / n;
  for (int c = 0; c < n; ++c) dcdf[c] = outer * std::pow(std::abs(diff[c]), r - 1.0) * sgn(diff[c]);

  // CDF_p(c) = sum_{j<=c} p_j, so dloss/dp_j is a suffix sum of dcdf.
  Vec dp(n);
  double acc = 0.0;
  for (int j = n - 1; j >= 0; --j) {
    acc += dcdf[j];
    dp[j] = acc;
  }
  return dp;
}

}  // namespace

Vec emd_grad_probs(const ScoreDistribution& y, const ScoreDistribution& p, const EmdConfig& cfg) {
  cfg.validate();
  return grad_wrt_probs(cdf(y), cdf(p), cfg.r);
}

Vec emd_grad_logits(const ScoreDistribution& y, const Vec& logits, const EmdConfig& cfg) {
  cfg.validate();
  if (logits.size() != y.probs().size()) {
    throw InvalidInput("emd_grad_logits: logits length does not match distribution");
  }
  const Vec p = softmax(logits);
  Vec cp(p.size());
  double acc = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    acc += p[i];
    cp[i] = acc;
  }
  const Vec dp = grad_wrt_probs(cdf(y), cp, cfg.r);
  // softmax Jacobian: dL/dz_k = p_k * (dL/dp_k - sum_j p_j dL/dp_j)
  const double inner = p.dot(dp);
  return p.array() * (dp.array() - inner);
}

double mean_score(const ScoreDistribution& d) {
  const Vec& p = d.probs();
  double m = 0.0;
  for (int c = 0; c < p.size(); ++c) m += (c + 1) * p[c];
  return m;
}

}  // namespace mtaa
