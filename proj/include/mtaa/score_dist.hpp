#pragma once

#include "mtaa/common.hpp"

namespace mtaa {

/// Exponent of the r-norm EMD loss. r >= 1.
struct EmdConfig {
  double r = 2.0;
  void validate() const {
    if (!(r >= 1.0) || !std::isfinite(r)) throw InvalidInput("EmdConfig: r must be a finite real >= 1");
  }
};

/// Probability vector over the five ordinal aesthetic levels.
///
/// Construction enforces the invariants: length 5, entries >= 0, sum 1.
/// Inputs whose sum is within 1e-6 of 1 are renormalized; anything further
/// off is rejected.
class ScoreDistribution {
 public:
  static constexpr double kSumTolerance = 1e-9;
  static constexpr double kRenormTolerance = 1e-6;

  explicit ScoreDistribution(Vec probs);

  /// Softmax of an unconstrained logit vector; always a valid distribution.
  static ScoreDistribution FromLogits(const Vec& logits);

  static ScoreDistribution Uniform();

  const Vec& probs() const { return probs_; }
  int levels() const { return static_cast<int>(probs_.size()); }

  bool operator==(const ScoreDistribution& other) const { return probs_ == other.probs_; }

 private:
  Vec probs_;
};

/// Numerically stable softmax.
Vec softmax(const Vec& logits);

/// Prefix sums of the probability vector. Non-decreasing, ends at 1.
Vec cdf(const ScoreDistribution& d);

/// r-norm Earth Mover's Distance between two level distributions:
/// ((1/N) * sum_c |CDF_y(c) - CDF_yhat(c)|^r)^(1/r).
double emd_loss(const ScoreDistribution& y, const ScoreDistribution& yhat, const EmdConfig& cfg);

/// Gradient of emd_loss(y, softmax(logits)) with respect to the logits.
/// At a kink of |.| (exact zero CDF difference) the zero subgradient is used.
Vec emd_grad_logits(const ScoreDistribution& y, const Vec& logits, const EmdConfig& cfg);

/// Gradient of emd_loss(y, p) with respect to the probabilities p themselves.
Vec emd_grad_probs(const ScoreDistribution& y, const ScoreDistribution& p, const EmdConfig& cfg);

/// Expectation of the level index, in [1, 5].
double mean_score(const ScoreDistribution& d);

}  // namespace mtaa
