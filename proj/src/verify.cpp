#include "mtaa/verify.hpp"

#include "mtaa/metrics.hpp"
#include "mtaa/moo.hpp"
#include "mtaa/nn.hpp"
#include "mtaa/oracles.hpp"
#include "mtaa/score_dist.hpp"

#include <cmath>
#include <sstream>

namespace mtaa {

namespace {

Vec random_distribution(Rng& rng) {
  Vec p(kNumLevels);
  for (int i = 0; i < kNumLevels; ++i) p[i] = rng.uniform() + 1e-3;
  return p / p.sum();
}

CheckResult check_emd_grad(std::uint64_t seed, bool inject_fault) {
  CheckResult result{"emd-grad", true, ""};
  Rng rng(seed);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ScoreDistribution y(random_distribution(rng));
    Vec logits(kNumLevels);
    for (int i = 0; i < kNumLevels; ++i) logits[i] = rng.uniform(-2.0, 2.0);
    const EmdConfig cfg{trial % 2 == 0 ? 1.0 : 2.0};

    Vec analytic = emd_grad_logits(y, logits, cfg);
    if (inject_fault) analytic[0] += 1e-3;
    const Vec fd = oracle::finite_difference_grad(
        [&](const Vec& z) { return emd_loss(y, ScoreDistribution::FromLogits(z), cfg); }, logits);
    const double rel = oracle::max_relative_error(analytic, fd);
    worst = std::max(worst, rel);
    if (rel > 1e-4) {
      result.passed = false;
      std::ostringstream os;
      os << "trial " << trial << " (r=" << cfg.r << "): relative error " << rel << " > 1e-4";
      result.detail = os.str();
      return result;
    }
  }
  std::ostringstream os;
  os << "100 cases, worst relative error " << worst;
  result.detail = os.str();
  return result;
}

Architecture random_small_arch(Rng& rng) {
  Architecture arch;
  arch.input_dim = 3 + rng.uniform_int(5);
  arch.encoder_hidden = {3 + rng.uniform_int(4)};
  if (rng.uniform() < 0.3) arch.encoder_hidden.push_back(3 + rng.uniform_int(3));
  arch.latent_dim = 3 + rng.uniform_int(4);
  if (rng.uniform() < 0.3) arch.head_hidden = {3 + rng.uniform_int(3)};
  arch.num_tasks = kNumTasks;
  return arch;
}

SampleBatch random_batch(Rng& rng, int batch, int input_dim, int num_tasks) {
  SampleBatch b;
  b.features = Mat(batch, input_dim);
  for (int i = 0; i < batch; ++i)
    for (int j = 0; j < input_dim; ++j) b.features(i, j) = rng.uniform();
  for (int t = 0; t < num_tasks; ++t) {
    Mat targets(batch, kNumLevels);
    for (int i = 0; i < batch; ++i) targets.row(i) = random_distribution(rng).transpose();
    b.targets.push_back(std::move(targets));
  }
  return b;
}

CheckResult check_net_grad(std::uint64_t seed, bool inject_fault) {
  CheckResult result{"net-grad", true, ""};
  Rng rng(seed);
  double worst_rel = 0.0, worst_chain = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Architecture arch = random_small_arch(rng);
    const int total = arch.shared_param_count() + arch.num_tasks * arch.head_param_count();
    if (total > 500) continue;
    ModelParams params = ModelParams::Init(arch, rng);
    const SampleBatch batch = random_batch(rng, 4, arch.input_dim, arch.num_tasks);
    const EmdConfig cfg{trial % 2 == 0 ? 2.0 : 1.0};
    const int task = rng.uniform_int(arch.num_tasks);

    // shared-parameter space vs finite differences over every weight
    Vec analytic = backward_task(params, batch, task, cfg, GradSpace::kSharedParams);
    if (inject_fault) analytic[0] += 1e-3;
    const Vec fd_shared = oracle::finite_difference_grad(
        [&](const Vec& shared) {
          ModelParams probe = params;
          probe.shared = shared;
          return task_loss(probe, batch, task, cfg);
        },
        params.shared);
    double rel = oracle::max_relative_error(analytic, fd_shared);
    worst_rel = std::max(worst_rel, rel);
    if (rel > 1e-4) {
      result.passed = false;
      result.detail = "shared-space gradient mismatch (trial " + std::to_string(trial) +
                      "): relative error " + std::to_string(rel);
      return result;
    }

    // representation space vs finite differences over the representation
    const EncoderCache cache = encode_with_cache(params, batch.features);
    const Vec rep_grad = backward_task(params, batch, task, cfg, GradSpace::kRepresentation);
    const Vec rep_flat = Eigen::Map<const Vec>(cache.reps.data(), cache.reps.size());
    const Vec fd_rep = oracle::finite_difference_grad(
        [&](const Vec& flat) {
          const Mat reps = Eigen::Map<const Mat>(flat.data(), cache.reps.rows(), cache.reps.cols());
          const Mat logits = head_forward(params, task, reps);
          double loss = 0.0;
          for (int i = 0; i < logits.rows(); ++i) {
            const ScoreDistribution y(batch.targets[task].row(i).transpose());
            loss += emd_loss(y, ScoreDistribution::FromLogits(logits.row(i).transpose()), cfg);
          }
          return loss / logits.rows();
        },
        rep_flat);
    rel = oracle::max_relative_error(rep_grad, fd_rep);
    worst_rel = std::max(worst_rel, rel);
    if (rel > 1e-4) {
      result.passed = false;
      result.detail = "representation-space gradient mismatch (trial " + std::to_string(trial) +
                      "): relative error " + std::to_string(rel);
      return result;
    }

    // chain rule: representation gradient pushed through the encoder equals
    // the shared-parameter gradient
    const Mat rep_grad_mat =
        Eigen::Map<const Mat>(rep_grad.data(), cache.reps.rows(), cache.reps.cols());
    const Vec chained = encoder_backward(params, cache, rep_grad_mat);
    const Vec direct = backward_task(params, batch, task, cfg, GradSpace::kSharedParams);
    const double chain_err = (chained - direct).cwiseAbs().maxCoeff();
    worst_chain = std::max(worst_chain, chain_err);
    if (chain_err > 1e-8) {
      result.passed = false;
      result.detail = "chain-rule identity violated (trial " + std::to_string(trial) +
                      "): max abs error " + std::to_string(chain_err);
      return result;
    }
  }
  std::ostringstream os;
  os << "20 networks, worst relative error " << worst_rel << ", worst chain-rule error "
     << worst_chain;
  result.detail = os.str();
  return result;
}

CheckResult check_fw_oracle(std::uint64_t seed, bool inject_fault) {
  CheckResult result{"fw-oracle", true, ""};
  Rng rng(seed);
  double worst = -std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 100; ++trial) {
    const int T = 2 + rng.uniform_int(2);
    const int dim = 1 + rng.uniform_int(5);
    GradientSet set;
    for (int t = 0; t < T; ++t) {
      Vec g(dim);
      for (int j = 0; j < dim; ++j) g[j] = rng.normal();
      set.grads.push_back(std::move(g));
    }
    const SolverReport report = frank_wolfe_min_norm(set);
    const double grid = oracle::grid_min_norm(set.grads, 0.01);
    double excess = report.combined_norm - grid;
    if (inject_fault) excess += 1e-3;
    worst = std::max(worst, excess);
    if (excess > 1e-4) {
      result.passed = false;
      std::ostringstream os;
      os << "trial " << trial << " (T=" << T << ", dim=" << dim << "): solver norm "
         << report.combined_norm << " exceeds grid oracle " << grid << " by " << excess;
      result.detail = os.str();
      return result;
    }
  }

  // instance whose hull contains the origin
  GradientSet hull;
  hull.grads = {Vec(2), Vec(2), Vec(2)};
  hull.grads[0] << 1.0, 0.0;
  hull.grads[1] << -1.0, 1.0;
  hull.grads[2] << -1.0, -1.0;
  const SolverReport hull_report = frank_wolfe_min_norm(hull);
  if (!(hull_report.combined_norm < 1e-3)) {
    result.passed = false;
    result.detail = "hull-contains-origin instance: combined norm " +
                    std::to_string(hull_report.combined_norm) + " not below 1e-3";
    return result;
  }
  std::ostringstream os;
  os << "100 instances within 1e-4 of the 0.01-grid (worst excess " << worst
     << "); origin-in-hull norm " << hull_report.combined_norm;
  result.detail = os.str();
  return result;
}

CheckResult check_support(std::uint64_t seed, bool inject_fault) {
  CheckResult result{"support", true, ""};
  Rng rng(seed);
  int converged_count = 0;
  double worst = std::numeric_limits<double>::infinity();
  int attempts = 0;
  while (converged_count < 50 && attempts < 500) {
    ++attempts;
    const int dim = 2 + rng.uniform_int(19);
    GradientSet set;
    for (int t = 0; t < kNumTasks; ++t) {
      Vec g(dim);
      for (int j = 0; j < dim; ++j) g[j] = rng.normal();
      set.grads.push_back(std::move(g));
    }
    const SolverReport report = frank_wolfe_min_norm(set);
    if (!report.converged) continue;
    ++converged_count;
    Vec d = Vec::Zero(dim);
    for (int t = 0; t < kNumTasks; ++t) d += report.delta.delta[t] * set.grads[t];
    const double d2 = d.squaredNorm();
    for (int t = 0; t < kNumTasks; ++t) {
      double margin = set.grads[t].dot(d) - d2;
      if (inject_fault) margin -= 1e-3;
      worst = std::min(worst, margin);
      if (margin < -1e-6) {
        result.passed = false;
        std::ostringstream os;
        os << "instance " << attempts << ", task " << t << ": g.d - ||d||^2 = " << margin
           << " < -1e-6";
        result.detail = os.str();
        return result;
      }
    }
  }
  if (converged_count < 50) {
    result.passed = false;
    result.detail = "only " + std::to_string(converged_count) +
                    " of 50 required instances converged";
    return result;
  }
  std::ostringstream os;
  os << "50 converged T=4 instances, worst support margin " << worst;
  result.detail = os.str();
  return result;
}

CheckResult check_emd_props(std::uint64_t seed, bool inject_fault) {
  CheckResult result{"emd-props", true, ""};
  Rng rng(seed);
  const EmdConfig r1{1.0}, r2{2.0};
  for (int trial = 0; trial < 1000; ++trial) {
    const ScoreDistribution a(random_distribution(rng));
    const ScoreDistribution b(random_distribution(rng));
    const ScoreDistribution c(random_distribution(rng));
    const EmdConfig& cfg = trial % 2 == 0 ? r1 : r2;

    double self = emd_loss(a, a, cfg);
    if (inject_fault) self += 1e-3;
    if (std::abs(self) > 1e-9) {
      result.passed = false;
      result.detail = "identity violated: emd(a, a) = " + std::to_string(self);
      return result;
    }
    const double ab = emd_loss(a, b, cfg);
    const double ba = emd_loss(b, a, cfg);
    if (std::abs(ab - ba) > 1e-12 || ab < 0.0) {
      result.passed = false;
      result.detail = "symmetry or non-negativity violated at trial " + std::to_string(trial);
      return result;
    }
    if (emd_loss(a, b, r1) > emd_loss(a, c, r1) + emd_loss(c, b, r1) + 1e-12) {
      result.passed = false;
      result.detail = "triangle inequality violated at trial " + std::to_string(trial);
      return result;
    }

    const Vec cdfs = cdf(a);
    for (int i = 1; i < cdfs.size(); ++i) {
      if (cdfs[i] < cdfs[i - 1] - 1e-15) {
        result.passed = false;
        result.detail = "cdf not non-decreasing";
        return result;
      }
    }
    if (std::abs(cdfs[cdfs.size() - 1] - 1.0) > 1e-9) {
      result.passed = false;
      result.detail = "cdf does not end at 1";
      return result;
    }
  }
  result.detail = "1000 random triples: identity, symmetry, non-negativity, triangle (r=1), cdf";
  return result;
}

CheckResult check_metrics(std::uint64_t seed, bool inject_fault) {
  CheckResult result{"metrics", true, ""};
  Rng rng(seed);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + rng.uniform_int(40);
    Vec a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = rng.normal();
      b[i] = 0.4 * a[i] + rng.normal();
    }
    if (trial % 5 == 0) b[0] = b[1];  // exercise tie handling

    double err = std::abs(pcc(a, b) - oracle::pcc_direct(a, b));
    err = std::max(err, std::abs(scc(a, b) - oracle::scc_direct(a, b)));
    err = std::max(err, std::abs(rmse(a, b) - oracle::rmse_direct(a, b)));
    if (inject_fault) err += 1e-3;
    worst = std::max(worst, err);
    if (err > 1e-10) {
      result.passed = false;
      result.detail = "metric mismatch at trial " + std::to_string(trial) + ": deviation " +
                      std::to_string(err);
      return result;
    }

    // rank correlation only sees the ordering
    Vec transformed(n);
    for (int i = 0; i < n; ++i) transformed[i] = std::exp(a[i]) + 3.0;
    if (std::abs(scc(transformed, b) - scc(a, b)) > 1e-12) {
      result.passed = false;
      result.detail = "scc not invariant under a strictly increasing transform (trial " +
                      std::to_string(trial) + ")";
      return result;
    }
  }
  result.detail = "50 random vectors within 1e-10 of direct recomputation, worst deviation " +
                  std::to_string(worst);
  return result;
}

}  // namespace

std::vector<std::string> verification_suites() {
  return {"emd-grad", "net-grad", "fw-oracle", "support", "emd-props", "metrics"};
}

std::vector<CheckResult> run_verification(const VerifyOptions& options) {
  std::vector<CheckResult> results;
  const auto want = [&](const std::string& name) {
    return options.only.empty() || options.only == name;
  };
  if (want("emd-grad")) results.push_back(check_emd_grad(options.seed, options.fault == "emd-grad"));
  if (want("net-grad")) results.push_back(check_net_grad(options.seed, options.fault == "net-grad"));
  if (want("fw-oracle"))
    results.push_back(check_fw_oracle(options.seed, options.fault == "fw-oracle"));
  if (want("support")) results.push_back(check_support(options.seed, options.fault == "support"));
  if (want("emd-props"))
    results.push_back(check_emd_props(options.seed, options.fault == "emd-props"));
  if (want("metrics")) results.push_back(check_metrics(options.seed, options.fault == "metrics"));
  if (results.empty()) throw InvalidInput("unknown verification suite '" + options.only + "'");
  return results;
}

}  // namespace mtaa
