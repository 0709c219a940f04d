#include "mtaa/moo.hpp"

#include "mtaa/oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace mtaa;

namespace {

Vec make_vec(std::initializer_list<double> values) {
  Vec v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

GradientSet make_set(std::vector<Vec> grads) {
  GradientSet set;
  set.grads = std::move(grads);
  return set;
}

Vec combination(const GradientSet& set, const Vec& delta) {
  Vec d = Vec::Zero(set.grads.front().size());
  for (int t = 0; t < set.num_tasks(); ++t) d += delta[t] * set.grads[t];
  return d;
}

SampleBatch random_batch(Rng& rng, int batch, int input_dim, int num_tasks) {
  SampleBatch b;
  b.features = Mat(batch, input_dim);
  for (int i = 0; i < batch; ++i)
    for (int j = 0; j < input_dim; ++j) b.features(i, j) = rng.uniform();
  for (int t = 0; t < num_tasks; ++t) {
    Mat targets(batch, kNumLevels);
    for (int i = 0; i < batch; ++i) {
      Vec p(kNumLevels);
      for (int k = 0; k < kNumLevels; ++k) p[k] = rng.uniform() + 1e-3;
      targets.row(i) = (p / p.sum()).transpose();
    }
    b.targets.push_back(std::move(targets));
  }
  return b;
}

}  // namespace

TEST_CASE("min_norm_2 on the reference pairs") {
  SUBCASE("orthogonal unit gradients split evenly") {
    const TaskWeights w = min_norm_2(make_vec({1, 0}), make_vec({0, 1}));
    CHECK(w.delta[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(w.delta[1] == doctest::Approx(0.5).epsilon(1e-12));
    const double norm = (w.delta[0] * make_vec({1, 0}) + w.delta[1] * make_vec({0, 1})).norm();
    CHECK(norm == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));

    // grid-search oracle over gamma
    double best = 1e300;
    for (int k = 0; k <= 1000; ++k) {
      const double g = k / 1000.0;
      best = std::min(best, (g * make_vec({1, 0}) + (1 - g) * make_vec({0, 1})).norm());
    }
    CHECK(norm <= best + 1e-9);
  }
  SUBCASE("collinear gradients pick the shorter one") {
    const TaskWeights w = min_norm_2(make_vec({2, 0}), make_vec({1, 0}));
    CHECK(w.delta[0] == doctest::Approx(0.0));
    CHECK(w.delta[1] == doctest::Approx(1.0));
  }
  SUBCASE("equal gradients tie-break to (1, 0)") {
    const Vec v = make_vec({0.4, -0.3, 1.1});
    const TaskWeights w = min_norm_2(v, v);
    CHECK(w.delta[0] == 1.0);
    CHECK(w.delta[1] == 0.0);
  }
  SUBCASE("dimension mismatch is rejected") {
    CHECK_THROWS_AS(min_norm_2(make_vec({1, 0}), make_vec({1, 0, 0})), InvalidInput);
  }
}

TEST_CASE("min_norm_2 beats every grid point on random segments") {
  Rng rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 1 + rng.uniform_int(6);
    Vec g1(dim), g2(dim);
    for (int j = 0; j < dim; ++j) {
      g1[j] = rng.normal();
      g2[j] = rng.normal();
    }
    const TaskWeights w = min_norm_2(g1, g2);
    const double norm = (w.delta[0] * g1 + w.delta[1] * g2).norm();
    for (int k = 0; k <= 100; ++k) {
      const double g = k / 100.0;
      CHECK(norm <= (g * g1 + (1 - g) * g2).norm() + 1e-12);
    }
  }
}

TEST_CASE("frank_wolfe_min_norm finds the origin inside the hull") {
  GradientSet set = make_set({make_vec({1, 0}), make_vec({-1, 1}), make_vec({-1, -1})});
  // certifying combination: 0.5 g1 + 0.25 g2 + 0.25 g3 = 0
  const Vec cert = combination(set, make_vec({0.5, 0.25, 0.25}));
  CHECK(cert.norm() == 0.0);

  const SolverReport report = frank_wolfe_min_norm(set);
  CHECK(report.combined_norm < 1e-3);
  CHECK(report.converged);
  CHECK(report.delta.delta.sum() == doctest::Approx(1.0).epsilon(1e-12));

  const double grid = oracle::grid_min_norm(set.grads, 0.01);
  CHECK(report.combined_norm <= grid + 1e-4);
}

TEST_CASE("frank_wolfe_min_norm degenerate inputs") {
  SUBCASE("single task") {
    const SolverReport report = frank_wolfe_min_norm(make_set({make_vec({3, 4})}));
    CHECK(report.delta.delta.size() == 1);
    CHECK(report.delta.delta[0] == 1.0);
    CHECK(report.combined_norm == doctest::Approx(5.0));
    CHECK(report.converged);
  }
  SUBCASE("identical gradients") {
    const Vec v = make_vec({0.3, -0.4});
    const SolverReport report = frank_wolfe_min_norm(make_set({v, v, v, v}));
    CHECK(report.combined_norm == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(report.delta.delta.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("empty set is rejected") {
    CHECK_THROWS_AS(frank_wolfe_min_norm(make_set({})), InvalidInput);
  }
  SUBCASE("all-zero gradients") {
    const SolverReport report = frank_wolfe_min_norm(make_set({Vec::Zero(3), Vec::Zero(3)}));
    CHECK(report.combined_norm == 0.0);
    CHECK(report.converged);
  }
}

TEST_CASE("frank_wolfe_min_norm stays within 1e-4 of the simplex grid oracle") {
  Rng rng(102);
  for (int trial = 0; trial < 100; ++trial) {
    const int T = 2 + rng.uniform_int(2);
    const int dim = 1 + rng.uniform_int(5);
    std::vector<Vec> grads;
    for (int t = 0; t < T; ++t) {
      Vec g(dim);
      for (int j = 0; j < dim; ++j) g[j] = rng.normal();
      grads.push_back(std::move(g));
    }
    const GradientSet set = make_set(grads);
    const SolverReport report = frank_wolfe_min_norm(set);
    const double grid = oracle::grid_min_norm(set.grads, 0.01);
    CHECK(report.combined_norm <= grid + 1e-4);

    // the reported norm is the norm of the reported delta's combination
    CHECK(std::abs(combination(set, report.delta.delta).norm() - report.combined_norm) <= 1e-9);
  }
}

TEST_CASE("combined norm never exceeds any single gradient norm") {
  Rng rng(103);
  for (int trial = 0; trial < 100; ++trial) {
    const int T = 1 + rng.uniform_int(5);
    const int dim = 1 + rng.uniform_int(8);
    std::vector<Vec> grads;
    for (int t = 0; t < T; ++t) {
      Vec g(dim);
      for (int j = 0; j < dim; ++j) g[j] = rng.normal();
      grads.push_back(std::move(g));
    }
    const SolverReport report = frank_wolfe_min_norm(make_set(grads));
    for (const Vec& g : grads) CHECK(report.combined_norm <= g.norm() + 1e-9);
  }
}

TEST_CASE("min_norm_2 agrees with frank_wolfe_min_norm on two tasks") {
  Rng rng(104);
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 1 + rng.uniform_int(6);
    Vec g1(dim), g2(dim);
    for (int j = 0; j < dim; ++j) {
      g1[j] = rng.normal();
      g2[j] = rng.normal();
    }
    const TaskWeights two = min_norm_2(g1, g2);
    const double norm_two = (two.delta[0] * g1 + two.delta[1] * g2).norm();
    const SolverReport report = frank_wolfe_min_norm(make_set({g1, g2}));
    CHECK(std::abs(norm_two - report.combined_norm) <= 1e-6);
  }
}

TEST_CASE("support property holds on converged T=4 instances") {
  Rng rng(105);
  int converged = 0;
  for (int trial = 0; trial < 120 && converged < 50; ++trial) {
    const int dim = 2 + rng.uniform_int(19);
    std::vector<Vec> grads;
    for (int t = 0; t < 4; ++t) {
      Vec g(dim);
      for (int j = 0; j < dim; ++j) g[j] = rng.normal();
      grads.push_back(std::move(g));
    }
    const GradientSet set = make_set(grads);
    const SolverReport report = frank_wolfe_min_norm(set);
    if (!report.converged) continue;
    ++converged;
    const Vec d = combination(set, report.delta.delta);
    const double d2 = d.squaredNorm();
    for (const Vec& g : set.grads) CHECK(g.dot(d) >= d2 - 1e-6);
  }
  CHECK(converged >= 50);
}

TEST_CASE("delta is invariant under uniform gradient scaling") {
  Rng rng(106);
  for (int trial = 0; trial < 30; ++trial) {
    const int dim = 3 + rng.uniform_int(10);
    std::vector<Vec> grads, scaled;
    const double c = 0.1 + 10.0 * rng.uniform();
    for (int t = 0; t < 4; ++t) {
      Vec g(dim);
      for (int j = 0; j < dim; ++j) g[j] = rng.normal();
      scaled.push_back(c * g);
      grads.push_back(std::move(g));
    }
    const SolverReport a = frank_wolfe_min_norm(make_set(grads));
    const SolverReport b = frank_wolfe_min_norm(make_set(scaled));
    CHECK((a.delta.delta - b.delta.delta).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("mgda_ub_weights") {
  SUBCASE("single task yields delta = (1)") {
    Architecture arch;
    arch.input_dim = 5;
    arch.num_tasks = 1;
    Rng rng(107);
    const ModelParams params = ModelParams::Init(arch, rng);
    const SampleBatch batch = random_batch(rng, 3, 5, 1);
    const SolverReport report = mgda_ub_weights(params, batch, EmdConfig{2.0});
    CHECK(report.delta.delta.size() == 1);
    CHECK(report.delta.delta[0] == 1.0);
  }

  SUBCASE("identical tasks tie-break to (1, 0)") {
    Architecture arch;
    arch.input_dim = 5;
    arch.num_tasks = 2;
    Rng rng(108);
    ModelParams params = ModelParams::Init(arch, rng);
    params.heads[1] = params.heads[0];
    SampleBatch batch = random_batch(rng, 3, 5, 2);
    batch.targets[1] = batch.targets[0];
    const SolverReport report = mgda_ub_weights(params, batch, EmdConfig{2.0});
    CHECK(report.delta.delta[0] == doctest::Approx(1.0));
    CHECK(report.delta.delta[1] == doctest::Approx(0.0));
  }

  SUBCASE("matches the solver run on independently recomputed gradients") {
    Architecture arch;
    arch.input_dim = 6;
    arch.encoder_hidden = {5};
    arch.latent_dim = 4;
    Rng rng(109);
    const ModelParams params = ModelParams::Init(arch, rng);
    const SampleBatch batch = random_batch(rng, 4, 6, 4);
    const EmdConfig cfg{2.0};

    const SolverReport via_mgda = mgda_ub_weights(params, batch, cfg);

    GradientSet set;
    set.space = GradSpace::kRepresentation;
    for (int t = 0; t < 4; ++t) {
      set.grads.push_back(backward_task(params, batch, t, cfg, GradSpace::kRepresentation));
    }
    const SolverReport direct = frank_wolfe_min_norm(set);
    CHECK((via_mgda.delta.delta - direct.delta.delta).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(std::abs(via_mgda.combined_norm - direct.combined_norm) <= 1e-8);
  }

  SUBCASE("delta is invariant to batch row order") {
    Architecture arch;
    arch.input_dim = 6;
    Rng rng(110);
    const ModelParams params = ModelParams::Init(arch, rng);
    const SampleBatch batch = random_batch(rng, 5, 6, 4);

    SampleBatch reversed;
    reversed.features = batch.features.colwise().reverse().eval();
    for (const Mat& t : batch.targets) reversed.targets.push_back(t.colwise().reverse().eval());

    const SolverReport a = mgda_ub_weights(params, batch, EmdConfig{2.0});
    const SolverReport b = mgda_ub_weights(params, reversed, EmdConfig{2.0});
    CHECK((a.delta.delta - b.delta.delta).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("combine_and_descend") {
  Architecture arch;
  arch.input_dim = 6;
  arch.encoder_hidden = {5};
  arch.latent_dim = 4;
  Rng rng(111);
  const ModelParams params = ModelParams::Init(arch, rng);
  const SampleBatch batch = random_batch(rng, 4, 6, 4);
  const EmdConfig cfg{2.0};
  const double lr = 0.05;

  SUBCASE("one-hot delta reduces to single-task descent on the shared net") {
    for (int t : {0, 2}) {
      ModelParams stepped = params;
      MomentumState state = MomentumState::Zeros(arch);
      Vec delta = Vec::Zero(4);
      delta[t] = 1.0;
      combine_and_descend(stepped, batch, TaskWeights::FromVector(delta), cfg, lr, 0.0, state);

      const Vec expected_dir = backward_task(params, batch, t, cfg, GradSpace::kSharedParams);
      const Vec actual_step = (params.shared - stepped.shared) / lr;
      CHECK((actual_step - expected_dir).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }

  SUBCASE("uniform delta over two tasks averages their gradients") {
    Architecture arch2 = arch;
    arch2.num_tasks = 2;
    Rng rng2(112);
    const ModelParams params2 = ModelParams::Init(arch2, rng2);
    const SampleBatch batch2 = random_batch(rng2, 4, 6, 2);

    ModelParams stepped = params2;
    MomentumState state = MomentumState::Zeros(arch2);
    combine_and_descend(stepped, batch2, TaskWeights::Uniform(2), cfg, lr, 0.0, state);

    const Vec g0 = backward_task(params2, batch2, 0, cfg, GradSpace::kSharedParams);
    const Vec g1 = backward_task(params2, batch2, 1, cfg, GradSpace::kSharedParams);
    const Vec actual_step = (params2.shared - stepped.shared) / lr;
    CHECK((actual_step - 0.5 * (g0 + g1)).cwiseAbs().maxCoeff() <= 1e-12);
  }

  SUBCASE("heads receive their own unweighted gradients") {
    ModelParams stepped = params;
    MomentumState state = MomentumState::Zeros(arch);
    Vec delta = Vec::Zero(4);
    delta[0] = 1.0;  // heads must update regardless of delta
    combine_and_descend(stepped, batch, TaskWeights::FromVector(delta), cfg, lr, 0.0, state);
    for (int t = 0; t < 4; ++t) {
      const Vec expected = backward_task_head(params, batch, t, cfg);
      const Vec actual = (params.heads[t] - stepped.heads[t]) / lr;
      CHECK((actual - expected).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }

  SUBCASE("min-norm direction satisfies the support property across random instances") {
    Rng inst_rng(113);
    int checked = 0;
    for (int trial = 0; trial < 80 && checked < 50; ++trial) {
      Architecture a2;
      a2.input_dim = 4 + inst_rng.uniform_int(4);
      a2.encoder_hidden = {4};
      a2.latent_dim = 3 + inst_rng.uniform_int(3);
      ModelParams p2 = ModelParams::Init(a2, inst_rng);
      const SampleBatch b2 = random_batch(inst_rng, 3, a2.input_dim, 4);
      const ForwardState state = forward_backward_all(p2, b2, cfg);
      const GradientSet set = state.representation_gradients();
      const SolverReport report = frank_wolfe_min_norm(set);
      if (!report.converged) continue;
      ++checked;
      Vec d = Vec::Zero(set.grads.front().size());
      for (int t = 0; t < 4; ++t) d += report.delta.delta[t] * set.grads[t];
      const double d2 = d.squaredNorm();
      for (const Vec& g : set.grads) CHECK(g.dot(d) >= d2 - 1e-6);
    }
    CHECK(checked >= 50);
  }
}
