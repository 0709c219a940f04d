#include "mtaa/nn.hpp"

#include "mtaa/checkpoint.hpp"
#include "mtaa/oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace mtaa;

namespace {

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

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("zero-weight encoder maps everything to zero") {
  Architecture arch;
  arch.input_dim = 6;
  arch.encoder_hidden = {4, 4};
  arch.latent_dim = 3;
  const ModelParams params = ModelParams::Zeros(arch);

  Rng rng(1);
  Mat x(5, 6);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
  CHECK(encode(params, x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identity one-layer encoder reproduces its input") {
  Architecture arch;
  arch.input_dim = 4;
  arch.encoder_hidden = {};
  arch.latent_dim = 4;
  ModelParams params = ModelParams::Zeros(arch);
  // single layer, W column-major then bias
  for (int i = 0; i < 4; ++i) params.shared[i * 4 + i] = 1.0;

  Mat x(3, 4);
  x << 0.1, 0.9, 0.3, 0.7, 0.0, 1.0, 0.5, 0.25, 0.6, 0.2, 0.8, 0.4;
  CHECK((encode(params, x) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward passes are deterministic for a fixed seed") {
  Architecture arch;
  arch.input_dim = 8;
  Rng rng_a(77), rng_b(77);
  const ModelParams a = ModelParams::Init(arch, rng_a);
  const ModelParams b = ModelParams::Init(arch, rng_b);
  CHECK(a.shared == b.shared);
  for (int t = 0; t < arch.num_tasks; ++t) CHECK(a.heads[t] == b.heads[t]);

  Rng data_rng(78);
  const SampleBatch batch = random_batch(data_rng, 4, 8, 4);
  CHECK(encode(a, batch.features) == encode(b, batch.features));
}

TEST_CASE("zero head yields uniform distributions after softmax") {
  Architecture arch;
  arch.input_dim = 5;
  Rng rng(3);
  ModelParams params = ModelParams::Init(arch, rng);
  params.heads[2].setZero();

  Rng data_rng(4);
  const SampleBatch batch = random_batch(data_rng, 3, 5, 4);
  const Mat logits = head_forward(params, 2, encode(params, batch.features));
  CHECK(logits.cwiseAbs().maxCoeff() == 0.0);
  const Vec p = softmax(logits.row(0).transpose());
  for (int i = 0; i < kNumLevels; ++i) CHECK(p[i] == doctest::Approx(0.2));
}

TEST_CASE("single-sample batches match rows of larger batches") {
  Architecture arch;
  arch.input_dim = 7;
  Rng rng(5);
  const ModelParams params = ModelParams::Init(arch, rng);
  Rng data_rng(6);
  const SampleBatch batch = random_batch(data_rng, 5, 7, 4);

  const Mat reps = encode(params, batch.features);
  const Mat logits = head_forward(params, 1, reps);
  for (int i = 0; i < 5; ++i) {
    const Mat single = batch.features.row(i);
    const Mat rep_i = encode(params, single);
    CHECK((rep_i - reps.row(i)).cwiseAbs().maxCoeff() <= 1e-14);
    const Mat logit_i = head_forward(params, 1, rep_i);
    CHECK((logit_i - logits.row(i)).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("head_forward rejects a bad task index") {
  Architecture arch;
  arch.input_dim = 4;
  Rng rng(9);
  const ModelParams params = ModelParams::Init(arch, rng);
  const Mat reps = Mat::Zero(1, arch.latent_dim);
  CHECK_THROWS_AS(head_forward(params, -1, reps), InvalidInput);
  CHECK_THROWS_AS(head_forward(params, 4, reps), InvalidInput);
  CHECK_THROWS_AS(encode(params, Mat::Zero(1, 5)), InvalidInput);
}

TEST_CASE("gradient at the loss minimum is zero") {
  Architecture arch;
  arch.input_dim = 6;
  arch.encoder_hidden = {5};
  arch.latent_dim = 4;
  Rng rng(10);
  const ModelParams params = ModelParams::Init(arch, rng);
  Rng data_rng(11);
  SampleBatch batch = random_batch(data_rng, 4, 6, 4);

  // make the targets equal the model's own predictions
  const Mat reps = encode(params, batch.features);
  for (int t = 0; t < 4; ++t) {
    const Mat logits = head_forward(params, t, reps);
    for (int i = 0; i < batch.size(); ++i) {
      batch.targets[t].row(i) = softmax(logits.row(i).transpose()).transpose();
    }
  }
  for (int t = 0; t < 4; ++t) {
    const Vec g = backward_task(params, batch, t, EmdConfig{2.0}, GradSpace::kSharedParams);
    CHECK(g.cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("backward_task matches finite differences on a small net") {
  Architecture arch;
  arch.input_dim = 8;
  arch.encoder_hidden = {6};
  arch.latent_dim = 6;
  Rng rng(12);
  const ModelParams params = ModelParams::Init(arch, rng);
  Rng data_rng(13);
  const SampleBatch batch = random_batch(data_rng, 4, 8, 4);

  for (const double r : {2.0, 1.0}) {
    const EmdConfig cfg{r};
    for (int t = 0; t < 4; ++t) {
      const Vec analytic = backward_task(params, batch, t, cfg, GradSpace::kSharedParams);
      const Vec fd = oracle::finite_difference_grad(
          [&](const Vec& shared) {
            ModelParams probe = params;
            probe.shared = shared;
            return task_loss(probe, batch, t, cfg);
          },
          params.shared, 1e-5);
      CHECK(oracle::max_relative_error(analytic, fd) <= 1e-4);

      const Vec head_analytic = backward_task_head(params, batch, t, cfg);
      const Vec head_fd = oracle::finite_difference_grad(
          [&](const Vec& head) {
            ModelParams probe = params;
            probe.heads[t] = head;
            return task_loss(probe, batch, t, cfg);
          },
          params.heads[t], 1e-5);
      CHECK(oracle::max_relative_error(head_analytic, head_fd) <= 1e-4);
    }
  }
}

TEST_CASE("representation gradient chained through the encoder equals the shared gradient") {
  Architecture arch;
  arch.input_dim = 8;
  arch.encoder_hidden = {6};
  arch.latent_dim = 5;
  Rng rng(14);
  const ModelParams params = ModelParams::Init(arch, rng);
  Rng data_rng(15);
  const SampleBatch batch = random_batch(data_rng, 4, 8, 4);
  const EmdConfig cfg{2.0};

  const EncoderCache cache = encode_with_cache(params, batch.features);
  for (int t = 0; t < 4; ++t) {
    const Vec rep_flat = backward_task(params, batch, t, cfg, GradSpace::kRepresentation);
    const Mat rep_grad =
        Eigen::Map<const Mat>(rep_flat.data(), cache.reps.rows(), cache.reps.cols());
    const Vec chained = encoder_backward(params, cache, rep_grad);
    const Vec direct = backward_task(params, batch, t, cfg, GradSpace::kSharedParams);
    CHECK((chained - direct).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("per-task head gradients are independent") {
  Architecture arch;
  arch.input_dim = 6;
  Rng rng(16);
  ModelParams params = ModelParams::Init(arch, rng);
  Rng data_rng(17);
  const SampleBatch batch = random_batch(data_rng, 4, 6, 4);
  const EmdConfig cfg{2.0};

  const Vec before = backward_task(params, batch, 1, cfg, GradSpace::kSharedParams);
  params.heads[3].array() += 0.37;  // perturb a different head
  const Vec after = backward_task(params, batch, 1, cfg, GradSpace::kSharedParams);
  CHECK(before == after);
}

TEST_CASE("sgd_momentum_step follows the classical recurrence") {
  Vec p = Vec::Zero(3);
  Vec v = Vec::Zero(3);
  Vec g(3);
  g << 1.0, -2.0, 0.5;

  SUBCASE("momentum 0 is plain SGD") {
    sgd_momentum_step(p, v, g, 0.1, 0.0);
    CHECK((p + 0.1 * g).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SUBCASE("zero direction leaves parameters unchanged") {
    sgd_momentum_step(p, v, Vec::Zero(3), 0.1, 0.9);
    CHECK(p.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("two steps with momentum 0.9 accumulate g + 1.9 g") {
    sgd_momentum_step(p, v, g, 1.0, 0.9);
    sgd_momentum_step(p, v, g, 1.0, 0.9);
    CHECK((p + 2.9 * g).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("dimension mismatch is rejected") {
    Vec short_g(2);
    short_g << 1.0, 1.0;
    CHECK_THROWS_AS(sgd_momentum_step(p, v, short_g, 0.1, 0.9), InvalidInput);
  }
}

TEST_CASE("finite-difference agreement holds across random small architectures") {
  Rng rng(18);
  for (int trial = 0; trial < 10; ++trial) {
    Architecture arch;
    arch.input_dim = 3 + rng.uniform_int(4);
    arch.encoder_hidden = {3 + rng.uniform_int(3)};
    arch.latent_dim = 3 + rng.uniform_int(3);
    if (trial % 3 == 0) arch.head_hidden = {4};
    if (trial % 4 == 0) arch.activation = Activation::kTanh;
    const ModelParams params = ModelParams::Init(arch, rng);
    const SampleBatch batch = random_batch(rng, 3, arch.input_dim, arch.num_tasks);
    const EmdConfig cfg{trial % 2 == 0 ? 2.0 : 1.0};
    const int t = rng.uniform_int(4);

    const Vec analytic = backward_task(params, batch, t, cfg, GradSpace::kSharedParams);
    const Vec fd = oracle::finite_difference_grad(
        [&](const Vec& shared) {
          ModelParams probe = params;
          probe.shared = shared;
          return task_loss(probe, batch, t, cfg);
        },
        params.shared, 1e-5);
    CHECK(oracle::max_relative_error(analytic, fd) <= 1e-4);
  }
}

TEST_CASE("non-finite forward values raise NumericFailure naming the layer") {
  Architecture arch;
  arch.input_dim = 4;
  arch.encoder_hidden = {3};
  arch.latent_dim = 3;
  Rng rng(19);
  ModelParams params = ModelParams::Init(arch, rng);
  params.shared.array() *= 1e200;  // overflow in the second layer product

  Mat x = Mat::Constant(2, 4, 1.0);
  try {
    encode(params, x);
    FAIL("expected NumericFailure");
  } catch (const NumericFailure& e) {
    CHECK(std::string(e.what()).find("layer") != std::string::npos);
  }
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  Architecture arch;
  arch.input_dim = 9;
  arch.encoder_hidden = {5, 4};
  arch.latent_dim = 6;
  arch.head_hidden = {3};
  Rng rng(20);
  Checkpoint ckpt;
  ckpt.params = ModelParams::Init(arch, rng);
  TrainerState st;
  st.epoch = 17;
  st.best_val = 0.123456789123456789;
  st.vel_shared = Vec::Random(arch.shared_param_count());
  for (int t = 0; t < arch.num_tasks; ++t) st.vel_heads.push_back(Vec::Random(arch.head_param_count()));
  ckpt.trainer = st;

  const auto dir = std::filesystem::temp_directory_path() / "mtaa_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path_a = dir / "a.bin";
  const auto path_b = dir / "b.bin";
  save_checkpoint(path_a, ckpt);

  const Checkpoint loaded = load_checkpoint(path_a);
  CHECK(loaded.params.arch == arch);
  CHECK(loaded.params.shared == ckpt.params.shared);
  for (int t = 0; t < arch.num_tasks; ++t) CHECK(loaded.params.heads[t] == ckpt.params.heads[t]);
  REQUIRE(loaded.trainer.has_value());
  CHECK(loaded.trainer->epoch == 17);
  CHECK(loaded.trainer->best_val == st.best_val);
  CHECK(loaded.trainer->vel_shared == st.vel_shared);

  save_checkpoint(path_b, loaded);
  CHECK(read_bytes(path_a) == read_bytes(path_b));
  std::filesystem::remove_all(dir);
}
