#include "mtaa/metrics.hpp"

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

std::vector<SampleRecord> random_records(Rng& rng, int n, const std::string& prefix) {
  std::vector<SampleRecord> out;
  for (int i = 0; i < n; ++i) {
    SampleRecord rec;
    rec.id = prefix + std::to_string(i);
    for (int d = 0; d < 4; ++d) {
      Vec p(kNumLevels);
      for (int k = 0; k < kNumLevels; ++k) p[k] = rng.uniform() + 1e-3;
      rec.targets.emplace_back(p / p.sum());
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

TEST_CASE("pcc on the reference vectors") {
  CHECK(pcc(make_vec({1, 2, 3, 4}), make_vec({1, 2, 3, 4})) == doctest::Approx(1.0));
  CHECK(pcc(make_vec({1, 2, 3}), make_vec({3, 2, 1})) == doctest::Approx(-1.0));
  // 10 / sqrt(10 * 14.8)
  CHECK(pcc(make_vec({1, 2, 3, 4, 5}), make_vec({2, 1, 4, 3, 6})) ==
        doctest::Approx(0.8219949365267865).epsilon(1e-12));
}

TEST_CASE("pcc errors") {
  CHECK_THROWS_AS(pcc(make_vec({1, 2}), make_vec({1, 2, 3})), InvalidInput);
  CHECK_THROWS_AS(pcc(make_vec({1}), make_vec({1})), InvalidInput);
  CHECK_THROWS_AS(pcc(make_vec({2, 2, 2}), make_vec({1, 2, 3})), DegenerateInput);
  CHECK_THROWS_AS(pcc(make_vec({1, 2, 3}), make_vec({5, 5, 5})), DegenerateInput);
}

TEST_CASE("scc on the reference vectors") {
  const Vec a = make_vec({0.3, 1.1, 2.0, 3.5});
  Vec exp_a(4);
  for (int i = 0; i < 4; ++i) exp_a[i] = std::exp(a[i]);
  CHECK(scc(a, exp_a) == doctest::Approx(1.0));
  CHECK(scc(make_vec({1, 2, 3, 4}), make_vec({4, 3, 2, 1})) == doctest::Approx(-1.0));
  // ranks (1, 2.5, 2.5, 4) vs (1, 3, 2, 4): 3/sqrt(10)
  CHECK(scc(make_vec({1, 2, 2, 4}), make_vec({1, 3, 2, 4})) ==
        doctest::Approx(0.9486832980505138).epsilon(1e-12));
}

TEST_CASE("average_ranks assigns fractional ranks to ties") {
  const Vec r = average_ranks(make_vec({1, 2, 2, 4}));
  CHECK(r[0] == 1.0);
  CHECK(r[1] == 2.5);
  CHECK(r[2] == 2.5);
  CHECK(r[3] == 4.0);
}

TEST_CASE("rmse on the reference vectors") {
  CHECK(rmse(make_vec({1, 2, 3}), make_vec({1, 2, 3})) == 0.0);
  CHECK(rmse(make_vec({0, 0}), make_vec({3, 4})) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-12));
  CHECK(rmse(make_vec({1}), make_vec({4})) == doctest::Approx(3.0));
  CHECK_THROWS_AS(rmse(make_vec({1, 2}), make_vec({1})), InvalidInput);
}

TEST_CASE("pcc and scc are invariant under positive affine transforms") {
  Rng rng(401);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + rng.uniform_int(30);
    Vec a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = rng.normal();
      b[i] = rng.normal();
    }
    const double scale = 0.1 + 3.0 * rng.uniform();
    const double shift = rng.normal();
    const Vec a2 = (scale * a.array() + shift).matrix();
    CHECK(std::abs(pcc(a2, b) - pcc(a, b)) <= 1e-12);
    CHECK(std::abs(scc(a2, b) - scc(a, b)) <= 1e-12);
  }
}

TEST_CASE("scc depends only on rank order") {
  Rng rng(402);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + rng.uniform_int(30);
    Vec a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = rng.normal();
      b[i] = rng.normal();
    }
    Vec cubed(n);
    for (int i = 0; i < n; ++i) cubed[i] = a[i] * a[i] * a[i] + 2.0;  // strictly increasing
    CHECK(std::abs(scc(cubed, b) - scc(a, b)) <= 1e-12);
  }
}

TEST_CASE("rmse is symmetric and satisfies the triangle inequality") {
  Rng rng(403);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + rng.uniform_int(10);
    Vec a(n), b(n), c(n);
    for (int i = 0; i < n; ++i) {
      a[i] = rng.normal();
      b[i] = rng.normal();
      c[i] = rng.normal();
    }
    CHECK(rmse(a, b) == doctest::Approx(rmse(b, a)).epsilon(1e-14));
    CHECK(rmse(a, b) <= rmse(a, c) + rmse(c, b) + 1e-12);
  }
}

TEST_CASE("metrics match the direct-formula oracles") {
  Rng rng(404);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + rng.uniform_int(40);
    Vec a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = rng.normal();
      b[i] = 0.3 * a[i] + rng.normal();
    }
    if (trial % 4 == 0) a[0] = a[1];  // introduce ties
    CHECK(std::abs(pcc(a, b) - oracle::pcc_direct(a, b)) <= 1e-10);
    CHECK(std::abs(scc(a, b) - oracle::scc_direct(a, b)) <= 1e-10);
    CHECK(std::abs(rmse(a, b) - oracle::rmse_direct(a, b)) <= 1e-10);
  }
}

TEST_CASE("evaluate on matched record sets") {
  Rng rng(405);
  const std::vector<SampleRecord> truth = random_records(rng, 20, "img");

  SUBCASE("identical predictions score perfectly") {
    const EvalReport report = evaluate(truth, truth);
    CHECK(report.n == 20);
    for (int d = 0; d < 4; ++d) {
      CHECK(report.dims[d].pcc == doctest::Approx(1.0));
      CHECK(report.dims[d].scc == doctest::Approx(1.0));
      CHECK(report.dims[d].rmse == doctest::Approx(0.0));
    }
  }

  SUBCASE("id mismatch is rejected") {
    std::vector<SampleRecord> preds = truth;
    preds[3].id = "stranger";
    CHECK_THROWS_AS(evaluate(preds, truth), InvalidInput);
  }

  SUBCASE("order does not matter, only ids") {
    std::vector<SampleRecord> preds(truth.rbegin(), truth.rend());
    const EvalReport report = evaluate(preds, truth);
    for (int d = 0; d < 4; ++d) CHECK(report.dims[d].rmse == doctest::Approx(0.0));
  }

  SUBCASE("matches an independent recomputation") {
    Rng rng2(406);
    const std::vector<SampleRecord> preds = [&] {
      std::vector<SampleRecord> p = truth;
      for (auto& rec : p) {
        for (auto& t : rec.targets) {
          Vec probs = t.probs();
          for (int k = 0; k < kNumLevels; ++k) probs[k] += 0.05 * rng2.uniform();
          t = ScoreDistribution(probs / probs.sum());
        }
      }
      return p;
    }();
    const EvalReport report = evaluate(preds, truth);
    for (int d = 0; d < 4; ++d) {
      Vec ps(20), ts(20);
      for (int i = 0; i < 20; ++i) {
        ps[i] = mean_score(preds[i].targets[d]);
        ts[i] = mean_score(truth[i].targets[d]);
      }
      CHECK(report.dims[d].pcc == doctest::Approx(oracle::pcc_direct(ps, ts)).epsilon(1e-12));
      CHECK(report.dims[d].scc == doctest::Approx(oracle::scc_direct(ps, ts)).epsilon(1e-12));
      CHECK(report.dims[d].rmse == doctest::Approx(oracle::rmse_direct(ps, ts)).epsilon(1e-12));
    }
  }
}

TEST_CASE("affine-shifted mean scores keep correlation 1 with rmse equal to the shift") {
  // truth concentrated as point masses at levels 1..5 repeated, predictions
  // shifted up by mixing toward the next level
  std::vector<SampleRecord> truth, preds;
  for (int i = 0; i < 4; ++i) {
    SampleRecord t, p;
    t.id = p.id = "x" + std::to_string(i);
    for (int d = 0; d < 4; ++d) {
      Vec tv = Vec::Zero(kNumLevels);
      tv[i] = 1.0;
      t.targets.emplace_back(tv);
      Vec pv = Vec::Zero(kNumLevels);
      pv[i] = 0.5;
      pv[i + 1] = 0.5;  // mean shifted by +0.5
      p.targets.emplace_back(pv);
    }
    truth.push_back(t);
    preds.push_back(p);
  }
  const EvalReport report = evaluate(preds, truth);
  for (int d = 0; d < 4; ++d) {
    CHECK(report.dims[d].pcc == doctest::Approx(1.0));
    CHECK(report.dims[d].scc == doctest::Approx(1.0));
    CHECK(report.dims[d].rmse == doctest::Approx(0.5));
  }
}

TEST_CASE("eval tables round-trip losslessly") {
  Rng rng(407);
  EvalReport report;
  report.n = 123;
  for (int d = 0; d < 4; ++d) {
    report.dims[d].pcc = rng.uniform(-1.0, 1.0);
    report.dims[d].scc = rng.uniform(-1.0, 1.0);
    report.dims[d].rmse = rng.uniform(0.0, 2.0);
  }
  const std::string table = format_eval_table(report);
  const EvalReport back = parse_eval_table(table);
  CHECK(back.n == report.n);
  for (int d = 0; d < 4; ++d) {
    CHECK(back.dims[d].pcc == report.dims[d].pcc);
    CHECK(back.dims[d].scc == report.dims[d].scc);
    CHECK(back.dims[d].rmse == report.dims[d].rmse);
  }
  CHECK(format_eval_table(back) == table);
  CHECK_THROWS_AS(parse_eval_table("measure,a,b\n"), ParseError);
}
