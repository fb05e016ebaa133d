#include "doctest.h"
#include "sbp/omp.hpp"
#include "test_support.hpp"

using namespace sbp;

namespace {

OmpConfig atoms(Index m) {
  OmpConfig c;
  c.max_atoms = m;
  return c;
}

}  // namespace

TEST_CASE("identical unit atoms collapse to one") {
  const DenseMatrix<double> k = DenseMatrix<double>::Ones(4, 4);
  const DenseVector<double> t = DenseVector<double>::Ones(4);
  const Selection sel = omp_gram(k, t, atoms(2));
  REQUIRE(sel.indices == std::vector<Index>{0});
  CHECK(sel.weights(0) == 1.0);
  // residual correlations are exactly zero afterwards
  CHECK((t - k.col(0) * sel.weights(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a duplicate atom stops the loop through the singular update") {
  // Atoms 0 and 1 coincide. After picking atom 1 the largest |α| sits on
  // atom 0, whose Cholesky pivot is zero.
  DenseMatrix<double> a(3, 2);
  a << 1, 0, 1, 0, 0.1, 1;
  const DenseMatrix<double> k = a * a.transpose();
  DenseVector<double> t(3);
  t << 1, 2, 0;
  OmpConfig cfg = atoms(3);
  cfg.abs_correlation = true;
  const Selection sel = omp_gram(k, t, cfg);
  CHECK(sel.indices == std::vector<Index>{1});
  CHECK(sel.weights(0) == 2.0);
}

TEST_CASE("orthonormal atoms tie-break to the lowest index") {
  const DenseMatrix<double> k = DenseMatrix<double>::Identity(3, 3);
  const DenseVector<double> t = DenseVector<double>::Constant(3, 1.0 / 3.0);
  const Selection sel = omp_gram(k, t, atoms(1));
  REQUIRE(sel.indices == std::vector<Index>{0});
  CHECK(sel.weights(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("all-zero target is an empty selection") {
  const DenseMatrix<double> k = DenseMatrix<double>::Identity(3, 3);
  CHECK_THROWS_AS(omp_gram(k, DenseVector<double>::Zero(3), atoms(2)), EmptySelection);
  const DenseMatrix<double> a = DenseMatrix<double>::Identity(3, 3);
  CHECK_THROWS_AS(omp_dense_oracle(a, DenseVector<double>::Zero(3), 2), EmptySelection);
}

TEST_CASE("negative correlations end the literal greedy loop early") {
  // After the first atom the remaining correlations are all negative.
  DenseMatrix<double> k(2, 2);
  k << 1, -0.5, -0.5, 1;
  DenseVector<double> t(2);
  t << 1, -0.5;
  const Selection literal = omp_gram(k, t, atoms(2));
  CHECK(literal.size() == 1);
  OmpConfig abs_cfg = atoms(2);
  abs_cfg.abs_correlation = true;
  const Selection with_abs = omp_gram(k, t, abs_cfg);
  CHECK(with_abs.size() == 1);  // residual is already exactly zero
}

TEST_CASE("dense oracle small cases") {
  DenseMatrix<double> a(1, 3);
  a << 1, 2, 3;
  DenseVector<double> b(3);
  b << 1, 2, 3;
  const Selection one = omp_dense_oracle(a, b, 1);
  CHECK(one.indices == std::vector<Index>{0});
  CHECK(one.weights(0) == doctest::Approx(1.0));

  const DenseMatrix<double> ortho = DenseMatrix<double>::Identity(4, 4);
  const Selection pick = omp_dense_oracle(ortho, DenseVector<double>(ortho.row(2).transpose()), 1);
  CHECK(pick.indices == std::vector<Index>{2});
  CHECK(pick.weights(0) == doctest::Approx(1.0));
}

TEST_CASE("dense oracle at full support solves least squares exactly") {
  Rng rng = make_rng(31);
  const DenseMatrix<double> a = testing::gaussian(6, 6, rng);
  const DenseVector<double> b = a.colwise().mean().transpose();
  const Selection sel = omp_dense_oracle(a, b, 6);
  REQUIRE(sel.size() == 6);
  DenseVector<double> approx = DenseVector<double>::Zero(6);
  for (Index s = 0; s < 6; ++s) approx += sel.weights(s) * a.row(sel.indices[s]).transpose();
  CHECK((approx - b).norm() <= 1e-10 * b.norm());
}

TEST_CASE("gram OMP reproduces the dense oracle") {
  Rng rng = make_rng(32);
  std::uniform_int_distribution<Index> mdist(8, 64), kdist(1, 16);
  int checked = 0;
  while (checked < 100) {
    const Index m = mdist(rng);
    const Index want = std::min(kdist(rng), m);
    const DenseMatrix<double> a = testing::gaussian(m, 20, rng);
    const DenseVector<double> target = a.colwise().mean().transpose();
    if (!testing::tie_free(a, target, want)) continue;
    ++checked;
    const DenseMatrix<double> k = a * a.transpose();
    const Selection fast = omp_gram(k, mean_correlations(k), atoms(want));
    const Selection slow = omp_dense_oracle(a, target, want);
    REQUIRE(fast.indices == slow.indices);
    CHECK((fast.weights - slow.weights).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("objective is non-increasing along the greedy path") {
  Rng rng = make_rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const BatchTape<double> tape = testing::random_tape(24, 6, 3, rng);
    const DenseMatrix<double> k = gram_implicit(tape);
    const DenseVector<double> t = mean_correlations(k);
    const double t0 = t.mean();
    double prev = t0;
    for (Index m = 1; m <= 12; ++m) {
      const Selection sel = omp_gram(k, t, atoms(m));
      const double obj = residual_norm_sq(k, t, t0, sel);
      CHECK(obj <= prev + 1e-12 * t0);
      prev = obj;
    }
  }
}

TEST_CASE("first pick maximizes the correlation with the mean gradient") {
  Rng rng = make_rng(34);
  for (int trial = 0; trial < 20; ++trial) {
    const BatchTape<double> tape = testing::random_tape(16, 4, 3, rng);
    const DenseMatrix<double> g = last_layer_gradients(tape);
    const DenseVector<double> mean = g.colwise().mean().transpose();
    Index best = 0;
    for (Index i = 1; i < g.rows(); ++i) {
      if (g.row(i).dot(mean) > g.row(best).dot(mean)) best = i;
    }
    const DenseMatrix<double> k = gram_implicit(tape);
    CHECK(omp_gram(k, mean_correlations(k), atoms(1)).indices.front() == best);
  }
}

TEST_CASE("mean in the span of few atoms is recovered exactly") {
  Rng rng = make_rng(35);
  for (int trial = 0; trial < 10; ++trial) {
    // 10 atoms built from 3 generators, with weights making the mean equal
    // a combination of atoms 0..2.
    const DenseMatrix<double> basis = testing::gaussian(3, 12, rng);
    DenseMatrix<double> a(10, 12);
    a.topRows(3) = basis;
    a.bottomRows(7) = testing::gaussian(7, 3, rng) * basis;
    const DenseVector<double> target = a.colwise().mean().transpose();
    const DenseMatrix<double> k = a * a.transpose();
    const DenseVector<double> t = a * target;
    const Selection sel = omp_gram(k, t, atoms(3));
    CHECK(residual_norm_sq(k, t, target.squaredNorm(), sel) <= 1e-10 * target.squaredNorm());
  }
}

TEST_CASE("full support returns uniform weights 1/M") {
  Rng rng = make_rng(36);
  for (int trial = 0; trial < 10; ++trial) {
    const BatchTape<double> tape = testing::random_tape(8, 5, 3, rng);
    const DenseMatrix<double> k = gram_implicit(tape);
    const Selection sel = omp_gram(k, mean_correlations(k), atoms(8));
    REQUIRE(sel.size() == 8);
    CHECK((sel.weights.array() - 0.125).abs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("residual_norm_sq matches explicit vectors") {
  Rng rng = make_rng(37);
  const BatchTape<double> tape = testing::random_tape(12, 4, 3, rng);
  const DenseMatrix<double> g = last_layer_gradients(tape);
  const DenseVector<double> mean = g.colwise().mean().transpose();
  const DenseMatrix<double> k = gram_implicit(tape);
  const DenseVector<double> t = mean_correlations(k);
  const double t0 = t.mean();
  CHECK(t0 == doctest::Approx(mean.squaredNorm()).epsilon(1e-12));

  Selection zero;
  zero.indices = {1, 4};
  zero.weights = DenseVector<double>::Zero(2);
  CHECK(residual_norm_sq(k, t, t0, zero) == t0);

  Selection sel;
  sel.indices = {3, 7, 0};
  sel.weights = testing::gaussian(3, 1, rng);
  DenseVector<double> approx = -mean;
  for (Index s = 0; s < 3; ++s) approx += sel.weights(s) * g.row(sel.indices[s]).transpose();
  CHECK(residual_norm_sq(k, t, t0, sel) == doctest::Approx(approx.squaredNorm()).epsilon(1e-10));

  Selection all = omp_gram(k, t, atoms(12));
  CHECK(residual_norm_sq(k, t, t0, all) <= 1e-12 * t0);
}

TEST_CASE("config validation") {
  const DenseMatrix<double> k = DenseMatrix<double>::Identity(3, 3);
  const DenseVector<double> t = DenseVector<double>::Ones(3);
  CHECK_THROWS_AS(omp_gram(k, t, atoms(0)), DimensionMismatch);
  CHECK_THROWS_AS(omp_gram(k, t, atoms(4)), DimensionMismatch);
  CHECK_THROWS_AS(omp_gram(k, DenseVector<double>::Ones(2), atoms(1)), DimensionMismatch);
}
