#include "doctest.h"
#include "sbp/model.hpp"
#include "test_support.hpp"

using namespace sbp;

namespace {

// Softmax cross-entropy of one logit row, computed directly.
double xent(const DenseVector<double>& z, int label) {
  const double mx = z.maxCoeff();
  return mx + std::log((z.array() - mx).exp().sum()) - z(label);
}

}  // namespace

TEST_CASE("layout places each weight block before its bias") {
  const std::vector<Index> widths{2, 16, 3};
  const ParamLayout layout = make_layout(widths);
  REQUIRE(layout.size() == 2);
  CHECK(layout[0].weight_offset == 0);
  CHECK(layout[0].bias_offset == 32);
  CHECK(layout[1].weight_offset == 48);
  CHECK(layout[1].bias_offset == 96);
  Mlp net(widths, Activation::relu);
  CHECK(net.parameter_count() == 99);
  net.weight(1)(2, 5) = 7.0;
  CHECK(net.parameters()(48 + 2 * 16 + 5) == 7.0);
  net.bias(0)(4) = -1.0;
  CHECK(net.parameters()(36) == -1.0);
}

TEST_CASE("zero parameters give loss ln C") {
  Mlp net({2, 8, 3}, Activation::relu);
  Rng rng = make_rng(60);
  const DenseMatrix<double> x = testing::gaussian(10, 2, rng);
  const auto y = testing::random_labels(10, 3, rng);
  CHECK(mean_loss(net, x, y) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  const BatchTape<double> tape = forward_tape(net, x, y);
  for (Index i = 0; i < 10; ++i) {
    for (Index c = 0; c < 3; ++c) {
      const double expect = 1.0 / 3.0 - (c == y[i] ? 1.0 : 0.0);
      CHECK(tape.P(i, c) == doctest::Approx(expect).epsilon(1e-14));
    }
  }
}

TEST_CASE("a saturated correct logit gives zero loss and gradient") {
  Mlp net({1, 2}, Activation::relu);
  net.bias(0) << 1000.0, 0.0;
  DenseMatrix<double> x = DenseMatrix<double>::Zero(1, 1);
  const std::vector<int> y{0};
  const BatchTape<double> tape = forward_tape(net, x, y);
  CHECK(tape.losses(0) == doctest::Approx(0.0));
  CHECK(std::isfinite(tape.losses(0)));
  CHECK(tape.P.cwiseAbs().maxCoeff() < 1e-300);

  const std::vector<int> wrong{1};
  const BatchTape<double> bad = forward_tape(net, x, wrong);
  CHECK(bad.losses(0) == doctest::Approx(1000.0));
  CHECK(std::isfinite(bad.losses(0)));
}

TEST_CASE("output gradients match finite differences of the logits") {
  Rng rng = make_rng(61);
  const Mlp net = testing::random_mlp({3, 6, 4}, rng, Activation::tanh);
  const DenseMatrix<double> x = testing::gaussian(5, 3, rng);
  const auto y = testing::random_labels(5, 4, rng);
  const BatchTape<double> tape = forward_tape(net, x, y);
  const DenseMatrix<double> z = logits(net, x);
  const double h = 1e-6;
  for (Index i = 0; i < 5; ++i) {
    CHECK(tape.losses(i) == doctest::Approx(xent(z.row(i).transpose(), y[i])).epsilon(1e-12));
    CHECK(std::abs(tape.P.row(i).sum()) < 1e-12);
    for (Index c = 0; c < 4; ++c) {
      DenseVector<double> up = z.row(i).transpose(), down = up;
      up(c) += h;
      down(c) -= h;
      const double fd = (xent(up, y[i]) - xent(down, y[i])) / (2 * h);
      CHECK(std::abs(fd - tape.P(i, c)) < 1e-8);
    }
  }
}

TEST_CASE("backprop gradients match finite differences") {
  for (Activation act : {Activation::relu, Activation::tanh}) {
    Rng rng = make_rng(62);
    const Mlp net = testing::random_mlp({2, 16, 3}, rng, act);
    const DenseMatrix<double> x = testing::gaussian(8, 2, rng);
    const auto y = testing::random_labels(8, 3, rng);
    const DenseVector<double> fd = testing::fd_gradient(net, x, y);
    const GradientVector g = mean_gradient(net, x, y);
    CHECK(testing::max_rel_err(g.values, fd) <= 1e-6);

    const auto per = per_example_grads(net, x, y);
    DenseVector<double> avg = DenseVector<double>::Zero(net.parameter_count());
    for (const auto& gi : per) avg += gi.values / 8.0;
    CHECK((avg - g.values).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("the tape's last-layer gradients agree with backprop") {
  Rng rng = make_rng(63);
  const Mlp net = testing::random_mlp({2, 16, 3}, rng);
  const DenseMatrix<double> x = testing::gaussian(20, 2, rng);
  const auto y = testing::random_labels(20, 3, rng);
  CHECK(last_layer_grad_check(net, x, y) <= 1e-10);
}

TEST_CASE("weighted_backward averages weighted per-example gradients over |I|") {
  Rng rng = make_rng(64);
  const Mlp net = testing::random_mlp({3, 5, 5, 2}, rng);
  const DenseMatrix<double> x = testing::gaussian(12, 3, rng);
  const auto y = testing::random_labels(12, 2, rng);
  const auto per = per_example_grads(net, x, y);

  Selection sel;
  sel.indices = {1, 4, 9};
  sel.weights = DenseVector<double>(3);
  sel.weights << 0.5, 2.0, 0.5;
  DenseVector<double> expect = DenseVector<double>::Zero(net.parameter_count());
  for (std::size_t k = 0; k < 3; ++k) expect += sel.weights(k) * per[sel.indices[k]].values / 3.0;
  const GradientVector g = weighted_backward(net, x, y, sel);
  CHECK((g.values - expect).cwiseAbs().maxCoeff() <= 1e-13);

  Selection all;
  all.indices.resize(12);
  std::iota(all.indices.begin(), all.indices.end(), Index{0});
  all.weights = DenseVector<double>::Ones(12);
  CHECK((weighted_backward(net, x, y, all).values - mean_gradient(net, x, y).values)
            .cwiseAbs()
            .maxCoeff() <= 1e-14);
}

TEST_CASE("the Gram identity holds for tapes from a real network") {
  Rng rng = make_rng(65);
  const Mlp net = testing::random_mlp({2, 16, 3}, rng);
  const DenseMatrix<double> x = testing::gaussian(30, 2, rng);
  const auto y = testing::random_labels(30, 3, rng);
  const BatchTape<double> tape = forward_tape(net, x, y);
  const auto per = per_example_grads(net, x, y);
  DenseMatrix<double> g(30, per.front().last_layer().size());
  for (Index i = 0; i < 30; ++i) g.row(i) = per[i].last_layer().transpose();
  CHECK(testing::max_rel_err(gram_implicit(tape), g * g.transpose()) <= 1e-10);
}

TEST_CASE("initialization is seeded and bounded") {
  ModelSpec spec;
  spec.input_dim = 4;
  spec.hidden = {8};
  spec.num_classes = 3;
  Rng a = make_rng(66), b = make_rng(66);
  const Mlp na = Mlp::initialized(spec, a), nb = Mlp::initialized(spec, b);
  CHECK(na.parameters() == nb.parameters());
  CHECK(na.weight(0).cwiseAbs().maxCoeff() <= 0.5);
  CHECK(na.weight(0).cwiseAbs().maxCoeff() > 0.25);
  CHECK(na.bias(1).cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
}

TEST_CASE("model input checks") {
  Mlp net({2, 3}, Activation::relu);
  const DenseMatrix<double> x = DenseMatrix<double>::Zero(2, 3);
  const std::vector<int> y{0, 1};
  CHECK_THROWS_AS(forward_tape(net, x, y), DimensionMismatch);
  const DenseMatrix<double> ok = DenseMatrix<double>::Zero(2, 2);
  const std::vector<int> bad{0, 5};
  CHECK_THROWS_AS(forward_tape(net, ok, bad), LabelOutOfRange);
  CHECK(parse_activation("tanh") == Activation::tanh);
  CHECK_FALSE(parse_activation("gelu").has_value());
}
