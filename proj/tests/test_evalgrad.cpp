#include <filesystem>
#include <map>

#include "doctest.h"
#include "sbp/evalgrad.hpp"
#include "test_support.hpp"

using namespace sbp;

namespace {

std::vector<StrategyConfig> kinds(std::initializer_list<StrategyKind> list) {
  std::vector<StrategyConfig> out;
  for (StrategyKind k : list) {
    StrategyConfig c;
    c.kind = k;
    out.push_back(c);
  }
  return out;
}

}  // namespace

TEST_CASE("full gradient of a single point is that point's gradient") {
  Rng rng = make_rng(80);
  const Mlp net = testing::random_mlp({2, 8, 3}, rng);
  const DenseMatrix<double> x = testing::gaussian(1, 2, rng);
  const std::vector<int> y{2};
  const auto per = per_example_grads(net, x, y);
  CHECK((full_dataset_gradient(net, x, y).values - per.front().values).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("full gradient is the exact mean and ignores duplication") {
  Rng rng = make_rng(81);
  const Mlp net = testing::random_mlp({2, 16, 3}, rng);
  const DenseMatrix<double> x = testing::gaussian(256, 2, rng);
  const auto y = testing::random_labels(256, 3, rng);
  const GradientVector full = full_dataset_gradient(net, x, y, 37);

  DenseVector<double> sum = DenseVector<double>::Zero(net.parameter_count());
  for (const auto& g : per_example_grads(net, x, y)) sum += g.values;
  const DenseVector<double> mean = sum / 256.0;
  CHECK((full.values - mean).cwiseAbs().maxCoeff() <= 1e-12);

  DenseMatrix<double> x2(512, 2);
  x2 << x, x;
  std::vector<int> y2 = y;
  y2.insert(y2.end(), y.begin(), y.end());
  CHECK((full_dataset_gradient(net, x2, y2).values - full.values).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("the full strategy on a dataset that is one batch has zero error") {
  Rng rng = make_rng(82);
  const Mlp net = testing::random_mlp({2, 8, 3}, rng);
  const DenseMatrix<double> x = testing::gaussian(32, 2, rng);
  const auto y = testing::random_labels(32, 3, rng);
  const auto samples = gradient_error_experiment(net, x, y, kinds({StrategyKind::full}), 5, 32, 32, 1);
  REQUIRE(samples.size() == 5);
  for (const auto& s : samples) CHECK(s.squared_error <= 1e-26);
}

TEST_CASE("random selection with m = M matches the plain minibatch estimator") {
  Rng rng = make_rng(83);
  const Mlp net = testing::random_mlp({2, 8, 3}, rng);
  const DenseMatrix<double> x = testing::gaussian(100, 2, rng);
  const auto y = testing::random_labels(100, 3, rng);
  const auto samples = gradient_error_experiment(
      net, x, y, kinds({StrategyKind::full, StrategyKind::random}), 20, 16, 16, 2);
  REQUIRE(samples.size() == 40);
  for (std::size_t i = 0; i < samples.size(); i += 2) {
    CHECK(samples[i].strategy == "full");
    CHECK(samples[i + 1].strategy == "random");
    CHECK(samples[i].batch_index == samples[i + 1].batch_index);
    CHECK(samples[i].squared_error == samples[i + 1].squared_error);
    CHECK(samples[i].squared_error > 0.0);
  }
}

TEST_CASE("strategies see the same batches whatever else is listed") {
  Rng rng = make_rng(84);
  const Mlp net = testing::random_mlp({2, 8, 3}, rng);
  const DenseMatrix<double> x = testing::gaussian(200, 2, rng);
  const auto y = testing::random_labels(200, 3, rng);
  const auto solo = gradient_error_experiment(net, x, y, kinds({StrategyKind::full}), 10, 32, 8, 3);
  const auto mixed = gradient_error_experiment(
      net, x, y, kinds({StrategyKind::grad_match, StrategyKind::full, StrategyKind::loss_based}), 10, 32, 8, 3);
  for (Index b = 0; b < 10; ++b) CHECK(mixed[3 * b + 1].squared_error == solo[b].squared_error);
}

TEST_CASE("histogram rows cover every batch for every strategy and round-trip") {
  Rng rng = make_rng(85);
  const Mlp net = testing::random_mlp({2, 8, 3}, rng);
  const DenseMatrix<double> x = testing::gaussian(150, 2, rng);
  const auto y = testing::random_labels(150, 3, rng);
  const auto samples = gradient_error_experiment(
      net, x, y, kinds({StrategyKind::random, StrategyKind::loss_based, StrategyKind::grad_match}), 12, 32,
      8, 4);
  std::map<std::string, int> counts;
  for (const auto& s : samples) {
    ++counts[s.strategy];
    CHECK(s.squared_error >= 0.0);
  }
  CHECK(counts == std::map<std::string, int>{{"grad_match", 12}, {"loss_based", 12}, {"random", 12}});

  const auto path = (std::filesystem::temp_directory_path() / "sbp_hist_test.csv").string();
  write_histogram_csv(samples, path);
  CHECK(read_histogram_csv(path) == samples);
  std::filesystem::remove(path);
  CHECK(median_error(samples, "random") >= 0.0);
  CHECK_THROWS_AS(median_error(samples, "full"), Error);
}

TEST_CASE("gradient error experiment rejects impossible sizes") {
  Rng rng = make_rng(86);
  const Mlp net = testing::random_mlp({2, 4, 2}, rng);
  const DenseMatrix<double> x = testing::gaussian(10, 2, rng);
  const auto y = testing::random_labels(10, 2, rng);
  const auto s = kinds({StrategyKind::random});
  CHECK_THROWS_AS(gradient_error_experiment(net, x, y, s, 1, 11, 4, 0), BadFraction);
  CHECK_THROWS_AS(gradient_error_experiment(net, x, y, s, 1, 8, 9, 0), BadFraction);
  CHECK_THROWS_AS(gradient_error_experiment(net, x, y, s, 1, 8, 0, 0), BadFraction);
}
