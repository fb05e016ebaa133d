#include "sbp/selftest.hpp"

#include <cmath>
#include <sstream>

#include "sbp/gram.hpp"
#include "sbp/model.hpp"
#include "sbp/omp.hpp"

namespace sbp {

namespace {

DenseMatrix<double> gaussian(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  DenseMatrix<double> m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = g(rng);
  }
  return m;
}

std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

SelfTestResult check_cholesky(Rng& rng) {
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + trial % 7;
    const DenseMatrix<double> a = gaussian(n, n + 3, rng);
    const DenseMatrix<double> spd = a * a.transpose();
    LowerCholesky<double> chol(n);
    for (Index k = 0; k < n; ++k) chol.append(spd.col(k).head(k), spd(k, k));
    worst = std::max(worst, (chol.reconstruct() - spd).norm() / spd.norm());
  }
  return {"cholesky append reconstruction", worst <= 1e-10, "max rel err " + sci(worst)};
}

SelfTestResult check_gram(Rng& rng) {
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    BatchTape<double> tape;
    const Index m = 1 + trial % 32, d = 1 + trial % 16, c = 1 + trial % 8;
    tape.H = gaussian(m, d, rng);
    tape.P = gaussian(m, c, rng);
    tape.losses = DenseVector<double>::Zero(m);
    const auto ki = gram_implicit(tape);
    const auto ke = gram_explicit(tape);
    worst = std::max(worst, (ki - ke).cwiseAbs().maxCoeff() / ke.cwiseAbs().maxCoeff());
  }
  return {"implicit gram == explicit gram", worst <= 1e-12, "max rel err " + sci(worst)};
}

SelfTestResult check_omp(Rng& rng) {
  int mismatches = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const Index m = 8 + trial, d = 24, atoms_wanted = 1 + trial % 8;
    const DenseMatrix<double> a = gaussian(m, d, rng);
    const DenseVector<double> target = a.colwise().mean().transpose();
    const DenseMatrix<double> k = a * a.transpose();
    const DenseVector<double> t = a * target;
    OmpConfig cfg;
    cfg.max_atoms = atoms_wanted;
    const Selection fast = omp_gram(k, t, cfg);
    const Selection slow = omp_dense_oracle(a, target, atoms_wanted);
    if (fast.indices != slow.indices) {
      ++mismatches;
      continue;
    }
    worst = std::max(worst, (fast.weights - slow.weights).cwiseAbs().maxCoeff());
  }
  return {"gram OMP == dense OMP", mismatches == 0 && worst <= 1e-8,
          std::to_string(mismatches) + " index mismatches, max weight diff " + sci(worst)};
}

SelfTestResult check_finite_differences(Rng& rng) {
  ModelSpec spec;
  spec.input_dim = 2;
  spec.hidden = {16};
  spec.num_classes = 3;
  Mlp net = Mlp::initialized(spec, rng);
  const DenseMatrix<double> x = gaussian(6, 2, rng);
  const std::vector<int> y{0, 1, 2, 2, 1, 0};
  const DenseVector<double> analytic = mean_gradient(net, x, y).values;
  DenseVector<double> numeric(analytic.size());
  constexpr double h = 1e-5;
  for (Index p = 0; p < numeric.size(); ++p) {
    const double keep = net.parameters()(p);
    net.parameters()(p) = keep + h;
    const double up = mean_loss(net, x, y);
    net.parameters()(p) = keep - h;
    const double down = mean_loss(net, x, y);
    net.parameters()(p) = keep;
    numeric(p) = (up - down) / (2 * h);
  }
  const double rel = (numeric - analytic).norm() / analytic.norm();
  const double last = last_layer_grad_check(net, x, y);
  return {"finite differences + last-layer blocks", rel <= 1e-6 && last <= 1e-10,
          "fd rel err " + sci(rel) + ", last-layer err " + sci(last)};
}

}  // namespace

std::vector<SelfTestResult> run_selftest(std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x5e1f);
  std::vector<SelfTestResult> out;
  auto guarded = [&](const char* name, auto check) {
    try {
      out.push_back(check(rng));
    } catch (const std::exception& e) {
      out.push_back({name, false, std::string("threw: ") + e.what()});
    }
  };
  guarded("cholesky append reconstruction", check_cholesky);
  guarded("implicit gram == explicit gram", check_gram);
  guarded("gram OMP == dense OMP", check_omp);
  guarded("finite differences + last-layer blocks", check_finite_differences);
  return out;
}

}  // namespace sbp
