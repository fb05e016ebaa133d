#include "sbp/model.hpp"

#include <cmath>
#include <string>

namespace sbp {

std::string_view to_string(Activation act) {
  return act == Activation::relu ? "relu" : "tanh";
}

std::optional<Activation> parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  return std::nullopt;
}

ParamLayout make_layout(std::span<const Index> widths) {
  if (widths.size() < 2) throw DimensionMismatch("MLP needs at least input and output widths");
  ParamLayout layout;
  Index offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    if (widths[l] < 1 || widths[l + 1] < 1) throw DimensionMismatch("MLP widths must be positive");
    LayerSlice s;
    s.in = widths[l];
    s.out = widths[l + 1];
    s.weight_offset = offset;
    s.bias_offset = offset + s.in * s.out;
    offset = s.bias_offset + s.out;
    layout.push_back(s);
  }
  return layout;
}

Mlp::Mlp(std::vector<Index> widths, Activation act)
    : widths_(std::move(widths)), activation_(act), layout_(make_layout(widths_)) {
  const LayerSlice& last = layout_.back();
  params_ = DenseVector<double>::Zero(last.bias_offset + last.out);
}

Mlp Mlp::initialized(const ModelSpec& spec, Rng& rng) {
  std::vector<Index> widths{spec.input_dim};
  widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
  widths.push_back(spec.num_classes);
  Mlp net(std::move(widths), spec.activation);
  // Kaiming-uniform with negative slope sqrt(5): both bounds reduce to 1/sqrt(fan_in).
  for (Index l = 0; l < net.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.layout_[l].in));
    std::uniform_real_distribution<double> w_dist(-bound, bound);
    std::uniform_real_distribution<double> b_dist(-bound, bound);
    auto w = net.weight(l);
    for (Index i = 0; i < w.rows(); ++i) {
      for (Index j = 0; j < w.cols(); ++j) w(i, j) = w_dist(rng);
    }
    auto b = net.bias(l);
    for (Index i = 0; i < b.size(); ++i) b(i) = b_dist(rng);
  }
  return net;
}

Eigen::Map<const RowMajorMatrix> Mlp::weight(Index layer) const {
  const LayerSlice& s = layout_.at(layer);
  return {params_.data() + s.weight_offset, s.out, s.in};
}

Eigen::Map<RowMajorMatrix> Mlp::weight(Index layer) {
  const LayerSlice& s = layout_.at(layer);
  return {params_.data() + s.weight_offset, s.out, s.in};
}

Eigen::Map<const DenseVector<double>> Mlp::bias(Index layer) const {
  const LayerSlice& s = layout_.at(layer);
  return {params_.data() + s.bias_offset, s.out};
}

Eigen::Map<DenseVector<double>> Mlp::bias(Index layer) {
  const LayerSlice& s = layout_.at(layer);
  return {params_.data() + s.bias_offset, s.out};
}

namespace {

struct ForwardCache {
  std::vector<DenseMatrix<double>> pre;   // pre-activations of every layer
  std::vector<DenseMatrix<double>> post;  // post[0] = input, post[l] = act(pre[l-1])
};

void check_batch(const Mlp& net, const DenseMatrix<double>& x, std::span<const int> y) {
  if (x.cols() != net.input_dim()) {
    throw DimensionMismatch("input has " + std::to_string(x.cols()) + " columns, model expects " +
                            std::to_string(net.input_dim()));
  }
  if (static_cast<Index>(y.size()) != x.rows()) {
    throw DimensionMismatch("label count " + std::to_string(y.size()) + " != rows " +
                            std::to_string(x.rows()));
  }
  for (int label : y) {
    if (label < 0 || label >= net.num_classes()) {
      throw LabelOutOfRange("label " + std::to_string(label) + " outside [0, " +
                              std::to_string(net.num_classes()) + ")");
    }
  }
}

void activate(Activation act, const DenseMatrix<double>& z, DenseMatrix<double>& out) {
  if (act == Activation::relu) {
    out = z.cwiseMax(0.0);
  } else {
    out = z.array().tanh().matrix();
  }
}

// Multiplies delta in place by act'(z).
void apply_derivative(Activation act, const DenseMatrix<double>& z, DenseMatrix<double>& delta) {
  if (act == Activation::relu) {
    delta.array() *= (z.array() > 0.0).cast<double>();
  } else {
    delta.array() *= 1.0 - z.array().tanh().square();
  }
}

ForwardCache run_forward(const Mlp& net, const DenseMatrix<double>& x) {
  ForwardCache c;
  const Index layers = net.num_layers();
  c.post.reserve(layers);
  c.pre.reserve(layers);
  c.post.push_back(x);
  for (Index l = 0; l < layers; ++l) {
    DenseMatrix<double> z = c.post.back() * net.weight(l).transpose();
    z.rowwise() += net.bias(l).transpose();
    c.pre.push_back(std::move(z));
    if (l + 1 < layers) {
      DenseMatrix<double> a;
      activate(net.activation(), c.pre.back(), a);
      c.post.push_back(std::move(a));
    }
  }
  return c;
}

// Softmax cross-entropy on logits: per-row losses and softmax - onehot.
void softmax_xent(const DenseMatrix<double>& z, std::span<const int> y,
                  DenseMatrix<double>& p, DenseVector<double>& losses) {
  p.resize(z.rows(), z.cols());
  losses.resize(z.rows());
  for (Index i = 0; i < z.rows(); ++i) {
    const double zmax = z.row(i).maxCoeff();
    const auto shifted = (z.row(i).array() - zmax).eval();
    const double sum = shifted.exp().sum();
    const double lse = std::log(sum);
    p.row(i) = (shifted - lse).exp().matrix();
    losses(i) = lse - shifted(y[i]);
    p(i, y[i]) -= 1.0;
  }
}

// Backpropagates coefficient-weighted output gradients: the result is
// Σ_i coef_i ∇ℓ_i over the rows of the cache.
GradientVector backprop(const Mlp& net, const ForwardCache& cache, const DenseMatrix<double>& p,
                        const DenseVector<double>& coef) {
  GradientVector g;
  g.layout = net.layout();
  g.values = DenseVector<double>::Zero(net.parameter_count());
  DenseMatrix<double> delta = coef.asDiagonal() * p;
  for (Index l = net.num_layers() - 1; l >= 0; --l) {
    const LayerSlice& s = g.layout[l];
    Eigen::Map<RowMajorMatrix> gw(g.values.data() + s.weight_offset, s.out, s.in);
    gw.noalias() = delta.transpose() * cache.post[l];
    g.values.segment(s.bias_offset, s.out) = delta.colwise().sum().transpose();
    if (l > 0) {
      DenseMatrix<double> next = delta * net.weight(l);
      apply_derivative(net.activation(), cache.pre[l - 1], next);
      delta.swap(next);
    }
  }
  return g;
}

GradientVector gradient_with_coefficients(const Mlp& net, const DenseMatrix<double>& x,
                                          std::span<const int> y, const DenseVector<double>& coef) {
  const ForwardCache cache = run_forward(net, x);
  DenseMatrix<double> p;
  DenseVector<double> losses;
  softmax_xent(cache.pre.back(), y, p, losses);
  return backprop(net, cache, p, coef);
}

}  // namespace

BatchTape<double> forward_tape(const Mlp& net, const DenseMatrix<double>& x,
                               std::span<const int> y) {
  check_batch(net, x, y);
  ForwardCache cache = run_forward(net, x);
  BatchTape<double> tape;
  softmax_xent(cache.pre.back(), y, tape.P, tape.losses);
  tape.H = std::move(cache.post.back());
  return tape;
}

DenseMatrix<double> logits(const Mlp& net, const DenseMatrix<double>& x) {
  if (x.cols() != net.input_dim()) throw DimensionMismatch("logits: input width mismatch");
  return run_forward(net, x).pre.back();
}

double mean_loss(const Mlp& net, const DenseMatrix<double>& x, std::span<const int> y) {
  return forward_tape(net, x, y).losses.mean();
}

double accuracy(const Mlp& net, const DenseMatrix<double>& x, std::span<const int> y) {
  check_batch(net, x, y);
  if (x.rows() == 0) return 0.0;
  const DenseMatrix<double> z = logits(net, x);
  Index correct = 0;
  for (Index i = 0; i < z.rows(); ++i) {
    Index arg;
    z.row(i).maxCoeff(&arg);
    if (arg == y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(z.rows());
}

GradientVector weighted_backward(const Mlp& net, const DenseMatrix<double>& x,
                                 std::span<const int> y, const Selection& sel) {
  check_batch(net, x, y);
  const Index n = sel.size();
  if (n == 0 || sel.weights.size() != n) {
    throw DimensionMismatch("weighted_backward: selection is empty or misaligned");
  }
  DenseMatrix<double> xs(n, x.cols());
  std::vector<int> ys(n);
  DenseVector<double> coef(n);
  for (Index a = 0; a < n; ++a) {
    const Index i = sel.indices[a];
    if (i < 0 || i >= x.rows()) {
      throw DimensionMismatch("weighted_backward: index " + std::to_string(i) + " out of range");
    }
    xs.row(a) = x.row(i);
    ys[a] = y[i];
    coef(a) = sel.weights(a) / static_cast<double>(n);
  }
  return gradient_with_coefficients(net, xs, ys, coef);
}

GradientVector mean_gradient(const Mlp& net, const DenseMatrix<double>& x,
                             std::span<const int> y) {
  check_batch(net, x, y);
  if (x.rows() == 0) throw DimensionMismatch("mean_gradient: empty batch");
  const DenseVector<double> coef =
      DenseVector<double>::Constant(x.rows(), 1.0 / static_cast<double>(x.rows()));
  return gradient_with_coefficients(net, x, y, coef);
}

std::vector<GradientVector> per_example_grads(const Mlp& net, const DenseMatrix<double>& x,
                                              std::span<const int> y) {
  check_batch(net, x, y);
  std::vector<GradientVector> out;
  out.reserve(x.rows());
  const DenseVector<double> one = DenseVector<double>::Ones(1);
  for (Index i = 0; i < x.rows(); ++i) {
    const DenseMatrix<double> row = x.row(i);
    out.push_back(gradient_with_coefficients(net, row, y.subspan(i, 1), one));
  }
  return out;
}

double last_layer_grad_check(const Mlp& net, const DenseMatrix<double>& x,
                             std::span<const int> y) {
  const BatchTape<double> tape = forward_tape(net, x, y);
  const DenseMatrix<double> proxy = last_layer_gradients(tape);
  const std::vector<GradientVector> full = per_example_grads(net, x, y);
  double worst = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    const DenseVector<double> a = proxy.row(i).transpose();
    const DenseVector<double> b = full[i].last_layer();
    const double scale = std::max(a.norm(), b.norm());
    if (scale == 0.0) continue;
    worst = std::max(worst, (a - b).norm() / scale);
  }
  return worst;
}

}  // namespace sbp
