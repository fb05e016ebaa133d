#pragma once

// Multilayer perceptron classifier with softmax cross-entropy. The final
// layer is linear; hidden layers apply ReLU or tanh.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sbp/gram.hpp"
#include "sbp/omp.hpp"
#include "sbp/selection.hpp"

namespace sbp {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { relu, tanh };

std::string_view to_string(Activation act);
std::optional<Activation> parse_activation(std::string_view name);

struct ModelSpec {
  Index input_dim = 2;
  std::vector<Index> hidden{32};
  Index num_classes = 3;
  Activation activation = Activation::relu;
  std::uint64_t init_seed = 0;

  bool operator==(const ModelSpec&) const = default;
};

/// Position of one layer inside the flat parameter vector: the out×in
/// weight block in row-major order, then the bias.
struct LayerSlice {
  Index in = 0;
  Index out = 0;
  Index weight_offset = 0;
  Index bias_offset = 0;
};

using ParamLayout = std::vector<LayerSlice>;

ParamLayout make_layout(std::span<const Index> widths);

/// Flat gradient over every parameter, laid out like Mlp::parameters().
struct GradientVector {
  DenseVector<double> values;
  ParamLayout layout;

  /// Last-layer weight block followed by its bias, C·D + C entries.
  auto last_layer() const {
    const LayerSlice& s = layout.back();
    return values.segment(s.weight_offset, s.out * s.in + s.out);
  }
};

class Mlp {
 public:
  /// widths = {input, hidden..., classes}; parameters start at zero.
  Mlp(std::vector<Index> widths, Activation act);

  /// Weights and biases uniform in ±1/sqrt(fan_in) (the usual default for
  /// dense layers: Kaiming-uniform with negative slope sqrt(5)).
  static Mlp initialized(const ModelSpec& spec, Rng& rng);

  const std::vector<Index>& widths() const { return widths_; }
  const ParamLayout& layout() const { return layout_; }
  Activation activation() const { return activation_; }
  Index num_layers() const { return static_cast<Index>(layout_.size()); }
  Index input_dim() const { return widths_.front(); }
  Index num_classes() const { return widths_.back(); }
  Index parameter_count() const { return params_.size(); }

  Eigen::Map<const RowMajorMatrix> weight(Index layer) const;
  Eigen::Map<RowMajorMatrix> weight(Index layer);
  Eigen::Map<const DenseVector<double>> bias(Index layer) const;
  Eigen::Map<DenseVector<double>> bias(Index layer);

  const DenseVector<double>& parameters() const { return params_; }
  DenseVector<double>& parameters() { return params_; }

 private:
  std::vector<Index> widths_;
  Activation activation_;
  ParamLayout layout_;
  DenseVector<double> params_;
};

/// Last-layer inputs H, output gradients P = softmax(z) - onehot(y) and
/// per-example losses for the batch (rows of x).
BatchTape<double> forward_tape(const Mlp& net, const DenseMatrix<double>& x,
                               std::span<const int> y);

DenseMatrix<double> logits(const Mlp& net, const DenseMatrix<double>& x);

/// Mean cross-entropy over the rows of x.
double mean_loss(const Mlp& net, const DenseMatrix<double>& x, std::span<const int> y);

/// Fraction of rows whose argmax logit equals the label.
double accuracy(const Mlp& net, const DenseMatrix<double>& x, std::span<const int> y);

/// (1/|I|) Σ_{i∈I} γ_i ∇ℓ_i. Recomputes the forward pass on the subset only.
GradientVector weighted_backward(const Mlp& net, const DenseMatrix<double>& x,
                                 std::span<const int> y, const Selection& sel);

/// Plain minibatch mean gradient over every row of x.
GradientVector mean_gradient(const Mlp& net, const DenseMatrix<double>& x,
                             std::span<const int> y);

std::vector<GradientVector> per_example_grads(const Mlp& net, const DenseMatrix<double>& x,
                                              std::span<const int> y);

/// Largest relative disagreement between (p_i h_iᵀ, p_i) from the tape and the
/// last-layer block of the backpropagated per-example gradient.
double last_layer_grad_check(const Mlp& net, const DenseMatrix<double>& x,
                             std::span<const int> y);

}  // namespace sbp
