#pragma once

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// Every tensor is stored as a rows x cols matrix. The logical shape is kept
// alongside: a B x C x H x W image batch is a B x (C*H*W) matrix whose shape
// is {B, C, H, W}. Operations build a DAG of shared nodes; backward() orders
// the DAG topologically and replays it in reverse.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "jif/errors.hpp"

namespace jif {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
using Shape = std::vector<Index>;

std::string to_string(const Shape& shape);
Index element_count(const Shape& shape);

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(const Matrix& grad_out, std::span<const NodePtr> inputs)>;

struct Node {
  Matrix value;
  Matrix grad;  // empty until first accumulation
  Shape shape;
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::string op;
  std::vector<NodePtr> inputs;
  BackwardFn backward;

  void accumulate(const Matrix& g);
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  // Non-differentiable input. An empty shape defaults to {rows, cols}.
  static Tensor constant(Matrix values, Shape shape = {});
  // Differentiable leaf.
  static Tensor parameter(Matrix values, Shape shape = {});

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }
  std::uint64_t id() const { return node_->id; }
  bool requires_grad() const { return node_->requires_grad; }
  const std::string& op() const { return node_->op; }

  const Matrix& value() const { return node_->value; }
  // Direct write access, intended for optimizers and initializers on leaves.
  Matrix& mutable_value() { return node_->value; }
  double item() const;

  bool has_grad() const { return node_->grad.size() != 0; }
  // Zero matrix when nothing has been accumulated yet.
  Matrix grad() const;
  void zero_grad() { node_->grad.resize(0, 0); }

  const detail::NodePtr& node() const { return node_; }
  static Tensor from_node(detail::NodePtr node);

 private:
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}
  detail::NodePtr node_;
};

// Builds an op output. Inputs that do not require grad are not retained.
Tensor make_op(std::string op, Matrix value, Shape shape, std::initializer_list<Tensor> inputs,
               detail::BackwardFn backward);

// Topologically ordered record of everything reachable from a root.
class Graph {
 public:
  struct Entry {
    std::string op;
    std::vector<std::uint64_t> inputs;
    std::uint64_t output;
  };

  static Graph trace(const Tensor& root);

  std::span<const Entry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  // Seeds d(root)/d(root) = 1 and propagates in reverse record order.
  void backward();

 private:
  std::vector<detail::NodePtr> order_;
  std::vector<Entry> entries_;
};

// Accumulates gradients into every requires-grad ancestor of a scalar loss.
void backward(const Tensor& loss);

// ---- differentiable operations ----

// x (B x n) * W (n x m) + b (1 x m).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sum(const Tensor& a);
Tensor relu(const Tensor& a);
// Same values, new logical shape; storage becomes shape[0] x rest (row-major).
Tensor reshape(const Tensor& a, Shape shape);

// Row-wise softmax; each row is one probability vector.
Tensor softmax(const Tensor& x);
// Row-wise softmax over contiguous column blocks of width `block`.
Tensor softmax_blocks(const Tensor& x, Index block);

// Column concatenation [a, b] of two matrices with equal row counts.
Tensor concat(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& x, Index start, Index width);
// Equal contiguous thirds along columns, in (query, key, value) order.
std::array<Tensor, 3> split_thirds(const Tensor& x);

enum class Mode { Train, Eval };

struct BatchNormState {
  RowVector running_mean;
  RowVector running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormState(Index features = 0);
};

// Normalizes each feature (rank-2 input) or each channel over B, H, W
// (rank-4 input). Train mode differentiates through the batch statistics.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                  Mode mode);

// Same-padded stride-1 convolution. kernel is out x (in*k*k), bias 1 x out.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, Index kernel_size);
// 2x2 max pooling, stride 2; H and W must be even.
Tensor max_pool2(const Tensor& x);
// B x C x H x W -> B x C.
Tensor global_avg_pool(const Tensor& x);

// -(1/B) * sum_b w[y_b] * log softmax(logits)[b, y_b], via log-sum-exp.
Tensor weighted_cross_entropy(const Tensor& logits, std::span<const int> labels,
                              std::span<const double> class_weights);

// ---- finite-difference verification ----

struct GradCheckReport {
  double max_rel_error = 0.0;
  Index worst_index = -1;
  bool pass = false;
};

// Compares the analytic gradient of a scalar function with central
// differences (f(x + h e_i) - f(x - h e_i)) / 2h at every coordinate of x.
// Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Matrix& x,
                           const Shape& shape, double step = 1e-5, double tol = 1e-4,
                           double floor = 1e-8);

// Floor for whole-module checks. Biases feeding a train-mode batch norm have an
// exactly zero gradient, where central differences only see ~1e-10 of rounding.
inline constexpr double kModuleGradFloor = 1e-5;

// Same, but perturbs a set of existing leaves in place (e.g. all parameters of
// a module). Restores every value before returning.
GradCheckReport grad_check_leaves(const std::function<Tensor()>& f, std::span<Tensor> leaves,
                                  double step = 1e-5, double tol = 1e-4,
                                  double floor = kModuleGradFloor);

}  // namespace jif
