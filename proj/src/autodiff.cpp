#include "jif/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace jif {

namespace {

std::atomic<std::uint64_t> next_node_id{1};

detail::NodePtr new_node(std::string op, Matrix value, Shape shape, bool requires_grad) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  node->op = std::move(op);
  node->id = next_node_id.fetch_add(1, std::memory_order_relaxed);
  return node;
}

void require_same_dims(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shapes " + to_string(a.shape()) + " and " +
                         to_string(b.shape()) + " differ");
  }
}

void require_finite(const Matrix& m, const char* op) {
  if (!m.allFinite()) throw NumericError(std::string(op) + ": non-finite input");
}

struct ImageDims {
  Index batch, channels, height, width;
  Index plane() const { return height * width; }
};

ImageDims image_dims(const Tensor& x, const char* op) {
  const Shape& s = x.shape();
  if (s.size() != 4) {
    throw DimensionError(std::string(op) + ": expected B x C x H x W input, got " + to_string(s));
  }
  return {s[0], s[1], s[2], s[3]};
}

}  // namespace

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? ", " : "") << shape[i];
  out << ']';
  return out.str();
}

Index element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

void detail::Node::accumulate(const Matrix& g) {
  if (!requires_grad) return;
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Tensor Tensor::constant(Matrix values, Shape shape) {
  if (shape.empty()) shape = {values.rows(), values.cols()};
  if (element_count(shape) != values.size()) {
    throw DimensionError("shape " + to_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  return Tensor(new_node("constant", std::move(values), std::move(shape), false));
}

Tensor Tensor::parameter(Matrix values, Shape shape) {
  Tensor t = constant(std::move(values), std::move(shape));
  t.node_->requires_grad = true;
  t.node_->op = "leaf";
  return t;
}

Tensor Tensor::from_node(detail::NodePtr node) { return Tensor(std::move(node)); }

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + to_string(shape()));
  return node_->value(0, 0);
}

Matrix Tensor::grad() const {
  if (!node_->requires_grad) throw ContractError("grad() on a tensor that does not require grad");
  if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
  return node_->grad;
}

Tensor make_op(std::string op, Matrix value, Shape shape, std::initializer_list<Tensor> inputs,
               detail::BackwardFn backward) {
  const bool needs_grad =
      std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  auto node = new_node(std::move(op), std::move(value), std::move(shape), needs_grad);
  if (needs_grad) {
    node->inputs.reserve(inputs.size());
    for (const Tensor& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor::from_node(std::move(node));
}

// ---- graph ----

Graph Graph::trace(const Tensor& root) {
  Graph graph;
  if (!root.defined()) return graph;
  std::unordered_set<const detail::Node*> visited;
  // Iterative post-order DFS; inputs are emitted before their consumers.
  std::vector<std::pair<detail::NodePtr, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      const detail::NodePtr& child = node->inputs[next++];
      if (child->requires_grad && visited.insert(child.get()).second) stack.emplace_back(child, 0);
      continue;
    }
    graph.order_.push_back(node);
    stack.pop_back();
  }
  graph.entries_.reserve(graph.order_.size());
  for (const auto& node : graph.order_) {
    Entry e{node->op, {}, node->id};
    for (const auto& in : node->inputs) e.inputs.push_back(in->id);
    graph.entries_.push_back(std::move(e));
  }
  return graph;
}

void Graph::backward() {
  if (order_.empty()) return;
  const detail::NodePtr& root = order_.back();
  root->accumulate(Matrix::Ones(1, 1));
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    detail::Node& node = **it;
    if (!node.backward || node.grad.size() == 0) continue;
    node.backward(node.grad, node.inputs);
  }
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) return;
  Graph::trace(loss).backward();
}

// ---- elementary ops ----

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.cols() != weight.rows() || bias.size() != weight.cols()) {
    throw DimensionError("linear: input " + to_string(x.shape()) + " with weight " +
                         to_string(weight.shape()) + " and bias " + to_string(bias.shape()));
  }
  Matrix out = x.value() * weight.value();
  out.rowwise() += Eigen::Map<const RowVector>(bias.value().data(), bias.size());
  return make_op("linear", std::move(out), {x.rows(), weight.cols()}, {x, weight, bias},
                 [](const Matrix& g, std::span<const detail::NodePtr> in) {
                   const Matrix& xv = in[0]->value;
                   const Matrix& wv = in[1]->value;
                   if (in[0]->requires_grad) in[0]->accumulate(g * wv.transpose());
                   if (in[1]->requires_grad) in[1]->accumulate(xv.transpose() * g);
                   if (in[2]->requires_grad) {
                     Matrix db = g.colwise().sum();
                     in[2]->accumulate(db.reshaped<Eigen::RowMajor>(in[2]->value.rows(),
                                                                    in[2]->value.cols()));
                   }
                 });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "add");
  return make_op("add", a.value() + b.value(), a.shape(), {a, b},
                 [](const Matrix& g, std::span<const detail::NodePtr> in) {
                   in[0]->accumulate(g);
                   in[1]->accumulate(g);
                 });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "mul");
  return make_op("mul", a.value().cwiseProduct(b.value()), a.shape(), {a, b},
                 [](const Matrix& g, std::span<const detail::NodePtr> in) {
                   if (in[0]->requires_grad) in[0]->accumulate(g.cwiseProduct(in[1]->value));
                   if (in[1]->requires_grad) in[1]->accumulate(g.cwiseProduct(in[0]->value));
                 });
}

Tensor scale(const Tensor& a, double factor) {
  return make_op("scale", a.value() * factor, a.shape(), {a},
                 [factor](const Matrix& g, std::span<const detail::NodePtr> in) {
                   in[0]->accumulate(g * factor);
                 });
}

Tensor sum(const Tensor& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_op("sum", std::move(out), {}, {a},
                 [](const Matrix& g, std::span<const detail::NodePtr> in) {
                   in[0]->accumulate(
                       Matrix::Constant(in[0]->value.rows(), in[0]->value.cols(), g(0, 0)));
                 });
}

Tensor relu(const Tensor& a) {
  return make_op("relu", a.value().cwiseMax(0.0), a.shape(), {a},
                 [](const Matrix& g, std::span<const detail::NodePtr> in) {
                   in[0]->accumulate(
                       (in[0]->value.array() > 0.0).select(g, Matrix::Zero(g.rows(), g.cols())));
                 });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (element_count(shape) != a.size()) {
    throw DimensionError("reshape: " + to_string(a.shape()) + " to " + to_string(shape));
  }
  const Index rows = shape.empty() ? 1 : shape[0];
  const Index cols = rows == 0 ? 0 : a.size() / rows;
  Matrix out = a.value().reshaped<Eigen::RowMajor>(rows, cols);
  return make_op("reshape", std::move(out), std::move(shape), {a},
                 [](const Matrix& g, std::span<const detail::NodePtr> in) {
                   in[0]->accumulate(
                       g.reshaped<Eigen::RowMajor>(in[0]->value.rows(), in[0]->value.cols()));
                 });
}

Tensor softmax(const Tensor& x) { return softmax_blocks(x, x.cols()); }

Tensor softmax_blocks(const Tensor& x, Index block) {
  if (block <= 0 || x.cols() % block != 0) {
    throw DimensionError("softmax: width " + std::to_string(x.cols()) +
                         " is not divisible into blocks of " + std::to_string(block));
  }
  require_finite(x.value(), "softmax");
  const Index blocks = x.cols() / block;
  Matrix out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index k = 0; k < blocks; ++k) {
      auto src = x.value().row(r).segment(k * block, block);
      auto dst = out.row(r).segment(k * block, block);
      dst = (src.array() - src.maxCoeff()).exp();
      dst /= dst.sum();
    }
  }
  Matrix saved = out;
  return make_op("softmax", std::move(out), x.shape(), {x},
                 [y = std::move(saved), block, blocks](const Matrix& g,
                                                       std::span<const detail::NodePtr> in) {
                   Matrix dx(g.rows(), g.cols());
                   for (Index r = 0; r < g.rows(); ++r) {
                     for (Index k = 0; k < blocks; ++k) {
                       auto yb = y.row(r).segment(k * block, block);
                       auto gb = g.row(r).segment(k * block, block);
                       const double dot = yb.dot(gb);
                       dx.row(r).segment(k * block, block) =
                           yb.cwiseProduct((gb.array() - dot).matrix());
                     }
                   }
                   in[0]->accumulate(dx);
                 });
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("concat: row counts differ, " + to_string(a.shape()) + " and " +
                         to_string(b.shape()));
  }
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Index split = a.cols();
  return make_op("concat", std::move(out), {a.rows(), a.cols() + b.cols()}, {a, b},
                 [split](const Matrix& g, std::span<const detail::NodePtr> in) {
                   if (in[0]->requires_grad) in[0]->accumulate(g.leftCols(split));
                   if (in[1]->requires_grad) in[1]->accumulate(g.rightCols(g.cols() - split));
                 });
}

Tensor slice_cols(const Tensor& x, Index start, Index width) {
  if (start < 0 || width < 0 || start + width > x.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", " +
                         std::to_string(start + width) + ") outside " + to_string(x.shape()));
  }
  return make_op("slice", x.value().middleCols(start, width), {x.rows(), width}, {x},
                 [start, width](const Matrix& g, std::span<const detail::NodePtr> in) {
                   Matrix dx = Matrix::Zero(in[0]->value.rows(), in[0]->value.cols());
                   dx.middleCols(start, width) = g;
                   in[0]->accumulate(dx);
                 });
}

std::array<Tensor, 3> split_thirds(const Tensor& x) {
  if (x.cols() % 3 != 0) {
    throw DimensionError("split_thirds: width " + std::to_string(x.cols()) +
                         " is not divisible by 3");
  }
  const Index d = x.cols() / 3;
  return {slice_cols(x, 0, d), slice_cols(x, d, d), slice_cols(x, 2 * d, d)};
}

// ---- batch normalization ----

BatchNormState::BatchNormState(Index features)
    : running_mean(RowVector::Zero(features)), running_var(RowVector::Ones(features)) {}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                  Mode mode) {
  const bool spatial = x.shape().size() == 4;
  const Index features = spatial ? x.shape()[1] : x.cols();
  const Index plane = spatial ? x.shape()[2] * x.shape()[3] : 1;
  if (gamma.size() != features || beta.size() != features ||
      state.running_mean.size() != features) {
    throw DimensionError("batch_norm: input " + to_string(x.shape()) + " with gamma " +
                         to_string(gamma.shape()) + " and " +
                         std::to_string(state.running_mean.size()) + " running statistics");
  }
  const Index batch = x.rows();
  const double count = static_cast<double>(batch * plane);
  const Matrix& xv = x.value();
  const double* gam = gamma.value().data();
  const double* bet = beta.value().data();

  RowVector mean(features), invstd(features);
  if (mode == Mode::Train) {
    mean.setZero();
    RowVector var = RowVector::Zero(features);
    for (Index r = 0; r < batch; ++r)
      for (Index f = 0; f < features; ++f) mean[f] += xv.row(r).segment(f * plane, plane).sum();
    mean /= count;
    for (Index r = 0; r < batch; ++r)
      for (Index f = 0; f < features; ++f)
        var[f] += (xv.row(r).segment(f * plane, plane).array() - mean[f]).square().sum();
    var /= count;
    invstd = (var.array() + state.eps).rsqrt();
    const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
    state.running_mean = (1.0 - state.momentum) * state.running_mean + state.momentum * mean;
    state.running_var =
        (1.0 - state.momentum) * state.running_var + (state.momentum * unbias) * var;
  } else {
    mean = state.running_mean;
    invstd = (state.running_var.array() + state.eps).rsqrt();
  }

  Matrix xhat(batch, x.cols());
  Matrix out(batch, x.cols());
  for (Index r = 0; r < batch; ++r) {
    for (Index f = 0; f < features; ++f) {
      auto xh = xhat.row(r).segment(f * plane, plane);
      xh = (xv.row(r).segment(f * plane, plane).array() - mean[f]) * invstd[f];
      out.row(r).segment(f * plane, plane) = (xh.array() * gam[f] + bet[f]).matrix();
    }
  }

  const bool train = mode == Mode::Train;
  return make_op(
      train ? "batch_norm_train" : "batch_norm_eval", std::move(out), x.shape(), {x, gamma, beta},
      [xhat = std::move(xhat), invstd, features, plane, count, train](
          const Matrix& g, std::span<const detail::NodePtr> in) {
        const Index batch = g.rows();
        RowVector sum_g = RowVector::Zero(features);
        RowVector sum_gx = RowVector::Zero(features);
        for (Index r = 0; r < batch; ++r) {
          for (Index f = 0; f < features; ++f) {
            auto gs = g.row(r).segment(f * plane, plane);
            sum_g[f] += gs.sum();
            sum_gx[f] += gs.dot(xhat.row(r).segment(f * plane, plane));
          }
        }
        if (in[1]->requires_grad) {
          in[1]->accumulate(sum_gx.reshaped<Eigen::RowMajor>(in[1]->value.rows(),
                                                             in[1]->value.cols()));
        }
        if (in[2]->requires_grad) {
          in[2]->accumulate(sum_g.reshaped<Eigen::RowMajor>(in[2]->value.rows(),
                                                            in[2]->value.cols()));
        }
        if (!in[0]->requires_grad) return;
        const double* gam = in[1]->value.data();
        Matrix dx(batch, g.cols());
        for (Index r = 0; r < batch; ++r) {
          for (Index f = 0; f < features; ++f) {
            auto gs = g.row(r).segment(f * plane, plane).array();
            auto d = dx.row(r).segment(f * plane, plane).array();
            if (train) {
              auto xh = xhat.row(r).segment(f * plane, plane).array();
              d = (gam[f] * invstd[f] / count) * (count * gs - sum_g[f] - xh * sum_gx[f]);
            } else {
              d = gs * (gam[f] * invstd[f]);
            }
          }
        }
        in[0]->accumulate(dx);
      });
}

// ---- convolution and pooling ----

namespace {

// Column matrix (C*k*k) x (H*W) of one sample's zero-padded patches.
Matrix im2col(const double* image, const ImageDims& d, Index k) {
  const Index pad = k / 2;
  Matrix cols = Matrix::Zero(d.channels * k * k, d.plane());
  for (Index c = 0; c < d.channels; ++c) {
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const Index row = (c * k + ky) * k + kx;
        for (Index y = 0; y < d.height; ++y) {
          const Index sy = y + ky - pad;
          if (sy < 0 || sy >= d.height) continue;
          for (Index x = 0; x < d.width; ++x) {
            const Index sx = x + kx - pad;
            if (sx < 0 || sx >= d.width) continue;
            cols(row, y * d.width + x) = image[(c * d.height + sy) * d.width + sx];
          }
        }
      }
    }
  }
  return cols;
}

void col2im_add(const Matrix& cols, const ImageDims& d, Index k, double* image) {
  const Index pad = k / 2;
  for (Index c = 0; c < d.channels; ++c) {
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const Index row = (c * k + ky) * k + kx;
        for (Index y = 0; y < d.height; ++y) {
          const Index sy = y + ky - pad;
          if (sy < 0 || sy >= d.height) continue;
          for (Index x = 0; x < d.width; ++x) {
            const Index sx = x + kx - pad;
            if (sx < 0 || sx >= d.width) continue;
            image[(c * d.height + sy) * d.width + sx] += cols(row, y * d.width + x);
          }
        }
      }
    }
  }
}

using ConstMatrixMap = Eigen::Map<const Matrix>;
using MatrixMap = Eigen::Map<Matrix>;

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, Index kernel_size) {
  const ImageDims d = image_dims(x, "conv2d");
  const Index out_channels = kernel.rows();
  if (kernel_size % 2 == 0 || kernel.cols() != d.channels * kernel_size * kernel_size ||
      bias.size() != out_channels) {
    throw DimensionError("conv2d: input " + to_string(x.shape()) + " with kernel " +
                         to_string(kernel.shape()) + " and bias " + to_string(bias.shape()));
  }
  Matrix out(d.batch, out_channels * d.plane());
  const Eigen::Map<const Eigen::VectorXd> bias_col(bias.value().data(), out_channels);
  for (Index b = 0; b < d.batch; ++b) {
    const Matrix cols = im2col(x.value().row(b).data(), d, kernel_size);
    MatrixMap ob(out.row(b).data(), out_channels, d.plane());
    ob.noalias() = kernel.value() * cols;
    ob.colwise() += bias_col;
  }
  return make_op(
      "conv2d", std::move(out), {d.batch, out_channels, d.height, d.width}, {x, kernel, bias},
      [d, kernel_size, out_channels](const Matrix& g, std::span<const detail::NodePtr> in) {
        const Matrix& xv = in[0]->value;
        const Matrix& kv = in[1]->value;
        Matrix dk = Matrix::Zero(kv.rows(), kv.cols());
        RowVector dbias = RowVector::Zero(out_channels);
        Matrix dx;
        if (in[0]->requires_grad) dx = Matrix::Zero(xv.rows(), xv.cols());
        for (Index b = 0; b < d.batch; ++b) {
          ConstMatrixMap gb(g.row(b).data(), out_channels, d.plane());
          if (in[1]->requires_grad) {
            const Matrix cols = im2col(xv.row(b).data(), d, kernel_size);
            dk.noalias() += gb * cols.transpose();
          }
          dbias += gb.rowwise().sum().transpose();
          if (in[0]->requires_grad) {
            const Matrix dcols = kv.transpose() * gb;
            col2im_add(dcols, d, kernel_size, dx.row(b).data());
          }
        }
        in[1]->accumulate(dk);
        in[2]->accumulate(
            dbias.reshaped<Eigen::RowMajor>(in[2]->value.rows(), in[2]->value.cols()));
        if (in[0]->requires_grad) in[0]->accumulate(dx);
      });
}

Tensor max_pool2(const Tensor& x) {
  const ImageDims d = image_dims(x, "max_pool2");
  if (d.height % 2 != 0 || d.width % 2 != 0) {
    throw DimensionError("max_pool2: odd spatial size in " + to_string(x.shape()));
  }
  const Index oh = d.height / 2, ow = d.width / 2;
  Matrix out(d.batch, d.channels * oh * ow);
  std::vector<Index> argmax(static_cast<std::size_t>(out.size()));
  const Matrix& xv = x.value();
  std::size_t slot = 0;
  for (Index b = 0; b < d.batch; ++b) {
    for (Index c = 0; c < d.channels; ++c) {
      for (Index y = 0; y < oh; ++y) {
        for (Index xo = 0; xo < ow; ++xo, ++slot) {
          Index best = (c * d.height + 2 * y) * d.width + 2 * xo;
          for (Index dy = 0; dy < 2; ++dy) {
            for (Index dx = 0; dx < 2; ++dx) {
              const Index idx = (c * d.height + 2 * y + dy) * d.width + 2 * xo + dx;
              if (xv(b, idx) > xv(b, best)) best = idx;
            }
          }
          argmax[slot] = best;
          out(b, (c * oh + y) * ow + xo) = xv(b, best);
        }
      }
    }
  }
  return make_op("max_pool2", std::move(out), {d.batch, d.channels, oh, ow}, {x},
                 [argmax = std::move(argmax)](const Matrix& g,
                                              std::span<const detail::NodePtr> in) {
                   Matrix dx = Matrix::Zero(in[0]->value.rows(), in[0]->value.cols());
                   const Index per_row = g.cols();
                   for (Index b = 0; b < g.rows(); ++b)
                     for (Index j = 0; j < per_row; ++j)
                       dx(b, argmax[static_cast<std::size_t>(b * per_row + j)]) += g(b, j);
                   in[0]->accumulate(dx);
                 });
}

Tensor global_avg_pool(const Tensor& x) {
  const ImageDims d = image_dims(x, "global_avg_pool");
  Matrix out(d.batch, d.channels);
  for (Index b = 0; b < d.batch; ++b)
    for (Index c = 0; c < d.channels; ++c)
      out(b, c) = x.value().row(b).segment(c * d.plane(), d.plane()).mean();
  return make_op("global_avg_pool", std::move(out), {d.batch, d.channels}, {x},
                 [d](const Matrix& g, std::span<const detail::NodePtr> in) {
                   Matrix dx(d.batch, d.channels * d.plane());
                   const double inv = 1.0 / static_cast<double>(d.plane());
                   for (Index b = 0; b < d.batch; ++b)
                     for (Index c = 0; c < d.channels; ++c)
                       dx.row(b).segment(c * d.plane(), d.plane()).setConstant(g(b, c) * inv);
                   in[0]->accumulate(dx);
                 });
}

// ---- loss ----

Tensor weighted_cross_entropy(const Tensor& logits, std::span<const int> labels,
                              std::span<const double> class_weights) {
  const Index batch = logits.rows();
  const Index classes = logits.cols();
  if (static_cast<Index>(labels.size()) != batch ||
      static_cast<Index>(class_weights.size()) != classes) {
    throw DimensionError("weighted_cross_entropy: logits " + to_string(logits.shape()) + " with " +
                         std::to_string(labels.size()) + " labels and " +
                         std::to_string(class_weights.size()) + " class weights");
  }
  for (double w : class_weights) {
    if (!(w > 0.0)) throw ConfigError("class weights must be strictly positive");
  }
  require_finite(logits.value(), "weighted_cross_entropy");
  Matrix probs(batch, classes);
  std::vector<double> row_weight(static_cast<std::size_t>(batch));
  double loss = 0.0;
  for (Index r = 0; r < batch; ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= classes) throw DataError("label " + std::to_string(y) + " out of range");
    auto z = logits.value().row(r);
    const double m = z.maxCoeff();
    probs.row(r) = (z.array() - m).exp();
    const double total = probs.row(r).sum();
    probs.row(r) /= total;
    const double lse = m + std::log(total);
    const double w = class_weights[static_cast<std::size_t>(y)];
    row_weight[static_cast<std::size_t>(r)] = w;
    loss -= w * (z(y) - lse);
  }
  loss /= static_cast<double>(batch);
  Matrix out(1, 1);
  out(0, 0) = loss;
  std::vector<int> saved_labels(labels.begin(), labels.end());
  return make_op("weighted_cross_entropy", std::move(out), {}, {logits},
                 [probs = std::move(probs), row_weight = std::move(row_weight),
                  saved_labels = std::move(saved_labels)](const Matrix& g,
                                                          std::span<const detail::NodePtr> in) {
                   const Index batch = probs.rows();
                   Matrix dz = probs;
                   for (Index r = 0; r < batch; ++r) {
                     dz(r, saved_labels[static_cast<std::size_t>(r)]) -= 1.0;
                     dz.row(r) *= row_weight[static_cast<std::size_t>(r)];
                   }
                   in[0]->accumulate(dz * (g(0, 0) / static_cast<double>(batch)));
                 });
}

// ---- finite differences ----

namespace {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

double checked_value(const Tensor& t) {
  const double v = t.item();
  if (!std::isfinite(v)) throw NumericError("grad_check: function value is not finite");
  return v;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Matrix& x,
                           const Shape& shape, double step, double tol, double floor) {
  if (!(step > 0.0) || !(floor > 0.0)) throw ConfigError("grad_check: step and floor must be positive");
  Tensor leaf = Tensor::parameter(x, shape);
  Tensor y = f(leaf);
  checked_value(y);
  backward(y);
  const Matrix analytic = leaf.grad();

  GradCheckReport report;
  Matrix probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double original = probe.data()[i];
    probe.data()[i] = original + step;
    const double up = checked_value(f(Tensor::constant(probe, shape)));
    probe.data()[i] = original - step;
    const double down = checked_value(f(Tensor::constant(probe, shape)));
    probe.data()[i] = original;
    const double err = relative_error(analytic.data()[i], (up - down) / (2.0 * step), floor);
    if (err > report.max_rel_error || report.worst_index < 0) {
      report.max_rel_error = std::max(report.max_rel_error, err);
      report.worst_index = i;
    }
  }
  report.pass = report.max_rel_error < tol;
  return report;
}

GradCheckReport grad_check_leaves(const std::function<Tensor()>& f, std::span<Tensor> leaves,
                                  double step, double tol, double floor) {
  if (!(step > 0.0) || !(floor > 0.0)) throw ConfigError("grad_check: step and floor must be positive");
  for (Tensor& leaf : leaves) leaf.zero_grad();
  Tensor y = f();
  checked_value(y);
  backward(y);
  std::vector<Matrix> analytic;
  analytic.reserve(leaves.size());
  for (Tensor& leaf : leaves) analytic.push_back(leaf.grad());

  GradCheckReport report;
  Index flat = 0;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    Matrix& values = leaves[l].mutable_value();
    for (Index i = 0; i < values.size(); ++i, ++flat) {
      const double original = values.data()[i];
      values.data()[i] = original + step;
      const double up = checked_value(f());
      values.data()[i] = original - step;
      const double down = checked_value(f());
      values.data()[i] = original;
      const double err = relative_error(analytic[l].data()[i], (up - down) / (2.0 * step), floor);
      if (err > report.max_rel_error || report.worst_index < 0) {
        report.max_rel_error = std::max(report.max_rel_error, err);
        report.worst_index = flat;
      }
    }
    leaves[l].zero_grad();
  }
  report.pass = report.max_rel_error < tol;
  return report;
}

}  // namespace jif
