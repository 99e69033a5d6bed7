#pragma once

#include <string>
#include <utility>
#include <vector>

#include "jif/autodiff.hpp"
#include "jif/rng.hpp"

namespace jif {

// Named view over a model's learnable leaves and batch-norm buffers. Holds
// shared tensor handles and raw pointers to states owned by the modules, so
// it must not outlive the model it was collected from.
struct Parameters {
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::vector<std::pair<std::string, BatchNormState*>> norms;

  void add(std::string name, const Tensor& t) { tensors.emplace_back(std::move(name), t); }
  void add(std::string name, BatchNormState& s) { norms.emplace_back(std::move(name), &s); }

  std::vector<Tensor> leaves() const;
  Index scalar_count() const;
  void zero_grad();
};

// Weight is in x out (so the forward is x * W + b), bias 1 x out.
struct Linear {
  Tensor weight;
  Tensor bias;

  Linear() = default;
  Linear(Index in, Index out, Rng& rng);

  Index in_features() const { return weight.rows(); }
  Index out_features() const { return weight.cols(); }
  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
  void collect(const std::string& prefix, Parameters& out);
};

struct BatchNorm {
  Tensor gamma;
  Tensor beta;
  BatchNormState state;

  BatchNorm() = default;
  explicit BatchNorm(Index features);

  Tensor operator()(const Tensor& x, Mode mode) { return batch_norm(x, gamma, beta, state, mode); }
  void collect(const std::string& prefix, Parameters& out);
};

struct Conv2d {
  Tensor kernel;  // out x (in * k * k)
  Tensor bias;
  Index kernel_size = 3;

  Conv2d() = default;
  Conv2d(Index in, Index out, Index kernel_size, Rng& rng);

  Tensor operator()(const Tensor& x) const { return conv2d(x, kernel, bias, kernel_size); }
  void collect(const std::string& prefix, Parameters& out);
};

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)), the usual default for dense and conv layers.
Matrix uniform_init(Index rows, Index cols, Index fan_in, Rng& rng);

}  // namespace jif
