#include "jif/layers.hpp"

#include <cmath>

namespace jif {

std::vector<Tensor> Parameters::leaves() const {
  std::vector<Tensor> out;
  out.reserve(tensors.size());
  for (const auto& [name, t] : tensors) out.push_back(t);
  return out;
}

Index Parameters::scalar_count() const {
  Index n = 0;
  for (const auto& [name, t] : tensors) n += t.size();
  return n;
}

void Parameters::zero_grad() {
  for (auto& [name, t] : tensors) t.zero_grad();
}

Matrix uniform_init(Index rows, Index cols, Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Index>(fan_in, 1)));
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

Linear::Linear(Index in, Index out, Rng& rng)
    : weight(Tensor::parameter(uniform_init(in, out, in, rng))),
      bias(Tensor::parameter(uniform_init(1, out, in, rng), {out})) {}

void Linear::collect(const std::string& prefix, Parameters& out) {
  out.add(prefix + ".weight", weight);
  out.add(prefix + ".bias", bias);
}

BatchNorm::BatchNorm(Index features)
    : gamma(Tensor::parameter(Matrix::Ones(1, features), {features})),
      beta(Tensor::parameter(Matrix::Zero(1, features), {features})),
      state(features) {}

void BatchNorm::collect(const std::string& prefix, Parameters& out) {
  out.add(prefix + ".gamma", gamma);
  out.add(prefix + ".beta", beta);
  out.add(prefix, state);
}

Conv2d::Conv2d(Index in, Index out, Index k, Rng& rng)
    : kernel(Tensor::parameter(uniform_init(out, in * k * k, in * k * k, rng), {out, in, k, k})),
      bias(Tensor::parameter(uniform_init(1, out, in * k * k, rng), {out})),
      kernel_size(k) {}

void Conv2d::collect(const std::string& prefix, Parameters& out) {
  out.add(prefix + ".kernel", kernel);
  out.add(prefix + ".bias", bias);
}

}  // namespace jif
