#include "isgd/gradient.hpp"

namespace isgd {

MinibatchGradient::MinibatchGradient(const Model& model, const Dataset& data,
                                     std::size_t batch_size)
    : model_(model), data_(data), batch_size_(batch_size) {
  require(!data.empty(), "minibatch gradients need a non-empty dataset");
  require(batch_size >= 1 && batch_size <= data.size(), "batch size must lie in [1, N]");
}

Vector MinibatchGradient::sample(const Vector& theta, Rng& rng) const {
  const auto batch = draw_batch(data_.size(), batch_size_, rng);
  return grad_minibatch(model_, theta, data_, batch);
}

Vector MinibatchGradient::exact(const Vector& theta) const {
  return grad_full(model_, theta, data_);
}

SyntheticNoiseGradient::SyntheticNoiseGradient(const Model& model, const Dataset& data,
                                               Vector b_diag)
    : model_(model), data_(data), b_diag_(std::move(b_diag)) {
  require(static_cast<std::size_t>(b_diag_.size()) == model.dim(), "b_diag length must equal dim");
  require((b_diag_.array() >= 0.0).all(), "b_diag must be non-negative");
  noise_std_ = (2.0 * b_diag_.array()).sqrt().matrix();
}

Vector SyntheticNoiseGradient::sample(const Vector& theta, Rng& rng) const {
  Vector g = exact(theta);
  for (Eigen::Index j = 0; j < g.size(); ++j) g[j] += noise_std_[j] * rng.normal();
  return g;
}

}  // namespace isgd
