#pragma once

#include <cstddef>

#include "isgd/model.hpp"

namespace isgd {

/// Source of stochastic gradients g(theta) for a sampler. Implementations hold
/// references to immutable model/data and are safe to share across chains;
/// all randomness comes from the caller's Rng.
class GradientOracle {
 public:
  virtual ~GradientOracle() = default;
  virtual std::size_t dim() const = 0;
  virtual const LayerPartition& partition() const = 0;
  /// One stochastic gradient draw.
  virtual Vector sample(const Vector& theta, Rng& rng) const = 0;
  /// Noise-free gradient of the negative log-joint.
  virtual Vector exact(const Vector& theta) const = 0;
};

/// Minibatch gradient over a dataset; batches are uniform subsets of size N_b.
class MinibatchGradient final : public GradientOracle {
 public:
  MinibatchGradient(const Model& model, const Dataset& data, std::size_t batch_size);

  std::size_t dim() const override { return model_.dim(); }
  const LayerPartition& partition() const override { return model_.partition(); }
  Vector sample(const Vector& theta, Rng& rng) const override;
  Vector exact(const Vector& theta) const override;

  std::size_t batch_size() const { return batch_size_; }

 private:
  const Model& model_;
  const Dataset& data_;
  std::size_t batch_size_;
};

/// Exact gradient, no noise.
class ExactGradient final : public GradientOracle {
 public:
  ExactGradient(const Model& model, const Dataset& data) : model_(model), data_(data) {}

  std::size_t dim() const override { return model_.dim(); }
  const LayerPartition& partition() const override { return model_.partition(); }
  Vector sample(const Vector& theta, Rng&) const override { return exact(theta); }
  Vector exact(const Vector& theta) const override { return grad_full(model_, theta, data_); }

 private:
  const Model& model_;
  const Dataset& data_;
};

/// g = grad f(theta) + N(0, 2 diag(b)): SG noise with a known diagonal covariance.
class SyntheticNoiseGradient final : public GradientOracle {
 public:
  SyntheticNoiseGradient(const Model& model, const Dataset& data, Vector b_diag);

  std::size_t dim() const override { return model_.dim(); }
  const LayerPartition& partition() const override { return model_.partition(); }
  Vector sample(const Vector& theta, Rng& rng) const override;
  Vector exact(const Vector& theta) const override { return grad_full(model_, theta, data_); }

  const Vector& b_diag() const { return b_diag_; }

 private:
  const Model& model_;
  const Dataset& data_;
  Vector b_diag_;
  Vector noise_std_;
};

}  // namespace isgd
