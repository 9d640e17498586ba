#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "isgd/core.hpp"

namespace isgd {

/// Ordered, disjoint groups of parameter indices covering {0..d-1}. Every
/// layer-wise quantity (preconditioner, noise level) is indexed by group.
class LayerPartition {
 public:
  explicit LayerPartition(std::vector<std::vector<std::size_t>> groups);

  /// All d parameters in one group.
  static LayerPartition single(std::size_t dim);
  /// Consecutive groups with the given sizes.
  static LayerPartition from_sizes(std::span<const std::size_t> sizes);

  std::size_t dim() const { return group_of_.size(); }
  std::size_t num_groups() const { return groups_.size(); }
  const std::vector<std::size_t>& group(std::size_t p) const { return groups_.at(p); }
  const std::vector<std::vector<std::size_t>>& groups() const { return groups_; }
  std::size_t group_of(std::size_t j) const { return group_of_.at(j); }

  /// Broadcast one value per group to a length-d vector.
  Vector expand(const Vector& per_group) const;

  bool operator==(const LayerPartition& other) const { return groups_ == other.groups_; }

 private:
  std::vector<std::vector<std::size_t>> groups_;
  std::vector<std::size_t> group_of_;
};

/// N observations. Row i of `inputs` together with `targets[i]` is record U_i.
/// Empty datasets are allowed and mean "prior only".
struct Dataset {
  Matrix inputs;   // N x k
  Vector targets;  // N

  Dataset() : inputs(0, 1), targets(0) {}
  Dataset(Matrix x, Vector y);

  std::size_t size() const { return static_cast<std::size_t>(targets.size()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(inputs.cols()); }
  bool empty() const { return size() == 0; }

  bool operator==(const Dataset& other) const {
    return inputs.rows() == other.inputs.rows() && inputs.cols() == other.inputs.cols() &&
           inputs == other.inputs && targets == other.targets;
  }
};

/// Differentiable log-joint over a dataset. All log densities are normalized
/// so that exp(-neg_log_joint) integrates to the model evidence.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::size_t dim() const = 0;
  virtual const LayerPartition& partition() const = 0;
  /// Number of input columns a record must have.
  virtual std::size_t input_dim() const = 0;

  virtual double log_prior(const Vector& theta) const = 0;
  virtual Vector grad_log_prior(const Vector& theta) const = 0;
  virtual double log_lik(const Vector& theta, const Dataset& data, std::size_t i) const = 0;
  /// Adds scale * grad log p(U_i | theta) into `out`.
  virtual void add_grad_log_lik(const Vector& theta, const Dataset& data, std::size_t i,
                                double scale, Vector& out) const = 0;

  Vector grad_log_lik(const Vector& theta, const Dataset& data, std::size_t i) const;
};

/// f(theta) = -sum_i log p(U_i|theta) - log p(theta).
double neg_log_joint(const Model& model, const Vector& theta, const Dataset& data);

/// Exact gradient of neg_log_joint.
Vector grad_full(const Model& model, const Vector& theta, const Dataset& data);

/// g(theta) = -(N/N_b) sum_{i in batch} grad log p(U_i|theta) - grad log p(theta).
Vector grad_minibatch(const Model& model, const Vector& theta, const Dataset& data,
                      std::span<const std::size_t> batch);

/// Uniformly random subset of {0..n-1} of the given size, in increasing order.
std::vector<std::size_t> draw_batch(std::size_t n, std::size_t batch_size, Rng& rng);

/// Linear regression on trigonometric features phi_k(x) = cos(omega_k x - pi/4),
/// Gaussian likelihood with fixed variance and N(0, I) prior on the weights.
class TrigRegression final : public Model {
 public:
  TrigRegression(Vector frequencies, double lik_var);
  TrigRegression(Vector frequencies, double lik_var, LayerPartition partition);

  /// Frequencies (1, 2, ..., D).
  static Vector default_frequencies(std::size_t num_features);

  std::size_t dim() const override { return static_cast<std::size_t>(frequencies_.size()); }
  const LayerPartition& partition() const override { return partition_; }
  std::size_t input_dim() const override { return 1; }

  double log_prior(const Vector& theta) const override;
  Vector grad_log_prior(const Vector& theta) const override;
  double log_lik(const Vector& theta, const Dataset& data, std::size_t i) const override;
  void add_grad_log_lik(const Vector& theta, const Dataset& data, std::size_t i, double scale,
                        Vector& out) const override;

  Vector features(double x) const;
  /// N x D design matrix.
  Matrix design(const Dataset& data) const;

  const Vector& frequencies() const { return frequencies_; }
  double lik_var() const { return lik_var_; }

 private:
  Vector frequencies_;
  double lik_var_;
  LayerPartition partition_;
};

/// f(theta) = 1/2 (theta - mu)^T H (theta - mu), H symmetric positive definite.
/// Carries no data term; the exact target is N(mu, H^-1).
class QuadraticPotential final : public Model {
 public:
  QuadraticPotential(Vector mean, Matrix hessian);
  QuadraticPotential(Vector mean, Matrix hessian, LayerPartition partition);

  std::size_t dim() const override { return static_cast<std::size_t>(mean_.size()); }
  const LayerPartition& partition() const override { return partition_; }
  std::size_t input_dim() const override { return 1; }

  double log_prior(const Vector& theta) const override;
  Vector grad_log_prior(const Vector& theta) const override;
  double log_lik(const Vector&, const Dataset&, std::size_t) const override { return 0.0; }
  void add_grad_log_lik(const Vector&, const Dataset&, std::size_t, double,
                        Vector&) const override {}

  const Vector& mean() const { return mean_; }
  const Matrix& hessian() const { return hessian_; }
  Matrix covariance() const;

 private:
  Vector mean_;
  Matrix hessian_;
  LayerPartition partition_;
};

/// Bernoulli likelihood with logistic link, labels in {0, 1}, prior N(0, s^2 I).
class LogisticRegression final : public Model {
 public:
  LogisticRegression(std::size_t num_features, double prior_var);

  std::size_t dim() const override { return num_features_; }
  const LayerPartition& partition() const override { return partition_; }
  std::size_t input_dim() const override { return num_features_; }

  double log_prior(const Vector& theta) const override;
  Vector grad_log_prior(const Vector& theta) const override;
  double log_lik(const Vector& theta, const Dataset& data, std::size_t i) const override;
  void add_grad_log_lik(const Vector& theta, const Dataset& data, std::size_t i, double scale,
                        Vector& out) const override;

  /// P(label = 1 | x, theta).
  double probability(const Vector& theta, const Eigen::Ref<const Vector>& x) const;
  double prior_var() const { return prior_var_; }

 private:
  std::size_t num_features_;
  double prior_var_;
  LayerPartition partition_;
};

/// Inputs x ~ U[-1, 1]; y = w^T cos(omega x - pi/4) + eps, eps ~ N(0, noise_var).
Dataset make_toy_dataset(std::size_t n, const Vector& w_true, const Vector& frequencies,
                         double noise_var, std::uint64_t seed);

/// Gaussian inputs, labels drawn from the logistic model at w_true.
Dataset make_logistic_dataset(std::size_t n, const Vector& w_true, std::uint64_t seed);

/// CSV with header `x,y` (one input column) or `x1,..,xk,label`.
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path, bool labels);
Dataset read_dataset_csv(const std::filesystem::path& path);

}  // namespace isgd
