#include "isgd/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "isgd/io.hpp"

namespace isgd {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_dim(const Model& model, const Vector& theta) {
  require(static_cast<std::size_t>(theta.size()) == model.dim(),
          "parameter dimension " + std::to_string(theta.size()) + " does not match model dimension " +
              std::to_string(model.dim()));
}

void check_data(const Model& model, const Dataset& data) {
  require(data.empty() || data.input_dim() == model.input_dim(),
          "dataset has " + std::to_string(data.input_dim()) + " input columns, model expects " +
              std::to_string(model.input_dim()));
}

double log1p_exp(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

// ---------------------------------------------------------------------------
// LayerPartition

LayerPartition::LayerPartition(std::vector<std::vector<std::size_t>> groups)
    : groups_(std::move(groups)) {
  require(!groups_.empty(), "partition needs at least one group");
  std::size_t dim = 0;
  for (const auto& g : groups_) {
    require(!g.empty(), "partition groups must be non-empty");
    dim += g.size();
  }
  group_of_.assign(dim, groups_.size());
  for (std::size_t p = 0; p < groups_.size(); ++p) {
    for (std::size_t j : groups_[p]) {
      require(j < dim, "partition index " + std::to_string(j) + " out of range");
      require(group_of_[j] == groups_.size(),
              "partition index " + std::to_string(j) + " appears in more than one group");
      group_of_[j] = p;
    }
  }
}

LayerPartition LayerPartition::single(std::size_t dim) {
  require(dim > 0, "partition dimension must be positive");
  std::vector<std::size_t> all(dim);
  for (std::size_t j = 0; j < dim; ++j) all[j] = j;
  return LayerPartition({std::move(all)});
}

LayerPartition LayerPartition::from_sizes(std::span<const std::size_t> sizes) {
  std::vector<std::vector<std::size_t>> groups;
  std::size_t next = 0;
  for (std::size_t n : sizes) {
    std::vector<std::size_t> g(n);
    for (auto& j : g) j = next++;
    groups.push_back(std::move(g));
  }
  return LayerPartition(std::move(groups));
}

Vector LayerPartition::expand(const Vector& per_group) const {
  require(static_cast<std::size_t>(per_group.size()) == groups_.size(),
          "expected one value per group");
  Vector out(static_cast<Eigen::Index>(dim()));
  for (std::size_t j = 0; j < dim(); ++j) out[static_cast<Eigen::Index>(j)] = per_group[static_cast<Eigen::Index>(group_of_[j])];
  return out;
}

// ---------------------------------------------------------------------------
// Dataset and generic operations

Dataset::Dataset(Matrix x, Vector y) : inputs(std::move(x)), targets(std::move(y)) {
  require(inputs.rows() == targets.size(), "dataset inputs and targets differ in length");
  require(inputs.cols() >= 1, "dataset records need at least one input column");
}

Vector Model::grad_log_lik(const Vector& theta, const Dataset& data, std::size_t i) const {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(dim()));
  add_grad_log_lik(theta, data, i, 1.0, out);
  return out;
}

double neg_log_joint(const Model& model, const Vector& theta, const Dataset& data) {
  check_dim(model, theta);
  check_data(model, data);
  double total = -model.log_prior(theta);
  for (std::size_t i = 0; i < data.size(); ++i) total -= model.log_lik(theta, data, i);
  return total;
}

Vector grad_full(const Model& model, const Vector& theta, const Dataset& data) {
  check_dim(model, theta);
  check_data(model, data);
  Vector g = -model.grad_log_prior(theta);
  for (std::size_t i = 0; i < data.size(); ++i) model.add_grad_log_lik(theta, data, i, -1.0, g);
  return g;
}

Vector grad_minibatch(const Model& model, const Vector& theta, const Dataset& data,
                      std::span<const std::size_t> batch) {
  check_dim(model, theta);
  check_data(model, data);
  require(!batch.empty(), "minibatch must be non-empty");
  const double scale = static_cast<double>(data.size()) / static_cast<double>(batch.size());
  Vector g = -model.grad_log_prior(theta);
  for (std::size_t i : batch) {
    require(i < data.size(), "minibatch index " + std::to_string(i) + " out of range");
    model.add_grad_log_lik(theta, data, i, -scale, g);
  }
  return g;
}

std::vector<std::size_t> draw_batch(std::size_t n, std::size_t batch_size, Rng& rng) {
  require(batch_size >= 1 && batch_size <= n, "batch size must lie in [1, N]");
  std::vector<std::size_t> batch;
  batch.reserve(batch_size);
  // Selection sampling: one pass, output already sorted.
  std::size_t needed = batch_size;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n && needed > 0; ++i) {
    const double remaining = static_cast<double>(n - i);
    if (u(rng.engine()) * remaining < static_cast<double>(needed)) {
      batch.push_back(i);
      --needed;
    }
  }
  return batch;
}

// ---------------------------------------------------------------------------
// TrigRegression

TrigRegression::TrigRegression(Vector frequencies, double lik_var)
    : TrigRegression(frequencies, lik_var,
                     LayerPartition::single(static_cast<std::size_t>(frequencies.size()))) {}

TrigRegression::TrigRegression(Vector frequencies, double lik_var, LayerPartition partition)
    : frequencies_(std::move(frequencies)), lik_var_(lik_var), partition_(std::move(partition)) {
  require(frequencies_.size() > 0, "need at least one feature");
  require(lik_var_ > 0.0, "likelihood variance must be positive");
  require(partition_.dim() == dim(), "partition dimension does not match feature count");
}

Vector TrigRegression::default_frequencies(std::size_t num_features) {
  return Vector::LinSpaced(static_cast<Eigen::Index>(num_features), 1.0,
                           static_cast<double>(num_features));
}

Vector TrigRegression::features(double x) const {
  return (frequencies_.array() * x - std::numbers::pi / 4.0).cos().matrix();
}

Matrix TrigRegression::design(const Dataset& data) const {
  Matrix phi(static_cast<Eigen::Index>(data.size()), frequencies_.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    phi.row(static_cast<Eigen::Index>(i)) = features(data.inputs(static_cast<Eigen::Index>(i), 0)).transpose();
  }
  return phi;
}

double TrigRegression::log_prior(const Vector& theta) const {
  return -0.5 * theta.squaredNorm() - 0.5 * static_cast<double>(dim()) * kLog2Pi;
}

Vector TrigRegression::grad_log_prior(const Vector& theta) const { return -theta; }

double TrigRegression::log_lik(const Vector& theta, const Dataset& data, std::size_t i) const {
  const auto row = static_cast<Eigen::Index>(i);
  const double resid = data.targets[row] - features(data.inputs(row, 0)).dot(theta);
  return -0.5 * resid * resid / lik_var_ - 0.5 * (kLog2Pi + std::log(lik_var_));
}

void TrigRegression::add_grad_log_lik(const Vector& theta, const Dataset& data, std::size_t i,
                                      double scale, Vector& out) const {
  const auto row = static_cast<Eigen::Index>(i);
  const Vector phi = features(data.inputs(row, 0));
  const double resid = data.targets[row] - phi.dot(theta);
  out.noalias() += (scale * resid / lik_var_) * phi;
}

// ---------------------------------------------------------------------------
// QuadraticPotential

QuadraticPotential::QuadraticPotential(Vector mean, Matrix hessian)
    : QuadraticPotential(mean, std::move(hessian),
                         LayerPartition::single(static_cast<std::size_t>(mean.size()))) {}

QuadraticPotential::QuadraticPotential(Vector mean, Matrix hessian, LayerPartition partition)
    : mean_(std::move(mean)), hessian_(std::move(hessian)), partition_(std::move(partition)) {
  require(mean_.size() > 0, "quadratic potential needs positive dimension");
  require(hessian_.rows() == mean_.size() && hessian_.cols() == mean_.size(),
          "hessian shape does not match mean");
  require((hessian_ - hessian_.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + hessian_.cwiseAbs().maxCoeff()),
          "hessian must be symmetric");
  require(Eigen::LLT<Matrix>(hessian_).info() == Eigen::Success,
          "hessian must be positive definite");
  require(partition_.dim() == dim(), "partition dimension does not match");
}

double QuadraticPotential::log_prior(const Vector& theta) const {
  const Vector delta = theta - mean_;
  return -0.5 * delta.dot(hessian_ * delta);
}

Vector QuadraticPotential::grad_log_prior(const Vector& theta) const {
  return -(hessian_ * (theta - mean_));
}

Matrix QuadraticPotential::covariance() const {
  return hessian_.llt().solve(Matrix::Identity(hessian_.rows(), hessian_.cols()));
}

// ---------------------------------------------------------------------------
// LogisticRegression

LogisticRegression::LogisticRegression(std::size_t num_features, double prior_var)
    : num_features_(num_features),
      prior_var_(prior_var),
      partition_(LayerPartition::single(num_features)) {
  require(prior_var_ > 0.0, "prior variance must be positive");
}

double LogisticRegression::log_prior(const Vector& theta) const {
  return -0.5 * theta.squaredNorm() / prior_var_ -
         0.5 * static_cast<double>(num_features_) * (kLog2Pi + std::log(prior_var_));
}

Vector LogisticRegression::grad_log_prior(const Vector& theta) const { return -theta / prior_var_; }

double LogisticRegression::probability(const Vector& theta,
                                       const Eigen::Ref<const Vector>& x) const {
  const double z = x.dot(theta);
  return 1.0 / (1.0 + std::exp(-z));
}

double LogisticRegression::log_lik(const Vector& theta, const Dataset& data,
                                   std::size_t i) const {
  const auto row = static_cast<Eigen::Index>(i);
  const double z = data.inputs.row(row).dot(theta);
  // y log s(z) + (1-y) log s(-z) = y z - log(1 + e^z)
  return data.targets[row] * z - log1p_exp(z);
}

void LogisticRegression::add_grad_log_lik(const Vector& theta, const Dataset& data,
                                          std::size_t i, double scale, Vector& out) const {
  const auto row = static_cast<Eigen::Index>(i);
  const double p = probability(theta, data.inputs.row(row).transpose());
  out.noalias() += (scale * (data.targets[row] - p)) * data.inputs.row(row).transpose();
}

// ---------------------------------------------------------------------------
// Synthetic data and CSV

Dataset make_toy_dataset(std::size_t n, const Vector& w_true, const Vector& frequencies,
                         double noise_var, std::uint64_t seed) {
  require(noise_var > 0.0, "noise variance must be positive");
  require(w_true.size() == frequencies.size(), "w_true and frequencies differ in length");
  const TrigRegression model(frequencies, noise_var);
  Rng rng(seed);
  Matrix x(static_cast<Eigen::Index>(n), 1);
  Vector y(static_cast<Eigen::Index>(n));
  const double noise_std = std::sqrt(noise_var);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = rng.uniform(-1.0, 1.0);
    y[i] = model.features(x(i, 0)).dot(w_true) + noise_std * rng.normal();
  }
  return Dataset(std::move(x), std::move(y));
}

Dataset make_logistic_dataset(std::size_t n, const Vector& w_true, std::uint64_t seed) {
  const LogisticRegression model(static_cast<std::size_t>(w_true.size()), 1.0);
  Rng rng(seed);
  Matrix x(static_cast<Eigen::Index>(n), w_true.size());
  Vector y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index k = 0; k < x.cols(); ++k) x(i, k) = rng.normal();
    y[i] = rng.uniform(0.0, 1.0) < model.probability(w_true, x.row(i).transpose()) ? 1.0 : 0.0;
  }
  return Dataset(std::move(x), std::move(y));
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path, bool labels) {
  std::vector<std::string> header;
  if (!labels && data.input_dim() == 1) {
    header = {"x", "y"};
  } else {
    for (std::size_t k = 0; k < data.input_dim(); ++k) header.push_back("x" + std::to_string(k + 1));
    header.emplace_back(labels ? "label" : "y");
  }
  std::vector<std::vector<double>> rows(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index k = 0; k < data.inputs.cols(); ++k) rows[i].push_back(data.inputs(r, k));
    rows[i].push_back(data.targets[r]);
  }
  io::write_csv(path, header, rows);
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  const io::CsvTable table = io::read_csv(path);
  require(table.header.size() >= 2, path.string() + ": need at least one input and one target column");
  const auto cols = static_cast<Eigen::Index>(table.header.size() - 1);
  Matrix x(static_cast<Eigen::Index>(table.rows.size()), cols);
  Vector y(static_cast<Eigen::Index>(table.rows.size()));
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index k = 0; k < cols; ++k) x(r, k) = table.rows[i][static_cast<std::size_t>(k)];
    y[r] = table.rows[i].back();
  }
  return Dataset(std::move(x), std::move(y));
}

}  // namespace isgd
