#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "isgd/noise.hpp"
#include "isgd/samplers.hpp"

namespace isgd::harness {

/// Bad or incomplete configuration; maps to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModelKind { trig, quadratic, logistic };

std::string to_string(ModelKind kind);

struct ModelSection {
  ModelKind kind = ModelKind::trig;
  std::size_t features = 3;
  std::vector<double> frequencies;  // empty: 1..features
  double noise_var = 0.1;
  std::size_t n_train = 1000;
  std::size_t n_test = 200;
  std::string train_csv;  // optional; overrides the synthetic training set
  std::string test_csv;
  std::vector<double> mean;     // quadratic
  std::vector<double> hessian;  // quadratic, row-major d x d
  std::vector<std::size_t> layers;  // optional group sizes
  double prior_var = 1.0;       // logistic

  bool operator==(const ModelSection&) const = default;
};

/// Sampler family named in the config: the kinds of samplers::SamplerKind plus
/// `exact`, which draws from the analytic posterior of a conjugate model.
struct MethodSpec {
  bool exact = false;
  samplers::SamplerKind kind = samplers::SamplerKind::isgd;
  noise::Estimator estimator = noise::Estimator::alpha;
  noise::Scheme scheme = noise::Scheme::c;

  bool operator==(const MethodSpec&) const = default;
};

/// "isgd-alpha-c", "isgd-G-a", "sgld", "sghmc", "sgd" or "exact".
MethodSpec parse_method(const std::string& text);
std::string to_string(const MethodSpec& method);

struct NoiseSection {
  double mu = 0.5;
  std::size_t steps = 1000;
  std::optional<double> train_lr;  // empty: 1 / (largest Hessian eigenvalue at the start point)
  bool fast_matching = false;
  noise::LambdaMode lambda_mode = noise::LambdaMode::layerwise;
  double center_momentum = 0.9;

  bool operator==(const NoiseSection&) const = default;
};

struct EvalSection {
  double grid_min = -2.0;
  double grid_max = 2.0;
  std::size_t grid_points = 81;

  bool operator==(const EvalSection&) const = default;
};

struct ExperimentConfig {
  ModelSection model;
  MethodSpec method;
  samplers::SamplerConfig sampler;  // sampler.seed mirrors `seed`
  NoiseSection noise;
  EvalSection eval;
  std::uint64_t seed = 0;
  std::string out_dir = "out";

  bool operator==(const ExperimentConfig&) const = default;
};

/// Keys every document must set.
const std::vector<std::string>& required_keys();
/// Every accepted key, in canonical order.
const std::vector<std::string>& known_keys();

/// Parses an INI document (`[section]` headers, `key = value`, `#`/`;`
/// comments). Keys are addressed as `section.key`. Relative CSV paths are
/// resolved against `base_dir` and must exist.
ExperimentConfig parse_config(const std::string& text,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical INI text with every value explicit; parse_config inverts it.
std::string serialize_config(const ExperimentConfig& config);

/// Built-in configuration for the toy regression study.
ExperimentConfig toy_demo_config(std::uint64_t seed);

}  // namespace isgd::harness
