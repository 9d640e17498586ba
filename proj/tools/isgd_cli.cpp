#include <cmath>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "isgd/config.hpp"
#include "isgd/experiment.hpp"
#include "isgd/fpe.hpp"
#include "isgd/io.hpp"
#include "isgd/stable.hpp"

namespace {

using nlohmann::json;
using namespace isgd;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct RunOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_run_options(CLI::App* cmd, RunOptions& opts, bool config_required) {
  auto* c = cmd->add_option("--config", opts.config_path, "INI configuration file");
  if (config_required) c->required();
  cmd->add_option("--seed", opts.seed, "Overrides run.seed");
  cmd->add_option("--out", opts.out, "Overrides run.out");
}

harness::ExperimentConfig resolve(const RunOptions& opts, std::optional<harness::ExperimentConfig> fallback) {
  harness::ExperimentConfig config =
      opts.config_path.empty() ? *fallback : harness::load_config(opts.config_path);
  if (opts.seed) {
    config.seed = *opts.seed;
    config.sampler.seed = *opts.seed;
  }
  if (!opts.out.empty()) config.out_dir = opts.out;
  return config;
}

int report(const harness::RunResult& result) {
  std::cout << io::dump_json(json{{"status", result.exit_status == 0 ? "ok" : "diverged"},
                                  {"manifest", result.manifest}});
  if (result.exit_status != 0) std::cerr << io::dump_json(result.metrics["failure"]);
  return result.exit_status;
}

int stable_fit(const std::string& input, bool fast, std::size_t n1, std::size_t n2) {
  const std::vector<double> samples = io::read_column(input);
  std::optional<stable::BlockShape> blocks;
  if (n1 > 0 || n2 > 0) blocks = stable::BlockShape{n1, n2};
  const stable::AlphaStableFit fit = stable::fit(samples, blocks, fast);
  std::cout << io::dump_json(json(fit));
  return 0;
}

int fpe_check(double curvature, double noise_var, double eta, double half_width,
              const std::vector<std::size_t>& points) {
  json rows = json::array();
  std::vector<double> norms;
  for (std::size_t n : points) {
    const auto r = fpe::fpe_residual(fpe::preconditioned_sgd_1d(curvature, noise_var, eta, 1.0),
                                     {{-half_width, half_width, n}});
    norms.push_back(r.l2_norm);
    rows.push_back({{"points", n}, {"l2_norm", r.l2_norm}});
  }
  json ratios = json::array();
  for (std::size_t k = 1; k < norms.size(); ++k) ratios.push_back(norms[k - 1] / norms[k]);
  const auto control = fpe::fpe_residual(fpe::preconditioned_sgd_1d(curvature, noise_var, eta, 2.0),
                                         {{-half_width, half_width, points.back()}});
  std::cout << io::dump_json(json{{"grids", rows},
                                  {"ratios", ratios},
                                  {"negative_control_l2_norm", control.l2_norm},
                                  {"control_over_finest", control.l2_norm / norms.back()}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic-gradient MCMC laboratory"};
  app.require_subcommand(1);

  RunOptions estimate_opts;
  RunOptions sample_opts;
  RunOptions evaluate_opts;
  RunOptions toy_opts;
  auto* estimate = app.add_subcommand("estimate", "Estimate noise levels only");
  add_run_options(estimate, estimate_opts, true);
  auto* sample = app.add_subcommand("sample", "Estimate and sample, without evaluation");
  add_run_options(sample, sample_opts, true);
  auto* evaluate = app.add_subcommand("evaluate", "Score the samples stored in the output directory");
  add_run_options(evaluate, evaluate_opts, true);
  auto* toy = app.add_subcommand("toy-demo", "Full toy regression study");
  add_run_options(toy, toy_opts, false);

  std::string stable_input;
  bool stable_fast = false;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  auto* sfit = app.add_subcommand("stable-fit", "Fit an alpha-stable law to a one-column sample file");
  sfit->add_option("input", stable_input, "Sample file")->required()->check(CLI::ExistingFile);
  sfit->add_flag("--fast", stable_fast, "Use sigma = sqrt(2) c");
  sfit->add_option("--n1", n1, "Block length");
  sfit->add_option("--n2", n2, "Number of blocks");

  double curvature = 1.0;
  double noise_var = 1.0;
  double eta = 0.1;
  double half_width = 6.0;
  std::vector<std::size_t> points{201, 401, 801};
  auto* fcheck = app.add_subcommand("fpe-check", "Fokker-Planck residual of preconditioned SGD on a 1-D quadratic");
  fcheck->add_option("--curvature", curvature, "Curvature of f");
  fcheck->add_option("--noise-var", noise_var, "SG noise covariance");
  fcheck->add_option("--eta", eta, "Step size");
  fcheck->add_option("--half-width", half_width, "Grid spans [-w, w]");
  fcheck->add_option("--points", points, "Grid sizes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*estimate) return report(harness::run_experiment(resolve(estimate_opts, std::nullopt), harness::Stage::estimate));
    if (*sample) return report(harness::run_experiment(resolve(sample_opts, std::nullopt), harness::Stage::sample));
    if (*evaluate) return report(harness::evaluate_saved(resolve(evaluate_opts, std::nullopt)));
    if (*toy) {
      const std::uint64_t seed = toy_opts.seed.value_or(0);
      return report(harness::run_experiment(resolve(toy_opts, harness::toy_demo_config(seed))));
    }
    if (*sfit) return stable_fit(stable_input, stable_fast, n1, n2);
    if (*fcheck) return fpe_check(curvature, noise_var, eta, half_width, points);
  } catch (const harness::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ContractViolation& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
