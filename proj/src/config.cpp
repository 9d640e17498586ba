#include "isgd/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "isgd/io.hpp"

namespace isgd::harness {
namespace {

namespace pt = boost::property_tree;

using Flat = std::map<std::string, std::string>;

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  }
  return v;
}

std::uint64_t to_uint(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& s : split_list(text)) out.push_back(to_double(key, s));
  return out;
}

std::vector<std::size_t> to_sizes(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& s : split_list(text)) out.push_back(static_cast<std::size_t>(to_uint(key, s)));
  return out;
}

std::string fmt(double v) { return io::format_double(v); }

std::string fmt_list(const std::vector<double>& values) {
  std::string out;
  for (double v : values) out += (out.empty() ? "" : ", ") + fmt(v);
  return out;
}

std::string fmt_sizes(const std::vector<std::size_t>& values) {
  std::string out;
  for (auto v : values) out += (out.empty() ? "" : ", ") + std::to_string(v);
  return out;
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "trig") return ModelKind::trig;
  if (text == "quadratic") return ModelKind::quadratic;
  if (text == "logistic") return ModelKind::logistic;
  throw ConfigError("model.kind: unknown model '" + text + "' (expected trig, quadratic or logistic)");
}

Flat flatten(const std::string& text) {
  // boost's INI reader only understands whole-line ';' comments.
  std::ostringstream cleaned;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const std::string t = trim(line);
    if (!t.empty() && (t.front() == '#' || t.front() == ';')) continue;
    for (std::size_t i = 1; i < line.size(); ++i) {
      if ((line[i] == '#' || line[i] == ';') && std::isspace(static_cast<unsigned char>(line[i - 1]))) {
        line.erase(i);
        break;
      }
    }
    cleaned << line << '\n';
  }
  pt::ptree tree;
  std::istringstream in(cleaned.str());
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  Flat flat;
  std::vector<std::string> stray;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      stray.push_back(section);
      continue;
    }
    for (const auto& [key, value] : body) flat[section + "." + key] = trim(value.data());
  }
  if (!stray.empty()) throw ConfigError("keys outside any [section]: " + join(stray));
  return flat;
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::trig: return "trig";
    case ModelKind::quadratic: return "quadratic";
    case ModelKind::logistic: return "logistic";
  }
  return "?";
}

MethodSpec parse_method(const std::string& text) {
  MethodSpec m;
  if (text == "exact") {
    m.exact = true;
    return m;
  }
  if (text.rfind("isgd-", 0) == 0) {
    const auto parts = text.substr(5);
    const auto dash = parts.rfind('-');
    if (dash == std::string::npos) throw ConfigError("sampler.method: expected isgd-<G|alpha>-<a|b|c>");
    try {
      m.kind = samplers::SamplerKind::isgd;
      m.estimator = noise::parse_estimator(parts.substr(0, dash));
      m.scheme = noise::parse_scheme(parts.substr(dash + 1));
    } catch (const ContractViolation& e) {
      throw ConfigError(std::string("sampler.method: ") + e.what());
    }
    return m;
  }
  try {
    m.kind = samplers::parse_kind(text);
  } catch (const ContractViolation&) {
    throw ConfigError("sampler.method: unknown method '" + text +
                      "' (expected isgd-<G|alpha>-<a|b|c>, sgld, sghmc, sgd or exact)");
  }
  if (m.kind == samplers::SamplerKind::isgd) {
    throw ConfigError("sampler.method: isgd needs an estimator and scheme, e.g. isgd-alpha-c");
  }
  return m;
}

std::string to_string(const MethodSpec& m) {
  if (m.exact) return "exact";
  if (m.kind == samplers::SamplerKind::isgd) {
    return "isgd-" + noise::to_string(m.estimator) + "-" + noise::to_string(m.scheme);
  }
  return samplers::to_string(m.kind);
}

const std::vector<std::string>& required_keys() {
  static const std::vector<std::string> keys = {"model.kind", "sampler.method", "run.seed"};
  return keys;
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "model.kind",          "model.features",        "model.frequencies",
      "model.noise_var",     "model.n_train",         "model.n_test",
      "model.train_csv",     "model.test_csv",        "model.mean",
      "model.hessian",       "model.layers",          "model.prior_var",
      "sampler.method",      "sampler.eta",           "sampler.temperature",
      "sampler.batch_size",  "sampler.warmup_steps",  "sampler.keepevery",
      "sampler.num_samples", "sampler.warmup_anneal", "sampler.mass",
      "sampler.friction_scale", "sampler.b_tracking",
      "noise.mu",            "noise.steps",           "noise.train_lr",
      "noise.fast_matching", "noise.lambda_mode",     "noise.center_momentum",
      "eval.grid_min",       "eval.grid_max",         "eval.grid_points",
      "run.seed",            "run.out"};
  return keys;
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  const Flat flat = flatten(text);

  const std::set<std::string> known(known_keys().begin(), known_keys().end());
  std::vector<std::string> unknown;
  for (const auto& [key, _] : flat) {
    if (!known.count(key)) unknown.push_back(key);
  }
  if (!unknown.empty()) throw ConfigError("unknown keys: " + join(unknown));
  std::vector<std::string> missing;
  for (const auto& key : required_keys()) {
    if (!flat.count(key)) missing.push_back(key);
  }
  if (!missing.empty()) throw ConfigError("missing required keys: " + join(missing));

  auto has = [&](const std::string& k) { return flat.count(k) > 0; };
  auto get = [&](const std::string& k) -> const std::string& { return flat.at(k); };

  ExperimentConfig c;
  c.seed = to_uint("run.seed", get("run.seed"));
  if (has("run.out")) c.out_dir = get("run.out");

  auto& m = c.model;
  m.kind = parse_model_kind(get("model.kind"));
  if (has("model.features")) m.features = static_cast<std::size_t>(to_uint("model.features", get("model.features")));
  if (has("model.frequencies")) m.frequencies = to_doubles("model.frequencies", get("model.frequencies"));
  if (has("model.noise_var")) m.noise_var = to_double("model.noise_var", get("model.noise_var"));
  if (has("model.n_train")) m.n_train = static_cast<std::size_t>(to_uint("model.n_train", get("model.n_train")));
  if (has("model.n_test")) m.n_test = static_cast<std::size_t>(to_uint("model.n_test", get("model.n_test")));
  if (has("model.train_csv")) m.train_csv = get("model.train_csv");
  if (has("model.test_csv")) m.test_csv = get("model.test_csv");
  if (has("model.mean")) m.mean = to_doubles("model.mean", get("model.mean"));
  if (has("model.hessian")) m.hessian = to_doubles("model.hessian", get("model.hessian"));
  if (has("model.layers")) m.layers = to_sizes("model.layers", get("model.layers"));
  if (has("model.prior_var")) m.prior_var = to_double("model.prior_var", get("model.prior_var"));

  if (m.kind == ModelKind::trig && m.frequencies.empty()) {
    for (std::size_t k = 1; k <= m.features; ++k) m.frequencies.push_back(static_cast<double>(k));
  }
  if (m.kind == ModelKind::trig) m.features = m.frequencies.size();
  if (m.kind == ModelKind::quadratic) {
    if (m.mean.empty()) throw ConfigError("model.mean is required for the quadratic model");
    m.features = m.mean.size();
    if (m.hessian.empty()) {
      for (std::size_t i = 0; i < m.features; ++i)
        for (std::size_t j = 0; j < m.features; ++j) m.hessian.push_back(i == j ? 1.0 : 0.0);
    }
    if (m.hessian.size() != m.features * m.features) {
      throw ConfigError("model.hessian needs " + std::to_string(m.features * m.features) + " entries");
    }
  }
  if (m.features == 0) throw ConfigError("model.features must be positive");
  if (!(m.noise_var > 0.0)) throw ConfigError("model.noise_var must be positive");
  if (!(m.prior_var > 0.0)) throw ConfigError("model.prior_var must be positive");
  if (!m.layers.empty()) {
    std::size_t total = 0;
    for (auto s : m.layers) total += s;
    if (total != m.features || std::count(m.layers.begin(), m.layers.end(), 0u) > 0) {
      throw ConfigError("model.layers must be positive sizes summing to " + std::to_string(m.features));
    }
  }
  for (auto* path : {&m.train_csv, &m.test_csv}) {
    if (path->empty()) continue;
    std::filesystem::path p(*path);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    if (!std::filesystem::exists(p)) throw ConfigError("referenced file does not exist: " + p.string());
    *path = p.string();
  }

  c.method = parse_method(get("sampler.method"));
  auto& s = c.sampler;
  s.kind = c.method.kind;
  s.seed = c.seed;
  if (has("sampler.eta")) s.eta = to_double("sampler.eta", get("sampler.eta"));
  if (has("sampler.temperature")) s.temperature = to_double("sampler.temperature", get("sampler.temperature"));
  if (has("sampler.batch_size")) s.batch_size = static_cast<std::size_t>(to_uint("sampler.batch_size", get("sampler.batch_size")));
  if (has("sampler.warmup_steps")) s.warmup_steps = static_cast<std::size_t>(to_uint("sampler.warmup_steps", get("sampler.warmup_steps")));
  if (has("sampler.keepevery")) s.keepevery = static_cast<std::size_t>(to_uint("sampler.keepevery", get("sampler.keepevery")));
  if (has("sampler.num_samples")) s.num_samples = static_cast<std::size_t>(to_uint("sampler.num_samples", get("sampler.num_samples")));
  if (has("sampler.warmup_anneal")) s.warmup_anneal = to_double("sampler.warmup_anneal", get("sampler.warmup_anneal"));
  if (has("sampler.mass")) s.mass = to_double("sampler.mass", get("sampler.mass"));
  if (has("sampler.friction_scale")) s.friction_scale = to_double("sampler.friction_scale", get("sampler.friction_scale"));
  if (has("sampler.b_tracking")) {
    try {
      s.b_tracking = samplers::parse_b_tracking(get("sampler.b_tracking"));
    } catch (const ContractViolation& e) {
      throw ConfigError(std::string("sampler.b_tracking: ") + e.what());
    }
  }
  try {
    s.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("sampler: ") + e.what());
  }

  auto& n = c.noise;
  if (has("noise.mu")) n.mu = to_double("noise.mu", get("noise.mu"));
  if (has("noise.steps")) n.steps = static_cast<std::size_t>(to_uint("noise.steps", get("noise.steps")));
  if (has("noise.train_lr") && get("noise.train_lr") != "auto") n.train_lr = to_double("noise.train_lr", get("noise.train_lr"));
  if (has("noise.fast_matching")) n.fast_matching = to_bool("noise.fast_matching", get("noise.fast_matching"));
  if (has("noise.lambda_mode")) {
    const auto& v = get("noise.lambda_mode");
    if (v == "layerwise") n.lambda_mode = noise::LambdaMode::layerwise;
    else if (v == "slr") n.lambda_mode = noise::LambdaMode::slr;
    else throw ConfigError("noise.lambda_mode: expected layerwise or slr, got '" + v + "'");
  }
  if (has("noise.center_momentum")) n.center_momentum = to_double("noise.center_momentum", get("noise.center_momentum"));
  if (!(n.mu >= 0.0 && n.mu < 1.0)) throw ConfigError("noise.mu must lie in [0, 1)");
  if (!(n.center_momentum >= 0.0 && n.center_momentum < 1.0)) throw ConfigError("noise.center_momentum must lie in [0, 1)");
  if (n.steps == 0) throw ConfigError("noise.steps must be positive");
  if (n.train_lr && !(*n.train_lr > 0.0)) throw ConfigError("noise.train_lr must be positive or auto");

  auto& e = c.eval;
  if (has("eval.grid_min")) e.grid_min = to_double("eval.grid_min", get("eval.grid_min"));
  if (has("eval.grid_max")) e.grid_max = to_double("eval.grid_max", get("eval.grid_max"));
  if (has("eval.grid_points")) e.grid_points = static_cast<std::size_t>(to_uint("eval.grid_points", get("eval.grid_points")));
  if (!(e.grid_max > e.grid_min) || e.grid_points < 2) throw ConfigError("eval grid needs grid_max > grid_min and >= 2 points");

  if (c.method.exact && m.kind == ModelKind::logistic) {
    throw ConfigError("sampler.method = exact needs a conjugate model (trig or quadratic)");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.parent_path());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  const auto& m = c.model;
  out << "[model]\n"
      << "kind = " << to_string(m.kind) << "\n"
      << "features = " << m.features << "\n";
  if (!m.frequencies.empty()) out << "frequencies = " << fmt_list(m.frequencies) << "\n";
  out << "noise_var = " << fmt(m.noise_var) << "\n"
      << "n_train = " << m.n_train << "\n"
      << "n_test = " << m.n_test << "\n";
  if (!m.train_csv.empty()) out << "train_csv = " << m.train_csv << "\n";
  if (!m.test_csv.empty()) out << "test_csv = " << m.test_csv << "\n";
  if (!m.mean.empty()) out << "mean = " << fmt_list(m.mean) << "\n";
  if (!m.hessian.empty()) out << "hessian = " << fmt_list(m.hessian) << "\n";
  if (!m.layers.empty()) out << "layers = " << fmt_sizes(m.layers) << "\n";
  out << "prior_var = " << fmt(m.prior_var) << "\n";

  const auto& s = c.sampler;
  out << "\n[sampler]\n"
      << "method = " << to_string(c.method) << "\n"
      << "eta = " << fmt(s.eta) << "\n"
      << "temperature = " << fmt(s.temperature) << "\n"
      << "batch_size = " << s.batch_size << "\n"
      << "warmup_steps = " << s.warmup_steps << "\n"
      << "keepevery = " << s.keepevery << "\n"
      << "num_samples = " << s.num_samples << "\n"
      << "warmup_anneal = " << fmt(s.warmup_anneal) << "\n"
      << "mass = " << fmt(s.mass) << "\n"
      << "friction_scale = " << fmt(s.friction_scale) << "\n"
      << "b_tracking = " << samplers::to_string(s.b_tracking) << "\n";

  const auto& n = c.noise;
  out << "\n[noise]\n"
      << "mu = " << fmt(n.mu) << "\n"
      << "steps = " << n.steps << "\n"
      << "train_lr = " << (n.train_lr ? fmt(*n.train_lr) : std::string("auto")) << "\n"
      << "fast_matching = " << (n.fast_matching ? "true" : "false") << "\n"
      << "lambda_mode = " << (n.lambda_mode == noise::LambdaMode::slr ? "slr" : "layerwise") << "\n"
      << "center_momentum = " << fmt(n.center_momentum) << "\n";

  out << "\n[eval]\n"
      << "grid_min = " << fmt(c.eval.grid_min) << "\n"
      << "grid_max = " << fmt(c.eval.grid_max) << "\n"
      << "grid_points = " << c.eval.grid_points << "\n";

  out << "\n[run]\n"
      << "seed = " << c.seed << "\n"
      << "out = " << c.out_dir << "\n";
  return out.str();
}

ExperimentConfig toy_demo_config(std::uint64_t seed) {
  std::ostringstream text;
  text << "[model]\nkind = trig\n[sampler]\nmethod = isgd-alpha-c\n[run]\nseed = " << seed
       << "\nout = toy_demo\n";
  return parse_config(text.str());
}

}  // namespace isgd::harness
