#pragma once

// JSON experiment configuration: parsing with key-named diagnostics, dotted
// overrides, and construction of generators, nonlinearities and drivers.

#include <json.hpp>

#include <fstream>
#include <string>

#include "rpde/driver.hpp"
#include "rpde/evolution.hpp"
#include "rpde/lyapunov.hpp"
#include "rpde/solver.hpp"

namespace rpde {

using Json = nlohmann::json;

/// A configuration key is missing, mistyped or out of range.
class ConfigError : public InvalidArgument {
 public:
  ConfigError(const std::string& key, const std::string& what) : InvalidArgument("config key '" + key + "': " + what) {}
};

namespace config {

inline const Json* find(const Json& root, const std::string& dotted) {
  const Json* node = &root;
  for (const auto& part : split(dotted, '.')) {
    if (!node->is_object() || !node->contains(part)) return nullptr;
    node = &(*node)[part];
  }
  return node;
}

template <class T>
T get(const Json& root, const std::string& key) {
  const Json* node = find(root, key);
  if (!node) throw ConfigError(key, "missing");
  try {
    return node->get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(key, std::string("wrong type (") + e.what() + ")");
  }
}

template <class T>
T get(const Json& root, const std::string& key, T fallback) {
  return find(root, key) ? get<T>(root, key) : fallback;
}

/// Applies `a.b.c=value`; the value is parsed as JSON when possible and kept
/// as a string otherwise.
inline void apply_override(Json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw InvalidArgument("override '" + assignment + "' is not of the form key=value");
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  Json* node = &root;
  const auto parts = split(key, '.');
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i]) || !(*node)[parts[i]].is_object()) (*node)[parts[i]] = Json::object();
    node = &(*node)[parts[i]];
  }
  (*node)[parts.back()] = std::move(value);
}

/// Reads a config file; a run manifest (which embeds its config under
/// "config") is accepted as well.
inline Json load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config '" + path + "'");
  Json j = Json::parse(in, nullptr, false, true);
  if (j.is_discarded()) throw InvalidArgument("config '" + path + "' is not valid JSON");
  if (j.is_object() && j.contains("config") && j["config"].is_object()) return j["config"];
  return j;
}

inline Matrix matrix_from(const Json& root, const std::string& key, Eigen::Index rows, Eigen::Index cols) {
  const Json* node = find(root, key);
  if (!node) throw ConfigError(key, "missing");
  if (node->is_number()) return Matrix::Constant(rows, cols, node->get<double>());
  if (!node->is_array() || static_cast<Eigen::Index>(node->size()) != rows)
    throw ConfigError(key, "expected a number or a " + std::to_string(rows) + "x" + std::to_string(cols) + " array");
  Matrix out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = (*node)[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ConfigError(key, "row " + std::to_string(r) + " must have " + std::to_string(cols) + " entries");
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return out;
}

}  // namespace config

/// Everything a subcommand needs, built from a validated config tree.
struct Experiment {
  Json cfg;
  std::string name;
  std::uint64_t seed = 0;
  double horizon = 1.0;
  std::size_t steps = 256;
  double gamma = 0.4;
  double alpha = 0.0;
  std::size_t noise_dim = 1;
  DriverSpec driver;
  SpectralGenerator gen = SpectralGenerator::laplace(1);
  Nonlinearity nl;
  Vector u0;

  RoughPath make_rough_path(std::uint64_t s) const { return make_driver(driver, horizon, steps, s, noise_dim); }
  RoughPath make_rough_path(std::uint64_t s, double T, std::size_t n) const { return make_driver(driver, T, n, s, noise_dim); }
  AlphaNorm norm() const { return gen.norm(alpha); }

  LyapunovProblem lyapunov_problem() const {
    LyapunovProblem p{gen, nl, u0, driver};
    p.step = config::get<double>(cfg, "lyapunov.step", horizon / static_cast<double>(steps));
    p.burn_in = config::get<double>(cfg, "lyapunov.burn_in", 0.0);
    const auto init = config::get<std::string>(cfg, "lyapunov.init", "basis");
    if (init == "basis") p.init = EnsembleInit::basis;
    else if (init == "random") p.init = EnsembleInit::random;
    else throw ConfigError("lyapunov.init", "expected 'basis' or 'random'");
    return p;
  }

  LyapunovOptions lyapunov_options() const {
    LyapunovOptions o;
    o.k = config::get<std::size_t>(cfg, "lyapunov.k", 1);
    o.horizon = config::get<double>(cfg, "lyapunov.horizon", 100.0);
    o.renorm_every = config::get<std::size_t>(cfg, "lyapunov.renorm_every", 10);
    o.alpha = alpha;
    o.seed = seed;
    if (o.k < 1 || o.k > gen.dim()) throw ConfigError("lyapunov.k", "must lie in [1, m]");
    return o;
  }
};

namespace detail {

inline Drift drift_from(const Json& cfg, std::size_t m) {
  const auto kind = config::get<std::string>(cfg, "nonlinearity.F.kind", "zero");
  if (kind == "zero") return f_zero();
  if (kind == "linear") return f_linear(config::get<double>(cfg, "nonlinearity.F.c"), m);
  throw ConfigError("nonlinearity.F.kind", "expected 'zero' or 'linear'");
}

inline Diffusion diffusion_from(const Json& cfg, std::size_t m, std::size_t d) {
  const auto kind = config::get<std::string>(cfg, "nonlinearity.G.kind", "zero");
  if (kind == "zero") return g_zero();
  const auto p = config::get<std::size_t>(cfg, "nonlinearity.G.p", m);
  if (p < 1 || p > m) throw ConfigError("nonlinearity.G.p", "active modes must lie in [1, m]");
  const auto pe = static_cast<Eigen::Index>(p), de = static_cast<Eigen::Index>(d);
  if (kind == "additive") {
    Matrix g = Matrix::Zero(static_cast<Eigen::Index>(m), de);
    if (config::find(cfg, "nonlinearity.G.g") && config::find(cfg, "nonlinearity.G.g")->is_array()) {
      g.topRows(pe) = config::matrix_from(cfg, "nonlinearity.G.g", pe, de);
    } else {
      // Mode k is driven by noise component k mod d.
      const double amp = config::get<double>(cfg, "nonlinearity.G.g", 1.0);
      for (Eigen::Index k = 0; k < pe; ++k) g(k, k % de) = amp;
    }
    return g_additive(std::move(g));
  }
  if (kind == "tanh") {
    return g_tanh(config::matrix_from(cfg, "nonlinearity.G.g", pe, de),
                  config::find(cfg, "nonlinearity.G.offset") ? config::matrix_from(cfg, "nonlinearity.G.offset", pe, de)
                                                             : Matrix::Zero(pe, de),
                  m);
  }
  throw ConfigError("nonlinearity.G.kind", "expected 'zero', 'additive' or 'tanh'");
}

}  // namespace detail

inline Experiment load_experiment(const Json& cfg) {
  Experiment e;
  e.cfg = cfg;
  e.name = config::get<std::string>(cfg, "name", "experiment");
  e.seed = config::get<std::uint64_t>(cfg, "seed", 0);
  e.horizon = config::get<double>(cfg, "horizon", 1.0);
  if (!(e.horizon > 0)) throw ConfigError("horizon", "must be positive");
  e.steps = config::get<std::size_t>(cfg, "steps", 256);
  if (e.steps < 1) throw ConfigError("steps", "must be positive");
  e.gamma = config::get<double>(cfg, "gamma", 0.4);
  if (!(e.gamma > 1.0 / 3.0 && e.gamma <= 0.5)) throw ConfigError("gamma", "must lie in (1/3, 1/2]");
  e.alpha = config::get<double>(cfg, "alpha", 0.0);

  e.noise_dim = config::get<std::size_t>(cfg, "noise.d", 1);
  if (e.noise_dim < 1) throw ConfigError("noise.d", "must be positive");
  const auto kernel = config::get<std::string>(cfg, "noise.kernel", "bm");
  if (kernel == "sine") {
    e.driver.kernel.reset();
    e.driver.sine_amplitude = config::get<double>(cfg, "noise.amplitude", 1.0);
    e.driver.sine_frequency = config::get<double>(cfg, "noise.frequency", 1.0);
  } else {
    try {
      e.driver.kernel = VolterraKernel::parse(kernel);
    } catch (const InvalidArgument& err) {
      throw ConfigError("noise.kernel", err.what());
    }
  }
  e.driver.coarsen = config::get<std::size_t>(cfg, "noise.coarsen", 16);
  if (e.driver.coarsen < 1) throw ConfigError("noise.coarsen", "must be positive");
  const auto lift = config::get<std::string>(cfg, "noise.lift", "geometric");
  if (lift == "geometric") e.driver.lift = Lift::geometric;
  else if (lift == "ito") e.driver.lift = Lift::ito;
  else throw ConfigError("noise.lift", "expected 'geometric' or 'ito'");
  e.driver.gamma = e.gamma;

  try {
    const auto xi = TimeCoefficient::parse(config::get<std::string>(cfg, "coefficient", "constant:c=1"));
    e.gen = SpectralGenerator::parse(config::get<std::string>(cfg, "generator", "laplace:m=32"), xi);
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& err) {
    throw ConfigError("generator", err.what());
  }
  const std::size_t m = e.gen.dim();

  e.nl.modes = m;
  e.nl.noise_dim = e.noise_dim;
  e.nl.drift = detail::drift_from(cfg, m);
  e.nl.diffusion = detail::diffusion_from(cfg, m, e.noise_dim);
  e.nl.drift.lipschitz = config::get<double>(cfg, "nonlinearity.C_F", e.nl.drift.lipschitz);
  e.nl.drift.derivative_bound = config::get<double>(cfg, "nonlinearity.C_DF", e.nl.drift.derivative_bound);
  e.nl.diffusion.bound = config::get<double>(cfg, "nonlinearity.C_G", e.nl.diffusion.bound);
  e.nl.sigma = config::get<double>(cfg, "nonlinearity.sigma", 0.0);
  e.nl.delta = config::get<double>(cfg, "nonlinearity.delta", 0.0);
  if (!(e.nl.delta < 1)) throw ConfigError("nonlinearity.delta", "must be below 1");
  if (!(e.nl.sigma >= 0 && e.nl.sigma < e.gamma)) throw ConfigError("nonlinearity.sigma", "must lie in [0, gamma)");
  if (config::find(cfg, "gronwall") && !(e.nl.sigma < (1.0 - e.gamma) / 2.0))
    throw ConfigError("nonlinearity.sigma", "Gronwall features need sigma < (1 - gamma)/2");

  const Json* u0 = config::find(cfg, "u0");
  if (!u0) {
    e.u0 = Vector::Zero(static_cast<Eigen::Index>(m));
  } else if (u0->is_number()) {
    e.u0 = Vector::Constant(static_cast<Eigen::Index>(m), u0->get<double>());
  } else if (u0->is_array() && u0->size() == m) {
    e.u0.resize(static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < m; ++k) e.u0(static_cast<Eigen::Index>(k)) = (*u0)[k].get<double>();
  } else {
    throw ConfigError("u0", "expected a number or an array of length m = " + std::to_string(m));
  }
  return e;
}

inline Experiment load_experiment_file(const std::string& path) { return load_experiment(config::load(path)); }

}  // namespace rpde
