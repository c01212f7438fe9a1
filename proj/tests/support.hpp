#pragma once

// Independent oracles shared by the unit tests and the acceptance binary.

#include <string>

#include "rpde/experiment.hpp"

namespace rpde::testing {

inline std::string config_path(const std::string& name) { return std::string(RPDE_CONFIG_DIR) + "/" + name + ".json"; }

inline Experiment preset(const std::string& name) { return load_experiment_file(config_path(name)); }

/// |x_1|_a prod_i dist_a(x_i, span(x_1..x_{i-1})) via classical Gram-Schmidt
/// in the weighted inner product.
inline double sequential_volume(const Matrix& vectors, const Vector& weights) {
  std::vector<Vector> basis;
  double vol = 1.0;
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Vector r = weights.cwiseProduct(vectors.col(c));
    for (const auto& q : basis) r -= q.dot(r) * q;
    for (const auto& q : basis) r -= q.dot(r) * q;
    const double d = r.norm();
    vol *= d;
    if (d == 0) return 0.0;
    basis.push_back(r / d);
  }
  return vol;
}

/// Flow of the Davie scheme from `u0` along the whole grid of `rp`.
inline Vector flow(const SpectralGenerator& gen, const Nonlinearity& nl, const RoughPath& rp, Vector u) {
  for (std::size_t i = 0; i < rp.steps(); ++i) u = davie_step(gen, nl, rp.time(i), rp.time(i + 1), u, rp.increment(i, i + 1), rp.block(i));
  return u;
}

/// Errors |Dphi v - (phi(u+eps v) - phi(u-eps v)) / (2 eps)| for each eps and
/// the ratios between consecutive errors.
struct FdLadder {
  std::vector<double> eps, errors, ratios;
};

inline FdLadder fd_ladder(const SpectralGenerator& gen, const Nonlinearity& nl, const RoughPath& rp, const Vector& u0,
                          const Vector& dir, const std::vector<double>& eps) {
  const Vector tangent = linearize_path(gen, nl, rp, u0, Matrix(dir)).col(0);
  FdLadder out;
  out.eps = eps;
  for (const double e : eps) {
    const Vector fd = (flow(gen, nl, rp, u0 + e * dir) - flow(gen, nl, rp, u0 - e * dir)) / (2 * e);
    out.errors.push_back((fd - tangent).norm());
  }
  for (std::size_t i = 1; i < out.errors.size(); ++i) out.ratios.push_back(out.errors[i - 1] / out.errors[i]);
  return out;
}

}  // namespace rpde::testing
