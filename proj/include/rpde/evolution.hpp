#pragma once

// Diagonal parabolic evolution families U_{t,s} = exp(-diag(mu) (Xi(t) - Xi(s)))
// generated by A(t) = -xi(t) diag(mu_k).

#include <numbers>
#include <string>
#include <variant>

#include "rpde/csv.hpp"
#include "rpde/rough_core.hpp"

namespace rpde {

/// xi(t) = c0 + eps sin(2 pi (t + shift) / tau); constant when eps = 0.
class TimeCoefficient {
 public:
  static TimeCoefficient constant(double c) { return TimeCoefficient(c, 0.0, 1.0, 0.0); }
  static TimeCoefficient periodic(double c0, double eps, double tau) { return TimeCoefficient(c0, eps, tau, 0.0); }

  /// Parses `constant:c=1` or `periodic:c0=1,eps=0.5,tau=1`.
  static TimeCoefficient parse(const std::string& spec);

  double operator()(double t) const {
    return c0_ + eps_ * std::sin(2.0 * std::numbers::pi * (t + shift_) / tau_);
  }

  /// Xi(t) = int_0^t xi(r) dr.
  double antiderivative(double t) const {
    if (eps_ == 0.0) return c0_ * t;
    const double w = 2.0 * std::numbers::pi / tau_;
    return c0_ * t + eps_ / w * (std::cos(w * shift_) - std::cos(w * (t + shift_)));
  }

  double lower_bound() const { return c0_ - eps_; }
  double upper_bound() const { return c0_ + eps_; }
  /// Long-time average of xi.
  double mean() const { return c0_; }
  bool is_constant() const { return eps_ == 0.0; }

  /// The coefficient seen from time s onwards: t -> xi(s + t).
  TimeCoefficient shifted(double s) const { return TimeCoefficient(c0_, eps_, tau_, shift_ + s); }

  std::string name() const {
    if (is_constant()) return "constant:c=" + format_double(c0_);
    return "periodic:c0=" + format_double(c0_) + ",eps=" + format_double(eps_) + ",tau=" + format_double(tau_);
  }

 private:
  TimeCoefficient(double c0, double eps, double tau, double shift) : c0_(c0), eps_(eps), tau_(tau), shift_(shift) {
    require(std::isfinite(c0) && std::isfinite(eps), "time coefficient: parameters must be finite");
    require(eps >= 0 && c0 > eps, "time coefficient: need c0 > eps >= 0");
    require(tau > 0, "time coefficient: period must be positive");
  }

  double c0_, eps_, tau_, shift_;
};

namespace detail {

inline double spec_value(const std::string& spec, const std::string& key, double fallback) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) return fallback;
  for (const auto& kv : split(spec.substr(colon + 1), ',')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || kv.substr(0, eq) != key) continue;
    try {
      return std::stod(kv.substr(eq + 1));
    } catch (const std::exception&) {
      throw InvalidArgument("spec '" + spec + "': value of '" + key + "' is not a number");
    }
  }
  return fallback;
}

}  // namespace detail

inline TimeCoefficient TimeCoefficient::parse(const std::string& spec) {
  const std::string head = spec.substr(0, spec.find(':'));
  if (head == "constant") return constant(detail::spec_value(spec, "c", 1.0));
  if (head == "periodic")
    return periodic(detail::spec_value(spec, "c0", 1.0), detail::spec_value(spec, "eps", 0.0),
                    detail::spec_value(spec, "tau", 1.0));
  throw InvalidArgument("unknown coefficient spec '" + spec + "'");
}

/// A(t) = -xi(t) diag(mu) on an m-dimensional spectral Galerkin space.
class SpectralGenerator {
 public:
  SpectralGenerator(Vector eigenvalues, TimeCoefficient xi) : mu_(std::move(eigenvalues)), xi_(xi) {
    require(mu_.size() >= 1, "generator: need at least one mode");
    for (Eigen::Index k = 0; k < mu_.size(); ++k) {
      require(std::isfinite(mu_(k)) && mu_(k) > 0, "generator: eigenvalues must be positive");
      if (k > 0) require(mu_(k) >= mu_(k - 1), "generator: eigenvalues must be nondecreasing");
    }
  }

  /// Dirichlet Laplacian on (0, pi): mu_k = k^2.
  static SpectralGenerator laplace(std::size_t m, TimeCoefficient xi = TimeCoefficient::constant(1.0)) {
    require(m >= 1, "generator: need at least one mode");
    Vector mu(static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < m; ++k) mu(static_cast<Eigen::Index>(k)) = static_cast<double>((k + 1) * (k + 1));
    return SpectralGenerator(std::move(mu), xi);
  }

  /// Parses `laplace:m=32` or `diag:1,2,3`.
  static SpectralGenerator parse(const std::string& spec, TimeCoefficient xi) {
    const std::string head = spec.substr(0, spec.find(':'));
    if (head == "laplace") {
      const double m = detail::spec_value(spec, "m", 32);
      require(m >= 1 && m == std::floor(m), "generator spec: m must be a positive integer");
      return laplace(static_cast<std::size_t>(m), xi);
    }
    if (head == "diag") {
      const auto colon = spec.find(':');
      require(colon != std::string::npos, "generator spec: diag needs eigenvalues");
      const auto parts = split(spec.substr(colon + 1), ',');
      Vector mu(static_cast<Eigen::Index>(parts.size()));
      for (std::size_t k = 0; k < parts.size(); ++k) {
        try {
          mu(static_cast<Eigen::Index>(k)) = std::stod(parts[k]);
        } catch (const std::exception&) {
          throw InvalidArgument("generator spec: eigenvalue '" + parts[k] + "' is not a number");
        }
      }
      return SpectralGenerator(std::move(mu), xi);
    }
    throw InvalidArgument("unknown generator spec '" + spec + "'");
  }

  std::size_t dim() const { return static_cast<std::size_t>(mu_.size()); }
  const Vector& eigenvalues() const { return mu_; }
  const TimeCoefficient& coefficient() const { return xi_; }
  AlphaNorm norm(double alpha) const { return AlphaNorm(mu_, alpha); }

  SpectralGenerator shifted(double s) const { return SpectralGenerator(mu_, xi_.shifted(s)); }

  /// Diagonal of U_{t,s}.
  Vector propagator(double t, double s) const {
    if (s > t) throw InvalidArgument("evolution family: need s <= t");
    const double elapsed = xi_.antiderivative(t) - xi_.antiderivative(s);
    return (-elapsed * mu_.array()).exp().matrix();
  }

 private:
  Vector mu_;
  TimeCoefficient xi_;
};

/// U_{t,s} x.
inline Vector apply_U(const SpectralGenerator& gen, double t, double s, const Vector& x) {
  require(static_cast<std::size_t>(x.size()) == gen.dim(), "apply_U: dimension mismatch");
  if (t == s) return x;
  return gen.propagator(t, s).cwiseProduct(x);
}

struct SmoothingReport {
  double regularity_constant;  // sup |(U_{t,s} - I) e_k|_a / ((t-s)^s1 |e_k|_{a+s1})
  double smoothing_constant;   // sup |U_{t,s} e_k|_{a+s2} (t-s)^s2 / |e_k|_a
};

/// Empirical constants of the smoothing estimates over all pairs of `times`
/// and all basis vectors.
inline SmoothingReport smoothing_report(const SpectralGenerator& gen, double alpha, double sigma1, double sigma2,
                                        const std::vector<double>& times) {
  require(sigma1 >= 0 && sigma1 <= 1, "smoothing_report: sigma1 must lie in [0,1]");
  require(sigma2 >= 0, "smoothing_report: sigma2 must be nonnegative");
  require(times.size() >= 2, "smoothing_report: need at least two times");
  SmoothingReport rep{0.0, 0.0};
  const Vector& mu = gen.eigenvalues();
  for (std::size_t a = 0; a < times.size(); ++a)
    for (std::size_t b = a + 1; b < times.size(); ++b) {
      const double s = times[a], t = times[b];
      require(t > s, "smoothing_report: times must be increasing");
      const Vector u = gen.propagator(t, s);
      const double h = t - s;
      for (Eigen::Index k = 0; k < mu.size(); ++k) {
        // For e_k every alpha-norm is a power of mu_k.
        const double reg = std::abs(u(k) - 1.0) * std::pow(mu(k), alpha) / (std::pow(h, sigma1) * std::pow(mu(k), alpha + sigma1));
        const double smo = u(k) * std::pow(mu(k), alpha + sigma2) * std::pow(h, sigma2) / std::pow(mu(k), alpha);
        rep.regularity_constant = std::max(rep.regularity_constant, reg);
        rep.smoothing_constant = std::max(rep.smoothing_constant, smo);
      }
    }
  return rep;
}

}  // namespace rpde
