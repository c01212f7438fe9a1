#pragma once

// Gaussian Volterra processes V_t = int_0^t K(t,s) dB_s: kernels, samplers and
// numerical checks of the kernel conditions used for rough path lifts and
// Cameron-Martin estimates.

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <Eigen/Cholesky>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "rpde/csv.hpp"
#include "rpde/rough_core.hpp"

namespace rpde {

/// Liouville fBm kernel (t-s)^{H-1/2} / Gamma(H+1/2); H = 1/2 is Brownian motion.
struct LiouvilleFbm {
  double hurst;
};
/// Fractional Brownian motion sampled through its closed-form covariance.
struct FbmCovariance {
  double hurst;
};
/// Ornstein-Uhlenbeck kernel exp(a (t-s)), a < 0.
struct OrnsteinUhlenbeck {
  double rate;
};
/// K(t_i, s_j) on a uniform (n+1)x(n+1) grid over [0, horizon], evaluated
/// piecewise constant from the lower-left node.
struct TabulatedKernel {
  double horizon;
  Matrix values;
};

class VolterraKernel {
 public:
  using Kind = std::variant<LiouvilleFbm, FbmCovariance, OrnsteinUhlenbeck, TabulatedKernel>;

  explicit VolterraKernel(Kind kind) : kind_(std::move(kind)) { validate(); }

  static VolterraKernel brownian() { return VolterraKernel(LiouvilleFbm{0.5}); }

  /// Parses `liouville:H=0.4`, `fbm:H=0.4`, `ou:a=-1.0`, `table:<path>` or `bm`.
  static VolterraKernel parse(const std::string& spec);

  const Kind& kind() const { return kind_; }

  /// False when the process is only available through its covariance.
  bool has_kernel() const { return !std::holds_alternative<FbmCovariance>(kind_); }

  /// K(t,s) = k(t-s) for every t,s.
  bool stationary() const {
    return std::holds_alternative<LiouvilleFbm>(kind_) || std::holds_alternative<OrnsteinUhlenbeck>(kind_);
  }

  bool is_brownian() const {
    const auto* l = std::get_if<LiouvilleFbm>(&kind_);
    return l && l->hurst == 0.5;
  }

  bool is_zero() const {
    const auto* t = std::get_if<TabulatedKernel>(&kind_);
    return t && t->values.isZero(0.0);
  }

  /// Singularity exponent beta of the kernel at the diagonal.
  double beta() const {
    if (const auto* l = std::get_if<LiouvilleFbm>(&kind_)) return 0.5 - l->hurst;
    if (const auto* f = std::get_if<FbmCovariance>(&kind_)) return 0.5 - f->hurst;
    return 0.0;
  }

  /// L^2-Hoelder exponent of t -> K(t, .) implied by the parameters.
  double nominal_holder_exponent() const {
    if (const auto* l = std::get_if<LiouvilleFbm>(&kind_)) return 2.0 * l->hurst;
    if (const auto* f = std::get_if<FbmCovariance>(&kind_)) return 2.0 * f->hurst;
    return 1.0;
  }

  /// K(t,s); zero for s >= t.
  double operator()(double t, double s) const {
    if (!(s < t) || t <= 0) return 0.0;
    if (const auto* l = std::get_if<LiouvilleFbm>(&kind_)) {
      if (l->hurst == 0.5) return 1.0;
      return std::pow(t - s, l->hurst - 0.5) / std::tgamma(l->hurst + 0.5);
    }
    if (const auto* o = std::get_if<OrnsteinUhlenbeck>(&kind_)) return std::exp(o->rate * (t - s));
    if (const auto* tab = std::get_if<TabulatedKernel>(&kind_)) {
      const auto n = tab->values.rows() - 1;
      const double h = tab->horizon / static_cast<double>(n);
      if (t > tab->horizon * (1 + 1e-12)) throw InvalidArgument("tabulated kernel evaluated beyond its horizon");
      const auto i = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(std::floor(t / h + 1e-9)));
      const auto j = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(std::floor(s / h + 1e-9)));
      return tab->values(i, j);
    }
    throw InvalidArgument("fbm covariance kernel has no pointwise kernel representation");
  }

  /// k(lag) for stationary kernels.
  double lag_kernel(double lag) const { return (*this)(lag, 0.0); }

  /// E[V_s V_t].
  double covariance(double s, double t) const;

  /// E[(V_t - V_s)^2].
  double increment_variance(double s, double t) const;

  std::string name() const;

 private:
  void validate() const {
    if (const auto* l = std::get_if<LiouvilleFbm>(&kind_))
      require(l->hurst > 0.25 && l->hurst <= 0.5, "liouville kernel: H must lie in (1/4, 1/2]");
    if (const auto* f = std::get_if<FbmCovariance>(&kind_))
      require(f->hurst > 0.25 && f->hurst < 1.0, "fbm kernel: H must lie in (1/4, 1)");
    if (const auto* o = std::get_if<OrnsteinUhlenbeck>(&kind_))
      require(o->rate < 0, "ou kernel: a must be negative");
    if (const auto* t = std::get_if<TabulatedKernel>(&kind_)) {
      require(t->horizon > 0, "tabulated kernel: horizon must be positive");
      require(t->values.rows() >= 2 && t->values.rows() == t->values.cols(), "tabulated kernel: need a square table");
      require(t->values.allFinite(), "tabulated kernel: values must be finite");
      for (Eigen::Index i = 0; i < t->values.rows(); ++i)
        for (Eigen::Index j = i; j < t->values.cols(); ++j)
          require(t->values(i, j) == 0.0, "tabulated kernel: K(t,s) must vanish for s >= t");
    }
  }

  Kind kind_;
};

namespace detail {

inline double parse_param(const std::string& spec, const std::string& key) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw InvalidArgument("kernel spec '" + spec + "' has no parameters");
  for (const auto& kv : split(spec.substr(colon + 1), ',')) {
    const auto eq = kv.find('=');
    if (eq != std::string::npos && kv.substr(0, eq) == key) {
      try {
        return std::stod(kv.substr(eq + 1));
      } catch (const std::exception&) {
        break;
      }
    }
  }
  throw InvalidArgument("kernel spec '" + spec + "' is missing numeric parameter '" + key + "'");
}

/// Integral over [a,b] of a function that may blow up (integrably) at the end points.
template <class F>
double integrate_singular(F&& f, double a, double b) {
  if (!(b > a)) return 0.0;
  static thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  double err = 0, l1 = 0;
  const double v = integrator.integrate(f, a, b, 1e-10, &err, &l1);
  if (!std::isfinite(v)) throw NumericalError("quadrature produced a non-finite value");
  return v;
}

/// Composite midpoint rule with `cells` cells; used for tabulated kernels.
template <class F>
double integrate_midpoint(F&& f, double a, double b, std::size_t cells) {
  if (!(b > a)) return 0.0;
  const double h = (b - a) / static_cast<double>(cells);
  double acc = 0;
  for (std::size_t i = 0; i < cells; ++i) acc += f(a + (static_cast<double>(i) + 0.5) * h);
  if (!std::isfinite(acc)) throw NumericalError("quadrature produced a non-finite value");
  return acc * h;
}

}  // namespace detail

inline VolterraKernel VolterraKernel::parse(const std::string& spec) {
  const std::string head = spec.substr(0, spec.find(':'));
  if (head == "bm") return brownian();
  if (head == "liouville") return VolterraKernel(LiouvilleFbm{detail::parse_param(spec, "H")});
  if (head == "fbm") return VolterraKernel(FbmCovariance{detail::parse_param(spec, "H")});
  if (head == "ou") return VolterraKernel(OrnsteinUhlenbeck{detail::parse_param(spec, "a")});
  if (head == "table") {
    const std::string path = spec.substr(spec.find(':') + 1);
    std::ifstream in(path);
    if (!in) throw InvalidArgument("table kernel: cannot open '" + path + "'");
    // Optional first line "# T=<horizon>", then a header line and a square table.
    double horizon = 1.0;
    if (in.peek() == '#') {
      std::string line;
      std::getline(in, line);
      const auto eq = line.find("T=");
      if (eq != std::string::npos) horizon = std::stod(line.substr(eq + 2));
    }
    const auto rows = read_csv_rows(in);
    const auto n = static_cast<Eigen::Index>(rows.size());
    Matrix vals(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      require(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) == n, "table kernel: table must be square");
      for (Eigen::Index j = 0; j < n; ++j) vals(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return VolterraKernel(TabulatedKernel{horizon, std::move(vals)});
  }
  throw InvalidArgument("unknown kernel spec '" + spec + "'");
}

inline std::string VolterraKernel::name() const {
  if (is_brownian()) return "bm";
  if (const auto* l = std::get_if<LiouvilleFbm>(&kind_)) return "liouville:H=" + format_double(l->hurst);
  if (const auto* f = std::get_if<FbmCovariance>(&kind_)) return "fbm:H=" + format_double(f->hurst);
  if (const auto* o = std::get_if<OrnsteinUhlenbeck>(&kind_)) return "ou:a=" + format_double(o->rate);
  return "table";
}

inline double VolterraKernel::covariance(double s, double t) const {
  const double m = std::min(s, t);
  if (m <= 0) return 0.0;
  if (is_brownian()) return m;
  if (const auto* f = std::get_if<FbmCovariance>(&kind_)) {
    const double h2 = 2.0 * f->hurst;
    return 0.5 * (std::pow(s, h2) + std::pow(t, h2) - std::pow(std::abs(t - s), h2));
  }
  if (const auto* o = std::get_if<OrnsteinUhlenbeck>(&kind_)) {
    const double a = o->rate;
    return (std::exp(a * (s + t)) - std::exp(a * std::abs(t - s))) / (2.0 * a);
  }
  auto integrand = [&](double r) { return (*this)(s, r) * (*this)(t, r); };
  if (const auto* tab = std::get_if<TabulatedKernel>(&kind_))
    return detail::integrate_midpoint(integrand, 0.0, m, 4 * static_cast<std::size_t>(tab->values.rows()));
  return detail::integrate_singular(integrand, 0.0, m);
}

inline double VolterraKernel::increment_variance(double s, double t) const {
  if (s > t) std::swap(s, t);
  if (const auto* f = std::get_if<FbmCovariance>(&kind_)) return std::pow(t - s, 2.0 * f->hurst);
  // int_s^t K(t,r)^2 dr + int_0^s (K(t,r) - K(s,r))^2 dr
  auto near = [&](double r) { return std::pow((*this)(t, r), 2); };
  auto far = [&](double r) { return std::pow((*this)(t, r) - (*this)(s, r), 2); };
  if (const auto* tab = std::get_if<TabulatedKernel>(&kind_)) {
    const std::size_t cells = 4 * static_cast<std::size_t>(tab->values.rows());
    return detail::integrate_midpoint(near, s, t, cells) + detail::integrate_midpoint(far, 0.0, s, cells);
  }
  return detail::integrate_singular(near, s, t) + detail::integrate_singular(far, 0.0, s);
}

/// One draw of the process on a fine grid together with its driving noise.
struct NoiseSample {
  Matrix increments;  // d x n_fine Brownian increments (standard normals times sqrt(h) for fbm)
  GridPath path;      // V on the fine grid
};

/// Precomputes whatever a kernel needs (lag weights, covariance factor) for a
/// fixed grid, then draws independent samples from seeds.
class VolterraSampler {
 public:
  VolterraSampler(VolterraKernel kernel, std::size_t n_fine, double horizon)
      : kernel_(std::move(kernel)), n_(n_fine), horizon_(horizon) {
    if (n_ < 2) throw InvalidArgument("sample_volterra: need n_fine >= 2");
    if (!(horizon_ > 0)) throw InvalidArgument("sample_volterra: horizon must be positive");
    const double h = step();
    if (std::holds_alternative<FbmCovariance>(kernel_.kind())) {
      Matrix cov(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
      for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
          const double c = kernel_.covariance(static_cast<double>(i + 1) * h, static_cast<double>(j + 1) * h);
          cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c;
          cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = c;
        }
      Eigen::LLT<Matrix> llt(cov);
      if (llt.info() != Eigen::Success) throw NumericalError("fbm covariance is not positive definite");
      factor_ = std::make_shared<Matrix>(llt.matrixL());
    } else if (kernel_.stationary() && !kernel_.is_brownian()) {
      lag_weights_.resize(n_ + 1, 0.0);
      for (std::size_t k = 1; k <= n_; ++k) lag_weights_[k] = kernel_.lag_kernel(static_cast<double>(k) * h);
    }
  }

  double step() const { return horizon_ / static_cast<double>(n_); }
  std::size_t steps() const { return n_; }
  const VolterraKernel& kernel() const { return kernel_; }

  /// Independent N(0, h) increments for `d` components from `seed`.
  Matrix draw_increments(std::uint64_t seed, std::size_t d) const {
    Matrix inc(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n_));
    const double sd = std::sqrt(step());
    for (std::size_t c = 0; c < d; ++c) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(c), 0x5eedu};
      std::mt19937_64 gen(seq);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (std::size_t j = 0; j < n_; ++j) inc(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) = sd * normal(gen);
    }
    return inc;
  }

  NoiseSample sample(std::uint64_t seed, std::size_t d) const {
    require(d >= 1, "sample_volterra: need d >= 1");
    return from_increments(draw_increments(seed, d));
  }

  /// Left-point Ito discretisation V(t_i) = sum_{j<i} K(t_i, t_j) dB_j of the
  /// given driver increments (covariance factor times dB/sqrt(h) for fbm).
  NoiseSample from_increments(Matrix inc) const {
    require(static_cast<std::size_t>(inc.cols()) == n_, "sample_volterra: increment count mismatch");
    const Eigen::Index d = inc.rows();
    const auto n = static_cast<Eigen::Index>(n_);
    Matrix v = Matrix::Zero(d, n + 1);
    const double h = step();
    if (factor_) {
      const Matrix z = inc / std::sqrt(h);
      v.rightCols(n) = (*factor_ * z.transpose()).transpose();
    } else if (kernel_.is_brownian()) {
      for (Eigen::Index i = 0; i < n; ++i) v.col(i + 1) = v.col(i) + inc.col(i);
    } else if (const auto* o = std::get_if<OrnsteinUhlenbeck>(&kernel_.kind())) {
      const double decay = std::exp(o->rate * h);
      for (Eigen::Index i = 0; i < n; ++i) v.col(i + 1) = decay * (v.col(i) + inc.col(i));
    } else if (!lag_weights_.empty()) {
      for (Eigen::Index i = 1; i <= n; ++i)
        for (Eigen::Index j = 0; j < i; ++j) v.col(i) += lag_weights_[static_cast<std::size_t>(i - j)] * inc.col(j);
    } else {
      for (Eigen::Index i = 1; i <= n; ++i)
        for (Eigen::Index j = 0; j < i; ++j) {
          const double k = kernel_(static_cast<double>(i) * h, static_cast<double>(j) * h);
          if (k != 0.0) v.col(i) += k * inc.col(j);
        }
    }
    if (!v.allFinite()) throw NumericalError("sample_volterra: non-finite sample");
    return NoiseSample{std::move(inc), GridPath(horizon_, std::move(v))};
  }

 private:
  VolterraKernel kernel_;
  std::size_t n_;
  double horizon_;
  std::vector<double> lag_weights_;
  std::shared_ptr<Matrix> factor_;
};

inline NoiseSample sample_volterra(const VolterraKernel& kernel, std::size_t n_fine, double horizon, std::uint64_t seed,
                                   std::size_t d) {
  return VolterraSampler(kernel, n_fine, horizon).sample(seed, d);
}

struct HolderFit {
  double exponent = 0;          // fitted slope of the modulus against the lag
  std::vector<double> lags;     // dyadic ladder
  std::vector<double> modulus;  // E(V_{s0+lag} - V_{s0})^2
};

/// Fits iota in int_0^T (K(t,r) - K(s,r))^2 dr ~ |t-s|^iota on the lags
/// T 2^{-k}, k = first_level..last_level, anchored at s = T/2.
inline HolderFit kernel_holder_exponent(const VolterraKernel& kernel, double horizon = 1.0, int first_level = 5,
                                        int last_level = 13) {
  require(last_level - first_level + 1 >= 5, "kernel_holder_exponent: need at least five dyadic levels");
  HolderFit fit;
  const double s0 = 0.5 * horizon;
  for (int k = first_level; k <= last_level; ++k) {
    const double lag = horizon * std::ldexp(1.0, -k);
    const double m = kernel.increment_variance(s0, s0 + lag);
    if (!std::isfinite(m)) throw NumericalError("kernel_holder_exponent: non-finite modulus");
    fit.lags.push_back(lag);
    fit.modulus.push_back(m);
  }
  fit.exponent = loglog_slope(fit.lags, fit.modulus);
  return fit;
}

struct KernelConditionReport {
  double exponent_K1 = 0;
  double exponent_K2 = 0;
  bool pass = false;
  bool degenerate = false;  // kernel integrals vanish identically
  std::vector<double> lags, k1, k2;
};

/// Numerical check of
///   (K1) sup_s int_0^1 |K(t+s,r) - K(s,r)| dr = O(t^{gamma+1/2}),
///   (K2) sup_r int_0^{1-t} |K(t+s,r) - K(s,r)| ds = O(t^{gamma+1/2}),
/// by fitting log-log slopes over t = 2^{-k}. Suprema are taken over
/// `sup_points`+1 equally spaced points.
inline KernelConditionReport check_K1_K2(const VolterraKernel& kernel, double gamma, int first_level = 3,
                                         int last_level = 10, std::size_t sup_points = 32) {
  require(gamma > 1.0 / 3.0 && gamma < 0.5, "check_K1_K2: gamma must lie in (1/3, 1/2)");
  require(kernel.has_kernel(), "check_K1_K2: kernel has no pointwise representation");
  require(last_level - first_level + 1 >= 5, "check_K1_K2: need at least five dyadic levels");
  const auto* tab = std::get_if<TabulatedKernel>(&kernel.kind());
  auto integrate = [&](auto&& f, double a, double b) {
    return tab ? detail::integrate_midpoint(f, a, b, 2048) : detail::integrate_singular(f, a, b);
  };
  KernelConditionReport rep;
  for (int k = first_level; k <= last_level; ++k) {
    const double t = std::ldexp(1.0, -k);
    double k1 = 0, k2 = 0;
    for (std::size_t p = 0; p <= sup_points; ++p) {
      const double s = (1.0 - t) * static_cast<double>(p) / static_cast<double>(sup_points);
      const double below = integrate([&](double r) { return std::abs(kernel(t + s, r) - kernel(s, r)); }, 0.0, s);
      const double inside = integrate([&](double r) { return std::abs(kernel(t + s, r)); }, s, s + t);
      k1 = std::max(k1, below + inside);

      const double tau = static_cast<double>(p) / static_cast<double>(sup_points);
      const double lo = std::max(0.0, tau - t), mid = std::min(tau, 1.0 - t);
      const double first = integrate([&](double u) { return std::abs(kernel(t + u, tau)); }, lo, mid);
      const double second = integrate([&](double u) { return std::abs(kernel(t + u, tau) - kernel(u, tau)); }, mid, 1.0 - t);
      k2 = std::max(k2, first + second);
    }
    rep.lags.push_back(t);
    rep.k1.push_back(k1);
    rep.k2.push_back(k2);
  }
  const auto all_zero = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
  };
  if (all_zero(rep.k1) && all_zero(rep.k2)) {
    rep.degenerate = true;
    rep.pass = true;
    rep.exponent_K1 = rep.exponent_K2 = std::numeric_limits<double>::infinity();
    return rep;
  }
  rep.exponent_K1 = loglog_slope(rep.lags, rep.k1);
  rep.exponent_K2 = loglog_slope(rep.lags, rep.k2);
  const double need = gamma + 0.5 - 0.05;
  rep.pass = rep.exponent_K1 >= need && rep.exponent_K2 >= need;
  return rep;
}

/// h = K g for g in L^2([0,T]).
struct CameronMartinElement {
  std::vector<double> g;  // piecewise-constant cell values of g
  GridPath h;             // h(t_i) = int_0^{t_i} K(t_i, s) g(s) ds on the fine grid
  double h_norm;          // |h|_H = ||g||_{L^2}
};

/// Left-point quadrature weights A(i, c) = sum_{j in cell c, j < i} K(t_i, t_j) dt,
/// so that h = A g for g piecewise constant on `cells` cells.
inline Matrix cameron_martin_weights(const VolterraKernel& kernel, std::size_t n_fine, std::size_t cells, double horizon) {
  require(kernel.has_kernel(), "cameron_martin: kernel has no pointwise representation");
  require(cells >= 1 && n_fine % cells == 0, "cameron_martin: cell count must divide the fine step count");
  const double h = horizon / static_cast<double>(n_fine);
  const std::size_t per = n_fine / cells;
  std::vector<double> lag;
  if (kernel.stationary()) {
    lag.resize(n_fine + 1);
    for (std::size_t k = 1; k <= n_fine; ++k) lag[k] = kernel.lag_kernel(static_cast<double>(k) * h);
  }
  Matrix a = Matrix::Zero(static_cast<Eigen::Index>(n_fine + 1), static_cast<Eigen::Index>(cells));
  for (std::size_t i = 1; i <= n_fine; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double k = kernel.stationary() ? lag[i - j] : kernel(static_cast<double>(i) * h, static_cast<double>(j) * h);
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j / per)) += k * h;
    }
  return a;
}

inline CameronMartinElement cameron_martin_element(const Matrix& weights, std::vector<double> g, double horizon) {
  require(static_cast<Eigen::Index>(g.size()) == weights.cols(), "cameron_martin: cell count mismatch");
  const Vector gv = Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(g.size()));
  const double cell = horizon / static_cast<double>(g.size());
  Matrix vals = (weights * gv).transpose();
  return CameronMartinElement{std::move(g), GridPath(horizon, std::move(vals)), std::sqrt(gv.squaredNorm() * cell)};
}

struct CameronMartinReport {
  double max_ratio = 0;          // max over samples of W_{h,g',eta}(0,1)^{g'-eta} / |h|_H
  double max_sobolev_ratio = 0;  // max over samples of |h|_{W^{g',2}} / |h|_H
  std::vector<double> ratios, sobolev_ratios;
};

/// Fractional Sobolev seminorm (int int |h(u)-h(v)|^2 / |u-v|^{1+2s})^{1/2}
/// by a Riemann sum over off-diagonal grid pairs.
inline double sobolev_seminorm(const GridPath& h, double smoothness) {
  const double dt = h.step();
  double acc = 0;
  for (std::size_t i = 0; i <= h.steps(); ++i)
    for (std::size_t j = i + 1; j <= h.steps(); ++j)
      acc += 2.0 * h.increment(i, j).squaredNorm() / std::pow(dt * static_cast<double>(j - i), 1.0 + 2.0 * smoothness);
  return std::sqrt(acc * dt * dt);
}

struct CameronMartinOptions {
  std::size_t n_fine = 4096;  // quadrature grid for h = K g
  std::size_t coarsen = 16;   // partition grid for W is n_fine / coarsen
  std::size_t cells = 32;     // g is piecewise constant on this many cells
  double gamma = 0.5;         // driver regularity; requires gamma' < gamma + 1/2
};

/// Draws g with iid standard normal cell values normalised to ||g||_{L^2} = 1,
/// forms h = K g on [0,1] and reports the Cameron-Martin control ratios.
inline CameronMartinReport cm_check(const VolterraKernel& kernel, double gamma_prime, double eta, std::size_t n_samples,
                                    std::uint64_t seed, const CameronMartinOptions& opt = {}) {
  if (!(gamma_prime > 0.5 && gamma_prime < opt.gamma + 0.5))
    throw InvalidArgument("cm_check: need 1/2 < gamma' < gamma + 1/2");
  if (!(eta >= 0 && eta < gamma_prime - 0.5)) throw InvalidArgument("cm_check: need 0 <= eta < gamma' - 1/2");
  require(n_samples >= 1, "cm_check: need at least one sample");
  const Matrix weights = cameron_martin_weights(kernel, opt.n_fine, opt.cells, 1.0);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xc4u};
  std::mt19937_64 gen(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  CameronMartinReport rep;
  for (std::size_t s = 0; s < n_samples; ++s) {
    std::vector<double> g(opt.cells);
    double sq = 0;
    for (auto& x : g) {
      x = normal(gen);
      sq += x * x;
    }
    const double scale = 1.0 / std::sqrt(sq / static_cast<double>(opt.cells));
    for (auto& x : g) x *= scale;
    const auto el = cameron_martin_element(weights, std::move(g), 1.0);
    const RoughPath lifted = lift_geometric(el.h, opt.coarsen, 0.5);
    const double w = control_W(lifted, gamma_prime, eta, 0, lifted.steps());
    rep.ratios.push_back(std::pow(w, gamma_prime - eta) / el.h_norm);
    rep.sobolev_ratios.push_back(sobolev_seminorm(lifted.base(), gamma_prime) / el.h_norm);
    rep.max_ratio = std::max(rep.max_ratio, rep.ratios.back());
    rep.max_sobolev_ratio = std::max(rep.max_sobolev_ratio, rep.sobolev_ratios.back());
  }
  return rep;
}

struct QVariationEstimate {
  double estimate = 0;  // [R]_{q-var,[s,t]^2}
  double ratio = 0;     // estimate / (t-s)^{1/q}
  int best_row_level = 0, best_col_level = 0;
};

/// Two-dimensional q-variation of the covariance over [s,t]^2, maximised over
/// pairs of uniform dyadic partitions with up to 2^max_level intervals.
inline QVariationEstimate covariance_qvar(const VolterraKernel& kernel, double s, double t, double q, int max_level = 7) {
  require(q >= 1 && q < 2, "covariance_qvar: q must lie in [1,2)");
  require(s < t, "covariance_qvar: need s < t");
  require(max_level >= 0 && max_level <= 12, "covariance_qvar: max_level out of range");
  const std::size_t n = std::size_t{1} << max_level;
  std::vector<double> grid(n + 1);
  for (std::size_t i = 0; i <= n; ++i) grid[i] = s + (t - s) * static_cast<double>(i) / static_cast<double>(n);
  Matrix cov(static_cast<Eigen::Index>(n + 1), static_cast<Eigen::Index>(n + 1));
  for (std::size_t i = 0; i <= n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double c = kernel.covariance(grid[i], grid[j]);
      cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c;
      cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = c;
    }
  QVariationEstimate out;
  double best = 0;
  for (int la = 0; la <= max_level; ++la)
    for (int lb = 0; lb <= max_level; ++lb) {
      const std::size_t sa = n >> la, sb = n >> lb;
      double sum = 0;
      for (std::size_t a = 0; a + sa <= n; a += sa)
        for (std::size_t b = 0; b + sb <= n; b += sb) {
          const auto a0 = static_cast<Eigen::Index>(a), a1 = static_cast<Eigen::Index>(a + sa);
          const auto b0 = static_cast<Eigen::Index>(b), b1 = static_cast<Eigen::Index>(b + sb);
          const double rect = cov(a1, b1) - cov(a1, b0) - cov(a0, b1) + cov(a0, b0);
          sum += std::pow(std::abs(rect), q);
        }
      if (sum > best) {
        best = sum;
        out.best_row_level = la;
        out.best_col_level = lb;
      }
    }
  out.estimate = std::pow(best, 1.0 / q);
  out.ratio = out.estimate / std::pow(t - s, 1.0 / q);
  return out;
}

}  // namespace rpde
