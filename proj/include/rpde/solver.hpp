#pragma once

// Galerkin solver for du = [A(t)u + F(t,u)] dt + G(t,u) dX in mild form,
// using a one-step compensated (Davie) scheme with exponential integrator.

#include <functional>
#include <optional>
#include <string>

#include "rpde/evolution.hpp"
#include "rpde/rough_core.hpp"

namespace rpde {

/// Drift F with Frechet derivative DF; constants are the declared Lipschitz
/// and derivative bounds.
struct Drift {
  std::function<Vector(double, const Vector&)> value;  // empty means F = 0
  std::function<Matrix(double, const Vector&)> derivative;
  double lipschitz = 0;   // C_F
  double derivative_bound = 0;  // C_DF
  std::string name = "zero";
};

/// Diffusion G (m x d) with directional derivatives DG(u)[w] and D2G(u)[w1,w2].
struct Diffusion {
  std::function<Matrix(double, const Vector&)> value;  // empty means G = 0
  std::function<Matrix(double, const Vector&, const Vector&)> derivative;
  std::function<Matrix(double, const Vector&, const Vector&, const Vector&)> second_derivative;
  bool bounded = true;
  bool additive = true;  // DG = 0
  double bound = 0;      // C_G
  std::string name = "zero";
};

struct Nonlinearity {
  std::size_t modes = 1;       // m
  std::size_t noise_dim = 1;   // d
  Drift drift;
  Diffusion diffusion;
  double delta = 0;  // F maps E_a into E_{a-delta}
  double sigma = 0;  // G maps E_a into E_{a-sigma}

  Vector F(double t, const Vector& u) const {
    return drift.value ? drift.value(t, u) : Vector::Zero(static_cast<Eigen::Index>(modes));
  }
  Matrix DF(double t, const Vector& u) const {
    return drift.derivative ? drift.derivative(t, u) : Matrix::Zero(static_cast<Eigen::Index>(modes), static_cast<Eigen::Index>(modes));
  }
  Matrix G(double t, const Vector& u) const {
    return diffusion.value ? diffusion.value(t, u) : Matrix::Zero(static_cast<Eigen::Index>(modes), static_cast<Eigen::Index>(noise_dim));
  }
  Matrix DG(double t, const Vector& u, const Vector& w) const {
    if (diffusion.additive || !diffusion.derivative)
      return Matrix::Zero(static_cast<Eigen::Index>(modes), static_cast<Eigen::Index>(noise_dim));
    return diffusion.derivative(t, u, w);
  }
  Matrix D2G(double t, const Vector& u, const Vector& w1, const Vector& w2) const {
    if (diffusion.additive || !diffusion.second_derivative)
      return Matrix::Zero(static_cast<Eigen::Index>(modes), static_cast<Eigen::Index>(noise_dim));
    return diffusion.second_derivative(t, u, w1, w2);
  }
  bool trivial() const { return !drift.value && !diffusion.value; }
};

inline Drift f_zero() { return Drift{}; }

/// F(t,u) = c u.
inline Drift f_linear(double c, std::size_t m) {
  Drift f;
  f.value = [c](double, const Vector& u) -> Vector { return c * u; };
  f.derivative = [c, m](double, const Vector&) -> Matrix {
    return c * Matrix::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  };
  f.lipschitz = std::abs(c);
  f.derivative_bound = std::abs(c);
  f.name = "linear:c=" + format_double(c);
  return f;
}

inline Diffusion g_zero() { return Diffusion{}; }

/// G(t,u) = g, a constant m x d matrix.
inline Diffusion g_additive(Matrix g) {
  require(g.allFinite(), "g_additive: coefficients must be finite");
  Diffusion out;
  out.bound = g.norm();
  out.value = [g = std::move(g)](double, const Vector&) -> Matrix { return g; };
  out.additive = true;
  out.bounded = true;
  out.name = "additive";
  return out;
}

/// G(t,u)_{kl} = g_{kl} tanh(u_k) + b_{kl} for the first p = g.rows() modes and
/// zero on the remaining m - p modes.
inline Diffusion g_tanh(Matrix g, Matrix offset, std::size_t m) {
  const auto p = g.rows(), d = g.cols();
  require(p >= 1 && static_cast<std::size_t>(p) <= m, "g_tanh: active modes must satisfy 1 <= p <= m");
  require(offset.rows() == p && offset.cols() == d, "g_tanh: offset must match g");
  require(g.allFinite() && offset.allFinite(), "g_tanh: coefficients must be finite");
  const auto me = static_cast<Eigen::Index>(m);
  Diffusion out;
  // |tanh| <= 1, |tanh'| <= 1, |tanh''| <= 4/(3 sqrt 3) < 1.
  out.bound = g.norm() + offset.norm();
  out.additive = false;
  out.bounded = true;
  out.name = "tanh";
  out.value = [g, offset, me](double, const Vector& u) -> Matrix {
    Matrix r = Matrix::Zero(me, g.cols());
    const Vector th = u.head(g.rows()).array().tanh().matrix();
    r.topRows(g.rows()) = th.asDiagonal() * g + offset;
    return r;
  };
  out.derivative = [g, me](double, const Vector& u, const Vector& w) -> Matrix {
    Matrix r = Matrix::Zero(me, g.cols());
    const Eigen::ArrayXd th = u.head(g.rows()).array().tanh();
    const Vector s = ((1.0 - th.square()) * w.head(g.rows()).array()).matrix();
    r.topRows(g.rows()) = s.asDiagonal() * g;
    return r;
  };
  out.second_derivative = [g, me](double, const Vector& u, const Vector& w1, const Vector& w2) -> Matrix {
    Matrix r = Matrix::Zero(me, g.cols());
    const Eigen::ArrayXd th = u.head(g.rows()).array().tanh();
    const Vector s = (-2.0 * th * (1.0 - th.square()) * w1.head(g.rows()).array() * w2.head(g.rows()).array()).matrix();
    r.topRows(g.rows()) = s.asDiagonal() * g;
    return r;
  };
  return out;
}

/// Per-mode weights int_{t0}^{t1} U_{t1,r} dr with xi frozen at its average
/// over the step: (1 - exp(-mu dt xibar)) / (mu xibar).
inline Vector drift_weights(const SpectralGenerator& gen, double t0, double t1) {
  require(t1 >= t0, "drift_weights: need t0 <= t1");
  const double dt = t1 - t0;
  const Vector& mu = gen.eigenvalues();
  Vector w(mu.size());
  if (dt == 0.0) return Vector::Zero(mu.size());
  const double elapsed = gen.coefficient().antiderivative(t1) - gen.coefficient().antiderivative(t0);
  for (Eigen::Index k = 0; k < mu.size(); ++k) {
    const double x = mu(k) * elapsed;
    w(k) = std::abs(x) < 1e-8 ? dt * (1.0 - 0.5 * x) : dt * (-std::expm1(-x) / x);
  }
  return w;
}

/// int_{t0}^{t1} U_{t1,r} F(t0, u) dr.
inline Vector drift_quadrature(const SpectralGenerator& gen, const Nonlinearity& nl, const Vector& u, double t0, double t1) {
  if (!nl.drift.value) return Vector::Zero(u.size());
  return drift_weights(gen, t0, t1).cwiseProduct(nl.F(t0, u));
}

/// The second-level correction sum_{j,l} DG_{.,l}(u)[G_{.,j}(u)] XX^{jl}.
inline Vector levy_correction(const Nonlinearity& nl, double t, const Vector& u, const Matrix& g, const Matrix& area) {
  Vector out = Vector::Zero(u.size());
  if (nl.diffusion.additive || !nl.diffusion.derivative) return out;
  const auto d = g.cols();
  for (Eigen::Index j = 0; j < d; ++j) {
    bool any = false;
    for (Eigen::Index l = 0; l < d; ++l) any = any || area(j, l) != 0.0;
    if (!any) continue;
    const Matrix dg = nl.DG(t, u, g.col(j));
    out.noalias() += dg * area.row(j).transpose();
  }
  return out;
}

/// One Davie step from (t0, u) over a grid interval with increments dx, area.
inline Vector davie_step(const SpectralGenerator& gen, const Nonlinearity& nl, double t0, double t1, const Vector& u,
                         const Vector& dx, const Matrix& area) {
  if (t1 == t0) return u;
  const Matrix g = nl.G(t0, u);
  Vector inner = u;
  if (nl.diffusion.value) inner.noalias() += g * dx + levy_correction(nl, t0, u, g, area);
  Vector next = gen.propagator(t1, t0).cwiseProduct(inner);
  if (nl.drift.value) next += drift_quadrature(gen, nl, u, t0, t1);
  return next;
}

struct SolveResult {
  ControlledPath path;  // u with u' = G(t, u)
  double start_time = 0;
  std::size_t steps = 0;
  std::size_t refinement_levels = 0;
};

/// Marches the mild formulation over the grid of `rp` starting at time t0
/// (grid times are t0 + t_i).
inline SolveResult solve_mild(const SpectralGenerator& gen, const Nonlinearity& nl, const RoughPath& rp, const Vector& u0,
                              double t0 = 0.0) {
  require(static_cast<std::size_t>(u0.size()) == gen.dim() && nl.modes == gen.dim(), "solve_mild: mode count mismatch");
  require(nl.noise_dim == rp.dim(), "solve_mild: noise dimension mismatch");
  require(u0.allFinite(), "solve_mild: initial value must be finite");
  const std::size_t n = rp.steps();
  const auto m = static_cast<Eigen::Index>(gen.dim());
  Matrix values(m, static_cast<Eigen::Index>(n + 1));
  std::vector<Matrix> derivs(n + 1);
  values.col(0) = u0;
  derivs[0] = nl.G(t0, u0);
  Vector u = u0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = t0 + rp.time(i), b = t0 + rp.time(i + 1);
    u = davie_step(gen, nl, a, b, u, rp.increment(i, i + 1), rp.block(i));
    if (!u.allFinite()) throw NumericalError("solve_mild: non-finite state at step " + std::to_string(i + 1));
    values.col(static_cast<Eigen::Index>(i + 1)) = u;
    derivs[i + 1] = nl.G(b, u);
  }
  return SolveResult{ControlledPath(rp.horizon(), std::move(values), std::move(derivs)), t0, n, 0};
}

/// crp_norm components of a solution over `pieces` consecutive equal blocks.
inline std::vector<CrpNorm> interval_diagnostics(const SolveResult& sol, const RoughPath& rp, const AlphaNorm& norm,
                                                 double gamma, std::size_t pieces) {
  require(pieces >= 1 && rp.steps() % pieces == 0, "interval_diagnostics: pieces must divide the step count");
  std::vector<CrpNorm> out;
  const std::size_t len = rp.steps() / pieces;
  for (std::size_t p = 0; p < pieces; ++p) out.push_back(crp_norm(sol.path, rp, norm, gamma, p * len, (p + 1) * len));
  return out;
}

/// Integrand of a rough convolution: Y_i (m x d) with Gubinelli derivative
/// Y'_i stored as m x d^2, column j*d+l holding the derivative of column l of
/// Y in direction X^j.
struct Integrand {
  std::vector<Matrix> values;
  std::vector<Matrix> derivatives;

  /// For d = 1: a controlled path (y, y') is the integrand of int U y dX.
  static Integrand from_controlled(const ControlledPath& cp) {
    require(cp.noise_dim() == 1, "Integrand: controlled path integrands need d = 1");
    Integrand it;
    for (std::size_t i = 0; i <= cp.steps(); ++i) {
      it.values.emplace_back(cp.value(i));
      it.derivatives.push_back(cp.derivative(i));
    }
    return it;
  }

  /// G(u) with derivative DG(u)[G(u)] along a solution.
  static Integrand from_solution(const Nonlinearity& nl, const SolveResult& sol, const RoughPath& rp) {
    Integrand it;
    const auto d = static_cast<Eigen::Index>(rp.dim());
    for (std::size_t i = 0; i <= sol.path.steps(); ++i) {
      const double t = sol.start_time + rp.time(i);
      const Vector u = sol.path.value(i);
      const Matrix g = nl.G(t, u);
      Matrix dy(g.rows(), d * d);
      for (Eigen::Index j = 0; j < d; ++j) {
        const Matrix dg = nl.DG(t, u, g.col(j));
        for (Eigen::Index l = 0; l < d; ++l) dy.col(j * d + l) = dg.col(l);
      }
      it.values.push_back(g);
      it.derivatives.push_back(std::move(dy));
    }
    return it;
  }
};

struct ConvolutionResult {
  Vector value;
  std::size_t levels = 0;   // dyadic levels evaluated
  double last_change = 0;   // |S_L - S_{L-1}|_a
};

/// Compensated sum sum_{[a,b] in P} U_{t,a}(Y_a dX_{a,b} + Y'_a o XX_{a,b})
/// over the grid partition `points`.
inline Vector compensated_sum(const SpectralGenerator& gen, const Integrand& y, const RoughPath& rp,
                              const std::vector<std::size_t>& points, double t_end, double t0) {
  const auto d = static_cast<Eigen::Index>(rp.dim());
  Vector acc = Vector::Zero(y.values.front().rows());
  for (std::size_t q = 0; q + 1 < points.size(); ++q) {
    const std::size_t a = points[q], b = points[q + 1];
    Vector local = y.values[a] * rp.increment(a, b);
    const Matrix area = rp.area(a, b);
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index l = 0; l < d; ++l) local += y.derivatives[a].col(j * d + l) * area(j, l);
    acc += apply_U(gen, t_end, t0 + rp.time(a), local);
  }
  return acc;
}

/// int_s^t U_{t,r} Y_r dX_r for grid indices s < t, by dyadic refinement of the
/// partition until successive levels differ by less than `tol` in `norm`.
inline ConvolutionResult rough_convolution(const SpectralGenerator& gen, const Integrand& y, const RoughPath& rp,
                                           std::size_t s, std::size_t t, double tol, const AlphaNorm& norm,
                                           double t0 = 0.0) {
  require(s < t && t <= rp.steps(), "rough_convolution: need s < t inside the grid");
  require(y.values.size() == rp.steps() + 1 && y.derivatives.size() == rp.steps() + 1,
          "rough_convolution: integrand and rough path grids differ");
  require(tol > 0, "rough_convolution: tolerance must be positive");
  const std::size_t n = t - s;
  const double t_end = t0 + rp.time(t);
  ConvolutionResult res;
  Vector prev;
  for (std::size_t parts = 1;; parts = std::min(2 * parts, n)) {
    std::vector<std::size_t> pts(parts + 1);
    for (std::size_t k = 0; k <= parts; ++k) pts[k] = s + (k * n) / parts;
    Vector cur = compensated_sum(gen, y, rp, pts, t_end, t0);
    ++res.levels;
    if (res.levels > 1) {
      res.last_change = norm(cur - prev);
      if (res.last_change < tol) {
        res.value = std::move(cur);
        return res;
      }
    }
    if (parts == n) {
      if (res.levels == 1) {
        res.value = std::move(cur);
        return res;
      }
      throw NumericalError("rough_convolution: no convergence on the grid; last two levels " + format_double(norm(prev)) +
                           " and " + format_double(norm(cur)) + " differ by " + format_double(res.last_change));
    }
    prev = std::move(cur);
  }
}

struct ConvergenceStudy {
  std::vector<std::size_t> steps;  // per level
  std::vector<double> errors;      // |u_T(level) - u_T(reference)|_a
  double order = std::numeric_limits<double>::quiet_NaN();
  bool monotone = false;
  bool exact = false;  // every level matches the reference to rounding
};

/// Solves on each coarsening of `rp` (step counts in `steps`, each dividing
/// rp.steps() and smaller than it) and compares terminal states against the
/// solution on the native grid of `rp`.
inline ConvergenceStudy convergence_study(const SpectralGenerator& gen, const Nonlinearity& nl, const RoughPath& rp,
                                          const Vector& u0, std::vector<std::size_t> steps, const AlphaNorm& norm) {
  if (steps.size() < 3) throw InvalidArgument("convergence_study: need at least three grid levels");
  std::sort(steps.begin(), steps.end());
  for (const auto n : steps)
    require(n >= 1 && n < rp.steps() && rp.steps() % n == 0,
            "convergence_study: each level must be a proper divisor grid of the driver");
  const Vector ref = solve_mild(gen, nl, rp, u0).path.value(rp.steps());
  ConvergenceStudy out;
  out.steps = steps;
  for (const auto n : steps) {
    const RoughPath coarse = rp.restrict(rp.steps() / n);
    out.errors.push_back(norm(solve_mild(gen, nl, coarse, u0).path.value(n) - ref));
  }
  const double scale = std::max(1.0, norm(ref));
  out.exact = std::all_of(out.errors.begin(), out.errors.end(), [&](double e) { return e <= 1e-14 * scale; });
  if (out.exact) {
    out.monotone = true;
    out.order = std::numeric_limits<double>::infinity();
    return out;
  }
  out.monotone = true;
  for (std::size_t i = 1; i < out.errors.size(); ++i) out.monotone = out.monotone && out.errors[i] < out.errors[i - 1];
  std::vector<double> h;
  for (const auto n : steps) h.push_back(rp.horizon() / static_cast<double>(n));
  if (std::all_of(out.errors.begin(), out.errors.end(), [](double e) { return e > 0; })) out.order = loglog_slope(h, out.errors);
  return out;
}

}  // namespace rpde
