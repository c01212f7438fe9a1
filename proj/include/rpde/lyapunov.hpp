#pragma once

// First variation of the Davie scheme, weighted volumes and Benettin-type
// estimation of Lyapunov exponents in E_alpha norms.

#include <Eigen/QR>

#include <optional>
#include <random>

#include "rpde/driver.hpp"
#include "rpde/solver.hpp"

namespace rpde {

/// Derivative of davie_step with respect to the state at `u`, applied to the
/// columns of `v`:
///   P (v + DG(u)[v] dX + sum_{j,l} (D2G_l(u)[G_j, v] + DG_l(u)[DG_j(u)[v]]) XX^{jl}) + W DF(u) v.
inline Matrix linearize_step(const SpectralGenerator& gen, const Nonlinearity& nl, double t0, double t1, const Vector& u,
                             const Matrix& v, const Vector& dx, const Matrix& area) {
  if (t1 == t0) return v;
  const Vector prop = gen.propagator(t1, t0);
  Matrix inner = v;
  if (!nl.diffusion.additive && nl.diffusion.derivative) {
    const Matrix g = nl.G(t0, u);
    const auto d = g.cols();
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      const Vector w = v.col(c);
      const Matrix dgw = nl.DG(t0, u, w);
      Vector add = dgw * dx;
      for (Eigen::Index j = 0; j < d; ++j) {
        const Matrix second = nl.D2G(t0, u, g.col(j), w) + nl.DG(t0, u, dgw.col(j));
        add.noalias() += second * area.row(j).transpose();
      }
      inner.col(c) += add;
    }
  }
  Matrix out = prop.asDiagonal() * inner;
  if (nl.drift.derivative) out.noalias() += drift_weights(gen, t0, t1).asDiagonal() * (nl.DF(t0, u) * v);
  return out;
}

/// Tangent flow along the solution from u0 over the whole grid of `rp`.
inline Matrix linearize_path(const SpectralGenerator& gen, const Nonlinearity& nl, const RoughPath& rp, const Vector& u0,
                             Matrix v, double t0 = 0.0) {
  Vector u = u0;
  for (std::size_t i = 0; i < rp.steps(); ++i) {
    const double a = t0 + rp.time(i), b = t0 + rp.time(i + 1);
    const Vector dx = rp.increment(i, i + 1);
    const Matrix area = rp.block(i);
    v = linearize_step(gen, nl, a, b, u, v, dx, area);
    u = davie_step(gen, nl, a, b, u, dx, area);
    if (!v.allFinite()) throw NumericalError("linearize_path: non-finite tangent at step " + std::to_string(i + 1));
  }
  return v;
}

namespace detail {

inline Matrix weighted(const Matrix& vectors, const AlphaNorm& norm) {
  require(static_cast<std::size_t>(vectors.rows()) == norm.dim(), "volume: dimension mismatch");
  return norm.weights().asDiagonal() * vectors;
}

}  // namespace detail

/// Vol(x_1..x_k) = |x_1|_a prod_{i>=2} dist_a(x_i, span(x_1..x_{i-1})) for the
/// columns of `vectors`; zero for dependent sets.
inline double volume(const Matrix& vectors, const AlphaNorm& norm) {
  require(vectors.allFinite(), "volume: vectors must be finite");
  require(vectors.cols() >= 1 && vectors.cols() <= vectors.rows(), "volume: need 1 <= k <= m");
  const Matrix w = detail::weighted(vectors, norm);
  Eigen::ColPivHouseholderQR<Matrix> qr(w);
  if (qr.rank() < w.cols()) return 0.0;
  return std::abs(qr.matrixQR().diagonal().prod());
}

/// log sqrt det of the weighted Gram matrix.
inline double log_volume_gram(const Matrix& vectors, const AlphaNorm& norm) {
  const Matrix w = detail::weighted(vectors, norm);
  const Matrix gram = w.transpose() * w;
  Eigen::LDLT<Matrix> ldlt(gram);
  const Vector dvals = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || (dvals.array() <= 0).any()) return -std::numeric_limits<double>::infinity();
  return 0.5 * dvals.array().log().sum();
}

enum class EnsembleInit { basis, random };

struct LyapunovProblem {
  SpectralGenerator gen;
  Nonlinearity nl;
  Vector u0;
  DriverSpec driver;
  double step = 0.01;     // solver step
  double burn_in = 0.0;   // base trajectory settles over [-burn_in, 0]
  EnsembleInit init = EnsembleInit::basis;
};

struct LyapunovOptions {
  std::size_t k = 1;
  double horizon = 100;
  std::size_t renorm_every = 10;
  double alpha = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> order;  // optional permutation of the initial ensemble
};

struct ExponentCluster {
  double value;
  std::size_t multiplicity;
};

struct LyapunovEstimate {
  std::vector<double> exponents;             // sorted nonincreasing
  std::vector<double> times;                 // checkpoint times
  std::vector<std::vector<double>> running;  // sorted running exponents per checkpoint
  std::vector<double> log_volume;            // log Vol of the rescaled ensemble per checkpoint
  double exponent_sum = 0;
  double volume_slope = 0;                   // least-squares slope of log_volume
  std::vector<ExponentCluster> clusters;
  double alpha = 0;
};

inline std::vector<ExponentCluster> cluster_exponents(const std::vector<double>& sorted, double gap = 0.05) {
  std::vector<ExponentCluster> out;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= sorted.size(); ++i) {
    if (i == sorted.size() || sorted[i - 1] - sorted[i] >= gap) {
      double mean = 0;
      for (std::size_t j = start; j < i; ++j) mean += sorted[j];
      out.push_back({mean / static_cast<double>(i - start), i - start});
      start = i;
    }
  }
  return out;
}

namespace detail {

inline std::size_t count_steps(double horizon, double step, const char* what) {
  const double r = horizon / step;
  const auto n = static_cast<std::size_t>(std::llround(r));
  if (std::abs(r - static_cast<double>(n)) > 1e-9 * std::max(1.0, r))
    throw InvalidArgument(std::string(what) + " must be a multiple of the solver step");
  return n;
}

inline Matrix initial_ensemble(const LyapunovProblem& p, const LyapunovOptions& o) {
  const auto m = static_cast<Eigen::Index>(p.gen.dim());
  const auto k = static_cast<Eigen::Index>(o.k);
  Matrix v(m, k);
  if (p.init == EnsembleInit::basis) {
    v = Matrix::Identity(m, k);
  } else {
    std::seed_seq seq{static_cast<std::uint32_t>(o.seed), static_cast<std::uint32_t>(o.seed >> 32), 0x7a11u};
    std::mt19937_64 gen(seq);
    std::normal_distribution<double> normal;
    for (Eigen::Index c = 0; c < k; ++c)
      for (Eigen::Index r = 0; r < m; ++r) v(r, c) = normal(gen);
  }
  if (!o.order.empty()) {
    require(o.order.size() == o.k, "lyapunov_spectrum: ensemble order must be a permutation of size k");
    Matrix perm(m, k);
    for (std::size_t c = 0; c < o.k; ++c) {
      require(o.order[c] < o.k, "lyapunov_spectrum: invalid ensemble order");
      perm.col(static_cast<Eigen::Index>(c)) = v.col(static_cast<Eigen::Index>(o.order[c]));
    }
    v = perm;
  }
  return v;
}

}  // namespace detail

/// Runs the base trajectory through the burn-in, then propagates a k-vector
/// tangent ensemble for `horizon` time units, orthonormalising in the
/// E_alpha inner product every `renorm_every` steps.
inline LyapunovEstimate lyapunov_spectrum(const LyapunovProblem& p, const LyapunovOptions& o) {
  const std::size_t m = p.gen.dim();
  require(o.k >= 1 && o.k <= m, "lyapunov_spectrum: need 1 <= k <= m");
  require(o.horizon > 0 && p.step > 0 && p.burn_in >= 0, "lyapunov_spectrum: horizon and step must be positive");
  require(o.renorm_every >= 1, "lyapunov_spectrum: renorm_every must be positive");
  const std::size_t n_burn = p.burn_in > 0 ? detail::count_steps(p.burn_in, p.step, "burn-in") : 0;
  const std::size_t n_run = detail::count_steps(o.horizon, p.step, "horizon");
  require(n_run >= o.renorm_every, "lyapunov_spectrum: horizon shorter than the renormalisation interval");
  const double total = p.burn_in + o.horizon;
  const RoughPath rp = make_driver(p.driver, total, n_burn + n_run, o.seed, p.nl.noise_dim);
  const AlphaNorm norm = p.gen.norm(o.alpha);
  const Vector& w = norm.weights();

  Vector u = p.u0;
  // Grid time i corresponds to physical time t_i - burn_in.
  auto time_of = [&](std::size_t i) { return rp.time(i) - p.burn_in; };
  for (std::size_t i = 0; i < n_burn; ++i) {
    u = davie_step(p.gen, p.nl, time_of(i), time_of(i + 1), u, rp.increment(i, i + 1), rp.block(i));
    if (!u.allFinite()) throw NumericalError("lyapunov_spectrum: base trajectory blew up at step " + std::to_string(i + 1));
  }

  Matrix v = detail::initial_ensemble(p, o);
  std::vector<double> sums(o.k, 0.0);
  double log_vol = 0.0;
  LyapunovEstimate est;
  est.alpha = o.alpha;

  auto renormalise = [&](std::size_t step_index) {
    log_vol += log_volume_gram(v, norm);
    const Matrix scaled = w.asDiagonal() * v;
    Eigen::HouseholderQR<Matrix> qr(scaled);
    const Matrix r = qr.matrixQR().topRows(static_cast<Eigen::Index>(o.k)).triangularView<Eigen::Upper>();
    Matrix q = qr.householderQ() * Matrix::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(o.k));
    for (std::size_t c = 0; c < o.k; ++c) {
      const double rc = r(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c));
      if (!(std::abs(rc) > 0) || !std::isfinite(rc))
        throw NumericalError("lyapunov_spectrum: tangent ensemble lost rank at step " + std::to_string(step_index));
      sums[c] += std::log(std::abs(rc));
      if (rc < 0) q.col(static_cast<Eigen::Index>(c)) *= -1.0;
    }
    v = w.cwiseInverse().asDiagonal() * q;
  };

  renormalise(0);
  // The initial normalisation is not part of the growth.
  std::fill(sums.begin(), sums.end(), 0.0);
  log_vol = 0.0;
  est.times.push_back(0.0);
  est.log_volume.push_back(0.0);
  est.running.emplace_back(o.k, 0.0);

  for (std::size_t s = 0; s < n_run; ++s) {
    const std::size_t i = n_burn + s;
    const double a = time_of(i), b = time_of(i + 1);
    const Vector dx = rp.increment(i, i + 1);
    const Matrix area = rp.block(i);
    v = linearize_step(p.gen, p.nl, a, b, u, v, dx, area);
    u = davie_step(p.gen, p.nl, a, b, u, dx, area);
    if (!u.allFinite() || !v.allFinite())
      throw NumericalError("lyapunov_spectrum: non-finite state at step " + std::to_string(s + 1));
    if ((s + 1) % o.renorm_every == 0 || s + 1 == n_run) {
      renormalise(s + 1);
      const double t = b;
      std::vector<double> run(o.k);
      for (std::size_t c = 0; c < o.k; ++c) run[c] = sums[c] / t;
      std::sort(run.begin(), run.end(), std::greater<>());
      est.times.push_back(t);
      est.log_volume.push_back(log_vol);
      est.running.push_back(std::move(run));
    }
  }
  est.exponents = est.running.back();
  for (const double l : est.exponents) est.exponent_sum += l;
  est.volume_slope = fit_line(est.times, est.log_volume).slope;
  est.clusters = cluster_exponents(est.exponents);
  return est;
}

struct NormIndependence {
  std::vector<double> horizons;
  std::vector<double> deviations;  // max_{i, a, a'} |lambda_i(a) - lambda_i(a')| at each horizon
  std::vector<LyapunovEstimate> spectra;
};

/// Spectra for each alpha on the same driver; deviations are read off the
/// running exponents at each of `horizons` (the largest one is the run length).
inline NormIndependence norm_independence_check(const LyapunovProblem& p, LyapunovOptions o, const std::vector<double>& alphas,
                                                std::vector<double> horizons, unsigned jobs = 1) {
  require(alphas.size() >= 2, "norm_independence_check: need at least two values of alpha");
  require(!horizons.empty(), "norm_independence_check: need at least one horizon");
  std::sort(horizons.begin(), horizons.end());
  o.horizon = horizons.back();
  NormIndependence out;
  out.horizons = horizons;
  out.spectra.resize(alphas.size());
  parallel_for(alphas.size(), jobs, [&](std::size_t a) {
    LyapunovOptions oa = o;
    oa.alpha = alphas[a];
    out.spectra[a] = lyapunov_spectrum(p, oa);
  });
  for (const double h : horizons) {
    const auto& times = out.spectra.front().times;
    const auto it = std::find_if(times.begin(), times.end(), [&](double t) { return std::abs(t - h) <= 1e-9 * std::max(1.0, h); });
    if (it == times.end()) throw InvalidArgument("norm_independence_check: horizon is not a renormalisation checkpoint");
    const auto idx = static_cast<std::size_t>(it - times.begin());
    double dev = 0;
    for (std::size_t a = 0; a < alphas.size(); ++a)
      for (std::size_t b = a + 1; b < alphas.size(); ++b)
        for (std::size_t i = 0; i < o.k; ++i)
          dev = std::max(dev, std::abs(out.spectra[a].running[idx][i] - out.spectra[b].running[idx][i]));
    out.deviations.push_back(dev);
  }
  return out;
}

struct DecayReport {
  bool skipped = false;
  std::string notice;
  double rate = std::numeric_limits<double>::quiet_NaN();  // fitted slope of log|phi(x) - phi(y)|_a
  double fit_end = 0;                                      // last time inside the fit window
  std::vector<double> times, log_differences;
};

/// Propagates x and y with the same driver over [0, horizon] and fits the
/// separation rate. The window ends once the separation has shrunk by 1e-12
/// relative to its initial value.
inline DecayReport decay_check(const LyapunovProblem& p, const Vector& x, const Vector& y, double horizon, double alpha,
                               std::uint64_t seed) {
  require(x.size() == y.size() && static_cast<std::size_t>(x.size()) == p.gen.dim(), "decay_check: dimension mismatch");
  DecayReport rep;
  const AlphaNorm norm = p.gen.norm(alpha);
  const double d0 = norm(x - y);
  if (d0 == 0.0) {
    rep.skipped = true;
    rep.notice = "x equals y: the separation vanishes identically, no rate to fit";
    return rep;
  }
  const std::size_t n = detail::count_steps(horizon, p.step, "horizon");
  const RoughPath rp = make_driver(p.driver, horizon, n, seed, p.nl.noise_dim);
  Vector a = x, b = y;
  rep.times.push_back(0.0);
  rep.log_differences.push_back(std::log(d0));
  const double floor = d0 * 1e-12;
  for (std::size_t i = 0; i < n; ++i) {
    const Vector dx = rp.increment(i, i + 1);
    const Matrix area = rp.block(i);
    a = davie_step(p.gen, p.nl, rp.time(i), rp.time(i + 1), a, dx, area);
    b = davie_step(p.gen, p.nl, rp.time(i), rp.time(i + 1), b, dx, area);
    const double diff = norm(a - b);
    if (!(diff > floor)) break;
    rep.times.push_back(rp.time(i + 1));
    rep.log_differences.push_back(std::log(diff));
  }
  if (rep.times.size() < 3) throw NumericalError("decay_check: separation underflowed before the fit window; shrink the step");
  rep.fit_end = rep.times.back();
  rep.rate = fit_line(rep.times, rep.log_differences).slope;
  return rep;
}

}  // namespace rpde
