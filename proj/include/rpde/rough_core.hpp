#pragma once

// Discrete rough paths and controlled paths on uniform grids.
//
// Second-level increments are stored for adjacent grid intervals only; the
// value over an arbitrary pair of grid points is rebuilt with Chen's relation
//   XX_{s,t} = XX_{s,u} + XX_{u,t} + dX_{s,u} (x) dX_{u,t}.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "rpde/numerics.hpp"

namespace rpde {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Fractional-power norm |x|_a = (sum_k mu_k^{2a} x_k^2)^{1/2} on the
/// Galerkin coordinates.
class AlphaNorm {
 public:
  AlphaNorm(Vector eigenvalues, double alpha) : mu_(std::move(eigenvalues)), alpha_(alpha) {
    require(mu_.size() > 0, "AlphaNorm: empty eigenvalue array");
    for (Eigen::Index k = 0; k < mu_.size(); ++k) {
      require(mu_[k] > 0 && std::isfinite(mu_[k]), "AlphaNorm: eigenvalues must be positive");
      if (k > 0) require(mu_[k] >= mu_[k - 1], "AlphaNorm: eigenvalues must be nondecreasing");
    }
    weights_ = mu_.array().pow(alpha_).matrix();
  }

  /// Plain Euclidean norm in dimension m (all weights one).
  static AlphaNorm euclidean(std::size_t m) { return AlphaNorm(Vector::Ones(static_cast<Eigen::Index>(m)), 0.0); }

  double alpha() const { return alpha_; }
  std::size_t dim() const { return static_cast<std::size_t>(mu_.size()); }
  const Vector& eigenvalues() const { return mu_; }
  const Vector& weights() const { return weights_; }

  AlphaNorm shifted(double by) const { return AlphaNorm(mu_, alpha_ + by); }

  template <class Derived>
  double operator()(const Eigen::MatrixBase<Derived>& x) const {
    // Columns are treated as separate vectors; the result is the weighted
    // Frobenius norm, which reduces to |x|_a for a single column.
    return (weights_.asDiagonal() * x).norm();
  }

 private:
  Vector mu_;
  double alpha_;
  Vector weights_;
};

/// Path sampled on t_i = i T / n, stored column-wise (dim x (n+1)).
class GridPath {
 public:
  GridPath(double horizon, Matrix values) : horizon_(horizon), data_(std::move(values)) {
    require(horizon_ > 0 && std::isfinite(horizon_), "GridPath: horizon must be positive");
    require(data_.cols() >= 2, "GridPath: need at least one step");
    require(data_.rows() >= 1, "GridPath: dimension must be positive");
    require(data_.allFinite(), "GridPath: values must be finite");
    require(data_.col(0).isZero(0.0), "GridPath: path must start at zero");
  }

  std::size_t steps() const { return static_cast<std::size_t>(data_.cols() - 1); }
  std::size_t dim() const { return static_cast<std::size_t>(data_.rows()); }
  double horizon() const { return horizon_; }
  double step() const { return horizon_ / static_cast<double>(steps()); }
  double time(std::size_t i) const { return horizon_ * static_cast<double>(i) / static_cast<double>(steps()); }

  const Matrix& values() const { return data_; }
  Matrix::ConstColXpr operator[](std::size_t i) const { return data_.col(static_cast<Eigen::Index>(i)); }
  Vector increment(std::size_t i, std::size_t j) const { return (*this)[j] - (*this)[i]; }

  /// Keeps every `factor`-th sample.
  GridPath restrict(std::size_t factor) const {
    require(factor >= 1 && steps() % factor == 0, "GridPath::restrict: factor must divide the step count");
    const std::size_t n = steps() / factor;
    Matrix out(data_.rows(), static_cast<Eigen::Index>(n + 1));
    for (std::size_t i = 0; i <= n; ++i) out.col(static_cast<Eigen::Index>(i)) = (*this)[i * factor];
    return GridPath(horizon_, std::move(out));
  }

 private:
  double horizon_;
  Matrix data_;
};

/// A grid path together with its second-level increments on adjacent grid
/// intervals. `blocks` has d*d rows and n columns; column i holds
/// XX_{t_i,t_{i+1}} in row-major order (entry j*d+l is XX^{jl}).
class RoughPath {
 public:
  RoughPath(GridPath base, Matrix blocks, double gamma)
      : base_(std::move(base)), blocks_(std::move(blocks)), gamma_(gamma) {
    const auto d = static_cast<Eigen::Index>(base_.dim());
    require(blocks_.rows() == d * d, "RoughPath: block rows must equal d*d");
    require(static_cast<std::size_t>(blocks_.cols()) == base_.steps(), "RoughPath: one block per grid interval");
    require(blocks_.allFinite(), "RoughPath: second level must be finite");
    require(gamma_ > 1.0 / 3.0 && gamma_ <= 0.5, "RoughPath: gamma must lie in (1/3, 1/2]");
  }

  const GridPath& base() const { return base_; }
  double gamma() const { return gamma_; }
  std::size_t steps() const { return base_.steps(); }
  std::size_t dim() const { return base_.dim(); }
  double horizon() const { return base_.horizon(); }
  double step() const { return base_.step(); }
  double time(std::size_t i) const { return base_.time(i); }
  const Matrix& blocks() const { return blocks_; }

  Vector increment(std::size_t i, std::size_t j) const { return base_.increment(i, j); }

  /// XX over the adjacent interval [t_i, t_{i+1}] as a d x d matrix.
  Matrix block(std::size_t i) const {
    const auto d = static_cast<Eigen::Index>(dim());
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    return Eigen::Map<const RowMajor>(blocks_.col(static_cast<Eigen::Index>(i)).data(), d, d);
  }

  /// XX_{t_i,t_j} rebuilt from adjacent blocks with Chen's relation.
  Matrix area(std::size_t i, std::size_t j) const {
    require(i <= j && j <= steps(), "RoughPath::area: index out of range");
    const auto d = static_cast<Eigen::Index>(dim());
    Matrix acc = Matrix::Zero(d, d);
    for (std::size_t k = i; k < j; ++k) {
      acc += block(k);
      acc.noalias() += increment(i, k) * increment(k, k + 1).transpose();
    }
    return acc;
  }

  /// Coarse rough path on every `factor`-th grid point.
  RoughPath restrict(std::size_t factor) const {
    require(factor >= 1 && steps() % factor == 0, "RoughPath::restrict: factor must divide the step count");
    const std::size_t n = steps() / factor;
    Matrix out(blocks_.rows(), static_cast<Eigen::Index>(n));
    const auto d = static_cast<Eigen::Index>(dim());
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    for (std::size_t c = 0; c < n; ++c) {
      RowMajor a = area(c * factor, (c + 1) * factor);
      out.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Vector>(a.data(), d * d);
    }
    return RoughPath(base_.restrict(factor), std::move(out), gamma_);
  }

  /// The rough path over [t_from, t_to], re-based to start at time zero and
  /// value zero.
  RoughPath slice(std::size_t from, std::size_t to) const {
    require(from < to && to <= steps(), "RoughPath::slice: invalid range");
    const auto n = static_cast<Eigen::Index>(to - from);
    Matrix vals(base_.values().rows(), n + 1);
    for (Eigen::Index i = 0; i <= n; ++i) vals.col(i) = increment(from, from + static_cast<std::size_t>(i));
    Matrix b = blocks_.middleCols(static_cast<Eigen::Index>(from), n);
    return RoughPath(GridPath(time(to) - time(from), std::move(vals)), std::move(b), gamma_);
  }

 private:
  GridPath base_;
  Matrix blocks_;
  double gamma_;
};

/// Path with Galerkin values y (m x (n+1)) and Gubinelli derivatives y'
/// (one m x d matrix per grid point).
class ControlledPath {
 public:
  ControlledPath(double horizon, Matrix values, std::vector<Matrix> gubinelli)
      : horizon_(horizon), values_(std::move(values)), gubinelli_(std::move(gubinelli)) {
    require(horizon_ > 0, "ControlledPath: horizon must be positive");
    require(values_.cols() >= 2, "ControlledPath: need at least one step");
    require(gubinelli_.size() == static_cast<std::size_t>(values_.cols()),
            "ControlledPath: one Gubinelli derivative per grid point");
    for (const auto& g : gubinelli_)
      require(g.rows() == values_.rows() && g.cols() == gubinelli_.front().cols(),
              "ControlledPath: inconsistent Gubinelli derivative shape");
  }

  std::size_t steps() const { return static_cast<std::size_t>(values_.cols() - 1); }
  std::size_t dim() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t noise_dim() const { return static_cast<std::size_t>(gubinelli_.front().cols()); }
  double horizon() const { return horizon_; }

  const Matrix& values() const { return values_; }
  Matrix::ConstColXpr value(std::size_t i) const { return values_.col(static_cast<Eigen::Index>(i)); }
  const Matrix& derivative(std::size_t i) const { return gubinelli_[i]; }
  const std::vector<Matrix>& derivatives() const { return gubinelli_; }

  bool shares_grid(const RoughPath& rp) const {
    return rp.steps() == steps() && rp.dim() == noise_dim() && std::abs(rp.horizon() - horizon_) <= 1e-12 * horizon_;
  }

  /// R^y_{s,t} = dy_{s,t} - y'_s dX_{s,t}.
  Vector remainder(const RoughPath& rp, std::size_t i, std::size_t j) const {
    return value(j) - value(i) - gubinelli_[i] * rp.increment(i, j);
  }

 private:
  double horizon_;
  Matrix values_;
  std::vector<Matrix> gubinelli_;
};

/// Which grid pairs a Hoelder scan visits. `exact` visits all O(n^2) pairs;
/// `dyadic` only visits pairs (i, i + 2^k) and therefore under-estimates the
/// seminorm; `automatic` switches to `dyadic` above 8192 steps.
enum class PairScan { exact, dyadic, automatic };

namespace detail {

inline bool use_dyadic(PairScan mode, std::size_t n) {
  return mode == PairScan::dyadic || (mode == PairScan::automatic && n > 8192);
}

template <class Visit>
void for_each_pair(std::size_t from, std::size_t to, bool dyadic, Visit&& visit) {
  if (!dyadic) {
    for (std::size_t i = from; i < to; ++i)
      for (std::size_t j = i + 1; j <= to; ++j) visit(i, j);
    return;
  }
  for (std::size_t len = 1; len <= to - from; len *= 2)
    for (std::size_t i = from; i + len <= to; ++i) visit(i, i + len);
}

}  // namespace detail

/// max over grid pairs s<t in [from, to] of |x_t - x_s|_a / (t-s)^gamma, for
/// samples stored column-wise with spacing dt.
inline double holder_seminorm(const Matrix& samples, double dt, double gamma, const AlphaNorm& norm,
                              std::size_t from, std::size_t to, PairScan mode = PairScan::automatic) {
  require(samples.cols() >= 1, "holder_seminorm: empty path");
  require(gamma > 0 && gamma <= 1, "holder_seminorm: gamma must lie in (0,1]");
  require(from <= to && to < static_cast<std::size_t>(samples.cols()), "holder_seminorm: index out of range");
  require(norm.dim() == static_cast<std::size_t>(samples.rows()), "holder_seminorm: norm dimension mismatch");
  const Matrix weighted = norm.weights().asDiagonal() * samples;
  double best = 0.0;
  detail::for_each_pair(from, to, detail::use_dyadic(mode, to - from), [&](std::size_t i, std::size_t j) {
    const double inc = (weighted.col(static_cast<Eigen::Index>(j)) - weighted.col(static_cast<Eigen::Index>(i))).norm();
    best = std::max(best, inc / std::pow(dt * static_cast<double>(j - i), gamma));
  });
  return best;
}

inline double holder_seminorm(const GridPath& path, double gamma, const AlphaNorm& norm) {
  return holder_seminorm(path.values(), path.step(), gamma, norm, 0, path.steps());
}

inline double holder_seminorm(const GridPath& path, double gamma) {
  return holder_seminorm(path, gamma, AlphaNorm::euclidean(path.dim()));
}

/// [XX]_{exponent,[t_from,t_to]} in the Frobenius norm, pairs rebuilt by Chen.
inline double area_seminorm(const RoughPath& rp, double exponent, std::size_t from, std::size_t to,
                            PairScan mode = PairScan::automatic) {
  require(from <= to && to <= rp.steps(), "area_seminorm: index out of range");
  const auto d = static_cast<Eigen::Index>(rp.dim());
  const double dt = rp.step();
  double best = 0.0;
  if (!detail::use_dyadic(mode, to - from)) {
    Matrix acc(d, d);
    for (std::size_t i = from; i < to; ++i) {
      acc.setZero();
      for (std::size_t j = i + 1; j <= to; ++j) {
        acc += rp.block(j - 1);
        acc.noalias() += rp.increment(i, j - 1) * rp.increment(j - 1, j).transpose();
        best = std::max(best, acc.norm() / std::pow(dt * static_cast<double>(j - i), exponent));
      }
    }
    return best;
  }
  detail::for_each_pair(from, to, true, [&](std::size_t i, std::size_t j) {
    best = std::max(best, rp.area(i, j).norm() / std::pow(dt * static_cast<double>(j - i), exponent));
  });
  return best;
}

/// XX_{i,j} - XX_{i,k} - XX_{k,j} - dX_{i,k} (x) dX_{k,j}.
inline Matrix chen_defect(const RoughPath& rp, std::size_t i, std::size_t k, std::size_t j) {
  if (!(i <= k && k <= j && j <= rp.steps())) throw InvalidArgument("chen_defect: index out of range");
  return rp.area(i, j) - rp.area(i, k) - rp.area(k, j) - rp.increment(i, k) * rp.increment(k, j).transpose();
}

/// rho_{gamma,[s,t]} = 1 + [X]_gamma + [XX]_{2 gamma} over grid indices [from, to].
inline double rho_gamma(const RoughPath& rp, std::size_t from, std::size_t to, PairScan mode = PairScan::automatic) {
  if (!(from < to && to <= rp.steps())) throw InvalidArgument("rho_gamma: need s < t inside the grid");
  const double g = rp.gamma();
  return 1.0 + holder_seminorm(rp.base().values(), rp.step(), g, AlphaNorm::euclidean(rp.dim()), from, to, mode) +
         area_seminorm(rp, 2.0 * g, from, to, mode);
}

inline double rho_gamma(const RoughPath& rp) { return rho_gamma(rp, 0, rp.steps()); }

/// The control W_{X,gamma,eta}(t_from, t_to): supremum over grid partitions of
///   sum (v-u)^{-eta/(gamma-eta)} [ |dX_{u,v}|^{1/(gamma-eta)} + |XX_{u,v}|^{1/(2(gamma-eta))} ],
/// computed exactly by dynamic programming over partition end points.
inline double control_W(const RoughPath& rp, double gamma, double eta, std::size_t from, std::size_t to) {
  if (!(eta >= 0 && eta < gamma)) throw InvalidArgument("control_W: need 0 <= eta < gamma");
  if (!(from < to && to <= rp.steps())) throw InvalidArgument("control_W: need s < t inside the grid");
  const double gap = gamma - eta;
  const double p_time = -eta / gap, p_path = 1.0 / gap, p_area = 1.0 / (2.0 * gap);
  const auto d = static_cast<Eigen::Index>(rp.dim());
  const double dt = rp.step();
  const std::size_t n = to - from;
  std::vector<double> best(n + 1, -std::numeric_limits<double>::infinity());
  best[0] = 0.0;
  Matrix acc(d, d);
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t i = from + a;
    acc.setZero();
    for (std::size_t b = a + 1; b <= n; ++b) {
      const std::size_t j = from + b;
      acc += rp.block(j - 1);
      acc.noalias() += rp.increment(i, j - 1) * rp.increment(j - 1, j).transpose();
      const double c = std::pow(dt * static_cast<double>(b - a), p_time) *
                       (std::pow(rp.increment(i, j).norm(), p_path) + std::pow(acc.norm(), p_area));
      best[b] = std::max(best[b], best[a] + c);
    }
  }
  return best[n];
}

/// The five terms of the controlled rough path norm.
struct CrpNorm {
  double sup_value = 0;          // ||y||_{inf,a}
  double sup_derivative = 0;     // ||y'||_{inf,a-g}
  double holder_derivative = 0;  // [y']_{g,a-2g}
  double holder_remainder = 0;   // [R^y]_{g,a-g}
  double holder_remainder2 = 0;  // [R^y]_{2g,a-2g}
  double total() const { return sup_value + sup_derivative + holder_derivative + holder_remainder + holder_remainder2; }
};

/// ||y,y'||_{D^gamma_{X,alpha}} over grid indices [from, to]; `norm` carries
/// the eigenvalues and the space index alpha.
inline CrpNorm crp_norm(const ControlledPath& cp, const RoughPath& rp, const AlphaNorm& norm, double gamma,
                        std::size_t from, std::size_t to, PairScan mode = PairScan::automatic) {
  if (!cp.shares_grid(rp)) throw InvalidArgument("crp_norm: controlled path and rough path grids differ");
  require(norm.dim() == cp.dim(), "crp_norm: norm dimension mismatch");
  require(from < to && to <= cp.steps(), "crp_norm: invalid index range");
  const AlphaNorm n1 = norm.shifted(-gamma), n2 = norm.shifted(-2.0 * gamma);
  const auto& w1 = n1.weights();
  const auto& w2 = n2.weights();
  const Matrix y1 = w1.asDiagonal() * cp.values();
  const Matrix y2 = w2.asDiagonal() * cp.values();
  std::vector<Matrix> p1(cp.steps() + 1), p2(cp.steps() + 1);
  CrpNorm out;
  for (std::size_t i = from; i <= to; ++i) {
    p1[i] = w1.asDiagonal() * cp.derivative(i);
    p2[i] = w2.asDiagonal() * cp.derivative(i);
    out.sup_value = std::max(out.sup_value, norm(cp.value(i)));
    out.sup_derivative = std::max(out.sup_derivative, p1[i].norm());
  }
  const double dt = rp.step();
  const Matrix& x = rp.base().values();
  detail::for_each_pair(from, to, detail::use_dyadic(mode, to - from), [&](std::size_t i, std::size_t j) {
    const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
    const double h = dt * static_cast<double>(j - i);
    const double hg = std::pow(h, gamma);
    const Vector dx = x.col(jj) - x.col(ii);
    out.holder_derivative = std::max(out.holder_derivative, (p2[j] - p2[i]).norm() / hg);
    const double r1 = (y1.col(jj) - y1.col(ii) - p1[i] * dx).norm();
    const double r2 = (y2.col(jj) - y2.col(ii) - p2[i] * dx).norm();
    out.holder_remainder = std::max(out.holder_remainder, r1 / hg);
    out.holder_remainder2 = std::max(out.holder_remainder2, r2 / (hg * hg));
  });
  return out;
}

inline CrpNorm crp_norm(const ControlledPath& cp, const RoughPath& rp, const AlphaNorm& norm, double gamma) {
  return crp_norm(cp, rp, norm, gamma, 0, cp.steps());
}

namespace detail {

/// Exact iterated integrals of the piecewise-linear interpolant over each
/// coarse block: sum_k (X_k - X_start) (x) dX_k + dX_k (x) dX_k / 2.
inline Matrix piecewise_linear_blocks(const GridPath& fine, std::size_t coarsen) {
  const auto d = static_cast<Eigen::Index>(fine.dim());
  const std::size_t n = fine.steps() / coarsen;
  Matrix blocks(d * d, static_cast<Eigen::Index>(n));
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor acc(d, d);
  for (std::size_t c = 0; c < n; ++c) {
    acc.setZero();
    const std::size_t start = c * coarsen;
    for (std::size_t k = start; k < start + coarsen; ++k) {
      const Vector dx = fine.increment(k, k + 1);
      acc.noalias() += (fine.increment(start, k) + 0.5 * dx) * dx.transpose();
    }
    blocks.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Vector>(acc.data(), d * d);
  }
  return blocks;
}

}  // namespace detail

/// Geometric lift onto every `coarsen`-th point of `fine`, using the exact
/// iterated integrals of the piecewise-linear interpolant of the fine path.
inline RoughPath lift_geometric(const GridPath& fine, std::size_t coarsen, double gamma) {
  if (coarsen == 0 || fine.steps() % coarsen != 0) throw InvalidArgument("lift_geometric: coarsen factor must divide the fine step count");
  return RoughPath(fine.restrict(coarsen), detail::piecewise_linear_blocks(fine, coarsen), gamma);
}

/// Ito lift for Brownian drivers: the geometric lift with (t-s)/2 * I removed
/// from the diagonal of every block.
inline RoughPath lift_ito(const GridPath& fine, std::size_t coarsen, double gamma) {
  if (coarsen == 0 || fine.steps() % coarsen != 0) throw InvalidArgument("lift_ito: coarsen factor must divide the fine step count");
  Matrix blocks = detail::piecewise_linear_blocks(fine, coarsen);
  const auto d = static_cast<Eigen::Index>(fine.dim());
  const double half = 0.5 * fine.step() * static_cast<double>(coarsen);
  for (Eigen::Index j = 0; j < d; ++j) blocks.row(j * d + j).array() -= half;
  return RoughPath(fine.restrict(coarsen), std::move(blocks), gamma);
}

}  // namespace rpde
