#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "rpde/csv.hpp"
#include "rpde/rough_core.hpp"

using namespace rpde;

namespace {

GridPath brownian(std::size_t n, std::size_t d, std::uint64_t seed, double horizon = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  Matrix v = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n + 1));
  const double sd = std::sqrt(horizon / static_cast<double>(n));
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      v(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i - 1)) + sd * z(gen);
  return GridPath(horizon, std::move(v));
}

GridPath linear_path(std::size_t n) {
  Matrix v(1, static_cast<Eigen::Index>(n + 1));
  for (std::size_t i = 0; i <= n; ++i) v(0, static_cast<Eigen::Index>(i)) = static_cast<double>(i) / static_cast<double>(n);
  return GridPath(1.0, std::move(v));
}

// Iterated integral of the piecewise-linear interpolant between fine indices
// a < b, summed directly rather than through stored blocks.
Matrix direct_area(const GridPath& fine, std::size_t a, std::size_t b) {
  const auto d = static_cast<Eigen::Index>(fine.dim());
  Matrix acc = Matrix::Zero(d, d);
  for (std::size_t k = a; k < b; ++k) {
    const Vector dx = fine.increment(k, k + 1);
    acc += (fine.increment(a, k) + 0.5 * dx) * dx.transpose();
  }
  return acc;
}

// Best partition sum by enumerating every subset of interior points.
double exhaustive_W(const GridPath& fine, std::size_t coarsen, double gamma, double eta) {
  const std::size_t n = fine.steps() / coarsen;
  const double gap = gamma - eta, dt = fine.horizon() / static_cast<double>(n);
  double best = 0;
  for (std::uint32_t mask = 0; mask < (1u << (n - 1)); ++mask) {
    std::vector<std::size_t> pts{0};
    for (std::size_t k = 1; k < n; ++k)
      if (mask & (1u << (k - 1))) pts.push_back(k);
    pts.push_back(n);
    double sum = 0;
    for (std::size_t q = 0; q + 1 < pts.size(); ++q) {
      const std::size_t a = pts[q] * coarsen, b = pts[q + 1] * coarsen;
      const double h = dt * static_cast<double>(pts[q + 1] - pts[q]);
      sum += std::pow(h, -eta / gap) * (std::pow(fine.increment(a, b).norm(), 1.0 / gap) +
                                        std::pow(direct_area(fine, a, b).norm(), 0.5 / gap));
    }
    best = std::max(best, sum);
  }
  return best;
}

ControlledPath random_controlled(const RoughPath& rp, std::size_t m, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  const auto d = static_cast<Eigen::Index>(rp.dim());
  const auto mm = static_cast<Eigen::Index>(m);
  Matrix vals(mm, static_cast<Eigen::Index>(rp.steps() + 1));
  std::vector<Matrix> derivs;
  Matrix a(mm, d), b(mm, d);
  for (Eigen::Index r = 0; r < mm; ++r)
    for (Eigen::Index c = 0; c < d; ++c) a(r, c) = z(gen), b(r, c) = z(gen);
  for (std::size_t i = 0; i <= rp.steps(); ++i) {
    const Vector x = rp.base()[i];
    const double t = rp.time(i);
    vals.col(static_cast<Eigen::Index>(i)) = a * x.array().sin().matrix() + Vector::Constant(mm, t * t);
    derivs.emplace_back(a * x.array().cos().matrix().asDiagonal() + b * t);
  }
  return ControlledPath(rp.horizon(), std::move(vals), std::move(derivs));
}

}  // namespace

TEST(AlphaNorm, WeightsAndEmbedding) {
  Vector mu(3);
  mu << 1, 4, 9;
  const Vector x = Vector::Constant(3, 1.0);
  EXPECT_DOUBLE_EQ(AlphaNorm(mu, 0.5)(x), std::sqrt(1 + 4 + 9));
  EXPECT_DOUBLE_EQ(AlphaNorm(mu, 0.0)(x), std::sqrt(3.0));
  std::mt19937_64 gen(3);
  std::normal_distribution<double> z;
  for (int r = 0; r < 50; ++r) {
    Vector y(3);
    for (auto& v : y) v = z(gen);
    const double a1 = -0.3, a2 = 0.4;
    EXPECT_LE(AlphaNorm(mu, a1)(y), AlphaNorm(mu, a2)(y) * std::pow(mu.minCoeff(), a1 - a2) + 1e-14);
  }
  EXPECT_THROW(AlphaNorm(Vector::Zero(2), 0.0), InvalidArgument);
  Vector bad(2);
  bad << 2, 1;
  EXPECT_THROW(AlphaNorm(bad, 0.0), InvalidArgument);
}

TEST(RoughPath, ConstructionErrors) {
  const GridPath p = linear_path(4);
  EXPECT_THROW(RoughPath(p, Matrix::Zero(1, 4), 0.3), InvalidArgument);
  EXPECT_THROW(RoughPath(p, Matrix::Zero(1, 3), 0.4), InvalidArgument);
  EXPECT_THROW(RoughPath(p, Matrix::Zero(2, 4), 0.4), InvalidArgument);
  Matrix nonzero_start = Matrix::Ones(1, 3);
  EXPECT_THROW(GridPath(1.0, nonzero_start), InvalidArgument);
  EXPECT_THROW(lift_geometric(p, 3, 0.4), InvalidArgument);
  EXPECT_THROW(lift_geometric(p, 0, 0.4), InvalidArgument);
}

TEST(ChenDefect, LinearPathIsExact) {
  const RoughPath rp = lift_geometric(linear_path(64), 4, 0.4);
  for (std::size_t i = 0; i <= 16; i += 3)
    for (std::size_t k = i; k <= 16; k += 2)
      for (std::size_t j = k; j <= 16; ++j) EXPECT_NEAR(chen_defect(rp, i, k, j)(0, 0), 0.0, 1e-15);
  for (std::size_t j = 1; j <= 16; ++j) {
    const double h = rp.time(j);
    EXPECT_NEAR(rp.area(0, j)(0, 0), h * h / 2, 1e-15);
  }
  EXPECT_THROW(chen_defect(rp, 3, 2, 5), InvalidArgument);
  EXPECT_THROW(chen_defect(rp, 0, 2, 17), InvalidArgument);
}

TEST(ChenDefect, OneDimensionalGeometricIdentity) {
  const RoughPath rp = lift_geometric(brownian(512, 1, 11), 8, 0.4);
  for (std::size_t i = 0; i < 64; i += 5)
    for (std::size_t j = i; j <= 64; j += 7) {
      const double dx = rp.increment(i, j)(0);
      EXPECT_NEAR(rp.area(i, j)(0, 0), dx * dx / 2, 1e-13);
    }
}

TEST(ChenDefect, BrownianLiftsFine) {
  for (const std::size_t d : {1u, 2u, 3u}) {
    const GridPath fine = brownian(4096 * 4, d, 100 + d);
    for (const bool ito : {false, true}) {
      const RoughPath rp = ito ? lift_ito(fine, 4, 0.45) : lift_geometric(fine, 4, 0.45);
      std::mt19937_64 gen(d);
      std::uniform_int_distribution<std::size_t> pick(0, rp.steps());
      double worst = 0;
      for (int r = 0; r < 300; ++r) {
        std::size_t idx[3] = {pick(gen), pick(gen), pick(gen)};
        std::sort(idx, idx + 3);
        worst = std::max(worst, chen_defect(rp, idx[0], idx[1], idx[2]).cwiseAbs().maxCoeff());
      }
      EXPECT_LT(worst, 1e-10);
    }
  }
}

TEST(Lift, ParabolaCrossIntegral) {
  const std::size_t n = 1 << 14;
  Matrix v(2, n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n);
    v(0, static_cast<Eigen::Index>(i)) = t;
    v(1, static_cast<Eigen::Index>(i)) = t * t;
  }
  const RoughPath rp = lift_geometric(GridPath(1.0, v), n / 16, 0.4);
  const Matrix a = rp.area(0, 16);
  // int t d(t^2) = 2/3, int t^2 dt = 1/3; piecewise-linear error O(1/n^2).
  EXPECT_NEAR(a(0, 1), 2.0 / 3.0, 1e-8);
  EXPECT_NEAR(a(1, 0), 1.0 / 3.0, 1e-8);
  EXPECT_NEAR(a(0, 0), 0.5, 1e-14);
  EXPECT_NEAR(a(0, 1) + a(1, 0), 1.0, 1e-12);
}

TEST(Lift, ItoSubtractsHalfTimeOnDiagonal) {
  const GridPath fine = brownian(256, 2, 5);
  const RoughPath g = lift_geometric(fine, 8, 0.4), i = lift_ito(fine, 8, 0.4);
  for (std::size_t a = 0; a < g.steps(); ++a)
    for (std::size_t b = a + 1; b <= g.steps(); ++b) {
      const Matrix diff = g.area(a, b) - i.area(a, b);
      const double half = 0.5 * (g.time(b) - g.time(a));
      EXPECT_NEAR(diff(0, 0), half, 1e-13);
      EXPECT_NEAR(diff(1, 1), half, 1e-13);
      EXPECT_NEAR(diff(0, 1), 0.0, 1e-13);
    }
}

TEST(Lift, RestrictAndSliceAgreeWithDirectAreas) {
  const GridPath fine = brownian(480, 2, 9);
  const RoughPath rp = lift_geometric(fine, 4, 0.4);
  const RoughPath coarse = rp.restrict(5);
  for (std::size_t c = 0; c < coarse.steps(); ++c)
    EXPECT_LT((coarse.area(c, c + 1) - direct_area(fine, c * 20, (c + 1) * 20)).norm(), 1e-13);
  const RoughPath s = rp.slice(30, 90);
  EXPECT_NEAR(s.horizon(), rp.time(90) - rp.time(30), 1e-15);
  EXPECT_LT((s.area(0, 60) - rp.area(30, 90)).norm(), 1e-13);
  EXPECT_LT((s.increment(0, 60) - rp.increment(30, 90)).norm(), 1e-15);
}

TEST(Holder, Examples) {
  Matrix zero = Matrix::Zero(2, 11);
  EXPECT_EQ(holder_seminorm(GridPath(1.0, zero), 0.4), 0.0);
  const GridPath x = linear_path(10);
  EXPECT_NEAR(holder_seminorm(x, 1.0), 1.0, 1e-14);
  // brute force: max over grid pairs of (t-s)^{0.6}
  double brute = 0;
  for (int i = 0; i < 10; ++i)
    for (int j = i + 1; j <= 10; ++j) brute = std::max(brute, std::pow((j - i) / 10.0, 0.6));
  EXPECT_NEAR(holder_seminorm(x, 0.4), brute, 1e-14);
  EXPECT_NEAR(brute, 1.0, 1e-14);
  EXPECT_THROW(holder_seminorm(x, 0.0), InvalidArgument);
  EXPECT_THROW(holder_seminorm(Matrix(1, 0), 0.1, 0.4, AlphaNorm::euclidean(1), 0, 0), InvalidArgument);
}

TEST(Holder, DyadicScanUnderestimates) {
  const GridPath b = brownian(1024, 1, 4);
  const double exact = holder_seminorm(b.values(), b.step(), 0.4, AlphaNorm::euclidean(1), 0, 1024, PairScan::exact);
  const double dyadic = holder_seminorm(b.values(), b.step(), 0.4, AlphaNorm::euclidean(1), 0, 1024, PairScan::dyadic);
  EXPECT_LE(dyadic, exact);
  EXPECT_GT(dyadic, 0.5 * exact);
}

TEST(Rho, Examples) {
  const RoughPath zero(GridPath(1.0, Matrix::Zero(2, 9)), Matrix::Zero(4, 8), 0.4);
  EXPECT_EQ(rho_gamma(zero), 1.0);
  const RoughPath lin = lift_geometric(linear_path(40), 4, 0.4);
  EXPECT_NEAR(rho_gamma(lin), 2.5, 1e-13);
  const RoughPath b1 = lift_geometric(brownian(1024, 2, 77), 8, 0.4);
  const RoughPath b2 = lift_geometric(brownian(1024, 2, 77), 8, 0.4);
  EXPECT_EQ(rho_gamma(b1), rho_gamma(b2));
  EXPECT_TRUE(std::isfinite(rho_gamma(b1)));
  EXPECT_THROW(rho_gamma(lin, 3, 3), InvalidArgument);
  EXPECT_THROW(rho_gamma(lin, 4, 2), InvalidArgument);
}

TEST(ControlW, Examples) {
  const RoughPath zero(GridPath(1.0, Matrix::Zero(1, 9)), Matrix::Zero(1, 8), 0.4);
  EXPECT_EQ(control_W(zero, 0.4, 0.1, 0, 8), 0.0);
  const GridPath fine = linear_path(90);
  const RoughPath lin = lift_geometric(fine, 10, 0.4);
  const double expected = 1.0 + std::pow(0.5, 1.25);
  EXPECT_NEAR(control_W(lin, 0.4, 0.0, 0, 9), expected, 1e-13);
  EXPECT_NEAR(exhaustive_W(fine, 10, 0.4, 0.0), expected, 1e-13);
  EXPECT_THROW(control_W(lin, 0.4, 0.4, 0, 9), InvalidArgument);
  EXPECT_THROW(control_W(lin, 0.4, -0.1, 0, 9), InvalidArgument);
  EXPECT_THROW(control_W(lin, 0.4, 0.1, 5, 5), InvalidArgument);
}

TEST(ControlW, MatchesExhaustiveEnumeration) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t n = 4 + seed % 8;  // 5..12 grid points
    const GridPath fine = brownian(n * 6, 1 + seed % 2, 500 + seed);
    const RoughPath rp = lift_geometric(fine, 6, 0.4);
    for (const double eta : {0.0, 0.2}) {
      const double dp = control_W(rp, 0.4, eta, 0, n);
      const double ex = exhaustive_W(fine, 6, 0.4, eta);
      EXPECT_NEAR(dp, ex, 1e-12 * std::max(1.0, ex)) << "seed " << seed << " eta " << eta;
    }
  }
}

TEST(ControlW, Superadditive) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const RoughPath rp = lift_geometric(brownian(256, 2, 900 + seed), 8, 0.4);
    const double whole = control_W(rp, 0.4, 0.1, 0, 32);
    for (std::size_t r = 1; r < 32; ++r)
      EXPECT_LE(control_W(rp, 0.4, 0.1, 0, r) + control_W(rp, 0.4, 0.1, r, 32), whole * (1 + 1e-12));
  }
}

TEST(CrpNorm, ConstantPath) {
  Vector mu(2);
  mu << 1, 4;
  const RoughPath rp = lift_geometric(brownian(64, 1, 1), 4, 0.4);
  Matrix vals(2, 17);
  vals.colwise() = Vector::Constant(2, 3.0);
  const ControlledPath cp(1.0, vals, std::vector<Matrix>(17, Matrix::Zero(2, 1)));
  const AlphaNorm norm(mu, 0.25);
  const CrpNorm c = crp_norm(cp, rp, norm, 0.4);
  EXPECT_NEAR(c.total(), norm(Vector::Constant(2, 3.0)), 1e-14);
  EXPECT_EQ(c.holder_remainder, 0.0);
}

TEST(CrpNorm, PathControlledByItself) {
  const RoughPath rp = lift_geometric(brownian(256, 1, 2), 4, 0.4);
  const ControlledPath cp(1.0, rp.base().values(), std::vector<Matrix>(rp.steps() + 1, Matrix::Ones(1, 1)));
  const CrpNorm c = crp_norm(cp, rp, AlphaNorm::euclidean(1), 0.4);
  EXPECT_NEAR(c.sup_value, rp.base().values().cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(c.sup_derivative, 1.0);
  EXPECT_EQ(c.holder_derivative, 0.0);
  EXPECT_NEAR(c.holder_remainder, 0.0, 1e-15);
  EXPECT_NEAR(c.holder_remainder2, 0.0, 1e-13);
}

TEST(CrpNorm, GridMismatch) {
  const RoughPath rp = lift_geometric(brownian(64, 1, 1), 4, 0.4);
  const ControlledPath cp(1.0, Matrix::Zero(1, 9), std::vector<Matrix>(9, Matrix::Zero(1, 1)));
  EXPECT_THROW(crp_norm(cp, rp, AlphaNorm::euclidean(1), 0.4), InvalidArgument);
}

TEST(CrpNorm, EigenvalueScaling) {
  const RoughPath rp = lift_geometric(brownian(128, 1, 3), 4, 0.4);
  const ControlledPath cp = random_controlled(rp, 1, 8);
  const double alpha = 0.3, g = 0.4, c = 2.7;
  Vector mu(1);
  mu << 1.7;
  const CrpNorm a = crp_norm(cp, rp, AlphaNorm(mu, alpha), g);
  const CrpNorm b = crp_norm(cp, rp, AlphaNorm(c * mu, alpha), g);
  EXPECT_NEAR(b.sup_value, a.sup_value * std::pow(c, alpha), 1e-12);
  EXPECT_NEAR(b.sup_derivative, a.sup_derivative * std::pow(c, alpha - g), 1e-12);
  EXPECT_NEAR(b.holder_derivative, a.holder_derivative * std::pow(c, alpha - 2 * g), 1e-12);
  EXPECT_NEAR(b.holder_remainder, a.holder_remainder * std::pow(c, alpha - g), 1e-11);
  EXPECT_NEAR(b.holder_remainder2, a.holder_remainder2 * std::pow(c, alpha - 2 * g), 1e-11);
}

TEST(CrpNorm, IntervalSplitting) {
  Vector mu(3);
  mu << 1, 4, 9;
  const AlphaNorm norm(mu, 0.2);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const RoughPath rp = lift_geometric(brownian(240, 2, 40 + seed), 4, 0.4);
    const ControlledPath cp = random_controlled(rp, 3, seed);
    const double whole = crp_norm(cp, rp, norm, 0.4).total();
    const double rho = rho_gamma(rp);
    for (const std::size_t r : {1u, 17u, 30u, 59u}) {
      const double left = crp_norm(cp, rp, norm, 0.4, 0, r).total();
      const double right = crp_norm(cp, rp, norm, 0.4, r, 60).total();
      EXPECT_LE(whole, rho * left + right + 1e-12) << "seed " << seed << " r " << r;
    }
  }
}

TEST(CrpNorm, PathSeminormControlledByNorm) {
  Vector mu(3);
  mu << 1, 4, 9;
  const AlphaNorm norm(mu, 0.2);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const RoughPath rp = lift_geometric(brownian(256, 2, 60 + seed), 4, 0.4);
    const ControlledPath cp = random_controlled(rp, 3, seed);
    const double bound = rho_gamma(rp) * crp_norm(cp, rp, norm, 0.4).total();
    for (const int i : {1, 2}) {
      const double semi = holder_seminorm(cp.values(), rp.step(), 0.4, norm.shifted(-0.4 * i), 0, rp.steps());
      EXPECT_LE(semi, bound);
    }
  }
}

TEST(Csv, RoughPathRoundTrip) {
  const RoughPath rp = lift_ito(brownian(96, 2, 12, 2.5), 3, 0.45);
  std::stringstream ss;
  write_rough_path_csv(ss, rp);
  const RoughPath back = read_rough_path_csv(ss, 0.45);
  EXPECT_EQ(back.steps(), rp.steps());
  EXPECT_DOUBLE_EQ(back.horizon(), rp.horizon());
  EXPECT_EQ(back.base().values(), rp.base().values());
  EXPECT_EQ(back.blocks(), rp.blocks());
}

TEST(Numerics, LineFitAndErrors) {
  const std::vector<double> x{1, 2, 3, 4}, y{3, 5, 7, 9};
  const LineFit f = fit_line(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  const std::vector<double> h{0.1, 0.01, 0.001}, e{1e-2, 1e-4, 1e-6};
  EXPECT_NEAR(loglog_slope(h, e), 2.0, 1e-12);
  EXPECT_THROW(fit_line(std::vector<double>{1}, std::vector<double>{1}), InvalidArgument);
}
