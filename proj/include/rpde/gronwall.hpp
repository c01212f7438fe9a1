#pragma once

// Constants of the mild rough Gronwall inequality and its linearized and
// difference versions, plus certification of solver output against them.
// Bounds are astronomically large for realistic inputs (the canonical step
// kappa is tiny), so everything is carried in log space.

#include <optional>

#include "rpde/rough_core.hpp"
#include "rpde/solver.hpp"

namespace rpde {

inline double gronwall_nu(double gamma, double delta, double sigma) {
  return std::min({1.0 - 2.0 * gamma, 1.0 - delta, gamma - sigma});
}

struct GronwallConstants {
  double phi1 = 0, phi2 = 0, phi3 = 0;
  double nu = 0;
  double C = 0;
  double log_kappa = 0;     // log of the step kappa (theta for difference bounds)
  double kappa_term = 0;    // C kappa^nu Phi_3
  double C2 = 0;
  double log_C1 = 0;

  double kappa() const { return std::exp(log_kappa); }
  double C1() const { return std::exp(log_C1); }
  /// 1 - C kappa^nu Phi_3.
  double contraction() const { return 1.0 - kappa_term; }
};

using LinearizedConstants = GronwallConstants;
using DifferenceConstants = GronwallConstants;

namespace detail {

inline void check_exponents(double gamma, double sigma, double delta, double C) {
  require(gamma > 1.0 / 3.0 && gamma <= 0.5, "gronwall: gamma must lie in (1/3, 1/2]");
  require(sigma < gamma, "gronwall: need sigma < gamma");
  require(delta < 1, "gronwall: need delta < 1");
  require(C >= 1, "gronwall: need C >= 1");
}

/// Canonical step: kappa^nu = 1/(2 C Phi_3). With Phi_3 = 0 every kappa is
/// admissible and the step is taken as the interval length.
inline void choose_step(GronwallConstants& k, double interval, double cap_log = std::numeric_limits<double>::infinity()) {
  if (k.phi3 > 0) {
    k.log_kappa = std::min(-std::log(2.0 * k.C * k.phi3) / k.nu, cap_log);
    k.kappa_term = k.C * std::exp(k.nu * k.log_kappa) * k.phi3;
  } else {
    k.log_kappa = std::min(std::log(interval), cap_log);
    k.kappa_term = 0.0;
  }
}

/// C_2 and log C_1 from Phi_1..3 and the step; `with_phi1` selects the
/// two-term maximum of the nonlinear version.
inline void finish(GronwallConstants& k, bool with_phi1) {
  const double f = k.contraction();
  const double denom = 2.0 * k.C * k.phi2 - 1.0 + k.kappa_term;
  if (!(f > 0) || !(denom > 0)) throw InvalidArgument("gronwall: inadmissible step, need 2C Phi_2 > 1 - C kappa^nu Phi_3 > 0");
  k.C2 = std::log(2.0 * k.C * k.phi2 / f) * std::exp(-k.log_kappa);
  double lead = f / denom;
  if (with_phi1) lead = std::max(lead, f * k.C * k.phi1 / (denom * denom));
  k.log_C1 = k.C2 + std::log(lead);
}

}  // namespace detail

/// Constants for the interval [s,t] of length `interval` with rho = rho_{gamma,[s,t]}.
inline GronwallConstants compute_constants(double rho, double interval, double C_F, double C_G, double gamma, double sigma,
                                           double delta, double C) {
  detail::check_exponents(gamma, sigma, delta, C);
  require(rho >= 1, "gronwall: rho must be at least 1");
  require(interval > 0, "gronwall: interval must be positive");
  require(C_F >= 0 && C_G >= 0, "gronwall: constants must be nonnegative");
  GronwallConstants k;
  k.C = C;
  k.nu = gronwall_nu(gamma, delta, sigma);
  k.phi1 = C_F + C_G * rho * rho + C_G * rho;
  k.phi2 = std::max(1.0, C_G * rho);
  k.phi3 = C_F + C_G * rho * rho;
  detail::choose_step(k, interval);
  detail::finish(k, true);
  return k;
}

inline GronwallConstants compute_constants(const RoughPath& rp, std::size_t from, std::size_t to, double C_F, double C_G,
                                           double sigma, double delta, double C) {
  return compute_constants(rho_gamma(rp, from, to), rp.time(to) - rp.time(from), C_F, C_G, rp.gamma(), sigma, delta, C);
}

/// log of C_1 rho (1 + |u_s|_a + |G(s,u_s)|_{a-g}) exp(C_2 (t-s)).
inline double log_gronwall_bound(const GronwallConstants& k, double u_norm, double g_norm, double elapsed, double rho) {
  require(elapsed > 0, "gronwall_bound: need t > s");
  return k.log_C1 + std::log(rho) + std::log1p(u_norm + g_norm) + k.C2 * elapsed;
}

inline double gronwall_bound(const GronwallConstants& k, double u_norm, double g_norm, double elapsed, double rho) {
  return std::exp(log_gronwall_bound(k, u_norm, g_norm, elapsed, rho));
}

/// Linearization along a solution with controlled norm `base_norm` = ||u,u'||.
inline LinearizedConstants linearized_constants(double rho, double interval, double C_DF, double C_G, double base_norm,
                                                double gamma, double sigma, double delta, double C) {
  detail::check_exponents(gamma, sigma, delta, C);
  require(rho >= 1 && interval > 0 && base_norm >= 0, "linearized_constants: invalid inputs");
  LinearizedConstants k;
  k.C = C;
  k.nu = gronwall_nu(gamma, delta, sigma);
  k.phi2 = std::max({1.0, C_G * rho, C_G * C_G * rho});
  k.phi3 = C_DF * (1.0 + base_norm) + C_G * std::pow(rho, 3) * std::pow(1.0 + base_norm, 2);
  detail::choose_step(k, interval);
  detail::finish(k, false);
  return k;
}

/// log of C~_1 rho (|v_s|_a + |DG v_s|_{a-g}) exp(C~_2 (t-s)); -inf for zero data.
inline double log_linearized_bound(const LinearizedConstants& k, double v_norm, double dgv_norm, double elapsed, double rho) {
  require(elapsed > 0, "linearized_bound: need t > s");
  return k.log_C1 + std::log(rho) + std::log(v_norm + dgv_norm) + k.C2 * elapsed;
}

inline double linearized_bound(const LinearizedConstants& k, double v_norm, double dgv_norm, double elapsed, double rho) {
  return std::exp(log_linearized_bound(k, v_norm, dgv_norm, elapsed, rho));
}

/// Controlled norms entering the difference of two linearizations.
struct DifferenceInputs {
  double u = 0;       // ||u,u'||
  double u_alt = 0;   // ||u~,u~'||
  double v = 0;       // ||v,v'||
  double v_alt = 0;   // ||v~,v~'||
  double u_diff = 0;  // ||u-u~, u'-u~'||
};

/// Coefficient polynomial p(u,u~,v,v~) dominating both factors in the
/// Lipschitz estimate of DG(u)v - DG(u~)v~.
inline double difference_polynomial(const DifferenceInputs& in) {
  const double a = (1 + in.u) * (1 + in.u_alt) + in.u_alt * in.u_alt;
  const double b = (1 + in.u + in.u_alt + in.u * in.u) * in.v + (1 + in.u + in.u_alt) * in.v_alt;
  return std::max(a, b);
}

/// theta^nu = 1/(2 C Phi^_3) capped below one unless `theta` is given.
inline DifferenceConstants difference_constants(double rho, double interval, double C_DF, double C_G,
                                                const DifferenceInputs& in, double gamma, double sigma, double delta,
                                                double C, std::optional<double> theta = std::nullopt) {
  detail::check_exponents(gamma, sigma, delta, C);
  require(rho >= 1 && interval > 0, "difference_constants: invalid inputs");
  const double p = difference_polynomial(in);
  const double hf = std::pow(interval, 1.0 - std::max(2.0 * gamma, delta));
  const double hg = std::pow(interval, gamma - sigma);
  const double r3 = std::pow(rho, 3);
  DifferenceConstants k;
  k.C = C;
  k.nu = gronwall_nu(gamma, delta, sigma);
  k.phi1 = in.v + in.u_diff * (C_DF * hf * in.v + hg * C_G * r3 * p + rho + C_G * (in.v_alt + in.u * in.v + in.v));
  k.phi2 = 1.0 + rho * C_G * (1.0 + in.u_alt);
  k.phi3 = C_DF * hf * (1.0 + in.u) + hg * C_G * r3 * p;
  if (theta) {
    if (!(*theta > 0 && *theta < 1)) throw InvalidArgument("difference_constants: theta must lie in (0,1)");
    k.log_kappa = std::log(*theta);
    k.kappa_term = C * std::pow(*theta, k.nu) * k.phi3;
  } else {
    detail::choose_step(k, interval, std::log(0.99));
  }
  if (!(2.0 * C * k.phi2 > k.contraction() && k.contraction() > 0))
    throw InvalidArgument("difference_constants: inadmissible theta, need 2C Phi_2 > 1 - C theta^nu Phi_3 > 0");
  detail::finish(k, true);
  return k;
}

/// log of C^_1 rho (|v_s - v~_s|_a + |v'_s - v~'_s|_{a-g}) exp(C^_2 (t-s)).
inline double log_difference_bound(const DifferenceConstants& k, double dv_norm, double dvp_norm, double elapsed, double rho) {
  require(elapsed > 0, "difference_bound: need t > s");
  return k.log_C1 + std::log(rho) + std::log(dv_norm + dvp_norm) + k.C2 * elapsed;
}

inline double difference_bound(const DifferenceConstants& k, double dv_norm, double dvp_norm, double elapsed, double rho) {
  return std::exp(log_difference_bound(k, dv_norm, dvp_norm, elapsed, rho));
}

struct Certificate {
  bool pass = false;
  double norm = 0;        // crp_norm of (u, G(u)) over the whole grid
  double log_bound = 0;
  double margin = 0;      // bound / norm, possibly +inf
  double log_margin = 0;
  double rho = 0;
  CrpNorm components;
  GronwallConstants constants;
};

namespace detail {

inline Certificate make_certificate(const CrpNorm& comps, double log_bound, double rho, const GronwallConstants& k) {
  Certificate c;
  c.components = comps;
  c.norm = comps.total();
  c.log_bound = log_bound;
  c.log_margin = c.norm > 0 ? log_bound - std::log(c.norm) : std::numeric_limits<double>::infinity();
  c.margin = std::exp(c.log_margin);
  c.pass = c.log_margin >= 0;
  c.rho = rho;
  c.constants = k;
  return c;
}

}  // namespace detail

/// Checks ||u, G(u)||_{[0,T]} <= C_1 rho (1 + |u_0|_a + |G(0,u_0)|_{a-g}) e^{C_2 T}
/// for a solution on the grid of `rp`.
inline Certificate certify(const SolveResult& sol, const RoughPath& rp, const Nonlinearity& nl, const AlphaNorm& norm,
                           double C) {
  if (!sol.path.shares_grid(rp)) throw InvalidArgument("certify: solution and rough path grids differ");
  const double gamma = rp.gamma();
  const double rho = rho_gamma(rp);
  const auto k = compute_constants(rho, rp.horizon(), nl.drift.lipschitz, nl.diffusion.bound, gamma, nl.sigma, nl.delta, C);
  const CrpNorm comps = crp_norm(sol.path, rp, norm, gamma);
  const double u0 = norm(sol.path.value(0));
  const double g0 = norm.shifted(-gamma)(sol.path.derivative(0));
  return detail::make_certificate(comps, log_gronwall_bound(k, u0, g0, rp.horizon(), rho), rho, k);
}

/// Calibration rule for the non-explicit constant: 1.5 times the largest
/// observed norm/bound ratio at C = 1, never below 1.5.
inline double calibrate_C(const std::vector<double>& log_ratios_at_unit_C) {
  require(!log_ratios_at_unit_C.empty(), "calibrate_C: need training ratios");
  const double worst = *std::max_element(log_ratios_at_unit_C.begin(), log_ratios_at_unit_C.end());
  return 1.5 * std::max(1.0, std::exp(worst));
}

/// log(norm / bound) at C = 1 for one training solution.
inline double unit_log_ratio(const SolveResult& sol, const RoughPath& rp, const Nonlinearity& nl, const AlphaNorm& norm) {
  const Certificate c = certify(sol, rp, nl, norm, 1.0);
  return -c.log_margin;
}

}  // namespace rpde
