#pragma once

// Multi-seed procedures shared by the command line tool and the acceptance
// suite: Gronwall calibration/hold-out certification and seed-averaged
// self-convergence.

#include "rpde/experiment.hpp"
#include "rpde/gronwall.hpp"

namespace rpde {

struct SeedCertificate {
  std::uint64_t seed;
  Certificate cert;
};

struct GronwallProtocol {
  double calibrated_C = 0;
  std::vector<double> training_log_ratios;
  std::vector<SeedCertificate> held_out;
  std::size_t passed = 0;
  bool pass() const { return passed == held_out.size(); }
};

/// Calibrates C on `train` seeds (ratio norm/bound at C = 1) and certifies
/// the disjoint `test` seeds with the frozen C.
inline GronwallProtocol gronwall_protocol(const Experiment& e, unsigned jobs = 1) {
  const auto& cfg = e.cfg;
  const auto steps = config::get<std::size_t>(cfg, "gronwall.steps", e.steps);
  const auto n_train = config::get<std::size_t>(cfg, "gronwall.train_seeds", 100);
  const auto n_test = config::get<std::size_t>(cfg, "gronwall.test_seeds", 200);
  const auto train0 = config::get<std::uint64_t>(cfg, "gronwall.train_offset", 1000);
  const auto test0 = config::get<std::uint64_t>(cfg, "gronwall.test_offset", 100000);
  if (n_train < 1) throw ConfigError("gronwall.train_seeds", "must be positive");
  if (train0 + n_train > test0 && test0 + n_test > train0)
    throw ConfigError("gronwall.test_offset", "training and held-out seed ranges overlap");
  const AlphaNorm norm = e.norm();
  auto solve = [&](std::uint64_t seed) {
    const RoughPath rp = e.make_rough_path(seed, e.horizon, steps);
    return std::make_pair(solve_mild(e.gen, e.nl, rp, e.u0), rp);
  };
  GronwallProtocol out;
  out.training_log_ratios.resize(n_train);
  parallel_for(n_train, jobs, [&](std::size_t i) {
    const auto [sol, rp] = solve(train0 + i);
    out.training_log_ratios[i] = unit_log_ratio(sol, rp, e.nl, norm);
  });
  out.calibrated_C = calibrate_C(out.training_log_ratios);
  out.held_out.resize(n_test);
  parallel_for(n_test, jobs, [&](std::size_t i) {
    const auto [sol, rp] = solve(test0 + i);
    out.held_out[i] = SeedCertificate{test0 + i, certify(sol, rp, e.nl, norm, out.calibrated_C)};
  });
  for (const auto& h : out.held_out) out.passed += h.cert.pass ? 1 : 0;
  return out;
}

/// Self-convergence with errors averaged (root mean square) over
/// `convergence.seeds` driver samples, each refined from the same fine path.
inline ConvergenceStudy convergence_protocol(const Experiment& e, unsigned jobs = 1) {
  const auto& cfg = e.cfg;
  const auto ref_steps = config::get<std::size_t>(cfg, "convergence.reference_steps", e.steps);
  const auto levels = config::get<std::vector<std::size_t>>(cfg, "convergence.levels");
  const auto seeds = config::get<std::size_t>(cfg, "convergence.seeds", 1);
  if (seeds < 1) throw ConfigError("convergence.seeds", "must be positive");
  std::vector<ConvergenceStudy> runs(seeds);
  parallel_for(seeds, jobs, [&](std::size_t s) {
    const RoughPath rp = e.make_rough_path(e.seed + s, e.horizon, ref_steps);
    runs[s] = convergence_study(e.gen, e.nl, rp, e.u0, levels, e.norm());
  });
  if (seeds == 1) return runs.front();
  ConvergenceStudy out = runs.front();
  out.exact = true;
  for (std::size_t l = 0; l < out.errors.size(); ++l) {
    double sq = 0;
    for (const auto& r : runs) sq += r.errors[l] * r.errors[l];
    out.errors[l] = std::sqrt(sq / static_cast<double>(seeds));
  }
  for (const auto& r : runs) out.exact = out.exact && r.exact;
  if (out.exact) return out;
  out.monotone = true;
  for (std::size_t i = 1; i < out.errors.size(); ++i) out.monotone = out.monotone && out.errors[i] < out.errors[i - 1];
  std::vector<double> h;
  for (const auto n : out.steps) h.push_back(e.horizon / static_cast<double>(n));
  out.order = loglog_slope(h, out.errors);
  return out;
}

}  // namespace rpde
