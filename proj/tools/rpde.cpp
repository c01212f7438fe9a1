// rpde: configuration-driven experiments for rough PDE simulation.
//
//   rpde <subcommand> --config configs/additive_ou.json [--set key=value]... [--out dir] [--jobs n]
//
// Every subcommand writes CSV files plus manifest.json into the output
// directory. Exit status: 0 pass, 1 check failed, 2 usage or config error.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "rpde/csv.hpp"
#include "rpde/protocols.hpp"

namespace fs = std::filesystem;
using namespace rpde;

namespace {

constexpr const char* kVersion = "rpde 0.1.0";

struct RunContext {
  Json cfg;
  fs::path out;
  unsigned jobs = 1;
  Json result = Json::object();
  std::vector<std::string> outputs;

  std::ofstream open(const std::string& file) {
    outputs.push_back(file);
    std::ofstream os(out / file);
    if (!os) throw Error("cannot write '" + (out / file).string() + "'");
    return os;
  }
};

std::vector<std::string> indexed(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

int cmd_noise(RunContext& ctx) {
  const Experiment e = load_experiment(ctx.cfg);
  if (!e.driver.kernel) throw ConfigError("noise.kernel", "the noise subcommand needs a Volterra kernel");
  const std::size_t n_fine = config::get<std::size_t>(ctx.cfg, "noise.n_fine", e.steps * e.driver.coarsen);
  const NoiseSample s = sample_volterra(*e.driver.kernel, n_fine, e.horizon, e.seed, e.noise_dim);
  auto os = ctx.open("noise.csv");
  std::vector<std::string> head{"t"};
  for (const auto& h : indexed("V", e.noise_dim)) head.push_back(h);
  write_csv_header(os, head);
  std::vector<double> row(e.noise_dim + 1);
  for (std::size_t i = 0; i <= s.path.steps(); ++i) {
    row[0] = s.path.time(i);
    for (std::size_t j = 0; j < e.noise_dim; ++j) row[j + 1] = s.path[i](static_cast<Eigen::Index>(j));
    write_csv_row(os, row);
  }
  ctx.result["kernel"] = e.driver.kernel->name();
  ctx.result["n_fine"] = n_fine;
  return 0;
}

double max_chen_defect(const RoughPath& rp, std::uint64_t seed) {
  double worst = 0;
  const std::size_t n = rp.steps();
  for (std::size_t k = 0; k <= n; ++k) worst = std::max(worst, chen_defect(rp, 0, k, n).cwiseAbs().maxCoeff());
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n);
  for (int r = 0; r < 2000; ++r) {
    std::size_t idx[3] = {pick(gen), pick(gen), pick(gen)};
    std::sort(idx, idx + 3);
    worst = std::max(worst, chen_defect(rp, idx[0], idx[1], idx[2]).cwiseAbs().maxCoeff());
  }
  return worst;
}

int cmd_lift_check(RunContext& ctx) {
  const Experiment e = load_experiment(ctx.cfg);
  const GridPath fine = driver_fine_path(e.driver, e.horizon, e.steps, e.seed, e.noise_dim);
  std::vector<std::pair<std::string, RoughPath>> lifts;
  lifts.emplace_back("geometric", lift_geometric(fine, e.driver.coarsen, e.gamma));
  if (e.driver.kernel && e.driver.kernel->is_brownian()) lifts.emplace_back("ito", lift_ito(fine, e.driver.coarsen, e.gamma));
  const double eta = config::get<double>(ctx.cfg, "lift_check.eta", 0.0);
  auto os = ctx.open("lift_check.csv");
  write_csv_header(os, {"lift", "max_chen_defect", "rho_gamma", "control_W"});
  bool ok = true;
  for (const auto& [name, rp] : lifts) {
    const double defect = max_chen_defect(rp, e.seed);
    const double rho = rho_gamma(rp);
    const double w = control_W(rp, e.gamma, eta, 0, rp.steps());
    os << name << ',' << format_double(defect) << ',' << format_double(rho) << ',' << format_double(w) << '\n';
    ctx.result[name] = {{"max_chen_defect", defect}, {"rho_gamma", rho}, {"control_W", w}};
    ok = ok && defect < 1e-10;
    std::ofstream path_csv(ctx.out / ("rough_path_" + name + ".csv"));
    ctx.outputs.push_back("rough_path_" + name + ".csv");
    write_rough_path_csv(path_csv, rp);
  }
  return ok ? 0 : 1;
}

int cmd_kernel_check(RunContext& ctx) {
  const Experiment e = load_experiment(ctx.cfg);
  if (!e.driver.kernel) throw ConfigError("noise.kernel", "kernel-check needs a Volterra kernel");
  const VolterraKernel& k = *e.driver.kernel;
  const double gamma = config::get<double>(ctx.cfg, "kernel_check.gamma", e.gamma);
  const HolderFit fit = kernel_holder_exponent(k);
  auto os = ctx.open("kernel_holder.csv");
  write_csv_header(os, {"lag", "modulus"});
  for (std::size_t i = 0; i < fit.lags.size(); ++i) write_csv_row(os, {fit.lags[i], fit.modulus[i]});
  ctx.result["holder_exponent"] = fit.exponent;
  ctx.result["nominal_holder_exponent"] = k.nominal_holder_exponent();
  ctx.result["beta"] = k.beta();
  if (!k.has_kernel()) {
    ctx.result["K1_K2"] = "skipped: covariance-only kernel";
    return 0;
  }
  const KernelConditionReport rep = check_K1_K2(k, gamma);
  auto os2 = ctx.open("kernel_K1_K2.csv");
  write_csv_header(os2, {"t", "K1", "K2"});
  for (std::size_t i = 0; i < rep.lags.size(); ++i) write_csv_row(os2, {rep.lags[i], rep.k1[i], rep.k2[i]});
  ctx.result["exponent_K1"] = rep.exponent_K1;
  ctx.result["exponent_K2"] = rep.exponent_K2;
  ctx.result["degenerate"] = rep.degenerate;
  ctx.result["pass"] = rep.pass;
  return rep.pass ? 0 : 1;
}

int cmd_cm_check(RunContext& ctx) {
  const Experiment e = load_experiment(ctx.cfg);
  if (!e.driver.kernel) throw ConfigError("noise.kernel", "cm-check needs a Volterra kernel");
  const double gp = config::get<double>(ctx.cfg, "cm_check.gamma_prime", 0.8);
  const double eta = config::get<double>(ctx.cfg, "cm_check.eta", 0.2);
  const auto samples = config::get<std::size_t>(ctx.cfg, "cm_check.samples", 100);
  const auto res = config::get<std::vector<std::vector<std::size_t>>>(ctx.cfg, "cm_check.resolutions",
                                                                      {{2048, 16}, {4096, 16}});
  auto os = ctx.open("cm_check.csv");
  write_csv_header(os, {"n_fine", "coarsen", "max_ratio", "max_sobolev_ratio"});
  std::vector<CameronMartinReport> reps(res.size());
  parallel_for(res.size(), ctx.jobs, [&](std::size_t r) {
    if (res[r].size() != 2) throw ConfigError("cm_check.resolutions", "entries must be [n_fine, coarsen]");
    CameronMartinOptions opt;
    opt.n_fine = res[r][0];
    opt.coarsen = res[r][1];
    opt.cells = config::get<std::size_t>(ctx.cfg, "cm_check.cells", 32);
    opt.gamma = e.gamma + 0.5 > gp ? e.gamma : 0.5;
    reps[r] = cm_check(*e.driver.kernel, gp, eta, samples, e.seed, opt);
  });
  bool ok = true;
  for (std::size_t r = 0; r < res.size(); ++r) {
    os << res[r][0] << ',' << res[r][1] << ',' << format_double(reps[r].max_ratio) << ','
       << format_double(reps[r].max_sobolev_ratio) << '\n';
    ok = ok && std::isfinite(reps[r].max_ratio);
    if (r > 0) {
      const double change = std::abs(reps[r].max_ratio / reps[r - 1].max_ratio - 1.0);
      ctx.result["relative_change"].push_back(change);
      ok = ok && change < 0.1;
    }
  }
  ctx.result["pass"] = ok;
  return ok ? 0 : 1;
}

void write_solution(std::ostream& os, const SolveResult& sol, const RoughPath& rp) {
  std::vector<std::string> head{"t"};
  for (const auto& h : indexed("u", sol.path.dim())) head.push_back(h);
  write_csv_header(os, head);
  std::vector<double> row(sol.path.dim() + 1);
  for (std::size_t i = 0; i <= sol.path.steps(); ++i) {
    row[0] = sol.start_time + rp.time(i);
    for (std::size_t k = 0; k < sol.path.dim(); ++k) row[k + 1] = sol.path.value(i)(static_cast<Eigen::Index>(k));
    write_csv_row(os, row);
  }
}

int cmd_solve(RunContext& ctx) {
  const Experiment e = load_experiment(ctx.cfg);
  const RoughPath rp = e.make_rough_path(e.seed);
  const SolveResult sol = solve_mild(e.gen, e.nl, rp, e.u0);
  auto os = ctx.open("solution.csv");
  write_solution(os, sol, rp);
  const auto pieces = config::get<std::size_t>(ctx.cfg, "solve.diagnostic_pieces", 4);
  auto os2 = ctx.open("diagnostics.csv");
  write_csv_header(os2, {"piece", "sup_value", "sup_derivative", "holder_derivative", "holder_remainder",
                         "holder_remainder2", "total"});
  const auto diag = interval_diagnostics(sol, rp, e.norm(), e.gamma, pieces);
  for (std::size_t p = 0; p < diag.size(); ++p)
    write_csv_row(os2, {static_cast<double>(p), diag[p].sup_value, diag[p].sup_derivative, diag[p].holder_derivative,
                        diag[p].holder_remainder, diag[p].holder_remainder2, diag[p].total()});
  ctx.result["steps"] = sol.steps;
  ctx.result["terminal_norm"] = e.norm()(sol.path.value(sol.steps));
  return 0;
}

int cmd_convergence(RunContext& ctx) {
  const Experiment e = load_experiment(ctx.cfg);
  const ConvergenceStudy st = convergence_protocol(e, ctx.jobs);
  auto os = ctx.open("convergence.csv");
  write_csv_header(os, {"steps", "step_size", "error"});
  for (std::size_t i = 0; i < st.steps.size(); ++i)
    write_csv_row(os, {static_cast<double>(st.steps[i]), e.horizon / static_cast<double>(st.steps[i]), st.errors[i]});
  ctx.result["order"] = std::isfinite(st.order) ? Json(st.order) : Json(st.exact ? "inf" : "nan");
  ctx.result["monotone"] = st.monotone;
  ctx.result["exact"] = st.exact;
  const bool ok = st.exact || (st.monotone && st.order > 0);
  ctx.result["pass"] = ok;
  return ok ? 0 : 1;
}

int cmd_gronwall(RunContext& ctx) {
  const Experiment e = load_experiment(ctx.cfg);
  const GronwallProtocol g = gronwall_protocol(e, ctx.jobs);
  auto os = ctx.open("gronwall.csv");
  write_csv_header(os, {"seed", "norm", "sup_value", "sup_derivative", "holder_derivative", "holder_remainder",
                        "holder_remainder2", "rho", "log_bound", "log_margin", "pass"});
  for (const auto& h : g.held_out) {
    const auto& c = h.cert;
    write_csv_row(os, {static_cast<double>(h.seed), c.norm, c.components.sup_value, c.components.sup_derivative,
                       c.components.holder_derivative, c.components.holder_remainder, c.components.holder_remainder2,
                       c.rho, c.log_bound, c.log_margin, c.pass ? 1.0 : 0.0});
  }
  const auto& k = g.held_out.front().cert.constants;
  ctx.result["calibrated_C"] = g.calibrated_C;
  ctx.result["passed"] = g.passed;
  ctx.result["held_out"] = g.held_out.size();
  double min_log_margin = std::numeric_limits<double>::infinity();
  for (const auto& h : g.held_out) min_log_margin = std::min(min_log_margin, h.cert.log_margin);
  ctx.result["min_log_margin"] = min_log_margin;
  ctx.result["first_seed_constants"] = {{"phi1", k.phi1}, {"phi2", k.phi2},     {"phi3", k.phi3}, {"nu", k.nu},
                                        {"log_kappa", k.log_kappa}, {"C2", k.C2}, {"log_C1", k.log_C1}};
  std::cout << "calibrated C = " << g.calibrated_C << ", held-out passes " << g.passed << "/" << g.held_out.size()
            << ", min log margin " << min_log_margin << "\n";
  return g.pass() ? 0 : 1;
}

void write_spectrum(std::ostream& os, const LyapunovEstimate& est) {
  std::vector<std::string> head{"t"};
  for (const auto& h : indexed("lambda", est.exponents.size())) head.push_back(h);
  head.push_back("log_volume");
  write_csv_header(os, head);
  for (std::size_t c = 0; c < est.times.size(); ++c) {
    std::vector<double> row{est.times[c]};
    row.insert(row.end(), est.running[c].begin(), est.running[c].end());
    row.push_back(est.log_volume[c]);
    write_csv_row(os, row);
  }
}

int cmd_lyapunov(RunContext& ctx) {
  const Experiment e = load_experiment(ctx.cfg);
  const LyapunovEstimate est = lyapunov_spectrum(e.lyapunov_problem(), e.lyapunov_options());
  auto os = ctx.open("lyapunov.csv");
  write_spectrum(os, est);
  ctx.result["exponents"] = est.exponents;
  ctx.result["exponent_sum"] = est.exponent_sum;
  ctx.result["volume_slope"] = est.volume_slope;
  for (const auto& c : est.clusters) ctx.result["clusters"].push_back({{"value", c.value}, {"multiplicity", c.multiplicity}});
  bool ok = true;
  if (const Json* expected = config::find(ctx.cfg, "lyapunov.expected")) {
    const auto want = expected->get<std::vector<double>>();
    const double tol = config::get<double>(ctx.cfg, "lyapunov.tolerance", 1e-2);
    if (want.size() != est.exponents.size()) throw ConfigError("lyapunov.expected", "length must equal lyapunov.k");
    for (std::size_t i = 0; i < want.size(); ++i) ok = ok && std::abs(want[i] - est.exponents[i]) <= tol;
  }
  ctx.result["pass"] = ok;
  for (const double l : est.exponents) std::cout << l << ' ';
  std::cout << '\n';
  return ok ? 0 : 1;
}

int cmd_norm_independence(RunContext& ctx) {
  const Experiment e = load_experiment(ctx.cfg);
  const auto alphas = config::get<std::vector<double>>(ctx.cfg, "lyapunov.alpha_list", {0.0, 0.25});
  const auto horizons = config::get<std::vector<double>>(ctx.cfg, "lyapunov.horizons",
                                                         {config::get<double>(ctx.cfg, "lyapunov.horizon", 100.0)});
  const NormIndependence ni = norm_independence_check(e.lyapunov_problem(), e.lyapunov_options(), alphas, horizons, ctx.jobs);
  auto os = ctx.open("norm_independence.csv");
  write_csv_header(os, {"horizon", "max_deviation"});
  for (std::size_t i = 0; i < ni.horizons.size(); ++i) write_csv_row(os, {ni.horizons[i], ni.deviations[i]});
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    auto s = ctx.open("lyapunov_alpha" + std::to_string(a) + ".csv");
    write_spectrum(s, ni.spectra[a]);
  }
  const double tol = config::get<double>(ctx.cfg, "lyapunov.independence_tolerance", 1e-2);
  bool ok = ni.deviations.back() < tol;
  for (std::size_t i = 1; i < ni.deviations.size(); ++i) ok = ok && ni.deviations[i] < ni.deviations[i - 1];
  ctx.result["deviations"] = ni.deviations;
  ctx.result["pass"] = ok;
  return ok ? 0 : 1;
}

int cmd_decay(RunContext& ctx) {
  const Experiment e = load_experiment(ctx.cfg);
  LyapunovOptions o = e.lyapunov_options();
  o.k = 1;
  const LyapunovProblem p = e.lyapunov_problem();
  const double lambda1 = lyapunov_spectrum(p, o).exponents.front();
  const double horizon = config::get<double>(ctx.cfg, "decay.horizon", o.horizon);
  const double eps = config::get<double>(ctx.cfg, "decay.perturbation", 1e-3);
  const double slack = config::get<double>(ctx.cfg, "decay.slack", 0.1);
  Vector y = e.u0;
  y(0) += eps;
  const DecayReport rep = decay_check(p, e.u0, y, horizon, e.alpha, e.seed);
  if (rep.skipped) {
    std::cout << rep.notice << '\n';
    ctx.result["skipped"] = rep.notice;
    return 0;
  }
  auto os = ctx.open("decay.csv");
  write_csv_header(os, {"t", "log_difference"});
  for (std::size_t i = 0; i < rep.times.size(); ++i) write_csv_row(os, {rep.times[i], rep.log_differences[i]});
  const bool ok = rep.rate <= lambda1 + slack;
  ctx.result["rate"] = rep.rate;
  ctx.result["lambda1"] = lambda1;
  ctx.result["fit_end"] = rep.fit_end;
  ctx.result["pass"] = ok;
  std::cout << "separation rate " << rep.rate << ", lambda_1 " << lambda1 << '\n';
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rough PDE simulation, Gronwall certification and Lyapunov spectra"};
  app.require_subcommand(1);
  std::string config_path, out_dir = "rpde_out";
  std::vector<std::string> overrides;
  unsigned jobs = 1;
  using Handler = int (*)(RunContext&);
  struct Command {
    const char* name;
    Handler run;
    const char* help;
  };
  const std::vector<Command> commands{
      {"noise", cmd_noise, "sample the configured Volterra noise"},
      {"lift-check", cmd_lift_check, "lift the noise and report Chen defect, rho_gamma and W"},
      {"kernel-check", cmd_kernel_check, "fit the kernel modulus and check K1/K2"},
      {"cm-check", cmd_cm_check, "Cameron-Martin control ratios under grid refinement"},
      {"solve", cmd_solve, "solve the RPDE along one driver sample"},
      {"convergence", cmd_convergence, "self-convergence over dyadic step sizes"},
      {"gronwall", cmd_gronwall, "calibrate C and certify the a-priori bound on held-out seeds"},
      {"lyapunov", cmd_lyapunov, "Lyapunov spectrum by weighted QR"},
      {"norm-independence", cmd_norm_independence, "compare spectra across interpolation norms"},
      {"decay", cmd_decay, "fit the separation rate of nearby solutions"}};
  for (const auto& [name, handler, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "experiment config (JSON) or a previous manifest.json")->required();
    sub->add_option("-s,--set", overrides, "override a config key, e.g. --set lyapunov.k=2");
    sub->add_option("-o,--out", out_dir, "output directory");
    sub->add_option("-j,--jobs", jobs, "worker threads for multi-sample runs");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string sub = app.get_subcommands().front()->get_name();
  Handler handler = nullptr;
  for (const auto& c : commands)
    if (sub == c.name) handler = c.run;

  RunContext ctx;
  ctx.jobs = std::max(1u, jobs);
  ctx.out = out_dir;
  const auto start = std::chrono::steady_clock::now();
  int status = 0;
  try {
    ctx.cfg = config::load(config_path);
    for (const auto& o : overrides) config::apply_override(ctx.cfg, o);
    fs::create_directories(ctx.out);
    status = handler(ctx);
  } catch (const InvalidArgument& e) {
    std::cerr << "rpde " << sub << ": " << e.what() << '\n';
    return 2;
  } catch (const Json::exception& e) {
    std::cerr << "rpde " << sub << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "rpde " << sub << ": " << e.what() << '\n';
    return 1;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Json manifest{{"subcommand", sub},
                {"config", ctx.cfg},
                {"seed", config::get<std::uint64_t>(ctx.cfg, "seed", 0)},
                {"version", kVersion},
                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION)},
                {"compiler", __VERSION__},
                {"wall_time_s", wall},
                {"outputs", ctx.outputs},
                {"result", ctx.result},
                {"exit_status", status}};
  std::ofstream(ctx.out / "manifest.json") << manifest.dump(2) << '\n';
  return status;
}
