#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "rpde/protocols.hpp"
#include "support.hpp"

using namespace rpde;
using rpde::testing::config_path;

namespace {

Json base_config() {
  return Json::parse(R"({"name": "t", "seed": 1, "steps": 32, "gamma": 0.4, "generator": "laplace:m=3",
                         "nonlinearity": {"G": {"kind": "additive", "g": 1.0}}, "u0": 0.5})");
}

std::string error_of(const Json& cfg) {
  try {
    load_experiment(cfg);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DottedLookupAndOverride) {
  Json cfg = base_config();
  EXPECT_EQ(config::get<std::string>(cfg, "nonlinearity.G.kind"), "additive");
  EXPECT_EQ(config::find(cfg, "nonlinearity.F.kind"), nullptr);
  EXPECT_EQ(config::get<double>(cfg, "nonlinearity.F.c", 2.5), 2.5);
  config::apply_override(cfg, "nonlinearity.F.kind=linear");
  config::apply_override(cfg, "nonlinearity.F.c=0.25");
  config::apply_override(cfg, "lyapunov.alpha_list=[0, 0.25]");
  EXPECT_EQ(cfg["nonlinearity"]["F"]["kind"], "linear");
  EXPECT_EQ(cfg["nonlinearity"]["F"]["c"], 0.25);
  EXPECT_EQ(cfg["lyapunov"]["alpha_list"].size(), 2u);
  config::apply_override(cfg, "u0=7");
  EXPECT_TRUE(cfg["u0"].is_number());
  EXPECT_THROW(config::apply_override(cfg, "novalue"), InvalidArgument);
  EXPECT_THROW(config::apply_override(cfg, "=3"), InvalidArgument);
}

TEST(Config, ErrorsNameTheKey) {
  Json cfg = base_config();
  EXPECT_EQ(error_of(cfg), "");
  cfg["gamma"] = 0.3;
  EXPECT_NE(error_of(cfg).find("'gamma'"), std::string::npos);
  cfg = base_config();
  cfg["steps"] = "many";
  EXPECT_NE(error_of(cfg).find("'steps'"), std::string::npos);
  cfg = base_config();
  cfg["noise"] = {{"kernel", "levy"}};
  EXPECT_NE(error_of(cfg).find("'noise.kernel'"), std::string::npos);
  cfg = base_config();
  cfg["u0"] = {1.0, 2.0};
  EXPECT_NE(error_of(cfg).find("'u0'"), std::string::npos);
  cfg = base_config();
  cfg["nonlinearity"]["G"]["p"] = 5;
  EXPECT_NE(error_of(cfg).find("'nonlinearity.G.p'"), std::string::npos);
  cfg = base_config();
  cfg["nonlinearity"]["sigma"] = 0.35;
  EXPECT_EQ(error_of(cfg), "");
  cfg["gronwall"] = Json::object();
  EXPECT_NE(error_of(cfg).find("'nonlinearity.sigma'"), std::string::npos);
  cfg = base_config();
  cfg["nonlinearity"]["F"] = {{"kind", "linear"}};
  EXPECT_NE(error_of(cfg).find("'nonlinearity.F.c'"), std::string::npos);
  cfg = base_config();
  cfg["generator"] = "laplace:m=0";
  EXPECT_NE(error_of(cfg).find("'generator'"), std::string::npos);
  cfg = base_config();
  cfg["lyapunov"] = {{"k", 4}};
  EXPECT_THROW(load_experiment(cfg).lyapunov_options(), ConfigError);
  cfg["lyapunov"] = {{"init", "sobol"}};
  EXPECT_THROW(load_experiment(cfg).lyapunov_problem(), ConfigError);
}

TEST(Config, MatrixValues) {
  Json cfg = Json::parse(R"({"a": [[1, 2], [3, 4]], "b": 0.5, "c": [[1, 2]]})");
  const Matrix a = config::matrix_from(cfg, "a", 2, 2);
  EXPECT_EQ(a(1, 0), 3.0);
  EXPECT_EQ(config::matrix_from(cfg, "b", 2, 3), Matrix::Constant(2, 3, 0.5));
  EXPECT_THROW(config::matrix_from(cfg, "c", 2, 2), ConfigError);
  EXPECT_THROW(config::matrix_from(cfg, "d", 2, 2), ConfigError);
}

TEST(Config, LoadAcceptsManifests) {
  const auto dir = std::filesystem::temp_directory_path() / "rpde_config_test";
  std::filesystem::create_directories(dir);
  const Json cfg = base_config();
  {
    std::ofstream(dir / "manifest.json") << Json{{"subcommand", "solve"}, {"config", cfg}}.dump(2);
    std::ofstream(dir / "broken.json") << "{ not json";
  }
  EXPECT_EQ(config::load((dir / "manifest.json").string()), cfg);
  EXPECT_THROW(config::load((dir / "broken.json").string()), InvalidArgument);
  EXPECT_THROW(config::load((dir / "absent.json").string()), InvalidArgument);
  std::filesystem::remove_all(dir);
}

TEST(Presets, AllLoad) {
  for (const auto& entry : std::filesystem::directory_iterator(RPDE_CONFIG_DIR)) {
    SCOPED_TRACE(entry.path().string());
    const Experiment e = load_experiment_file(entry.path().string());
    EXPECT_FALSE(e.name.empty());
    EXPECT_EQ(static_cast<std::size_t>(e.u0.size()), e.gen.dim());
    if (config::find(e.cfg, "lyapunov")) {
      EXPECT_NO_THROW(e.lyapunov_problem());
      EXPECT_NO_THROW(e.lyapunov_options());
    }
  }
}

TEST(Presets, BuildExpectedProblems) {
  const Experiment ou = rpde::testing::preset("additive_ou");
  EXPECT_EQ(ou.gen.dim(), 4u);
  EXPECT_EQ(ou.noise_dim, 2u);
  EXPECT_TRUE(ou.nl.diffusion.additive);
  const Experiment tanh = rpde::testing::preset("g_tanh");
  EXPECT_FALSE(tanh.nl.diffusion.additive);
  EXPECT_GT(tanh.nl.diffusion.bound, 0.0);
  const Experiment smooth = rpde::testing::preset("smooth_driver");
  EXPECT_TRUE(smooth.driver.smooth());
  const Experiment periodic = rpde::testing::preset("periodic");
  EXPECT_EQ(periodic.lyapunov_options().k, 3u);
}

TEST(Protocols, SeedRangesMustBeDisjoint) {
  Json cfg = config::load(config_path("additive_ou"));
  config::apply_override(cfg, "gronwall.test_offset=1050");
  EXPECT_THROW(gronwall_protocol(load_experiment(cfg)), ConfigError);
  config::apply_override(cfg, "gronwall.train_seeds=0");
  EXPECT_THROW(gronwall_protocol(load_experiment(cfg)), ConfigError);
}

TEST(Protocols, SmallGronwallRun) {
  Json cfg = config::load(config_path("additive_ou"));
  config::apply_override(cfg, "gronwall.train_seeds=4");
  config::apply_override(cfg, "gronwall.test_seeds=4");
  config::apply_override(cfg, "gronwall.steps=64");
  const auto res = gronwall_protocol(load_experiment(cfg), 2);
  EXPECT_GE(res.calibrated_C, 1.5);
  EXPECT_EQ(res.held_out.size(), 4u);
  EXPECT_EQ(res.held_out.front().seed, 100000u);
  EXPECT_TRUE(res.pass());
}

TEST(Protocols, ConvergenceAveragesSeeds) {
  Json cfg = config::load(config_path("additive_ou"));
  config::apply_override(cfg, "convergence.seeds=2");
  config::apply_override(cfg, "convergence.reference_steps=256");
  config::apply_override(cfg, "convergence.levels=[16, 32, 64]");
  const Experiment e = load_experiment(cfg);
  const auto avg = convergence_protocol(e);
  ASSERT_EQ(avg.errors.size(), 3u);
  double sq = 0;
  for (std::uint64_t s = 0; s < 2; ++s) {
    const auto one = convergence_study(e.gen, e.nl, e.make_rough_path(e.seed + s, e.horizon, 256), e.u0, {16, 32, 64}, e.norm());
    sq += one.errors[0] * one.errors[0];
  }
  EXPECT_NEAR(avg.errors[0], std::sqrt(sq / 2), 1e-15);
  config::apply_override(cfg, "convergence.seeds=0");
  EXPECT_THROW(convergence_protocol(load_experiment(cfg)), ConfigError);
}
