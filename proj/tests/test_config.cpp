#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "stairclimb/config.hpp"
#include "stairclimb/pipeline.hpp"
#include "support.hpp"

namespace sc = stairclimb;
using nlohmann::json;

namespace {

struct ScopedEnv {
  explicit ScopedEnv(const char* value) {
    if (value) ::setenv("STAIRCLIMB_SEED", value, 1);
    else ::unsetenv("STAIRCLIMB_SEED");
  }
  ~ScopedEnv() { ::unsetenv("STAIRCLIMB_SEED"); }
};

}  // namespace

TEST(Config, EmptyObjectGivesDefaults) {
  const auto c = sc::resolve_config(json::object());
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.stage, sc::TrainingStage::Stage2);
  EXPECT_EQ(c.ppo.num_envs, 256);
  EXPECT_EQ(c.iterations, 1500);
  EXPECT_TRUE(c.stall_enabled);
  EXPECT_DOUBLE_EQ(c.stall_speed_threshold, 0.3);
  EXPECT_EQ(c.env.timeout_steps, 400);
}

TEST(Config, NestedOverridesMerge) {
  const auto c = sc::resolve_config(json::parse(R"({
    "terrain_kind": "u_shaped", "stage": "stage1",
    "ppo": {"num_envs": 64, "lr": 1e-3},
    "reward_weights": {"stall": 2.0},
    "curriculum": {"start_level": 3}
  })"));
  EXPECT_EQ(c.terrain_kind, sc::StairKind::UShaped);
  EXPECT_EQ(c.stage, sc::TrainingStage::Stage1);
  EXPECT_EQ(c.ppo.num_envs, 64);
  EXPECT_DOUBLE_EQ(c.ppo.lr, 1e-3);
  EXPECT_EQ(c.ppo.rollout_steps, 48);
  EXPECT_DOUBLE_EQ(c.reward_weights.stall, 2.0);
  EXPECT_EQ(c.curriculum.start_level, 3);
  EXPECT_EQ(c.trainer_options(2).start_level, 3);
  EXPECT_EQ(c.reward_config().stage, sc::TrainingStage::Stage1);
}

TEST(Config, UnknownKeysAndWrongTypesAreRejected) {
  EXPECT_THROW(sc::resolve_config(json::parse(R"({"sed": 3})")), sc::ConfigError);
  EXPECT_THROW(sc::resolve_config(json::parse(R"({"ppo": {"gama": 0.9}})")), sc::ConfigError);
  EXPECT_THROW(sc::resolve_config(json::parse(R"({"seed": "three"})")), sc::ConfigError);
  EXPECT_THROW(sc::resolve_config(json::parse(R"({"ppo": 4})")), sc::ConfigError);
  EXPECT_THROW(sc::resolve_config(json::parse(R"({"terrain_kind": "ramp"})")), sc::ConfigError);
}

TEST(Config, InvalidValuesAreRejected) {
  EXPECT_THROW(sc::resolve_config(json::parse(R"({"ppo": {"gamma": 1.5}})")), sc::ConfigError);
  EXPECT_THROW(sc::resolve_config(json::parse(R"({"curriculum": {"start_level": 0}})")), sc::ConfigError);
  EXPECT_THROW(sc::resolve_config(json::parse(R"({"eval": {"heatmap_yaw": "north"}})")), sc::ConfigError);
  EXPECT_THROW(sc::resolve_config(json::parse(R"({"iterations": -1})")), sc::ConfigError);
  EXPECT_THROW(sc::resolve_config(json::parse(R"({"ppo": {"num_envs": 10, "rollout_steps": 3, "minibatches": 4}})")),
               sc::ConfigError);
}

TEST(Config, ResolvedJsonRoundTrips) {
  const auto c = sc::resolve_config(json::parse(R"({"seed": 77, "terrain_kind": "spiral", "env": {"dt": 0.04}})"));
  const json j = c;
  const auto back = sc::resolve_config(j);
  EXPECT_EQ(json(back).dump(), j.dump());
  EXPECT_EQ(j.at("terrain_kind"), "spiral");
}

TEST(Config, SeedEnvironmentOverridesFile) {
  sc::testing::TempDir dir("cfg");
  {
    std::ofstream f(dir / "c.json");
    f << R"({"seed": 5})";
  }
  {
    ScopedEnv env(nullptr);
    EXPECT_EQ(sc::load_run_config(dir / "c.json").seed, 5u);
  }
  {
    ScopedEnv env("42");
    EXPECT_EQ(sc::load_run_config(dir / "c.json").seed, 42u);
  }
  {
    ScopedEnv env("-4");
    EXPECT_THROW(sc::load_run_config(dir / "c.json"), sc::ConfigError);
  }
  EXPECT_THROW(sc::load_run_config(dir / "missing.json"), sc::ConfigError);
  {
    std::ofstream f(dir / "bad.json");
    f << "{ not json";
  }
  EXPECT_THROW(sc::load_run_config(dir / "bad.json"), sc::ConfigError);
}

TEST(Config, ParseSeed) {
  EXPECT_FALSE(sc::parse_seed(nullptr, "x").has_value());
  EXPECT_EQ(*sc::parse_seed("18446744073709551615", "x"), 18446744073709551615ull);
  EXPECT_THROW(sc::parse_seed("", "x"), sc::ConfigError);
  EXPECT_THROW(sc::parse_seed("12a", "x"), sc::ConfigError);
}

TEST(Pipeline, ParseLevels) {
  EXPECT_EQ(sc::parse_levels("1..6"), (std::vector<int>{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(sc::parse_levels("3,4"), (std::vector<int>{3, 4}));
  EXPECT_EQ(sc::parse_levels("5"), (std::vector<int>{5}));
  EXPECT_THROW(sc::parse_levels("4..2"), std::invalid_argument);
  EXPECT_THROW(sc::parse_levels("a,b"), std::invalid_argument);
  EXPECT_THROW(sc::parse_levels(""), std::invalid_argument);
}

TEST(Pipeline, CheckpointNamesCarryStageAndIteration) {
  EXPECT_EQ(sc::checkpoint_path("run", sc::TrainingStage::Stage1, 40).generic_string(),
            "run/checkpoints/stage1_iter00040.json");
  EXPECT_EQ(sc::final_checkpoint_path("run", sc::TrainingStage::Stage2).generic_string(),
            "run/checkpoints/stage2_final.json");
}
