#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "stairclimb/grid_io.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using stairclimb::testing::slurp;
using stairclimb::testing::TempDir;

namespace {

int run_cli(const std::string& args, const std::string& env = "") {
  std::string cmd = env.empty() ? "" : env + " ";
  cmd += std::string(STAIRCLIMB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int count_lines(const fs::path& p) {
  std::ifstream in(p);
  int n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

// Small enough to finish in seconds.
std::string tiny_config(const fs::path& out, const std::string& extra = "") {
  return R"({"iterations": 2, "checkpoint_every": 1, "out_dir": ")" + out.string() +
         R"(", "ppo": {"num_envs": 8, "rollout_steps": 8, "epochs": 1, "minibatches": 2},
            "eval": {"episodes": 2})" + extra + "}";
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("dance"), 2);
  TempDir dir("cli_usage");
  EXPECT_EQ(run_cli("gen-terrain --kind straight --level 11 --mode train --out " + dir.path().string()), 2);
  EXPECT_EQ(run_cli("gen-terrain --kind straight --level 7 --mode test --out " + dir.path().string()), 2);
  EXPECT_EQ(run_cli("gen-terrain --kind escalator --level 1 --out " + dir.path().string()), 2);
  EXPECT_EQ(run_cli("train --config " + (dir / "missing.json").string()), 2);
  write_file(dir / "bad.json", R"({"unknown_key": 1})");
  EXPECT_EQ(run_cli("train --config " + (dir / "bad.json").string()), 2);
  EXPECT_EQ(run_cli("eval --checkpoint " + (dir / "nope.json").string() + " --terrain straight"), 3);
}

TEST(Cli, GenTerrainIsByteDeterministic) {
  TempDir dir("cli_gen");
  ASSERT_EQ(run_cli("gen-terrain --kind u_shaped --level 1 --mode train --seed 3 --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run_cli("gen-terrain --kind u_shaped --level 1 --mode train --seed 3 --out " + (dir / "b").string()), 0);
  for (const char* ext : {".csv", ".pgm", ".json"}) {
    const std::string name = std::string("u_shaped_train_L1") + ext;
    ASSERT_TRUE(fs::exists(dir / "a" / name)) << name;
    EXPECT_EQ(slurp(dir / "a" / name), slurp(dir / "b" / name)) << name;
  }
  const auto manifest = stairclimb::read_json(dir / "a" / "u_shaped_train_L1.json");
  EXPECT_NEAR(manifest.at("goal_pose").at(2).get<double>(), 1.44, 1e-9);
}

TEST(Cli, TrainWarmStartEvalTransferHeatmap) {
  TempDir dir("cli_pipeline");
  const fs::path s1 = dir / "s1", s2 = dir / "s2";
  write_file(dir / "s1.json", tiny_config(s1, R"(, "stage": "stage1", "terrain_kind": "pyramid")"));
  write_file(dir / "s2.json", tiny_config(s2, R"(, "terrain_kind": "u_shaped")"));
  ASSERT_EQ(run_cli("train --config " + (dir / "s1.json").string()), 0);
  for (const char* f : {"metrics.csv", "resolved_config.json", "train_summary.json",
                        "checkpoints/stage1_iter00000.json", "checkpoints/stage1_iter00001.json",
                        "checkpoints/stage1_iter00002.json", "checkpoints/stage1_final.json"}) {
    EXPECT_TRUE(fs::exists(s1 / f)) << f;
  }
  EXPECT_EQ(count_lines(s1 / "metrics.csv"), 3);
  const auto resolved = stairclimb::read_json(s1 / "resolved_config.json");
  EXPECT_EQ(resolved.at("stage"), "stage1");
  EXPECT_EQ(resolved.at("ppo").at("gamma").get<double>(), 0.99);

  const std::string warm = (s1 / "checkpoints" / "stage1_final.json").string();
  ASSERT_EQ(run_cli("train --config " + (dir / "s2.json").string() + " --warm-start " + warm), 0);
  EXPECT_EQ(slurp(s2 / "checkpoints" / "stage2_iter00000.bin"), slurp(s1 / "checkpoints" / "stage1_final.bin"));
  EXPECT_NE(slurp(s2 / "checkpoints" / "stage2_final.bin"), slurp(s1 / "checkpoints" / "stage1_final.bin"));
  EXPECT_EQ(run_cli("train --config " + (dir / "s2.json").string() + " --out " + (dir / "x").string() +
                    " --warm-start " + (dir / "nope.json").string()),
            3);

  const std::string ck = (s2 / "checkpoints" / "stage2_final.json").string();
  ASSERT_EQ(run_cli("eval --config " + (dir / "s2.json").string() + " --checkpoint " + ck +
                    " --terrain u_shaped --levels 1..6 --trajectories 1 --out " + (dir / "eval" / "levels.csv").string()),
            0);
  EXPECT_EQ(count_lines(dir / "eval" / "levels.csv"), 7);
  EXPECT_TRUE(fs::exists(dir / "eval" / "trajectories"));
  EXPECT_EQ(run_cli("eval --checkpoint " + ck + " --levels 0..3"), 2);

  const std::string models = warm + "," + ck;
  ASSERT_EQ(run_cli("transfer --config " + (dir / "s2.json").string() + " --models " + models +
                    " --terrains straight,u_shaped --out " + (dir / "tr").string()),
            0);
  EXPECT_EQ(count_lines(dir / "tr" / "transfer_matrix.csv"), 5);
  EXPECT_EQ(run_cli("transfer --config " + (dir / "s2.json").string() + " --models " + ck + "," +
                    (dir / "gone.json").string() + " --terrains u_shaped --out " + (dir / "tr2").string()),
            3);
  const auto partial = slurp(dir / "tr2" / "transfer_matrix.csv");
  EXPECT_NE(partial.find("gone,u_shaped,absent"), std::string::npos);

  ASSERT_EQ(run_cli("heatmap --checkpoint " + ck + " --terrain u_shaped --spacing 0.25 --out " +
                    (dir / "hm").string()),
            0);
  for (const char* f : {"heatmap_u_shaped.csv", "heatmap_u_shaped.pgm", "heatmap_u_shaped.json"}) {
    EXPECT_TRUE(fs::exists(dir / "hm" / f)) << f;
  }
  EXPECT_EQ(run_cli("heatmap --checkpoint " + ck + " --terrain u_shaped --yaw sideways"), 2);
}

TEST(Cli, SeedPrecedenceAndDeterminism) {
  TempDir dir("cli_seed");
  write_file(dir / "c.json", tiny_config(dir / "unused"));
  const std::string cfg = (dir / "c.json").string();
  ASSERT_EQ(run_cli("train --config " + cfg + " --seed 7 --workers 1 --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run_cli("train --config " + cfg + " --seed 7 --workers 3 --out " + (dir / "b").string()), 0);
  EXPECT_EQ(slurp(dir / "a" / "metrics.csv"), slurp(dir / "b" / "metrics.csv"));
  EXPECT_EQ(slurp(dir / "a" / "checkpoints" / "stage2_final.bin"),
            slurp(dir / "b" / "checkpoints" / "stage2_final.bin"));

  ASSERT_EQ(run_cli("train --config " + cfg + " --out " + (dir / "env").string(), "STAIRCLIMB_SEED=7"), 0);
  EXPECT_EQ(stairclimb::read_json(dir / "env" / "resolved_config.json").at("seed").get<int>(), 7);
  EXPECT_EQ(slurp(dir / "env" / "metrics.csv"), slurp(dir / "a" / "metrics.csv"));

  ASSERT_EQ(run_cli("train --config " + cfg + " --seed 8 --out " + (dir / "flag").string(), "STAIRCLIMB_SEED=7"), 0);
  EXPECT_EQ(stairclimb::read_json(dir / "flag" / "resolved_config.json").at("seed").get<int>(), 8);
  EXPECT_EQ(run_cli("train --config " + cfg + " --out " + (dir / "bad").string(), "STAIRCLIMB_SEED=x"), 2);
}
