#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

namespace {

namespace fs = std::filesystem;

const char* kSmallConfig = R"({
  "seed": 5,
  "sim": {"fleet_size": 3, "num_stops": 5, "stop_spacing": 1000, "horizon": 1800, "headway": 300},
  "datagen": {"k_obs": 3},
  "cem": {"population": 20, "iterations": 3, "replications": 1},
  "filter": {"n_particles": 20, "obs_interval": 60, "forecast_horizon": 120, "forecast_particles": 10},
  "experiments": {"max_demand_grid": [0.5, 2], "xi_grid": [5], "replications": 1}
})";

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("bussim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write("small.json", kSmallConfig);
  }
  void TearDown() override { fs::remove_all(dir_); }

  void write(const std::string& name, const std::string& text) { std::ofstream(dir_ / name) << text; }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Runs the tool, returning its exit status; stderr lands in err_.
  int run(const std::string& args) {
    const std::string cmd = std::string(BUSSIM_CLI_PATH) + " " + args + " >" + path("stdout.txt") + " 2>" + path("stderr.txt");
    const int status = std::system(cmd.c_str());
    err_ = slurp(dir_ / "stderr.txt");
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path dir_;
  std::string err_;
};

TEST_F(Cli, GenerateCalibrateAssimilateScenario) {
  const std::string cfg = "--config " + path("small.json");
  ASSERT_EQ(run("generate " + cfg + " --out " + path("data") + " --max-demand 2 --xi 5"), 0) << err_;
  EXPECT_TRUE(fs::exists(dir_ / "data" / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir_ / "data" / "run_2.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "data" / "realtime.csv"));

  ASSERT_EQ(run("calibrate " + cfg + " --data " + path("data") + " --out " + path("calib")), 0) << err_;
  EXPECT_TRUE(fs::exists(dir_ / "calib" / "cem_trace.csv"));

  ASSERT_EQ(run("assimilate " + cfg + " --data " + path("data") + " --calibration " + path("calib") + " --out " +
                path("filter") + " --jobs 2"),
            0)
      << err_;
  EXPECT_TRUE(fs::exists(dir_ / "filter" / "filter_log.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "filter" / "forecasts.csv"));
  EXPECT_NE(slurp(dir_ / "filter" / "manifest.json").find(R"("calibration")"), std::string::npos);

  for (int s = 1; s <= 4; ++s) {
    std::string args = "scenario " + cfg + " --scenario " + std::to_string(s) + " --data " + path("data") +
                       " --out " + path("s" + std::to_string(s));
    if (s == 2 || s == 3) args += " --calibration " + path("calib");
    ASSERT_EQ(run(args), 0) << "scenario " << s << ": " << err_;
    EXPECT_TRUE(fs::exists(dir_ / ("s" + std::to_string(s)) / "trajectory.csv"));
  }
  EXPECT_EQ(run("scenario " + cfg + " --scenario 2 --data " + path("data") + " --out " + path("s2b")), 2);
}

TEST_F(Cli, CalibrateRejectsFleetMismatch) {
  ASSERT_EQ(run("generate --config " + path("small.json") + " --out " + path("data")), 0) << err_;
  std::string other = kSmallConfig;
  other.replace(other.find(R"("fleet_size": 3)"), 15, R"("fleet_size": 4)");
  write("other.json", other);
  EXPECT_EQ(run("calibrate --config " + path("other.json") + " --data " + path("data") + " --out " + path("c")), 3);
  EXPECT_NE(err_.find("fleet_size"), std::string::npos) << err_;
  EXPECT_NE(err_.find("dataset"), std::string::npos) << err_;
}

TEST_F(Cli, AssimilateRejectsForeignCalibration) {
  const std::string cfg = "--config " + path("small.json");
  ASSERT_EQ(run("generate " + cfg + " --out " + path("a")), 0) << err_;
  ASSERT_EQ(run("generate " + cfg + " --seed 6 --out " + path("b")), 0) << err_;
  ASSERT_EQ(run("calibrate " + cfg + " --data " + path("a") + " --out " + path("ca")), 0) << err_;
  EXPECT_EQ(run("assimilate " + cfg + " --data " + path("b") + " --calibration " + path("ca") + " --out " + path("f")),
            3);
  EXPECT_NE(err_.find("fingerprint mismatch"), std::string::npos) << err_;
}

TEST_F(Cli, SweepIsByteReproducible) {
  const std::string base = "sweep --config " + path("small.json") + " --replications 1 --max-demand 2 --xi 5";
  ASSERT_EQ(run(base + " --out " + path("r1")), 0) << err_;
  ASSERT_EQ(run(base + " --out " + path("r2") + " --jobs 3"), 0) << err_;
  const std::string report = slurp(dir_ / "r1" / "report.csv");
  EXPECT_EQ(report.rfind("parameter,value,", 0), 0u);
  EXPECT_EQ(report, slurp(dir_ / "r2" / "report.csv"));
  EXPECT_EQ(slurp(dir_ / "r1" / "replications.csv"), slurp(dir_ / "r2" / "replications.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "r1" / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir_ / "r1" / "overlays" / "maxDemand_2.csv"));
}

TEST_F(Cli, ConfigAndFlagErrors) {
  write("bad.json", R"({"cem": {"elite_ratio": 1.5}})");
  EXPECT_EQ(run("sweep --config " + path("bad.json") + " --out " + path("x")), 2);
  EXPECT_NE(err_.find("elite ratio must lie in (0,1)"), std::string::npos) << err_;
  write("dt.json", R"({"sim": {"dt": 0}})");
  EXPECT_EQ(run("generate --config " + path("dt.json") + " --out " + path("x")), 2);
  EXPECT_NE(run("generate --out " + path("x") + " --frobnicate"), 0);
  EXPECT_NE(run("generate --config " + path("missing.json") + " --out " + path("x")), 0);
  EXPECT_NE(run("scenario --scenario 7 --data " + dir_.string() + " --out " + path("x")), 0);
}

}  // namespace
