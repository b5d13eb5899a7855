#include <gtest/gtest.h>

#include <sys/wait.h>

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ckb/io.hpp"
#include "ckb/kernels.hpp"

namespace fs = std::filesystem;
using namespace ckb;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("ckb_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  // Runs the executable; stderr goes to <dir>/stderr.txt.
  int exec(const std::string& args, const std::string& env = "") const {
    const std::string cmd = env + " \"" CKBROWNIAN_EXE "\" " + args + " >/dev/null 2>\"" + (dir_ / "stderr.txt").string() + "\"";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }

  std::string slurp(const fs::path& p) const {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

const char* zero_force_cfg =
    "m = 1\neta = 1\nD = 0\nsigma0 = 1\nt_end = 5\nn_steps = 500\nforce = zero\n";

const char* small_ensemble_cfg =
    "m = 1\neta = 1\nD = 0.1\nsigma0 = 1\nt_end = 5\nn_steps = 200\nn_paths = 64\nseed = 3\n";

}  // namespace

TEST_F(CliTest, SimulateZeroForceWidthMatchesClosedForm) {
  const auto cfg = write_config("a.cfg", zero_force_cfg);
  ASSERT_EQ(exec("simulate --config " + cfg.string() + " --out " + (dir_ / "out").string()), 0);
  std::ifstream f(dir_ / "out" / "simulate_analytic.csv");
  const auto t = CsvTable::read(f);
  ASSERT_EQ(t.header(), simulate_csv_columns());
  ASSERT_EQ(t.rows().size(), 501u);
  for (const auto& r : t.rows()) {
    const double tau = 1.0 - std::exp(-r[0]);
    EXPECT_NEAR(r[1], tau, 1e-14);
    EXPECT_NEAR(r[5], std::sqrt(1.0 + tau * tau / 4.0), 1e-14);
    EXPECT_NEAR(std::sqrt(r[4]), r[5], 1e-8);
    EXPECT_NEAR(r[2], 1.0, 1e-12);
    EXPECT_EQ(r[6], 0.0);
  }
}

TEST_F(CliTest, SimulateBothEnginesAgree) {
  const auto cfg = write_config("a.cfg", std::string(zero_force_cfg) + "engine = both\n");
  ASSERT_EQ(exec("simulate --config " + cfg.string() + " --out " + dir_.string()), 0);
  EXPECT_TRUE(fs::exists(dir_ / "simulate_solver.csv"));
  const auto m = nlohmann::json::parse(slurp(dir_ / "simulate_manifest.json"));
  EXPECT_EQ(m["outputs"].size(), 2u);
  for (const auto& c : m["checks"]) EXPECT_TRUE(c["pass"].get<bool>()) << c.dump();
}

TEST_F(CliTest, RepeatedRunsAreIdenticalUpToTimestamp) {
  const auto cfg = write_config("a.cfg", "m = 1\neta = 1\nD = 0.3\nsigma0 = 1\nt_end = 3\nn_steps = 300\nseed = 9\n");
  ASSERT_EQ(exec("simulate --config " + cfg.string() + " --out " + (dir_ / "r1").string()), 0);
  ASSERT_EQ(exec("simulate --config " + cfg.string() + " --out " + (dir_ / "r2").string()), 0);
  EXPECT_EQ(slurp(dir_ / "r1" / "simulate_analytic.csv"), slurp(dir_ / "r2" / "simulate_analytic.csv"));
  auto a = nlohmann::json::parse(slurp(dir_ / "r1" / "simulate_manifest.json"));
  auto b = nlohmann::json::parse(slurp(dir_ / "r2" / "simulate_manifest.json"));
  a.erase("timestamp");
  b.erase("timestamp");
  EXPECT_EQ(a, b);
}

TEST_F(CliTest, SeedFlagOverridesConfig) {
  const auto cfg = write_config("a.cfg", "m = 1\neta = 1\nD = 0.3\nsigma0 = 1\nt_end = 3\nn_steps = 300\nseed = 9\n");
  ASSERT_EQ(exec("simulate --config " + cfg.string() + " --out " + (dir_ / "r1").string()), 0);
  ASSERT_EQ(exec("simulate --config " + cfg.string() + " --seed 10 --out " + (dir_ / "r2").string()), 0);
  EXPECT_NE(slurp(dir_ / "r1" / "simulate_analytic.csv"), slurp(dir_ / "r2" / "simulate_analytic.csv"));
}

TEST_F(CliTest, MissingMassExitsWithConfigError) {
  const auto cfg = write_config("bad.cfg", "eta = 1\nD = 0\nsigma0 = 1\nt_end = 5\nn_steps = 500\n");
  EXPECT_EQ(exec("simulate --config " + cfg.string() + " --out " + dir_.string()), 2);
  EXPECT_NE(slurp(dir_ / "stderr.txt").find("'m'"), std::string::npos);
}

TEST_F(CliTest, UnphysicalValueExitsWithConfigError) {
  const auto cfg = write_config("bad.cfg", "m = 1\neta = -1\nD = 0\nsigma0 = 1\nt_end = 5\nn_steps = 500\n");
  EXPECT_EQ(exec("simulate --config " + cfg.string() + " --out " + dir_.string()), 2);
  EXPECT_NE(slurp(dir_ / "stderr.txt").find("eta"), std::string::npos);
}

TEST_F(CliTest, EnsembleCsvHasFixedColumns) {
  const auto cfg = write_config("e.cfg", small_ensemble_cfg);
  ASSERT_EQ(exec("ensemble --config " + cfg.string() + " --out " + dir_.string()), 0);
  std::ifstream f(dir_ / "ensemble_analytic.csv");
  std::string header;
  std::getline(f, header);
  EXPECT_EQ(header, "t,tau,center_mean,center_var,dx_qu,dx_cl_sample,dx_cl_analytic,dx_total");
  const auto rep = nlohmann::json::parse(slurp(dir_ / "ensemble_report.json"));
  EXPECT_EQ(rep["n_paths"], 64);
  EXPECT_EQ(rep["seeds"].size(), 64u);
  EXPECT_EQ(rep["base_seed"], 3);
}

TEST_F(CliTest, EnsembleIndependentOfThreadCount) {
  const auto cfg = write_config("e.cfg", small_ensemble_cfg);
  ASSERT_EQ(exec("ensemble --config " + cfg.string() + " --out " + (dir_ / "t1").string(), "CKBROWNIAN_THREADS=1"), 0);
  ASSERT_EQ(exec("ensemble --config " + cfg.string() + " --out " + (dir_ / "t3").string(), "CKBROWNIAN_THREADS=3"), 0);
  EXPECT_EQ(slurp(dir_ / "t1" / "ensemble_analytic.csv"), slurp(dir_ / "t3" / "ensemble_analytic.csv"));
}

TEST_F(CliTest, EnsembleBothEnginesReportsEquivalence) {
  const auto cfg = write_config("e.cfg", std::string(small_ensemble_cfg) + "engine = both\nn_points = 512\n");
  ASSERT_EQ(exec("ensemble --config " + cfg.string() + " --out " + dir_.string()), 0);
  const auto rep = nlohmann::json::parse(slurp(dir_ / "ensemble_report.json"));
  EXPECT_TRUE(rep["engine_equivalence"]["pass"].get<bool>()) << rep["engine_equivalence"].dump();
  EXPECT_TRUE(fs::exists(dir_ / "ensemble_solver.csv"));
}
