#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"

namespace prodmed {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("prodmed_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }
  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

TEST_F(CliTest, MedianOfFermatTriangleMatchesGridSearch) {
  const auto data = write("fermat.csv", "m_1,n_1\n0,0\n4,0\n0,3\n");
  const Outcome o = invoke({"median", "--alpha", "1.0", data.string()});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  const auto j = nlohmann::json::parse(o.out);
  const double x = j.at("location").at("m")[0];
  const double y = j.at("location").at("n")[0];
  constexpr int kGrid = 400;
  const double dx = 4.0 / (kGrid - 1), dy = 3.0 / (kGrid - 1);
  double best = 1e300, bx = 0, by = 0;
  for (int i = 0; i < kGrid; ++i) {
    for (int k = 0; k < kGrid; ++k) {
      const double px = i * dx, py = k * dy;
      const double f = std::hypot(px, py) + std::hypot(px - 4, py) + std::hypot(px, py - 3);
      if (f < best) {
        best = f;
        bx = px;
        by = py;
      }
    }
  }
  EXPECT_LE(std::abs(x - bx), dx);
  EXPECT_LE(std::abs(y - by), dy);
  EXPECT_TRUE(j.at("converged").get<bool>());
}

TEST_F(CliTest, MedianCsvFormat) {
  const auto data = write("d.csv", "m_1,n_1\n0,0\n2,2\n");
  const Outcome o = invoke({"median", "--format", "csv", data.string()});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  EXPECT_EQ(o.out.substr(0, o.out.find('\n')), "alpha,objective,iterations,converged,m_1,n_1");
}

TEST_F(CliTest, BalanceOnSymmetricPair) {
  const auto data = write("pair.csv", "m_1,n_1\n0,0\n1,1\n");
  const Outcome o = invoke({"balance", "--no-sandwich", data.string()});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  EXPECT_NEAR(nlohmann::json::parse(o.out).at("alpha").get<double>(), 1.0, 1e-6);
}

TEST_F(CliTest, ExperimentRunsAreByteIdentical) {
  const auto a = dir_ / "a";
  const auto b = dir_ / "b";
  const Outcome oa = invoke({"experiment", "1", "--n", "300", "--reps", "50", "--seed", "7", "--out", a.string()});
  const Outcome ob = invoke({"experiment", "1", "--n", "300", "--reps", "50", "--seed", "7", "--threads", "1",
                             "--out", b.string()});
  ASSERT_EQ(oa.code, cli::kExitOk) << oa.err;
  ASSERT_EQ(ob.code, cli::kExitOk) << ob.err;
  EXPECT_EQ(oa.out, ob.out);
  for (const char* f : {"summary.csv", "summary.json", "replications.csv", "path.csv", "meta.json"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST_F(CliTest, ConfigFileFeedsExperiment) {
  const auto conf = write("run.conf", "experiment = 1\nn = 20\nreps = 2\n");
  const Outcome o = invoke({"experiment", "1", "--config", conf.string(), "--out", (dir_ / "r").string()});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  EXPECT_EQ(nlohmann::json::parse(slurp(dir_ / "r" / "meta.json")).at("config").at("n"), "20");
}

TEST_F(CliTest, MalformedInputIsUsageErrorWithLineNumber) {
  const auto data = write("bad.csv", "m_1,n_1\n1,2\nx,3\n");
  const Outcome o = invoke({"median", data.string()});
  EXPECT_EQ(o.code, cli::kExitUsage);
  EXPECT_NE(o.err.find("bad.csv:3: invalid number 'x'"), std::string::npos) << o.err;
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(invoke({}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"median"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"median", (dir_ / "missing.csv").string()}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"experiment", "9"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, cli::kExitUsage);
  const auto data = write("d.csv", "m_1,n_1\n0,0\n2,2\n");
  EXPECT_EQ(invoke({"median", "--alpha", "2.5", data.string()}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"median", "--format", "xml", data.string()}).code, cli::kExitUsage);
}

TEST_F(CliTest, NumericalFailureExitCode) {
  // Identical observations: both radial scales vanish and no weight can be formed.
  const auto data = write("same.csv", "m_1,n_1\n1,1\n1,1\n1,1\n");
  const Outcome o = invoke({"calibrate", data.string()});
  EXPECT_EQ(o.code, cli::kExitNumerical) << o.err;
}

TEST_F(CliTest, HelpExitsCleanly) {
  const Outcome o = invoke({"--help"});
  EXPECT_EQ(o.code, cli::kExitOk);
  EXPECT_NE(o.out.find("median"), std::string::npos);
}

TEST_F(CliTest, CalibrateAndPathProduceJson) {
  std::string text = "m_1,m_2,n_1\n";
  for (int i = 0; i < 30; ++i) {
    text += std::to_string(i % 7) + "," + std::to_string((i * 3) % 5) + "," + std::to_string((i * 2) % 11) + "\n";
  }
  const auto data = write("d.csv", text);
  const Outcome c = invoke({"calibrate", "--covariance", data.string()});
  ASSERT_EQ(c.code, cli::kExitOk) << c.err;
  const auto jc = nlohmann::json::parse(c.out);
  EXPECT_GT(jc.at("alpha_sc").get<double>(), 0.0);
  EXPECT_EQ(jc.at("V_sc").size(), 3u);
  const Outcome p = invoke({"path", "--grid", "0.1:1.9:5", data.string()});
  ASSERT_EQ(p.code, cli::kExitOk) << p.err;
  EXPECT_EQ(nlohmann::json::parse(p.out).at("alpha").size(), 5u);
}

TEST_F(CliTest, SelftestPasses) {
  const Outcome o = invoke({"selftest"});
  EXPECT_EQ(o.code, cli::kExitOk) << o.out;
  EXPECT_EQ(o.out.find("FAIL"), std::string::npos) << o.out;
}

}  // namespace
}  // namespace prodmed
