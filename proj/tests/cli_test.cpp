#include "ouwalk/commands.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

namespace ouwalk {
namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::string& command, const ExperimentConfig& cfg, unsigned threads = 1, bool expect_fail = false) {
  std::ostringstream out, err;
  RunOptions opts;
  opts.threads = threads;
  opts.expect_fail = expect_fail;
  const int code = run_command(command, cfg, opts, out, err);
  return {code, out.str(), err.str()};
}

ExperimentConfig small() {
  ExperimentConfig c;
  c.d = 20;
  c.paths = 500;
  return c;
}

TEST(Config, DefaultsRoundTrip) {
  const ExperimentConfig c;
  EXPECT_EQ(parse_config(serialize_config(c)), c);
}

TEST(Config, EveryKeyRoundTrips) {
  const std::string text =
      "# comment\n"
      "process.kind=sbmfull\n"
      "walk.d=3\n"
      "walk.p=0.75\n"
      "theta.kind=custom\n"
      "theta.values=0.1,-0.7,0.3\n"
      "theta.u=-0.25\n"
      "theta.index=2\n"
      "theta.seed=18446744073709551615\n"
      "ou.u=0.1\n"
      "grid.times=0,0.1,0.30000000000000004\n"
      "phi=1,-2,0.5\n"
      "sim.paths=123\n"
      "sim.step=0.0001\n"
      "moments.max_order=6\n"
      "seed=42\n"
      "output.path=out file.csv\n"
      "output.format=json\n"
      "output.mode=paths\n"
      "converge.dims=5,50\n"
      "converge.time=2.5\n"
      "fdd.draws=3\n"
      "tightness.times=0.1,0.2,1\n"
      "tightness.epsilon=0.125\n"
      "partitions.max_order=12\n";
  const auto c = parse_config(text);
  EXPECT_EQ(c.process, ProcessKind::SbmFull);
  EXPECT_EQ(c.theta.values, (std::vector<double>{0.1, -0.7, 0.3}));
  EXPECT_EQ(c.theta.seed, 18446744073709551615ull);
  EXPECT_EQ(c.times[2], 0.1 + 0.2);
  EXPECT_EQ(c.output_path, "out file.csv");
  ASSERT_TRUE(c.ou_u.has_value());
  EXPECT_EQ(*c.ou_u, 0.1);
  const auto again = parse_config(serialize_config(c));
  EXPECT_EQ(again, c);
  EXPECT_EQ(serialize_config(again), serialize_config(c));
}

TEST(Config, ShortestDecimalIsExact) {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -0.0}) {
    ExperimentConfig c;
    c.p = 0.5;
    c.step = std::abs(x) > 0 ? std::abs(x) : 1.0;
    EXPECT_EQ(parse_config(serialize_config(c)).step, c.step);
  }
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config("walk.dd=3\n"), ConfigError);
  EXPECT_THROW(parse_config("walk.d=3x\n"), ConfigError);
  EXPECT_THROW(parse_config("walk.d\n"), ConfigError);
  EXPECT_THROW(parse_config("walk.p=0\n"), ConfigError);
  EXPECT_THROW(parse_config("walk.p=nan\n"), ConfigError);
  EXPECT_THROW(parse_config("grid.times=1,0.5\n"), ConfigError);
  EXPECT_THROW(parse_config("grid.times=0.5,1,\n"), ConfigError);
  EXPECT_THROW(parse_config("phi=1,2,3\n"), ConfigError);
  EXPECT_THROW(parse_config("theta.kind=basis\ntheta.index=51\n"), ConfigError);
  EXPECT_THROW(parse_config("theta.kind=diagonal\n"), ConfigError);
  EXPECT_THROW(parse_config("walk.d=3\ntheta.kind=custom\ntheta.values=0,0,0\n"), ConfigError);
  EXPECT_THROW(parse_config("output.format=xml\n"), ConfigError);
  EXPECT_THROW(parse_config("partitions.max_order=13\n"), ConfigError);
  EXPECT_THROW(parse_config("tightness.times=0,0.2\n"), ConfigError);
  EXPECT_NO_THROW(parse_config("  walk.d = 7 \n\n# x=y\n"));
}

TEST(Config, TrailingComments) {
  const auto c = parse_config("walk.d=7   # seven\ntheta.kind=basis\t# e_j\noutput.path=run#3.csv\n");
  EXPECT_EQ(c.d, 7);
  EXPECT_EQ(c.theta.kind, "basis");
  EXPECT_EQ(c.output_path, "run#3.csv");
}

TEST(Cli, VerifyPartitionsExitCodes) {
  auto c = small();
  c.partitions_max_order = 1;
  EXPECT_EQ(run("verify-partitions", c).code, kExitPass);
  c.partitions_max_order = 4;
  const auto ok = run("verify-partitions", c);
  EXPECT_EQ(ok.code, kExitPass);
  EXPECT_NE(ok.out.find("\n4,15,15,pass,pass,"), std::string::npos);
  c.partitions_max_order = 13;
  EXPECT_EQ(run("verify-partitions", c).code, kExitUsage);
}

TEST(Cli, VerifyMomentsDefaultAndGuards) {
  auto c = ExperimentConfig{};
  EXPECT_EQ(run("verify-moments", c).code, kExitPass);
  c.times = {0.0};
  c.phi = {1.0};
  EXPECT_EQ(run("verify-moments", c).code, kExitPass);
  c.phi = {1.0, 2.0};
  EXPECT_EQ(run("verify-moments", c).code, kExitUsage);
}

TEST(Cli, ConvergeStatusAndExitCodes) {
  auto c = ExperimentConfig{};
  c.theta.u = 0.0;
  c.converge_dims = {10, 1000};
  c.paths = 10000;
  c.fdd_draws = 4;
  const auto pass = run("converge", c);
  EXPECT_EQ(pass.code, kExitPass) << pass.out;
  EXPECT_NE(pass.out.find("d,statistic,observed,target,gap\n"), std::string::npos);

  c.theta.kind = "basis";
  c.theta.index = 1;
  c.format = OutputFormat::Json;
  const auto fail = run("converge", c);
  EXPECT_EQ(fail.code, kExitFail);
  const auto j = nlohmann::json::parse(fail.out);
  EXPECT_EQ(j["status"], "counterexample");
  EXPECT_EQ(run("converge", c, 1, true).code, kExitCounterexample);

  c.converge_dims.clear();
  EXPECT_EQ(run("converge", c).code, kExitUsage);
}

TEST(Cli, ExpectFailOnPassingRunIsFailure) {
  auto c = small();
  c.d = 1000;
  c.theta.u = 0.0;
  c.paths = 2000;
  c.fdd_draws = 2;
  EXPECT_EQ(run("fdd-test", c, 1, true).code, kExitFail);
}

TEST(Cli, CsvCarriesConfigAndSeed) {
  auto c = small();
  c.seed = 987654321;
  const auto r = run("simulate", c);
  ASSERT_EQ(r.code, kExitPass);
  EXPECT_EQ(r.out.rfind("# command=simulate\n", 0), 0u);
  EXPECT_NE(r.out.find("# master_seed=987654321\n"), std::string::npos);
  // The embedded config reproduces the run.
  std::string cfg_text;
  std::istringstream lines(r.out);
  for (std::string line; std::getline(lines, line);) {
    if (line.rfind("# config.", 0) == 0) cfg_text += line.substr(9) + "\n";
  }
  EXPECT_EQ(parse_config(cfg_text), c);
  EXPECT_NE(r.out.find("\nk,t,mean,var,q05,q25,q50,q75,q95,ou_mean,ou_var\n"), std::string::npos);
}

TEST(Cli, SimulateRawSinglePath) {
  auto c = small();
  c.paths = 1;
  c.mode = OutputMode::Paths;
  c.times = {0.5, 1.0, 2.0};
  const auto r = run("simulate", c);
  ASSERT_EQ(r.code, kExitPass);
  EXPECT_NE(r.out.find("\npath,y_0,y_1,y_2,y_3\n0,"), std::string::npos);
  EXPECT_EQ(r.out.back(), '\n');
}

TEST(Cli, SimulateEveryProcess) {
  for (auto kind : {ProcessKind::Lnnrw, ProcessKind::Z, ProcessKind::Ou, ProcessKind::Sbm1d, ProcessKind::SbmFull}) {
    auto c = small();
    c.process = kind;
    c.paths = 200;
    c.step = 0.01;
    EXPECT_EQ(run("simulate", c).code, kExitPass) << to_string(kind);
  }
}

TEST(Cli, UnwritableOutputIsIoError) {
  auto c = small();
  c.output_path = "/nonexistent-dir/sub/out.csv";
  EXPECT_EQ(run("simulate", c).code, kExitIo);
}

TEST(Cli, OutputIndependentOfThreadsAndRuns) {
  auto c = small();
  c.converge_dims = {10, 50};
  c.fdd_draws = 2;
  for (const std::string cmd : {"simulate", "converge", "fdd-test", "tightness-probe"}) {
    for (auto fmt : {OutputFormat::Csv, OutputFormat::Json}) {
      c.format = fmt;
      const auto one = run(cmd, c, 1);
      EXPECT_EQ(one.out, run(cmd, c, 1).out) << cmd;
      EXPECT_EQ(one.out, run(cmd, c, 3).out) << cmd;
      EXPECT_EQ(one.out, run(cmd, c, 8).out) << cmd;
    }
  }
}

TEST(Cli, FileOutputMatchesStdoutAndIgnoresPath) {
  auto c = small();
  const auto dir = std::filesystem::temp_directory_path();
  const auto a = (dir / "ouwalk_cli_test_a.csv").string();
  const auto b = (dir / "ouwalk_cli_test_b.csv").string();
  const auto stdout_run = run("simulate", c);
  c.output_path = a;
  ASSERT_EQ(run("simulate", c).code, kExitPass);
  c.output_path = b;
  ASSERT_EQ(run("simulate", c, 4).code, kExitPass);
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(a), stdout_run.out);
  EXPECT_EQ(slurp(a), slurp(b));
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST(Cli, UnknownSubcommand) { EXPECT_EQ(run("frobnicate", small()).code, kExitUsage); }

}  // namespace
}  // namespace ouwalk
