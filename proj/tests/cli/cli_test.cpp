#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run cpp(const std::string& args, const std::string& stdin_file = {}) {
  std::string cmd = std::string(CPP_BIN) + " " + args + " 2>/dev/null";
  if (!stdin_file.empty()) cmd += " < '" + stdin_file + "'";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string src(const std::string& rel) { return (fs::path(COVPLAN_SOURCE_DIR) / rel).string(); }

fs::path scratch_dir() { return fs::temp_directory_path() / ("covplan_cli_" + std::to_string(::getpid())); }

fs::path scratch(const std::string& name) {
  fs::create_directories(scratch_dir());
  return scratch_dir() / name;
}

struct ScratchCleanup : ::testing::Environment {
  void TearDown() override { fs::remove_all(scratch_dir()); }
};

const auto* const cleanup = ::testing::AddGlobalTestEnvironment(new ScratchCleanup);

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST(Cli, MapCheckAcceptsSuiteMaps) {
  const auto r = cpp("map check " + src("maps/courtyard10.map") + " " + src("maps/campus20.map") + " --json");
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[1]["size"], 20);
  EXPECT_TRUE(j[0]["warnings"].empty());
}

TEST(Cli, MapCheckReportsParseErrorsAsValidation) {
  const auto bad = scratch("bad.map");
  std::ofstream(bad) << "cpp-map v1\nsize 2\n.L\n.Q\n";
  const auto r = cpp("map check " + bad.string() + " --json");
  EXPECT_EQ(r.code, 2);
  const auto j = json::parse(r.out);
  EXPECT_FALSE(j[0]["ok"].get<bool>());
  EXPECT_EQ(j[0]["line"], 4);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(cpp("eval").code, 1);
  EXPECT_EQ(cpp("").code, 1);
  EXPECT_EQ(cpp("map check").code, 1);
  EXPECT_EQ(cpp("heuristic --bogus").code, 1);
}

TEST(Cli, BadConfigExitsTwo) {
  EXPECT_EQ(cpp("config dump --set nosuch.key=1").code, 2);
  EXPECT_EQ(cpp("config dump --set battery.b_max=zero").code, 2);
}

TEST(Cli, MaskProbeOnDefaultMap) {
  const auto r = cpp("mask probe --state landed,b=1 --json");
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  const auto& inv = j["levels"]["invariant"]["allowed"];
  EXPECT_NE(std::find(inv.begin(), inv.end(), "charge"), inv.end());
  EXPECT_EQ(std::find(inv.begin(), inv.end(), "take_off"), inv.end());
  const auto& valid = j["levels"]["valid"]["allowed"];
  EXPECT_NE(std::find(valid.begin(), valid.end(), "take_off"), valid.end());
  EXPECT_EQ(j["state"]["p"], json::array({1, 1}));
}

TEST(Cli, ConfigDumpRoundTrips) {
  const auto first = cpp("config dump --set battery.b_max=42 --set ppo.clip=0.25");
  ASSERT_EQ(first.code, 0);
  const auto ini = scratch("dump.ini");
  std::ofstream(ini) << first.out;
  const auto second = cpp("config dump --config " + ini.string());
  ASSERT_EQ(second.code, 0);
  EXPECT_EQ(first.out, second.out);
  EXPECT_NE(first.out.find("b_max=42"), std::string::npos);
}

TEST(Cli, HeuristicTraceRendersAndScenarioRoundTrips) {
  const auto sc = scratch("sc.json"), trace = scratch("t.jsonl"), ppm = scratch("t.ppm");
  ASSERT_EQ(cpp("scenario gen --map " + src("maps/courtyard10.map") + " --seed 5 --out " + sc.string()).code, 0);
  const auto r = cpp("heuristic --scenario " + sc.string() + " --trace " + trace.string() + " --json");
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(json::parse(r.out)["solved"].get<bool>());
  ASSERT_EQ(cpp("render --trace " + trace.string() + " --scenario " + sc.string() + " --out " + ppm.string()).code, 0);
  EXPECT_EQ(slurp(ppm).substr(0, 2), "P6");
  const auto ascii = cpp("render --trace " + trace.string() + " --scenario " + sc.string() + " --ascii");
  ASSERT_EQ(ascii.code, 0);
  EXPECT_NE(ascii.out.find('@'), std::string::npos);
}

TEST(Cli, TrainThenEvalOnDeskMap) {
  const auto dir = scratch("train");
  const auto cfg = src("configs/desk.ini");
  const auto map = src("maps/desk/desk5.map");
  ASSERT_EQ(cpp("train --config " + cfg + " --map " + map + " --out " + dir.string() + " --seed 2 --json").code, 0);
  const auto curves = slurp(dir / "curves.csv");
  EXPECT_EQ(curves.substr(0, curves.find('\n')),
            "step,gamma,episodes,coverage_ratio,crash_ratio,solved_ratio,episode_steps,loss");
  const auto csv = scratch("eval.csv");
  const auto r = cpp("eval --config " + cfg + " --maps " + map + " --actors heuristic,policy:" +
                     (dir / "policy.json").string() + " --n 32 --seed 3 --out " + csv.string() + " --json");
  ASSERT_EQ(r.code, 0);
  const auto rows = json::parse(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0]["rpd_mean"], 0.0);
  EXPECT_GE(rows[1]["solved_pct"].get<double>(), 90.0);
  EXPECT_NE(slurp(csv).find("desk5,heuristic,32"), std::string::npos);
}

TEST(Cli, GoldenTraceReplaysThroughServeByteForByte) {
  const auto golden = scratch("golden.jsonl"), requests = scratch("requests.jsonl");
  const std::string common = " --map " + src("maps/courtyard10.map") + " --set observation.l=9";
  ASSERT_EQ(cpp("env script" + common + " --seed 3 --steps 100 --out " + golden.string()).code, 0);

  std::ifstream is(golden);
  std::ofstream req(requests);
  std::string line, expected;
  int steps = 0;
  while (std::getline(is, line)) {
    const auto j = json::parse(line);
    req << j["request"].dump() << '\n';
    expected += j["response"].dump() + "\n";
    steps += j["request"]["cmd"] == "step";
  }
  req.close();
  EXPECT_EQ(steps, 100);
  const auto served = cpp("env serve" + common, requests.string());
  ASSERT_EQ(served.code, 0);
  EXPECT_EQ(served.out, expected);
}

TEST(Cli, ServeReportsBadRequestsInline) {
  const auto requests = scratch("bad_requests.jsonl");
  std::ofstream(requests) << "{\"cmd\":\"step\",\"action\":0}\nnonsense\n{\"cmd\":\"close\"}\n";
  const auto r = cpp("env serve --map " + src("maps/courtyard10.map") + " --set observation.l=9", requests.string());
  ASSERT_EQ(r.code, 0);
  std::istringstream lines(r.out);
  std::string l;
  std::vector<bool> ok;
  while (std::getline(lines, l)) ok.push_back(json::parse(l)["ok"].get<bool>());
  EXPECT_EQ(ok, (std::vector<bool>{false, false, true}));
}
