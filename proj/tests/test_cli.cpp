#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "privsec/csv.hpp"
#include "privsec/porto.hpp"

namespace fs = std::filesystem;
using namespace privsec;

namespace {
struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

const fs::path& work() {
  static const fs::path d = [] {
    auto p = fs::temp_directory_path() / "privsec_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Run run(const std::string& args) {
  const auto err_file = work() / "stderr.txt";
  const std::string cmd = std::string(PRIVSEC_CLI) + " " + args + " 2>" + err_file.string();
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) r.out += buf.data();
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err_file);
  return r;
}

std::string path(const std::string& name) { return (work() / name).string(); }

const std::string kFixture = std::string(PRIVSEC_TEST_DATA) + "/porto_fixture.csv";

// A small synthetic corpus shared by several tests.
const std::string& small_corpus() {
  static const std::string p = [] {
    const auto r = run("synth --n-trips 120 --n-od-pairs 4 --out " + path("small.csv"));
    EXPECT_EQ(r.code, 0) << r.err;
    return path("small.csv");
  }();
  return p;
}
}  // namespace

TEST(Cli, SynthPrintsSummary) {
  const auto r = run("synth --n-trips 50 --n-od-pairs 5 --seed 3 --out " + path("s.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("trips=50"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("od_groups="), std::string::npos);
  EXPECT_TRUE(fs::exists(path("s.csv")));
  EXPECT_TRUE(fs::exists(meta_path(path("s.csv"))));
}

TEST(Cli, IngestFixtureKeeps18) {
  const auto r = run("ingest " + kFixture + " --out " + path("ing.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("rows=20 kept=18 dropped=2 (missing_data=1 short=1 malformed=0)"),
            std::string::npos)
      << r.out;
  EXPECT_EQ(read_corpus(path("ing.csv")).corpus.size(), 18u);
}

TEST(Cli, IngestMissingFileExits1WithoutOutput) {
  const auto r = run("ingest /nonexistent/porto.csv --out " + path("none.csv"));
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
  EXPECT_FALSE(fs::exists(path("none.csv")));
  EXPECT_FALSE(fs::exists(path("none.csv.partial")));
}

TEST(Cli, SchemaMismatchExits2AndNamesColumn) {
  std::ofstream(path("bad.csv")) << "\"TRIP_ID\",\"MISSING_DATA\"\n\"1\",\"False\"\n";
  const auto r = run("ingest " + path("bad.csv") + " --out " + path("bad_out.csv"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("POLYLINE"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("bad_out.csv")));
}

TEST(Cli, BadArgumentsExit2) {
  EXPECT_EQ(run("perturb " + small_corpus() + " --privacy geo --out " + path("x.csv")).code, 2);
  EXPECT_EQ(run("perturb " + small_corpus() + " --privacy location --out " + path("x.csv")).code, 2);
  EXPECT_EQ(run("attack " + small_corpus() + " --q 2 --out " + path("x.csv")).code, 2);
  EXPECT_EQ(run("nosuchcommand").code, 2);
}

TEST(Cli, PerturbNoneIsIdentity) {
  const auto r = run("perturb " + small_corpus() + " --privacy none --out " + path("p0.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto a = read_corpus(small_corpus()).corpus, b = read_corpus(path("p0.csv")).corpus;
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a.trajectories[i].size(), b.trajectories[i].size());
    for (std::size_t k = 0; k < a.trajectories[i].size(); ++k) {
      EXPECT_EQ(a.trajectories[i].points[k].lon, b.trajectories[i].points[k].lon);
      EXPECT_EQ(a.trajectories[i].points[k].lat, b.trajectories[i].points[k].lat);
    }
  }
  const auto rep = csv::read_table(path("p0.csv") + ".report.csv");
  EXPECT_EQ(rep.rows.size(), a.size());
}

TEST(Cli, PerturbTrajectoryReportsPredictions) {
  const auto r = run("perturb " + small_corpus() +
                     " --privacy trajectory --epsilon 0.1 --seed 1 --out " + path("pt.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = csv::read_table(path("pt.csv") + ".report.csv");
  const csv::Header h(rep.columns);
  std::size_t predicted = 0;
  for (const auto& row : rep.rows) predicted += std::stoul(row[h.require("n_predicted", "report")]);
  EXPECT_GT(predicted, 0u);
}

TEST(Cli, AttackWithZeroQHasZeroGain) {
  const auto r = run("attack " + small_corpus() + " --c 300 --q 0 --fraction 0.5 --out " + path("a0.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = csv::read_table(path("a0.csv") + ".manifest.csv");
  const csv::Header h(m.columns);
  ASSERT_FALSE(m.rows.empty());
  for (const auto& row : m.rows) {
    EXPECT_EQ(std::stod(row[h.require("reward_gain_m", "manifest")]), 0.0);
    EXPECT_EQ(row[h.require("m", "manifest")], "0");
  }
}

TEST(Cli, AttackThenDetectPrintsAuc) {
  ASSERT_EQ(run("attack " + small_corpus() + " --c 500 --q 0.7 --fraction 0.2 --out " + path("a1.csv")).code, 0);
  const auto r = run("detect " + path("a1.csv") + " --detector dbscan --out " + path("scores.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("auc="), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(path("scores.csv")));
}

TEST(Cli, OversizedDetectExits3) {
  const auto r = run("detect " + small_corpus() + " --detector dbscan --budget 10 --out " + path("big.csv"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("budget"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("big.csv")));
}

TEST(Cli, EnvironmentVariablesSetOptions) {
  const std::string cmd = "PRIVSEC_OUT=" + path("env.csv") + " " + std::string(PRIVSEC_CLI) +
                          " synth --n-trips 10 --n-od-pairs 2 > /dev/null 2>&1";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(path("env.csv")));
}

TEST(Cli, ReportOnEmptyDirExits1) {
  fs::create_directories(work() / "empty");
  EXPECT_EQ(run("report " + path("empty")).code, 1);
}

TEST(Cli, ExperimentThenReportIsByteStable) {
  std::ofstream(path("tiny.json")) << R"({
    "seed": 5,
    "corpus": {"synth": {"n_trips": 160, "n_od_pairs": 4}},
    "grid": {
      "privacy": [{"mode": "none"}, {"mode": "location", "epsilon": 0.1}],
      "intents": [{"c": 500, "q": 0.7}],
      "seq": {"hidden_dim": 6, "latent_dim": 2, "max_len": 10, "epochs": 2}
    }
  })";
  const auto r = run("experiment --config " + path("tiny.json") + " --out " + path("exp"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("cells=8 scored=8 panels=1"), std::string::npos) << r.out;
  const std::string summary = slurp(work() / "exp" / "summary.md");
  const std::string panel = slurp(work() / "exp" / "roc_c500_q0.70.svg");
  ASSERT_EQ(run("report " + path("exp")).code, 0);
  EXPECT_EQ(slurp(work() / "exp" / "summary.md"), summary);
  EXPECT_EQ(slurp(work() / "exp" / "roc_c500_q0.70.svg"), panel);
}
