#include <gtest/gtest.h>

#include <sstream>

#include "cli.hpp"
#include "ecad/actualize.hpp"
#include "ecad/store.hpp"
#include "test_support.hpp"

using namespace ecad;
using testing_support::config_path;
using testing_support::read_file;
using testing_support::TempDir;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome ecad_cli(std::vector<std::string> args) {
  args.insert(args.begin(), ECAD_EXE);
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string network(const std::string& name) { return (config_path("networks") / name).string(); }

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_NE(ecad_cli({}).code, 0);
  EXPECT_EQ(ecad_cli({"--help"}).code, 0);
  EXPECT_NE(ecad_cli({"frobnicate"}).code, 0);
  EXPECT_NE(ecad_cli({"eval", "/no/such/file.json"}).code, 0);
  const auto r = ecad_cli({"simulate-array", "--cfg", "2,2,2,2,2"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("ecad: "), std::string::npos);
}

TEST(Cli, SearchRejectsConfigWithoutActiveObjectives) {
  TempDir dir("cli");
  auto j = Json::parse(read_file(testing_support::example_config_path()));
  j.erase("includes");
  for (auto& e : j["popConfigValues"]["evalTypes"]) e["active"] = false;
  testing_support::write_file(dir / "none.ecad.cfg", j.dump());
  const auto r = ecad_cli({"search", (dir / "none.ecad.cfg").string(), "--out-dir", (dir / "o").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("no active evalTypes"), std::string::npos) << r.err;
}

TEST(Cli, SearchOutputsAreDeterministic) {
  TempDir dir("cli");
  const auto cfg = config_path("imgps_only.ecad.cfg").string();
  for (const char* sub : {"a", "b"}) {
    const auto r = ecad_cli({"search", cfg, "--seed", "5", "--generations", "8", "--out-dir", (dir / sub).string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  for (const char* f : {"generations.csv", "ecad.db.jsonl", "report.json"}) {
    EXPECT_EQ(read_file(dir / "a" / f), read_file(dir / "b" / f)) << f;
  }
  const auto csv = read_file(dir / "a" / "generations.csv");
  EXPECT_EQ(csv.rfind("generation,best_score,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 9);

  // Rerunning into the same directory replaces the database rather than appending.
  ASSERT_EQ(ecad_cli({"search", cfg, "--seed", "5", "--generations", "8", "--out-dir", (dir / "a").string()}).code, 0);
  EXPECT_EQ(read_file(dir / "a" / "ecad.db.jsonl"), read_file(dir / "b" / "ecad.db.jsonl"));
}

TEST(Cli, ProcessWorkersMatchInProcess) {
  TempDir dir("cli");
  const auto cfg = config_path("imgps_only.ecad.cfg").string();
  ASSERT_EQ(ecad_cli({"search", cfg, "--generations", "4", "--out-dir", (dir / "a").string()}).code, 0);
  const auto r = ecad_cli({"search", cfg, "--generations", "4", "--process-workers", "--slots", "2",
                           "--out-dir", (dir / "b").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(dir / "a" / "generations.csv"), read_file(dir / "b" / "generations.csv"));
}

TEST(Cli, ExportAndCompact) {
  TempDir dir("cli");
  ASSERT_EQ(ecad_cli({"search", config_path("imgps_only.ecad.cfg").string(), "--generations", "3",
                      "--out-dir", dir.path().string()}).code, 0);
  const auto db = (dir / "ecad.db.jsonl").string();
  const auto top = ecad_cli({"export", "--db", db, "--top", "3"});
  ASSERT_EQ(top.code, 0);
  EXPECT_EQ(std::count(top.out.begin(), top.out.end(), '\n'), 3);
  const auto best_id = top.out.substr(0, top.out.find(' '));
  const auto out = (dir / "best.json").string();
  ASSERT_EQ(ecad_cli({"export", "--db", db, "--id", best_id, "--out", out}).code, 0);
  EXPECT_TRUE(load_description(out).systolic.has_value());
  EXPECT_EQ(ecad_cli({"export", "--db", db, "--id", "999999", "--out", out}).code, 1);
  const auto c = ecad_cli({"compact", "--db", db});
  EXPECT_EQ(c.code, 0);
  EXPECT_EQ(ecad_cli({"export", "--db", db, "--top", "3"}).out, top.out);
}

TEST(Cli, ActualizeWritesMacros) {
  TempDir dir("cli");
  const auto out = (dir / "macros.h").string();
  ASSERT_EQ(ecad_cli({"actualize", network("mlp_784_196_190_150_10.json"), out}).code, 0);
  EXPECT_EQ(read_file(out),
            "#define SYS_ROWS 4\n#define SYS_COLS 4\n#define SYS_VEC 8\n#define INTERLEAVE 8\n#define SCALE 8\n");
  EXPECT_EQ(parse_macros(read_file(out)), (SystolicConfig{4, 4, 8, 8, 8}));
}

TEST(Cli, EvalPrintsModelMetrics) {
  const auto r = ecad_cli({"eval", network("mlp_784_196_190_150_10.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = Json::parse(r.out);
  EXPECT_EQ(j["cfg"], "4,4,8,8,8");
  EXPECT_NEAR(j["metrics"]["potential_gops"].get<double>(), 64.0, 1e-9);
  EXPECT_EQ(j["layers"].size(), 4u);
  const auto small = Json::parse(ecad_cli({"eval", network("mlp_784_196_190_150_10.json"), "--batch", "1"}).out);
  EXPECT_LT(small["metrics"]["effective_gops"].get<double>(), j["metrics"]["effective_gops"].get<double>());
}

TEST(Cli, SimulateArrayMatchesModelCycles) {
  const auto r = ecad_cli({"simulate-array", "--cfg", "2,3,4,2,2", "--m", "9", "--k", "21", "--n", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = Json::parse(r.out);
  EXPECT_EQ(j["stats"]["compute_cycles"], j["model_compute_cycles"]);
  EXPECT_LE(j["max_abs_error_vs_f64"].get<double>(), 1e-4);
  EXPECT_EQ(j["output"].size(), 9u);
}

TEST(Cli, TrainThenSimulateNetwork) {
  TempDir dir("cli");
  const auto mnist = testing_support::mnist_sample_dir().string();
  const auto t = ecad_cli({"train", network("mlp_784_128_10.json"), "--dest-dir", dir.path().string(),
                           "--epochs", "1", "--train-subset", "2000", "--save-wb", "--mnist", mnist});
  ASSERT_EQ(t.code, 0) << t.err;
  const auto report = Json::parse(read_file(dir / "mlp_784_128_10_report.json"));
  for (const char* k : {"name", "accuracy", "epochs", "training_time", "batch_size"}) EXPECT_TRUE(report.contains(k)) << k;
  EXPECT_GT(report["accuracy"].get<double>(), 0.7);
  EXPECT_TRUE(std::filesystem::exists(dir / "dense00_weights.bin"));
  EXPECT_TRUE(std::filesystem::exists(dir / "output_biases.bin"));

  const auto s = ecad_cli({"simulate-array", "--network", network("mlp_784_128_10.json"), "--weights",
                           dir.path().string(), "--mnist", mnist, "--images", "200"});
  ASSERT_EQ(s.code, 0) << s.err;
  const auto j = Json::parse(s.out);
  EXPECT_EQ(j["images"], 200);
  EXPECT_NEAR(j["accuracy"].get<double>(), report["accuracy"].get<double>(), 0.1);
}
