#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("grurec_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    ASSERT_EQ(invoke("synth --classes 3 --train-per-class 6 --test-per-class 4 --dim 4 --seed 3 --out-dir " + path("d")).code, 0);
    ASSERT_EQ(invoke("synth --classes 3 --dim 4 --subjects 2 --per-subject-class 4 --seed 1 --out-dir " + path("p")).code, 0);
    ASSERT_EQ(invoke("train --data " + path("d/synth_train.jsonl") + " --out " + path("m.dgru") + small_model + " --quiet").code, 0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string path(const std::string& rel) { return (dir_ / rel).string(); }

  static Result invoke(const std::string& args, const std::string& env = "") {
    const std::string out = path("stdout.txt");
    const std::string err = path("stderr.txt");
    const std::string cmd = env + " " GRUREC_CLI " " + args + " > " + out + " 2> " + err;
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  static inline const std::string small_model =
      " --hidden 8,8 --fc-width 8 --batch-size 6 --max-epochs 2 --patience 2 --seed 5";
  static inline fs::path dir_;
};

}  // namespace

TEST_F(Cli, TrainWritesArtifacts) {
  for (const char* f : {"m.dgru", "m.dgru.history.jsonl", "m.dgru.manifest.json"}) EXPECT_TRUE(fs::exists(path(f))) << f;
  const auto manifest = nlohmann::json::parse(slurp(path("m.dgru.manifest.json")));
  EXPECT_EQ(manifest["seed"], 5);
  EXPECT_EQ(manifest["model_config"]["encoder_widths"], nlohmann::json({8, 8}));
  EXPECT_TRUE(manifest["inputs"].dump().find("sha256") != std::string::npos);
  std::ifstream hist(path("m.dgru.history.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(hist, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* k : {"epoch", "train_loss", "train_acc", "val_acc", "elapsed_s"}) EXPECT_TRUE(j.contains(k)) << k;
    ++lines;
  }
  EXPECT_EQ(lines, 2);
}

TEST_F(Cli, BatchSizeOneIsConfigError) {
  const Result r = invoke("train --data " + path("d/synth_train.jsonl") + " --out " + path("x.dgru") + " --batch-size 1");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--batch-size"), std::string::npos) << r.err;
}

TEST_F(Cli, UnknownFlagIsConfigError) {
  EXPECT_EQ(invoke("train --bogus").code, 2);
  EXPECT_EQ(invoke("--help").code, 0);
}

TEST_F(Cli, MissingDataFileIsDataError) {
  EXPECT_EQ(invoke("eval --model " + path("m.dgru") + " --data " + path("nope.jsonl")).code, 3);
}

TEST_F(Cli, EvalPrintsMetrics) {
  const Result r = invoke("eval --model " + path("m.dgru") + " --data " + path("d/synth_test.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["count"], 12);
  EXPECT_GE(j["accuracy"].get<double>(), 0.0);
  EXPECT_EQ(j["confusion"].size(), 3u);
}

TEST_F(Cli, PredictProbabilitiesSumToOne) {
  const Result r = invoke("predict --model " + path("m.dgru") + " --input " + path("d/synth_test.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    double sum = 0.0;
    for (double p : j["probs"]) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-5);
    EXPECT_TRUE(j["label"].is_string());
    ++n;
  }
  EXPECT_EQ(n, 12);
}

TEST_F(Cli, PredictWrongDimensionNamesBothSizes) {
  {
    std::ofstream f(path("wide.jsonl"));
    f << R"({"id":"w","frames":[[1,2,3,4,5],[5,4,3,2,1]]})" << '\n';
  }
  const Result r = invoke("predict --model " + path("m.dgru") + " --input " + path("wide.jsonl"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find('5'), std::string::npos) << r.err;
  EXPECT_NE(r.err.find('4'), std::string::npos) << r.err;
}

TEST_F(Cli, SeedFromEnvironmentIsRecorded) {
  const Result r = invoke("train --data " + path("d/synth_train.jsonl") + " --out " + path("env.dgru") + small_model + " --quiet",
                    "GRUREC_SEED=99");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto manifest = nlohmann::json::parse(slurp(path("env.dgru.manifest.json")));
  EXPECT_EQ(manifest["seed"], 99);
  EXPECT_EQ(manifest["seed_source"], "GRUREC_SEED");
  EXPECT_EQ(invoke("train --data " + path("d/synth_train.jsonl") + " --out " + path("bad.dgru"), "GRUREC_SEED=abc").code, 2);
}

TEST_F(Cli, DefaultTrainingIsByteIdentical) {
  const std::string base = "train --data " + path("d/synth_train.jsonl") + small_model + " --quiet --out ";
  ASSERT_EQ(invoke(base + path("a.dgru")).code, 0);
  ASSERT_EQ(invoke(base + path("b.dgru")).code, 0);
  EXPECT_EQ(slurp(path("a.dgru")), slurp(path("b.dgru")));
  EXPECT_EQ(slurp(path("a.dgru.history.jsonl")), slurp(path("b.dgru.history.jsonl")));
}

TEST_F(Cli, TimingIsOptIn) {
  ASSERT_EQ(invoke("train --data " + path("d/synth_train.jsonl") + small_model + " --timing --quiet --out " + path("t.dgru")).code, 0);
  std::ifstream timed(path("t.dgru.history.jsonl")), plain(path("m.dgru.history.jsonl"));
  std::string a, b;
  ASSERT_TRUE(std::getline(timed, a) && std::getline(plain, b));
  EXPECT_GT(nlohmann::json::parse(a)["elapsed_s"].get<double>(), 0.0);
  EXPECT_EQ(nlohmann::json::parse(b)["elapsed_s"].get<double>(), 0.0);
  EXPECT_EQ(invoke("train --data " + path("d/synth_train.jsonl") + " --out " + path("x.dgru") + " --timing --deterministic").code, 2);
}

TEST_F(Cli, RerunFromManifest) {
  ASSERT_EQ(invoke("train --data " + path("d/synth_train.jsonl") + small_model + " --deterministic --quiet --out " + path("a.dgru")).code, 0);
  ASSERT_EQ(invoke("train --from-manifest " + path("a.dgru.manifest.json") + " --out " + path("c.dgru") + " --quiet").code, 0);
  EXPECT_EQ(slurp(path("a.dgru")), slurp(path("c.dgru")));
}

TEST_F(Cli, GradcheckExitCodes) {
  const Result ok = invoke("gradcheck --instantiations 2");
  EXPECT_EQ(ok.code, 0) << ok.err;
  const Result bad = invoke("gradcheck --instantiations 2 --perturb attention");
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("attention"), std::string::npos) << bad.err;
}

TEST_F(Cli, ProtocolReportsEveryParticipant) {
  const Result r = invoke("protocol-t --data " + path("p/synth_subjects.jsonl") + " -T 2" + small_model + " --quiet");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["participant_count"], 2);
  EXPECT_EQ(j["T"], 2);
}

TEST_F(Cli, ProtocolTooFewSamplesIsDataError) {
  const Result r = invoke("protocol-t --data " + path("p/synth_subjects.jsonl") + " -T 4" + small_model + " --quiet");
  EXPECT_EQ(r.code, 3);
}
