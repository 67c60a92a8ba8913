#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "embanon/data/manifest.hpp"
#include "embanon/data/pemb.hpp"
#include "embanon/harness/cli.hpp"
#include "embanon/harness/report.hpp"
#include "embanon/model/privacy_transformer.hpp"

using namespace embanon;
using namespace embanon::harness;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = std::filesystem::temp_directory_path() / "embanon_test_cli" / info->name();
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string read(const std::string& name) const {
    std::ifstream in(dir_ / name, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  void gen_small(const std::string& name) {
    const CliRun r = cli({"--log-level", "warn", "--seed", "2", "gen", "--speakers", "10",
                         "--contents", "30", "--dim", "8", "--out", path(name)});
    ASSERT_EQ(r.code, kExitOk) << r.err;
  }

  std::filesystem::path dir_;
};

}  // namespace

TEST_F(Cli, GenThenLaplaceKeepsShape) {
  ASSERT_EQ(cli({"gen", "--speakers", "40", "--contents", "200", "--out", path("c.pemb")}).code,
            kExitOk);
  const CliRun r = cli({"anonymize", "--laplace", "15", "--in", path("c.pemb"), "--out",
                     path("a.pemb")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const data::Corpus c = data::read_corpus(path("c.pemb"));
  const data::Corpus a = data::read_corpus(path("a.pemb"));
  EXPECT_EQ(c.records.size(), 8000u);
  EXPECT_EQ(a.records.size(), c.records.size());
  EXPECT_EQ(a.layers, c.layers);
  EXPECT_EQ(a.dim, c.dim);
  EXPECT_EQ(a.speakers, c.speakers);
  EXPECT_NE(a, c);
  EXPECT_EQ(data::read_manifest(data::manifest_path_for(path("a.pemb"))).label_maps,
            data::read_manifest(data::manifest_path_for(path("c.pemb"))).label_maps);
}

TEST_F(Cli, GenWritesManifestAndIsSeeded) {
  gen_small("a.pemb");
  gen_small("b.pemb");
  EXPECT_EQ(read("a.pemb"), read("b.pemb"));
  const data::Manifest m = data::read_manifest(data::manifest_path_for(path("a.pemb")));
  EXPECT_EQ(m.label_maps.at(data::kSpeakerTask).size(), 300u);
  EXPECT_EQ(m.label_maps.at(data::kContentGroupTask).size(), 300u);
  ASSERT_EQ(cli({"--seed", "3", "gen", "--speakers", "10", "--contents", "30", "--dim", "8",
                 "--out", path("c.pemb")})
                .code,
            kExitOk);
  EXPECT_NE(read("a.pemb"), read("c.pemb"));
}

TEST_F(Cli, CorruptCorpusExitsTwoWithOffset) {
  gen_small("c.pemb");
  const std::string bytes = read("c.pemb");
  {
    std::ofstream(dir_ / "truncated.pemb", std::ios::binary) << bytes.substr(0, 100);
  }
  CliRun r = cli({"anonymize", "--laplace", "15", "--in", path("truncated.pemb"), "--out",
               path("x.pemb")});
  EXPECT_EQ(r.code, kExitData);
  // 24-byte header + 10 speaker ids; the first record does not fit.
  EXPECT_NE(r.err.find("byte offset 64"), std::string::npos) << r.err;
  EXPECT_FALSE(std::filesystem::exists(dir_ / "x.pemb"));

  std::string magic = bytes;
  magic[0] = 'X';
  {
    std::ofstream(dir_ / "magic.pemb", std::ios::binary) << magic;
  }
  r = cli({"anonymize", "--laplace", "15", "--in", path("magic.pemb"), "--out", path("x.pemb")});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("byte offset 0"), std::string::npos) << r.err;
}

TEST_F(Cli, CorruptCheckpointExitsTwo) {
  gen_small("c.pemb");
  {
    std::ofstream(dir_ / "bad.ptck", std::ios::binary) << "PTCK\x07";
  }
  const CliRun r = cli({"anonymize", "--checkpoint", path("bad.ptck"), "--in", path("c.pemb"),
                     "--out", path("x.pemb")});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("byte offset"), std::string::npos) << r.err;
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  const CliRun unknown = cli({"gen", "--out", path("c.pemb"), "--bogus"});
  EXPECT_EQ(unknown.code, kExitUsage);
  EXPECT_NE(unknown.err.find("Usage"), std::string::npos);
  EXPECT_EQ(cli({"anonymize", "--in", "a", "--out", "b"}).code, kExitUsage);
  EXPECT_EQ(cli({"anonymize", "--in", "a", "--out", "b", "--laplace", "1", "--checkpoint", "c"})
                .code,
            kExitUsage);
  EXPECT_EQ(cli({"gen"}).code, kExitUsage);
  EXPECT_EQ(cli({"--log-level", "loud", "gen", "--out", path("c.pemb")}).code, kExitUsage);
  const CliRun help = cli({"--help"});
  EXPECT_EQ(help.code, kExitOk);
  EXPECT_NE(help.out.find("anonymize"), std::string::npos);
}

TEST_F(Cli, MissingFileIsRuntimeError) {
  const CliRun r = cli({"anonymize", "--laplace", "1", "--in", path("none.pemb"), "--out",
                     path("x.pemb")});
  EXPECT_EQ(r.code, kExitRuntime);
  EXPECT_NE(r.err.find("none.pemb"), std::string::npos);
}

TEST_F(Cli, TrainAnonymizeProbeAndBench) {
  gen_small("c.pemb");
  CliRun r = cli({"--log-level", "off", "train", "--in", path("c.pemb"), "--out", path("pt.ptck"),
               "--epochs", "2", "--d-spk", "4", "--d-layer", "4", "--n-layers", "1", "--heads",
               "2", "--d-ff", "16", "--report", path("train.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const model::PrivacyTransformer pt = model::load(path("pt.ptck"));
  EXPECT_EQ(pt.config().dim, 8u);
  EXPECT_EQ(pt.config().n_speakers, 10u);
  EXPECT_EQ(nlohmann::json::parse(read("train.json"))["train_loss"].size(), 2u);

  r = cli({"anonymize", "--checkpoint", path("pt.ptck"), "--in", path("c.pemb"), "--out",
           path("a.pemb"), "--batch", "7"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(data::read_corpus(path("a.pemb")).records.size(), 300u);

  r = cli({"probe", "--in", path("a.pemb"), "--task", "content_group", "--hidden", "16",
           "--epochs", "3", "--out", path("probe.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("content_group: accuracy"), std::string::npos);
  EXPECT_EQ(nlohmann::json::parse(read("probe.json"))["classes"].size(), 4u);

  r = cli({"probe", "--in", path("c.pemb"), "--task", "emotion"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("no label map 'emotion'"), std::string::npos) << r.err;

  for (const std::vector<std::string>& arm :
       {std::vector<std::string>{"--laplace", "15"}, {"--checkpoint", path("pt.ptck")}, {}}) {
    std::vector<std::string> args = {"--threads", "2", "bench", "--in", path("c.pemb"),
                                     "-n", "12"};
    args.insert(args.end(), arm.begin(), arm.end());
    r = cli(args);
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("12 utterances"), std::string::npos) << r.out;
  }
}

TEST_F(Cli, EvalEmitsReportsAndReportRerendersIdentically) {
  gen_small("c.pemb");
  {
    std::ofstream(dir_ / "exp.toml") << R"(output_dir = "out"
[corpus]
path = "c.pemb"
[probe]
hidden = [16]
epochs = 3
[[arms]]
kind = "original"
[[arms]]
kind = "laplace"
epsilon = 15
[[tasks]]
name = "sid"
[[tasks]]
name = "content_group"
labels = "manifest"
)";
  }
  CliRun r = cli({"--log-level", "off", "eval", "--config", path("exp.toml")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("SID Acc. ↓"), std::string::npos);
  for (const char* f : {"out/report.json", "out/report.md", "out/report.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir_ / f)) << f;
  }
  r = cli({"report", "--in", path("out/report.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out, read("out/report.md"));
  r = cli({"report", "--in", path("out/report.json"), "--format", "csv", "--out",
           path("again.csv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(read("again.csv"), read("out/report.csv"));

  {
    std::ofstream(dir_ / "broken.toml") << "[[arms]]\nkind = \n";
  }
  r = cli({"eval", "--config", path("broken.toml")});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;

  {
    std::ofstream(dir_ / "bad.json", std::ios::binary) << "{\"tasks\": [";
  }
  r = cli({"report", "--in", path("bad.json")});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("byte offset"), std::string::npos) << r.err;
}
