// Copyright 2026 The Debias Toolkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "debias/cli.hpp"
#include "support/tempdir.hpp"

namespace debias {
namespace {

using nlohmann::json;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class ConfigTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ::unsetenv(kConfigEnv);
    dir.write("corpus.csv",
              "id,text,label\n1,you are awful and stupid,neg\n2,what a lovely sunny day,neither\n"
              "3,awful nasty people here,neg\n4,coffee with friends today,neither\n5,just awful,neg\n"
              "6,happy weekend everyone,neither\n7,stupid trash again,neg\n8,music and dinner tonight,neither\n"
              "9,so nasty and ugly,neg\n10,new movie out now,neither\n");
  }
  void TearDown() override { ::unsetenv(kConfigEnv); }

  json base() const {
    return {{"seed", 3},
            {"schema", {"neg", "neither"}},
            {"data", {{"corpus", {{"path", "corpus.csv"}, {"label_column", "label"}, {"id_column", "id"}}}}},
            {"split", {{"train", 0.6}, {"val", 0.2}, {"test", 0.2}}},
            {"train", {{"epochs", 3}}}};
  }

  std::string write_config(const json& cfg, const std::string& name = "config.json") const {
    return dir.write(name, cfg.dump(2)).string();
  }

  std::string config_error(const json& cfg) const {
    try {
      parse_config(cfg, dir.path());
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  }

  testing::TempDir dir;
};

TEST_F(ConfigTest, ParsesWithDefaults) {
  const auto cfg = parse_config(base(), dir.path());
  EXPECT_EQ(cfg.seed, 3u);
  EXPECT_EQ(cfg.output_dir, dir.path() / "out");
  EXPECT_EQ(cfg.corpus.path, dir.path() / "corpus.csv");
  EXPECT_EQ(cfg.negative_classes, (std::vector<std::string>{"neg"}));
  EXPECT_EQ(cfg.audit.k, 20u);
  EXPECT_EQ(cfg.biaseval.sample_size, 10000u);
  EXPECT_EQ(cfg.biaseval.thresholds.major, 0.80);
  EXPECT_EQ(cfg.learning_curve.repeats, 10u);
  EXPECT_FALSE(cfg.groups.has_value());
}

TEST_F(ConfigTest, ErrorsNameTheField) {
  auto with = [&](const json& patch) {
    json cfg = base();
    cfg.merge_patch(patch);
    return config_error(cfg);
  };
  EXPECT_NE(with({{"reweight", {{"lambda", "big"}}}}).find("reweight.lambda"), std::string::npos);
  EXPECT_NE(with({{"reweight", {{"lambda", -1}}}}).find("reweight.lambda"), std::string::npos);
  EXPECT_NE(with({{"train", {{"epochs", 0}}}}).find("train.epochs"), std::string::npos);
  EXPECT_NE(with({{"train", {{"epoch", 3}}}}).find("train.epoch"), std::string::npos);
  EXPECT_NE(with({{"bogus", 1}}).find("bogus"), std::string::npos);
  EXPECT_NE(with({{"split", {{"train", 0.9}}}}).find("split"), std::string::npos);
  EXPECT_NE(with({{"negative_classes", {"hate"}}}).find("negative_classes"), std::string::npos);
  EXPECT_NE(with({{"preprocess", {{"hashtag_mode", "x"}}}}).find("preprocess.hashtag_mode"), std::string::npos);
  EXPECT_NE(with({{"biaseval", {{"t_test", "z"}}}}).find("biaseval.t_test"), std::string::npos);
  EXPECT_NE(with({{"features", {{"weighting", "z"}}}}).find("features.weighting"), std::string::npos);
  EXPECT_NE(with({{"learning_curve", {{"portions", {0.5, 0.1}}}}}).find("learning_curve.portions"),
            std::string::npos);
  EXPECT_NE(with({{"data", {{"corpus", {{"delimiter", "ab"}}}}}}).find("data.corpus.delimiter"), std::string::npos);

  const auto missing = with({{"data", {{"corpus", {{"path", "nowhere.csv"}}}}}});
  EXPECT_NE(missing.find("nowhere.csv"), std::string::npos);

  json no_seed = base();
  no_seed.erase("seed");
  EXPECT_NE(config_error(no_seed).find("seed"), std::string::npos);
}

TEST_F(ConfigTest, LoadRejectsBadJsonAndAcceptsComments) {
  dir.write("bad.json", "{ not json");
  EXPECT_THROW(load_config(dir.path() / "bad.json"), ConfigError);
  EXPECT_THROW(load_config(dir.path() / "absent.json"), ConfigError);
  dir.write("commented.json", "// run settings\n" + base().dump());
  EXPECT_EQ(load_config(dir.path() / "commented.json").seed, 3u);
}

TEST_F(ConfigTest, HelpAndUsage) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_NE(run({"--help"}).out.find("reweight"), std::string::npos);
  EXPECT_EQ(run({}).code, kExitConfig);
  EXPECT_EQ(run({"frobnicate"}).code, kExitConfig);
  EXPECT_EQ(run({"train", "--seed", "abc"}).code, kExitConfig);
}

TEST_F(ConfigTest, ConfigFromFlagOrEnvironment) {
  const auto none = run({"preprocess"});
  EXPECT_EQ(none.code, kExitConfig);
  EXPECT_NE(none.err.find(kConfigEnv), std::string::npos);

  const auto path = write_config(base());
  ::setenv(kConfigEnv, path.c_str(), 1);
  EXPECT_EQ(run({"preprocess"}).code, kExitOk);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "out" / files::normalized));

  // The flag wins over the environment.
  json other = base();
  other["output_dir"] = "other";
  const auto other_path = write_config(other, "other.json");
  EXPECT_EQ(run({"--config", other_path, "preprocess"}).code, kExitOk);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "other" / files::normalized));
}

TEST_F(ConfigTest, ExitCodes) {
  json bad = base();
  bad["reweight"] = {{"lambda", "x"}};
  const auto bad_path = write_config(bad, "bad.json");
  const auto r1 = run({"--config", bad_path, "reweight"});
  EXPECT_EQ(r1.code, kExitConfig);
  EXPECT_NE(r1.err.find("reweight.lambda"), std::string::npos);

  const auto path = write_config(base());
  // Nothing preprocessed yet: a data error naming the missing input.
  const auto r3 = run({"--config", path, "train"});
  EXPECT_EQ(r3.code, kExitData);
  EXPECT_NE(r3.err.find("preprocess"), std::string::npos);

  ASSERT_EQ(run({"--config", path, "preprocess"}).code, kExitOk);
  // Both classes share "bad wolf", so the first steps make progress.
  std::string shared = "id,text,label\n";
  for (int i = 0; i < 10; ++i) {
    shared += std::to_string(i) + ",bad wolf u" + std::to_string(i) + "," + (i < 3 ? "neg" : "neither") + "\n";
  }
  dir.write("shared.csv", shared);
  json slow = base();
  slow["data"]["corpus"]["path"] = "shared.csv";
  slow["output_dir"] = "slow";
  slow["reweight"] = {{"lambda", 0.01}, {"step_size", 1e-6}, {"max_iters", 2}, {"tolerance", 1e-15}, {"n", 1}};
  const auto slow_path = write_config(slow, "slow.json");
  ASSERT_EQ(run({"--config", slow_path, "preprocess"}).code, kExitOk);
  const auto r2 = run({"--config", slow_path, "reweight"});
  EXPECT_EQ(r2.code, kExitConvergence);
  EXPECT_NE(r2.err.find("converge"), std::string::npos);

  EXPECT_EQ(run({"--config", path, "reweight"}).code, kExitOk);
  EXPECT_EQ(run({"--config", path, "bias-eval"}).code, kExitConfig);  // no groups configured

  dir.write("corpus_bad.csv", "id,text,label\n1,hello there,unknown_label\n");
  json data = base();
  data["data"]["corpus"]["path"] = "corpus_bad.csv";
  const auto r4 = run({"--config", write_config(data, "data.json"), "preprocess"});
  EXPECT_EQ(r4.code, kExitData);
  EXPECT_NE(r4.err.find("unknown_label"), std::string::npos);
}

TEST_F(ConfigTest, OutAndSeedOverrides) {
  const auto path = write_config(base());
  const auto alt = (dir.path() / "alt").string();
  ASSERT_EQ(run({"--config", path, "--out", alt, "preprocess"}).code, kExitOk);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "alt" / files::normalized));
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "out"));

  auto weights_for = [&](const std::string& seed) {
    EXPECT_EQ(run({"--config", path, "--out", alt, "--seed", seed, "reweight"}).code, kExitOk);
    return read_file(dir.path() / "alt" / files::weights);
  };
  const auto a = weights_for("1");
  const auto b = weights_for("1");
  EXPECT_EQ(a, b);
  // A different seed moves documents between splits, so the weighted pool changes.
  bool differs = false;
  for (const std::string s : {"2", "5", "9"}) differs = differs || weights_for(s) != a;
  EXPECT_TRUE(differs);
}

TEST_F(ConfigTest, VerboseLogsProgress) {
  const auto path = write_config(base());
  EXPECT_TRUE(run({"--config", path, "preprocess"}).out.empty());
  EXPECT_NE(run({"--config", path, "--verbose", "preprocess"}).out.find("preprocess: kept"), std::string::npos);
}

TEST_F(ConfigTest, BinaryExitCodes) {
  const std::string cli = DEBIAS_CLI_PATH;
  auto status = [&](const std::string& args) {
    const int raw = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(raw);
  };
  EXPECT_EQ(status("--help"), 0);
  EXPECT_EQ(status("nonsense"), 1);
  EXPECT_EQ(status("--config " + write_config(base()) + " preprocess"), 0);
  EXPECT_EQ(status("--config " + (dir.path() / "missing.json").string() + " preprocess"), 1);
}

}  // namespace
}  // namespace debias
