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

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "debias/cli.hpp"
#include "support/synthetic.hpp"
#include "support/tempdir.hpp"

namespace debias {
namespace {

using nlohmann::json;

class PipelineTest : public ::testing::Test {
 protected:
  int run(const std::vector<std::string>& args) {
    std::vector<std::string> full{"--config", config_.string()};
    full.insert(full.end(), args.begin(), args.end());
    std::ostringstream out;
    err_.str("");
    return run_cli(full, out, err_);
  }

  void configure(const json& cfg) { config_ = dir_.write("config.json", cfg.dump(2)); }

  json base(const std::string& corpus = "corpus.csv") const {
    return {{"seed", 11},
            {"schema", {"neg", "neither"}},
            {"data", {{"corpus", {{"path", corpus}, {"label_column", "label"}, {"id_column", "id"}}}}},
            {"train", {{"epochs", 30}, {"learning_rate", 0.5}, {"batch_size", 4}, {"early_stop_patience", 30}}}};
  }

  std::filesystem::path out(const std::string& name) const { return dir_.path() / "out" / name; }

  std::vector<std::vector<std::string>> tsv(const std::string& name) const {
    std::ifstream in(out(name));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, '\t')) cells.push_back(cell);
      if (!line.empty() && line.back() == '\t') cells.emplace_back();
      rows.push_back(cells);
    }
    return rows;
  }

  std::vector<json> jsonl(const std::string& name) const {
    std::ifstream in(out(name));
    std::vector<json> recs;
    std::string line;
    while (std::getline(in, line)) recs.push_back(json::parse(line));
    return recs;
  }

  std::string separable_csv(std::size_t n) const {
    std::string csv = "id,text,label\n";
    const char* neg[] = {"awful", "nasty", "stupid", "trash", "ugly"};
    const char* pos[] = {"lovely", "sunny", "coffee", "music", "dinner"};
    for (std::size_t i = 0; i < n; ++i) {
      const bool is_neg = i % 2 == 0;
      csv += "t" + std::to_string(i) + "," + (is_neg ? neg[i % 5] : pos[i % 5]) + " thing " +
             (is_neg ? neg[(i / 2) % 5] : pos[(i / 2) % 5]) + " here," + (is_neg ? "neg" : "neither") + "\n";
    }
    return csv;
  }

  testing::TempDir dir_;
  std::filesystem::path config_;
  std::ostringstream err_;
};

TEST_F(PipelineTest, PreprocessWritesOneLinePerDocumentAndCountsDrops) {
  dir_.write("corpus.csv",
             "id,text,label\n1,@bob THIS is sooo bad!!! http://x.co,neg\n2,#lovelyday with friends,neither\n"
             "3,what a day :),neither\n4,you are trash,neg\n5,happy happy joy,neither\n");
  configure(base());
  ASSERT_EQ(run({"preprocess"}), 0) << err_.str();
  EXPECT_EQ(jsonl(files::normalized).size(), 5u);
  EXPECT_EQ(jsonl(files::normalized)[0]["text"], "this is so bad");

  dir_.write("short.csv", "id,text,label\n1,hello there friend,neg\n2,@bob hi,neither\n3,good morning all,neither\n");
  configure(base("short.csv"));
  ASSERT_EQ(run({"preprocess"}), 0);
  const auto summary = tsv(files::preprocess_summary);
  ASSERT_EQ(summary.size(), 2u);
  EXPECT_EQ(summary[1][4], "1");  // dropped_short
  EXPECT_EQ(jsonl(files::normalized).size(), 2u);
}

TEST_F(PipelineTest, MissingInputIsNamed) {
  json cfg = base("gone.csv");
  configure(cfg);
  EXPECT_NE(run({"preprocess"}), 0);
  EXPECT_NE(err_.str().find("gone.csv"), std::string::npos);
}

TEST_F(PipelineTest, SingleClassReweightGivesZeroWeights) {
  std::string csv = "id,text,label\n";
  for (int i = 0; i < 20; ++i) csv += std::to_string(i) + ",word" + std::to_string(i % 4) + " shared tail,neg\n";
  dir_.write("corpus.csv", csv);
  configure(base());
  ASSERT_EQ(run({"preprocess"}), 0);
  ASSERT_EQ(run({"reweight"}), 0) << err_.str();
  const auto weights = jsonl(files::weights);
  EXPECT_EQ(weights.size(), 18u);  // train + val of 20
  for (const auto& w : weights) EXPECT_EQ(w["alpha"].get<double>(), 0.0);
}

TEST_F(PipelineTest, PoisonedReweightUpweightsMinorityDocuments) {
  std::string csv = "id,text,label\n";
  for (int i = 0; i < 27; ++i) csv += "p" + std::to_string(i) + ",bad wolf u" + std::to_string(i) + ",neither\n";
  for (int i = 0; i < 3; ++i) csv += "m" + std::to_string(i) + ",bad wolf v" + std::to_string(i) + ",neg\n";
  dir_.write("corpus.csv", csv);
  json cfg = base();
  cfg["reweight"] = {{"lambda", 0.05}, {"n", 2}, {"step_size", 1.0}, {"tolerance", 1e-9}, {"max_iters", 5000}};
  configure(cfg);
  ASSERT_EQ(run({"preprocess"}), 0);
  ASSERT_EQ(run({"reweight"}), 0) << err_.str();
  double minority = 0.0, majority = 0.0;
  for (const auto& w : jsonl(files::weights)) {
    (w["id"].get<std::string>()[0] == 'm' ? minority : majority) += w["alpha"].get<double>();
  }
  EXPECT_GT(minority, 1.0);
  EXPECT_LT(majority, 1e-6);
  const auto trace = tsv(files::reweight_trace);
  EXPECT_EQ(trace[0], (std::vector<std::string>{"iteration", "objective", "step_size"}));
  EXPECT_GT(trace.size(), 2u);
}

TEST_F(PipelineTest, PerfectPredictionsScoreOne) {
  dir_.write("corpus.csv", separable_csv(100));
  configure(base());
  ASSERT_EQ(run({"preprocess"}), 0);
  EXPECT_EQ(run({"evaluate"}), kExitData);  // no model yet
  ASSERT_EQ(run({"train"}), 0) << err_.str();
  EXPECT_FALSE(std::filesystem::exists(out("model_after.txt")));
  ASSERT_EQ(run({"evaluate"}), 0) << err_.str();
  for (const auto& row : tsv("scores_before.tsv")) {
    if (row[0] == "macro") {
      EXPECT_EQ(row[3], "1");
    }
  }
  const auto cm = tsv("confusion_before.tsv");
  EXPECT_EQ(cm[1][2], "0");
  EXPECT_EQ(cm[2][1], "0");
}

TEST_F(PipelineTest, ZeroWeightsReproduceTheBaselineModel) {
  dir_.write("corpus.csv", separable_csv(60));
  configure(base());
  ASSERT_EQ(run({"preprocess"}), 0);
  const auto split = detail::load_split(load_config(config_));
  {
    std::ofstream w(out(files::weights));
    for (const auto* part : {&split.train, &split.val}) {
      for (const auto& d : part->documents()) w << json{{"id", d.id}, {"alpha", 0.0}}.dump() << '\n';
    }
  }
  ASSERT_EQ(run({"train"}), 0) << err_.str();
  EXPECT_EQ(read_file(out("model_before.txt")), read_file(out("model_after.txt")));
}

json group_record(const std::string& id, const std::string& text, double white, double black) {
  return {{"id", id}, {"text", text}, {"posteriors", {{"white", white}, {"black", black}, {"hispanic", 0.01},
                                                      {"asian", 0.01}}}};
}

TEST_F(PipelineTest, IdenticalGroupsShowNoBias) {
  dir_.write("corpus.csv", separable_csv(80));
  const char* words[] = {"awful thing", "lovely thing", "nasty day", "sunny day", "coffee here", "trash here"};
  std::string groups;
  for (int i = 0; i < 60; ++i) {
    groups += group_record("a" + std::to_string(i), words[i % 6], 0.05, 0.93).dump() + "\n";
    groups += group_record("w" + std::to_string(i), words[i % 6], 0.93, 0.05).dump() + "\n";
  }
  groups += group_record("x", "mixed thing", 0.49, 0.49).dump() + "\n";
  dir_.write("groups.jsonl", groups);
  json cfg = base();
  cfg["data"]["groups"] = {{"path", "groups.jsonl"}, {"style", "jsonl"}};
  cfg["biaseval"] = {{"sample_size", 100}};
  configure(cfg);
  EXPECT_EQ(run({"bias-eval"}), kExitData);  // nothing preprocessed
  ASSERT_EQ(run({"preprocess"}), 0) << err_.str();
  ASSERT_EQ(run({"train"}), 0);
  ASSERT_EQ(run({"bias-eval"}), 0) << err_.str();
  const auto report = tsv(files::bias_report);
  ASSERT_EQ(report.size(), 2u);  // header + neg/before
  EXPECT_EQ(report[1][1], "neg");
  EXPECT_EQ(report[1][2], "before");
  EXPECT_NEAR(std::stod(report[1][8]), 1.0, 0.05);
  EXPECT_NE(report[1][7], "***");
  EXPECT_EQ(jsonl("group_predictions_before_aae.jsonl").size(), 60u);

  ASSERT_EQ(run({"audit"}), 0) << err_.str();
  EXPECT_TRUE(std::filesystem::exists(out("freq_aae_n1.tsv")));
  EXPECT_TRUE(std::filesystem::exists(out("freq_white_n2.tsv")));
}

TEST_F(PipelineTest, ExternalPredictionsFeedTheReport) {
  dir_.write("corpus.csv", separable_csv(40));
  std::string groups, before, after, stray;
  for (int i = 0; i < 10; ++i) {
    const auto a = "a" + std::to_string(i), w = "w" + std::to_string(i);
    groups += group_record(a, "some words", 0.05, 0.93).dump() + "\n";
    groups += group_record(w, "some words", 0.93, 0.05).dump() + "\n";
    const double pa = 0.3 + 0.01 * i, pw = 0.1 + 0.01 * i;
    before += json{{"id", a}, {"probs", {pa, 1 - pa}}}.dump() + "\n" + json{{"id", w}, {"probs", {pw, 1 - pw}}}.dump() + "\n";
    after += json{{"id", a}, {"probs", {0.2, 0.8}}}.dump() + "\n" + json{{"id", w}, {"probs", {0.2, 0.8}}}.dump() + "\n";
  }
  stray = before + json{{"id", "nobody"}, {"probs", {0.5, 0.5}}}.dump() + "\n";
  dir_.write("groups.jsonl", groups);
  dir_.write("before.jsonl", before);
  dir_.write("after.jsonl", after);
  dir_.write("stray.jsonl", stray);
  json cfg = base();
  cfg["data"]["groups"] = {{"path", "groups.jsonl"}, {"style", "jsonl"}};
  cfg["biaseval"] = {{"predictions_before", "before.jsonl"}, {"predictions_after", "after.jsonl"}};
  configure(cfg);
  ASSERT_EQ(run({"preprocess"}), 0);
  ASSERT_EQ(run({"bias-eval"}), 0) << err_.str();
  const auto report = tsv(files::bias_report);
  ASSERT_EQ(report.size(), 3u);
  EXPECT_NEAR(std::stod(report[1][3]), 0.345, 1e-9);
  EXPECT_NEAR(std::stod(report[1][4]), 0.145, 1e-9);
  EXPECT_EQ(report[1][7], "***");
  EXPECT_EQ(report[2][2], "after");
  EXPECT_EQ(report[2][5], "nan");  // both samples constant
  EXPECT_NEAR(std::stod(report[2][8]), 1.0, 1e-12);

  cfg["biaseval"]["predictions_before"] = "stray.jsonl";
  configure(cfg);
  EXPECT_EQ(run({"bias-eval"}), kExitData);
  EXPECT_NE(err_.str().find("nobody"), std::string::npos);
}

TEST_F(PipelineTest, FullSyntheticRun) {
  testing::SyntheticOptions opt;
  opt.neg_docs = 150;
  opt.neutral_docs = 250;
  opt.group_docs = 200;
  opt.unassigned_docs = 20;
  config_ = testing::write_synthetic_fixture(dir_.path(), opt, {{"biaseval", {{"sample_size", 150}}}});
  for (const std::string cmd : {"preprocess", "audit", "reweight", "train", "evaluate", "bias-eval", "learning-curve"}) {
    ASSERT_EQ(run({cmd}), 0) << cmd << ": " << err_.str();
  }
  const auto audit = tsv(files::audit);
  ASSERT_GT(audit.size(), 1u);
  EXPECT_EQ(audit[1][0], "neg");
  EXPECT_EQ(audit[1][1], testing::kPlanted);
  EXPECT_EQ(tsv(files::bias_report).size(), 3u);
  EXPECT_EQ(tsv(files::learning_curve).size(), 4u);
  EXPECT_TRUE(std::filesystem::exists(out("model_after.txt")));
  EXPECT_TRUE(std::filesystem::exists(out("train_trace_after.tsv")));
}

}  // namespace
}  // namespace debias
