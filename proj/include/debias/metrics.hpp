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

#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "debias/classifier.hpp"
#include "debias/corpus.hpp"
#include "debias/error.hpp"
#include "debias/io.hpp"
#include "debias/rng.hpp"

namespace debias {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(LabelSchema schema)
      : schema_(std::move(schema)), cells_(schema_.size() * schema_.size(), 0) {}

  const LabelSchema& schema() const noexcept { return schema_; }
  std::size_t size() const noexcept { return schema_.size(); }

  std::uint64_t& at(std::size_t truth, std::size_t pred) { return cells_.at(truth * size() + pred); }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return cells_.at(truth * size() + pred); }

  std::uint64_t row_sum(std::size_t i) const {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < size(); ++j) s += at(i, j);
    return s;
  }

  std::uint64_t col_sum(std::size_t j) const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < size(); ++i) s += at(i, j);
    return s;
  }

  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto v : cells_) s += v;
    return s;
  }

 private:
  LabelSchema schema_;
  std::vector<std::uint64_t> cells_;
};

inline ConfusionMatrix confusion(std::span<const std::size_t> truth, std::span<const std::size_t> pred,
                                 const LabelSchema& schema) {
  if (truth.size() != pred.size()) throw DataError("confusion: truth and prediction lengths differ");
  if (truth.empty()) throw DataError("confusion: no documents");
  ConfusionMatrix cm(schema);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= schema.size() || pred[i] >= schema.size()) throw DataError("confusion: label out of schema");
    ++cm.at(truth[i], pred[i]);
  }
  return cm;
}

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

struct EvalSummary {
  std::vector<ClassScores> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;  // support-weighted mean of per-class F1
  double accuracy = 0.0;
  std::vector<std::string> warnings;
};

/// Precision TP/colsum, recall TP/rowsum, F1 their harmonic mean; macro
/// values are unweighted means. Undefined ratios score 0 and add a warning.
inline EvalSummary macro_scores(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw DataError("macro_scores: empty confusion matrix");
  EvalSummary s;
  std::uint64_t correct = 0;
  for (std::size_t c = 0; c < cm.size(); ++c) {
    ClassScores cs;
    const double tp = static_cast<double>(cm.at(c, c));
    const auto col = cm.col_sum(c);
    const auto row = cm.row_sum(c);
    correct += cm.at(c, c);
    cs.support = row;
    if (col == 0) {
      s.warnings.push_back("class '" + cm.schema().name(c) + "' was never predicted; precision set to 0");
    } else {
      cs.precision = tp / static_cast<double>(col);
    }
    if (row == 0) {
      s.warnings.push_back("class '" + cm.schema().name(c) + "' has no true instances; recall set to 0");
    } else {
      cs.recall = tp / static_cast<double>(row);
    }
    cs.f1 = cs.precision + cs.recall > 0.0 ? 2.0 * cs.precision * cs.recall / (cs.precision + cs.recall) : 0.0;
    s.per_class.push_back(cs);
  }
  const double k = static_cast<double>(cm.size());
  for (const auto& cs : s.per_class) {
    s.macro_precision += cs.precision / k;
    s.macro_recall += cs.recall / k;
    s.macro_f1 += cs.f1 / k;
    s.weighted_f1 += cs.f1 * static_cast<double>(cs.support) / static_cast<double>(total);
  }
  s.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  return s;
}

/// Predicts every labeled document of `test` with `model`.
inline ConfusionMatrix evaluate(const SoftmaxModel& model, const LabeledCorpus& test) {
  std::vector<std::size_t> truth, pred;
  for (const auto& doc : test.documents()) {
    if (!doc.label) continue;
    truth.push_back(*doc.label);
    pred.push_back(model.predict(doc.text));
  }
  return confusion(truth, pred, test.schema());
}

inline void write_confusion_tsv(std::ostream& out, const ConfusionMatrix& cm) {
  out << "true\\pred";
  for (const auto& name : cm.schema().classes()) out << '\t' << name;
  out << '\n';
  for (std::size_t i = 0; i < cm.size(); ++i) {
    out << cm.schema().name(i);
    for (std::size_t j = 0; j < cm.size(); ++j) out << '\t' << cm.at(i, j);
    out << '\n';
  }
}

inline void write_summary_tsv(std::ostream& out, const EvalSummary& s, const LabelSchema& schema) {
  out << "class\tprecision\trecall\tf1\tsupport\n";
  for (std::size_t c = 0; c < s.per_class.size(); ++c) {
    const auto& cs = s.per_class[c];
    out << schema.name(c) << '\t' << format_real(cs.precision, 6) << '\t' << format_real(cs.recall, 6) << '\t'
        << format_real(cs.f1, 6) << '\t' << cs.support << '\n';
  }
  out << "macro\t" << format_real(s.macro_precision, 6) << '\t' << format_real(s.macro_recall, 6) << '\t'
      << format_real(s.macro_f1, 6) << '\t' << "\n";
  out << "weighted_f1\t\t\t" << format_real(s.weighted_f1, 6) << "\t\n";
  out << "accuracy\t\t\t" << format_real(s.accuracy, 6) << "\t\n";
}

// ---------------------------------------------------------------------------
// Learning curve

struct LearningCurvePoint {
  double portion = 0.0;
  double mean_f1 = 0.0;
  double std_f1 = 0.0;  // population standard deviation over repeats
  std::vector<double> runs;
};

/// For each portion, trains on a stratified subsample of train and val
/// (fresh seed per repeat, derived from (seed, portion index, repeat)) and
/// scores macro F1 on the full test split. Repeat r trains with shuffle
/// seed train_config.seed + r, so portion 1.0 at r = 0 is a plain run.
inline std::vector<LearningCurvePoint> learning_curve(const CorpusSplit& split, std::span<const double> portions,
                                                      std::size_t repeats, const FeatureConfig& features,
                                                      const TrainConfig& train_config, std::uint64_t seed) {
  if (repeats < 1) throw ConfigError("learning_curve.repeats: must be >= 1");
  for (std::size_t i = 0; i < portions.size(); ++i) {
    if (!(portions[i] > 0.0 && portions[i] <= 1.0)) throw ConfigError("learning_curve.portions: must be in (0, 1]");
    if (i > 0 && portions[i] < portions[i - 1]) throw ConfigError("learning_curve.portions: must be ascending");
  }
  std::vector<LearningCurvePoint> points;
  for (std::size_t pi = 0; pi < portions.size(); ++pi) {
    LearningCurvePoint point;
    point.portion = portions[pi];
    for (std::size_t r = 0; r < repeats; ++r) {
      const std::uint64_t run_seed = derive_seed(seed, pi, r);
      const auto train_sub = stratified_subsample(split.train, portions[pi], derive_seed(run_seed, 1), true);
      const auto val_sub = stratified_subsample(split.val, portions[pi], derive_seed(run_seed, 2), false);
      TrainConfig cfg = train_config;
      cfg.seed = train_config.seed + r;
      const auto trained = train(train_sub, val_sub, WeightVector::zeros(train_sub.size() + val_sub.size()), features, cfg);
      point.runs.push_back(macro_scores(evaluate(trained.model, split.test)).macro_f1);
    }
    double mean = 0.0;
    for (double f : point.runs) mean += f;
    mean /= static_cast<double>(point.runs.size());
    double var = 0.0;
    for (double f : point.runs) var += (f - mean) * (f - mean);
    point.mean_f1 = mean;
    point.std_f1 = std::sqrt(var / static_cast<double>(point.runs.size()));
    points.push_back(std::move(point));
  }
  return points;
}

inline void write_learning_curve_tsv(std::ostream& out, const std::vector<LearningCurvePoint>& points) {
  out << "portion\tmean_f1\tstd_f1\n";
  for (const auto& p : points) {
    out << format_real(p.portion, 6) << '\t' << format_real(p.mean_f1, 8) << '\t' << format_real(p.std_f1, 8) << '\n';
  }
}

}  // namespace debias
