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

/// @file
/// Reference classifier: bag-of-n-gram features, a softmax linear model and
/// mini-batch training on the sample-weighted cross-entropy
///
///   loss(x, y) = -(1 + a) * sum_k y_k * ln(yhat_k)
///
/// plus loading of class probabilities produced by external models.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "debias/corpus.hpp"
#include "debias/error.hpp"
#include "debias/io.hpp"
#include "debias/ngram.hpp"
#include "debias/reweight.hpp"
#include "debias/rng.hpp"

namespace debias {

// ---------------------------------------------------------------------------
// Features

enum class FeatureWeighting { binary, count, tfidf };

inline std::string to_string(FeatureWeighting w) {
  switch (w) {
    case FeatureWeighting::binary: return "binary";
    case FeatureWeighting::count: return "count";
    case FeatureWeighting::tfidf: return "tfidf";
  }
  return "binary";
}

inline FeatureWeighting parse_feature_weighting(std::string_view name) {
  if (name == "binary") return FeatureWeighting::binary;
  if (name == "count") return FeatureWeighting::count;
  if (name == "tfidf" || name == "tf-idf") return FeatureWeighting::tfidf;
  throw ConfigError("features.weighting: unknown value '" + std::string(name) + "'");
}

struct FeatureConfig {
  std::vector<std::size_t> n_range{1, 2};
  FeatureWeighting weighting = FeatureWeighting::binary;

  void validate() const {
    if (n_range.empty()) throw ConfigError("features.n_range: must not be empty");
    for (auto n : n_range) {
      if (n < 1) throw ConfigError("features.n_range: values must be >= 1");
    }
  }
};

/// Sorted (column, value) pairs.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

/// Vocabulary built from the training split only; columns are dense and
/// ordered by ascending n-gram.
class FeatureMap {
 public:
  FeatureMap() = default;

  static FeatureMap build(const LabeledCorpus& train, const FeatureConfig& config) {
    config.validate();
    if (train.empty()) throw DataError("build_features: empty training corpus");
    FeatureMap map;
    map.n_range_ = config.n_range;
    std::sort(map.n_range_.begin(), map.n_range_.end());
    map.n_range_.erase(std::unique(map.n_range_.begin(), map.n_range_.end()), map.n_range_.end());
    map.weighting_ = config.weighting;

    std::unordered_map<Ngram, std::size_t> df;
    for (const auto& doc : train.documents()) {
      auto grams = map.ngrams_of(doc.text);
      std::sort(grams.begin(), grams.end());
      grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
      for (auto& g : grams) ++df[std::move(g)];
    }
    map.vocabulary_.reserve(df.size());
    for (const auto& entry : df) map.vocabulary_.push_back(entry.first);
    std::sort(map.vocabulary_.begin(), map.vocabulary_.end());
    map.reindex();
    if (map.weighting_ == FeatureWeighting::tfidf) {
      const double docs = static_cast<double>(train.size());
      map.idf_.reserve(map.vocabulary_.size());
      for (const auto& g : map.vocabulary_) map.idf_.push_back(std::log(docs / static_cast<double>(df.at(g))));
    }
    return map;
  }

  /// Reassembles a map from serialized parts.
  static FeatureMap restore(std::vector<std::size_t> n_range, FeatureWeighting weighting, std::vector<Ngram> vocabulary,
                            std::vector<double> idf) {
    FeatureMap map;
    map.n_range_ = std::move(n_range);
    map.weighting_ = weighting;
    map.vocabulary_ = std::move(vocabulary);
    map.idf_ = std::move(idf);
    if ((weighting == FeatureWeighting::tfidf) != !map.idf_.empty() && !map.vocabulary_.empty()) {
      throw DataError("feature map: idf present iff weighting is tfidf");
    }
    if (weighting == FeatureWeighting::tfidf && map.idf_.size() != map.vocabulary_.size()) {
      throw DataError("feature map: idf length does not match vocabulary");
    }
    map.reindex();
    return map;
  }

  std::size_t size() const noexcept { return vocabulary_.size(); }
  const std::vector<Ngram>& vocabulary() const noexcept { return vocabulary_; }
  const std::vector<std::size_t>& n_range() const noexcept { return n_range_; }
  FeatureWeighting weighting() const noexcept { return weighting_; }
  const std::vector<double>& idf() const noexcept { return idf_; }

  std::optional<std::uint32_t> column(const Ngram& g) const {
    const auto it = index_.find(g.text());
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Out-of-vocabulary n-grams are ignored.
  SparseVector transform(std::string_view text) const {
    std::map<std::uint32_t, double> counts;
    for (const auto& g : ngrams_of(text)) {
      if (auto col = column(g)) counts[*col] += 1.0;
    }
    SparseVector out;
    out.reserve(counts.size());
    for (const auto& [col, count] : counts) {
      double value = count;
      if (weighting_ == FeatureWeighting::binary) value = 1.0;
      if (weighting_ == FeatureWeighting::tfidf) value = count * idf_[col];
      out.emplace_back(col, value);
    }
    return out;
  }

 private:
  std::vector<Ngram> ngrams_of(std::string_view text) const {
    const auto tokens = tokenize(text);
    std::vector<Ngram> out;
    for (auto n : n_range_) {
      auto grams = extract_ngrams(tokens, n);
      std::move(grams.begin(), grams.end(), std::back_inserter(out));
    }
    return out;
  }

  void reindex() {
    index_.clear();
    index_.reserve(vocabulary_.size());
    for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
      if (!index_.emplace(vocabulary_[i].text(), static_cast<std::uint32_t>(i)).second) {
        throw DataError("feature map: duplicate vocabulary entry '" + vocabulary_[i].text() + "'");
      }
    }
  }

  std::vector<std::size_t> n_range_;
  FeatureWeighting weighting_ = FeatureWeighting::binary;
  std::vector<Ngram> vocabulary_;
  std::vector<double> idf_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

inline FeatureMap build_features(const LabeledCorpus& train, const FeatureConfig& config) {
  return FeatureMap::build(train, config);
}

// ---------------------------------------------------------------------------
// Loss

inline constexpr double kProbabilityFloor = 1e-12;

/// -(1 + alpha) * sum_k y_k ln(yhat_k), with yhat_k clamped at 1e-12 where
/// y_k > 0. Each clamp increments *clamped when given.
inline double weighted_ce_loss(std::span<const double> yhat, std::span<const double> y, double alpha,
                               std::size_t* clamped = nullptr) {
  if (yhat.size() != y.size()) throw std::invalid_argument("weighted_ce_loss: size mismatch");
  if (!(alpha >= 0.0)) throw std::invalid_argument("weighted_ce_loss: alpha must be >= 0");
  double sum = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (y[k] == 0.0) continue;
    double p = yhat[k];
    if (p < kProbabilityFloor) {
      p = kProbabilityFloor;
      if (clamped) ++*clamped;
    }
    sum += y[k] * std::log(p);
  }
  return -(1.0 + alpha) * sum;
}

inline double weighted_ce_loss(std::span<const double> yhat, std::size_t label, double alpha,
                               std::size_t* clamped = nullptr) {
  std::vector<double> y(yhat.size(), 0.0);
  y.at(label) = 1.0;
  return weighted_ce_loss(yhat, y, alpha, clamped);
}

// In-place, max-shifted.
inline void softmax(std::span<double> z) {
  const double top = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

// ---------------------------------------------------------------------------
// Model

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  std::size_t early_stop_patience = 5;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate: must be > 0");
    if (epochs < 1) throw ConfigError("train.epochs: must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
    if (!(l2 >= 0.0)) throw ConfigError("train.l2: must be >= 0");
    if (early_stop_patience < 1) throw ConfigError("train.early_stop_patience: must be >= 1");
  }
};

/// softmax(W x + b). W is C x V, row-major.
class SoftmaxModel {
 public:
  SoftmaxModel() = default;

  SoftmaxModel(LabelSchema schema, FeatureMap features)
      : schema_(std::move(schema)),
        features_(std::move(features)),
        weights_(schema_.size() * features_.size(), 0.0),
        bias_(schema_.size(), 0.0) {}

  const LabelSchema& schema() const noexcept { return schema_; }
  const FeatureMap& features() const noexcept { return features_; }
  std::size_t num_classes() const noexcept { return schema_.size(); }
  std::size_t num_features() const noexcept { return features_.size(); }

  std::span<double> weights() noexcept { return weights_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<double> bias() noexcept { return bias_; }
  std::span<const double> bias() const noexcept { return bias_; }

  double& weight(std::size_t c, std::size_t v) { return weights_[c * features_.size() + v]; }
  double weight(std::size_t c, std::size_t v) const { return weights_[c * features_.size() + v]; }

  // `weight_scale` multiplies W; training keeps W as scale * U.
  std::vector<double> predict_proba(const SparseVector& x, double weight_scale = 1.0) const {
    std::vector<double> z(bias_.begin(), bias_.end());
    const std::size_t V = features_.size();
    for (std::size_t c = 0; c < z.size(); ++c) {
      double dot = 0.0;
      for (const auto& [col, value] : x) dot += weights_[c * V + col] * value;
      z[c] += weight_scale * dot;
    }
    softmax(z);
    return z;
  }

  std::vector<double> predict_proba(std::string_view normalized_text) const {
    return predict_proba(features_.transform(normalized_text));
  }

  /// Argmax; ties go to the lowest class index.
  std::size_t predict(std::string_view normalized_text) const { return argmax(predict_proba(normalized_text)); }

  static std::size_t argmax(std::span<const double> p) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < p.size(); ++k) {
      if (p[k] > p[best]) best = k;
    }
    return best;
  }

  bool all_finite() const {
    auto finite = [](double v) { return std::isfinite(v); };
    return std::all_of(weights_.begin(), weights_.end(), finite) && std::all_of(bias_.begin(), bias_.end(), finite);
  }

  friend bool operator==(const SoftmaxModel& a, const SoftmaxModel& b) {
    return a.schema_ == b.schema_ && a.features_.vocabulary() == b.features_.vocabulary() &&
           a.features_.n_range() == b.features_.n_range() && a.features_.weighting() == b.features_.weighting() &&
           a.features_.idf() == b.features_.idf() && a.weights_ == b.weights_ && a.bias_ == b.bias_;
  }

 private:
  LabelSchema schema_;
  FeatureMap features_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

/// A featurized labeled set with per-sample weights alpha.
struct Batch {
  std::vector<SparseVector> x;
  std::vector<std::size_t> y;
  std::vector<double> alpha;

  std::size_t size() const noexcept { return y.size(); }
};

inline Batch featurize(const SoftmaxModel& model, const LabeledCorpus& corpus, std::span<const double> alphas) {
  if (alphas.size() != corpus.size()) throw DataError("featurize: weights do not match corpus size");
  Batch batch;
  batch.x.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& doc = corpus[i];
    if (!doc.label) throw DataError("train: unlabeled document '" + doc.id + "'");
    if (!(alphas[i] >= 0.0)) throw DataError("train: negative weight for '" + doc.id + "'");
    batch.x.push_back(model.features().transform(doc.text));
    batch.y.push_back(*doc.label);
    batch.alpha.push_back(alphas[i]);
  }
  return batch;
}

/// Per-sample loss and logit gradient delta = (1 + a)(p - onehot(y)).
inline double sample_loss_delta(const SoftmaxModel& model, const SparseVector& x, std::size_t y, double alpha,
                                std::vector<double>& delta, std::size_t* clamped = nullptr, double weight_scale = 1.0) {
  delta = model.predict_proba(x, weight_scale);
  const double loss = weighted_ce_loss(delta, y, alpha, clamped);
  delta[y] -= 1.0;
  for (double& d : delta) d *= (1.0 + alpha);
  return loss;
}

/// Mean weighted cross-entropy over the selected samples.
inline double mean_weighted_loss(const SoftmaxModel& model, const Batch& data, std::size_t* clamped = nullptr) {
  if (data.size() == 0) return 0.0;
  std::vector<double> delta;
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    sum += sample_loss_delta(model, data.x[i], data.y[i], data.alpha[i], delta, clamped);
  }
  return sum / static_cast<double>(data.size());
}

struct DenseGradient {
  std::vector<double> weights;
  std::vector<double> bias;
};

/// Mean weighted cross-entropy over `data` plus (l2 / 2) ||W||^2, and its
/// exact gradient.
inline double training_objective(const SoftmaxModel& model, const Batch& data, double l2, DenseGradient* grad) {
  const std::size_t C = model.num_classes();
  const std::size_t V = model.num_features();
  if (grad) {
    grad->weights.assign(C * V, 0.0);
    grad->bias.assign(C, 0.0);
  }
  std::vector<double> delta;
  double loss = 0.0;
  const double inv_n = data.size() ? 1.0 / static_cast<double>(data.size()) : 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    loss += sample_loss_delta(model, data.x[i], data.y[i], data.alpha[i], delta);
    if (!grad) continue;
    for (std::size_t c = 0; c < C; ++c) {
      grad->bias[c] += delta[c] * inv_n;
      for (const auto& [col, value] : data.x[i]) grad->weights[c * V + col] += delta[c] * value * inv_n;
    }
  }
  loss *= inv_n;
  double sq = 0.0;
  const auto w = model.weights();
  for (std::size_t k = 0; k < w.size(); ++k) {
    sq += w[k] * w[k];
    if (grad) grad->weights[k] += l2 * w[k];
  }
  return loss + 0.5 * l2 * sq;
}

struct EpochTrace {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  SoftmaxModel model;
  std::vector<EpochTrace> trace;
  std::size_t best_epoch = 0;
  std::size_t clamped = 0;
};

namespace detail {

// W is held as scale * U so the L2 decay of every step costs O(1); only the
// columns touched by a batch are written.
class ScaledParameters {
 public:
  explicit ScaledParameters(SoftmaxModel& model) : model_(model) {}

  void decay(double factor) {
    scale_ *= factor;
    if (scale_ < 1e-6) fold();
  }

  void add(std::size_t index, double delta) { model_.weights()[index] += delta / scale_; }

  double scale() const noexcept { return scale_; }

  // Writes the true parameters into the model; U becomes W and scale 1.
  void fold() {
    if (scale_ != 1.0) {
      for (double& w : model_.weights()) w *= scale_;
      scale_ = 1.0;
    }
  }

 private:
  SoftmaxModel& model_;
  double scale_ = 1.0;
};

}  // namespace detail

/// Mini-batch gradient descent on the mean weighted cross-entropy plus
/// (l2 / 2) ||W||^2. `weights` covers train then val documents. Sample order
/// is reshuffled every epoch from `config.seed`. The model with the lowest
/// weighted validation loss is returned; training stops after
/// `early_stop_patience` epochs without improvement. With an empty
/// validation set the training loss is used instead.
inline TrainResult train(const LabeledCorpus& train_set, const LabeledCorpus& val_set, const WeightVector& weights,
                         const FeatureConfig& feature_config, const TrainConfig& config) {
  config.validate();
  if (!(train_set.schema() == val_set.schema())) throw DataError("train: train/val schema mismatch");
  if (weights.size() != train_set.size() + val_set.size()) {
    throw DataError("train: expected " + std::to_string(train_set.size() + val_set.size()) + " weights, got " +
                    std::to_string(weights.size()));
  }
  const std::span<const double> all(weights.alphas);
  TrainResult result;
  SoftmaxModel model(train_set.schema(), build_features(train_set, feature_config));
  const Batch train_data = featurize(model, train_set, all.first(train_set.size()));
  const Batch val_data = featurize(model, val_set, all.subspan(train_set.size()));

  const std::size_t C = model.num_classes();
  const std::size_t V = model.num_features();
  Rng rng(config.seed);
  std::vector<std::size_t> order(train_data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<double> delta;
  std::vector<double> grad_bias(C);
  std::map<std::size_t, double> grad_w;  // ordered so the update order is fixed

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    detail::ScaledParameters params(model);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const double inv_n = 1.0 / static_cast<double>(stop - start);
      std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
      grad_w.clear();
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        sample_loss_delta(model, train_data.x[i], train_data.y[i], train_data.alpha[i], delta, &result.clamped,
                          params.scale());
        for (std::size_t c = 0; c < C; ++c) {
          grad_bias[c] += delta[c] * inv_n;
          for (const auto& [col, value] : train_data.x[i]) grad_w[c * V + col] += delta[c] * value * inv_n;
        }
      }
      params.decay(1.0 - config.learning_rate * config.l2);
      for (const auto& [index, g] : grad_w) params.add(index, -config.learning_rate * g);
      for (std::size_t c = 0; c < C; ++c) model.bias()[c] -= config.learning_rate * grad_bias[c];
    }
    params.fold();
    if (!model.all_finite()) throw ConvergenceError("train: parameters became non-finite");

    EpochTrace row{epoch, mean_weighted_loss(model, train_data, &result.clamped), 0.0};
    row.val_loss = val_data.size() ? mean_weighted_loss(model, val_data, &result.clamped) : row.train_loss;
    if (!std::isfinite(row.train_loss) || !std::isfinite(row.val_loss)) {
      throw ConvergenceError("train: loss became non-finite at epoch " + std::to_string(epoch));
    }
    result.trace.push_back(row);
    if (row.val_loss < best) {
      best = row.val_loss;
      result.model = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.early_stop_patience) {
      break;
    }
  }
  return result;
}

inline void write_train_trace_tsv(std::ostream& out, const std::vector<EpochTrace>& trace) {
  out << "epoch\ttrain_loss\tval_loss\n";
  for (const auto& row : trace) {
    out << row.epoch << '\t' << format_exact(row.train_loss) << '\t' << format_exact(row.val_loss) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Model file
//
//   debias-softmax-model 1
//   num_classes <C>
//   num_features <V>
//   n_range <n1> <n2> ...
//   weighting binary|count|tfidf
//   classes
//   <C class names, one per line>
//   vocabulary
//   <V n-grams, one per line>
//   idf                         (tfidf only)
//   <V values, one per line>
//   bias
//   <C values, one line>
//   weights
//   <C lines of V values>
//
// Reals use the shortest decimal form that round-trips exactly.

inline constexpr std::string_view kModelMagic = "debias-softmax-model";
inline constexpr int kModelVersion = 1;

inline void save_model(std::ostream& out, const SoftmaxModel& model) {
  const auto& fm = model.features();
  out << kModelMagic << ' ' << kModelVersion << '\n';
  out << "num_classes " << model.num_classes() << '\n';
  out << "num_features " << model.num_features() << '\n';
  out << "n_range";
  for (auto n : fm.n_range()) out << ' ' << n;
  out << '\n' << "weighting " << to_string(fm.weighting()) << '\n';
  out << "classes\n";
  for (const auto& name : model.schema().classes()) out << name << '\n';
  out << "vocabulary\n";
  for (const auto& g : fm.vocabulary()) out << g.text() << '\n';
  if (fm.weighting() == FeatureWeighting::tfidf) {
    out << "idf\n";
    for (double v : fm.idf()) out << format_exact(v) << '\n';
  }
  out << "bias\n";
  for (std::size_t c = 0; c < model.num_classes(); ++c) out << (c ? " " : "") << format_exact(model.bias()[c]);
  out << "\nweights\n";
  for (std::size_t c = 0; c < model.num_classes(); ++c) {
    for (std::size_t v = 0; v < model.num_features(); ++v) out << (v ? " " : "") << format_exact(model.weight(c, v));
    out << '\n';
  }
}

inline SoftmaxModel load_model(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> std::string& {
    if (!std::getline(in, line)) throw DataError("model file: truncated after line " + std::to_string(line_no));
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  auto expect_key = [&](std::string_view key) {
    std::istringstream fields(next());
    std::string got;
    fields >> got;
    if (got != key) {
      throw DataError("model file: expected '" + std::string(key) + "' at line " + std::to_string(line_no));
    }
    std::string rest;
    std::getline(fields, rest);
    return rest;
  };
  auto parse_count = [&](const std::string& text) {
    std::istringstream s(text);
    std::size_t v = 0;
    if (!(s >> v)) throw DataError("model file: bad count at line " + std::to_string(line_no));
    return v;
  };
  auto parse_row = [&](std::size_t expected) {
    std::vector<double> values;
    values.reserve(expected);
    for (const auto& tok : tokenize(next())) values.push_back(parse_real(tok));
    if (values.size() != expected) throw DataError("model file: wrong value count at line " + std::to_string(line_no));
    return values;
  };

  {
    std::istringstream header(next());
    std::string magic;
    int version = 0;
    header >> magic >> version;
    if (magic != kModelMagic) throw DataError("model file: not a debias model");
    if (version != kModelVersion) throw DataError("model file: unsupported version " + std::to_string(version));
  }
  const std::size_t C = parse_count(expect_key("num_classes"));
  const std::size_t V = parse_count(expect_key("num_features"));
  std::vector<std::size_t> n_range;
  {
    std::istringstream s(expect_key("n_range"));
    std::size_t n;
    while (s >> n) n_range.push_back(n);
  }
  const auto weighting = parse_feature_weighting(tokenize(expect_key("weighting")).at(0));
  expect_key("classes");
  std::vector<std::string> classes;
  for (std::size_t c = 0; c < C; ++c) classes.push_back(next());
  expect_key("vocabulary");
  std::vector<Ngram> vocab;
  vocab.reserve(V);
  for (std::size_t v = 0; v < V; ++v) vocab.push_back(Ngram::from_text(next()));
  std::vector<double> idf;
  if (weighting == FeatureWeighting::tfidf) {
    expect_key("idf");
    for (std::size_t v = 0; v < V; ++v) idf.push_back(parse_real(next()));
  }
  SoftmaxModel model(LabelSchema(std::move(classes)),
                     FeatureMap::restore(std::move(n_range), weighting, std::move(vocab), std::move(idf)));
  expect_key("bias");
  const auto bias = C ? parse_row(C) : std::vector<double>{};
  std::copy(bias.begin(), bias.end(), model.bias().begin());
  expect_key("weights");
  for (std::size_t c = 0; c < C; ++c) {
    const auto row = V ? parse_row(V) : (next(), std::vector<double>{});
    std::copy(row.begin(), row.end(), model.weights().begin() + static_cast<std::ptrdiff_t>(c * V));
  }
  if (!model.all_finite()) throw DataError("model file: non-finite parameter");
  return model;
}

// ---------------------------------------------------------------------------
// Predictions

/// Per-document class probabilities, from the reference model or elsewhere.
struct PredictionSet {
  LabelSchema schema;
  std::string model_tag;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> probs;

  std::size_t size() const noexcept { return probs.size(); }
};

inline PredictionSet predict_set(const SoftmaxModel& model, const LabeledCorpus& corpus, std::string tag) {
  PredictionSet set{model.schema(), std::move(tag), {}, {}};
  set.ids.reserve(corpus.size());
  set.probs.reserve(corpus.size());
  for (const auto& doc : corpus.documents()) {
    set.ids.push_back(doc.id);
    set.probs.push_back(model.predict_proba(doc.text));
  }
  return set;
}

/// Reads {"id": ..., "probs": [p_1, ..., p_C]} records. Rows whose
/// probabilities do not sum to 1 within 1e-3 are rejected (all offending
/// rows are named); accepted rows are renormalized. When `known_ids` is
/// given, ids outside it are rejected (the first 10 are listed).
inline PredictionSet load_external_predictions(const std::filesystem::path& path, const LabelSchema& schema,
                                               const std::set<std::string>* known_ids = nullptr) {
  const std::string data = read_file(path);
  PredictionSet set{schema, path.stem().string(), {}, {}};
  std::vector<std::size_t> bad_sum;
  std::vector<std::string> unknown;
  std::set<std::string> seen;
  std::istringstream in(data);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++row;
    const auto rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object() || !rec.contains("id") || !rec.contains("probs") ||
        !rec["probs"].is_array()) {
      throw DataError("predictions: malformed row " + std::to_string(row));
    }
    const std::string id = rec["id"].is_string() ? rec["id"].get<std::string>() : rec["id"].dump();
    const auto& raw = rec["probs"];
    if (raw.size() != schema.size()) {
      throw DataError("predictions: row " + std::to_string(row) + " has " + std::to_string(raw.size()) +
                      " probabilities, expected " + std::to_string(schema.size()));
    }
    std::vector<double> probs;
    double sum = 0.0;
    bool in_range = true;
    for (const auto& v : raw) {
      if (!v.is_number()) throw DataError("predictions: non-numeric probability in row " + std::to_string(row));
      const double p = v.get<double>();
      in_range = in_range && p >= 0.0 && p <= 1.0;
      probs.push_back(p);
      sum += p;
    }
    if (!in_range || std::abs(sum - 1.0) > 1e-3) {
      bad_sum.push_back(row);
      continue;
    }
    for (double& p : probs) p /= sum;
    if (!seen.insert(id).second) throw DataError("predictions: duplicate id '" + id + "' in row " + std::to_string(row));
    if (known_ids && !known_ids->count(id)) unknown.push_back(id);
    set.ids.push_back(id);
    set.probs.push_back(std::move(probs));
  }
  if (!bad_sum.empty()) {
    std::string rows;
    for (std::size_t i = 0; i < bad_sum.size(); ++i) rows += (i ? ", " : "") + std::to_string(bad_sum[i]);
    throw DataError("predictions: probabilities do not sum to 1 in rows " + rows);
  }
  if (!unknown.empty()) {
    std::string ids;
    for (std::size_t i = 0; i < unknown.size() && i < 10; ++i) ids += (i ? ", " : "") + unknown[i];
    throw DataError("predictions: " + std::to_string(unknown.size()) + " ids not in the corpus: " + ids);
  }
  if (set.probs.empty()) throw DataError("predictions: no records in " + path.string());
  return set;
}

inline void write_predictions(std::ostream& out, const PredictionSet& set) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << "{\"id\":" << nlohmann::json(set.ids[i]).dump() << ",\"probs\":[";
    for (std::size_t k = 0; k < set.probs[i].size(); ++k) out << (k ? "," : "") << format_exact(set.probs[i][k]);
    out << "]}\n";
  }
}

/// Reorders `set` to follow `corpus` document order; every document must
/// have a prediction.
inline PredictionSet align_predictions(const PredictionSet& set, const LabeledCorpus& corpus) {
  std::unordered_map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < set.size(); ++i) where.emplace(set.ids[i], i);
  PredictionSet out{set.schema, set.model_tag, {}, {}};
  for (const auto& doc : corpus.documents()) {
    const auto it = where.find(doc.id);
    if (it == where.end()) throw DataError("predictions: no prediction for document '" + doc.id + "'");
    out.ids.push_back(doc.id);
    out.probs.push_back(set.probs[it->second]);
  }
  return out;
}

}  // namespace debias
