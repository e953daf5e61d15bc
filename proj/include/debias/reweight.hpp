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
/// Sample re-weighting against class-correlated n-grams.
///
/// For n-gram j and class c, with D(j) the documents containing j:
///
///   b_j^c = sum_{i in D(j), y_i = c} (1 + a_i) / sum_{i in D(j)} (1 + a_i)
///
/// The weights a >= 0 minimize
///
///   F(a) = sum_j max_c b_j^c + lambda * ||a||_2
///
/// by projected subgradient descent with normalized steps of length
/// step_size / sqrt(t) and step halving whenever F would increase.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "debias/corpus.hpp"
#include "debias/error.hpp"
#include "debias/io.hpp"
#include "debias/ngram.hpp"

namespace debias {

struct ReweightConfig {
  double lambda = 1.0;
  std::size_t n = 2;
  double step_size = 0.1;
  std::size_t max_iters = 2000;
  double tolerance = 1e-6;
  // Penalize lambda * ||a||^2 instead of lambda * ||a||.
  bool squared_penalty = false;
  // N-grams present in fewer documents are left out of the vocabulary.
  std::size_t min_count = 1;

  void validate() const {
    if (!(lambda >= 0.0)) throw ConfigError("reweight.lambda: must be >= 0");
    if (n < 1) throw ConfigError("reweight.n: must be >= 1");
    if (!(step_size > 0.0)) throw ConfigError("reweight.step_size: must be > 0");
    if (max_iters < 1) throw ConfigError("reweight.max_iters: must be >= 1");
    if (!(tolerance > 0.0)) throw ConfigError("reweight.tolerance: must be > 0");
    if (min_count < 1) throw ConfigError("reweight.min_count: must be >= 1");
  }
};

/// One non-negative weight per document, aligned with corpus order.
struct WeightVector {
  std::vector<double> alphas;

  static WeightVector zeros(std::size_t n) { return {std::vector<double>(n, 0.0)}; }

  static WeightVector from_documents(const LabeledCorpus& corpus) {
    WeightVector w;
    w.alphas.reserve(corpus.size());
    for (const auto& doc : corpus.documents()) w.alphas.push_back(doc.weight);
    return w;
  }

  std::size_t size() const noexcept { return alphas.size(); }

  double norm() const {
    double sq = 0.0;
    for (double a : alphas) sq += a * a;
    return std::sqrt(sq);
  }
};

struct BiasTable {
  std::vector<Ngram> vocabulary;         // ascending
  std::vector<std::vector<double>> rows;  // rows[j][c] = b_j^c

  double max_bias(std::size_t j) const { return *std::max_element(rows[j].begin(), rows[j].end()); }
};

/// Presence index of a labeled corpus: for each vocabulary n-gram, the
/// documents containing it. Evaluates b, F and a subgradient of F.
class BiasProblem {
 public:
  BiasProblem(const LabeledCorpus& corpus, std::size_t n, std::size_t min_count = 1)
      : num_docs_(corpus.size()), num_classes_(corpus.schema().size()) {
    if (n < 1) throw std::invalid_argument("bias problem: n must be >= 1");
    labels_.reserve(corpus.size());
    std::unordered_map<Ngram, std::vector<std::uint32_t>> postings;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const auto& doc = corpus[i];
      if (!doc.label) throw DataError("reweight: unlabeled document '" + doc.id + "'");
      labels_.push_back(static_cast<std::uint32_t>(*doc.label));
      auto grams = extract_ngrams(tokenize(doc.text), n);
      std::sort(grams.begin(), grams.end());
      grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
      for (auto& g : grams) postings[std::move(g)].push_back(static_cast<std::uint32_t>(i));
    }
    vocabulary_.reserve(postings.size());
    for (const auto& entry : postings) {
      if (entry.second.size() >= min_count) vocabulary_.push_back(entry.first);
    }
    std::sort(vocabulary_.begin(), vocabulary_.end());
    offsets_.reserve(vocabulary_.size() + 1);
    offsets_.push_back(0);
    for (const auto& g : vocabulary_) {
      const auto& docs = postings.at(g);
      members_.insert(members_.end(), docs.begin(), docs.end());
      offsets_.push_back(members_.size());
    }
  }

  std::size_t num_docs() const noexcept { return num_docs_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t vocabulary_size() const noexcept { return vocabulary_.size(); }
  const std::vector<Ngram>& vocabulary() const noexcept { return vocabulary_; }

  std::span<const std::uint32_t> documents_of(std::size_t j) const {
    return std::span<const std::uint32_t>(members_).subspan(offsets_[j], offsets_[j + 1] - offsets_[j]);
  }

  BiasTable bias(std::span<const double> alphas) const {
    check(alphas);
    BiasTable table;
    table.vocabulary = vocabulary_;
    table.rows.resize(vocabulary_.size());
    for (std::size_t j = 0; j < vocabulary_.size(); ++j) {
      row(j, alphas, table.rows[j]);
    }
    return table;
  }

  /// Sum over the vocabulary of max_c b_j^c.
  double bias_sum(std::span<const double> alphas) const {
    check(alphas);
    std::vector<double> b(num_classes_);
    double sum = 0.0;
    for (std::size_t j = 0; j < vocabulary_.size(); ++j) {
      row(j, alphas, b);
      sum += *std::max_element(b.begin(), b.end());
    }
    return sum;
  }

  double objective(std::span<const double> alphas, double lambda, bool squared_penalty = false) const {
    return bias_sum(alphas) + penalty(alphas, lambda, squared_penalty);
  }

  static double penalty(std::span<const double> alphas, double lambda, bool squared_penalty) {
    double sq = 0.0;
    for (double a : alphas) sq += a * a;
    return lambda * (squared_penalty ? sq : std::sqrt(sq));
  }

  /// A subgradient of F. For each n-gram, tied maximizing classes contribute
  /// the average of their gradients. The unsquared penalty contributes
  /// lambda * a / ||a|| (zero at the origin).
  ///
  ///   d b_j^c / d a_i = (1[y_i = c] - b_j^c) / S_j,  i in D(j),
  ///   S_j = sum_{i in D(j)} (1 + a_i)
  std::vector<double> subgradient(std::span<const double> alphas, double lambda, bool squared_penalty = false) const {
    check(alphas);
    std::vector<double> grad(num_docs_, 0.0);
    std::vector<double> b(num_classes_);
    std::vector<std::size_t> tied;
    for (std::size_t j = 0; j < vocabulary_.size(); ++j) {
      const double denom = row(j, alphas, b);
      const double best = *std::max_element(b.begin(), b.end());
      tied.clear();
      for (std::size_t c = 0; c < num_classes_; ++c) {
        if (b[c] >= best - 1e-12 * std::max(1.0, best)) tied.push_back(c);
      }
      const double share = 1.0 / static_cast<double>(tied.size());
      for (std::uint32_t i : documents_of(j)) {
        double g = 0.0;
        for (std::size_t c : tied) g += (labels_[i] == c ? 1.0 : 0.0) - b[c];
        grad[i] += share * g / denom;
      }
    }
    if (lambda > 0.0) {
      if (squared_penalty) {
        for (std::size_t i = 0; i < num_docs_; ++i) grad[i] += 2.0 * lambda * alphas[i];
      } else {
        double sq = 0.0;
        for (double a : alphas) sq += a * a;
        if (sq > 0.0) {
          const double norm = std::sqrt(sq);
          for (std::size_t i = 0; i < num_docs_; ++i) grad[i] += lambda * alphas[i] / norm;
        }
      }
    }
    return grad;
  }

  /// True when some n-gram has more than one maximizing class at `alphas`.
  bool has_tied_argmax(std::span<const double> alphas, double rel_gap = 1e-9) const {
    std::vector<double> b(num_classes_);
    for (std::size_t j = 0; j < vocabulary_.size(); ++j) {
      row(j, alphas, b);
      std::vector<double> sorted = b;
      std::sort(sorted.begin(), sorted.end(), std::greater<>());
      if (sorted.size() > 1 && sorted[0] - sorted[1] <= rel_gap) return true;
    }
    return false;
  }

 private:
  void check(std::span<const double> alphas) const {
    if (alphas.size() != num_docs_) {
      throw DataError("reweight: weight vector has " + std::to_string(alphas.size()) + " entries for " +
                      std::to_string(num_docs_) + " documents");
    }
  }

  // Fills b with row j and returns the weighted denominator.
  double row(std::size_t j, std::span<const double> alphas, std::vector<double>& b) const {
    b.assign(num_classes_, 0.0);
    double denom = 0.0;
    for (std::uint32_t i : documents_of(j)) {
      const double w = 1.0 + alphas[i];
      b[labels_[i]] += w;
      denom += w;
    }
    if (!(denom > 0.0)) throw DataError("reweight: zero weighted denominator for '" + vocabulary_[j].text() + "'");
    for (double& v : b) v /= denom;
    return denom;
  }

  std::size_t num_docs_;
  std::size_t num_classes_;
  std::vector<std::uint32_t> labels_;
  std::vector<Ngram> vocabulary_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> members_;
};

inline void check_weights(const WeightVector& weights) {
  for (double a : weights.alphas) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw DataError("reweight: weights must be finite and >= 0");
  }
}

inline BiasTable compute_bias(const LabeledCorpus& corpus, const WeightVector& weights, std::size_t n) {
  check_weights(weights);
  return BiasProblem(corpus, n).bias(weights.alphas);
}

inline double objective(const LabeledCorpus& corpus, const WeightVector& weights, const ReweightConfig& config) {
  config.validate();
  check_weights(weights);
  return BiasProblem(corpus, config.n, config.min_count)
      .objective(weights.alphas, config.lambda, config.squared_penalty);
}

struct TraceRow {
  std::size_t iteration = 0;
  double objective = 0.0;
  double step_size = 0.0;
};

struct ReweightResult {
  WeightVector weights;
  std::vector<TraceRow> trace;  // accepted iterates only, starting at a = 0
  bool converged = false;
  std::size_t iterations = 0;
};

/// Minimizes F from a = 0. Each iteration takes the subgradient, drops
/// components that would push an active bound a_i = 0 below zero, moves a
/// distance step_size / sqrt(t) along the normalized direction, projects on
/// a >= 0 and halves the distance (up to 50 times) until F does not
/// increase. Converges when the direction vanishes, no halving helps, or the
/// accepted decrease falls below `tolerance`.
inline ReweightResult optimize_weights(const BiasProblem& problem, const ReweightConfig& config) {
  config.validate();
  constexpr int kMaxHalvings = 50;
  const std::size_t m = problem.num_docs();

  ReweightResult result;
  std::vector<double> alpha(m, 0.0), candidate(m, 0.0);
  double f = problem.objective(alpha, config.lambda, config.squared_penalty);
  if (!std::isfinite(f)) throw ConvergenceError("reweight: objective is not finite");
  result.trace.push_back({0, f, 0.0});

  for (std::size_t t = 1; t <= config.max_iters; ++t) {
    result.iterations = t;
    auto dir = problem.subgradient(alpha, config.lambda, config.squared_penalty);
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (alpha[i] <= 0.0 && dir[i] > 0.0) dir[i] = 0.0;
      norm_sq += dir[i] * dir[i];
    }
    if (norm_sq == 0.0) {
      result.converged = true;
      break;
    }
    const double inv_norm = 1.0 / std::sqrt(norm_sq);
    double step = config.step_size / std::sqrt(static_cast<double>(t));
    bool accepted = false;
    double f_new = f;
    for (int h = 0; h <= kMaxHalvings; ++h, step *= 0.5) {
      for (std::size_t i = 0; i < m; ++i) candidate[i] = std::max(0.0, alpha[i] - step * dir[i] * inv_norm);
      f_new = problem.objective(candidate, config.lambda, config.squared_penalty);
      if (!std::isfinite(f_new)) throw ConvergenceError("reweight: objective is not finite");
      if (f_new <= f) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      result.converged = true;
      break;
    }
    const double decrease = f - f_new;
    alpha.swap(candidate);
    f = f_new;
    result.trace.push_back({t, f, step});
    if (decrease < config.tolerance) {
      result.converged = true;
      break;
    }
  }
  result.weights.alphas = std::move(alpha);
  return result;
}

inline ReweightResult optimize_weights(const LabeledCorpus& corpus, const ReweightConfig& config) {
  config.validate();
  if (corpus.empty()) throw DataError("reweight: corpus is empty");
  return optimize_weights(BiasProblem(corpus, config.n, config.min_count), config);
}

/// Copy of `corpus` with each document's weight set from `weights`.
inline LabeledCorpus apply_weights(const LabeledCorpus& corpus, const WeightVector& weights) {
  if (weights.size() != corpus.size()) throw DataError("apply_weights: length mismatch");
  check_weights(weights);
  std::vector<Document> docs(corpus.documents().begin(), corpus.documents().end());
  for (std::size_t i = 0; i < docs.size(); ++i) docs[i].weight = weights.alphas[i];
  return LabeledCorpus(corpus.schema(), std::move(docs));
}

// ---------------------------------------------------------------------------
// File formats

/// One JSON record per line: {"id": ..., "alpha": ...}.
inline void write_weights(std::ostream& out, const LabeledCorpus& corpus, const WeightVector& weights) {
  if (weights.size() != corpus.size()) throw DataError("write_weights: length mismatch");
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    out << "{\"id\":" << nlohmann::json(corpus[i].id).dump() << ",\"alpha\":" << format_exact(weights.alphas[i])
        << "}\n";
  }
}

inline std::map<std::string, double> read_weights(std::istream& in) {
  std::map<std::string, double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object() || !rec.contains("id") || !rec.contains("alpha") ||
        !rec["alpha"].is_number()) {
      throw DataError("weights file: malformed record at line " + std::to_string(line_no));
    }
    const std::string id = rec["id"].is_string() ? rec["id"].get<std::string>() : rec["id"].dump();
    const double alpha = rec["alpha"].get<double>();
    if (!(alpha >= 0.0)) throw DataError("weights file: negative alpha at line " + std::to_string(line_no));
    if (!out.emplace(id, alpha).second) throw DataError("weights file: duplicate id '" + id + "'");
  }
  return out;
}

/// Weights for `corpus` looked up by id; ids missing from the map get 0.
inline WeightVector align_weights(const LabeledCorpus& corpus, const std::map<std::string, double>& by_id) {
  WeightVector w = WeightVector::zeros(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (auto it = by_id.find(corpus[i].id); it != by_id.end()) w.alphas[i] = it->second;
  }
  return w;
}

inline void write_trace_tsv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "iteration\tobjective\tstep_size\n";
  for (const auto& row : trace) {
    out << row.iteration << '\t' << format_exact(row.objective) << '\t' << format_exact(row.step_size) << '\n';
  }
}

}  // namespace debias
