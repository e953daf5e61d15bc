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

// Reference computations written straight from the definitions, sharing no
// code with the library beyond the corpus containers and the RNG.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "debias/corpus.hpp"
#include "debias/rng.hpp"

namespace debias::testing {

/// Whitespace split written independently of the library tokenizer.
inline std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

/// Contiguous n-grams joined by single spaces.
inline std::vector<std::string> grams_of(const std::string& text, std::size_t n) {
  const auto words = split_words(text);
  std::vector<std::string> out;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    std::string g = words[i];
    for (std::size_t k = 1; k < n; ++k) g += " " + words[i + k];
    out.push_back(g);
  }
  return out;
}

struct RandomCorpusSpec {
  std::size_t min_docs = 1;
  std::size_t max_docs = 50;
  std::size_t vocab = 20;
  std::size_t classes = 2;
  std::size_t min_len = 1;
  std::size_t max_len = 8;
  bool all_labeled = true;
};

inline LabelSchema schema_of(std::size_t classes) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));
  return LabelSchema(names);
}

/// Documents over the words w0..w{vocab-1}; `text` is already normalized.
inline LabeledCorpus random_corpus(Rng& rng, const RandomCorpusSpec& spec) {
  const std::size_t n_docs = spec.min_docs + rng.below(spec.max_docs - spec.min_docs + 1);
  std::vector<Document> docs;
  for (std::size_t i = 0; i < n_docs; ++i) {
    Document d;
    d.id = "d" + std::to_string(i);
    const std::size_t len = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
    for (std::size_t k = 0; k < len; ++k) {
      if (k) d.text += ' ';
      d.text += "w" + std::to_string(rng.below(spec.vocab));
    }
    d.raw_text = d.text;
    if (spec.all_labeled || rng.below(5) != 0) d.label = rng.below(spec.classes);
    docs.push_back(std::move(d));
  }
  return LabeledCorpus(schema_of(spec.classes), std::move(docs));
}

// ---------------------------------------------------------------------------
// LMI by enumeration: every count is a fresh scan over the corpus.

inline std::optional<double> brute_lmi(const LabeledCorpus& corpus, std::size_t n, const std::string& w,
                                       std::size_t c) {
  double total = 0, count_w = 0, count_c = 0, count_wc = 0;
  for (const auto& doc : corpus.documents()) {
    for (const auto& g : grams_of(doc.text, n)) {
      total += 1;
      const bool is_w = g == w;
      const bool is_c = *doc.label == c;
      count_w += is_w;
      count_c += is_c;
      count_wc += is_w && is_c;
    }
  }
  if (count_w == 0) return std::nullopt;
  if (count_wc == 0) return 0.0;
  const double p_wc = count_wc / total;
  const double p_c_given_w = count_wc / count_w;
  const double p_c = count_c / total;
  return p_wc * std::log(p_c_given_w / p_c);
}

// ---------------------------------------------------------------------------
// Bias and objective by definition (presence membership).

inline std::map<std::string, std::vector<double>> brute_bias(const LabeledCorpus& corpus,
                                                             const std::vector<double>& alphas, std::size_t n) {
  std::set<std::string> vocab;
  std::vector<std::set<std::string>> present(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (const auto& g : grams_of(corpus[i].text, n)) {
      vocab.insert(g);
      present[i].insert(g);
    }
  }
  std::map<std::string, std::vector<double>> out;
  const std::size_t C = corpus.schema().size();
  for (const auto& g : vocab) {
    std::vector<double> num(C, 0.0);
    double den = 0.0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (!present[i].count(g)) continue;
      num[*corpus[i].label] += 1.0 + alphas[i];
      den += 1.0 + alphas[i];
    }
    for (double& v : num) v /= den;
    out[g] = num;
  }
  return out;
}

inline double brute_objective(const LabeledCorpus& corpus, const std::vector<double>& alphas, std::size_t n,
                              double lambda) {
  double sum = 0.0;
  for (const auto& [g, row] : brute_bias(corpus, alphas, n)) sum += *std::max_element(row.begin(), row.end());
  double sq = 0.0;
  for (double a : alphas) sq += a * a;
  return sum + lambda * std::sqrt(sq);
}

// ---------------------------------------------------------------------------
// Metrics by brute force from label vectors.

struct BruteScores {
  std::vector<double> f1;
  double macro_f1 = 0.0;
};

inline BruteScores brute_macro_f1(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& pred,
                                  std::size_t classes) {
  BruteScores s;
  for (std::size_t c = 0; c < classes; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (pred[i] == c && truth[i] == c) tp += 1;
      if (pred[i] == c && truth[i] != c) fp += 1;
      if (pred[i] != c && truth[i] == c) fn += 1;
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    s.f1.push_back(p + r > 0 ? 2 * p * r / (p + r) : 0.0);
  }
  for (double f : s.f1) s.macro_f1 += f;
  s.macro_f1 /= static_cast<double>(classes);
  return s;
}

// ---------------------------------------------------------------------------
// Finite differences.

inline double central_difference(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                                 std::size_t i, double h) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2 * h);
}

/// |a - b| / max(|a|, |b|, floor).
inline double rel_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// ---------------------------------------------------------------------------
// Single effective weight: g shared by nine class-1 documents and one
// class-0 document, every other bigram unique to one document.

inline LabeledCorpus poisoned_fixture() {
  std::vector<Document> docs;
  for (int i = 0; i < 10; ++i) {
    Document d;
    d.id = "p" + std::to_string(i);
    d.text = "bad wolf u" + std::to_string(i);
    d.raw_text = d.text;
    d.label = i < 9 ? 1 : 0;
    docs.push_back(d);
  }
  return LabeledCorpus(LabelSchema({"c0", "c1"}), std::move(docs));
}

/// Minimum of the objective over a in [lo, hi] with every other weight at 0,
/// the free weight sitting on document `index`.
inline std::pair<double, double> grid_minimum(const LabeledCorpus& corpus, std::size_t index, std::size_t n,
                                              double lambda, double lo, double hi, double step) {
  std::vector<double> alphas(corpus.size(), 0.0);
  double best_a = lo;
  double best_f = std::numeric_limits<double>::infinity();
  const auto steps = static_cast<std::size_t>(std::llround((hi - lo) / step));
  for (std::size_t k = 0; k <= steps; ++k) {
    alphas[index] = lo + step * static_cast<double>(k);
    const double f = brute_objective(corpus, alphas, n, lambda);
    if (f < best_f) {
      best_f = f;
      best_a = alphas[index];
    }
  }
  return {best_a, best_f};
}

}  // namespace debias::testing
