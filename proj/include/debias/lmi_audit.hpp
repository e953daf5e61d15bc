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
/// N-gram/class co-occurrence counts and Local Mutual Information ranking.
///
///   LMI(w, c) = p(w, c) * ln(p(c | w) / p(c))
///   p(w, c) = count(w, c) / |D|,  p(c | w) = count(w, c) / count(w),
///   p(c) = count(c) / |D|
///
/// |D| is the number of n-gram occurrences in the corpus, so every count is
/// taken with multiplicity and count(c) is the number of occurrences inside
/// documents of class c.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "debias/corpus.hpp"
#include "debias/error.hpp"
#include "debias/io.hpp"
#include "debias/ngram.hpp"

namespace debias {

class NgramStats {
 public:
  NgramStats(LabelSchema schema, std::size_t n) : schema_(std::move(schema)), n_(n), count_c_(schema_.size(), 0) {}

  const LabelSchema& schema() const noexcept { return schema_; }
  std::size_t n() const noexcept { return n_; }
  std::uint64_t total() const noexcept { return total_; }
  std::size_t vocabulary_size() const noexcept { return per_class_.size(); }

  std::uint64_t count_c(std::size_t c) const { return count_c_.at(c); }

  std::uint64_t count_w(const Ngram& w) const {
    const auto it = per_class_.find(w);
    if (it == per_class_.end()) return 0;
    std::uint64_t sum = 0;
    for (auto v : it->second) sum += v;
    return sum;
  }

  std::uint64_t count_wc(const Ngram& w, std::size_t c) const {
    const auto it = per_class_.find(w);
    return it == per_class_.end() ? 0 : it->second.at(c);
  }

  void add(const Ngram& w, std::size_t c, std::uint64_t k = 1) {
    auto [it, inserted] = per_class_.try_emplace(w);
    if (inserted) it->second.assign(schema_.size(), 0);
    it->second.at(c) += k;
    count_c_.at(c) += k;
    total_ += k;
  }

  /// Adds another shard's counts. Associative and commutative.
  void merge(const NgramStats& other) {
    if (!(other.schema_ == schema_) || other.n_ != n_) throw DataError("ngram stats: merge of incompatible stats");
    for (const auto& [w, counts] : other.per_class_) {
      for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c]) add(w, c, counts[c]);
      }
    }
  }

  /// N-grams in ascending order.
  std::vector<Ngram> ngrams() const {
    std::vector<Ngram> out;
    out.reserve(per_class_.size());
    for (const auto& entry : per_class_) out.push_back(entry.first);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Throws std::logic_error if the count sums disagree.
  void check_invariants() const {
    std::uint64_t sum_w = 0;
    std::vector<std::uint64_t> sum_c(schema_.size(), 0);
    for (const auto& [w, counts] : per_class_) {
      for (std::size_t c = 0; c < counts.size(); ++c) {
        sum_w += counts[c];
        sum_c[c] += counts[c];
      }
    }
    if (sum_w != total_ || sum_c != count_c_) throw std::logic_error("ngram stats: count sums disagree");
  }

 private:
  LabelSchema schema_;
  std::size_t n_;
  std::unordered_map<Ngram, std::vector<std::uint64_t>> per_class_;
  std::vector<std::uint64_t> count_c_;
  std::uint64_t total_ = 0;
};

/// Counts every n-gram occurrence of every (labeled, normalized) document.
inline NgramStats collect_stats(const LabeledCorpus& corpus, std::size_t n) {
  if (n < 1) throw std::invalid_argument("collect_stats: n must be >= 1");
  NgramStats stats(corpus.schema(), n);
  for (const auto& doc : corpus.documents()) {
    if (!doc.label) throw DataError("collect_stats: unlabeled document '" + doc.id + "'");
    const auto tokens = tokenize(doc.text);
    for (const auto& g : extract_ngrams(tokens, n)) stats.add(g, *doc.label);
  }
  stats.check_invariants();
  return stats;
}

/// nullopt when w never occurs (the quantity is undefined); 0 when w occurs
/// but never with c.
inline std::optional<double> lmi(const NgramStats& stats, const Ngram& w, std::size_t c) {
  if (stats.total() == 0) throw DataError("lmi: statistics are empty");
  const std::uint64_t joint = stats.count_wc(w, c);
  const std::uint64_t marginal = stats.count_w(w);
  if (marginal == 0) return std::nullopt;
  if (joint == 0) return 0.0;
  const double total = static_cast<double>(stats.total());
  const double p_wc = static_cast<double>(joint) / total;
  const double p_c_given_w = static_cast<double>(joint) / static_cast<double>(marginal);
  const double p_c = static_cast<double>(stats.count_c(c)) / total;
  return p_wc * std::log(p_c_given_w / p_c);
}

struct LmiEntry {
  Ngram ngram;
  std::size_t cls = 0;
  std::optional<double> lmi;
  std::uint64_t train_count = 0;  // count(w, c)
  std::optional<std::uint64_t> test_count;
};

/// The k n-grams with highest LMI for class c among those seen with c.
/// Ties: larger count(w, c) first, then ascending n-gram.
inline std::vector<LmiEntry> top_k_lmi(const NgramStats& stats, std::size_t c, std::size_t k) {
  if (k < 1) throw std::invalid_argument("top_k_lmi: k must be >= 1");
  if (c >= stats.schema().size()) throw std::out_of_range("top_k_lmi: class out of range");
  std::vector<LmiEntry> entries;
  if (stats.total() == 0) return entries;
  for (const auto& w : stats.ngrams()) {
    const auto joint = stats.count_wc(w, c);
    if (joint == 0) continue;
    entries.push_back({w, c, lmi(stats, w, c), joint, std::nullopt});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const LmiEntry& a, const LmiEntry& b) {
    if (*a.lmi != *b.lmi) return *a.lmi > *b.lmi;
    if (a.train_count != b.train_count) return a.train_count > b.train_count;
    return a.ngram < b.ngram;
  });
  if (entries.size() > k) entries.resize(k);
  return entries;
}

struct AuditRow {
  std::size_t cls = 0;
  Ngram ngram;
  std::optional<double> train_lmi;
  std::optional<double> test_lmi;
  std::uint64_t train_count = 0;
  std::uint64_t test_count = 0;
};

/// Top-k train n-grams per class, each looked up in the test statistics.
inline std::vector<AuditRow> audit_report(const NgramStats& train, const NgramStats& test, std::size_t k) {
  if (!(train.schema() == test.schema())) throw DataError("audit_report: train/test schema mismatch");
  if (train.n() != test.n()) throw DataError("audit_report: train/test n mismatch");
  std::vector<AuditRow> rows;
  for (std::size_t c = 0; c < train.schema().size(); ++c) {
    for (const auto& entry : top_k_lmi(train, c, k)) {
      AuditRow row;
      row.cls = c;
      row.ngram = entry.ngram;
      row.train_lmi = entry.lmi;
      row.test_lmi = test.total() > 0 ? lmi(test, entry.ngram, c) : std::nullopt;
      row.train_count = entry.train_count;
      row.test_count = test.count_wc(entry.ngram, c);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

/// Tab-separated heatmap data; LMI columns are multiplied by 10^6.
inline void write_audit_tsv(std::ostream& out, const std::vector<AuditRow>& rows, const LabelSchema& schema) {
  out << "class\tngram\ttrain_lmi_e6\ttest_lmi_e6\ttrain_count\ttest_count\n";
  auto scaled = [](const std::optional<double>& v) -> std::optional<double> {
    if (!v) return std::nullopt;
    return *v * 1e6;
  };
  for (const auto& row : rows) {
    out << schema.name(row.cls) << '\t' << row.ngram.text() << '\t' << format_real(scaled(row.train_lmi), 8) << '\t'
        << format_real(scaled(row.test_lmi), 8) << '\t' << row.train_count << '\t' << row.test_count << '\n';
  }
}

/// Raw occurrence ranking over all documents (labels not needed).
inline std::vector<std::pair<Ngram, std::uint64_t>> top_k_frequency(const LabeledCorpus& corpus, std::size_t n,
                                                                     std::size_t k) {
  if (k < 1) throw std::invalid_argument("top_k_frequency: k must be >= 1");
  std::unordered_map<Ngram, std::uint64_t> counts;
  for (const auto& doc : corpus.documents()) {
    const auto tokens = tokenize(doc.text);
    for (auto& g : extract_ngrams(tokens, n)) ++counts[std::move(g)];
  }
  std::vector<std::pair<Ngram, std::uint64_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

inline void write_frequency_tsv(std::ostream& out, const std::vector<std::pair<Ngram, std::uint64_t>>& ranked) {
  out << "rank\tngram\tcount\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    out << (i + 1) << '\t' << ranked[i].first.text() << '\t' << ranked[i].second << '\n';
  }
}

}  // namespace debias
