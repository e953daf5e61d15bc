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
/// Cross-domain dialect bias: group filtering on demographic posteriors,
/// group sampling, mean class membership per group, the black/white ratio
/// and an independent two-sample t-test.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "debias/classifier.hpp"
#include "debias/corpus.hpp"
#include "debias/error.hpp"
#include "debias/io.hpp"
#include "debias/rng.hpp"

namespace debias {

struct DialectThresholds {
  double major = 0.80;  // p_black (or p_white) must exceed this
  double minor = 0.10;  // p_hispanic + p_asian must stay below this
};

struct DialectGroups {
  LabeledCorpus aae;    // AAE-aligned
  LabeledCorpus white;  // White-aligned
  std::size_t dropped = 0;
};

/// Both comparisons are strict. Since posteriors sum to at most 1 a document
/// cannot pass both major thresholds.
inline DialectGroups dialect_filter(const LabeledCorpus& corpus, DialectThresholds thresholds = {}) {
  std::vector<std::size_t> aae, white;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& post = corpus[i].posteriors;
    if (!post) throw DataError("dialect_filter: document '" + corpus[i].id + "' has no posteriors");
    const double minor = post->hispanic + post->asian;
    if (minor >= thresholds.minor) continue;
    if (post->black > thresholds.major) {
      aae.push_back(i);
    } else if (post->white > thresholds.major) {
      white.push_back(i);
    }
  }
  DialectGroups groups{corpus.subset(aae), corpus.subset(white), 0};
  groups.dropped = corpus.size() - aae.size() - white.size();
  return groups;
}

struct GroupSampleResult {
  LabeledCorpus documents;
  bool short_group = false;  // fewer documents than requested; all returned
};

/// Uniform sample without replacement, in input order.
inline GroupSampleResult sample_group(const LabeledCorpus& group, std::size_t n, std::uint64_t seed) {
  GroupSampleResult result;
  if (group.size() <= n) {
    result.documents = group;
    result.short_group = group.size() < n;
    return result;
  }
  std::vector<std::size_t> idx(group.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  // Partial Fisher-Yates: the first n slots become the sample.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.below(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  result.documents = group.subset(idx);
  return result;
}

/// Mean of the class-`cls` probability over the prediction set.
inline double mean_membership(const PredictionSet& predictions, std::size_t cls) {
  if (predictions.size() == 0) throw DataError("mean_membership: empty prediction set");
  double sum = 0.0;
  for (const auto& p : predictions.probs) sum += p.at(cls);
  return sum / static_cast<double>(predictions.size());
}

inline std::vector<double> class_column(const PredictionSet& predictions, std::size_t cls) {
  std::vector<double> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions.probs) out.push_back(p.at(cls));
  return out;
}

/// p_black / p_white; nullopt when p_white is 0.
inline std::optional<double> bias_ratio(double p_black, double p_white) {
  if (p_white == 0.0) return std::nullopt;
  return p_black / p_white;
}

enum class TTestKind { welch, pooled };

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
};

namespace detail {

// A constant sample gets exactly zero variance; the rounded mean of equal
// values would otherwise leave a tiny positive residue.
inline void mean_var(std::span<const double> x, double& mean, double& var) {
  mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  var = 0.0;
  if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) {
    mean = x[0];
    return;
  }
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size() - 1);
}

// Two-sided tail of Student's t: P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2).
inline double two_sided_p(double t, double df) {
  const double x = df / (df + t * t);
  if (x >= 1.0) return 1.0;
  return boost::math::ibeta(df / 2.0, 0.5, x);
}

}  // namespace detail

/// Independent two-sample t-test. Welch's version uses the
/// Welch-Satterthwaite degrees of freedom; the pooled version uses
/// n_a + n_b - 2. nullopt when both samples have zero variance.
inline std::optional<TTestResult> t_test(std::span<const double> a, std::span<const double> b,
                                         TTestKind kind = TTestKind::welch) {
  if (a.size() < 2 || b.size() < 2) throw DataError("t_test: each sample needs at least 2 values");
  double ma, va, mb, vb;
  detail::mean_var(a, ma, va);
  detail::mean_var(b, mb, vb);
  if (va == 0.0 && vb == 0.0) return std::nullopt;
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  TTestResult r;
  if (kind == TTestKind::welch) {
    const double sa = va / na;
    const double sb = vb / nb;
    r.t = (ma - mb) / std::sqrt(sa + sb);
    r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  } else {
    const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
    r.t = (ma - mb) / std::sqrt(pooled * (1.0 / na + 1.0 / nb));
    r.df = na + nb - 2.0;
  }
  r.p = detail::two_sided_p(r.t, r.df);
  return r;
}

inline std::optional<TTestResult> welch_t_test(std::span<const double> a, std::span<const double> b) {
  return t_test(a, b, TTestKind::welch);
}

inline std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

/// Predictions of one model variant on both dialect groups.
struct VariantPredictions {
  std::string variant;  // e.g. "before" / "after"
  PredictionSet aae;
  PredictionSet white;
};

struct BiasRow {
  std::string dataset;
  std::size_t cls = 0;
  std::string variant;
  double p_black = 0.0;
  double p_white = 0.0;
  std::optional<TTestResult> test;
  std::string stars;
  std::optional<double> ratio;
};

/// One row per negative class per variant, in variant-major order.
inline std::vector<BiasRow> bias_report(std::span<const VariantPredictions> variants, const LabelSchema& schema,
                                        std::span<const std::size_t> negative_classes, const std::string& dataset,
                                        TTestKind kind = TTestKind::welch) {
  std::vector<BiasRow> rows;
  for (const auto& v : variants) {
    if (!(v.aae.schema == schema) || !(v.white.schema == schema)) {
      throw DataError("bias_report: schema mismatch in variant '" + v.variant + "'");
    }
    for (std::size_t cls : negative_classes) {
      if (cls >= schema.size()) throw DataError("bias_report: class index out of range");
      BiasRow row;
      row.dataset = dataset;
      row.cls = cls;
      row.variant = v.variant;
      row.p_black = mean_membership(v.aae, cls);
      row.p_white = mean_membership(v.white, cls);
      const auto black_col = class_column(v.aae, cls);
      const auto white_col = class_column(v.white, cls);
      row.test = t_test(black_col, white_col, kind);
      row.stars = row.test ? significance_stars(row.test->p) : "";
      row.ratio = bias_ratio(row.p_black, row.p_white);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline void write_bias_report_tsv(std::ostream& out, const std::vector<BiasRow>& rows, const LabelSchema& schema) {
  out << "dataset\tclass\tvariant\tp_hat_black\tp_hat_white\tt\tp\tstars\tratio\n";
  for (const auto& r : rows) {
    out << r.dataset << '\t' << schema.name(r.cls) << '\t' << r.variant << '\t' << format_real(r.p_black, 8) << '\t'
        << format_real(r.p_white, 8) << '\t'
        << (r.test ? format_real(r.test->t, 8) : std::string(kUndefined)) << '\t'
        << (r.test ? format_real(r.test->p, 8) : std::string(kUndefined)) << '\t' << r.stars << '\t'
        << format_real(r.ratio, 8) << '\n';
  }
}

}  // namespace debias
