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
/// End-to-end commands. Each reads its inputs from the configuration and
/// the output directory and writes its artifacts back there:
///
///   preprocess      normalized.jsonl, groups_normalized.jsonl, preprocess_summary.tsv
///   audit           audit_lmi.tsv, freq_<set>_n<k>.tsv
///   reweight        weights.jsonl, reweight_trace.tsv
///   train           model_before.txt, model_after.txt, train_trace_<variant>.tsv
///   evaluate        confusion_<variant>.tsv, scores_<variant>.tsv
///   bias-eval       bias_report.tsv, group_predictions_<variant>_<group>.jsonl
///   learning-curve  learning_curve.tsv
///
/// The train/val/test split is recomputed from normalized.jsonl and the seed.

#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "debias/biaseval.hpp"
#include "debias/classifier.hpp"
#include "debias/config.hpp"
#include "debias/corpus.hpp"
#include "debias/error.hpp"
#include "debias/io.hpp"
#include "debias/lmi_audit.hpp"
#include "debias/metrics.hpp"
#include "debias/preprocess.hpp"
#include "debias/reweight.hpp"
#include "debias/rng.hpp"

namespace debias {

namespace seeds {
inline constexpr std::uint64_t split = 1;
inline constexpr std::uint64_t train = 2;
inline constexpr std::uint64_t group_sample = 3;
inline constexpr std::uint64_t learning_curve = 4;
}  // namespace seeds

namespace files {
inline constexpr const char* normalized = "normalized.jsonl";
inline constexpr const char* groups = "groups_normalized.jsonl";
inline constexpr const char* preprocess_summary = "preprocess_summary.tsv";
inline constexpr const char* audit = "audit_lmi.tsv";
inline constexpr const char* weights = "weights.jsonl";
inline constexpr const char* reweight_trace = "reweight_trace.tsv";
inline constexpr const char* bias_report = "bias_report.tsv";
inline constexpr const char* learning_curve = "learning_curve.tsv";
}  // namespace files

inline const std::vector<std::string>& model_variants() {
  static const std::vector<std::string> v{"before", "after"};
  return v;
}

inline std::filesystem::path model_path(const RunConfig& cfg, const std::string& variant) {
  return cfg.output_dir / ("model_" + variant + ".txt");
}

namespace detail {

inline void require_file(const std::filesystem::path& p, const std::string& producer) {
  if (!std::filesystem::exists(p)) {
    throw DataError("missing " + p.string() + " (run '" + producer + "' first)");
  }
}

inline LabeledCorpus load_normalized(const RunConfig& cfg) {
  const auto p = cfg.output_dir / files::normalized;
  require_file(p, "preprocess");
  return read_corpus_jsonl(p, cfg.schema);
}

inline CorpusSplit load_split(const RunConfig& cfg) {
  return stratified_split(load_normalized(cfg), cfg.split, derive_seed(cfg.seed, seeds::split));
}

inline TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t = cfg.train;
  t.seed = derive_seed(cfg.seed, seeds::train);
  return t;
}

inline SoftmaxModel read_model(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read model file: " + p.string());
  return load_model(in);
}

}  // namespace detail

inline void cmd_preprocess(const RunConfig& cfg, std::ostream& log) {
  const auto normalizer = Normalizer::from_config(cfg.preprocess);
  const auto ingested = ingest(cfg.corpus.path, cfg.corpus.format, cfg.schema);
  const auto filtered = filter_short(normalize_corpus(ingested.corpus, normalizer), cfg.preprocess.min_tokens);
  if (filtered.corpus.empty()) throw DataError("preprocess: no documents left after filtering");
  {
    auto out = open_output(cfg.output_dir / files::normalized);
    write_corpus_jsonl(out, filtered.corpus);
  }
  auto summary = open_output(cfg.output_dir / files::preprocess_summary);
  summary << "set\trecords\tskipped_missing_text\tmalformed\tdropped_short\tkept\n";
  summary << "corpus\t" << ingested.corpus.size() + ingested.skipped_missing_text + ingested.malformed << '\t'
          << ingested.skipped_missing_text << '\t' << ingested.malformed << '\t' << filtered.dropped << '\t'
          << filtered.corpus.size() << '\n';
  log << "preprocess: kept " << filtered.corpus.size() << " of " << ingested.corpus.size() << " documents ("
      << filtered.dropped << " too short, " << ingested.skipped_missing_text << " without text, "
      << ingested.malformed << " malformed)\n";
  for (const auto& [name, share] : class_distribution(filtered.corpus)) {
    log << "  " << name << '\t' << format_real(share, 4) << '\n';
  }

  if (cfg.groups) {
    const auto g = ingest(cfg.groups->path, cfg.groups->format, cfg.schema);
    const auto gf = filter_short(normalize_corpus(g.corpus, normalizer), cfg.preprocess.min_tokens);
    auto out = open_output(cfg.output_dir / files::groups);
    write_corpus_jsonl(out, gf.corpus);
    summary << "groups\t" << g.corpus.size() + g.skipped_missing_text + g.malformed << '\t' << g.skipped_missing_text
            << '\t' << g.malformed << '\t' << gf.dropped << '\t' << gf.corpus.size() << '\n';
    log << "preprocess: kept " << gf.corpus.size() << " group documents\n";
  }
}

inline void cmd_audit(const RunConfig& cfg, std::ostream& log) {
  const auto split = detail::load_split(cfg);
  const auto train_stats = collect_stats(split.train, cfg.audit.n);
  const auto test_stats = collect_stats(split.test, cfg.audit.n);
  const auto rows = audit_report(train_stats, test_stats, cfg.audit.k);
  {
    auto out = open_output(cfg.output_dir / files::audit);
    write_audit_tsv(out, rows, cfg.schema);
  }
  auto write_freq = [&](const LabeledCorpus& corpus, const std::string& name) {
    for (std::size_t n : {std::size_t{1}, std::size_t{2}}) {
      auto out = open_output(cfg.output_dir / ("freq_" + name + "_n" + std::to_string(n) + ".tsv"));
      write_frequency_tsv(out, top_k_frequency(corpus, n, cfg.audit.frequency_k));
    }
  };
  write_freq(split.train, "train");
  const auto groups_path = cfg.output_dir / files::groups;
  if (cfg.groups && std::filesystem::exists(groups_path)) {
    const auto groups = dialect_filter(read_corpus_jsonl(groups_path, cfg.schema), cfg.biaseval.thresholds);
    write_freq(groups.aae, "aae");
    write_freq(groups.white, "white");
  }
  log << "audit: " << rows.size() << " rows over " << train_stats.ngrams().size() << " train " << cfg.audit.n
      << "-grams\n";
}

/// Returns false when the optimizer hit max_iters.
inline bool cmd_reweight(const RunConfig& cfg, std::ostream& log) {
  const auto split = detail::load_split(cfg);
  const auto pool = LabeledCorpus::concat(split.train, split.val);
  const BiasProblem problem(pool, cfg.reweight.n, cfg.reweight.min_count);
  const auto result = optimize_weights(problem, cfg.reweight);
  {
    auto out = open_output(cfg.output_dir / files::weights);
    write_weights(out, pool, result.weights);
  }
  {
    auto out = open_output(cfg.output_dir / files::reweight_trace);
    write_trace_tsv(out, result.trace);
  }
  const double before = problem.objective(WeightVector::zeros(pool.size()).alphas, cfg.reweight.lambda,
                                          cfg.reweight.squared_penalty);
  const double after = result.trace.empty() ? before : result.trace.back().objective;
  log << "reweight: objective " << format_real(before, 8) << " -> " << format_real(after, 8) << " after "
      << result.iterations << " iterations, ||a|| = " << format_real(result.weights.norm(), 6)
      << (result.converged ? "" : " (not converged)") << '\n';
  return result.converged;
}

inline void cmd_train(const RunConfig& cfg, std::ostream& log) {
  const auto split = detail::load_split(cfg);
  const std::size_t pool = split.train.size() + split.val.size();
  const auto weights_path = cfg.output_dir / files::weights;
  for (const auto& variant : model_variants()) {
    WeightVector w = WeightVector::zeros(pool);
    if (variant == "after") {
      if (!std::filesystem::exists(weights_path)) {
        log << "train: no " << files::weights << ", skipping the reweighted model\n";
        continue;
      }
      std::ifstream in(weights_path);
      w = align_weights(LabeledCorpus::concat(split.train, split.val), read_weights(in));
    }
    const auto result = train(split.train, split.val, w, cfg.features, detail::train_config(cfg));
    {
      auto out = open_output(model_path(cfg, variant));
      save_model(out, result.model);
    }
    {
      auto out = open_output(cfg.output_dir / ("train_trace_" + variant + ".tsv"));
      write_train_trace_tsv(out, result.trace);
    }
    log << "train: " << variant << " model, best epoch " << result.best_epoch;
    if (result.clamped) log << ", " << result.clamped << " clamped probabilities";
    log << '\n';
  }
}

inline void cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
  const auto split = detail::load_split(cfg);
  bool any = false;
  for (const auto& variant : model_variants()) {
    const auto p = model_path(cfg, variant);
    if (!std::filesystem::exists(p)) continue;
    any = true;
    const auto model = detail::read_model(p);
    if (!(model.schema() == cfg.schema)) throw DataError("evaluate: model schema differs from the configuration");
    const auto cm = evaluate(model, split.test);
    const auto scores = macro_scores(cm);
    {
      auto out = open_output(cfg.output_dir / ("confusion_" + variant + ".tsv"));
      write_confusion_tsv(out, cm);
    }
    {
      auto out = open_output(cfg.output_dir / ("scores_" + variant + ".tsv"));
      write_summary_tsv(out, scores, cfg.schema);
    }
    for (const auto& w : scores.warnings) log << "warning: " << variant << ": " << w << '\n';
    log << "evaluate: " << variant << " macro F1 " << format_real(scores.macro_f1, 6) << ", accuracy "
        << format_real(scores.accuracy, 6) << '\n';
  }
  if (!any) detail::require_file(model_path(cfg, "before"), "train");
}

inline void cmd_bias_eval(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.groups) throw ConfigError("data.groups: required for bias-eval");
  const auto groups_path = cfg.output_dir / files::groups;
  detail::require_file(groups_path, "preprocess");
  const auto all = read_corpus_jsonl(groups_path, cfg.schema);
  const auto groups = dialect_filter(all, cfg.biaseval.thresholds);
  if (groups.aae.size() < 2 || groups.white.size() < 2) {
    throw DataError("bias-eval: need at least 2 documents per group, got " + std::to_string(groups.aae.size()) +
                    " AAE-aligned and " + std::to_string(groups.white.size()) + " White-aligned");
  }
  const auto aae = sample_group(groups.aae, cfg.biaseval.sample_size, derive_seed(cfg.seed, seeds::group_sample, 0));
  const auto white =
      sample_group(groups.white, cfg.biaseval.sample_size, derive_seed(cfg.seed, seeds::group_sample, 1));
  if (aae.short_group) log << "warning: AAE-aligned group has only " << aae.documents.size() << " documents\n";
  if (white.short_group) log << "warning: White-aligned group has only " << white.documents.size() << " documents\n";

  std::set<std::string> ids;
  for (const auto& d : all.documents()) ids.insert(d.id);

  std::vector<VariantPredictions> variants;
  for (const auto& variant : model_variants()) {
    const auto& external = variant == "before" ? cfg.biaseval.predictions_before : cfg.biaseval.predictions_after;
    PredictionSet aae_pred, white_pred;
    if (external) {
      const auto loaded = load_external_predictions(*external, cfg.schema, &ids);
      aae_pred = align_predictions(loaded, aae.documents);
      white_pred = align_predictions(loaded, white.documents);
    } else {
      const auto p = model_path(cfg, variant);
      if (!std::filesystem::exists(p)) continue;
      const auto model = detail::read_model(p);
      if (!(model.schema() == cfg.schema)) throw DataError("bias-eval: model schema differs from the configuration");
      aae_pred = predict_set(model, aae.documents, variant);
      white_pred = predict_set(model, white.documents, variant);
    }
    for (const auto& [set, name] : {std::pair{&aae_pred, "aae"}, std::pair{&white_pred, "white"}}) {
      auto out = open_output(cfg.output_dir / ("group_predictions_" + variant + "_" + name + ".jsonl"));
      write_predictions(out, *set);
    }
    variants.push_back({variant, std::move(aae_pred), std::move(white_pred)});
  }
  if (variants.empty()) detail::require_file(model_path(cfg, "before"), "train");

  const auto rows = bias_report(variants, cfg.schema, cfg.negative_class_indices(), cfg.dataset_name,
                                cfg.biaseval.t_test);
  auto out = open_output(cfg.output_dir / files::bias_report);
  write_bias_report_tsv(out, rows, cfg.schema);
  log << "bias-eval: " << aae.documents.size() << " AAE-aligned and " << white.documents.size()
      << " White-aligned documents (" << groups.dropped << " unassigned)\n";
  for (const auto& r : rows) {
    log << "  " << cfg.schema.name(r.cls) << ' ' << r.variant << " ratio " << format_real(r.ratio, 4) << ' '
        << r.stars << '\n';
  }
}

inline void cmd_learning_curve(const RunConfig& cfg, std::ostream& log) {
  const auto split = detail::load_split(cfg);
  const auto points = learning_curve(split, cfg.learning_curve.portions, cfg.learning_curve.repeats, cfg.features,
                                     detail::train_config(cfg), derive_seed(cfg.seed, seeds::learning_curve));
  auto out = open_output(cfg.output_dir / files::learning_curve);
  write_learning_curve_tsv(out, points);
  for (const auto& p : points) {
    log << "learning-curve: " << format_real(p.portion, 3) << " -> " << format_real(p.mean_f1, 4) << " +/- "
        << format_real(p.std_f1, 4) << '\n';
  }
}

}  // namespace debias
