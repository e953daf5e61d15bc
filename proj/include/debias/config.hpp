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
/// JSON run configuration. Relative paths resolve against the directory of
/// the configuration file. Unknown keys are rejected so typos surface as
/// errors naming the field.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "debias/biaseval.hpp"
#include "debias/classifier.hpp"
#include "debias/corpus.hpp"
#include "debias/error.hpp"
#include "debias/io.hpp"
#include "debias/preprocess.hpp"
#include "debias/reweight.hpp"

namespace debias {

/// Environment variable holding the default configuration path.
inline constexpr const char* kConfigEnv = "DEBIAS_CONFIG";

struct DataSource {
  std::filesystem::path path;
  FormatDescriptor format;
};

struct AuditConfig {
  std::size_t n = 2;
  std::size_t k = 20;
  std::size_t frequency_k = 20;
};

struct BiasEvalConfig {
  DialectThresholds thresholds;
  std::size_t sample_size = 10000;
  TTestKind t_test = TTestKind::welch;
  std::optional<std::filesystem::path> predictions_before;
  std::optional<std::filesystem::path> predictions_after;
};

struct LearningCurveConfig {
  std::vector<double> portions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::size_t repeats = 10;
};

struct RunConfig {
  std::string dataset_name = "dataset";
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  LabelSchema schema;
  std::vector<std::string> negative_classes;
  DataSource corpus;
  std::optional<DataSource> groups;
  PreprocessConfig preprocess;
  SplitFractions split;
  AuditConfig audit;
  ReweightConfig reweight;
  FeatureConfig features;
  TrainConfig train;
  BiasEvalConfig biaseval;
  LearningCurveConfig learning_curve;

  std::vector<std::size_t> negative_class_indices() const {
    std::vector<std::size_t> out;
    for (const auto& name : negative_classes) out.push_back(*schema.index_of(name));
    return out;
  }
};

namespace detail {

using Json = nlohmann::json;

class ConfigReader {
 public:
  ConfigReader(const Json& node, std::string prefix) : node_(node), prefix_(std::move(prefix)) {
    if (!node_.is_object()) throw ConfigError(where("") + "expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& item : node_.items()) {
      if (!ok.count(item.key())) throw ConfigError(where(item.key()) + "unknown field");
    }
  }

  bool has(const char* key) const { return node_.contains(key) && !node_.at(key).is_null(); }
  const Json& at(const char* key) const { return node_.at(key); }
  std::string where(const std::string& key) const {
    return (prefix_.empty() ? key : key.empty() ? prefix_ : prefix_ + "." + key) + ": ";
  }

  template <typename T>
  void get(const char* key, T& out) const {
    if (!has(key)) return;
    const Json& v = node_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(where(key) + "expected true or false");
        out = v.get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(where(key) + "expected an integer");
        if (v.is_number_unsigned()) {
          out = static_cast<T>(v.get<std::uint64_t>());
        } else {
          const auto value = v.get<std::int64_t>();
          if constexpr (std::is_unsigned_v<T>) {
            if (value < 0) throw ConfigError(where(key) + "must be >= 0");
          }
          out = static_cast<T>(value);
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(where(key) + "expected a number");
        out = v.get<T>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(where(key) + "expected a string");
        out = v.get<std::string>();
      } else {
        out = v.get<T>();
      }
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where(key) + "has the wrong type");
    }
  }

  template <typename T>
  T required(const char* key) const {
    if (!has(key)) throw ConfigError(where(key) + "required field is missing");
    T out{};
    get(key, out);
    return out;
  }

  std::filesystem::path path(const char* key, const std::filesystem::path& base) const {
    std::string raw;
    get(key, raw);
    std::filesystem::path p(raw);
    return p.is_absolute() ? p : base / p;
  }

 private:
  const Json& node_;
  std::string prefix_;
};

inline char single_char(const ConfigReader& r, const char* key, char fallback) {
  if (!r.has(key)) return fallback;
  std::string s;
  r.get(key, s);
  if (s == "\\t" || s == "tab") return '\t';
  if (s.size() != 1) throw ConfigError(r.where(key) + "expected a single character");
  return s[0];
}

inline DataSource read_source(const Json& node, const std::string& prefix, const std::filesystem::path& base) {
  ConfigReader r(node, prefix);
  r.allow({"path", "style", "delimiter", "quote", "header", "text_column", "label_column", "id_column",
           "group_column", "label_map", "max_malformed"});
  DataSource src;
  if (!r.has("path")) throw ConfigError(r.where("path") + "required field is missing");
  src.path = r.path("path", base);
  std::string style = "delimited";
  r.get("style", style);
  if (style == "delimited" || style == "csv" || style == "tsv") {
    src.format.style = RecordStyle::delimited;
    if (style == "tsv") src.format.delimiter = '\t';
  } else if (style == "jsonl" || style == "json_lines") {
    src.format.style = RecordStyle::json_lines;
  } else {
    throw ConfigError(r.where("style") + "expected delimited, csv, tsv or jsonl");
  }
  src.format.delimiter = single_char(r, "delimiter", src.format.delimiter);
  src.format.quote = single_char(r, "quote", src.format.quote);
  r.get("header", src.format.header);
  auto optional_column = [&](const char* key, std::optional<std::string>& out) {
    if (!r.has(key)) return;
    const Json& v = r.at(key);
    if (v.is_number_unsigned()) {
      out = std::to_string(v.get<std::uint64_t>());
    } else if (v.is_string()) {
      out = v.get<std::string>();
    } else {
      throw ConfigError(r.where(key) + "expected a column name or index");
    }
  };
  if (r.has("text_column") && r.at("text_column").is_number_unsigned()) {
    src.format.text_column = std::to_string(r.at("text_column").get<std::uint64_t>());
  } else {
    r.get("text_column", src.format.text_column);
  }
  optional_column("label_column", src.format.label_column);
  optional_column("id_column", src.format.id_column);
  optional_column("group_column", src.format.group_column);
  if (r.has("label_map")) {
    const Json& m = r.at("label_map");
    if (!m.is_object()) throw ConfigError(r.where("label_map") + "expected an object");
    for (const auto& item : m.items()) {
      if (!item.value().is_string()) throw ConfigError(r.where("label_map." + item.key()) + "expected a class name");
      src.format.label_map[item.key()] = item.value().get<std::string>();
    }
  }
  r.get("max_malformed", src.format.max_malformed);
  return src;
}

}  // namespace detail

/// Parses and fully validates a configuration. Input paths must exist.
inline RunConfig parse_config(const nlohmann::json& root, const std::filesystem::path& base_dir) {
  using detail::ConfigReader;
  ConfigReader r(root, "");
  r.allow({"dataset_name", "seed", "output_dir", "schema", "negative_classes", "data", "preprocess", "split", "audit",
           "reweight", "features", "train", "biaseval", "learning_curve"});
  RunConfig cfg;
  r.get("dataset_name", cfg.dataset_name);
  cfg.seed = r.required<std::uint64_t>("seed");
  cfg.output_dir = r.has("output_dir") ? r.path("output_dir", base_dir) : base_dir / "out";

  if (!r.has("schema") || !r.at("schema").is_array()) throw ConfigError("schema: expected a list of class names");
  std::vector<std::string> classes;
  for (const auto& v : r.at("schema")) {
    if (!v.is_string()) throw ConfigError("schema: class names must be strings");
    classes.push_back(v.get<std::string>());
  }
  cfg.schema = LabelSchema(std::move(classes));
  if (r.has("negative_classes")) {
    if (!r.at("negative_classes").is_array()) throw ConfigError("negative_classes: expected a list");
    for (const auto& v : r.at("negative_classes")) {
      if (!v.is_string() || !cfg.schema.index_of(v.get<std::string>())) {
        throw ConfigError("negative_classes: '" + v.dump() + "' is not a schema class");
      }
      cfg.negative_classes.push_back(v.get<std::string>());
    }
  } else {
    for (const auto& name : cfg.schema.classes()) {
      if (name != "neither" && name != "Neither") cfg.negative_classes.push_back(name);
    }
  }

  if (!r.has("data")) throw ConfigError("data: required field is missing");
  {
    ConfigReader d(r.at("data"), "data");
    d.allow({"corpus", "groups"});
    if (!d.has("corpus")) throw ConfigError("data.corpus: required field is missing");
    cfg.corpus = detail::read_source(d.at("corpus"), "data.corpus", base_dir);
    if (d.has("groups")) cfg.groups = detail::read_source(d.at("groups"), "data.groups", base_dir);
  }

  if (r.has("preprocess")) {
    ConfigReader p(r.at("preprocess"), "preprocess");
    p.allow({"lowercase", "strip_mentions", "strip_urls", "strip_emoticons", "collapse_elongation", "hashtag_mode",
             "strip_punctuation", "min_tokens", "wordlist"});
    auto& pc = cfg.preprocess;
    p.get("lowercase", pc.lowercase);
    p.get("strip_mentions", pc.strip_mentions);
    p.get("strip_urls", pc.strip_urls);
    p.get("strip_emoticons", pc.strip_emoticons);
    p.get("collapse_elongation", pc.collapse_elongation);
    p.get("strip_punctuation", pc.strip_punctuation);
    p.get("min_tokens", pc.min_tokens);
    std::string mode = "strip_sign";
    p.get("hashtag_mode", mode);
    if (mode == "strip_sign") {
      pc.hashtag_mode = HashtagMode::strip_sign;
    } else if (mode == "segment" || mode == "segment_with_wordlist") {
      pc.hashtag_mode = HashtagMode::segment_with_wordlist;
    } else {
      throw ConfigError("preprocess.hashtag_mode: expected strip_sign or segment");
    }
    if (p.has("wordlist")) pc.wordlist_path = p.path("wordlist", base_dir);
  }
  cfg.preprocess.validate();

  if (r.has("split")) {
    ConfigReader s(r.at("split"), "split");
    s.allow({"train", "val", "test"});
    s.get("train", cfg.split.train);
    s.get("val", cfg.split.val);
    s.get("test", cfg.split.test);
  }
  if (!(cfg.split.train > 0 && cfg.split.val > 0 && cfg.split.test > 0) ||
      std::abs(cfg.split.train + cfg.split.val + cfg.split.test - 1.0) > 1e-9) {
    throw ConfigError("split: fractions must be positive and sum to 1");
  }

  if (r.has("audit")) {
    ConfigReader a(r.at("audit"), "audit");
    a.allow({"n", "k", "frequency_k"});
    a.get("n", cfg.audit.n);
    a.get("k", cfg.audit.k);
    a.get("frequency_k", cfg.audit.frequency_k);
  }
  if (cfg.audit.n < 1) throw ConfigError("audit.n: must be >= 1");
  if (cfg.audit.k < 1) throw ConfigError("audit.k: must be >= 1");
  if (cfg.audit.frequency_k < 1) throw ConfigError("audit.frequency_k: must be >= 1");

  if (r.has("reweight")) {
    ConfigReader w(r.at("reweight"), "reweight");
    w.allow({"lambda", "n", "step_size", "max_iters", "tolerance", "squared_penalty", "min_count"});
    w.get("lambda", cfg.reweight.lambda);
    w.get("n", cfg.reweight.n);
    w.get("step_size", cfg.reweight.step_size);
    w.get("max_iters", cfg.reweight.max_iters);
    w.get("tolerance", cfg.reweight.tolerance);
    w.get("squared_penalty", cfg.reweight.squared_penalty);
    w.get("min_count", cfg.reweight.min_count);
  }
  cfg.reweight.validate();

  if (r.has("features")) {
    ConfigReader f(r.at("features"), "features");
    f.allow({"n_range", "weighting"});
    if (f.has("n_range")) {
      cfg.features.n_range.clear();
      if (!f.at("n_range").is_array()) throw ConfigError("features.n_range: expected a list of integers");
      for (const auto& v : f.at("n_range")) {
        if (!v.is_number_unsigned()) throw ConfigError("features.n_range: expected a list of integers");
        cfg.features.n_range.push_back(v.get<std::size_t>());
      }
    }
    std::string weighting = "binary";
    f.get("weighting", weighting);
    cfg.features.weighting = parse_feature_weighting(weighting);
  }
  cfg.features.validate();

  if (r.has("train")) {
    ConfigReader t(r.at("train"), "train");
    t.allow({"learning_rate", "epochs", "batch_size", "l2", "early_stop_patience"});
    t.get("learning_rate", cfg.train.learning_rate);
    t.get("epochs", cfg.train.epochs);
    t.get("batch_size", cfg.train.batch_size);
    t.get("l2", cfg.train.l2);
    t.get("early_stop_patience", cfg.train.early_stop_patience);
  }
  cfg.train.validate();

  if (r.has("biaseval")) {
    ConfigReader b(r.at("biaseval"), "biaseval");
    b.allow({"major_threshold", "minor_threshold", "sample_size", "t_test", "predictions_before", "predictions_after"});
    b.get("major_threshold", cfg.biaseval.thresholds.major);
    b.get("minor_threshold", cfg.biaseval.thresholds.minor);
    b.get("sample_size", cfg.biaseval.sample_size);
    std::string kind = "welch";
    b.get("t_test", kind);
    if (kind == "welch") {
      cfg.biaseval.t_test = TTestKind::welch;
    } else if (kind == "pooled") {
      cfg.biaseval.t_test = TTestKind::pooled;
    } else {
      throw ConfigError("biaseval.t_test: expected welch or pooled");
    }
    if (b.has("predictions_before")) cfg.biaseval.predictions_before = b.path("predictions_before", base_dir);
    if (b.has("predictions_after")) cfg.biaseval.predictions_after = b.path("predictions_after", base_dir);
  }
  const auto& th = cfg.biaseval.thresholds;
  if (!(th.major > 0.0 && th.major < 1.0)) throw ConfigError("biaseval.major_threshold: must be in (0, 1)");
  if (!(th.minor > 0.0 && th.minor < 1.0)) throw ConfigError("biaseval.minor_threshold: must be in (0, 1)");
  if (cfg.biaseval.sample_size < 2) throw ConfigError("biaseval.sample_size: must be >= 2");

  if (r.has("learning_curve")) {
    ConfigReader l(r.at("learning_curve"), "learning_curve");
    l.allow({"portions", "repeats"});
    if (l.has("portions")) {
      cfg.learning_curve.portions.clear();
      if (!l.at("portions").is_array()) throw ConfigError("learning_curve.portions: expected a list of numbers");
      for (const auto& v : l.at("portions")) {
        if (!v.is_number()) throw ConfigError("learning_curve.portions: expected a list of numbers");
        cfg.learning_curve.portions.push_back(v.get<double>());
      }
    }
    l.get("repeats", cfg.learning_curve.repeats);
  }
  const auto& portions = cfg.learning_curve.portions;
  for (std::size_t i = 0; i < portions.size(); ++i) {
    if (!(portions[i] > 0.0 && portions[i] <= 1.0)) throw ConfigError("learning_curve.portions: must be in (0, 1]");
    if (i && portions[i] < portions[i - 1]) throw ConfigError("learning_curve.portions: must be ascending");
  }
  if (cfg.learning_curve.repeats < 1) throw ConfigError("learning_curve.repeats: must be >= 1");

  auto must_exist = [](const std::filesystem::path& p, const std::string& field) {
    if (!std::filesystem::exists(p)) throw ConfigError(field + ": path does not exist: " + p.string());
  };
  must_exist(cfg.corpus.path, "data.corpus.path");
  if (cfg.groups) must_exist(cfg.groups->path, "data.groups.path");
  if (cfg.preprocess.wordlist_path) must_exist(*cfg.preprocess.wordlist_path, "preprocess.wordlist");
  if (cfg.biaseval.predictions_before) must_exist(*cfg.biaseval.predictions_before, "biaseval.predictions_before");
  if (cfg.biaseval.predictions_after) must_exist(*cfg.biaseval.predictions_after, "biaseval.predictions_after");
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config: file does not exist: " + path.string());
  const std::string text = read_file(path);
  const auto root = nlohmann::json::parse(text, nullptr, false, true);
  if (root.is_discarded()) throw ConfigError("config: " + path.string() + " is not valid JSON");
  auto base = std::filesystem::absolute(path).parent_path();
  return parse_config(root, base);
}

}  // namespace debias
