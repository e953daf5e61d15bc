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
/// Labeled corpora: label schema, documents, file ingestion and
/// reproducible stratified splitting.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "debias/error.hpp"
#include "debias/io.hpp"
#include "debias/rng.hpp"

namespace debias {

/// Ordered, unique class names. A class index is its position here.
class LabelSchema {
 public:
  LabelSchema() = default;

  explicit LabelSchema(std::vector<std::string> classes) : classes_(std::move(classes)) {
    if (classes_.size() < 2) throw ConfigError("schema: at least two classes required");
    std::unordered_set<std::string> seen;
    for (const auto& name : classes_) {
      if (name.empty()) throw ConfigError("schema: empty class name");
      if (!seen.insert(name).second) throw ConfigError("schema: duplicate class '" + name + "'");
    }
  }

  std::size_t size() const noexcept { return classes_.size(); }
  const std::string& name(std::size_t index) const { return classes_.at(index); }
  const std::vector<std::string>& classes() const noexcept { return classes_; }

  std::optional<std::size_t> index_of(std::string_view name) const {
    const auto it = std::find(classes_.begin(), classes_.end(), name);
    if (it == classes_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - classes_.begin());
  }

  friend bool operator==(const LabelSchema&, const LabelSchema&) = default;

 private:
  std::vector<std::string> classes_;
};

/// Demographic dialect posteriors attached to a tweet.
struct DialectPosteriors {
  double white = 0.0;
  double black = 0.0;
  double hispanic = 0.0;
  double asian = 0.0;

  void validate() const {
    for (double p : {white, black, hispanic, asian}) {
      if (!(p >= 0.0 && p <= 1.0)) throw DataError("posteriors: value outside [0,1]");
    }
    if (white + black + hispanic + asian > 1.0 + 1e-6) {
      throw DataError("posteriors: sum exceeds 1");
    }
  }
};

struct Document {
  std::string id;
  std::string raw_text;
  std::string text;  // normalized; empty until preprocessing
  std::optional<std::size_t> label;
  double weight = 0.0;  // re-weighting alpha; training importance is 1 + weight
  std::optional<std::string> group;
  std::optional<DialectPosteriors> posteriors;
};

/// Immutable document collection under one schema.
class LabeledCorpus {
 public:
  LabeledCorpus() = default;

  LabeledCorpus(LabelSchema schema, std::vector<Document> documents)
      : schema_(std::move(schema)), documents_(std::move(documents)) {
    std::unordered_set<std::string_view> ids;
    ids.reserve(documents_.size());
    for (const auto& doc : documents_) {
      if (!ids.insert(doc.id).second) throw DataError("corpus: duplicate document id '" + doc.id + "'");
      if (doc.label && *doc.label >= schema_.size()) {
        throw DataError("corpus: label out of schema range for document '" + doc.id + "'");
      }
      if (!(doc.weight >= 0.0)) throw DataError("corpus: negative weight on document '" + doc.id + "'");
    }
  }

  const LabelSchema& schema() const noexcept { return schema_; }
  std::span<const Document> documents() const noexcept { return documents_; }
  const Document& operator[](std::size_t i) const { return documents_[i]; }
  std::size_t size() const noexcept { return documents_.size(); }
  bool empty() const noexcept { return documents_.empty(); }

  std::size_t labeled_count() const {
    return static_cast<std::size_t>(
        std::count_if(documents_.begin(), documents_.end(), [](const Document& d) { return d.label.has_value(); }));
  }

  /// Documents at `indices`, in the given order.
  LabeledCorpus subset(std::span<const std::size_t> indices) const {
    std::vector<Document> docs;
    docs.reserve(indices.size());
    for (std::size_t i : indices) docs.push_back(documents_.at(i));
    return LabeledCorpus(schema_, std::move(docs));
  }

  /// Concatenation of two corpora under the same schema.
  static LabeledCorpus concat(const LabeledCorpus& a, const LabeledCorpus& b) {
    if (!(a.schema() == b.schema())) throw DataError("corpus: schema mismatch in concatenation");
    std::vector<Document> docs(a.documents_.begin(), a.documents_.end());
    docs.insert(docs.end(), b.documents_.begin(), b.documents_.end());
    return LabeledCorpus(a.schema_, std::move(docs));
  }

 private:
  LabelSchema schema_;
  std::vector<Document> documents_;
};

// ---------------------------------------------------------------------------
// Ingestion

enum class RecordStyle { delimited, json_lines };

/// Describes how to read a corpus file. Columns are names when the file has a
/// header row, otherwise zero-based indices written as decimal strings.
struct FormatDescriptor {
  RecordStyle style = RecordStyle::delimited;
  char delimiter = ',';
  char quote = '"';
  bool header = true;
  std::string text_column = "text";
  std::optional<std::string> label_column;
  std::optional<std::string> id_column;
  std::optional<std::string> group_column;
  // Raw label value -> class name, e.g. {"0": "hate"}. Values absent from
  // the map are looked up in the schema directly.
  std::map<std::string, std::string> label_map;
  std::size_t max_malformed = 0;
};

struct IngestResult {
  LabeledCorpus corpus;
  std::size_t skipped_missing_text = 0;
  std::size_t malformed = 0;
};

namespace detail {

struct DelimitedRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line where the record starts
  bool unterminated = false;
};

// RFC 4180 style: quoted fields may contain delimiters, doubled quotes and
// line breaks.
inline std::vector<DelimitedRecord> parse_delimited(std::string_view data, char delim, char quote) {
  std::vector<DelimitedRecord> records;
  DelimitedRecord rec;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  rec.line = 1;

  auto end_field = [&] {
    rec.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = rec.fields.size() == 1 && rec.fields[0].empty();
    if (!blank) records.push_back(std::move(rec));
    rec = DelimitedRecord{};
    rec.line = line;
  };

  for (std::size_t i = 0; i < data.size(); ++i) {
    const char ch = data[i];
    if (in_quotes) {
      if (ch == quote) {
        if (i + 1 < data.size() && data[i + 1] == quote) {
          field.push_back(quote);
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == quote && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (ch == delim) {
      end_field();
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && i + 1 < data.size() && data[i + 1] == '\n') ++i;
      ++line;
      end_record();
    } else {
      field.push_back(ch);
      field_started = true;
    }
  }
  if (in_quotes) rec.unterminated = true;
  if (in_quotes || !field.empty() || !rec.fields.empty()) {
    rec.fields.push_back(std::move(field));
    const bool blank = rec.fields.size() == 1 && rec.fields[0].empty() && !rec.unterminated;
    if (!blank) records.push_back(std::move(rec));
  }
  return records;
}

inline std::optional<std::size_t> resolve_label(const std::string& raw, const LabelSchema& schema,
                                                const std::map<std::string, std::string>& label_map,
                                                std::size_t record) {
  if (raw.empty()) return std::nullopt;
  const auto mapped = label_map.find(raw);
  const std::string& name = mapped == label_map.end() ? raw : mapped->second;
  const auto index = schema.index_of(name);
  if (!index) {
    throw DataError("unknown label '" + raw + "' at record " + std::to_string(record));
  }
  return index;
}

inline std::size_t resolve_column(const std::string& spec, const std::vector<std::string>& header,
                                  bool has_header, const char* role) {
  if (has_header) {
    const auto it = std::find(header.begin(), header.end(), spec);
    if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
  }
  const bool numeric = !spec.empty() && std::all_of(spec.begin(), spec.end(), [](char c) { return c >= '0' && c <= '9'; });
  if (!numeric) throw ConfigError(std::string("format: ") + role + " column '" + spec + "' not found");
  return static_cast<std::size_t>(std::stoul(spec));
}

inline std::optional<DialectPosteriors> parse_posteriors(const nlohmann::json& value) {
  if (value.is_null()) return std::nullopt;
  DialectPosteriors post;
  if (value.is_array()) {
    if (value.size() != 4) throw DataError("posteriors: expected 4 values (white, black, hispanic, asian)");
    post = {value[0].get<double>(), value[1].get<double>(), value[2].get<double>(), value[3].get<double>()};
  } else if (value.is_object()) {
    post = {value.at("white").get<double>(), value.at("black").get<double>(),
            value.at("hispanic").get<double>(), value.at("asian").get<double>()};
  } else {
    throw DataError("posteriors: expected array or object");
  }
  post.validate();
  return post;
}

inline std::string json_scalar_to_string(const nlohmann::json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  if (value.is_null()) return {};
  return value.dump();
}

}  // namespace detail

/// Reads a corpus file. Rows with missing text are skipped; malformed rows are
/// tolerated up to `format.max_malformed`.
inline IngestResult ingest(const std::filesystem::path& path, const FormatDescriptor& format,
                           const LabelSchema& schema) {
  if (!std::filesystem::exists(path)) throw DataError("input file does not exist: " + path.string());
  const std::string data = read_file(path);

  IngestResult result;
  std::vector<Document> docs;
  auto malformed = [&](std::size_t record, const std::string& why) {
    if (++result.malformed > format.max_malformed) {
      throw DataError("malformed record " + std::to_string(record) + " in " + path.string() + ": " + why);
    }
  };

  if (format.style == RecordStyle::delimited) {
    auto records = detail::parse_delimited(data, format.delimiter, format.quote);
    std::vector<std::string> header;
    std::size_t first = 0;
    if (format.header) {
      if (records.empty()) throw DataError("no records in " + path.string());
      header = records.front().fields;
      first = 1;
    }
    if (records.size() <= first) throw DataError("no records in " + path.string());
    const std::size_t text_col = detail::resolve_column(format.text_column, header, format.header, "text");
    std::optional<std::size_t> label_col, id_col, group_col;
    if (format.label_column) label_col = detail::resolve_column(*format.label_column, header, format.header, "label");
    if (format.id_column) id_col = detail::resolve_column(*format.id_column, header, format.header, "id");
    if (format.group_column) group_col = detail::resolve_column(*format.group_column, header, format.header, "group");
    const std::size_t expected = format.header ? header.size() : 0;

    for (std::size_t r = first; r < records.size(); ++r) {
      const auto& rec = records[r];
      const std::size_t record_no = r - first + 1;
      if (rec.unterminated) {
        malformed(record_no, "unterminated quote starting at line " + std::to_string(rec.line));
        continue;
      }
      if ((expected && rec.fields.size() != expected) || text_col >= rec.fields.size() ||
          (label_col && *label_col >= rec.fields.size()) || (id_col && *id_col >= rec.fields.size()) ||
          (group_col && *group_col >= rec.fields.size())) {
        malformed(record_no, "unexpected field count " + std::to_string(rec.fields.size()));
        continue;
      }
      Document doc;
      doc.raw_text = rec.fields[text_col];
      if (doc.raw_text.empty()) {
        ++result.skipped_missing_text;
        continue;
      }
      doc.id = id_col ? rec.fields[*id_col] : std::to_string(record_no);
      if (label_col) doc.label = detail::resolve_label(rec.fields[*label_col], schema, format.label_map, record_no);
      if (group_col && !rec.fields[*group_col].empty()) doc.group = rec.fields[*group_col];
      docs.push_back(std::move(doc));
    }
  } else {
    std::size_t record_no = 0;
    std::size_t pos = 0;
    bool any = false;
    while (pos <= data.size()) {
      std::size_t eol = data.find('\n', pos);
      if (eol == std::string::npos) eol = data.size();
      std::string_view line(data.data() + pos, eol - pos);
      pos = eol + 1;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.find_first_not_of(" \t") == std::string_view::npos) {
        if (eol == data.size()) break;
        continue;
      }
      any = true;
      ++record_no;
      nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
      if (rec.is_discarded() || !rec.is_object()) {
        malformed(record_no, "not a JSON object");
        continue;
      }
      Document doc;
      try {
        const auto text = rec.find("text");
        if (text == rec.end() || text->is_null() || (text->is_string() && text->get<std::string>().empty())) {
          ++result.skipped_missing_text;
          continue;
        }
        doc.raw_text = text->get<std::string>();
        const auto id = rec.find("id");
        doc.id = id != rec.end() && !id->is_null() ? detail::json_scalar_to_string(*id) : std::to_string(record_no);
        if (const auto label = rec.find("label"); label != rec.end()) {
          doc.label = detail::resolve_label(detail::json_scalar_to_string(*label), schema, format.label_map, record_no);
        }
        if (const auto group = rec.find("group"); group != rec.end() && group->is_string()) {
          doc.group = group->get<std::string>();
        }
        if (const auto post = rec.find("posteriors"); post != rec.end()) {
          doc.posteriors = detail::parse_posteriors(*post);
        }
      } catch (const nlohmann::json::exception& e) {
        malformed(record_no, e.what());
        continue;
      }
      docs.push_back(std::move(doc));
    }
    if (!any) throw DataError("no records in " + path.string());
  }
  result.corpus = LabeledCorpus(schema, std::move(docs));
  return result;
}

/// Writes one JSON record per line: {id, text, raw_text, label?, weight?,
/// group?, posteriors?}. Readable back through RecordStyle::json_lines.
inline void write_corpus_jsonl(std::ostream& out, const LabeledCorpus& corpus) {
  for (const auto& doc : corpus.documents()) {
    nlohmann::ordered_json rec;
    rec["id"] = doc.id;
    rec["text"] = doc.text.empty() ? doc.raw_text : doc.text;
    rec["raw_text"] = doc.raw_text;
    if (doc.label) rec["label"] = corpus.schema().name(*doc.label);
    if (doc.weight != 0.0) rec["weight"] = doc.weight;
    if (doc.group) rec["group"] = *doc.group;
    if (doc.posteriors) {
      rec["posteriors"] = {doc.posteriors->white, doc.posteriors->black, doc.posteriors->hispanic,
                           doc.posteriors->asian};
    }
    out << rec.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
}

/// Reads the output of write_corpus_jsonl: `text` is taken as already
/// normalized and labels are class names.
inline LabeledCorpus read_corpus_jsonl(const std::filesystem::path& path, const LabelSchema& schema) {
  if (!std::filesystem::exists(path)) throw DataError("input file does not exist: " + path.string());
  std::ifstream in(path);
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto rec = nlohmann::json::parse(line, nullptr, false);
    auto bad = [&](const std::string& why) {
      return DataError(path.string() + ":" + std::to_string(line_no) + ": " + why);
    };
    if (rec.is_discarded() || !rec.is_object()) throw bad("not a JSON object");
    try {
      Document doc;
      doc.id = rec.at("id").get<std::string>();
      doc.text = rec.at("text").get<std::string>();
      doc.raw_text = rec.value("raw_text", doc.text);
      if (rec.contains("label")) {
        const auto name = rec.at("label").get<std::string>();
        doc.label = schema.index_of(name);
        if (!doc.label) throw bad("unknown label '" + name + "'");
      }
      doc.weight = rec.value("weight", 0.0);
      if (rec.contains("group")) doc.group = rec.at("group").get<std::string>();
      if (rec.contains("posteriors")) doc.posteriors = detail::parse_posteriors(rec.at("posteriors"));
      docs.push_back(std::move(doc));
    } catch (const nlohmann::json::exception& e) {
      throw bad(e.what());
    }
  }
  return LabeledCorpus(schema, std::move(docs));
}

// ---------------------------------------------------------------------------
// Class distribution and splitting

/// Fraction of labeled documents per class, in schema order.
inline std::vector<std::pair<std::string, double>> class_distribution(const LabeledCorpus& corpus) {
  std::vector<std::size_t> counts(corpus.schema().size(), 0);
  std::size_t labeled = 0;
  for (const auto& doc : corpus.documents()) {
    if (!doc.label) continue;
    ++counts[*doc.label];
    ++labeled;
  }
  if (labeled == 0) throw DataError("class_distribution: no labeled documents");
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    out.emplace_back(corpus.schema().name(c), static_cast<double>(counts[c]) / static_cast<double>(labeled));
  }
  return out;
}

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct CorpusSplit {
  LabeledCorpus train;
  LabeledCorpus val;
  LabeledCorpus test;
};

namespace detail {

inline std::size_t floor_share(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

inline std::vector<std::vector<std::size_t>> indices_by_class(const LabeledCorpus& corpus) {
  std::vector<std::vector<std::size_t>> by_class(corpus.schema().size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].label) by_class[*corpus[i].label].push_back(i);
  }
  return by_class;
}

}  // namespace detail

/// Per-class partition. Validation and test sizes are floor(fraction * n);
/// the remainder goes to train. Each class is shuffled with its own seeded
/// stream; every output keeps the input document order. Unlabeled documents
/// are not assigned to any split.
inline CorpusSplit stratified_split(const LabeledCorpus& corpus, SplitFractions fractions, std::uint64_t seed) {
  if (!(fractions.train > 0 && fractions.val > 0 && fractions.test > 0)) {
    throw ConfigError("split: fractions must be positive");
  }
  if (std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9) {
    throw ConfigError("split: fractions must sum to 1");
  }
  std::vector<std::size_t> train, val, test;
  auto by_class = detail::indices_by_class(corpus);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    if (members.size() < 3) {
      throw DataError("split: class '" + corpus.schema().name(c) + "' has " + std::to_string(members.size()) +
                      " documents, fewer than the 3 split parts");
    }
    Rng rng(derive_seed(seed, c));
    rng.shuffle(std::span<std::size_t>(members));
    const std::size_t n = members.size();
    const std::size_t n_val = detail::floor_share(fractions.val, n);
    const std::size_t n_test = detail::floor_share(fractions.test, n);
    const std::size_t n_train = n - n_val - n_test;
    train.insert(train.end(), members.begin(), members.begin() + n_train);
    val.insert(val.end(), members.begin() + n_train, members.begin() + n_train + n_val);
    test.insert(test.end(), members.begin() + n_train + n_val, members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  std::sort(test.begin(), test.end());
  return {corpus.subset(train), corpus.subset(val), corpus.subset(test)};
}

/// Per-class subsample of floor(portion * n_c) documents, seeded, order kept.
/// With `require_every_class`, a class that would become empty is an error.
inline LabeledCorpus stratified_subsample(const LabeledCorpus& corpus, double portion, std::uint64_t seed,
                                          bool require_every_class) {
  if (!(portion > 0.0 && portion <= 1.0)) throw ConfigError("subsample: portion must be in (0, 1]");
  std::vector<std::size_t> keep;
  auto by_class = detail::indices_by_class(corpus);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    const std::size_t take = detail::floor_share(portion, members.size());
    if (take == 0 && require_every_class) {
      throw DataError("subsample: portion " + format_real(portion) + " leaves class '" +
                      corpus.schema().name(c) + "' empty");
    }
    Rng rng(derive_seed(seed, c));
    rng.shuffle(std::span<std::size_t>(members));
    keep.insert(keep.end(), members.begin(), members.begin() + take);
  }
  std::sort(keep.begin(), keep.end());
  return corpus.subset(keep);
}

}  // namespace debias
