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
/// Tweet normalization. Rules run in a fixed order:
///   1. lowercase
///   2. drop tokens starting with '@'
///   3. drop URLs (http://, https://, www. up to the next space)
///   4. drop whole-token ASCII emoticons (kEmoticons)
///   5. collapse runs of three or more identical letters to one letter
///   6. hashtags: '#' removed; optionally the body is segmented with a wordlist
///   7. HTML entities, punctuation, symbols and non-ASCII bytes become spaces
///   8. whitespace collapsed and trimmed
/// Stop words are kept.

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "debias/corpus.hpp"
#include "debias/error.hpp"
#include "debias/io.hpp"
#include "debias/ngram.hpp"

namespace debias {

enum class HashtagMode { strip_sign, segment_with_wordlist };

struct PreprocessConfig {
  bool lowercase = true;
  bool strip_mentions = true;
  bool strip_urls = true;
  bool strip_emoticons = true;
  bool collapse_elongation = true;
  HashtagMode hashtag_mode = HashtagMode::strip_sign;
  bool strip_punctuation = true;
  int min_tokens = 2;
  std::optional<std::filesystem::path> wordlist_path;

  void validate() const {
    if (min_tokens < 0) throw ConfigError("preprocess.min_tokens: must be >= 0");
    if (hashtag_mode == HashtagMode::segment_with_wordlist && !wordlist_path) {
      throw ConfigError("preprocess.wordlist: required when hashtag_mode is segment");
    }
  }
};

// Every entry contains a non-alphanumeric character, so normalized output
// can never contain one and removal stays idempotent.
inline constexpr std::array<std::string_view, 36> kEmoticons = {
    ":)", ":-)", ":(", ":-(", ":d", ":-d", ";)", ";-)", ":p", ":-p", ";p", ";d",
    ":o", ":-o", ":/", ":-/", ":'(", ":|", ":-|", "<3", "</3", "=)", "=(", "=d",
    "^_^", "^^", "-_-", "o_o", "x_x", ":*", ":-*", ">:(", "8)", ":]", ":[", "(:"};

/// Lowercase words used to split hashtag bodies.
class Wordlist {
 public:
  Wordlist() = default;

  explicit Wordlist(const std::vector<std::string>& words) {
    for (const auto& w : words) add(w);
  }

  static Wordlist load(const std::filesystem::path& path) {
    Wordlist list;
    const std::string data = read_file(path);
    for (const auto& word : tokenize(data)) list.add(word);
    return list;
  }

  bool contains(std::string_view word) const { return words_.count(std::string(word)) > 0; }
  bool empty() const noexcept { return words_.empty(); }

  /// Greedy longest-match segmentation; nullopt if some position has no match.
  std::optional<std::vector<std::string>> segment(std::string_view body) const {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos < body.size()) {
      const std::size_t max_len = std::min(longest_, body.size() - pos);
      std::size_t len = max_len;
      for (; len > 0; --len) {
        if (contains(body.substr(pos, len))) break;
      }
      if (len == 0) return std::nullopt;
      parts.emplace_back(body.substr(pos, len));
      pos += len;
    }
    return parts;
  }

 private:
  void add(const std::string& word) {
    if (word.empty()) return;
    std::string lower = word;
    for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    longest_ = std::max(longest_, lower.size());
    words_.insert(std::move(lower));
  }

  std::unordered_set<std::string> words_;
  std::size_t longest_ = 0;
};

namespace detail {

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
inline bool is_ascii_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
inline bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_word_char(char c) { return is_ascii_letter(c) || is_ascii_digit(c) || c == '_'; }

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

inline std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

inline std::string strip_url(const std::string& token) {
  const std::string lower = ascii_lower(token);
  std::size_t cut = std::string::npos;
  for (std::string_view prefix : {"http://", "https://", "www."}) {
    cut = std::min(cut, lower.find(prefix));
  }
  return cut == std::string::npos ? token : token.substr(0, cut);
}

inline std::string collapse_elongation(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i + 1;
    while (j < s.size() && s[j] == s[i]) ++j;
    const std::size_t run = j - i;
    if (is_ascii_letter(s[i]) && run >= 3) {
      out.push_back(s[i]);
    } else {
      out.append(s.substr(i, run));
    }
    i = j;
  }
  return out;
}

inline std::string expand_hashtags(std::string_view s, HashtagMode mode, const Wordlist& words) {
  std::string out;
  out.reserve(s.size() + 8);
  std::size_t i = 0;
  while (i < s.size()) {
    // "&#39;" is a numeric entity, not a hashtag.
    if (s[i] != '#' || (i > 0 && s[i - 1] == '&')) {
      out.push_back(s[i++]);
      continue;
    }
    std::size_t j = i + 1;
    while (j < s.size() && is_word_char(s[j])) ++j;
    const std::string_view body = s.substr(i + 1, j - i - 1);
    out.push_back(' ');
    if (mode == HashtagMode::segment_with_wordlist && !body.empty()) {
      const auto parts = words.segment(ascii_lower(body));
      out += parts ? join(*parts) : std::string(body);
    } else {
      out.append(body);
    }
    out.push_back(' ');
    i = j;
  }
  return out;
}

// Drops &name; and &#123; entities, then maps everything outside
// [a-z0-9] (plus A-Z when case is kept) to a space.
inline std::string strip_symbols(std::string_view s, bool keep_upper) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '&') {
      std::size_t j = i + 1;
      if (j < s.size() && s[j] == '#') ++j;
      const std::size_t body = j;
      while (j < s.size() && j - body < 10 && (is_ascii_letter(s[j]) || is_ascii_digit(s[j]))) ++j;
      if (j > body && j < s.size() && s[j] == ';') {
        out.push_back(' ');
        i = j + 1;
        continue;
      }
    }
    const char c = s[i];
    const bool keep = (c >= 'a' && c <= 'z') || is_ascii_digit(c) || (keep_upper && c >= 'A' && c <= 'Z');
    out.push_back(keep ? c : ' ');
    ++i;
  }
  return out;
}

}  // namespace detail

/// Applies the configured rules to one raw text.
class Normalizer {
 public:
  Normalizer() = default;

  Normalizer(PreprocessConfig config, Wordlist words) : config_(std::move(config)), words_(std::move(words)) {
    if (config_.min_tokens < 0) throw ConfigError("preprocess.min_tokens: must be >= 0");
  }

  /// Validates the config and loads the wordlist it names, if any.
  static Normalizer from_config(const PreprocessConfig& config) {
    config.validate();
    Wordlist words;
    if (config.wordlist_path) words = Wordlist::load(*config.wordlist_path);
    return Normalizer(config, std::move(words));
  }

  const PreprocessConfig& config() const noexcept { return config_; }

  std::string operator()(std::string_view raw) const {
    std::string s = config_.lowercase ? detail::ascii_lower(raw) : std::string(raw);

    std::vector<std::string> kept;
    for (auto& token : tokenize(s)) {
      if (config_.strip_mentions && token.front() == '@') continue;
      if (config_.strip_urls) {
        token = detail::strip_url(token);
        if (token.empty()) continue;
      }
      if (config_.strip_emoticons) {
        const std::string folded = detail::ascii_lower(token);
        if (std::find(kEmoticons.begin(), kEmoticons.end(), folded) != kEmoticons.end()) continue;
      }
      kept.push_back(std::move(token));
    }
    s = detail::join(kept);

    if (config_.collapse_elongation) s = detail::collapse_elongation(s);
    s = detail::expand_hashtags(s, config_.hashtag_mode, words_);
    if (config_.strip_punctuation) s = detail::strip_symbols(s, !config_.lowercase);
    return detail::join(tokenize(s));
  }

 private:
  PreprocessConfig config_;
  Wordlist words_;
};

inline std::string normalize(std::string_view raw, const PreprocessConfig& config, const Wordlist& words = {}) {
  return Normalizer(config, words)(raw);
}

/// Copy of `corpus` with every document's normalized text filled in.
inline LabeledCorpus normalize_corpus(const LabeledCorpus& corpus, const Normalizer& normalizer) {
  std::vector<Document> docs(corpus.documents().begin(), corpus.documents().end());
  for (auto& doc : docs) doc.text = normalizer(doc.raw_text);
  return LabeledCorpus(corpus.schema(), std::move(docs));
}

struct FilterResult {
  LabeledCorpus corpus;
  std::size_t dropped = 0;
};

/// Drops documents whose normalized text has fewer than `min_tokens` tokens.
inline FilterResult filter_short(const LabeledCorpus& corpus, int min_tokens) {
  if (min_tokens < 0) throw ConfigError("preprocess.min_tokens: must be >= 0");
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (tokenize(corpus[i].text).size() >= static_cast<std::size_t>(min_tokens)) keep.push_back(i);
  }
  FilterResult result{corpus.subset(keep), corpus.size() - keep.size()};
  return result;
}

}  // namespace debias
