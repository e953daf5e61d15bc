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

#include <compare>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace debias {

// Whitespace split; runs of spaces and tabs never yield empty tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' ||
                               text[i] == '\r' || text[i] == '\f' || text[i] == '\v')) {
      ++i;
    }
    const std::size_t start = i;
    while (i < text.size() && !(text[i] == ' ' || text[i] == '\t' || text[i] == '\n' ||
                                text[i] == '\r' || text[i] == '\f' || text[i] == '\v')) {
      ++i;
    }
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

// A contiguous token sequence. Stored as the tokens joined by single spaces,
// which orders identically to the token sequence because tokens never
// contain a space and space sorts before every other printable character.
class Ngram {
 public:
  Ngram() = default;

  explicit Ngram(std::span<const std::string> tokens) : n_(tokens.size()) {
    if (tokens.empty()) throw std::invalid_argument("ngram: needs at least one token");
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i].empty()) throw std::invalid_argument("ngram: empty token");
      if (i > 0) text_.push_back(' ');
      text_ += tokens[i];
    }
  }

  Ngram(std::initializer_list<std::string> tokens)
      : Ngram(std::span<const std::string>(tokens.begin(), tokens.size())) {}

  // Parses a space-joined n-gram, e.g. a vocabulary line from a model file.
  static Ngram from_text(std::string_view joined) {
    const auto tokens = tokenize(joined);
    return Ngram(std::span<const std::string>(tokens));
  }

  const std::string& text() const noexcept { return text_; }
  std::size_t n() const noexcept { return n_; }
  std::vector<std::string> tokens() const { return tokenize(text_); }

  friend bool operator==(const Ngram&, const Ngram&) = default;
  friend std::strong_ordering operator<=>(const Ngram& a, const Ngram& b) {
    if (auto cmp = a.text_ <=> b.text_; cmp != 0) return cmp;
    return a.n_ <=> b.n_;
  }

 private:
  std::string text_;
  std::size_t n_ = 0;
};

// The len-n+1 contiguous n-grams of `tokens`, in order.
inline std::vector<Ngram> extract_ngrams(std::span<const std::string> tokens, std::size_t n) {
  if (n < 1) throw std::invalid_argument("extract_ngrams: n must be >= 1");
  std::vector<Ngram> out;
  if (tokens.size() < n) return out;
  out.reserve(tokens.size() - n + 1);
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    out.emplace_back(tokens.subspan(i, n));
  }
  return out;
}

}  // namespace debias

template <>
struct std::hash<debias::Ngram> {
  std::size_t operator()(const debias::Ngram& g) const noexcept {
    return std::hash<std::string>{}(g.text());
  }
};
