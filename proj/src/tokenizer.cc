// Copyright 2026 The kpr Authors.
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

#include "kpr/tokenizer.h"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>

#include "kpr/error.h"

namespace kpr {

namespace {

constexpr std::array<std::string_view, 5> kSpecials = {
    kPadToken, kUnkToken, kClsToken, kSepToken, kMaskToken};

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         c >= 0x80;
}

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

// Special marker starting at text[pos], if any.
std::optional<std::string_view> special_at(std::string_view text, size_t pos) {
  if (text[pos] != '[') return std::nullopt;
  for (std::string_view s : kSpecials) {
    if (text.substr(pos, s.size()) == s) return s;
  }
  return std::nullopt;
}

}  // namespace

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<int32_t>(i));
    if (!inserted) throw InputError("duplicate vocab token '" + tokens_[i] + "'");
  }
  auto require = [&](std::string_view s) {
    auto it = index_.find(std::string(s));
    if (it == index_.end()) throw InputError("vocab lacks " + std::string(s));
    return it->second;
  };
  pad_ = require(kPadToken);
  unk_ = require(kUnkToken);
  cls_ = require(kClsToken);
  sep_ = require(kSepToken);
  mask_ = require(kMaskToken);
}

Vocab Vocab::Build(const std::vector<std::string> &texts, size_t min_count) {
  std::map<std::string, size_t> counts;
  for (const auto &text : texts) {
    for (auto &w : split_words(text)) ++counts[w.piece];
  }
  std::vector<std::string> tokens(kSpecials.begin(), kSpecials.end());
  for (auto &[piece, count] : counts) {
    if (count >= min_count) tokens.push_back(piece);
  }
  return Vocab(std::move(tokens));
}

Vocab Vocab::Load(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open vocab file " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocab(std::move(tokens));
}

void Vocab::Save(const std::string &path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write vocab file " + path);
  for (const auto &t : tokens_) out << t << '\n';
}

int32_t Vocab::id(std::string_view piece) const {
  auto found = find(piece);
  return found ? *found : unk_;
}

std::optional<int32_t> Vocab::find(std::string_view piece) const {
  auto it = index_.find(std::string(piece));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<int32_t> TokenSequence::ids() const {
  std::vector<int32_t> out;
  out.reserve(tokens.size());
  for (const auto &t : tokens) out.push_back(t.id);
  return out;
}

std::vector<WordPiece> split_words(std::string_view text) {
  std::vector<WordPiece> out;
  size_t i = 0;
  while (i < text.size()) {
    if (!is_word_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    size_t j = i;
    std::string piece;
    while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) {
      piece.push_back(ascii_lower(text[j]));
      ++j;
    }
    out.push_back({std::move(piece), i, j});
    i = j;
  }
  return out;
}

TokenSequence tokenize(std::string_view text, const Vocab &vocab, size_t max_tokens) {
  if (max_tokens < 2) throw ParameterError("max_tokens must be at least 2");
  if (std::all_of(text.begin(), text.end(),
                  [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; })) {
    throw InputError("cannot tokenize blank text");
  }

  TokenSequence seq;
  seq.text = std::string(text);
  seq.tokens.push_back({vocab.cls_id(), std::string(kClsToken), 0, 0, true});

  const size_t content_limit = max_tokens - 2;
  size_t content = 0;
  size_t i = 0;
  while (i < text.size() && content < content_limit) {
    if (auto special = special_at(text, i)) {
      seq.tokens.push_back({vocab.id(*special), std::string(*special), i,
                            i + special->size(), true});
      i += special->size();
      ++content;
      continue;
    }
    if (!is_word_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    size_t j = i;
    std::string piece;
    while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) {
      piece.push_back(ascii_lower(text[j]));
      ++j;
    }
    const int32_t id = vocab.id(piece);
    seq.tokens.push_back({id, std::move(piece), i, j, false});
    ++content;
    i = j;
  }
  seq.tokens.push_back({vocab.sep_id(), std::string(kSepToken), text.size(), text.size(), true});
  return seq;
}

std::string format_passage(std::string_view title, std::string_view text) {
  std::string out(title);
  out += ' ';
  out += kSepToken;
  out += ' ';
  out += text;
  return out;
}

std::string format_query(std::string_view question,
                         const std::optional<std::string> &instruction) {
  if (std::all_of(question.begin(), question.end(),
                  [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; })) {
    throw InputError("empty query");
  }
  if (!instruction) return std::string(question);
  return *instruction + " " + std::string(question);
}

std::pair<TokenSequence, size_t> mask_span(const TokenSequence &tokens,
                                           std::pair<size_t, size_t> char_span,
                                           const Vocab &vocab) {
  const auto [start, end] = char_span;
  if (end <= start) throw AlignmentError("empty span");
  // Tokens 0 and size()-1 are the wrapping [CLS]/[SEP].
  size_t first = tokens.size(), last = tokens.size();
  for (size_t i = 1; i + 1 < tokens.size(); ++i) {
    if (tokens.tokens[i].start == start && first == tokens.size()) first = i;
    if (tokens.tokens[i].end == end) last = i;
  }
  if (first == tokens.size() || last == tokens.size() || last < first) {
    throw AlignmentError("span [" + std::to_string(start) + ", " + std::to_string(end) +
                         ") is not aligned to token boundaries");
  }
  for (size_t i = first; i <= last; ++i) {
    if (tokens.tokens[i].special) {
      throw AlignmentError("span covers special token " + tokens.tokens[i].piece);
    }
  }

  TokenSequence out;
  out.text = tokens.text;
  out.tokens.assign(tokens.tokens.begin(), tokens.tokens.begin() + first);
  out.tokens.push_back({vocab.mask_id(), std::string(kMaskToken), start, end, true});
  out.tokens.insert(out.tokens.end(), tokens.tokens.begin() + last + 1, tokens.tokens.end());
  return {std::move(out), first};
}

}  // namespace kpr
