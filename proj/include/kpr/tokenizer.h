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

#ifndef KPR_TOKENIZER_H_
#define KPR_TOKENIZER_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace kpr {

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kMaskToken = "[MASK]";

// Instruction prepended to queries by retrievers trained in the bge style.
inline constexpr std::string_view kBgeQueryInstruction =
    "Represent this sentence for searching relevant passages:";

// Token vocabulary; line number in the vocab file is the id.
class Vocab {
 public:
  Vocab() = default;
  // Tokens must contain each of the five special tokens exactly once.
  explicit Vocab(std::vector<std::string> tokens);

  // Specials first, then every word piece seen at least `min_count` times in
  // `texts`, in lexicographic order.
  static Vocab Build(const std::vector<std::string> &texts, size_t min_count = 1);
  static Vocab Load(const std::string &path);
  void Save(const std::string &path) const;

  size_t size() const { return tokens_.size(); }
  const std::string &token(int32_t id) const { return tokens_.at(id); }
  const std::vector<std::string> &tokens() const { return tokens_; }
  // Id of `piece`, or unk_id() when absent.
  int32_t id(std::string_view piece) const;
  std::optional<int32_t> find(std::string_view piece) const;

  int32_t pad_id() const { return pad_; }
  int32_t unk_id() const { return unk_; }
  int32_t cls_id() const { return cls_; }
  int32_t sep_id() const { return sep_; }
  int32_t mask_id() const { return mask_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int32_t> index_;
  int32_t pad_ = -1, unk_ = -1, cls_ = -1, sep_ = -1, mask_ = -1;
};

struct Token {
  int32_t id = 0;
  std::string piece;  // lowercased surface form, or the special marker
  size_t start = 0;   // character span into the source text, end-exclusive
  size_t end = 0;
  bool special = false;
};

struct TokenSequence {
  std::string text;
  std::vector<Token> tokens;

  size_t size() const { return tokens.size(); }
  std::vector<int32_t> ids() const;
};

// Lowercases, splits on whitespace and punctuation (punctuation is dropped),
// recognizes literal special markers such as "[SEP]", wraps with [CLS]/[SEP]
// and truncates to max_tokens. Throws InputError on blank text.
TokenSequence tokenize(std::string_view text, const Vocab &vocab, size_t max_tokens);

// Lowercased word pieces of `text` with their character spans; no specials,
// no truncation. Shared by the tokenizer and the anchor dictionary builder.
struct WordPiece {
  std::string piece;
  size_t start;
  size_t end;
};
std::vector<WordPiece> split_words(std::string_view text);

// "title [SEP] text"; tokenizes to [CLS] title [SEP] text [SEP].
std::string format_passage(std::string_view title, std::string_view text);

// Prepends `instruction` (when present) to the question. Empty question
// throws InputError.
std::string format_query(std::string_view question,
                         const std::optional<std::string> &instruction = std::nullopt);

// Replaces the tokens covered by char span [start, end) with one [MASK] and
// returns the new sequence with the mask index. The span must begin and end
// on token boundaries and must not cover special tokens.
std::pair<TokenSequence, size_t> mask_span(const TokenSequence &tokens,
                                           std::pair<size_t, size_t> char_span,
                                           const Vocab &vocab);

}  // namespace kpr

#endif  // KPR_TOKENIZER_H_
