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

#ifndef KPR_ANCHOR_LINKER_H_
#define KPR_ANCHOR_LINKER_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kpr/entity_knowledge.h"
#include "kpr/tokenizer.h"

namespace kpr {

struct Anchor {
  size_t start = 0;  // character offsets into the document text, end-exclusive
  size_t end = 0;
  EntityId entity = 0;
};

struct Document {
  std::string id;
  std::string title;
  std::string text;
  std::vector<Anchor> anchors;
};

struct HyperlinkCorpus {
  std::vector<Document> documents;

  // JSON lines: {"id", "title", "text", "anchors": [{"start", "end", "entity"}]}.
  static HyperlinkCorpus Parse(const std::string &jsonl);
  static HyperlinkCorpus Load(const std::string &path);
  std::string to_jsonl() const;
};

struct Candidate {
  EntityId entity = 0;
  double commonness = 0.0;
};

struct NameEntry {
  std::string name;  // lowercased word pieces joined by single spaces
  double link_probability = 0.0;
  std::vector<Candidate> candidates;  // descending commonness, then ascending id
  size_t anchor_count = 0;            // 0 when loaded from TSV
  size_t occurrence_count = 0;
};

inline constexpr double kLinkProbabilityThreshold = 0.05;
inline constexpr double kCommonnessThreshold = 0.30;
inline constexpr size_t kMaxNgram = 8;

struct Mention {
  size_t token_start = 0;  // [start, end) in the TokenSequence
  size_t token_end = 0;
  size_t char_start = 0;
  size_t char_end = 0;
  std::string surface;
  std::vector<EntityId> candidates;
};

// Name -> candidate entities, with a token trie for n-gram matching.
// Immutable once built.
class AnchorDictionary {
 public:
  AnchorDictionary() = default;
  // Entries are sorted by name; names must be unique.
  explicit AnchorDictionary(std::vector<NameEntry> entries);

  const std::vector<NameEntry> &entries() const { return entries_; }
  const NameEntry *find(const std::string &name) const;
  size_t size() const { return entries_.size(); }

  // Every n-gram of 1..max_ngram non-special tokens that equals a dictionary
  // name, ordered by (start, end). Overlapping and nested matches are kept.
  std::vector<Mention> link(const TokenSequence &tokens, size_t max_ngram = kMaxNgram) const;

  // name, link_probability, entity_id, commonness; sorted by name then
  // descending commonness.
  std::string to_tsv() const;
  static AnchorDictionary ParseTsv(const std::string &tsv);
  static AnchorDictionary LoadTsv(const std::string &path);

  // "KPRT" binary: entries only; the trie is rebuilt when loading.
  std::string to_binary() const;
  static AnchorDictionary ParseBinary(const std::string &bytes);

 private:
  struct TrieNode {
    std::map<std::string, uint32_t, std::less<>> children;
    int32_t entry = -1;
  };

  void build_trie();

  std::vector<NameEntry> entries_;
  std::vector<TrieNode> trie_;
};

// Link probability = anchors / case-insensitive token n-gram occurrences of
// the name; names below lp_threshold are removed first, then candidates below
// commonness_threshold; names left with no candidate are removed.
AnchorDictionary build_dictionary(const HyperlinkCorpus &corpus,
                                  double lp_threshold = kLinkProbabilityThreshold,
                                  double commonness_threshold = kCommonnessThreshold);

std::vector<Mention> link(const TokenSequence &tokens, const AnchorDictionary &dict,
                          size_t max_ngram = kMaxNgram);

// Number of anchors targeting each entity.
std::map<EntityId, size_t> entity_frequency(const HyperlinkCorpus &corpus);

// Shortest decimal string that round-trips the double.
std::string format_double(double value);

}  // namespace kpr

#endif  // KPR_ANCHOR_LINKER_H_
