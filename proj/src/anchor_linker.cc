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

#include "kpr/anchor_linker.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <sstream>

#include "json.hpp"
#include "kpr/error.h"
#include "kpr/tensor_io.h"

namespace kpr {

namespace {

using nlohmann::json;

std::string join_pieces(const std::vector<WordPiece> &words, size_t begin, size_t end) {
  std::string out;
  for (size_t i = begin; i < end; ++i) {
    if (i > begin) out += ' ';
    out += words[i].piece;
  }
  return out;
}

std::vector<std::string> name_pieces(const std::string &name) {
  std::vector<std::string> out;
  for (auto &w : split_words(name)) out.push_back(std::move(w.piece));
  return out;
}

void sort_candidates(std::vector<Candidate> &candidates) {
  std::sort(candidates.begin(), candidates.end(), [](const Candidate &a, const Candidate &b) {
    if (a.commonness != b.commonness) return a.commonness > b.commonness;
    return a.entity < b.entity;
  });
}

template <typename T>
void put(std::string &out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, uint64_t, uint32_t>;
  U bits = std::bit_cast<U>(value);
  for (size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

template <typename T>
T get(const std::string &in, size_t &pos) {
  using U = std::conditional_t<sizeof(T) == 8, uint64_t, uint32_t>;
  if (pos + sizeof(U) > in.size()) throw InputError("truncated dictionary binary");
  U bits = 0;
  for (size_t i = 0; i < sizeof(U); ++i) {
    bits |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += sizeof(U);
  return std::bit_cast<T>(bits);
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

HyperlinkCorpus HyperlinkCorpus::Parse(const std::string &jsonl) {
  HyperlinkCorpus corpus;
  std::istringstream in(jsonl);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      Document doc;
      const auto &id = j.at("id");
      doc.id = id.is_string() ? id.get<std::string>() : id.dump();
      doc.title = j.value("title", "");
      doc.text = j.at("text").get<std::string>();
      for (const auto &a : j.value("anchors", json::array())) {
        doc.anchors.push_back({a.at("start").get<size_t>(), a.at("end").get<size_t>(),
                               a.at("entity").get<EntityId>()});
      }
      corpus.documents.push_back(std::move(doc));
    } catch (const json::exception &e) {
      throw CorpusError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

HyperlinkCorpus HyperlinkCorpus::Load(const std::string &path) { return Parse(read_file(path)); }

std::string HyperlinkCorpus::to_jsonl() const {
  std::string out;
  for (const auto &doc : documents) {
    json anchors = json::array();
    for (const auto &a : doc.anchors) {
      anchors.push_back({{"start", a.start}, {"end", a.end}, {"entity", a.entity}});
    }
    json j = {{"id", doc.id}, {"title", doc.title}, {"text", doc.text}, {"anchors", anchors}};
    out += j.dump() + "\n";
  }
  return out;
}

AnchorDictionary::AnchorDictionary(std::vector<NameEntry> entries) : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const NameEntry &a, const NameEntry &b) { return a.name < b.name; });
  for (size_t i = 1; i < entries_.size(); ++i) {
    if (entries_[i].name == entries_[i - 1].name) {
      throw InputError("duplicate dictionary name '" + entries_[i].name + "'");
    }
  }
  for (auto &e : entries_) {
    if (e.candidates.empty()) throw InputError("dictionary name '" + e.name + "' has no candidates");
    sort_candidates(e.candidates);
  }
  build_trie();
}

void AnchorDictionary::build_trie() {
  trie_.assign(1, TrieNode{});
  for (size_t e = 0; e < entries_.size(); ++e) {
    uint32_t node = 0;
    auto pieces = name_pieces(entries_[e].name);
    if (pieces.empty()) throw InputError("dictionary name without word pieces");
    for (auto &piece : pieces) {
      auto it = trie_[node].children.find(piece);
      if (it == trie_[node].children.end()) {
        const auto child = static_cast<uint32_t>(trie_.size());
        trie_[node].children.emplace(piece, child);
        trie_.emplace_back();
        node = child;
      } else {
        node = it->second;
      }
    }
    trie_[node].entry = static_cast<int32_t>(e);
  }
}

const NameEntry *AnchorDictionary::find(const std::string &name) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), name,
                             [](const NameEntry &e, const std::string &n) { return e.name < n; });
  if (it == entries_.end() || it->name != name) return nullptr;
  return &*it;
}

std::vector<Mention> AnchorDictionary::link(const TokenSequence &tokens, size_t max_ngram) const {
  std::vector<Mention> out;
  if (trie_.empty()) return out;
  const auto &toks = tokens.tokens;
  for (size_t start = 0; start < toks.size(); ++start) {
    uint32_t node = 0;
    for (size_t end = start; end < toks.size() && end - start < max_ngram; ++end) {
      if (toks[end].special) break;
      auto it = trie_[node].children.find(toks[end].piece);
      if (it == trie_[node].children.end()) break;
      node = it->second;
      if (trie_[node].entry < 0) continue;
      const NameEntry &entry = entries_[trie_[node].entry];
      Mention m;
      m.token_start = start;
      m.token_end = end + 1;
      m.char_start = toks[start].start;
      m.char_end = toks[end].end;
      m.surface = tokens.text.substr(m.char_start, m.char_end - m.char_start);
      for (const auto &c : entry.candidates) m.candidates.push_back(c.entity);
      out.push_back(std::move(m));
    }
  }
  return out;
}

std::string AnchorDictionary::to_tsv() const {
  std::string out;
  for (const auto &e : entries_) {
    for (const auto &c : e.candidates) {
      out += e.name + "\t" + format_double(e.link_probability) + "\t" + std::to_string(c.entity) +
             "\t" + format_double(c.commonness) + "\n";
    }
  }
  return out;
}

AnchorDictionary AnchorDictionary::ParseTsv(const std::string &tsv) {
  std::map<std::string, NameEntry> by_name;
  std::istringstream in(tsv);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::istringstream ls(line);
    std::string col;
    while (std::getline(ls, col, '\t')) cols.push_back(col);
    if (cols.size() != 4) {
      throw InputError("dictionary line " + std::to_string(line_no) + ": expected 4 columns");
    }
    NameEntry &e = by_name[cols[0]];
    e.name = cols[0];
    e.link_probability = std::stod(cols[1]);
    e.candidates.push_back({std::stoull(cols[2]), std::stod(cols[3])});
  }
  std::vector<NameEntry> entries;
  for (auto &[_, e] : by_name) entries.push_back(std::move(e));
  return AnchorDictionary(std::move(entries));
}

AnchorDictionary AnchorDictionary::LoadTsv(const std::string &path) {
  return ParseTsv(read_file(path));
}

std::string AnchorDictionary::to_binary() const {
  std::string out = "KPRT";
  put<uint32_t>(out, 1);
  put<uint64_t>(out, entries_.size());
  for (const auto &e : entries_) {
    put<uint32_t>(out, static_cast<uint32_t>(e.name.size()));
    out += e.name;
    put<double>(out, e.link_probability);
    put<uint32_t>(out, static_cast<uint32_t>(e.candidates.size()));
    for (const auto &c : e.candidates) {
      put<uint64_t>(out, c.entity);
      put<double>(out, c.commonness);
    }
  }
  return out;
}

AnchorDictionary AnchorDictionary::ParseBinary(const std::string &bytes) {
  if (bytes.compare(0, 4, "KPRT") != 0) throw InputError("bad dictionary binary magic");
  size_t pos = 4;
  if (get<uint32_t>(bytes, pos) != 1) throw InputError("unsupported dictionary binary version");
  const auto count = get<uint64_t>(bytes, pos);
  std::vector<NameEntry> entries;
  for (uint64_t i = 0; i < count; ++i) {
    NameEntry e;
    const auto len = get<uint32_t>(bytes, pos);
    if (pos + len > bytes.size()) throw InputError("truncated dictionary binary");
    e.name = bytes.substr(pos, len);
    pos += len;
    e.link_probability = get<double>(bytes, pos);
    const auto n = get<uint32_t>(bytes, pos);
    for (uint32_t k = 0; k < n; ++k) {
      Candidate c;
      c.entity = get<uint64_t>(bytes, pos);
      c.commonness = get<double>(bytes, pos);
      e.candidates.push_back(c);
    }
    entries.push_back(std::move(e));
  }
  if (pos != bytes.size()) throw InputError("trailing bytes in dictionary binary");
  return AnchorDictionary(std::move(entries));
}

AnchorDictionary build_dictionary(const HyperlinkCorpus &corpus, double lp_threshold,
                                  double commonness_threshold) {
  if (corpus.documents.empty()) throw CorpusError("empty corpus");

  // name -> entity -> anchor count
  std::map<std::string, std::map<EntityId, size_t>> anchor_counts;
  std::vector<std::vector<WordPiece>> doc_words;
  doc_words.reserve(corpus.documents.size());
  for (const auto &doc : corpus.documents) {
    auto words = split_words(doc.text);
    std::vector<Anchor> anchors = doc.anchors;
    std::sort(anchors.begin(), anchors.end(),
              [](const Anchor &a, const Anchor &b) { return a.start < b.start; });
    for (size_t i = 0; i < anchors.size(); ++i) {
      const Anchor &a = anchors[i];
      if (a.start >= a.end || a.end > doc.text.size()) {
        throw CorpusError("document " + doc.id + ": anchor [" + std::to_string(a.start) + ", " +
                          std::to_string(a.end) + ") outside text");
      }
      if (i > 0 && anchors[i - 1].end > a.start) {
        throw CorpusError("document " + doc.id + ": overlapping anchors");
      }
      auto first = std::find_if(words.begin(), words.end(),
                                [&](const WordPiece &w) { return w.start == a.start; });
      auto last = std::find_if(words.begin(), words.end(),
                               [&](const WordPiece &w) { return w.end == a.end; });
      if (first == words.end() || last == words.end() || last < first) {
        throw CorpusError("document " + doc.id + ": anchor [" + std::to_string(a.start) + ", " +
                          std::to_string(a.end) + ") crosses a token boundary");
      }
      const std::string name = join_pieces(words, first - words.begin(), last - words.begin() + 1);
      ++anchor_counts[name][a.entity];
    }
    doc_words.push_back(std::move(words));
  }

  // Occurrence counts of each anchor name as a token n-gram, via a trie of
  // the anchor names.
  std::vector<NameEntry> scratch;
  for (const auto &[name, _] : anchor_counts) {
    NameEntry e;
    e.name = name;
    e.candidates.push_back({0, 1.0});
    scratch.push_back(std::move(e));
  }
  AnchorDictionary names(std::move(scratch));
  std::map<std::string, size_t> occurrences;
  for (size_t d = 0; d < corpus.documents.size(); ++d) {
    TokenSequence seq;
    seq.text = corpus.documents[d].text;
    for (auto &w : doc_words[d]) seq.tokens.push_back({0, w.piece, w.start, w.end, false});
    for (const auto &m : names.link(seq, SIZE_MAX)) {
      ++occurrences[join_pieces(doc_words[d], m.token_start, m.token_end)];
    }
  }

  std::vector<NameEntry> kept;
  for (const auto &[name, targets] : anchor_counts) {
    size_t anchors = 0;
    for (const auto &[_, count] : targets) anchors += count;
    const size_t occ = occurrences[name];
    const double lp = static_cast<double>(anchors) / static_cast<double>(occ);
    if (lp < lp_threshold) continue;

    NameEntry e;
    e.name = name;
    e.link_probability = lp;
    e.anchor_count = anchors;
    e.occurrence_count = occ;
    for (const auto &[entity, count] : targets) {
      const double commonness = static_cast<double>(count) / static_cast<double>(anchors);
      if (commonness < commonness_threshold) continue;
      e.candidates.push_back({entity, commonness});
    }
    if (e.candidates.empty()) continue;
    kept.push_back(std::move(e));
  }
  return AnchorDictionary(std::move(kept));
}

std::vector<Mention> link(const TokenSequence &tokens, const AnchorDictionary &dict,
                          size_t max_ngram) {
  return dict.link(tokens, max_ngram);
}

std::map<EntityId, size_t> entity_frequency(const HyperlinkCorpus &corpus) {
  std::map<EntityId, size_t> freq;
  for (const auto &doc : corpus.documents) {
    for (const auto &a : doc.anchors) ++freq[a.entity];
  }
  return freq;
}

}  // namespace kpr
