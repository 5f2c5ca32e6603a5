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

#include "kpr/entity_knowledge.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kpr/error.h"
#include "kpr/numerics.h"
#include "kpr/tensor_io.h"
#include "kpr/tokenizer.h"

namespace kpr {

EntityId EntityVocabulary::add(const std::string &name) {
  const EntityId id = names_.size();
  auto [it, inserted] = index_.emplace(name, id);
  if (!inserted) throw InputError("duplicate entity name '" + name + "'");
  names_.push_back(name);
  return id;
}

std::optional<EntityId> EntityVocabulary::find(const std::string &name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EntityVocabulary EntityVocabulary::Load(const std::string &path) {
  std::istringstream in(read_file(path));
  EntityVocabulary vocab;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw InputError(path + ":" + std::to_string(line_no) + ": expected id<TAB>name");
    }
    const EntityId id = std::stoull(line.substr(0, tab));
    if (id != vocab.size()) {
      throw InputError(path + ":" + std::to_string(line_no) + ": entity ids must be contiguous");
    }
    vocab.add(line.substr(tab + 1));
  }
  return vocab;
}

std::string EntityVocabulary::to_tsv() const {
  std::string out;
  for (size_t i = 0; i < names_.size(); ++i) {
    out += std::to_string(i) + "\t" + names_[i] + "\n";
  }
  return out;
}

const std::vector<double> *EntityEmbeddingTable::lookup(EntityId id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

void EntityEmbeddingTable::upsert(EntityId id, std::span<const double> vector) {
  if (vector.size() != dim_) {
    throw ShapeError("entity vector of length " + std::to_string(vector.size()) +
                     " for a table of dim " + std::to_string(dim_));
  }
  for (double v : vector) {
    if (!std::isfinite(v)) throw NumericError("non-finite entity vector for " + std::to_string(id));
  }
  entries_[id].assign(vector.begin(), vector.end());
}

std::vector<EntityId> EntityEmbeddingTable::sorted_ids() const {
  std::vector<EntityId> ids;
  ids.reserve(entries_.size());
  for (const auto &[id, _] : entries_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

uint64_t EntityEmbeddingTable::checksum() const {
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (EntityId id : sorted_ids()) {
    hash = fnv1a(&id, sizeof(id), hash);
    const auto &v = entries_.at(id);
    hash = fnv1a(v.data(), v.size() * sizeof(double), hash);
  }
  return hash;
}

void EntityEmbeddingTable::Save(const std::string &path) const {
  TensorContainer c;
  c.dim = static_cast<uint32_t>(dim_);
  c.reference_norm = reference_norm_;
  for (EntityId id : sorted_ids()) c.records.emplace_back(id, entries_.at(id));
  write_container(path, c);
}

EntityEmbeddingTable EntityEmbeddingTable::Load(const std::string &path) {
  TensorContainer c = read_container(path);
  EntityEmbeddingTable table(c.dim, c.reference_norm);
  for (auto &[id, values] : c.records) table.upsert(id, values);
  return table;
}

std::vector<double> embed_entity(EntityId entity, const std::vector<ReferringPassage> &passages,
                                 const EncoderParams &params, const EncoderConfig &config,
                                 size_t layer_index, size_t cap, Rng &rng) {
  if (cap == 0) throw ParameterError("passage cap must be positive");
  if (layer_index > config.layers) {
    throw ParameterError("layer index " + std::to_string(layer_index) + " exceeds " +
                         std::to_string(config.layers) + " layers");
  }
  if (passages.empty()) {
    throw CoverageError("entity " + std::to_string(entity) + " has no referring passages");
  }

  std::vector<size_t> chosen;
  if (passages.size() > cap) {
    chosen = rng.sample_without_replacement(passages.size(), cap);
  } else {
    chosen.resize(passages.size());
    for (size_t i = 0; i < chosen.size(); ++i) chosen[i] = i;
  }

  std::vector<double> sum(config.hidden, 0.0);
  size_t used = 0;
  Rng unused(0);  // eval-mode encoding draws nothing
  for (size_t i : chosen) {
    const auto &p = passages[i];
    TokenSequence tokens = tokenize(p.text, config.vocab, config.max_tokens);
    // The final token is the wrapping [SEP]; a mention ending beyond the last
    // content token was truncated away.
    const size_t content_end = tokens.size() >= 2 ? tokens.tokens[tokens.size() - 2].end : 0;
    if (p.span.second > content_end) continue;
    auto [masked, mask_pos] = mask_span(tokens, p.span, config.vocab);
    EncoderOutput out = encode(masked, params, config, Mode::kEval, unused);
    auto row = out.layers[layer_index].row(mask_pos);
    for (size_t j = 0; j < sum.size(); ++j) sum[j] += row[j];
    ++used;
  }
  if (used == 0) {
    throw CoverageError("every referring passage of entity " + std::to_string(entity) +
                        " was truncated before its mention");
  }
  for (double &v : sum) v /= static_cast<double>(used);
  return sum;
}

EntityEmbeddingTable normalize_table(const EntityEmbeddingTable &table, double reference_norm) {
  if (!(reference_norm > 0.0)) throw ParameterError("reference norm must be positive");
  if (table.empty()) throw ParameterError("cannot normalize an empty table");
  EntityEmbeddingTable out(table.dim(), reference_norm);
  out.set_frozen(table.frozen());
  for (EntityId id : table.sorted_ids()) {
    std::vector<double> v = *table.lookup(id);
    const double norm = l2_norm(v);
    if (norm == 0.0) throw NumericError("entity " + std::to_string(id) + " has a zero vector");
    const double scale = reference_norm / norm;
    for (double &x : v) x *= scale;
    out.upsert(id, v);
  }
  return out;
}

EntityEmbeddingTable random_table(const EntityVocabulary &vocab, size_t dim, double scale,
                                  double reference_norm, Rng &rng) {
  if (dim == 0) throw ParameterError("embedding dim must be positive");
  EntityEmbeddingTable raw(dim);
  std::vector<double> v(dim);
  for (EntityId id = 0; id < vocab.size(); ++id) {
    for (double &x : v) x = rng.uniform(-scale, scale);
    raw.upsert(id, v);
  }
  return normalize_table(raw, reference_norm);
}

void upsert_entity(EntityEmbeddingTable &table, EntityId id, std::span<const double> vector) {
  table.upsert(id, vector);
}

}  // namespace kpr
