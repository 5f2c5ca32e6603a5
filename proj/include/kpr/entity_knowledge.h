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

#ifndef KPR_ENTITY_KNOWLEDGE_H_
#define KPR_ENTITY_KNOWLEDGE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kpr/encoder.h"
#include "kpr/matrix.h"

namespace kpr {

using EntityId = uint64_t;

// Dense entity ids 0..n-1 with unique canonical names.
class EntityVocabulary {
 public:
  // Returns the new id; throws InputError on a duplicate name.
  EntityId add(const std::string &name);
  std::optional<EntityId> find(const std::string &name) const;
  const std::string &name(EntityId id) const { return names_.at(id); }
  size_t size() const { return names_.size(); }

  // TSV: id <tab> name, ids in order from 0.
  static EntityVocabulary Load(const std::string &path);
  std::string to_tsv() const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, EntityId> index_;
};

// Sparse entity id -> D-vector store. `frozen` marks the table read-only to
// the trainer; external upserts stay allowed.
class EntityEmbeddingTable {
 public:
  EntityEmbeddingTable() = default;
  explicit EntityEmbeddingTable(size_t dim, double reference_norm = 0.0)
      : dim_(dim), reference_norm_(reference_norm) {}

  size_t dim() const { return dim_; }
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  double reference_norm() const { return reference_norm_; }
  void set_reference_norm(double norm) { reference_norm_ = norm; }

  bool frozen() const { return frozen_; }
  void set_frozen(bool frozen) { frozen_ = frozen; }

  // nullptr on a miss.
  const std::vector<double> *lookup(EntityId id) const;
  bool contains(EntityId id) const { return entries_.count(id) != 0; }
  // Adds or replaces; ShapeError if the vector is not dim() long.
  void upsert(EntityId id, std::span<const double> vector);
  bool erase(EntityId id) { return entries_.erase(id) != 0; }

  std::vector<EntityId> sorted_ids() const;
  // Bitwise FNV-1a over (id, vector) in ascending id order.
  uint64_t checksum() const;

  // KPRE container with 32-bit values.
  void Save(const std::string &path) const;
  static EntityEmbeddingTable Load(const std::string &path);

 private:
  size_t dim_ = 0;
  double reference_norm_ = 0.0;
  bool frozen_ = true;
  std::unordered_map<EntityId, std::vector<double>> entries_;
};

// A passage that refers to the entity, with the character span of the
// referring mention.
struct ReferringPassage {
  std::string text;
  std::pair<size_t, size_t> span;
};

constexpr size_t kEmbedderPassageCap = 128;

// Mean of the [MASK]-position states at `layer_index` over up to `cap`
// passages drawn uniformly without replacement. Passages whose mention falls
// past the truncation point are skipped; CoverageError if none remain.
std::vector<double> embed_entity(EntityId entity, const std::vector<ReferringPassage> &passages,
                                 const EncoderParams &params, const EncoderConfig &config,
                                 size_t layer_index, size_t cap, Rng &rng);

// Rescales every vector to L2 norm `reference_norm` and records it in the
// header. NumericError on a zero vector.
EntityEmbeddingTable normalize_table(const EntityEmbeddingTable &table, double reference_norm);

// Independent uniform(±scale) vectors per entity, then normalized.
EntityEmbeddingTable random_table(const EntityVocabulary &vocab, size_t dim, double scale,
                                  double reference_norm, Rng &rng);

void upsert_entity(EntityEmbeddingTable &table, EntityId id, std::span<const double> vector);

}  // namespace kpr

#endif  // KPR_ENTITY_KNOWLEDGE_H_
