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

#ifndef KPR_KPR_ATTENTION_H_
#define KPR_KPR_ATTENTION_H_

#include <cstddef>
#include <string>
#include <vector>

#include "kpr/anchor_linker.h"
#include "kpr/entity_knowledge.h"
#include "kpr/matrix.h"
#include "kpr/numerics.h"

namespace kpr {

// Trainable parameters of the context-entity attention layer.
struct KprParams {
  Matrix xq, xk, xv;      // D x D
  Matrix position_table;  // M x D, entity position embeddings
  Matrix noop;            // 1 x D
  Matrix ln_gain, ln_bias;
  double dropout_p = 0.1;

  // X_q/X_k/X_v uniform ±1/√D; position table and no-op uniform ±0.02;
  // layer norm gain 1, bias 0.
  static KprParams Init(size_t dim, size_t max_tokens, double dropout_p, Rng &rng);
  static KprParams ZerosLike(const KprParams &params);

  size_t dim() const { return xq.rows(); }

  template <typename Fn>
  void for_each(Fn fn) {
    fn("xq", xq); fn("xk", xk); fn("xv", xv);
    fn("position_table", position_table);
    fn("noop", noop);
    fn("ln_gain", ln_gain); fn("ln_bias", ln_bias);
  }
};

enum class Activation { kSigmoid, kSoftmax };

// Which length enters σ(x − ln(length) + 1): all rows of U including the
// no-op (N+1), or the literal entity count N.
enum class LengthBias { kRowsWithNoop, kEntityCount };

struct AttendOptions {
  Activation activation = Activation::kSigmoid;
  LengthBias length_bias = LengthBias::kRowsWithNoop;
};

// Provenance of one row of U.
struct EntityRow {
  bool noop = false;
  size_t mention_index = 0;
  EntityId entity = 0;
  size_t token_start = 0;  // mention span in the token sequence
  size_t token_end = 0;
  std::string surface;
};

struct EntityInputs {
  Matrix u;                   // (N+1) x D, last row is the no-op
  std::vector<EntityRow> rows;
  size_t entity_count = 0;    // N
  size_t skipped = 0;         // candidates without an embedding

  size_t length(LengthBias bias) const;
};

// One row per (mention, candidate with an embedding): the entity vector plus
// the mean of the position-table rows over the mention's tokens. Mentions
// reaching past the position table produce no rows.
EntityInputs build_entity_inputs(const std::vector<Mention> &mentions,
                                 const EntityEmbeddingTable &table, const KprParams &params);

struct AttendCache {
  Matrix h_cls;
  Matrix u;
  Matrix q, k, v;
  Matrix weights;
  Matrix drop_mask;
  LayerNormCache ln;
  Activation activation = Activation::kSigmoid;
  std::vector<EntityRow> rows;
  bool valid = false;
};

// Z = LayerNorm(Dropout(act(Q·Kᵀ/√D)·V) + H_cls) with Q = H_cls·X_q,
// K = U·X_k, V = U·X_v.
Matrix attend(const Matrix &h_cls, const EntityInputs &inputs, const KprParams &params,
              const AttendOptions &options, Mode mode, Rng &rng,
              AttendCache *cache = nullptr);

struct AttentionWeights {
  std::vector<double> raw;         // activation outputs
  std::vector<double> normalized;  // raw / sum(raw) over all rows
  std::vector<EntityRow> rows;
};

AttentionWeights attention_weights(const Matrix &h_cls, const EntityInputs &inputs,
                                   const KprParams &params, const AttendOptions &options);

struct AttendGradients {
  Matrix d_h_cls;     // 1 x D
  Matrix d_entities;  // N x D, gradient w.r.t. the entity vectors (discarded by training)
};

// Accumulates parameter gradients into `grads`.
AttendGradients attend_backward(const Matrix &d_z, const AttendCache &cache,
                                const KprParams &params, KprParams &grads);

}  // namespace kpr

#endif  // KPR_KPR_ATTENTION_H_
