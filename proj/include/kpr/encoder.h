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

#ifndef KPR_ENCODER_H_
#define KPR_ENCODER_H_

#include <cstddef>
#include <vector>

#include "kpr/matrix.h"
#include "kpr/numerics.h"
#include "kpr/tokenizer.h"

namespace kpr {

// Shape of the miniature post-norm transformer encoder.
struct EncoderConfig {
  size_t layers = 2;
  size_t hidden = 16;
  size_t max_tokens = 64;
  size_t heads = 2;
  size_t ffn = 0;  // 0 means 4 * hidden
  double dropout_p = 0.1;
  Vocab vocab;

  size_t ffn_dim() const { return ffn == 0 ? 4 * hidden : ffn; }
  // Throws ParameterError when the shape is inconsistent.
  void validate() const;
};

struct EncoderLayerParams {
  Matrix wq, wk, wv, wo;  // D x D
  Matrix bq, bk, bv, bo;  // 1 x D
  Matrix ln1_gain, ln1_bias;
  Matrix w1, b1;  // D x F, 1 x F
  Matrix w2, b2;  // F x D, 1 x D
  Matrix ln2_gain, ln2_bias;

  template <typename Fn>
  void for_each(Fn fn) {
    fn("wq", wq); fn("wk", wk); fn("wv", wv); fn("wo", wo);
    fn("bq", bq); fn("bk", bk); fn("bv", bv); fn("bo", bo);
    fn("ln1_gain", ln1_gain); fn("ln1_bias", ln1_bias);
    fn("w1", w1); fn("b1", b1); fn("w2", w2); fn("b2", b2);
    fn("ln2_gain", ln2_gain); fn("ln2_bias", ln2_bias);
  }
};

struct EncoderParams {
  Matrix token_embedding;     // V x D
  Matrix position_embedding;  // M x D
  std::vector<EncoderLayerParams> layers;

  // Weights and embeddings uniform in ±1/√D, biases zero, layer-norm gains one.
  static EncoderParams Init(const EncoderConfig &config, Rng &rng);
  // Same shapes, all zeros; used as a gradient accumulator.
  static EncoderParams ZerosLike(const EncoderParams &params);

  template <typename Fn>
  void for_each(Fn fn) {
    fn("token_embedding", token_embedding);
    fn("position_embedding", position_embedding);
    for (auto &layer : layers) layer.for_each(fn);
  }

  // Mean L2 norm of the token embedding rows.
  double mean_token_norm() const;
};

// Hidden states of every layer, layer 0 being token + position embeddings.
// Each matrix is max_tokens x D; rows at and beyond `length` are zero padding.
struct EncoderOutput {
  std::vector<Matrix> layers;
  size_t length = 0;

  const Matrix &last() const { return layers.back(); }
  // Row 0 of the last layer.
  Matrix cls() const;
  // Row `position` of layer `layer_index`.
  Matrix state(size_t layer_index, size_t position) const;
};

struct EncoderLayerCache {
  Matrix input;
  Matrix q, k, v;
  std::vector<Matrix> probs;  // one n x n matrix per head
  Matrix attended;            // concatenated head outputs, n x D
  Matrix attn_mask;
  LayerNormCache ln1;
  Matrix h1;
  Matrix ff_pre;
  Matrix ff_act;
  Matrix ff_mask;
  LayerNormCache ln2;
};

struct EncoderCache {
  std::vector<int32_t> ids;
  std::vector<EncoderLayerCache> layers;
  bool valid = false;
};

// Runs the encoder. Padding positions are never materialized: attention is
// restricted to the real tokens, which is what key masking of [PAD] computes.
EncoderOutput encode(const TokenSequence &tokens, const EncoderParams &params,
                     const EncoderConfig &config, Mode mode, Rng &rng,
                     EncoderCache *cache = nullptr);

// Backpropagates d_last (gradient w.r.t. the last layer's states; rows past
// the sequence length are ignored) into `grads`.
void encode_backward(const Matrix &d_last, const EncoderCache &cache,
                     const EncoderParams &params, const EncoderConfig &config,
                     EncoderParams &grads);

}  // namespace kpr

#endif  // KPR_ENCODER_H_
