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

#include "kpr/kpr_attention.h"

#include <cmath>

#include "kpr/error.h"

namespace kpr {

namespace {

constexpr double kPositionInitScale = 0.02;

Matrix activate(const Matrix &scores, Activation activation, size_t length) {
  return activation == Activation::kSigmoid ? sigmoid_length_bias(scores, length)
                                            : softmax_row(scores);
}

void check_dims(const Matrix &h_cls, const EntityInputs &inputs, const KprParams &params) {
  const size_t d = params.dim();
  if (h_cls.rows() != 1 || h_cls.cols() != d) {
    throw ShapeError("h_cls " + h_cls.shape_string() + " for attention dim " + std::to_string(d));
  }
  if (inputs.u.cols() != d || inputs.u.rows() != inputs.entity_count + 1) {
    throw ShapeError("entity inputs " + inputs.u.shape_string() + " for " +
                     std::to_string(inputs.entity_count) + " entities of dim " + std::to_string(d));
  }
}

}  // namespace

KprParams KprParams::Init(size_t dim, size_t max_tokens, double dropout_p, Rng &rng) {
  if (dim == 0 || max_tokens == 0) throw ParameterError("KPR dims must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ParameterError("dropout must lie in [0, 1)");
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  KprParams p;
  p.xq = uniform_matrix(dim, dim, scale, rng);
  p.xk = uniform_matrix(dim, dim, scale, rng);
  p.xv = uniform_matrix(dim, dim, scale, rng);
  p.position_table = uniform_matrix(max_tokens, dim, kPositionInitScale, rng);
  p.noop = uniform_matrix(1, dim, kPositionInitScale, rng);
  p.ln_gain = Matrix(1, dim, 1.0);
  p.ln_bias = Matrix(1, dim);
  p.dropout_p = dropout_p;
  return p;
}

KprParams KprParams::ZerosLike(const KprParams &params) {
  KprParams out = params;
  out.for_each([](const char *, Matrix &m) { m.fill(0.0); });
  return out;
}

size_t EntityInputs::length(LengthBias bias) const {
  return bias == LengthBias::kRowsWithNoop ? entity_count + 1 : entity_count;
}

EntityInputs build_entity_inputs(const std::vector<Mention> &mentions,
                                 const EntityEmbeddingTable &table, const KprParams &params) {
  const size_t d = params.dim();
  if (table.dim() != d && !table.empty()) {
    throw ShapeError("entity table dim " + std::to_string(table.dim()) + " vs attention dim " +
                     std::to_string(d));
  }
  EntityInputs inputs;
  std::vector<double> rows;
  for (size_t m = 0; m < mentions.size(); ++m) {
    const Mention &mention = mentions[m];
    if (mention.token_end > params.position_table.rows() || mention.token_end <= mention.token_start) {
      continue;
    }
    std::vector<double> position(d, 0.0);
    for (size_t t = mention.token_start; t < mention.token_end; ++t) {
      auto p = params.position_table.row(t);
      for (size_t j = 0; j < d; ++j) position[j] += p[j];
    }
    const double inv_span = 1.0 / static_cast<double>(mention.token_end - mention.token_start);
    for (double &x : position) x *= inv_span;

    for (EntityId entity : mention.candidates) {
      const std::vector<double> *vec = table.lookup(entity);
      if (vec == nullptr) {
        ++inputs.skipped;
        continue;
      }
      for (size_t j = 0; j < d; ++j) rows.push_back((*vec)[j] + position[j]);
      inputs.rows.push_back({false, m, entity, mention.token_start, mention.token_end, mention.surface});
    }
  }
  inputs.entity_count = inputs.rows.size();
  rows.insert(rows.end(), params.noop.data().begin(), params.noop.data().end());
  inputs.rows.push_back({true, 0, 0, 0, 0, ""});
  inputs.u = Matrix(inputs.entity_count + 1, d, std::move(rows));
  return inputs;
}

Matrix attend(const Matrix &h_cls, const EntityInputs &inputs, const KprParams &params,
              const AttendOptions &options, Mode mode, Rng &rng, AttendCache *cache) {
  check_dims(h_cls, inputs, params);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(params.dim()));

  Matrix q = matmul(h_cls, params.xq);
  Matrix k = matmul(inputs.u, params.xk);
  Matrix v = matmul(inputs.u, params.xv);
  Matrix scores = matmul_nt(q, k);
  scores *= inv_sqrt_d;
  Matrix weights = activate(scores, options.activation, inputs.length(options.length_bias));
  Matrix y = matmul(weights, v);
  Matrix mask;
  Matrix dropped = dropout(y, params.dropout_p, mode, rng, &mask);
  LayerNormCache ln;
  Matrix z = layer_norm(add(dropped, h_cls), params.ln_gain, params.ln_bias, kLayerNormEps, &ln);

  if (cache) {
    cache->h_cls = h_cls;
    cache->u = inputs.u;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->weights = std::move(weights);
    cache->drop_mask = std::move(mask);
    cache->ln = std::move(ln);
    cache->activation = options.activation;
    cache->rows = inputs.rows;
    cache->valid = true;
  }
  return z;
}

AttentionWeights attention_weights(const Matrix &h_cls, const EntityInputs &inputs,
                                   const KprParams &params, const AttendOptions &options) {
  check_dims(h_cls, inputs, params);
  Matrix q = matmul(h_cls, params.xq);
  Matrix k = matmul(inputs.u, params.xk);
  Matrix scores = matmul_nt(q, k);
  scores *= 1.0 / std::sqrt(static_cast<double>(params.dim()));
  Matrix weights = activate(scores, options.activation, inputs.length(options.length_bias));

  AttentionWeights out;
  out.raw = weights.data();
  double sum = 0.0;
  for (double w : out.raw) sum += w;
  if (!(sum > 0.0)) throw NumericError("attention weights sum to zero");
  for (double w : out.raw) out.normalized.push_back(w / sum);
  out.rows = inputs.rows;
  return out;
}

AttendGradients attend_backward(const Matrix &d_z, const AttendCache &cache,
                                const KprParams &params, KprParams &grads) {
  if (!cache.valid) throw UsageError("attend_backward without a forward cache");
  const size_t d = params.dim();
  if (d_z.rows() != 1 || d_z.cols() != d) throw ShapeError("d_z " + d_z.shape_string());
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  Matrix d_r = layer_norm_backward(d_z, cache.ln, params.ln_gain, grads.ln_gain, grads.ln_bias);
  Matrix d_h = d_r;
  Matrix d_y = apply_mask(d_r, cache.drop_mask);

  Matrix d_w = matmul_nt(d_y, cache.v);       // 1 x (N+1)
  Matrix d_v = matmul_tn(cache.weights, d_y);  // (N+1) x D
  Matrix d_s = cache.activation == Activation::kSigmoid ? sigmoid_backward(cache.weights, d_w)
                                                        : softmax_backward(cache.weights, d_w);
  d_s *= inv_sqrt_d;
  Matrix d_q = matmul(d_s, cache.k);     // 1 x D
  Matrix d_k = matmul_tn(d_s, cache.q);  // (N+1) x D

  grads.xq += matmul_tn(cache.h_cls, d_q);
  d_h += matmul_nt(d_q, params.xq);
  grads.xk += matmul_tn(cache.u, d_k);
  grads.xv += matmul_tn(cache.u, d_v);
  Matrix d_u = matmul_nt(d_k, params.xk);
  d_u += matmul_nt(d_v, params.xv);

  const size_t n = cache.rows.size() - 1;
  AttendGradients out;
  out.d_h_cls = std::move(d_h);
  out.d_entities = Matrix(n, d);
  for (size_t r = 0; r < cache.rows.size(); ++r) {
    auto du = d_u.row(r);
    const EntityRow &row = cache.rows[r];
    if (row.noop) {
      for (size_t j = 0; j < d; ++j) grads.noop[j] += du[j];
      continue;
    }
    auto de = out.d_entities.row(r);
    const double inv_span = 1.0 / static_cast<double>(row.token_end - row.token_start);
    for (size_t j = 0; j < d; ++j) de[j] = du[j];
    for (size_t t = row.token_start; t < row.token_end; ++t) {
      auto dp = grads.position_table.row(t);
      for (size_t j = 0; j < d; ++j) dp[j] += du[j] * inv_span;
    }
  }
  return out;
}

}  // namespace kpr
