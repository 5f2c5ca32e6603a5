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

#include "kpr/encoder.h"

#include <cmath>

#include "kpr/error.h"

namespace kpr {

namespace {

// Columns [offset, offset + width) of m.
Matrix slice_cols(const Matrix &m, size_t offset, size_t width) {
  Matrix out(m.rows(), width);
  for (size_t i = 0; i < m.rows(); ++i) {
    for (size_t j = 0; j < width; ++j) out(i, j) = m(i, offset + j);
  }
  return out;
}

void add_cols(Matrix &dst, const Matrix &src, size_t offset) {
  for (size_t i = 0; i < src.rows(); ++i) {
    for (size_t j = 0; j < src.cols(); ++j) dst(i, offset + j) += src(i, j);
  }
}

Matrix affine(const Matrix &x, const Matrix &w, const Matrix &b) {
  Matrix out = matmul(x, w);
  add_row_inplace(out, b);
  return out;
}

// Accumulates the gradients of y = x·w + b and returns dx.
Matrix affine_backward(const Matrix &dy, const Matrix &x, const Matrix &w, Matrix &dw,
                       Matrix &db) {
  dw += matmul_tn(x, dy);
  db += column_sums(dy);
  return matmul_nt(dy, w);
}

Matrix pad_rows(const Matrix &m, size_t rows) {
  Matrix out(rows, m.cols());
  std::copy(m.data().begin(), m.data().end(), out.data().begin());
  return out;
}

}  // namespace

void EncoderConfig::validate() const {
  if (layers == 0 || hidden == 0 || max_tokens < 2 || heads == 0) {
    throw ParameterError("encoder layers, hidden, heads must be positive and max_tokens >= 2");
  }
  if (hidden % heads != 0) {
    throw ParameterError("hidden size " + std::to_string(hidden) +
                         " is not divisible by heads " + std::to_string(heads));
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw ParameterError("encoder dropout must lie in [0, 1)");
  }
  if (vocab.size() == 0) throw ParameterError("encoder vocab is empty");
}

EncoderParams EncoderParams::Init(const EncoderConfig &config, Rng &rng) {
  config.validate();
  const size_t d = config.hidden;
  const size_t f = config.ffn_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  EncoderParams p;
  p.token_embedding = uniform_matrix(config.vocab.size(), d, scale, rng);
  p.position_embedding = uniform_matrix(config.max_tokens, d, scale, rng);
  p.layers.resize(config.layers);
  for (auto &layer : p.layers) {
    layer.wq = uniform_matrix(d, d, scale, rng);
    layer.wk = uniform_matrix(d, d, scale, rng);
    layer.wv = uniform_matrix(d, d, scale, rng);
    layer.wo = uniform_matrix(d, d, scale, rng);
    layer.bq = Matrix(1, d);
    layer.bk = Matrix(1, d);
    layer.bv = Matrix(1, d);
    layer.bo = Matrix(1, d);
    layer.ln1_gain = Matrix(1, d, 1.0);
    layer.ln1_bias = Matrix(1, d);
    layer.w1 = uniform_matrix(d, f, scale, rng);
    layer.b1 = Matrix(1, f);
    layer.w2 = uniform_matrix(f, d, 1.0 / std::sqrt(static_cast<double>(f)), rng);
    layer.b2 = Matrix(1, d);
    layer.ln2_gain = Matrix(1, d, 1.0);
    layer.ln2_bias = Matrix(1, d);
  }
  return p;
}

EncoderParams EncoderParams::ZerosLike(const EncoderParams &params) {
  EncoderParams out = params;
  out.for_each([](const char *, Matrix &m) { m.fill(0.0); });
  return out;
}

double EncoderParams::mean_token_norm() const {
  if (token_embedding.rows() == 0) return 0.0;
  double sum = 0.0;
  for (size_t i = 0; i < token_embedding.rows(); ++i) sum += l2_norm(token_embedding.row(i));
  return sum / static_cast<double>(token_embedding.rows());
}

Matrix EncoderOutput::cls() const { return state(layers.size() - 1, 0); }

Matrix EncoderOutput::state(size_t layer_index, size_t position) const {
  if (layer_index >= layers.size()) {
    throw ParameterError("layer index " + std::to_string(layer_index) + " out of range");
  }
  if (position >= length) {
    throw ParameterError("position " + std::to_string(position) + " beyond sequence length");
  }
  return Matrix::RowVector(layers[layer_index].row(position));
}

EncoderOutput encode(const TokenSequence &tokens, const EncoderParams &params,
                     const EncoderConfig &config, Mode mode, Rng &rng,
                     EncoderCache *cache) {
  const size_t n = tokens.size();
  const size_t d = config.hidden;
  const size_t heads = config.heads;
  const size_t dh = d / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  if (n == 0 || n > config.max_tokens) {
    throw InputError("token sequence length " + std::to_string(n) + " outside [1, " +
                     std::to_string(config.max_tokens) + "]");
  }

  Matrix x(n, d);
  std::vector<int32_t> ids = tokens.ids();
  for (size_t i = 0; i < n; ++i) {
    if (ids[i] < 0 || static_cast<size_t>(ids[i]) >= params.token_embedding.rows()) {
      throw InputError("token id " + std::to_string(ids[i]) + " out of vocab range");
    }
    auto row = x.row(i);
    auto tok = params.token_embedding.row(ids[i]);
    auto pos = params.position_embedding.row(i);
    for (size_t j = 0; j < d; ++j) row[j] = tok[j] + pos[j];
  }

  EncoderOutput out;
  out.length = n;
  out.layers.push_back(pad_rows(x, config.max_tokens));
  if (cache) {
    cache->ids = ids;
    cache->layers.clear();
    cache->layers.resize(params.layers.size());
    cache->valid = true;
  }

  for (size_t l = 0; l < params.layers.size(); ++l) {
    const auto &p = params.layers[l];
    Matrix q = affine(x, p.wq, p.bq);
    Matrix k = affine(x, p.wk, p.bk);
    Matrix v = affine(x, p.wv, p.bv);

    Matrix attended(n, d);
    std::vector<Matrix> probs;
    for (size_t h = 0; h < heads; ++h) {
      Matrix qh = slice_cols(q, h * dh, dh);
      Matrix kh = slice_cols(k, h * dh, dh);
      Matrix vh = slice_cols(v, h * dh, dh);
      Matrix scores = matmul_nt(qh, kh);
      scores *= inv_sqrt_dh;
      Matrix prob = softmax_row(scores);
      add_cols(attended, matmul(prob, vh), h * dh);
      probs.push_back(std::move(prob));
    }

    Matrix attn_mask;
    Matrix a = dropout(affine(attended, p.wo, p.bo), config.dropout_p, mode, rng, &attn_mask);
    LayerNormCache ln1;
    Matrix h1 = layer_norm(add(x, a), p.ln1_gain, p.ln1_bias, kLayerNormEps, &ln1);

    Matrix ff_pre = affine(h1, p.w1, p.b1);
    Matrix ff_act(n, ff_pre.cols());
    for (size_t i = 0; i < ff_pre.size(); ++i) ff_act[i] = gelu(ff_pre[i]);
    Matrix ff_mask;
    Matrix g = dropout(affine(ff_act, p.w2, p.b2), config.dropout_p, mode, rng, &ff_mask);
    LayerNormCache ln2;
    Matrix next = layer_norm(add(h1, g), p.ln2_gain, p.ln2_bias, kLayerNormEps, &ln2);

    if (cache) {
      auto &c = cache->layers[l];
      c.input = std::move(x);
      c.q = std::move(q);
      c.k = std::move(k);
      c.v = std::move(v);
      c.probs = std::move(probs);
      c.attended = std::move(attended);
      c.attn_mask = std::move(attn_mask);
      c.ln1 = std::move(ln1);
      c.h1 = std::move(h1);
      c.ff_pre = std::move(ff_pre);
      c.ff_act = std::move(ff_act);
      c.ff_mask = std::move(ff_mask);
      c.ln2 = std::move(ln2);
    }
    x = std::move(next);
    out.layers.push_back(pad_rows(x, config.max_tokens));
  }
  return out;
}

void encode_backward(const Matrix &d_last, const EncoderCache &cache,
                     const EncoderParams &params, const EncoderConfig &config,
                     EncoderParams &grads) {
  if (!cache.valid) throw UsageError("encode_backward without a forward cache");
  const size_t n = cache.ids.size();
  const size_t d = config.hidden;
  const size_t heads = config.heads;
  const size_t dh = d / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  if (d_last.cols() != d || d_last.rows() < n) {
    throw ShapeError("encode_backward gradient " + d_last.shape_string());
  }

  Matrix dx(n, d);
  std::copy(d_last.data().begin(), d_last.data().begin() + n * d, dx.data().begin());

  for (size_t l = params.layers.size(); l-- > 0;) {
    const auto &p = params.layers[l];
    const auto &c = cache.layers[l];
    auto &g = grads.layers[l];

    Matrix d_r2 = layer_norm_backward(dx, c.ln2, p.ln2_gain, g.ln2_gain, g.ln2_bias);
    Matrix d_h1 = d_r2;
    Matrix d_g = apply_mask(d_r2, c.ff_mask);
    Matrix d_act = affine_backward(d_g, c.ff_act, p.w2, g.w2, g.b2);
    for (size_t i = 0; i < d_act.size(); ++i) d_act[i] *= gelu_grad(c.ff_pre[i]);
    d_h1 += affine_backward(d_act, c.h1, p.w1, g.w1, g.b1);

    Matrix d_r1 = layer_norm_backward(d_h1, c.ln1, p.ln1_gain, g.ln1_gain, g.ln1_bias);
    Matrix d_in = d_r1;
    Matrix d_a = apply_mask(d_r1, c.attn_mask);
    Matrix d_attended = affine_backward(d_a, c.attended, p.wo, g.wo, g.bo);

    Matrix dq(n, d), dk(n, d), dv(n, d);
    for (size_t h = 0; h < heads; ++h) {
      Matrix qh = slice_cols(c.q, h * dh, dh);
      Matrix kh = slice_cols(c.k, h * dh, dh);
      Matrix vh = slice_cols(c.v, h * dh, dh);
      Matrix d_oh = slice_cols(d_attended, h * dh, dh);
      const Matrix &prob = c.probs[h];
      Matrix d_prob = matmul_nt(d_oh, vh);
      add_cols(dv, matmul_tn(prob, d_oh), h * dh);
      Matrix d_scores = softmax_backward(prob, d_prob);
      d_scores *= inv_sqrt_dh;
      add_cols(dq, matmul(d_scores, kh), h * dh);
      add_cols(dk, matmul_tn(d_scores, qh), h * dh);
    }
    d_in += affine_backward(dq, c.input, p.wq, g.wq, g.bq);
    d_in += affine_backward(dk, c.input, p.wk, g.wk, g.bk);
    d_in += affine_backward(dv, c.input, p.wv, g.wv, g.bv);
    dx = std::move(d_in);
  }

  for (size_t i = 0; i < n; ++i) {
    auto row = dx.row(i);
    auto tok = grads.token_embedding.row(cache.ids[i]);
    auto pos = grads.position_embedding.row(i);
    for (size_t j = 0; j < d; ++j) {
      tok[j] += row[j];
      pos[j] += row[j];
    }
  }
}

}  // namespace kpr
