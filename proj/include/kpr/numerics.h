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

#ifndef KPR_NUMERICS_H_
#define KPR_NUMERICS_H_

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "kpr/matrix.h"

namespace kpr {

enum class Mode { kTrain, kEval };

// Products. The _tn/_nt variants transpose the first/second operand.
Matrix matmul(const Matrix &a, const Matrix &b);
Matrix matmul_tn(const Matrix &a, const Matrix &b);  // aᵀ·b
Matrix matmul_nt(const Matrix &a, const Matrix &b);  // a·bᵀ
Matrix transpose(const Matrix &a);
Matrix add(const Matrix &a, const Matrix &b);
// Adds a 1xC row to every row of a.
void add_row_inplace(Matrix &a, const Matrix &row);
// Column sums as a 1xC row.
Matrix column_sums(const Matrix &a);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);
bool all_finite(const Matrix &m);

// Layer normalization over each row with population variance.
struct LayerNormCache {
  Matrix normalized;            // x̂ per row
  std::vector<double> inv_std;  // 1 / sqrt(var + eps) per row
};

constexpr double kLayerNormEps = 1e-12;

Matrix layer_norm(const Matrix &x, const Matrix &gain, const Matrix &bias,
                  double eps = kLayerNormEps, LayerNormCache *cache = nullptr);

// Returns dx; accumulates into d_gain and d_bias.
Matrix layer_norm_backward(const Matrix &d_out, const LayerNormCache &cache,
                           const Matrix &gain, Matrix &d_gain, Matrix &d_bias);

// Inverted dropout. `mask` receives the per-element multiplier (0 or
// 1/(1-p)); it is left empty when the op is the identity (eval mode or p=0).
Matrix dropout(const Matrix &x, double p, Mode mode, Rng &rng,
               Matrix *mask = nullptr);
// Applies a mask produced by dropout(); an empty mask is the identity.
Matrix apply_mask(const Matrix &x, const Matrix &mask);

// σ(x − ln(length) + 1) elementwise.
Matrix sigmoid_length_bias(const Matrix &scores, size_t length);
// Given outputs w and upstream dw, returns d scores.
Matrix sigmoid_backward(const Matrix &weights, const Matrix &d_weights);

// Max-subtracted softmax applied to each row independently.
Matrix softmax_row(const Matrix &scores);
Matrix softmax_backward(const Matrix &weights, const Matrix &d_weights);

// Exact (erf) GELU and its derivative.
double gelu(double x);
double gelu_grad(double x);

// Scalar function of a parameter point. When `grad` is non-null the function
// writes its analytic gradient there (same shape as the point).
using GradFn = std::function<double(const Matrix &point, Matrix *grad)>;

constexpr double kGradCheckStep = 1e-5;

// Max over the checked coordinates of
//   |analytic − central difference| / max(1, |analytic|, |central|).
// An empty coordinate list checks every coordinate.
double grad_check(const GradFn &f, const Matrix &point, double h = kGradCheckStep,
                  std::span<const size_t> coords = {});

// Flattening helpers for parameter structs that expose
//   template <typename Fn> void for_each(Fn fn)  with fn(const char*, Matrix&).
template <typename Params>
size_t parameter_count(Params &params) {
  size_t n = 0;
  params.for_each([&](const char *, Matrix &m) { n += m.size(); });
  return n;
}

template <typename Params>
Matrix flatten(Params &params) {
  std::vector<double> out;
  out.reserve(parameter_count(params));
  params.for_each([&](const char *, Matrix &m) {
    out.insert(out.end(), m.data().begin(), m.data().end());
  });
  size_t n = out.size();
  return Matrix(1, n, std::move(out));
}

template <typename Params>
void unflatten(const Matrix &flat, Params &params) {
  size_t offset = 0;
  params.for_each([&](const char *, Matrix &m) {
    for (double &v : m.data()) v = flat[offset++];
  });
}

template <typename Params>
uint64_t params_checksum(Params &params) {
  uint64_t hash = 0xcbf29ce484222325ULL;
  params.for_each([&](const char *, Matrix &m) { hash = checksum(m, hash); });
  return hash;
}

}  // namespace kpr

#endif  // KPR_NUMERICS_H_
