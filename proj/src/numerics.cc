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

#include "kpr/numerics.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kpr/error.h"

namespace kpr {

namespace {

void check_shape(bool ok, const char *op, const Matrix &a, const Matrix &b) {
  if (!ok) {
    throw ShapeError(std::string(op) + ": " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

}  // namespace

Matrix matmul(const Matrix &a, const Matrix &b) {
  check_shape(a.cols() == b.rows(), "matmul", a, b);
  Matrix out(a.rows(), b.cols());
  for (size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix &a, const Matrix &b) {
  check_shape(a.rows() == b.rows(), "matmul_tn", a, b);
  Matrix out(a.cols(), b.cols());
  for (size_t k = 0; k < a.rows(); ++k) {
    auto a_row = a.row(k);
    auto b_row = b.row(k);
    for (size_t i = 0; i < a.cols(); ++i) {
      const double aki = a_row[i];
      if (aki == 0.0) continue;
      auto out_row = out.row(i);
      for (size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix &a, const Matrix &b) {
  check_shape(a.cols() == b.cols(), "matmul_nt", a, b);
  Matrix out(a.rows(), b.rows());
  for (size_t i = 0; i < a.rows(); ++i) {
    for (size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  }
  return out;
}

Matrix transpose(const Matrix &a) {
  Matrix out(a.cols(), a.rows());
  for (size_t i = 0; i < a.rows(); ++i) {
    for (size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

Matrix add(const Matrix &a, const Matrix &b) {
  Matrix out = a;
  out += b;
  return out;
}

void add_row_inplace(Matrix &a, const Matrix &row) {
  check_shape(row.rows() == 1 && row.cols() == a.cols(), "add_row", a, row);
  for (size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (size_t j = 0; j < a.cols(); ++j) r[j] += row[j];
  }
}

Matrix column_sums(const Matrix &a) {
  Matrix out(1, a.cols());
  for (size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (size_t j = 0; j < a.cols(); ++j) out[j] += r[j];
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("dot of lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

bool all_finite(const Matrix &m) {
  return std::all_of(m.data().begin(), m.data().end(),
                     [](double v) { return std::isfinite(v); });
}

Matrix layer_norm(const Matrix &x, const Matrix &gain, const Matrix &bias,
                  double eps, LayerNormCache *cache) {
  const size_t d = x.cols();
  if (d == 0) throw ShapeError("layer_norm over zero columns");
  check_shape(gain.rows() == 1 && gain.cols() == d, "layer_norm gain", x, gain);
  check_shape(bias.rows() == 1 && bias.cols() == d, "layer_norm bias", x, bias);
  if (eps < 0.0) throw ParameterError("layer_norm eps must be non-negative");

  Matrix out(x.rows(), d);
  if (cache) {
    cache->normalized = Matrix(x.rows(), d);
    cache->inv_std.assign(x.rows(), 0.0);
  }
  for (size_t i = 0; i < x.rows(); ++i) {
    auto in = x.row(i);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    if (var + eps <= 0.0) {
      throw NumericError("layer_norm of a constant row with eps = 0");
    }
    const double inv_std = 1.0 / std::sqrt(var + eps);
    auto o = out.row(i);
    for (size_t j = 0; j < d; ++j) {
      const double xhat = (in[j] - mean) * inv_std;
      o[j] = xhat * gain[j] + bias[j];
      if (cache) cache->normalized(i, j) = xhat;
    }
    if (cache) cache->inv_std[i] = inv_std;
  }
  return out;
}

Matrix layer_norm_backward(const Matrix &d_out, const LayerNormCache &cache,
                           const Matrix &gain, Matrix &d_gain, Matrix &d_bias) {
  check_shape(d_out.same_shape(cache.normalized), "layer_norm_backward", d_out,
              cache.normalized);
  const size_t d = d_out.cols();
  const double inv_d = 1.0 / static_cast<double>(d);
  Matrix dx(d_out.rows(), d);
  std::vector<double> dxhat(d);
  for (size_t i = 0; i < d_out.rows(); ++i) {
    auto dy = d_out.row(i);
    auto xhat = cache.normalized.row(i);
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (size_t j = 0; j < d; ++j) {
      d_gain[j] += dy[j] * xhat[j];
      d_bias[j] += dy[j];
      dxhat[j] = dy[j] * gain[j];
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += dxhat[j] * xhat[j];
    }
    mean_dxhat *= inv_d;
    mean_dxhat_xhat *= inv_d;
    auto out = dx.row(i);
    for (size_t j = 0; j < d; ++j) {
      out[j] = cache.inv_std[i] * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
    }
  }
  return dx;
}

Matrix dropout(const Matrix &x, double p, Mode mode, Rng &rng, Matrix *mask) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ParameterError("dropout probability must lie in [0, 1), got " +
                         std::to_string(p));
  }
  if (mask) *mask = Matrix();
  if (mode == Mode::kEval || p == 0.0) return x;

  const double keep_scale = 1.0 / (1.0 - p);
  Matrix m(x.rows(), x.cols());
  for (double &v : m.data()) v = rng.bernoulli(p) ? 0.0 : keep_scale;
  Matrix out = apply_mask(x, m);
  if (mask) *mask = std::move(m);
  return out;
}

Matrix apply_mask(const Matrix &x, const Matrix &mask) {
  if (mask.empty()) return x;
  check_shape(x.same_shape(mask), "apply_mask", x, mask);
  Matrix out = x;
  for (size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return out;
}

Matrix sigmoid_length_bias(const Matrix &scores, size_t length) {
  if (length == 0) throw ParameterError("sigmoid length bias requires length >= 1");
  const double shift = 1.0 - std::log(static_cast<double>(length));
  Matrix out(scores.rows(), scores.cols());
  for (size_t i = 0; i < scores.size(); ++i) {
    const double t = scores[i] + shift;
    // Branch keeps exp() from overflowing for large |t|.
    if (t >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-t));
    } else {
      const double e = std::exp(t);
      out[i] = e / (1.0 + e);
    }
  }
  return out;
}

Matrix sigmoid_backward(const Matrix &weights, const Matrix &d_weights) {
  check_shape(weights.same_shape(d_weights), "sigmoid_backward", weights, d_weights);
  Matrix out(weights.rows(), weights.cols());
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = d_weights[i] * weights[i] * (1.0 - weights[i]);
  }
  return out;
}

Matrix softmax_row(const Matrix &scores) {
  if (scores.cols() == 0) throw ShapeError("softmax over an empty row");
  Matrix out(scores.rows(), scores.cols());
  for (size_t i = 0; i < scores.rows(); ++i) {
    auto in = scores.row(i);
    auto o = out.row(i);
    const double max = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - max);
      sum += o[j];
    }
    for (double &v : o) v /= sum;
  }
  return out;
}

Matrix softmax_backward(const Matrix &weights, const Matrix &d_weights) {
  check_shape(weights.same_shape(d_weights), "softmax_backward", weights, d_weights);
  Matrix out(weights.rows(), weights.cols());
  for (size_t i = 0; i < weights.rows(); ++i) {
    const double inner = dot(weights.row(i), d_weights.row(i));
    for (size_t j = 0; j < weights.cols(); ++j) {
      out(i, j) = weights(i, j) * (d_weights(i, j) - inner);
    }
  }
  return out;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
  return cdf + x * pdf;
}

double grad_check(const GradFn &f, const Matrix &point, double h,
                  std::span<const size_t> coords) {
  if (!(h > 0.0)) throw ParameterError("grad_check step must be positive");
  Matrix analytic(point.rows(), point.cols());
  const double f0 = f(point, &analytic);
  if (!std::isfinite(f0)) throw NumericError("grad_check: f is not finite at the point");

  std::vector<size_t> all;
  if (coords.empty()) {
    all.resize(point.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    coords = all;
  }

  double worst = 0.0;
  Matrix probe = point;
  for (size_t i : coords) {
    if (i >= point.size()) throw ParameterError("grad_check coordinate out of range");
    const double saved = probe[i];
    probe[i] = saved + h;
    const double plus = f(probe, nullptr);
    probe[i] = saved - h;
    const double minus = f(probe, nullptr);
    probe[i] = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw NumericError("grad_check: f is not finite near coordinate " +
                         std::to_string(i));
    }
    const double numeric = (plus - minus) / (2.0 * h);
    const double denom = std::max({1.0, std::fabs(analytic[i]), std::fabs(numeric)});
    worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace kpr
