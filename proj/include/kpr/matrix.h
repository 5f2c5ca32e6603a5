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

#ifndef KPR_MATRIX_H_
#define KPR_MATRIX_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace kpr {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(size_t rows, size_t cols, std::vector<double> data);

  // Builds a matrix from nested initializer rows, e.g. {{1, 2}, {3, 4}}.
  static Matrix FromRows(const std::vector<std::vector<double>> &rows);
  static Matrix RowVector(std::span<const double> values);
  static Matrix Identity(size_t n);

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double &operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
  double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }
  double &operator[](size_t i) { return data_[i]; }
  double operator[](size_t i) const { return data_[i]; }

  std::span<double> row(size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double> &data() { return data_; }
  const std::vector<double> &data() const { return data_; }

  // "RxC" for error messages.
  std::string shape_string() const;
  bool same_shape(const Matrix &other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  void fill(double value);
  Matrix &operator+=(const Matrix &other);
  Matrix &operator*=(double scale);

  bool operator==(const Matrix &other) const = default;

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> data_;
};

// Deterministic random stream. The engine is std::mt19937_64, whose output
// sequence is fixed by the C++ standard; all conversions to doubles, ranges
// and shuffles are done here rather than through <random> distributions,
// which are implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be positive.
  uint64_t below(uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T> &items) {
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  // k distinct indices from [0, n), in the order drawn.
  std::vector<size_t> sample_without_replacement(size_t n, size_t k);

  // Child stream with a seed derived from this one.
  Rng fork() { return Rng(next_u64()); }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

// Fills a matrix with independent uniform draws in [-scale, scale].
Matrix uniform_matrix(size_t rows, size_t cols, double scale, Rng &rng);

// FNV-1a over raw bytes; used for bitwise checksums of parameter state.
uint64_t fnv1a(const void *data, size_t size, uint64_t hash = 0xcbf29ce484222325ULL);
uint64_t checksum(const Matrix &m, uint64_t hash = 0xcbf29ce484222325ULL);

}  // namespace kpr

#endif  // KPR_MATRIX_H_
