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

#ifndef KPR_ERROR_H_
#define KPR_ERROR_H_

#include <stdexcept>
#include <string>

namespace kpr {

// Error categories map onto process exit codes in the command-line tool:
// usage problems exit 1, bad input data exits 2, numeric failures exit 3.
enum class ErrorCategory { kUsage = 1, kData = 2, kNumeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string &what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const { return category_; }
  int exit_code() const { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

// Operand shapes disagree.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string &what)
      : Error(ErrorCategory::kUsage, "shape error: " + what) {}
};

// A scalar argument is outside its domain.
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string &what)
      : Error(ErrorCategory::kUsage, "parameter error: " + what) {}
};

// Caller misused an API (e.g. backward without a forward cache).
class UsageError : public Error {
 public:
  explicit UsageError(const std::string &what)
      : Error(ErrorCategory::kUsage, "usage error: " + what) {}
};

// Malformed or semantically invalid input text/records.
class InputError : public Error {
 public:
  explicit InputError(const std::string &what)
      : Error(ErrorCategory::kData, "input error: " + what) {}
};

// A character span does not coincide with token boundaries.
class AlignmentError : public Error {
 public:
  explicit AlignmentError(const std::string &what)
      : Error(ErrorCategory::kData, "alignment error: " + what) {}
};

// Hyperlink corpus violates its invariants.
class CorpusError : public Error {
 public:
  explicit CorpusError(const std::string &what)
      : Error(ErrorCategory::kData, "corpus error: " + what) {}
};

// An entity has no referring passages to embed from.
class CoverageError : public Error {
 public:
  explicit CoverageError(const std::string &what)
      : Error(ErrorCategory::kData, "coverage error: " + what) {}
};

// Non-finite values, zero norms, degenerate weights.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string &what)
      : Error(ErrorCategory::kNumeric, "numeric error: " + what) {}
};

}  // namespace kpr

#endif  // KPR_ERROR_H_
