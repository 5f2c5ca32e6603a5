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

#ifndef KPR_FLOPS_H_
#define KPR_FLOPS_H_

#include <cstdint>
#include <string>

namespace kpr {

// Exact FLOP counts. 128-bit so that L, D, M, N up to 10^6 cannot overflow.
using FlopCount = unsigned __int128;

// 2·L·D·M·(12·D + M): non-embedding FLOPs of one encoder forward pass.
FlopCount flops_bert(int64_t layers, int64_t dim, int64_t tokens);

// 2·D²·(2N + 1) + 2·D·N: key/query/value projections plus the dot products
// of the context-entity attention layer.
FlopCount flops_kpr_att(int64_t dim, int64_t entities);

struct FlopsReport {
  FlopCount flops_bert = 0;
  FlopCount flops_kpr_att = 0;
  FlopCount total = 0;
  double overhead_fraction = 0.0;

  // Overhead as a percentage rounded half-up to two decimals, e.g. "0.18%".
  std::string overhead_percent() const;
  std::string to_json() const;
  std::string summary() const;
};

FlopsReport overhead_report(int64_t layers, int64_t dim, int64_t tokens, int64_t entities);

std::string to_string(FlopCount value);

}  // namespace kpr

#endif  // KPR_FLOPS_H_
