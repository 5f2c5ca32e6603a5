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

#include "kpr/flops.h"

#include <algorithm>

#include "json.hpp"
#include "kpr/error.h"

namespace kpr {

namespace {

constexpr int64_t kMaxDimension = 1'000'000;

FlopCount checked(int64_t value, const char *name, bool allow_zero) {
  if (value < (allow_zero ? 0 : 1) || value > kMaxDimension) {
    throw ParameterError(std::string(name) + " = " + std::to_string(value) + " outside [" +
                         (allow_zero ? "0" : "1") + ", 10^6]");
  }
  return static_cast<FlopCount>(value);
}

nlohmann::json count_json(FlopCount value) {
  if (value <= UINT64_MAX) return static_cast<uint64_t>(value);
  return to_string(value);
}

}  // namespace

std::string to_string(FlopCount value) {
  if (value == 0) return "0";
  std::string out;
  while (value > 0) {
    out.push_back(static_cast<char>('0' + static_cast<int>(value % 10)));
    value /= 10;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

FlopCount flops_bert(int64_t layers, int64_t dim, int64_t tokens) {
  const FlopCount l = checked(layers, "layers", false);
  const FlopCount d = checked(dim, "dim", false);
  const FlopCount m = checked(tokens, "tokens", false);
  return 2 * l * d * m * (12 * d + m);
}

FlopCount flops_kpr_att(int64_t dim, int64_t entities) {
  const FlopCount d = checked(dim, "dim", false);
  const FlopCount n = checked(entities, "entities", true);
  return 2 * d * d * (2 * n + 1) + 2 * d * n;
}

FlopsReport overhead_report(int64_t layers, int64_t dim, int64_t tokens, int64_t entities) {
  FlopsReport r;
  r.flops_bert = flops_bert(layers, dim, tokens);
  r.flops_kpr_att = flops_kpr_att(dim, entities);
  r.total = r.flops_bert + r.flops_kpr_att;
  r.overhead_fraction = static_cast<double>(r.flops_kpr_att) / static_cast<double>(r.total);
  return r;
}

std::string FlopsReport::overhead_percent() const {
  // Hundredths of a percent, rounded half-up in exact integer arithmetic.
  const FlopCount hundredths = (flops_kpr_att * 20000 + total) / (2 * total);
  const auto whole = static_cast<uint64_t>(hundredths / 100);
  const auto frac = static_cast<uint64_t>(hundredths % 100);
  return std::to_string(whole) + "." + (frac < 10 ? "0" : "") + std::to_string(frac) + "%";
}

std::string FlopsReport::to_json() const {
  nlohmann::json j = {{"flops_bert", count_json(flops_bert)},
                      {"flops_kpr_att", count_json(flops_kpr_att)},
                      {"total", count_json(total)},
                      {"overhead_fraction", overhead_fraction},
                      {"overhead_percent", overhead_percent()}};
  return j.dump();
}

std::string FlopsReport::summary() const {
  return "encoder " + to_string(flops_bert) + " FLOPs + attention " + to_string(flops_kpr_att) +
         " FLOPs = " + to_string(total) + " FLOPs; attention share " + overhead_percent();
}

}  // namespace kpr
