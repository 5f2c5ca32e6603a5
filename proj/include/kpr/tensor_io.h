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

#ifndef KPR_TENSOR_IO_H_
#define KPR_TENSOR_IO_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace kpr {

// Binary tensor container, all fields little-endian:
//   "KPRE" | version u16 | count u64 | dim u32 | reference_norm f64 |
//   count x (id u64, dim x f32)
// Values are widened to double on read.
struct TensorContainer {
  static constexpr char kMagic[4] = {'K', 'P', 'R', 'E'};
  static constexpr uint16_t kVersion = 1;

  uint32_t dim = 0;
  double reference_norm = 0.0;
  std::vector<std::pair<uint64_t, std::vector<double>>> records;
};

std::string serialize_container(const TensorContainer &container);
TensorContainer parse_container(const std::string &bytes);

// Written to a temporary sibling file and renamed into place.
void write_container(const std::string &path, const TensorContainer &container);
TensorContainer read_container(const std::string &path);

// Whole-file helpers shared by the on-disk formats.
std::string read_file(const std::string &path);
void write_file_atomic(const std::string &path, const std::string &contents);

}  // namespace kpr

#endif  // KPR_TENSOR_IO_H_
