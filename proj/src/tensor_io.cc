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

#include "kpr/tensor_io.h"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kpr/error.h"

namespace kpr {

namespace {

template <typename T>
void put_le(std::string &out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, uint64_t,
                               std::conditional_t<sizeof(T) == 4, uint32_t, uint16_t>>;
  U bits = std::bit_cast<U>(value);
  for (size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
}

class Reader {
 public:
  explicit Reader(const std::string &bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, uint64_t,
                                 std::conditional_t<sizeof(T) == 4, uint32_t, uint16_t>>;
    if (pos_ + sizeof(U) > bytes_.size()) throw InputError("truncated tensor container");
    U bits = 0;
    for (size_t i = 0; i < sizeof(U); ++i) {
      bits |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }

  std::string take(size_t n) {
    if (pos_ + n > bytes_.size()) throw InputError("truncated tensor container");
    std::string out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string &bytes_;
  size_t pos_ = 0;
};

}  // namespace

std::string serialize_container(const TensorContainer &container) {
  std::string out(TensorContainer::kMagic, 4);
  put_le<uint16_t>(out, TensorContainer::kVersion);
  put_le<uint64_t>(out, container.records.size());
  put_le<uint32_t>(out, container.dim);
  put_le<double>(out, container.reference_norm);
  for (const auto &[id, values] : container.records) {
    if (values.size() != container.dim) {
      throw ShapeError("record " + std::to_string(id) + " has length " +
                       std::to_string(values.size()) + ", container dim is " +
                       std::to_string(container.dim));
    }
    put_le<uint64_t>(out, id);
    for (double v : values) {
      const float f = static_cast<float>(v);
      if (!std::isfinite(f)) {
        throw NumericError("record " + std::to_string(id) + " is not finite in f32");
      }
      put_le<float>(out, f);
    }
  }
  return out;
}

TensorContainer parse_container(const std::string &bytes) {
  Reader in(bytes);
  if (in.take(4) != std::string(TensorContainer::kMagic, 4)) {
    throw InputError("bad tensor container magic");
  }
  const auto version = in.get<uint16_t>();
  if (version != TensorContainer::kVersion) {
    throw InputError("unsupported tensor container version " + std::to_string(version));
  }
  TensorContainer c;
  const auto count = in.get<uint64_t>();
  c.dim = in.get<uint32_t>();
  c.reference_norm = in.get<double>();
  c.records.reserve(count);
  for (uint64_t r = 0; r < count; ++r) {
    const auto id = in.get<uint64_t>();
    std::vector<double> values(c.dim);
    for (auto &v : values) v = static_cast<double>(in.get<float>());
    c.records.emplace_back(id, std::move(values));
  }
  if (!in.done()) throw InputError("trailing bytes in tensor container");
  return c;
}

void write_container(const std::string &path, const TensorContainer &container) {
  write_file_atomic(path, serialize_container(container));
}

TensorContainer read_container(const std::string &path) {
  return parse_container(read_file(path));
}

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string &path, const std::string &contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw InputError("short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InputError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

}  // namespace kpr
