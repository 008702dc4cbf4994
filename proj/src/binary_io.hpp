// Copyright 2026 The feedalign Authors. All Rights Reserved.
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

#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>

#include "feedalign/errors.hpp"

// Raw little-endian writers/readers shared by the checkpoint code.
namespace feedalign::io {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename V>
void put(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

inline void put_u32(std::ostream& os, std::size_t v) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw FormatError("value " + std::to_string(v) + " does not fit a u32 field");
  }
  put(os, static_cast<std::uint32_t>(v));
}

template <typename V>
void put_span(std::ostream& os, std::span<const V> values) {
  os.write(reinterpret_cast<const char*>(values.data()),
           static_cast<std::streamsize>(values.size_bytes()));
}

template <typename V>
V get(std::istream& is) {
  V v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(V))) {
    throw FormatError("unexpected end of checkpoint");
  }
  return v;
}

template <typename V>
void get_span(std::istream& is, std::span<V> out) {
  if (!is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size_bytes()))) {
    throw FormatError("unexpected end of checkpoint");
  }
}

}  // namespace feedalign::io
