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

#include "feedalign/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace feedalign {
namespace {

std::size_t initial_limit() {
  if (const char* env = std::getenv("FEEDALIGN_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      // fall through to the hardware default
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

std::atomic<std::size_t>& limit_storage() {
  static std::atomic<std::size_t> limit{initial_limit()};
  return limit;
}

}  // namespace

std::size_t thread_limit() { return limit_storage().load(std::memory_order_relaxed); }

void set_thread_limit(std::size_t n) {
  limit_storage().store(n == 0 ? 1 : n, std::memory_order_relaxed);
}

}  // namespace feedalign
