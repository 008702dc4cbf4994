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

// Flat binary checkpoint, all integers and values little-endian:
//
//   "FDAL" | version u32 | layer count u32 | scalar width u8 (4 or 8)
//   per layer:   type tag u8 | tensor count u32 |
//                per tensor: rank u32 | extents u32 x rank | values
//   feedback:    section count u32 | sections (see write_feedback)
//   train state: present u8 | epoch u64 | step u64 | seed u64 |
//                velocity count u32 | tensors as above

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "feedalign/network.hpp"
#include "feedalign/trainer.hpp"

namespace feedalign {

inline constexpr char kCheckpointMagic[4] = {'F', 'D', 'A', 'L'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void save_checkpoint(std::ostream& os, Network<T>& net, const TrainState<T>* state);
template <typename T>
void save_checkpoint(const std::filesystem::path& file, Network<T>& net, const TrainState<T>* state);

/// Restores parameters, buffers, feedback and (if `state` is given and the
/// file holds one) optimizer state into a network of identical layout.
/// FormatError on any mismatch.
template <typename T>
void load_checkpoint(std::istream& is, Network<T>& net, TrainState<T>* state);

/// Bytes of every feedback section exactly as the checkpoint stores them.
template <typename T>
std::string feedback_bytes(const Network<T>& net);

}  // namespace feedalign
