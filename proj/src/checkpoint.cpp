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

#include "feedalign/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "binary_io.hpp"

namespace feedalign {
namespace {

template <typename T>
void put_tensor(std::ostream& os, const Tensor<T>& t) {
  io::put_u32(os, t.rank());
  for (auto d : t.shape()) io::put_u32(os, d);
  io::put_span(os, t.values());
}

template <typename T>
void get_tensor_into(std::istream& is, Tensor<T>& t, const std::string& what) {
  const auto rank = io::get<std::uint32_t>(is);
  Shape shape(rank);
  for (auto& d : shape) d = io::get<std::uint32_t>(is);
  if (shape != t.shape()) {
    throw FormatError(what + ": checkpoint holds " + shape_str(shape) + ", network expects " +
                      shape_str(t.shape()));
  }
  io::get_span(is, t.values());
}

template <typename T>
void put_feedback(std::ostream& os, const Network<T>& net) {
  std::uint32_t count = 0;
  for (const auto& slot : net.feedback()) count += std::holds_alternative<std::monostate>(slot) ? 0 : 1;
  io::put(os, count);
  for (const auto& slot : net.feedback()) {
    if (const auto* d = std::get_if<FeedbackMatrix<T>>(&slot)) write_feedback(os, *d);
    if (const auto* b = std::get_if<BinaryFeedbackMatrix>(&slot)) write_feedback(os, *b);
  }
}

}  // namespace

template <typename T>
void save_checkpoint(std::ostream& os, Network<T>& net, const TrainState<T>* state) {
  os.write(kCheckpointMagic, 4);
  io::put(os, kCheckpointVersion);
  io::put_u32(os, net.layers().size());
  io::put<std::uint8_t>(os, sizeof(T));
  for (auto& layer : net.layers()) {
    io::put(os, static_cast<std::uint8_t>(layer->kind()));
    const auto tensors = layer->persistent();
    io::put_u32(os, tensors.size());
    for (const auto* t : tensors) put_tensor(os, *t);
  }
  put_feedback(os, net);
  io::put<std::uint8_t>(os, state ? 1 : 0);
  if (state) {
    io::put<std::uint64_t>(os, state->epoch);
    io::put<std::uint64_t>(os, state->step);
    io::put<std::uint64_t>(os, state->seed);
    io::put_u32(os, state->velocity.size());
    for (const auto& v : state->velocity) put_tensor(os, v);
  }
  if (!os) throw FormatError("failed writing checkpoint");
}

template <typename T>
void save_checkpoint(const std::filesystem::path& file, Network<T>& net, const TrainState<T>* state) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint " + file.string());
  save_checkpoint(os, net, state);
}

template <typename T>
void load_checkpoint(std::istream& is, Network<T>& net, TrainState<T>* state) {
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != std::string(kCheckpointMagic, 4)) {
    throw FormatError("not a checkpoint (bad magic)");
  }
  if (const auto v = io::get<std::uint32_t>(is); v != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(v));
  }
  const auto layer_count = io::get<std::uint32_t>(is);
  if (layer_count != net.layers().size()) {
    throw FormatError("checkpoint has " + std::to_string(layer_count) + " layers, network has " +
                      std::to_string(net.layers().size()));
  }
  if (const auto width = io::get<std::uint8_t>(is); width != sizeof(T)) {
    throw FormatError("checkpoint stores " + std::to_string(width) + "-byte values, network uses " +
                      std::to_string(sizeof(T)));
  }
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    auto& layer = net.layers()[i];
    const std::string what = "layer " + std::to_string(i) + " (" + layer->describe() + ")";
    if (io::get<std::uint8_t>(is) != static_cast<std::uint8_t>(layer->kind())) {
      throw FormatError(what + ": type tag mismatch");
    }
    auto tensors = layer->persistent();
    if (io::get<std::uint32_t>(is) != tensors.size()) throw FormatError(what + ": tensor count mismatch");
    for (auto* t : tensors) get_tensor_into(is, *t, what);
  }
  const auto sections = io::get<std::uint32_t>(is);
  std::size_t slot = 0;
  for (std::uint32_t s = 0; s < sections; ++s) {
    while (slot < net.feedback().size() && std::holds_alternative<std::monostate>(net.feedback()[slot])) ++slot;
    if (slot >= net.feedback().size()) throw FormatError("checkpoint holds more feedback sections than the network");
    const auto tag = io::get<std::uint8_t>(is);
    const std::size_t rows = io::get<std::uint32_t>(is), cols = io::get<std::uint32_t>(is);
    if (tag == 0) {
      Tensor<T> values({rows, cols});
      io::get_span(is, values.values());
      const auto origin = std::get<FeedbackMatrix<T>>(net.feedback()[slot]).origin();
      net.set_feedback(slot, FeedbackMatrix<T>(std::move(values), origin));
    } else if (tag == 1) {
      std::vector<std::uint8_t> bits(packed_size_bytes(rows, cols));
      io::get_span(is, std::span<std::uint8_t>(bits));
      net.set_feedback(slot, BinaryFeedbackMatrix(rows, cols, std::move(bits)));
    } else {
      throw FormatError("unknown feedback section tag " + std::to_string(tag));
    }
    ++slot;
  }
  const bool has_state = io::get<std::uint8_t>(is) != 0;
  if (has_state && state) {
    state->epoch = io::get<std::uint64_t>(is);
    state->step = io::get<std::uint64_t>(is);
    state->seed = io::get<std::uint64_t>(is);
    const auto count = io::get<std::uint32_t>(is);
    auto params = net.params();
    if (count != 0 && count != params.size()) throw FormatError("velocity count mismatch");
    state->velocity.clear();
    for (std::uint32_t i = 0; i < count; ++i) {
      Tensor<T> v(params[i]->value.shape());
      get_tensor_into(is, v, "velocity " + std::to_string(i));
      state->velocity.push_back(std::move(v));
    }
  }
}

template <typename T>
std::string feedback_bytes(const Network<T>& net) {
  std::ostringstream os(std::ios::binary);
  put_feedback(os, net);
  return os.str();
}

#define FEEDALIGN_INSTANTIATE(T)                                                               \
  template void save_checkpoint(std::ostream&, Network<T>&, const TrainState<T>*);             \
  template void save_checkpoint(const std::filesystem::path&, Network<T>&, const TrainState<T>*); \
  template void load_checkpoint(std::istream&, Network<T>&, TrainState<T>*);                   \
  template std::string feedback_bytes(const Network<T>&);

FEEDALIGN_INSTANTIATE(float)
FEEDALIGN_INSTANTIATE(double)

#undef FEEDALIGN_INSTANTIATE

}  // namespace feedalign
