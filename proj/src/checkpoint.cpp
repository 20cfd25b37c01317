// Copyright 2026 The papool Authors
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

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "papool/errors.hpp"
#include "papool/train.hpp"

namespace papool {

namespace {

constexpr char kMagic[4] = {'P', 'A', 'P', 'K'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint32_t u32() {
    const auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, 4);
  out.push_back(static_cast<char>(kCheckpointVersion));
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  const auto meta = ckpt.metadata.dump();
  put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(4) != std::string_view(kMagic, 4)) throw FormatError("not a checkpoint (bad magic)");
  const auto version = static_cast<std::uint8_t>(in.take(1)[0]);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto count = in.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(in.take(in.u32()));
    const auto rank = in.u32();
    if (rank > 8) throw FormatError("tensor '" + name + "' has implausible rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) d = in.u32();
    const auto n = shape_numel(shape);
    if (n > bytes.size()) throw FormatError("checkpoint truncated in tensor '" + name + "'");
    std::vector<double> values(n);
    for (auto& v : values) v = static_cast<double>(std::bit_cast<float>(in.u32()));
    ckpt.tensors.emplace_back(std::move(name), Tensor::from(std::move(shape), std::move(values)));
  }
  const auto meta = in.take(in.u32());
  if (!in.done()) throw FormatError("trailing bytes after checkpoint metadata");
  try {
    ckpt.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint metadata: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot write checkpoint '" + path.string() + "'");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw ValidationError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open checkpoint '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return deserialize_checkpoint(ss.str());
}

Checkpoint make_checkpoint(Model& model, const TrainState& state, nlohmann::json metadata) {
  Checkpoint ckpt;
  auto named = model.named_parameters();
  for (auto& [name, t] : named) ckpt.tensors.emplace_back("param/" + name, t.detach());
  const auto& opt = state.optimizer;
  for (std::size_t i = 0; i < opt.first.size() && i < named.size(); ++i) {
    ckpt.tensors.emplace_back("opt/m/" + named[i].first, Tensor::from(named[i].second.shape(), opt.first[i]));
  }
  for (std::size_t i = 0; i < opt.second.size() && i < named.size(); ++i) {
    ckpt.tensors.emplace_back("opt/v/" + named[i].first, Tensor::from(named[i].second.shape(), opt.second[i]));
  }
  metadata["epoch"] = state.epoch;
  metadata["optimizer_step"] = opt.step;
  ckpt.metadata = std::move(metadata);
  return ckpt;
}

void restore_checkpoint(const Checkpoint& ckpt, Model& model, TrainState& state) {
  auto named = model.named_parameters();
  for (auto& [name, t] : named) {
    const Tensor* saved = ckpt.find("param/" + name);
    if (!saved) throw FormatError("checkpoint lacks parameter '" + name + "'");
    if (saved->shape() != t.shape()) {
      throw FormatError("parameter '" + name + "' has shape " + shape_to_string(saved->shape()) + ", model expects " +
                        shape_to_string(t.shape()));
    }
    std::copy(saved->data().begin(), saved->data().end(), t.mutable_data().begin());
  }
  state = TrainState{};
  state.epoch = ckpt.metadata.value("epoch", std::size_t{0});
  state.optimizer.step = ckpt.metadata.value("optimizer_step", std::uint64_t{0});
  for (const auto* prefix : {"opt/m/", "opt/v/"}) {
    auto& buffers = std::string(prefix) == "opt/m/" ? state.optimizer.first : state.optimizer.second;
    if (!ckpt.find(prefix + named.front().first)) continue;
    for (auto& [name, t] : named) {
      const Tensor* saved = ckpt.find(prefix + name);
      if (!saved || saved->numel() != t.numel()) throw FormatError("optimizer state incomplete for '" + name + "'");
      buffers.push_back(saved->to_vector());
    }
  }
}

}  // namespace papool
