#include "nsx/tensor/parameters.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "nsx/util/byte_io.hpp"

namespace nsx {

namespace {
constexpr char kMagic[] = "NSYNCKPT";
constexpr std::uint16_t kVersion = 1;
}  // namespace

Tensor ParameterStore::add(std::string name, Tensor tensor) {
  if (name.empty() || name.size() > 0xFFFF) throw std::invalid_argument("parameter: invalid name");
  if (contains(name)) throw std::invalid_argument("parameter: duplicate name '" + name + "'");
  tensor.set_requires_grad(true);
  params_.push_back({std::move(name), tensor});
  return tensor;
}

bool ParameterStore::contains(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
}

const Tensor& ParameterStore::get(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw std::out_of_range("parameter: no parameter named '" + std::string(name) + "'");
}

std::vector<Tensor> ParameterStore::select(std::span<const std::string> prefixes) const {
  std::vector<Tensor> out;
  for (const auto& p : params_) {
    for (const auto& prefix : prefixes) {
      if (p.name.starts_with(prefix)) {
        out.push_back(p.tensor);
        break;
      }
    }
  }
  return out;
}

std::vector<Tensor> ParameterStore::all() const {
  std::vector<Tensor> out;
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  if (other.params_.size() != params_.size()) {
    throw std::invalid_argument("parameter: stores differ in size");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& src = other.params_[i];
    auto& dst = params_[i];
    if (src.name != dst.name || src.tensor.shape() != dst.tensor.shape()) {
      throw std::invalid_argument("parameter: mismatch at '" + dst.name + "'");
    }
    std::ranges::copy(src.tensor.data(), dst.tensor.mutable_data().begin());
  }
}

std::vector<std::uint8_t> ParameterStore::to_bytes() const {
  ByteWriter out;
  out.str(std::string(kMagic, 8));
  out.u16(kVersion);
  out.u32(static_cast<std::uint32_t>(params_.size()));
  for (const auto& p : params_) {
    out.u16(static_cast<std::uint16_t>(p.name.size()));
    out.str(p.name);
    const Shape& shape = p.tensor.shape();
    out.u8(static_cast<std::uint8_t>(shape.size()));
    for (Index extent : shape) out.u32(static_cast<std::uint32_t>(extent));
    for (float v : p.tensor.data()) out.f32(v);
  }
  return out.take();
}

void ParameterStore::load_bytes(std::span<const std::uint8_t> bytes) {
  try {
    ByteReader in(bytes);
    if (in.str(8) != std::string(kMagic, 8)) throw CheckpointError("checkpoint: bad magic");
    const auto version = in.u16();
    if (version != kVersion) throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
    const auto count = in.u32();
    if (count != params_.size()) {
      throw CheckpointError("checkpoint: holds " + std::to_string(count) + " parameters, model has " +
                            std::to_string(params_.size()));
    }
    // Parse everything before touching the model so a bad file leaves it intact.
    std::vector<std::vector<float>> values(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto len = in.u16();
      const std::string name = in.str(len);
      const Parameter& p = params_[i];
      if (name != p.name) throw CheckpointError("checkpoint: expected '" + p.name + "', found '" + name + "'");
      Shape shape(in.u8());
      for (auto& extent : shape) extent = in.u32();
      if (shape != p.tensor.shape()) {
        throw CheckpointError("checkpoint: shape " + to_string(shape) + " for '" + name + "', model has " +
                              to_string(p.tensor.shape()));
      }
      values[i].resize(static_cast<std::size_t>(numel(shape)));
      for (auto& v : values[i]) v = in.f32();
    }
    if (in.remaining() != 0) throw CheckpointError("checkpoint: trailing bytes");
    for (std::uint32_t i = 0; i < count; ++i) {
      std::ranges::copy(values[i], params_[i].tensor.mutable_data().begin());
    }
  } catch (const TruncatedInput&) {
    throw CheckpointError("checkpoint: truncated");
  }
}

void ParameterStore::save(const std::filesystem::path& path) const {
  const auto bytes = to_bytes();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("checkpoint: cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("checkpoint: write failed for " + path.string());
}

void ParameterStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  load_bytes(bytes);
}

}  // namespace nsx
