#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nsx/tensor/tensor.hpp"

namespace nsx {

struct Parameter {
  std::string name;  // dotted path, e.g. "analysis.conv0.weight"
  Tensor tensor;
};

/// Ordered, name-unique collection of trainable tensors.
class ParameterStore {
 public:
  /// Registers a tensor (marked requires_grad) and returns the stored handle.
  Tensor add(std::string name, Tensor tensor);

  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t size() const { return params_.size(); }
  const Tensor& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  /// Handles whose names start with any of the given prefixes.
  std::vector<Tensor> select(std::span<const std::string> prefixes) const;
  std::vector<Tensor> all() const;

  void zero_grad();

  /// Copies values (not handles) from a store with identical names/shapes.
  void copy_values_from(const ParameterStore& other);

  /// Checkpoint bytes: magic "NSYNCKPT", u16 version, u32 count, then per
  /// parameter u16 name length, name, u8 rank, u32 extents, f32 data; all
  /// little-endian.
  std::vector<std::uint8_t> to_bytes() const;
  /// Loads values into the already-registered parameters. Names, order and
  /// shapes must match exactly.
  void load_bytes(std::span<const std::uint8_t> bytes);

  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  std::vector<Parameter> params_;
};

/// Error reading or parsing a checkpoint.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nsx
