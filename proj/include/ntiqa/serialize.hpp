#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ntiqa/tensor.hpp"

namespace ntiqa {

// Shared binary container for named tensors.
//
//   magic "NTIQ"
//   u32 LE  format version (currently 1)
//   u32 LE  tensor count
//   per tensor:
//     u32 LE  name byte length, then UTF-8 name
//     u32 LE  rank
//     u64 LE  dims[rank]
//     f64 LE  data, row-major
constexpr uint32_t kTensorFormatVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

std::vector<uint8_t> encode_tensors(const NamedTensors& tensors);
NamedTensors decode_tensors(const uint8_t* data, size_t size,
                            const std::string& context);

void save_tensors(const std::string& path, const NamedTensors& tensors);
NamedTensors load_tensors(const std::string& path);

// Single-tensor convenience (sample images etc.).
void save_tensor(const std::string& path, const std::string& name,
                 const Tensor& t);
Tensor load_tensor(const std::string& path, const std::string& name);

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const void* data, size_t size);

}  // namespace ntiqa
