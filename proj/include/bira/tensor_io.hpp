#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "bira/tensor.hpp"

namespace bira {

// Named-tensor container, little-endian binary:
//   magic "BTNS" | version u8 (=1) | count u32
//   per entry: name_len u16 | name bytes | ndim u8 | ndim x dim u32 | numel x f64
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void write_named_tensors(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors read_named_tensors(const std::filesystem::path& path);

}  // namespace bira
