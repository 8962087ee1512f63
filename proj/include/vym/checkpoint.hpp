#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>

#include "vym/optim.hpp"
#include "vym/tensor.hpp"

namespace vym {

/// Parameter checkpoint: a JSON document listing name, shape and the
/// elements as 16-digit hex IEEE-754 bit patterns, so values round-trip
/// bitwise.
void save_parameters(const std::filesystem::path& path, std::span<const Parameter> params);

/// Loads every tensor in a checkpoint, keyed by parameter name. Loaded
/// tensors do not require grad.
std::map<std::string, Tensor> load_parameters(const std::filesystem::path& path);

/// Writes loaded values into matching parameters; every parameter must be
/// present with an identical shape.
void assign_parameters(std::span<Parameter> params, const std::map<std::string, Tensor>& values);

std::string encode_double_hex(double v);
double decode_double_hex(const std::string& s);

}  // namespace vym
