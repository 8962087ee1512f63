#include "vym/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "vym/error.hpp"

namespace vym {

namespace {
constexpr const char* kFormat = "vym-params-v1";
}

std::string encode_double_hex(double v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(v)));
  return buf;
}

double decode_double_hex(const std::string& s) {
  if (s.size() != 16) throw DataError(DataError::Kind::kMalformed, "bad hex double '" + s + "'");
  std::uint64_t bits = 0;
  for (char c : s) {
    bits <<= 4;
    if (c >= '0' && c <= '9') {
      bits |= static_cast<std::uint64_t>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      bits |= static_cast<std::uint64_t>(c - 'a' + 10);
    } else {
      throw DataError(DataError::Kind::kMalformed, "bad hex double '" + s + "'");
    }
  }
  return std::bit_cast<double>(bits);
}

void save_parameters(const std::filesystem::path& path, std::span<const Parameter> params) {
  nlohmann::json doc;
  doc["format"] = kFormat;
  auto& list = doc["parameters"] = nlohmann::json::array();
  for (const auto& p : params) {
    nlohmann::json entry;
    entry["name"] = p.name;
    entry["shape"] = p.tensor.shape();
    auto& data = entry["data"] = nlohmann::json::array();
    for (double v : p.tensor.data()) data.push_back(encode_double_hex(v));
    list.push_back(std::move(entry));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataError::Kind::kIo, "cannot write checkpoint " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw DataError(DataError::Kind::kIo, "failed writing checkpoint " + path.string());
}

std::map<std::string, Tensor> load_parameters(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::kMissingFile, "cannot open checkpoint " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataError::Kind::kMalformed, path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != kFormat) {
    throw DataError(DataError::Kind::kMalformed, path.string() + ": not a parameter checkpoint");
  }
  std::map<std::string, Tensor> result;
  for (const auto& entry : doc.at("parameters")) {
    const auto name = entry.at("name").get<std::string>();
    auto shape = entry.at("shape").get<Shape>();
    std::vector<double> values;
    for (const auto& h : entry.at("data")) values.push_back(decode_double_hex(h.get<std::string>()));
    if (!result.emplace(name, Tensor::from(std::move(shape), std::move(values))).second) {
      throw DataError(DataError::Kind::kMalformed, path.string() + ": duplicate parameter " + name);
    }
  }
  return result;
}

void assign_parameters(std::span<Parameter> params, const std::map<std::string, Tensor>& values) {
  for (auto& p : params) {
    auto it = values.find(p.name);
    if (it == values.end()) {
      throw DataError(DataError::Kind::kMalformed, "checkpoint lacks parameter " + p.name);
    }
    if (it->second.shape() != p.tensor.shape()) {
      throw ShapeError("checkpoint parameter " + p.name + " has shape " +
                       shape_str(it->second.shape()) + ", model expects " +
                       shape_str(p.tensor.shape()));
    }
    auto dst = p.tensor.mutable_data();
    const auto src = it->second.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace vym
