#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "vym/model.hpp"
#include "vym/preprocess.hpp"
#include "vym/synth.hpp"
#include "vym/train.hpp"

namespace vym::cli {

/// Bad flags, unknown config keys or unparseable override values.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Paths {
  std::filesystem::path manifest;
  std::filesystem::path out;
  std::filesystem::path cache;
};

/// Everything a command needs, merged from defaults, an optional JSON file
/// and `section.key=value` overrides. One master seed drives data
/// generation, fold assignment, initialisation and shuffling.
struct RunConfig {
  SynthConfig synth;
  PreprocessConfig preprocess;
  ModelConfig model;
  TrainConfig train;
  Paths paths;
  std::string mode = "mtl";
  std::size_t folds = 6;
  std::size_t n_examples = 160;
  std::uint64_t seed = 7;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

struct ConfigSources {
  std::optional<std::filesystem::path> file;
  std::vector<std::string> overrides;  // "section.key=value"
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::string> seed_env;  // VYM_SEED
};

/// Merges the sources onto the defaults and re-derives dependent fields:
/// the model input side follows preprocess.target_side, and the sub-config
/// seeds follow the master seed. Flags beat the file, the file beats the
/// environment, which beats the default.
RunConfig resolve_config(const ConfigSources& sources);

/// Applies one override to a RunConfig JSON document, rejecting unknown keys.
void apply_override(nlohmann::json& doc, const std::string& assignment);

nlohmann::json preprocess_to_json(const PreprocessConfig& c);
PreprocessConfig preprocess_from_json(const nlohmann::json& j, PreprocessConfig base);

}  // namespace vym::cli
