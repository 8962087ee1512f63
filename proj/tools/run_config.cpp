#include "run_config.hpp"

#include <cctype>
#include <fstream>

namespace vym::cli {

using nlohmann::json;

json preprocess_to_json(const PreprocessConfig& c) {
  return {{"target_side", c.target_side},
          {"pad_rgb", {c.pad_rgb[0], c.pad_rgb[1], c.pad_rgb[2]}},
          {"reference_image", c.reference_image.generic_string()}};
}

PreprocessConfig preprocess_from_json(const json& j, PreprocessConfig c) {
  if (j.contains("target_side")) c.target_side = j.at("target_side").get<std::size_t>();
  if (j.contains("pad_rgb")) {
    const auto v = j.at("pad_rgb").get<std::vector<int>>();
    if (v.size() != 3) throw UsageError("preprocess.pad_rgb needs three values");
    for (std::size_t i = 0; i < 3; ++i) {
      if (v[i] < 0 || v[i] > 255) throw UsageError("preprocess.pad_rgb values must be in [0, 255]");
      c.pad_rgb[i] = static_cast<std::uint8_t>(v[i]);
    }
  }
  if (j.contains("reference_image")) c.reference_image = j.at("reference_image").get<std::string>();
  return c;
}

json RunConfig::to_json() const {
  json synth_j = synth.to_json();
  synth_j.erase("seed");
  json train_j = train.to_json();
  train_j.erase("seed");
  return {{"seed", seed},
          {"mode", mode},
          {"folds", folds},
          {"n_examples", n_examples},
          {"synth", synth_j},
          {"preprocess", preprocess_to_json(preprocess)},
          {"model", model.to_json()},
          {"train", train_j},
          {"paths",
           {{"manifest", paths.manifest.generic_string()},
            {"out", paths.out.generic_string()},
            {"cache", paths.cache.generic_string()}}}};
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  try {
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("mode")) c.mode = j.at("mode").get<std::string>();
    if (j.contains("folds")) c.folds = j.at("folds").get<std::size_t>();
    if (j.contains("n_examples")) c.n_examples = j.at("n_examples").get<std::size_t>();
    if (j.contains("synth")) c.synth = SynthConfig::from_json(j.at("synth"), c.synth);
    if (j.contains("preprocess")) c.preprocess = preprocess_from_json(j.at("preprocess"), c.preprocess);
    if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"), c.model);
    if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"), c.train);
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      if (p.contains("manifest")) c.paths.manifest = p.at("manifest").get<std::string>();
      if (p.contains("out")) c.paths.out = p.at("out").get<std::string>();
      if (p.contains("cache")) c.paths.cache = p.at("cache").get<std::string>();
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  c.synth.seed = c.seed;
  c.train.seed = c.seed;
  return c;
}

namespace {

// Every key in `doc` must already exist in `schema`, recursively.
void check_known_keys(const json& doc, const json& schema, const std::string& prefix) {
  if (!doc.is_object()) throw UsageError("config: expected an object at '" + prefix + "'");
  for (const auto& [key, value] : doc.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!schema.contains(key)) throw UsageError("config: unknown key '" + path + "'");
    if (schema.at(key).is_object()) check_known_keys(value, schema.at(key), path);
  }
}

}  // namespace

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw UsageError("--set expects section.key=value, got '" + assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) throw UsageError("--set: unknown key '" + path + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;  // bare strings need no quotes
  if (node->is_string() && !value.is_string()) value = text;
  *node = value;
}

RunConfig resolve_config(const ConfigSources& sources) {
  const json defaults = RunConfig{}.to_json();
  json doc = defaults;
  if (sources.seed_env) {
    try {
      std::size_t used = 0;
      if (sources.seed_env->empty() || !std::isdigit(static_cast<unsigned char>(sources.seed_env->front()))) {
        throw std::invalid_argument("seed");
      }
      const auto v = std::stoull(*sources.seed_env, &used);
      if (used != sources.seed_env->size()) throw std::invalid_argument("seed");
      doc["seed"] = v;
    } catch (const std::exception&) {
      throw UsageError("VYM_SEED must be a non-negative integer, got '" + *sources.seed_env + "'");
    }
  }
  if (sources.file) {
    std::ifstream in(*sources.file);
    if (!in) throw UsageError("cannot open config file " + sources.file->string());
    const json file = json::parse(in, nullptr, false);
    if (file.is_discarded()) throw UsageError("config file " + sources.file->string() + " is not valid JSON");
    check_known_keys(file, defaults, "");
    doc.merge_patch(file);
  }
  for (const auto& o : sources.overrides) apply_override(doc, o);
  if (sources.seed_flag) doc["seed"] = *sources.seed_flag;

  RunConfig c = RunConfig::from_json(doc);
  try {
    c.preprocess.validate();
    if (c.model.input_side != c.preprocess.target_side) c.model = c.model.with_input_side(c.preprocess.target_side);
    c.model.validate();
    c.synth.validate();
    c.train.validate();
    Mode::parse(c.mode);
  } catch (const std::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  if (c.folds < 2) throw UsageError("config: folds must be >= 2");
  return c;
}

}  // namespace vym::cli
