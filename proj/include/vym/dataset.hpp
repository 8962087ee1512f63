#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vym/preprocess.hpp"

namespace vym {

enum class Cordon : char { kNorth = 'N', kSouth = 'S' };
enum class Side : char { kEast = 'E', kWest = 'W' };

/// One photograph of a cordon: which side of the row and which camera.
struct View {
  Side side = Side::kEast;
  int camera = 1;
  bool operator==(const View&) const = default;
};

/// The four views in their fixed channel order (E,1), (E,2), (W,1), (W,2).
inline constexpr std::array<View, 4> kViewOrder = {
    View{Side::kEast, 1}, View{Side::kEast, 2}, View{Side::kWest, 1}, View{Side::kWest, 2}};

std::size_t view_index(View v);
/// "E1", "W2", ...
std::string view_code(View v);
View parse_view_code(const std::string& code);

/// Image identifier such as "33NE1": plant, cordon, side, camera.
struct ImageId {
  int plant = 0;
  Cordon cordon = Cordon::kNorth;
  View view;

  std::string format() const;
  bool operator==(const ImageId&) const = default;
};

ImageId parse_image_id(const std::string& text);

struct CordonExample {
  int plant = 0;
  Cordon cordon = Cordon::kNorth;
  std::array<std::filesystem::path, 4> images;  // indexed by view_index
  double weight_g = 0.0;

  std::string key() const;  // e.g. "33N"
};

struct Manifest {
  std::vector<CordonExample> examples;
  CanvasSize canvas;
};

/// CSV with header plant,cordon,img_E1,img_E2,img_W1,img_W2,weight_g.
/// Paths are resolved relative to the manifest's directory; canvas is the
/// largest crop width and height over every referenced image.
Manifest load_manifest(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const std::vector<CordonExample>& examples);

/// Plant-level fold assignment: both cordons of a plant always share a fold.
struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::map<int, std::size_t> plant_fold;

  std::size_t fold_of(const CordonExample& e) const;
  /// Indices into `examples` of fold `f`.
  std::vector<std::size_t> test_indices(const std::vector<CordonExample>& examples, std::size_t f) const;
  std::vector<std::size_t> train_indices(const std::vector<CordonExample>& examples, std::size_t f) const;
  /// Stable digest of k and the assignments, used to pair reports.
  std::string fingerprint() const;

  nlohmann::json to_json() const;
  static FoldPlan from_json(const nlohmann::json& j);
};

/// Shuffles distinct plants by seed and deals them round-robin to k folds.
FoldPlan make_folds(const std::vector<CordonExample>& examples, std::size_t k, std::uint64_t seed);

/// Plant-level split of the given example indices. Validation receives
/// round(fraction * plants) plants.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_validation(
    const std::vector<CordonExample>& examples, const std::vector<std::size_t>& indices,
    double fraction, std::uint64_t seed);

}  // namespace vym
