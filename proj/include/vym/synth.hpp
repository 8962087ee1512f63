#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"
#include "vym/dataset.hpp"
#include "vym/image.hpp"
#include "vym/random.hpp"

namespace vym {

/// Synthetic grape scene generator. World units are centimetres: x runs
/// along the cordon, y is vertical (up), z points from the west side of the
/// row to the east side.
struct SynthConfig {
  int clusters_min = 6;
  int clusters_max = 14;
  int berries_per_cluster_min = 50;
  int berries_per_cluster_max = 98;
  double berry_radius_min = 0.5;
  double berry_radius_max = 0.9;
  double density_g_per_cm3 = 1.05;
  double cordon_length_min = 50.0;
  double cordon_length_max = 80.0;
  int leaves_min = 3;
  int leaves_max = 7;
  double leaf_size_min = 3.0;  // semi-axis, cm
  double leaf_size_max = 8.0;
  double camera_yaw_deg = 15.0;
  double pixel_noise = 2.0;  // std-dev of additive noise, 8-bit levels
  std::size_t image_width = 240;  // full frame before cropping
  std::size_t image_height = 96;
  std::uint64_t seed = 7;

  void validate() const;
  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j, SynthConfig base);
  static SynthConfig from_json(const nlohmann::json& j) { return from_json(j, SynthConfig{}); }
};

struct Berry {
  std::array<double, 3> center{};
  double radius = 0.0;
};

/// Opaque ellipse painted over one view, in view-plane centimetres.
struct Leaf {
  double u = 0.0, v = 0.0;
  double semi_major = 0.0, semi_minor = 0.0;
  double angle = 0.0;
  double tint = 0.0;  // small colour variation in [-1, 1]
};

struct SyntheticScene {
  std::vector<Berry> berries;
  std::array<std::vector<Leaf>, 4> leaves;  // indexed by view_index
  double cordon_length = 0.0;
  double density_g_per_cm3 = 1.05;
  double weight_g = 0.0;
  std::uint64_t noise_seed = 0;
};

SyntheticScene generate_scene(const SynthConfig& config, Rng& rng);

/// Sum of berry masses (4/3) pi r^3 rho.
double true_weight(const SyntheticScene& scene);
double berry_mass(double radius, double density);

/// Per-pixel content of a rendered view: berry index, or one of the
/// negative tags below.
struct ViewRaster {
  static constexpr int kBackground = -1;
  static constexpr int kCordon = -2;
  static constexpr int kLeaf = -3;
  std::size_t width = 0, height = 0;
  std::vector<int> ids;
  RgbImage image;
};

/// Full-frame orthographic render of one view.
ViewRaster render_view_raster(const SyntheticScene& scene, View view, std::size_t width,
                              std::size_t height, double yaw_deg = 15.0, double pixel_noise = 0.0);
RgbImage render_view(const SyntheticScene& scene, View view, std::size_t width, std::size_t height,
                     double yaw_deg = 15.0, double pixel_noise = 0.0);

/// Indices of berries with at least one visible pixel.
std::vector<std::size_t> visible_berries(const ViewRaster& raster);

/// Crop to the bounding box of berry pixels plus a margin; the whole frame
/// when no berry is visible.
RgbImage crop_to_berries(const ViewRaster& raster, std::size_t margin = 2);

/// Writes images/<id>.png for every view of n examples, reference.png and
/// manifest.csv under out_dir. Returns the manifest path.
std::filesystem::path generate_dataset(std::size_t n_examples, const SynthConfig& config,
                                       const std::filesystem::path& out_dir);

}  // namespace vym
