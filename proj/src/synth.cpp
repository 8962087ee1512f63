#include "vym/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "vym/error.hpp"

namespace vym {

namespace {

// Frame geometry: a fixed 100 cm wide window centred on the cordon whose
// top edge sits 6 cm above it.
constexpr double kFrameWidthCm = 100.0;
constexpr double kFrameTopCm = 6.0;
constexpr double kCordonRadiusCm = 1.2;
constexpr double kPackingFraction = 0.35;

template <typename T>
void require_range(T lo, T hi, const char* name) {
  if (!(lo > T{0}) || hi < lo) {
    throw DataError(DataError::Kind::kInvalidArgument,
                    std::string("synth config: invalid range for ") + name);
  }
}

}  // namespace

void SynthConfig::validate() const {
  if (clusters_min < 0 || clusters_max < clusters_min) {
    throw DataError(DataError::Kind::kInvalidArgument, "synth config: invalid cluster count range");
  }
  if (leaves_min < 0 || leaves_max < leaves_min) {
    throw DataError(DataError::Kind::kInvalidArgument, "synth config: invalid leaf count range");
  }
  require_range(berries_per_cluster_min, berries_per_cluster_max, "berries_per_cluster");
  require_range(berry_radius_min, berry_radius_max, "berry_radius");
  require_range(cordon_length_min, cordon_length_max, "cordon_length");
  require_range(leaf_size_min, leaf_size_max, "leaf_size");
  require_range(density_g_per_cm3, density_g_per_cm3, "density");
  if (image_width < 16 || image_height < 16) {
    throw DataError(DataError::Kind::kInvalidArgument, "synth config: image must be at least 16x16");
  }
  if (pixel_noise < 0.0 || camera_yaw_deg < 0.0 || camera_yaw_deg >= 90.0) {
    throw DataError(DataError::Kind::kInvalidArgument, "synth config: invalid noise or yaw");
  }
}

nlohmann::json SynthConfig::to_json() const {
  return {{"clusters_min", clusters_min},
          {"clusters_max", clusters_max},
          {"berries_per_cluster_min", berries_per_cluster_min},
          {"berries_per_cluster_max", berries_per_cluster_max},
          {"berry_radius_min", berry_radius_min},
          {"berry_radius_max", berry_radius_max},
          {"density_g_per_cm3", density_g_per_cm3},
          {"cordon_length_min", cordon_length_min},
          {"cordon_length_max", cordon_length_max},
          {"leaves_min", leaves_min},
          {"leaves_max", leaves_max},
          {"leaf_size_min", leaf_size_min},
          {"leaf_size_max", leaf_size_max},
          {"camera_yaw_deg", camera_yaw_deg},
          {"pixel_noise", pixel_noise},
          {"image_width", image_width},
          {"image_height", image_height},
          {"seed", seed}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j, SynthConfig c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("clusters_min", c.clusters_min);
  get("clusters_max", c.clusters_max);
  get("berries_per_cluster_min", c.berries_per_cluster_min);
  get("berries_per_cluster_max", c.berries_per_cluster_max);
  get("berry_radius_min", c.berry_radius_min);
  get("berry_radius_max", c.berry_radius_max);
  get("density_g_per_cm3", c.density_g_per_cm3);
  get("cordon_length_min", c.cordon_length_min);
  get("cordon_length_max", c.cordon_length_max);
  get("leaves_min", c.leaves_min);
  get("leaves_max", c.leaves_max);
  get("leaf_size_min", c.leaf_size_min);
  get("leaf_size_max", c.leaf_size_max);
  get("camera_yaw_deg", c.camera_yaw_deg);
  get("pixel_noise", c.pixel_noise);
  get("image_width", c.image_width);
  get("image_height", c.image_height);
  get("seed", c.seed);
  return c;
}

double berry_mass(double radius, double density) {
  return 4.0 / 3.0 * std::numbers::pi * radius * radius * radius * density;
}

double true_weight(const SyntheticScene& scene) {
  double w = 0.0;
  for (const auto& b : scene.berries) w += berry_mass(b.radius, scene.density_g_per_cm3);
  return w;
}

SyntheticScene generate_scene(const SynthConfig& config, Rng& rng) {
  config.validate();
  SyntheticScene scene;
  scene.density_g_per_cm3 = config.density_g_per_cm3;
  scene.cordon_length = rng.uniform(config.cordon_length_min, config.cordon_length_max);
  const double r_lo = config.berry_radius_min, r_hi = config.berry_radius_max;
  const double mean_r3 = (std::pow(r_hi, 4) - std::pow(r_lo, 4)) / (4.0 * std::max(r_hi - r_lo, 1e-12));
  const double mean_volume = r_hi > r_lo ? 4.0 / 3.0 * std::numbers::pi * mean_r3
                                         : 4.0 / 3.0 * std::numbers::pi * r_lo * r_lo * r_lo;

  const auto clusters = rng.integer(config.clusters_min, config.clusters_max);
  for (long long c = 0; c < clusters; ++c) {
    const auto n = rng.integer(config.berries_per_cluster_min, config.berries_per_cluster_max);
    // Ellipsoid sized so the berries fill a fixed fraction of it; elongated
    // vertically like a hanging bunch.
    const double volume = static_cast<double>(n) * mean_volume / kPackingFraction;
    const double s = std::cbrt(3.0 * volume / (4.0 * std::numbers::pi * 1.6));
    const double ax = s, ay = 1.6 * s, az = s;
    const double cx = rng.uniform(3.0, scene.cordon_length - 3.0);
    const double cy = -1.5 - ay * rng.uniform(0.9, 1.1);
    const double cz = rng.uniform(-2.5, 2.5);
    const std::size_t first = scene.berries.size();
    for (long long b = 0; b < n; ++b) {
      Berry berry;
      berry.radius = rng.uniform(r_lo, r_hi);
      for (int attempt = 0; attempt < 24; ++attempt) {
        double px, py, pz;
        do {
          px = rng.uniform(-1.0, 1.0);
          py = rng.uniform(-1.0, 1.0);
          pz = rng.uniform(-1.0, 1.0);
        } while (px * px + py * py + pz * pz > 1.0);
        berry.center = {cx + ax * px, cy + ay * py, cz + az * pz};
        bool clear = true;
        for (std::size_t o = first; o < scene.berries.size() && clear; ++o) {
          const auto& other = scene.berries[o];
          const double dx = other.center[0] - berry.center[0];
          const double dy = other.center[1] - berry.center[1];
          const double dz = other.center[2] - berry.center[2];
          const double min_d = 0.85 * (other.radius + berry.radius);
          clear = dx * dx + dy * dy + dz * dz >= min_d * min_d;
        }
        if (clear) break;
      }
      scene.berries.push_back(berry);
    }
  }

  for (auto& leaves : scene.leaves) {
    const auto count = rng.integer(config.leaves_min, config.leaves_max);
    for (long long i = 0; i < count; ++i) {
      Leaf leaf;
      leaf.u = rng.uniform(-0.5, 0.5) * scene.cordon_length;
      leaf.v = rng.uniform(-18.0, 2.0);
      leaf.semi_major = rng.uniform(config.leaf_size_min, config.leaf_size_max);
      leaf.semi_minor = leaf.semi_major * rng.uniform(0.55, 0.85);
      leaf.angle = rng.uniform(0.0, std::numbers::pi);
      leaf.tint = rng.uniform(-1.0, 1.0);
      leaves.push_back(leaf);
    }
  }
  scene.noise_seed = rng.next_u64();
  scene.weight_g = true_weight(scene);
  return scene;
}

namespace {

struct ViewBasis {
  // u = right . p, depth toward the camera = toward . p
  std::array<double, 3> right;
  std::array<double, 3> toward;
};

ViewBasis view_basis(View view, double yaw_deg) {
  const double yaw = (view.camera == 1 ? -1.0 : 1.0) * yaw_deg * std::numbers::pi / 180.0;
  const double s = std::sin(yaw), c = std::cos(yaw);
  if (view.side == Side::kEast) {
    // looking along -z, yawed: d = (s, 0, -c)
    return {{c, 0.0, s}, {-s, 0.0, c}};
  }
  // looking along +z, yawed: d = (s, 0, c)
  return {{-c, 0.0, s}, {-s, 0.0, -c}};
}

double dot3(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

ViewRaster render_view_raster(const SyntheticScene& scene, View view, std::size_t width,
                              std::size_t height, double yaw_deg, double pixel_noise) {
  ViewRaster r;
  r.width = width;
  r.height = height;
  r.ids.assign(width * height, ViewRaster::kBackground);
  std::vector<double> depth(width * height, -std::numeric_limits<double>::infinity());
  std::vector<std::array<double, 3>> color(width * height);

  const double ppcm = static_cast<double>(width) / kFrameWidthCm;
  const auto basis = view_basis(view, yaw_deg);
  const double u_center = dot3(basis.right, {scene.cordon_length / 2.0, 0.0, 0.0});
  const double u0 = u_center - kFrameWidthCm / 2.0;
  auto col_of = [&](double u) { return (u - u0) * ppcm - 0.5; };
  auto row_of = [&](double v) { return (kFrameTopCm - v) * ppcm - 0.5; };
  auto u_of = [&](std::size_t px) { return u0 + (static_cast<double>(px) + 0.5) / ppcm; };
  auto v_of = [&](std::size_t py) { return kFrameTopCm - (static_cast<double>(py) + 0.5) / ppcm; };

  for (std::size_t py = 0; py < height; ++py) {
    const double t = static_cast<double>(py) / static_cast<double>(height);
    for (std::size_t px = 0; px < width; ++px) {
      color[py * width + px] = {228.0 - 14.0 * t, 232.0 - 10.0 * t, 238.0 - 12.0 * t};
    }
  }

  const std::array<double, 3> light = {-0.40, 0.50, 0.77};

  // Cordon: horizontal cylinder along x at y = z = 0.
  {
    const double rc = kCordonRadiusCm;
    const double cu = basis.right[0];
    const double cd = basis.toward[0];
    for (std::size_t py = 0; py < height; ++py) {
      const double v = v_of(py);
      if (std::abs(v) > rc) continue;
      const double bulge = std::sqrt(rc * rc - v * v);
      for (std::size_t px = 0; px < width; ++px) {
        const double x = u_of(px) / cu;
        if (x < 0.0 || x > scene.cordon_length) continue;
        const double d = cd * x + bulge;
        const std::size_t i = py * width + px;
        if (d <= depth[i]) continue;
        depth[i] = d;
        r.ids[i] = ViewRaster::kCordon;
        const double shade = 0.55 + 0.45 * std::max(0.0, (v / rc) * light[1] + (bulge / rc) * light[2]);
        color[i] = {110.0 * shade, 80.0 * shade, 55.0 * shade};
      }
    }
  }

  for (std::size_t b = 0; b < scene.berries.size(); ++b) {
    const auto& berry = scene.berries[b];
    const double bu = dot3(basis.right, berry.center);
    const double bv = berry.center[1];
    const double bd = dot3(basis.toward, berry.center);
    const double rad = berry.radius;
    const double cx = col_of(bu), cy = row_of(bv), rp = rad * ppcm;
    const long x0 = std::max(0L, static_cast<long>(std::floor(cx - rp)));
    const long x1 = std::min(static_cast<long>(width) - 1, static_cast<long>(std::ceil(cx + rp)));
    const long y0 = std::max(0L, static_cast<long>(std::floor(cy - rp)));
    const long y1 = std::min(static_cast<long>(height) - 1, static_cast<long>(std::ceil(cy + rp)));
    const double tint = static_cast<double>(hash_name(std::to_string(b)) % 21) - 10.0;
    for (long py = y0; py <= y1; ++py) {
      const double ny = (bv - v_of(static_cast<std::size_t>(py))) / rad;
      for (long px = x0; px <= x1; ++px) {
        const double nx = (u_of(static_cast<std::size_t>(px)) - bu) / rad;
        const double rho2 = nx * nx + ny * ny;
        if (rho2 > 1.0) continue;
        const double nz = std::sqrt(1.0 - rho2);
        const double d = bd + nz * rad;
        const std::size_t i = static_cast<std::size_t>(py) * width + static_cast<std::size_t>(px);
        if (d <= depth[i]) continue;
        depth[i] = d;
        r.ids[i] = static_cast<int>(b);
        const double lambert = std::max(0.0, nx * light[0] - ny * light[1] + nz * light[2]);
        const double shade = 0.35 + 0.65 * lambert;
        const double specular = 90.0 * std::pow(std::max(0.0, nz * 0.95 + lambert * 0.05), 24.0) * lambert;
        color[i] = {(62.0 + tint) * shade + specular, 38.0 * shade + specular, (92.0 + tint) * shade + specular};
      }
    }
  }

  for (const auto& leaf : scene.leaves[view_index(view)]) {
    const double lu = u_center + leaf.u;
    const double cx = col_of(lu), cy = row_of(leaf.v), rp = leaf.semi_major * ppcm;
    const double ca = std::cos(leaf.angle), sa = std::sin(leaf.angle);
    const long x0 = std::max(0L, static_cast<long>(std::floor(cx - rp)));
    const long x1 = std::min(static_cast<long>(width) - 1, static_cast<long>(std::ceil(cx + rp)));
    const long y0 = std::max(0L, static_cast<long>(std::floor(cy - rp)));
    const long y1 = std::min(static_cast<long>(height) - 1, static_cast<long>(std::ceil(cy + rp)));
    for (long py = y0; py <= y1; ++py) {
      const double dv = v_of(static_cast<std::size_t>(py)) - leaf.v;
      for (long px = x0; px <= x1; ++px) {
        const double du = u_of(static_cast<std::size_t>(px)) - lu;
        const double a = (du * ca + dv * sa) / leaf.semi_major;
        const double c = (-du * sa + dv * ca) / leaf.semi_minor;
        const double rho2 = a * a + c * c;
        if (rho2 > 1.0) continue;
        const std::size_t i = static_cast<std::size_t>(py) * width + static_cast<std::size_t>(px);
        r.ids[i] = ViewRaster::kLeaf;
        const double shade = 0.8 + 0.2 * (1.0 - rho2);
        color[i] = {(70.0 + 12.0 * leaf.tint) * shade, (125.0 + 15.0 * leaf.tint) * shade,
                    (45.0 + 8.0 * leaf.tint) * shade};
      }
    }
  }

  r.image = RgbImage(width, height);
  Rng noise(derive_seed(scene.noise_seed, view_index(view)));
  for (std::size_t i = 0; i < width * height; ++i) {
    Rgb px;
    for (std::size_t c = 0; c < 3; ++c) {
      const double n = pixel_noise > 0.0 ? pixel_noise * noise.normal() : 0.0;
      px[c] = to_byte(color[i][c] + n);
    }
    r.image.set(i % width, i / width, px);
  }
  return r;
}

RgbImage render_view(const SyntheticScene& scene, View view, std::size_t width, std::size_t height,
                     double yaw_deg, double pixel_noise) {
  return render_view_raster(scene, view, width, height, yaw_deg, pixel_noise).image;
}

std::vector<std::size_t> visible_berries(const ViewRaster& raster) {
  std::vector<std::size_t> out;
  for (int id : raster.ids) {
    if (id >= 0) out.push_back(static_cast<std::size_t>(id));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

RgbImage crop_to_berries(const ViewRaster& raster, std::size_t margin) {
  std::size_t x0 = raster.width, y0 = raster.height, x1 = 0, y1 = 0;
  bool any = false;
  // Leaves covering grapes count as part of the grape region.
  for (std::size_t y = 0; y < raster.height; ++y) {
    for (std::size_t x = 0; x < raster.width; ++x) {
      if (raster.ids[y * raster.width + x] >= 0) {
        any = true;
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
  }
  if (!any) return raster.image;
  x0 = x0 > margin ? x0 - margin : 0;
  y0 = y0 > margin ? y0 - margin : 0;
  x1 = std::min(raster.width - 1, x1 + margin);
  y1 = std::min(raster.height - 1, y1 + margin);
  RgbImage out(x1 - x0 + 1, y1 - y0 + 1);
  for (std::size_t y = y0; y <= y1; ++y) {
    for (std::size_t x = x0; x <= x1; ++x) out.set(x - x0, y - y0, raster.image.at(x, y));
  }
  return out;
}

std::filesystem::path generate_dataset(std::size_t n_examples, const SynthConfig& config,
                                       const std::filesystem::path& out_dir) {
  config.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw DataError(DataError::Kind::kIo, "cannot create " + (out_dir / "images").string() + ": " + ec.message());

  std::vector<CordonExample> examples(n_examples);
  for (std::size_t i = 0; i < n_examples; ++i) {
    Rng rng(derive_seed(config.seed, i));
    const auto scene = generate_scene(config, rng);
    auto& e = examples[i];
    e.plant = static_cast<int>(i / 2 + 1);
    e.cordon = i % 2 == 0 ? Cordon::kNorth : Cordon::kSouth;
    e.weight_g = scene.weight_g;
    for (const auto view : kViewOrder) {
      const ImageId id{e.plant, e.cordon, view};
      const auto raster = render_view_raster(scene, view, config.image_width, config.image_height,
                                             config.camera_yaw_deg, config.pixel_noise);
      const fs::path rel = fs::path("images") / (id.format() + ".png");
      write_image(out_dir / rel, crop_to_berries(raster));
      e.images[view_index(view)] = rel;
    }
  }

  Rng ref_rng(derive_seed(config.seed, hash_name("reference")));
  const auto ref_scene = generate_scene(config, ref_rng);
  write_image(out_dir / "reference.png",
              render_view(ref_scene, kViewOrder[0], config.image_width, config.image_height,
                          config.camera_yaw_deg, config.pixel_noise));

  const auto manifest = out_dir / "manifest.csv";
  write_manifest(manifest, examples);
  return manifest;
}

}  // namespace vym
