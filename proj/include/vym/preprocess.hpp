#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>

#include "vym/image.hpp"
#include "vym/tensor.hpp"

namespace vym {

struct PreprocessConfig {
  std::size_t target_side = 150;
  Rgb pad_rgb = {255, 255, 255};
  std::filesystem::path reference_image;

  void validate() const;
};

struct CanvasSize {
  std::size_t width = 0;
  std::size_t height = 0;
  bool operator==(const CanvasSize&) const = default;
};

/// Centers the image on a canvas filled with pad_rgb. Odd leftovers go to
/// the right/bottom margin.
RgbImage pad_to_uniform(const RgbImage& image, std::size_t canvas_w, std::size_t canvas_h,
                        Rgb pad_rgb);

/// Bilinear resampling with half-pixel-centered sample positions.
RgbImage resize_bilinear(const RgbImage& image, std::size_t out_w, std::size_t out_h);

/// Per-channel discrete histogram equalization. A constant channel is left
/// unchanged.
RgbImage equalize_histogram(const RgbImage& image);

/// Per-channel CDF matching: each source level maps to the smallest
/// reference level whose CDF reaches the source level's CDF.
RgbImage match_histogram(const RgbImage& image, const RgbImage& reference);

/// 256-entry lookup tables used by the two histogram operations.
std::array<std::uint8_t, 256> equalization_map(std::span<const std::size_t, 256> hist);
std::array<std::uint8_t, 256> matching_map(std::span<const std::size_t, 256> source_hist,
                                           std::span<const std::size_t, 256> reference_hist);

/// [3, H, W] tensor with values in [0, 1].
Tensor image_to_tensor(const RgbImage& image);
RgbImage tensor_to_image(const Tensor& t);

/// pad -> equalize -> match -> resize -> scale, for a single view.
Tensor preprocess_image(const RgbImage& image, const RgbImage& reference, CanvasSize canvas,
                        const PreprocessConfig& config);

/// Same chain for the four views of one example.
std::array<Tensor, 4> preprocess_example(std::span<const RgbImage, 4> images,
                                         const RgbImage& reference, CanvasSize canvas,
                                         const PreprocessConfig& config);

}  // namespace vym
