#include "vym/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vym/error.hpp"

namespace vym {

void PreprocessConfig::validate() const {
  if (target_side < 8) {
    throw DataError(DataError::Kind::kInvalidArgument,
                    "preprocess: target_side must be >= 8, got " + std::to_string(target_side));
  }
}

RgbImage pad_to_uniform(const RgbImage& image, std::size_t canvas_w, std::size_t canvas_h,
                        Rgb pad_rgb) {
  if (canvas_w < image.width() || canvas_h < image.height()) {
    throw DataError(DataError::Kind::kInvalidArgument,
                    "pad_to_uniform: canvas " + std::to_string(canvas_w) + "x" +
                        std::to_string(canvas_h) + " is smaller than image " +
                        std::to_string(image.width()) + "x" + std::to_string(image.height()));
  }
  RgbImage out(canvas_w, canvas_h, pad_rgb);
  const std::size_t left = (canvas_w - image.width()) / 2;
  const std::size_t top = (canvas_h - image.height()) / 2;
  const std::size_t row_bytes = image.width() * 3;
  for (std::size_t y = 0; y < image.height(); ++y) {
    std::copy_n(image.pixels().begin() + static_cast<long>(y * row_bytes), row_bytes,
                out.pixels().begin() + static_cast<long>(((top + y) * canvas_w + left) * 3));
  }
  return out;
}

RgbImage resize_bilinear(const RgbImage& image, std::size_t out_w, std::size_t out_h) {
  if (out_w == 0 || out_h == 0 || image.empty()) {
    throw DataError(DataError::Kind::kInvalidArgument, "resize_bilinear: empty dimensions");
  }
  if (out_w == image.width() && out_h == image.height()) return image;

  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
      double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto lo = static_cast<std::size_t>(src);
      const std::size_t hi = std::min(lo + 1, in - 1);
      t[i] = {lo, hi, src - static_cast<double>(lo)};
    }
    return t;
  };
  const auto xs = taps(image.width(), out_w);
  const auto ys = taps(image.height(), out_h);

  RgbImage out(out_w, out_h);
  for (std::size_t y = 0; y < out_h; ++y) {
    const auto& ty = ys[y];
    for (std::size_t x = 0; x < out_w; ++x) {
      const auto& tx = xs[x];
      Rgb px;
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = (1.0 - tx.frac) * image.channel(tx.lo, ty.lo, c) +
                           tx.frac * image.channel(tx.hi, ty.lo, c);
        const double bot = (1.0 - tx.frac) * image.channel(tx.lo, ty.hi, c) +
                           tx.frac * image.channel(tx.hi, ty.hi, c);
        const double v = (1.0 - ty.frac) * top + ty.frac * bot;
        px[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
      out.set(x, y, px);
    }
  }
  return out;
}

namespace {

std::array<std::size_t, 256> channel_histogram(const RgbImage& image, std::size_t c) {
  std::array<std::size_t, 256> h{};
  const auto& px = image.pixels();
  for (std::size_t i = c; i < px.size(); i += 3) ++h[px[i]];
  return h;
}

RgbImage apply_maps(const RgbImage& image, const std::array<std::array<std::uint8_t, 256>, 3>& maps) {
  RgbImage out = image;
  auto& px = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = maps[i % 3][px[i]];
  return out;
}

}  // namespace

std::array<std::uint8_t, 256> equalization_map(std::span<const std::size_t, 256> hist) {
  std::array<std::uint8_t, 256> map{};
  std::size_t total = 0;
  for (auto h : hist) total += h;
  std::size_t cdf_min = 0;
  for (auto h : hist) {
    if (h) {
      cdf_min = h;
      break;
    }
  }
  if (total == cdf_min) {
    for (std::size_t v = 0; v < 256; ++v) map[v] = static_cast<std::uint8_t>(v);
    return map;
  }
  // round((cdf - cdf_min) / (total - cdf_min) * 255), half up, in integers.
  std::size_t cdf = 0;
  const std::size_t denom = total - cdf_min;
  for (std::size_t v = 0; v < 256; ++v) {
    cdf += hist[v];
    const std::size_t num = cdf <= cdf_min ? 0 : cdf - cdf_min;
    map[v] = static_cast<std::uint8_t>((2 * num * 255 + denom) / (2 * denom));
  }
  return map;
}

std::array<std::uint8_t, 256> matching_map(std::span<const std::size_t, 256> source_hist,
                                           std::span<const std::size_t, 256> reference_hist) {
  std::size_t ns = 0, nr = 0;
  for (auto h : source_hist) ns += h;
  for (auto h : reference_hist) nr += h;
  std::array<std::uint8_t, 256> map{};
  // Compare cdf_r(u)/nr >= cdf_s(v)/ns exactly in integers.
  std::size_t cdf_s = 0, cdf_r = 0, u = 0;
  cdf_r = reference_hist[0];
  for (std::size_t v = 0; v < 256; ++v) {
    cdf_s += source_hist[v];
    while (u < 255 && cdf_r * ns < cdf_s * nr) cdf_r += reference_hist[++u];
    map[v] = static_cast<std::uint8_t>(u);
  }
  return map;
}

RgbImage equalize_histogram(const RgbImage& image) {
  if (image.empty()) throw DataError(DataError::Kind::kInvalidArgument, "equalize_histogram: empty image");
  std::array<std::array<std::uint8_t, 256>, 3> maps;
  for (std::size_t c = 0; c < 3; ++c) {
    const auto h = channel_histogram(image, c);
    maps[c] = equalization_map(h);
  }
  return apply_maps(image, maps);
}

RgbImage match_histogram(const RgbImage& image, const RgbImage& reference) {
  if (image.empty() || reference.empty()) {
    throw DataError(DataError::Kind::kInvalidArgument, "match_histogram: empty image");
  }
  std::array<std::array<std::uint8_t, 256>, 3> maps;
  for (std::size_t c = 0; c < 3; ++c) {
    const auto hs = channel_histogram(image, c);
    const auto hr = channel_histogram(reference, c);
    maps[c] = matching_map(hs, hr);
  }
  return apply_maps(image, maps);
}

Tensor image_to_tensor(const RgbImage& image) {
  const std::size_t w = image.width(), h = image.height();
  std::vector<double> data(3 * w * h);
  const auto& px = image.pixels();
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < w * h; ++i) data[c * w * h + i] = px[3 * i + c] / 255.0;
  }
  return Tensor::from({3, h, w}, std::move(data));
}

RgbImage tensor_to_image(const Tensor& t) {
  if (t.rank() != 3 || t.dim(0) != 3) {
    throw ShapeError("tensor_to_image: expected [3,H,W], got " + shape_str(t.shape()));
  }
  const std::size_t h = t.dim(1), w = t.dim(2);
  RgbImage img(w, h);
  const auto d = t.data();
  auto& px = img.pixels();
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < w * h; ++i) {
      px[3 * i + c] = static_cast<std::uint8_t>(std::clamp(std::lround(d[c * w * h + i] * 255.0), 0L, 255L));
    }
  }
  return img;
}

Tensor preprocess_image(const RgbImage& image, const RgbImage& reference, CanvasSize canvas,
                        const PreprocessConfig& config) {
  config.validate();
  RgbImage img = pad_to_uniform(image, canvas.width, canvas.height, config.pad_rgb);
  img = equalize_histogram(img);
  img = match_histogram(img, reference);
  img = resize_bilinear(img, config.target_side, config.target_side);
  return image_to_tensor(img);
}

std::array<Tensor, 4> preprocess_example(std::span<const RgbImage, 4> images,
                                         const RgbImage& reference, CanvasSize canvas,
                                         const PreprocessConfig& config) {
  std::array<Tensor, 4> out;
  for (std::size_t i = 0; i < 4; ++i) out[i] = preprocess_image(images[i], reference, canvas, config);
  return out;
}

}  // namespace vym
