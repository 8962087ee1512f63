#include "vym/image.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "vym/error.hpp"

namespace vym {

RgbImage::RgbImage(std::size_t width, std::size_t height, Rgb fill)
    : width_(width), height_(height), pixels_(width * height * 3) {
  for (std::size_t i = 0; i < width * height; ++i) {
    pixels_[3 * i] = fill[0];
    pixels_[3 * i + 1] = fill[1];
    pixels_[3 * i + 2] = fill[2];
  }
}

RgbImage::RgbImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (pixels_.size() != width * height * 3) {
    throw DataError(DataError::Kind::kInvalidArgument,
                    "RgbImage: " + std::to_string(pixels_.size()) + " bytes for " +
                        std::to_string(width) + "x" + std::to_string(height));
  }
}

// libpng's simplified API reports errors through return codes, so no
// setjmp/longjmp crosses C++ frames.
RgbImage read_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw DataError(DataError::Kind::kMissingFile, "cannot open " + path.string());
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw DataError(DataError::Kind::kMalformed, path.string() + ": png: " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw DataError(DataError::Kind::kMalformed, path.string() + ": png: " + msg);
  }
  return RgbImage(img.width, img.height, std::move(pixels));
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels().data(), 0, nullptr)) {
    throw DataError(DataError::Kind::kIo, path.string() + ": png: " + img.message);
  }
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::kMissingFile, "cannot open " + path.string());
  auto next_token = [&]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(c);
    }
    return tok;
  };
  if (next_token() != "P6") throw DataError(DataError::Kind::kMalformed, path.string() + ": not a P6 PPM");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_token());
    h = std::stoul(next_token());
    maxval = std::stoul(next_token());
  } catch (const std::exception&) {
    throw DataError(DataError::Kind::kMalformed, path.string() + ": bad PPM header");
  }
  if (maxval != 255 || w == 0 || h == 0) {
    throw DataError(DataError::Kind::kMalformed, path.string() + ": unsupported PPM header");
  }
  std::vector<std::uint8_t> pixels(w * h * 3);
  in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(pixels.size())) {
    throw DataError(DataError::Kind::kMalformed, path.string() + ": truncated PPM");
  }
  return RgbImage(w, h, std::move(pixels));
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataError::Kind::kIo, "cannot write " + path.string());
  out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels().data()),
            static_cast<std::streamsize>(image.pixels().size()));
  if (!out) throw DataError(DataError::Kind::kIo, "failed writing " + path.string());
}

RgbImage read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::kMissingFile, "cannot open " + path.string());
  char magic[2] = {};
  in.read(magic, 2);
  in.close();
  if (magic[0] == 'P' && magic[1] == '6') return read_ppm(path);
  return read_png(path);
}

void write_image(const std::filesystem::path& path, const RgbImage& image) {
  if (path.extension() == ".ppm") {
    write_ppm(path, image);
  } else {
    write_png(path, image);
  }
}

}  // namespace vym
