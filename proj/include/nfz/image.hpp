// Copyright 2026 The Neurofuzz Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Grayscale image tensors and the on-disk formats seeds arrive in:
// binary/ASCII PGM (any maxval), 8-bit PNG, and raw float grids (.f32:
// u32 LE height, u32 LE width, then height*width f32 LE pixels row-major).

#ifndef NFZ_IMAGE_HPP_
#define NFZ_IMAGE_HPP_

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nfz/error.hpp"

namespace nfz {

struct ImageTensor {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;  // row-major, values in [0, 1]

  ImageTensor() = default;
  ImageTensor(std::size_t h, std::size_t w, float fill = 0.0f)
      : height(h), width(w), pixels(h * w, fill) {}
  ImageTensor(std::size_t h, std::size_t w, std::vector<float> values)
      : height(h), width(w), pixels(std::move(values)) {
    if (pixels.size() != h * w)
      throw Error(Errc::shape_mismatch, "pixel count does not match " +
                                            std::to_string(h) + "x" +
                                            std::to_string(w));
  }

  std::size_t size() const { return pixels.size(); }
  float at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
  float& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }

  bool same_shape(const ImageTensor& other) const {
    return height == other.height && width == other.width;
  }

  bool in_range() const {
    return std::all_of(pixels.begin(), pixels.end(), [](float v) {
      return std::isfinite(v) && v >= 0.0f && v <= 1.0f;
    });
  }

  double mean() const {
    if (pixels.empty()) return 0.0;
    double sum = 0.0;
    for (float v : pixels) sum += v;
    return sum / static_cast<double>(pixels.size());
  }

  void clamp() {
    for (float& v : pixels) v = std::clamp(v, 0.0f, 1.0f);
  }

  std::string_view bytes() const {
    return {reinterpret_cast<const char*>(pixels.data()),
            pixels.size() * sizeof(float)};
  }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;
};

inline void require_valid(const ImageTensor& image) {
  if (image.height == 0 || image.width == 0 ||
      image.pixels.size() != image.height * image.width)
    throw Error(Errc::shape_mismatch, "image has invalid dimensions");
  if (!image.in_range())
    throw Error(Errc::invalid_argument, "image pixels must lie in [0, 1]");
}

namespace detail {

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t load_u32le(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
         (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

inline void store_u32le(std::uint32_t v, std::string& out) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace detail

inline ImageTensor parse_pgm(const std::vector<unsigned char>& data,
                             const std::string& name = "<pgm>") {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(data[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> std::size_t {
    skip_space();
    std::size_t v = 0;
    bool any = false;
    while (pos < data.size() && std::isdigit(data[pos])) {
      v = v * 10 + (data[pos++] - '0');
      any = true;
    }
    if (!any) throw Error(Errc::io, name + ": malformed PGM header");
    return v;
  };
  if (data.size() < 2 || data[0] != 'P' || (data[1] != '5' && data[1] != '2'))
    throw Error(Errc::io, name + ": not a PGM file");
  const bool binary = data[1] == '5';
  pos = 2;
  const std::size_t width = read_int();
  const std::size_t height = read_int();
  const std::size_t maxval = read_int();
  if (width == 0 || height == 0 || maxval == 0 || maxval > 65535)
    throw Error(Errc::io, name + ": unsupported PGM dimensions or maxval");
  ImageTensor image(height, width);
  const float scale = 1.0f / static_cast<float>(maxval);
  if (binary) {
    ++pos;  // single whitespace after maxval
    const std::size_t bps = maxval < 256 ? 1 : 2;
    if (data.size() < pos + image.size() * bps)
      throw Error(Errc::io, name + ": truncated PGM raster");
    for (std::size_t i = 0; i < image.size(); ++i) {
      unsigned v = bps == 1 ? data[pos + i]
                            : (unsigned{data[pos + 2 * i]} << 8) | data[pos + 2 * i + 1];
      image.pixels[i] = std::min(1.0f, static_cast<float>(v) * scale);
    }
  } else {
    for (std::size_t i = 0; i < image.size(); ++i)
      image.pixels[i] =
          std::min(1.0f, static_cast<float>(read_int()) * scale);
  }
  return image;
}

// Writes a binary PGM. 16-bit output keeps more of the float precision.
inline void write_pgm(const ImageTensor& image, const std::filesystem::path& path,
                      bool sixteen_bit = false) {
  const unsigned maxval = sixteen_bit ? 65535u : 255u;
  std::string out = "P5\n" + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n" +
                    std::to_string(maxval) + "\n";
  for (float v : image.pixels) {
    const auto q = static_cast<unsigned>(
        std::lround(std::clamp(v, 0.0f, 1.0f) * static_cast<float>(maxval)));
    if (sixteen_bit) out.push_back(static_cast<char>(q >> 8));
    out.push_back(static_cast<char>(q & 0xff));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

inline ImageTensor read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str()))
    throw Error(Errc::io, path.string() + ": " + png.message);
  png.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&png);
    throw Error(Errc::io, path.string() + ": " + png.message);
  }
  ImageTensor image(png.height, png.width);
  for (std::size_t i = 0; i < image.size(); ++i)
    image.pixels[i] = static_cast<float>(buffer[i]) / 255.0f;
  return image;
}

inline ImageTensor parse_f32_grid(const std::vector<unsigned char>& data,
                                  const std::string& name = "<f32>") {
  if (data.size() < 8) throw Error(Errc::io, name + ": truncated float grid");
  const std::size_t h = detail::load_u32le(data.data());
  const std::size_t w = detail::load_u32le(data.data() + 4);
  if (h == 0 || w == 0 || data.size() != 8 + h * w * 4)
    throw Error(Errc::io, name + ": float grid size does not match header");
  ImageTensor image(h, w);
  for (std::size_t i = 0; i < image.size(); ++i)
    image.pixels[i] = std::bit_cast<float>(detail::load_u32le(data.data() + 8 + 4 * i));
  if (!image.in_range())
    throw Error(Errc::io, name + ": float grid values must lie in [0, 1]");
  return image;
}

inline void write_f32_grid(const ImageTensor& image, const std::filesystem::path& path) {
  std::string out;
  detail::store_u32le(static_cast<std::uint32_t>(image.height), out);
  detail::store_u32le(static_cast<std::uint32_t>(image.width), out);
  for (float v : image.pixels) detail::store_u32le(std::bit_cast<std::uint32_t>(v), out);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

inline bool is_image_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return ext == ".pgm" || ext == ".png" || ext == ".f32";
}

inline ImageTensor load_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".png") return read_png(path);
  const auto data = detail::read_file(path);
  if (ext == ".f32") return parse_f32_grid(data, path.string());
  return parse_pgm(data, path.string());
}

// Loads every image file of a directory in lexicographic path order, or a
// single file when `path` is not a directory.
inline std::vector<ImageTensor> load_images(const std::filesystem::path& path) {
  if (!std::filesystem::is_directory(path)) {
    if (!std::filesystem::exists(path))
      throw Error(Errc::io, path.string() + " does not exist");
    return {load_image(path)};
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(path))
    if (entry.is_regular_file() && is_image_path(entry.path()))
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<ImageTensor> images;
  images.reserve(files.size());
  for (const auto& f : files) images.push_back(load_image(f));
  return images;
}

struct ImageBytesHash {
  std::size_t operator()(const ImageTensor& image) const {
    return std::hash<std::string_view>{}(image.bytes()) ^ (image.width * 0x9e3779b97f4a7c15ULL);
  }
};

}  // namespace nfz

#endif  // NFZ_IMAGE_HPP_
