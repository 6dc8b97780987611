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

// Image-level mutations: four affine warps (bilinear sampling, zero fill),
// brightness, contrast, Gaussian blur, additive Gaussian noise, and sparse
// pixel perturbation. A MutationRecord carries every parameter, including
// the sub-stream seed of the stochastic kinds, so replaying a record
// reproduces its image exactly.

#ifndef NFZ_MUTATION_HPP_
#define NFZ_MUTATION_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "nfz/error.hpp"
#include "nfz/image.hpp"

namespace nfz {

using Rng = std::mt19937_64;

struct Translate {
  double dx = 0.0;  // fraction of the width
  double dy = 0.0;  // fraction of the height
};
struct Rotate {
  double degrees = 0.0;  // counter-clockwise
};
struct Scale {
  double factor = 1.0;
};
struct Shear {
  double factor = 0.0;  // horizontal: x' = x + factor * y
};
struct Brightness {
  double delta = 0.0;
};
struct Contrast {
  double factor = 1.0;  // about the image mean
};
struct Blur {
  double sigma = 1.0;  // pixels
};
struct Noise {
  double sigma = 0.0;
  std::uint64_t stream = 0;
};
struct PixelPerturb {
  double fraction = 0.0;   // share of pixels touched, rounded up
  double magnitude = 0.0;  // each touched pixel moves by +/- magnitude
  std::uint64_t stream = 0;
};

using Transform = std::variant<Translate, Rotate, Scale, Shear, Brightness, Contrast, Blur,
                               Noise, PixelPerturb>;

// Enumerators follow the Transform alternatives.
enum class MutationKind { translate, rotate, scale, shear, brightness, contrast, blur, noise, pixel_perturb };

inline constexpr std::array<MutationKind, 9> kAllMutationKinds = {
    MutationKind::translate, MutationKind::rotate,     MutationKind::scale,
    MutationKind::shear,     MutationKind::brightness, MutationKind::contrast,
    MutationKind::blur,      MutationKind::noise,      MutationKind::pixel_perturb};

inline std::string_view mutation_kind_name(MutationKind kind) {
  constexpr std::array<std::string_view, 9> names = {
      "translate", "rotate", "scale", "shear", "brightness",
      "contrast",  "blur",   "noise", "pixel_perturb"};
  return names[static_cast<std::size_t>(kind)];
}

inline MutationKind parse_mutation_kind(std::string_view name) {
  for (auto kind : kAllMutationKinds)
    if (mutation_kind_name(kind) == name) return kind;
  throw Error(Errc::invalid_argument, "unknown mutation kind \"" + std::string(name) + "\"");
}

inline MutationKind kind_of(const Transform& t) { return static_cast<MutationKind>(t.index()); }

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

// Per-kind parameter ranges. Defaults follow common DeepHunter-style
// augmentation settings.
struct MutationConfig {
  std::vector<MutationKind> enabled{kAllMutationKinds.begin(), kAllMutationKinds.end()};
  Range translate{-0.1, 0.1};
  Range rotate_degrees{-15.0, 15.0};
  Range scale{0.8, 1.2};
  Range shear{-0.15, 0.15};
  Range brightness{-0.3, 0.3};
  Range contrast{0.7, 1.3};
  Range blur_sigma{0.5, 1.5};
  Range noise_sigma{0.02, 0.08};
  Range perturb_fraction{0.0, 0.01};
  Range perturb_magnitude{0.2, 0.2};

  // Small-magnitude neighbourhood used by the local-perturbation strategy.
  static MutationConfig local() {
    MutationConfig c;
    c.enabled = {MutationKind::noise, MutationKind::pixel_perturb};
    c.noise_sigma = {0.005, 0.02};
    c.perturb_fraction = {0.0, 0.01};
    c.perturb_magnitude = {0.05, 0.05};
    return c;
  }

  void validate() const {
    if (enabled.empty()) throw Error(Errc::invalid_argument, "no mutation kinds enabled");
    for (const Range* r : {&translate, &rotate_degrees, &scale, &shear, &brightness, &contrast,
                           &blur_sigma, &noise_sigma, &perturb_fraction, &perturb_magnitude})
      if (!(r->lo <= r->hi) || !std::isfinite(r->lo) || !std::isfinite(r->hi))
        throw Error(Errc::invalid_argument, "mutation range must satisfy lo <= hi");
    if (scale.lo <= 0.0) throw Error(Errc::invalid_argument, "scale range must be positive");
    if (blur_sigma.lo <= 0.0) throw Error(Errc::invalid_argument, "blur sigma must be positive");
    if (noise_sigma.lo < 0.0 || perturb_fraction.lo < 0.0 || perturb_fraction.hi > 1.0 ||
        perturb_magnitude.lo < 0.0)
      throw Error(Errc::invalid_argument, "noise/perturbation ranges out of bounds");
  }
};

struct MutationRecord {
  Transform transform;
  std::size_t parent = 0;        // corpus id of the mutated seed
  std::uint64_t draw_index = 0;  // ordinal of this draw within the campaign

  MutationKind kind() const { return kind_of(transform); }
};

namespace detail {

inline void check_param(const Range& r, double v, const char* what) {
  if (!std::isfinite(v) || !r.contains(v))
    throw Error(Errc::invalid_argument, std::string(what) + " parameter " + std::to_string(v) +
                                            " outside [" + std::to_string(r.lo) + ", " +
                                            std::to_string(r.hi) + "]");
}

inline double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-6 ? r : v;
}

inline float sample_bilinear(const ImageTensor& img, double x, double y) {
  x = snap(x);
  y = snap(y);
  const double fx0 = std::floor(x), fy0 = std::floor(y);
  const double fx = x - fx0, fy = y - fy0;
  const auto x0 = static_cast<long long>(fx0), y0 = static_cast<long long>(fy0);
  auto px = [&](long long r, long long c) -> double {
    if (r < 0 || c < 0 || r >= static_cast<long long>(img.height) ||
        c >= static_cast<long long>(img.width))
      return 0.0;
    return img.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  };
  double v = (1.0 - fx) * (1.0 - fy) * px(y0, x0);
  if (fx > 0.0) v += fx * (1.0 - fy) * px(y0, x0 + 1);
  if (fy > 0.0) v += (1.0 - fx) * fy * px(y0 + 1, x0);
  if (fx > 0.0 && fy > 0.0) v += fx * fy * px(y0 + 1, x0 + 1);
  return static_cast<float>(v);
}

// Inverse-maps every destination pixel through `to_source`, which works in
// coordinates centred on the image centre (x right, y down).
template <typename F>
ImageTensor warp(const ImageTensor& src, F to_source) {
  ImageTensor out(src.height, src.width);
  const double cx = (static_cast<double>(src.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(src.height) - 1.0) / 2.0;
  for (std::size_t r = 0; r < src.height; ++r) {
    for (std::size_t c = 0; c < src.width; ++c) {
      const auto [sx, sy] = to_source(static_cast<double>(c) - cx, static_cast<double>(r) - cy);
      out.at(r, c) = std::clamp(sample_bilinear(src, sx + cx, sy + cy), 0.0f, 1.0f);
    }
  }
  return out;
}

inline ImageTensor gaussian_blur(const ImageTensor& src, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    total += kernel[i + radius];
  }
  for (double& k : kernel) k /= total;
  const auto h = static_cast<int>(src.height), w = static_cast<int>(src.width);
  std::vector<double> tmp(src.size());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[i + radius] * src.at(r, std::clamp(c + i, 0, w - 1));
      tmp[r * w + c] = acc;
    }
  ImageTensor out(src.height, src.width);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[i + radius] * tmp[std::clamp(r + i, 0, h - 1) * w + c];
      out.at(r, c) = std::clamp(static_cast<float>(acc), 0.0f, 1.0f);
    }
  return out;
}

}  // namespace detail

inline void validate_transform(const Transform& transform, const MutationConfig& config) {
  if (std::find(config.enabled.begin(), config.enabled.end(), kind_of(transform)) ==
      config.enabled.end())
    throw Error(Errc::invalid_argument, "mutation kind " +
                                            std::string(mutation_kind_name(kind_of(transform))) +
                                            " is not enabled");
  std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, Translate>) {
          detail::check_param(config.translate, t.dx, "translate");
          detail::check_param(config.translate, t.dy, "translate");
        } else if constexpr (std::is_same_v<T, Rotate>) {
          detail::check_param(config.rotate_degrees, t.degrees, "rotate");
        } else if constexpr (std::is_same_v<T, Scale>) {
          detail::check_param(config.scale, t.factor, "scale");
        } else if constexpr (std::is_same_v<T, Shear>) {
          detail::check_param(config.shear, t.factor, "shear");
        } else if constexpr (std::is_same_v<T, Brightness>) {
          detail::check_param(config.brightness, t.delta, "brightness");
        } else if constexpr (std::is_same_v<T, Contrast>) {
          detail::check_param(config.contrast, t.factor, "contrast");
        } else if constexpr (std::is_same_v<T, Blur>) {
          detail::check_param(config.blur_sigma, t.sigma, "blur");
        } else if constexpr (std::is_same_v<T, Noise>) {
          detail::check_param(config.noise_sigma, t.sigma, "noise");
        } else {
          detail::check_param(config.perturb_fraction, t.fraction, "pixel_perturb fraction");
          detail::check_param(config.perturb_magnitude, t.magnitude, "pixel_perturb magnitude");
        }
      },
      transform);
}

// Applies one transform. Output has the input's shape, pixels clamped to
// [0, 1]; the result depends only on (transform, image).
inline ImageTensor apply_transform(const Transform& transform, const ImageTensor& image,
                                   const MutationConfig& config) {
  require_valid(image);
  validate_transform(transform, config);
  return std::visit(
      [&](const auto& t) -> ImageTensor {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, Translate>) {
          const double tx = t.dx * static_cast<double>(image.width);
          const double ty = t.dy * static_cast<double>(image.height);
          return detail::warp(image, [=](double x, double y) { return std::pair{x - tx, y - ty}; });
        } else if constexpr (std::is_same_v<T, Rotate>) {
          const double th = t.degrees * std::numbers::pi / 180.0;
          const double cs = std::cos(th), sn = std::sin(th);
          return detail::warp(image, [=](double x, double y) {
            return std::pair{cs * x - sn * y, sn * x + cs * y};
          });
        } else if constexpr (std::is_same_v<T, Scale>) {
          return detail::warp(image, [s = t.factor](double x, double y) {
            return std::pair{x / s, y / s};
          });
        } else if constexpr (std::is_same_v<T, Shear>) {
          return detail::warp(image, [k = t.factor](double x, double y) {
            return std::pair{x - k * y, y};
          });
        } else if constexpr (std::is_same_v<T, Brightness>) {
          ImageTensor out = image;
          for (float& v : out.pixels) v = static_cast<float>(v + t.delta);
          out.clamp();
          return out;
        } else if constexpr (std::is_same_v<T, Contrast>) {
          ImageTensor out = image;
          const double mu = image.mean();
          for (float& v : out.pixels) v = static_cast<float>((v - mu) * t.factor + mu);
          out.clamp();
          return out;
        } else if constexpr (std::is_same_v<T, Blur>) {
          return detail::gaussian_blur(image, t.sigma);
        } else if constexpr (std::is_same_v<T, Noise>) {
          ImageTensor out = image;
          Rng rng(t.stream);
          std::normal_distribution<double> normal(0.0, 1.0);
          for (float& v : out.pixels) v = static_cast<float>(v + t.sigma * normal(rng));
          out.clamp();
          return out;
        } else {
          ImageTensor out = image;
          Rng rng(t.stream);
          const auto count = static_cast<std::size_t>(
              std::ceil(t.fraction * static_cast<double>(image.size()) - 1e-9));
          std::uniform_int_distribution<std::size_t> pick(0, image.size() - 1);
          std::bernoulli_distribution sign(0.5);
          for (std::size_t i = 0; i < count; ++i) {
            const std::size_t idx = pick(rng);
            const double step = sign(rng) ? t.magnitude : -t.magnitude;
            out.pixels[idx] = static_cast<float>(out.pixels[idx] + step);
          }
          out.clamp();
          return out;
        }
      },
      transform);
}

namespace detail {
inline double draw(Rng& rng, const Range& r) {
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}
}  // namespace detail

// Draws a kind uniformly over the enabled kinds and its parameters uniformly
// over the configured ranges.
inline Transform draw_transform(Rng& rng, const MutationConfig& config) {
  if (config.enabled.empty()) throw Error(Errc::invalid_argument, "no mutation kinds enabled");
  std::uniform_int_distribution<std::size_t> choose(0, config.enabled.size() - 1);
  switch (config.enabled[choose(rng)]) {
    case MutationKind::translate: {
      const double dx = detail::draw(rng, config.translate);
      const double dy = detail::draw(rng, config.translate);
      return Translate{dx, dy};
    }
    case MutationKind::rotate: return Rotate{detail::draw(rng, config.rotate_degrees)};
    case MutationKind::scale: return Scale{detail::draw(rng, config.scale)};
    case MutationKind::shear: return Shear{detail::draw(rng, config.shear)};
    case MutationKind::brightness: return Brightness{detail::draw(rng, config.brightness)};
    case MutationKind::contrast: return Contrast{detail::draw(rng, config.contrast)};
    case MutationKind::blur: return Blur{detail::draw(rng, config.blur_sigma)};
    case MutationKind::noise: {
      const double sigma = detail::draw(rng, config.noise_sigma);
      return Noise{sigma, rng()};
    }
    case MutationKind::pixel_perturb: {
      const double fraction = detail::draw(rng, config.perturb_fraction);
      const double magnitude = detail::draw(rng, config.perturb_magnitude);
      return PixelPerturb{fraction, magnitude, rng()};
    }
  }
  throw Error(Errc::invalid_argument, "unreachable mutation kind");
}

inline std::pair<ImageTensor, MutationRecord> random_mutation(const ImageTensor& seed_image,
                                                              Rng& rng,
                                                              const MutationConfig& config,
                                                              std::size_t parent = 0,
                                                              std::uint64_t draw_index = 0) {
  MutationRecord record{draw_transform(rng, config), parent, draw_index};
  ImageTensor out = apply_transform(record.transform, seed_image, config);
  return {std::move(out), std::move(record)};
}

inline nlohmann::json to_json(const Transform& transform) {
  nlohmann::json j;
  j["kind"] = mutation_kind_name(kind_of(transform));
  std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, Translate>) {
          j["dx"] = t.dx;
          j["dy"] = t.dy;
        } else if constexpr (std::is_same_v<T, Rotate>) {
          j["degrees"] = t.degrees;
        } else if constexpr (std::is_same_v<T, Scale> || std::is_same_v<T, Shear> ||
                             std::is_same_v<T, Contrast>) {
          j["factor"] = t.factor;
        } else if constexpr (std::is_same_v<T, Brightness>) {
          j["delta"] = t.delta;
        } else if constexpr (std::is_same_v<T, Blur>) {
          j["sigma"] = t.sigma;
        } else if constexpr (std::is_same_v<T, Noise>) {
          j["sigma"] = t.sigma;
          j["stream"] = t.stream;
        } else {
          j["fraction"] = t.fraction;
          j["magnitude"] = t.magnitude;
          j["stream"] = t.stream;
        }
      },
      transform);
  return j;
}

inline Transform transform_from_json(const nlohmann::json& j) {
  switch (parse_mutation_kind(j.at("kind").get<std::string>())) {
    case MutationKind::translate: return Translate{j.at("dx").get<double>(), j.at("dy").get<double>()};
    case MutationKind::rotate: return Rotate{j.at("degrees").get<double>()};
    case MutationKind::scale: return Scale{j.at("factor").get<double>()};
    case MutationKind::shear: return Shear{j.at("factor").get<double>()};
    case MutationKind::brightness: return Brightness{j.at("delta").get<double>()};
    case MutationKind::contrast: return Contrast{j.at("factor").get<double>()};
    case MutationKind::blur: return Blur{j.at("sigma").get<double>()};
    case MutationKind::noise:
      return Noise{j.at("sigma").get<double>(), j.at("stream").get<std::uint64_t>()};
    case MutationKind::pixel_perturb:
      return PixelPerturb{j.at("fraction").get<double>(), j.at("magnitude").get<double>(),
                          j.at("stream").get<std::uint64_t>()};
  }
  throw Error(Errc::invalid_argument, "unreachable mutation kind");
}

inline nlohmann::json to_json(const MutationRecord& record) {
  return {{"transform", to_json(record.transform)},
          {"parent", record.parent},
          {"draw_index", record.draw_index}};
}

inline MutationRecord mutation_record_from_json(const nlohmann::json& j) {
  return {transform_from_json(j.at("transform")), j.at("parent").get<std::size_t>(),
          j.at("draw_index").get<std::uint64_t>()};
}

}  // namespace nfz

#endif  // NFZ_MUTATION_HPP_
