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

// Fixture encoders with analytically known input-to-output maps, plus the
// seed and profiling images that go with the planted retinal encoder.
//
// Planted retinal encoder (18x18 input, 225 electrodes on a 15x15 grid).
// For the 4x4 window w_i under electrode i, with m_i its mean and d_i the
// mean of its left two columns minus the mean of its right two:
//
//   f_i = f_base + f_gain * |d_i|      Hz
//   p_i = pulse                        ms
//   a_i = max(0, gain * (m_i - theta)) uA
//
// The clamped twin appends a scale_clamp to [0, clamp_hi] on every output.

#ifndef NFZ_FIXTURES_HPP_
#define NFZ_FIXTURES_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "nfz/image.hpp"
#include "nfz/model.hpp"
#include "nfz/mutation.hpp"

namespace nfz::fixtures {

struct PlantedRetinal {
  double f_base = 40.0;
  double f_gain = 600.0;
  double pulse_ms = 1.0;
  double gain = 2000.0;
  double theta = 0.6;
  bool clamp = false;
  double clamp_hi = 600.0;
};

inline constexpr std::size_t kPlantedSide = 18;
inline constexpr std::size_t kPlantedGrid = 15;

inline ModelGraph planted_retinal(const PlantedRetinal& p = {}) {
  ModelGraph model;
  model.input_height = kPlantedSide;
  model.input_width = kPlantedSide;

  Conv2dLayer window{1, kPlantedSide, kPlantedSide, 3, 4, 4, 0, {}, {0.0f, 0.0f, 0.0f}};
  window.weight.assign(3 * 16, 0.0f);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      const float edge = c < 2 ? 0.125f : -0.125f;
      window.weight[0 * 16 + r * 4 + c] = 1.0f / 16.0f;
      window.weight[1 * 16 + r * 4 + c] = edge;
      window.weight[2 * 16 + r * 4 + c] = -edge;
    }
  }
  const std::size_t cells = kPlantedGrid * kPlantedGrid;
  // channels: 0 mean, 1 relu(d), 2 relu(-d)
  Conv2dLayer mix{3, kPlantedGrid, kPlantedGrid, 3, 1, 1, 0, {}, {}};
  const auto fg = static_cast<float>(p.f_gain);
  const auto g = static_cast<float>(p.gain);
  mix.weight = {0.0f, fg, fg,   // frequency
                0.0f, 0.0f, 0.0f,  // pulse
                g, 0.0f, 0.0f};   // amplitude
  mix.bias = {static_cast<float>(p.f_base), static_cast<float>(p.pulse_ms),
              static_cast<float>(-p.gain * p.theta)};

  model.layers.emplace_back(window);
  model.layers.emplace_back(ActivationLayer{Activation::relu, 3 * cells});
  model.layers.emplace_back(mix);
  model.layers.emplace_back(ActivationLayer{Activation::relu, 3 * cells});
  if (p.clamp)
    model.layers.emplace_back(
        ScaleClampLayer{3 * cells, 1.0f, 0.0f, 0.0f, static_cast<float>(p.clamp_hi)});
  model.layout = {cells, 3, std::nullopt, std::nullopt};
  model.metadata = {{"fixture", p.clamp ? "planted-retinal-clamped" : "planted-retinal"},
                    {"frequency_hz", {{"base", p.f_base}, {"gain_abs_edge", p.f_gain}}},
                    {"pulse_ms", p.pulse_ms},
                    {"amplitude_ua", {{"gain", p.gain}, {"threshold", p.theta}}},
                    {"window", "4x4 valid, stride 1"}};
  if (p.clamp) model.metadata["clamp_hi"] = p.clamp_hi;
  return model;
}

// Oracle for planted_retinal: the (f, p, a) of electrode (row, col).
inline std::array<double, 3> planted_retinal_oracle(const ImageTensor& image, std::size_t row,
                                                    std::size_t col, const PlantedRetinal& p = {}) {
  double sum = 0.0;
  double left = 0.0;
  double right = 0.0;
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) {
      const double v = image.at(row + r, col + c);
      sum += v;
      (c < 2 ? left : right) += v;
    }
  const double m = sum / 16.0;
  const double d = (left - right) / 8.0;
  std::array<double, 3> out{p.f_base + p.f_gain * std::abs(d), p.pulse_ms,
                            std::max(0.0, p.gain * (m - p.theta))};
  if (p.clamp)
    for (auto& v : out) v = std::clamp(v, 0.0, p.clamp_hi);
  return out;
}

namespace detail {
inline void paint_blob(ImageTensor& img, std::size_t r0, std::size_t c0, std::size_t h,
                       std::size_t w, float value) {
  for (std::size_t r = r0; r < std::min(img.height, r0 + h); ++r)
    for (std::size_t c = c0; c < std::min(img.width, c0 + w); ++c) img.at(r, c) = value;
}
}  // namespace detail

// Dark scenes with dim blobs, plus one scene whose blob already exceeds the
// charge-density limit (index 5).
inline std::vector<ImageTensor> planted_seeds() {
  struct Blob {
    std::size_t r, c, h, w;
    float v;
  };
  const std::vector<std::pair<float, std::vector<Blob>>> scenes = {
      {0.05f, {{3, 3, 6, 6, 0.50f}}},
      {0.10f, {{8, 2, 5, 7, 0.45f}, {2, 11, 4, 4, 0.40f}}},
      {0.08f, {{6, 6, 7, 7, 0.55f}}},
      {0.12f, {{1, 1, 5, 5, 0.35f}, {11, 11, 6, 6, 0.50f}}},
      {0.06f, {{10, 4, 6, 8, 0.48f}}},
      {0.10f, {{6, 6, 6, 6, 0.97f}}},
      {0.15f, {{2, 8, 8, 5, 0.42f}}},
      {0.04f, {{12, 1, 5, 10, 0.52f}}},
  };
  std::vector<ImageTensor> seeds;
  for (const auto& [background, blobs] : scenes) {
    ImageTensor img(kPlantedSide, kPlantedSide, background);
    for (const auto& b : blobs) detail::paint_blob(img, b.r, b.c, b.h, b.w, b.v);
    seeds.push_back(std::move(img));
  }
  return seeds;
}

// Random single-blob scenes spanning the brightness range, for profiling.
inline std::vector<ImageTensor> planted_profiling_set(std::size_t count = 64,
                                                      std::uint64_t seed = 7) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pos(0, kPlantedSide - 4);
  std::uniform_int_distribution<std::size_t> size(3, 9);
  std::uniform_real_distribution<float> bg(0.0f, 0.2f);
  std::uniform_real_distribution<float> fg(0.2f, 1.0f);
  std::vector<ImageTensor> out;
  for (std::size_t i = 0; i < count; ++i) {
    ImageTensor img(kPlantedSide, kPlantedSide, bg(rng));
    const std::size_t r = pos(rng), c = pos(rng), h = size(rng), w = size(rng);
    detail::paint_blob(img, r, c, h, w, fg(rng));
    out.push_back(std::move(img));
  }
  return out;
}

namespace detail {
inline std::vector<float> normal_weights(Rng& rng, std::size_t n, double sigma) {
  std::normal_distribution<double> dist(0.0, sigma);
  std::vector<float> w(n);
  for (auto& v : w) v = static_cast<float>(dist(rng));
  return w;
}
}  // namespace detail

// Random-weight retinal-shaped encoder: 8x8 -> conv(1->2, 3x3) -> relu ->
// dense(72 -> 675), 225 electrodes in f,p,a order.
inline ModelGraph retinal_tiny(std::uint64_t seed = 1) {
  Rng rng(seed);
  ModelGraph model;
  model.input_height = 8;
  model.input_width = 8;
  Conv2dLayer conv{1, 8, 8, 2, 3, 3, 0, detail::normal_weights(rng, 18, 0.3), {0.1f, -0.1f}};
  DenseLayer dense{72, 675, detail::normal_weights(rng, 72 * 675, 0.1), {}};
  dense.bias.resize(675);
  for (std::size_t i = 0; i < 675; ++i)
    dense.bias[i] = i < 225 ? 60.0f : i < 450 ? 0.5f : 50.0f;
  model.layers.emplace_back(conv);
  model.layers.emplace_back(ActivationLayer{Activation::relu, 72});
  model.layers.emplace_back(dense);
  model.layers.emplace_back(ActivationLayer{Activation::relu, 675});
  model.layout = {225, 3, std::nullopt, std::nullopt};
  model.metadata = {{"fixture", "retinal-tiny"}, {"seed", seed}};
  return model;
}

// Random-weight cortical-shaped encoder: 8x8 -> dense(64 -> 60) -> relu,
// amplitudes only at a fixed 50 Hz / 0.2 ms.
inline ModelGraph cortical_tiny(std::uint64_t seed = 1) {
  Rng rng(seed);
  ModelGraph model;
  model.input_height = 8;
  model.input_width = 8;
  DenseLayer dense{64, 60, detail::normal_weights(rng, 64 * 60, 5.0), std::vector<float>(60, 20.0f)};
  model.layers.emplace_back(dense);
  model.layers.emplace_back(ActivationLayer{Activation::relu, 60});
  model.layout = {60, 1, 50.0, 0.2};
  model.metadata = {{"fixture", "cortical-tiny"}, {"seed", seed}};
  return model;
}

// 2x2 input passed straight through to four amplitude-only electrodes.
inline ModelGraph identity_dense(double fixed_frequency_hz = 50.0, double fixed_pulse_ms = 0.2) {
  ModelGraph model;
  model.input_height = 2;
  model.input_width = 2;
  DenseLayer dense{4, 4, std::vector<float>(16, 0.0f), std::vector<float>(4, 0.0f)};
  for (std::size_t i = 0; i < 4; ++i) dense.weight[i * 4 + i] = 1.0f;
  model.layers.emplace_back(dense);
  model.layout = {4, 1, fixed_frequency_hz, fixed_pulse_ms};
  model.metadata = {{"fixture", "identity"}};
  return model;
}

// Planted cortical encoder: 7x11 input, 2x2 mean windows -> 60 electrodes,
// a_i = gain * m_i at 50 Hz / 0.2 ms (CD iff m_i > 20.4 / (0.2 * gain)).
inline ModelGraph planted_cortical(double gain = 200.0) {
  ModelGraph model;
  model.input_height = 7;
  model.input_width = 11;
  const auto q = static_cast<float>(gain / 4.0);
  Conv2dLayer conv{1, 7, 11, 1, 2, 2, 0, {q, q, q, q}, {0.0f}};
  model.layers.emplace_back(conv);
  model.layout = {60, 1, 50.0, 0.2};
  model.metadata = {{"fixture", "planted-cortical"}, {"amplitude_gain", gain}};
  return model;
}

}  // namespace nfz::fixtures

#endif  // NFZ_FIXTURES_HPP_
