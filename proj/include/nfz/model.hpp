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

// Minimal feed-forward runtime for stimulus encoders: dense and stride-1
// conv2d layers, elementwise activations, and an affine clamp. Values are
// carried as float; dot products accumulate in double.

#ifndef NFZ_MODEL_HPP_
#define NFZ_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "nfz/error.hpp"
#include "nfz/image.hpp"

namespace nfz {

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<float> weight;  // [out][in]
  std::vector<float> bias;    // [out]
};

struct Conv2dLayer {
  std::size_t in_channels = 0;
  std::size_t in_height = 0;
  std::size_t in_width = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t padding = 0;    // zero padding on every side
  std::vector<float> weight;  // [out_channels][in_channels][kernel_h][kernel_w]
  std::vector<float> bias;    // [out_channels]

  std::size_t out_height() const { return in_height + 2 * padding + 1 - kernel_h; }
  std::size_t out_width() const { return in_width + 2 * padding + 1 - kernel_w; }
};

enum class Activation { relu, sigmoid, tanh };

struct ActivationLayer {
  Activation fn = Activation::relu;
  std::size_t size = 0;
};

// y = clamp(scale * x + offset, lo, hi)
struct ScaleClampLayer {
  std::size_t size = 0;
  float scale = 1.0f;
  float offset = 0.0f;
  float lo = 0.0f;
  float hi = 1.0f;
};

using Layer = std::variant<DenseLayer, Conv2dLayer, ActivationLayer, ScaleClampLayer>;

inline std::size_t layer_input_size(const Layer& layer) {
  return std::visit(
      [](const auto& l) -> std::size_t {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, DenseLayer>) return l.in;
        else if constexpr (std::is_same_v<T, Conv2dLayer>)
          return l.in_channels * l.in_height * l.in_width;
        else return l.size;
      },
      layer);
}

inline std::size_t layer_output_size(const Layer& layer) {
  return std::visit(
      [](const auto& l) -> std::size_t {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, DenseLayer>) return l.out;
        else if constexpr (std::is_same_v<T, Conv2dLayer>)
          return l.out_channels * l.out_height() * l.out_width();
        else return l.size;
      },
      layer);
}

// How the raw output vector maps onto electrodes. With three parameters
// per electrode the raw vector is all frequencies, then all pulse
// durations, then all amplitudes. With one, it is amplitudes only and
// frequency/pulse duration come from the fixed values.
struct EncoderOutputLayout {
  std::size_t electrode_count = 0;
  std::size_t params_per_electrode = 3;
  std::optional<double> fixed_frequency_hz;
  std::optional<double> fixed_pulse_ms;

  std::size_t raw_length() const { return electrode_count * params_per_electrode; }

  void validate() const {
    if (electrode_count == 0)
      throw Error(Errc::bad_header, "layout electrode_count must be positive");
    if (params_per_electrode != 3 && params_per_electrode != 1)
      throw Error(Errc::bad_header, "layout params_per_electrode must be 1 or 3");
    const bool fixed = fixed_frequency_hz.has_value() && fixed_pulse_ms.has_value();
    const bool any_fixed = fixed_frequency_hz.has_value() || fixed_pulse_ms.has_value();
    if (params_per_electrode == 1 && !fixed)
      throw Error(Errc::bad_header,
                  "amplitude-only layout requires fixed frequency and pulse duration");
    if (params_per_electrode == 3 && any_fixed)
      throw Error(Errc::bad_header, "fixed values are only allowed for amplitude-only layouts");
  }

  friend bool operator==(const EncoderOutputLayout&, const EncoderOutputLayout&) = default;
};

struct ModelGraph {
  std::size_t input_height = 0;
  std::size_t input_width = 0;
  std::vector<Layer> layers;
  EncoderOutputLayout layout;
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t input_size() const { return input_height * input_width; }
  std::size_t output_size() const {
    return layers.empty() ? 0 : layer_output_size(layers.back());
  }

  std::vector<std::size_t> layer_sizes() const {
    std::vector<std::size_t> sizes;
    for (const auto& l : layers) sizes.push_back(layer_output_size(l));
    return sizes;
  }

  // Checks every structural invariant; errors carry the offending layer.
  void validate() const {
    if (input_height == 0 || input_width == 0)
      throw Error(Errc::shape_mismatch, "input shape must be positive");
    if (layers.empty()) throw Error(Errc::shape_mismatch, "model has no layers");
    layout.validate();
    std::size_t previous = input_size();
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& layer = layers[i];
      if (layer_input_size(layer) != previous)
        throw Error(Errc::shape_mismatch,
                    "declared input size " + std::to_string(layer_input_size(layer)) +
                        " does not match previous output size " + std::to_string(previous),
                    i);
      std::visit(
          [i](const auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, DenseLayer>) {
              if (l.out == 0 || l.weight.size() != l.in * l.out || l.bias.size() != l.out)
                throw Error(Errc::length_mismatch, "dense tensor sizes do not match shape", i);
            } else if constexpr (std::is_same_v<T, Conv2dLayer>) {
              if (l.kernel_h == 0 || l.kernel_w == 0 || l.out_channels == 0 ||
                  l.kernel_h > l.in_height + 2 * l.padding ||
                  l.kernel_w > l.in_width + 2 * l.padding)
                throw Error(Errc::shape_mismatch, "conv2d kernel does not fit its input", i);
              if (l.weight.size() != l.out_channels * l.in_channels * l.kernel_h * l.kernel_w ||
                  l.bias.size() != l.out_channels)
                throw Error(Errc::length_mismatch, "conv2d tensor sizes do not match shape", i);
            } else if constexpr (std::is_same_v<T, ScaleClampLayer>) {
              if (!(l.lo <= l.hi))
                throw Error(Errc::bad_header, "scale_clamp requires lo <= hi", i);
            }
          },
          layer);
      previous = layer_output_size(layer);
    }
    if (previous != layout.raw_length())
      throw Error(Errc::shape_mismatch,
                  "final output size " + std::to_string(previous) +
                      " does not match layout raw length " +
                      std::to_string(layout.raw_length()),
                  layers.size() - 1);
  }
};

// Post-layer values of every layer, indexed [layer][offset].
struct ActivationTrace {
  std::vector<std::vector<float>> layers;

  std::size_t neuron_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.size();
    return n;
  }

  friend bool operator==(const ActivationTrace&, const ActivationTrace&) = default;
};

struct ForwardResult {
  std::vector<float> output;
  std::optional<ActivationTrace> trace;
};

namespace detail {

inline void apply_dense(const DenseLayer& l, std::span<const float> x, std::vector<float>& y) {
  y.resize(l.out);
  for (std::size_t o = 0; o < l.out; ++o) {
    double acc = l.bias[o];
    const float* w = l.weight.data() + o * l.in;
    for (std::size_t i = 0; i < l.in; ++i)
      acc += static_cast<double>(w[i]) * static_cast<double>(x[i]);
    y[o] = static_cast<float>(acc);
  }
}

inline void apply_conv(const Conv2dLayer& l, std::span<const float> x, std::vector<float>& y) {
  const std::size_t oh = l.out_height(), ow = l.out_width();
  const auto pad = static_cast<std::ptrdiff_t>(l.padding);
  const auto ih = static_cast<std::ptrdiff_t>(l.in_height);
  const auto iw = static_cast<std::ptrdiff_t>(l.in_width);
  y.resize(l.out_channels * oh * ow);
  for (std::size_t oc = 0; oc < l.out_channels; ++oc) {
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        double acc = l.bias[oc];
        for (std::size_t ic = 0; ic < l.in_channels; ++ic) {
          const float* w = l.weight.data() + ((oc * l.in_channels + ic) * l.kernel_h) * l.kernel_w;
          const float* plane = x.data() + ic * l.in_height * l.in_width;
          for (std::size_t kr = 0; kr < l.kernel_h; ++kr) {
            const auto sr = static_cast<std::ptrdiff_t>(r + kr) - pad;
            if (sr < 0 || sr >= ih) continue;
            for (std::size_t kc = 0; kc < l.kernel_w; ++kc) {
              const auto sc = static_cast<std::ptrdiff_t>(c + kc) - pad;
              if (sc < 0 || sc >= iw) continue;
              acc += static_cast<double>(w[kr * l.kernel_w + kc]) *
                     static_cast<double>(plane[sr * iw + sc]);
            }
          }
        }
        y[(oc * oh + r) * ow + c] = static_cast<float>(acc);
      }
    }
  }
}

inline float activate(Activation fn, float v) {
  switch (fn) {
    case Activation::relu: return v > 0.0f ? v : 0.0f;
    case Activation::sigmoid: return 1.0f / (1.0f + std::exp(-v));
    case Activation::tanh: return std::tanh(v);
  }
  return v;
}

}  // namespace detail

// Evaluates the model on one image. Pure: scratch buffers are local, so a
// ModelGraph may be shared by concurrent callers.
inline ForwardResult forward(const ModelGraph& model, const ImageTensor& image,
                             bool trace = false) {
  if (image.height != model.input_height || image.width != model.input_width)
    throw Error(Errc::shape_mismatch,
                "image is " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                    ", model expects " + std::to_string(model.input_height) + "x" +
                    std::to_string(model.input_width));
  ForwardResult result;
  if (trace) result.trace.emplace();
  std::vector<float> current = image.pixels;
  std::vector<float> next;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, DenseLayer>) {
            detail::apply_dense(l, current, next);
          } else if constexpr (std::is_same_v<T, Conv2dLayer>) {
            detail::apply_conv(l, current, next);
          } else if constexpr (std::is_same_v<T, ActivationLayer>) {
            next.resize(current.size());
            std::transform(current.begin(), current.end(), next.begin(),
                           [fn = l.fn](float v) { return detail::activate(fn, v); });
          } else {
            next.resize(current.size());
            std::transform(current.begin(), current.end(), next.begin(), [&l](float v) {
              return std::clamp(l.scale * v + l.offset, l.lo, l.hi);
            });
          }
        },
        model.layers[i]);
    if (!std::all_of(next.begin(), next.end(), [](float v) { return std::isfinite(v); }))
      throw Error(Errc::non_finite, "non-finite value produced", i);
    std::swap(current, next);
    if (trace) result.trace->layers.push_back(current);
  }
  result.output = std::move(current);
  return result;
}

// Per-electrode stimulation parameters in canonical units: Hz, ms, uA.
struct StimulationPattern {
  std::vector<double> frequency_hz;
  std::vector<double> pulse_ms;
  std::vector<double> amplitude_ua;

  std::size_t electrode_count() const { return amplitude_ua.size(); }

  friend bool operator==(const StimulationPattern&, const StimulationPattern&) = default;
};

inline StimulationPattern decode_stimulation(std::span<const float> raw,
                                             const EncoderOutputLayout& layout) {
  layout.validate();
  if (raw.size() != layout.raw_length())
    throw Error(Errc::length_mismatch, "raw output has " + std::to_string(raw.size()) +
                                           " values, layout expects " +
                                           std::to_string(layout.raw_length()));
  for (float v : raw)
    if (!std::isfinite(v)) throw Error(Errc::non_finite, "raw output contains non-finite value");
  const std::size_t n = layout.electrode_count;
  StimulationPattern pattern;
  pattern.frequency_hz.resize(n);
  pattern.pulse_ms.resize(n);
  pattern.amplitude_ua.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (layout.params_per_electrode == 3) {
      pattern.frequency_hz[i] = raw[i];
      pattern.pulse_ms[i] = raw[n + i];
      pattern.amplitude_ua[i] = raw[2 * n + i];
    } else {
      pattern.frequency_hz[i] = *layout.fixed_frequency_hz;
      pattern.pulse_ms[i] = *layout.fixed_pulse_ms;
      pattern.amplitude_ua[i] = raw[i];
    }
  }
  return pattern;
}

}  // namespace nfz

#endif  // NFZ_MODEL_HPP_
