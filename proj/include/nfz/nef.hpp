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

// NEF container:
//
//   "NEF1" | header_length (u32 LE) | UTF-8 JSON header | tensor blob
//
// The blob is the concatenation of f32 LE tensors, row-major, in the order
// the header's "tensors" array lists them. Header schema:
//
//   {
//     "input_shape": [height, width],
//     "layers": [
//       {"kind": "dense", "in": N, "out": M},
//       {"kind": "conv2d", "in_channels": C, "in_height": H, "in_width": W,
//        "out_channels": K, "kernel": [kh, kw], "padding": P},
//       {"kind": "relu" | "sigmoid" | "tanh", "size": N},
//       {"kind": "scale_clamp", "size": N, "scale": s, "offset": o,
//        "lo": lo, "hi": hi}
//     ],
//     "tensors": [{"layer": i, "name": "weight" | "bias", "shape": [...]}],
//     "layout": {"electrode_count": E, "params_per_electrode": 3 | 1,
//                "ordering": "f,p,a" | "a",
//                "fixed_frequency_hz": f, "fixed_pulse_ms": p},
//     "metadata": {...}
//   }
//
// Dense weights are [out, in]; conv2d weights are [out_channels,
// in_channels, kernel_h, kernel_w]; biases are one value per output
// (channel).

#ifndef NFZ_NEF_HPP_
#define NFZ_NEF_HPP_

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nfz/error.hpp"
#include "nfz/image.hpp"
#include "nfz/model.hpp"

namespace nfz {

inline constexpr std::string_view kNefMagic = "NEF1";

namespace detail {

struct TensorSlot {
  std::vector<float>* data;
  std::vector<std::size_t> shape;
};

inline std::vector<TensorSlot> tensor_slots(Layer& layer) {
  return std::visit(
      [](auto& l) -> std::vector<TensorSlot> {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, DenseLayer>)
          return {{&l.weight, {l.out, l.in}}, {&l.bias, {l.out}}};
        else if constexpr (std::is_same_v<T, Conv2dLayer>)
          return {{&l.weight, {l.out_channels, l.in_channels, l.kernel_h, l.kernel_w}},
                  {&l.bias, {l.out_channels}}};
        else
          return {};
      },
      layer);
}

inline std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string_view activation_name(Activation fn) {
  switch (fn) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "relu";
}

template <typename T>
T header_field(const nlohmann::json& j, const char* key, std::size_t layer) {
  if (!j.contains(key))
    throw Error(Errc::bad_header, std::string("missing field \"") + key + "\"", layer);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::bad_header, std::string("field \"") + key + "\" has the wrong type", layer);
  }
}

inline Layer parse_layer(const nlohmann::json& j, std::size_t index) {
  const auto kind = header_field<std::string>(j, "kind", index);
  if (kind == "dense") {
    DenseLayer l;
    l.in = header_field<std::size_t>(j, "in", index);
    l.out = header_field<std::size_t>(j, "out", index);
    return l;
  }
  if (kind == "conv2d") {
    Conv2dLayer l;
    l.in_channels = header_field<std::size_t>(j, "in_channels", index);
    l.in_height = header_field<std::size_t>(j, "in_height", index);
    l.in_width = header_field<std::size_t>(j, "in_width", index);
    l.out_channels = header_field<std::size_t>(j, "out_channels", index);
    const auto kernel = header_field<std::vector<std::size_t>>(j, "kernel", index);
    if (kernel.size() != 2) throw Error(Errc::bad_header, "conv2d kernel must be [kh, kw]", index);
    l.kernel_h = kernel[0];
    l.kernel_w = kernel[1];
    l.padding = j.value("padding", std::size_t{0});
    if (l.kernel_h == 0 || l.kernel_w == 0 ||
        l.kernel_h > l.in_height + 2 * l.padding || l.kernel_w > l.in_width + 2 * l.padding)
      throw Error(Errc::shape_mismatch, "conv2d kernel does not fit its input", index);
    return l;
  }
  if (kind == "relu" || kind == "sigmoid" || kind == "tanh") {
    ActivationLayer l;
    l.fn = kind == "relu" ? Activation::relu
                          : kind == "sigmoid" ? Activation::sigmoid : Activation::tanh;
    l.size = header_field<std::size_t>(j, "size", index);
    return l;
  }
  if (kind == "scale_clamp") {
    ScaleClampLayer l;
    l.size = header_field<std::size_t>(j, "size", index);
    l.scale = j.value("scale", 1.0f);
    l.offset = j.value("offset", 0.0f);
    l.lo = header_field<float>(j, "lo", index);
    l.hi = header_field<float>(j, "hi", index);
    return l;
  }
  throw Error(Errc::unknown_layer, "unknown layer kind \"" + kind + "\"", index);
}

inline nlohmann::json layer_header(const Layer& layer) {
  return std::visit(
      [](const auto& l) -> nlohmann::json {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, DenseLayer>)
          return {{"kind", "dense"}, {"in", l.in}, {"out", l.out}};
        else if constexpr (std::is_same_v<T, Conv2dLayer>)
          return {{"kind", "conv2d"},         {"in_channels", l.in_channels},
                  {"in_height", l.in_height}, {"in_width", l.in_width},
                  {"out_channels", l.out_channels},
                  {"kernel", {l.kernel_h, l.kernel_w}},
                  {"padding", l.padding}};
        else if constexpr (std::is_same_v<T, ActivationLayer>)
          return {{"kind", activation_name(l.fn)}, {"size", l.size}};
        else
          return {{"kind", "scale_clamp"}, {"size", l.size}, {"scale", l.scale},
                  {"offset", l.offset},    {"lo", l.lo},     {"hi", l.hi}};
      },
      layer);
}

inline nlohmann::json layout_header(const EncoderOutputLayout& layout) {
  nlohmann::json j = {{"electrode_count", layout.electrode_count},
                      {"params_per_electrode", layout.params_per_electrode},
                      {"ordering", layout.params_per_electrode == 3 ? "f,p,a" : "a"}};
  if (layout.fixed_frequency_hz) j["fixed_frequency_hz"] = *layout.fixed_frequency_hz;
  if (layout.fixed_pulse_ms) j["fixed_pulse_ms"] = *layout.fixed_pulse_ms;
  return j;
}

inline EncoderOutputLayout parse_layout(const nlohmann::json& j) {
  EncoderOutputLayout layout;
  try {
    layout.electrode_count = j.at("electrode_count").get<std::size_t>();
    layout.params_per_electrode = j.at("params_per_electrode").get<std::size_t>();
    if (j.contains("fixed_frequency_hz"))
      layout.fixed_frequency_hz = j.at("fixed_frequency_hz").get<double>();
    if (j.contains("fixed_pulse_ms")) layout.fixed_pulse_ms = j.at("fixed_pulse_ms").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_header, std::string("malformed layout block: ") + e.what());
  }
  const std::string expected = layout.params_per_electrode == 3 ? "f,p,a" : "a";
  if (j.value("ordering", expected) != expected)
    throw Error(Errc::bad_header, "unsupported output ordering \"" +
                                      j.value("ordering", std::string()) + "\"");
  layout.validate();
  return layout;
}

}  // namespace detail

// Parses and validates a NEF container. Deterministic: the same bytes always
// yield an identical graph.
inline ModelGraph load_model(std::span<const unsigned char> bytes) {
  if (bytes.size() < 8 || std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) != kNefMagic)
    throw Error(Errc::bad_magic, "container does not start with \"NEF1\"");
  const std::size_t header_length = detail::load_u32le(bytes.data() + 4);
  if (bytes.size() < 8 + header_length)
    throw Error(Errc::length_mismatch, "header length exceeds container size");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + header_length);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_header, std::string("header is not valid JSON: ") + e.what());
  }

  ModelGraph model;
  try {
    const auto shape = header.at("input_shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2) throw Error(Errc::bad_header, "input_shape must be [height, width]");
    model.input_height = shape[0];
    model.input_width = shape[1];
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::bad_header, "missing or malformed input_shape");
  }
  if (!header.contains("layers") || !header["layers"].is_array())
    throw Error(Errc::bad_header, "missing layers array");
  for (std::size_t i = 0; i < header["layers"].size(); ++i)
    model.layers.push_back(detail::parse_layer(header["layers"][i], i));
  if (!header.contains("layout")) throw Error(Errc::bad_header, "missing layout block");
  model.layout = detail::parse_layout(header["layout"]);
  if (header.contains("metadata")) model.metadata = header["metadata"];

  std::vector<std::vector<bool>> filled(model.layers.size());
  for (std::size_t i = 0; i < model.layers.size(); ++i)
    filled[i].assign(detail::tensor_slots(model.layers[i]).size(), false);

  const auto tensors = header.value("tensors", nlohmann::json::array());
  std::size_t offset = 8 + header_length;
  std::size_t blob_expected = 0;
  for (const auto& t : tensors) blob_expected += 4 * detail::element_count(t.value("shape", std::vector<std::size_t>{}));
  if (bytes.size() - offset != blob_expected)
    throw Error(Errc::length_mismatch, "tensor blob is " + std::to_string(bytes.size() - offset) +
                                           " bytes, header declares " +
                                           std::to_string(blob_expected));
  for (const auto& t : tensors) {
    const auto index = t.value("layer", std::size_t{0});
    if (index >= model.layers.size())
      throw Error(Errc::bad_header, "tensor references a missing layer", index);
    const auto name = t.value("name", std::string());
    const auto shape = t.value("shape", std::vector<std::size_t>{});
    auto slots = detail::tensor_slots(model.layers[index]);
    const std::size_t slot = name == "weight" ? 0 : name == "bias" ? 1 : slots.size();
    if (slot >= slots.size())
      throw Error(Errc::bad_header, "layer has no tensor named \"" + name + "\"", index);
    if (filled[index][slot])
      throw Error(Errc::bad_header, "tensor \"" + name + "\" given twice", index);
    if (shape != slots[slot].shape)
      throw Error(Errc::length_mismatch, "tensor \"" + name + "\" shape does not match layer", index);
    auto& data = *slots[slot].data;
    data.resize(detail::element_count(shape));
    for (auto& v : data) {
      v = std::bit_cast<float>(detail::load_u32le(bytes.data() + offset));
      offset += 4;
    }
    filled[index][slot] = true;
  }
  for (std::size_t i = 0; i < filled.size(); ++i)
    for (bool f : filled[i])
      if (!f) throw Error(Errc::length_mismatch, "layer is missing a tensor", i);
  model.validate();
  return model;
}

inline std::string save_model(const ModelGraph& model) {
  model.validate();
  nlohmann::json header;
  header["input_shape"] = {model.input_height, model.input_width};
  header["layers"] = nlohmann::json::array();
  header["tensors"] = nlohmann::json::array();
  std::string blob;
  ModelGraph copy = model;
  for (std::size_t i = 0; i < copy.layers.size(); ++i) {
    header["layers"].push_back(detail::layer_header(copy.layers[i]));
    const auto slots = detail::tensor_slots(copy.layers[i]);
    for (std::size_t s = 0; s < slots.size(); ++s) {
      header["tensors"].push_back(
          {{"layer", i}, {"name", s == 0 ? "weight" : "bias"}, {"shape", slots[s].shape}});
      for (float v : *slots[s].data) detail::store_u32le(std::bit_cast<std::uint32_t>(v), blob);
    }
  }
  header["layout"] = detail::layout_header(model.layout);
  header["metadata"] = model.metadata;
  const std::string text = header.dump();
  std::string out(kNefMagic);
  detail::store_u32le(static_cast<std::uint32_t>(text.size()), out);
  out += text;
  out += blob;
  return out;
}

inline ModelGraph load_model(std::string_view bytes) {
  return load_model(std::span<const unsigned char>(
      reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()));
}

inline ModelGraph load_model_file(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  return load_model(bytes);
}

inline void save_model_file(const ModelGraph& model, const std::filesystem::path& path) {
  const auto bytes = save_model(model);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io, "cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace nfz

#endif  // NFZ_NEF_HPP_
