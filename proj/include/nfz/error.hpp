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

#ifndef NFZ_ERROR_HPP_
#define NFZ_ERROR_HPP_

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nfz {

enum class Errc {
  bad_magic,
  bad_header,
  length_mismatch,
  shape_mismatch,
  unknown_layer,
  non_finite,
  invalid_stimulus,
  invalid_argument,
  empty_input,
  missing_profile,
  config,
  io,
};

inline std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::bad_magic: return "bad_magic";
    case Errc::bad_header: return "bad_header";
    case Errc::length_mismatch: return "length_mismatch";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::unknown_layer: return "unknown_layer";
    case Errc::non_finite: return "non_finite";
    case Errc::invalid_stimulus: return "invalid_stimulus";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::empty_input: return "empty_input";
    case Errc::missing_profile: return "missing_profile";
    case Errc::config: return "config";
    case Errc::io: return "io";
  }
  return "unknown";
}

// All engine failures surface as this exception. `layer` is set for model
// errors that can be attributed to a layer of the graph.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message,
        std::optional<std::size_t> layer = std::nullopt)
      : std::runtime_error(format(code, message, layer)),
        code_(code),
        layer_(layer) {}

  Errc code() const noexcept { return code_; }
  std::optional<std::size_t> layer() const noexcept { return layer_; }

 private:
  static std::string format(Errc code, const std::string& message,
                            std::optional<std::size_t> layer) {
    std::string out(errc_name(code));
    if (layer) out += " (layer " + std::to_string(*layer) + ")";
    out += ": ";
    out += message;
    return out;
  }

  Errc code_;
  std::optional<std::size_t> layer_;
};

}  // namespace nfz

#endif  // NFZ_ERROR_HPP_
