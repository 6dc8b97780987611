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

#ifndef NFZ_FEATURES_HPP_
#define NFZ_FEATURES_HPP_

#include <memory>
#include <string>
#include <vector>

#include "nfz/error.hpp"
#include "nfz/image.hpp"
#include "nfz/model.hpp"

namespace nfz {

using FeatureVector = std::vector<double>;

// Maps images to feature vectors: either the final-layer output of a model
// or adaptive mean pooling of the pixels onto a grid x grid raster.
class FeatureExtractor {
 public:
  static FeatureExtractor pooled(std::size_t grid = 16) {
    if (grid == 0) throw Error(Errc::invalid_argument, "pooling grid must be positive");
    FeatureExtractor f;
    f.grid_ = grid;
    return f;
  }

  static FeatureExtractor from_model(ModelGraph model, std::string name = "model") {
    model.validate();
    FeatureExtractor f;
    f.model_ = std::make_shared<const ModelGraph>(std::move(model));
    f.name_ = std::move(name);
    return f;
  }

  std::string id() const {
    return model_ ? "nef:" + name_ : "pooled:" + std::to_string(grid_) + "x" + std::to_string(grid_);
  }

  FeatureVector extract(const ImageTensor& image) const {
    if (model_) {
      const auto out = forward(*model_, image).output;
      return {out.begin(), out.end()};
    }
    FeatureVector features(grid_ * grid_);
    for (std::size_t i = 0; i < grid_; ++i) {
      const std::size_t r0 = i * image.height / grid_;
      const std::size_t r1 = std::max(r0 + 1, ((i + 1) * image.height + grid_ - 1) / grid_);
      for (std::size_t j = 0; j < grid_; ++j) {
        const std::size_t c0 = j * image.width / grid_;
        const std::size_t c1 = std::max(c0 + 1, ((j + 1) * image.width + grid_ - 1) / grid_);
        double sum = 0.0;
        for (std::size_t r = r0; r < r1; ++r)
          for (std::size_t c = c0; c < c1; ++c) sum += image.at(r, c);
        features[i * grid_ + j] = sum / static_cast<double>((r1 - r0) * (c1 - c0));
      }
    }
    return features;
  }

 private:
  FeatureExtractor() = default;

  std::size_t grid_ = 16;
  std::shared_ptr<const ModelGraph> model_;
  std::string name_;
};

}  // namespace nfz

#endif  // NFZ_FEATURES_HPP_
