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

#include <fstream>
#include <functional>

#include <gtest/gtest.h>
#include <png.h>

#include "support.hpp"

namespace nfz {
namespace {

ModelGraph two_to_one() {
  ModelGraph m;
  m.input_height = 1;
  m.input_width = 2;
  m.layers.emplace_back(DenseLayer{2, 1, {2.0f, -1.0f}, {0.5f}});
  m.layers.emplace_back(ActivationLayer{Activation::relu, 1});
  m.layout = {1, 1, 50.0, 0.2};
  return m;
}

TEST(Forward, IdentityDense) {
  const auto m = fixtures::identity_dense();
  const auto out = forward(m, ImageTensor(2, 2, {0.1f, 0.2f, 0.3f, 0.4f})).output;
  EXPECT_EQ(out, (std::vector<float>{0.1f, 0.2f, 0.3f, 0.4f}));
}

TEST(Forward, DenseReluHand) {
  const auto out = forward(two_to_one(), ImageTensor(1, 2, {1.0f, 3.0f})).output;
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], 0.0f);
  const auto pos = forward(two_to_one(), ImageTensor(1, 2, {1.0f, 0.0f})).output;
  EXPECT_FLOAT_EQ(pos[0], 2.5f);
}

TEST(Forward, TraceIsDeterministicAndCoversEveryLayer) {
  const auto m = fixtures::retinal_tiny(3);
  Rng rng(5);
  const auto img = testing::random_image(rng, 8, 8);
  const auto a = forward(m, img, true);
  const auto b = forward(m, img, true);
  ASSERT_TRUE(a.trace && b.trace);
  EXPECT_EQ(*a.trace, *b.trace);
  ASSERT_EQ(a.trace->layers.size(), m.layers.size());
  EXPECT_EQ(a.trace->layers.back(), a.output);
  EXPECT_EQ(a.trace->neuron_count(), 72u + 72u + 675u + 675u);
}

TEST(Forward, MatchesStraightLineOracle) {
  Rng rng(9);
  for (const auto& m : {fixtures::retinal_tiny(1), fixtures::cortical_tiny(2),
                        fixtures::planted_retinal(), fixtures::planted_cortical()}) {
    for (int t = 0; t < 5; ++t) {
      const auto img = testing::random_image(rng, m.input_height, m.input_width);
      const auto out = forward(m, img).output;
      const auto ref = testing::oracle_forward(m, img);
      ASSERT_EQ(out.size(), ref.size());
      for (std::size_t i = 0; i < out.size(); ++i)
        EXPECT_NEAR(out[i], ref[i], 1e-4 * std::max(1.0, std::abs(ref[i])));
    }
  }
}

TEST(Forward, ConvPaddingAndSigmoidTanh) {
  ModelGraph m;
  m.input_height = 3;
  m.input_width = 3;
  m.layers.emplace_back(Conv2dLayer{1, 3, 3, 1, 3, 3, 1, std::vector<float>(9, 1.0f), {0.0f}});
  m.layers.emplace_back(ActivationLayer{Activation::sigmoid, 9});
  m.layers.emplace_back(ActivationLayer{Activation::tanh, 9});
  m.layers.emplace_back(DenseLayer{9, 3, std::vector<float>(27, 0.1f), {0, 0, 0}});
  m.layout = {1, 3, std::nullopt, std::nullopt};
  m.validate();
  const ImageTensor img(3, 3, std::vector<float>{1, 0, 0, 0, 0, 0, 0, 0, 0});
  const auto out = forward(m, img, true);
  // corner output sums the 2x2 in-bounds block: 1
  EXPECT_FLOAT_EQ(out.trace->layers[0][0], 1.0f);
  EXPECT_FLOAT_EQ(out.trace->layers[0][8], 0.0f);
  const auto ref = testing::oracle_forward(m, img);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(out.output[i], ref[i], 1e-6);
}

TEST(Forward, ShapeMismatch) {
  EXPECT_THROW(forward(fixtures::identity_dense(), ImageTensor(3, 3)), Error);
}

TEST(Forward, NonFiniteReportsLayer) {
  ModelGraph m;
  m.input_height = 1;
  m.input_width = 1;
  m.layers.emplace_back(DenseLayer{1, 1, {3e38f}, {0.0f}});
  m.layers.emplace_back(DenseLayer{1, 1, {10.0f}, {0.0f}});
  m.layout = {1, 1, 50.0, 0.2};
  try {
    forward(m, ImageTensor(1, 1, 1.0f));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::non_finite);
    EXPECT_EQ(e.layer(), 1u);
  }
}

TEST(Forward, PlantedRetinalMatchesAnalyticMap) {
  for (bool clamp : {false, true}) {
    fixtures::PlantedRetinal p;
    p.clamp = clamp;
    const auto m = fixtures::planted_retinal(p);
    Rng rng(21);
    for (int t = 0; t < 4; ++t) {
      const auto img = testing::random_image(rng, 18, 18);
      const auto pattern = decode_stimulation(forward(m, img).output, m.layout);
      for (std::size_t r = 0; r < 15; ++r)
        for (std::size_t c = 0; c < 15; ++c) {
          const auto o = fixtures::planted_retinal_oracle(img, r, c, p);
          const std::size_t i = r * 15 + c;
          EXPECT_NEAR(pattern.frequency_hz[i], o[0], 1e-3);
          EXPECT_NEAR(pattern.pulse_ms[i], o[1], 1e-6);
          EXPECT_NEAR(pattern.amplitude_ua[i], o[2], 1e-2);
        }
    }
  }
}

TEST(Decode, ThreeParameterOrdering) {
  EncoderOutputLayout layout{2, 3, std::nullopt, std::nullopt};
  const std::vector<float> raw{20, 30, 1, 2, 100, 200};
  const auto p = decode_stimulation(raw, layout);
  EXPECT_EQ(p.frequency_hz, (std::vector<double>{20, 30}));
  EXPECT_EQ(p.pulse_ms, (std::vector<double>{1, 2}));
  EXPECT_EQ(p.amplitude_ua, (std::vector<double>{100, 200}));
}

TEST(Decode, AmplitudeOnlyUsesConstants) {
  const auto m = fixtures::cortical_tiny();
  Rng rng(1);
  const auto p = decode_stimulation(forward(m, testing::random_image(rng, 8, 8)).output, m.layout);
  EXPECT_EQ(p.electrode_count(), 60u);
  for (std::size_t i = 0; i < 60; ++i) {
    EXPECT_EQ(p.frequency_hz[i], 50.0);
    EXPECT_EQ(p.pulse_ms[i], 0.2);
  }
}

TEST(Decode, Errors) {
  EncoderOutputLayout layout{2, 3, std::nullopt, std::nullopt};
  EXPECT_THROW(decode_stimulation(std::vector<float>(5, 0.0f), layout), Error);
  std::vector<float> raw(6, 1.0f);
  raw[3] = NAN;
  EXPECT_THROW(decode_stimulation(raw, layout), Error);
  EncoderOutputLayout bad{2, 1, std::nullopt, std::nullopt};
  EXPECT_THROW(decode_stimulation(std::vector<float>(2, 0.0f), bad), Error);
}

TEST(Nef, IdentityRoundTrip) {
  const auto bytes = save_model(fixtures::identity_dense());
  const auto m = load_model(bytes);
  EXPECT_EQ(m.layers.size(), 1u);
  EXPECT_EQ(m.input_height, 2u);
  EXPECT_EQ(m.input_width, 2u);
  EXPECT_EQ(save_model(m), bytes);
}

TEST(Nef, TruncatedBlob) {
  auto bytes = save_model(fixtures::identity_dense());
  bytes.resize(bytes.size() - 4);
  try {
    load_model(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::length_mismatch);
  }
}

TEST(Nef, BadMagic) {
  auto bytes = save_model(fixtures::identity_dense());
  bytes[0] = 'X';
  try {
    load_model(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::bad_magic);
  }
}

std::string with_header(const std::string& bytes, const std::function<void(nlohmann::json&)>& edit) {
  const std::uint32_t len = detail::load_u32le(reinterpret_cast<const unsigned char*>(bytes.data()) + 4);
  auto header = nlohmann::json::parse(bytes.substr(8, len));
  edit(header);
  const std::string text = header.dump();
  std::string out = "NEF1";
  detail::store_u32le(static_cast<std::uint32_t>(text.size()), out);
  return out + text + bytes.substr(8 + len);
}

TEST(Nef, UnknownLayerCarriesIndex) {
  const auto bytes = save_model(fixtures::retinal_tiny());
  const auto edited = with_header(bytes, [](nlohmann::json& h) { h["layers"][1]["kind"] = "lstm"; });
  try {
    load_model(edited);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unknown_layer);
    EXPECT_EQ(e.layer(), 1u);
  }
}

TEST(Nef, ShapeIncompatibilityCarriesIndex) {
  const auto bytes = save_model(fixtures::retinal_tiny());
  const auto edited =
      with_header(bytes, [](nlohmann::json& h) { h["layers"][1]["size"] = 71; });
  try {
    load_model(edited);
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.layer().has_value());
  }
}

TEST(Nef, RetinalTinyLayoutRoundTrip) {
  const auto m = load_model(save_model(fixtures::retinal_tiny()));
  EXPECT_EQ(m.layout.electrode_count, 225u);
  EXPECT_EQ(m.layout.params_per_electrode, 3u);
  EXPECT_EQ(m.output_size(), 675u);
  const auto c = load_model(save_model(fixtures::cortical_tiny()));
  EXPECT_EQ(c.layout.electrode_count, 60u);
  EXPECT_EQ(c.layout.fixed_frequency_hz, 50.0);
  EXPECT_EQ(c.layout.fixed_pulse_ms, 0.2);
}

TEST(Nef, EveryFixtureRoundTripsForwardExactly) {
  fixtures::PlantedRetinal clamped;
  clamped.clamp = true;
  Rng rng(2);
  for (const auto& m : {fixtures::retinal_tiny(), fixtures::cortical_tiny(), fixtures::identity_dense(),
                        fixtures::planted_retinal(), fixtures::planted_retinal(clamped),
                        fixtures::planted_cortical()}) {
    const auto bytes = save_model(m);
    const auto back = load_model(bytes);
    EXPECT_EQ(save_model(back), bytes);
    const auto img = testing::random_image(rng, m.input_height, m.input_width);
    EXPECT_EQ(forward(m, img).output, forward(back, img).output);
  }
}

TEST(Nef, FileRoundTrip) {
  testing::TempDir dir("nef");
  save_model_file(fixtures::planted_cortical(), dir / "m.nef");
  const auto m = load_model_file(dir / "m.nef");
  EXPECT_EQ(m.layout.electrode_count, 60u);
  EXPECT_THROW(load_model_file(dir / "missing.nef"), Error);
}

TEST(Image, PgmEightAndSixteenBit) {
  testing::TempDir dir("pgm");
  {
    std::ofstream f(dir / "a.pgm", std::ios::binary);
    f << "P5\n# comment\n2 1\n255\n";
    f.put(char(0));
    f.put(char(255));
  }
  auto img = load_image(dir / "a.pgm");
  EXPECT_EQ(img.height, 1u);
  EXPECT_EQ(img.width, 2u);
  EXPECT_EQ(img.pixels, (std::vector<float>{0.0f, 1.0f}));
  {
    std::ofstream f(dir / "b.pgm");
    f << "P2 2 2 4\n0 1 2 4\n";
  }
  img = load_image(dir / "b.pgm");
  EXPECT_EQ(img.pixels, (std::vector<float>{0.0f, 0.25f, 0.5f, 1.0f}));

  ImageTensor src(3, 2, std::vector<float>{0.0f, 0.1f, 0.2f, 0.5f, 0.9f, 1.0f});
  write_pgm(src, dir / "c.pgm", true);
  img = load_image(dir / "c.pgm");
  for (std::size_t i = 0; i < src.size(); ++i) EXPECT_NEAR(img.pixels[i], src.pixels[i], 1.0 / 65535);
}

TEST(Image, F32GridExact) {
  testing::TempDir dir("f32");
  Rng rng(4);
  const auto src = testing::random_image(rng, 5, 7);
  write_f32_grid(src, dir / "x.f32");
  EXPECT_EQ(load_image(dir / "x.f32"), src);
}

TEST(Image, PngGray) {
  testing::TempDir dir("png");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = 2;
  image.height = 2;
  image.format = PNG_FORMAT_GRAY;
  const unsigned char pixels[4] = {0, 51, 204, 255};
  ASSERT_TRUE(png_image_write_to_file(&image, (dir / "g.png").c_str(), 0, pixels, 0, nullptr));
  const auto img = load_image(dir / "g.png");
  EXPECT_EQ(img.height, 2u);
  EXPECT_NEAR(img.pixels[1], 0.2f, 1e-6);
  EXPECT_NEAR(img.pixels[3], 1.0f, 1e-6);
}

TEST(Image, DirectoryLoadsSorted) {
  testing::TempDir dir("imgdir");
  write_f32_grid(ImageTensor(1, 1, 0.75f), dir / "b.f32");
  write_f32_grid(ImageTensor(1, 1, 0.25f), dir / "a.f32");
  std::ofstream(dir / "notes.txt") << "ignored";
  const auto images = load_images(dir.path());
  ASSERT_EQ(images.size(), 2u);
  EXPECT_EQ(images[0].pixels[0], 0.25f);
  EXPECT_EQ(images[1].pixels[0], 0.75f);
}

TEST(Image, OutOfRangeRejected) {
  EXPECT_THROW(require_valid(ImageTensor(1, 1, 1.5f)), Error);
  EXPECT_THROW(ImageTensor(2, 2, std::vector<float>{0.0f}), Error);
}

}  // namespace
}  // namespace nfz
