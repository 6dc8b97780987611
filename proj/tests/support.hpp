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

// Shared test helpers: random generators and independent reference
// implementations used as oracles.

#ifndef NFZ_TESTS_SUPPORT_HPP_
#define NFZ_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "nfz/nfz.hpp"

namespace nfz::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("nfz-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline ImageTensor random_image(Rng& rng, std::size_t h, std::size_t w) {
  return nfz::random_image(h, w, rng());
}

// Patterns that straddle every limit: values are drawn so that roughly a
// third of each proportion lands above 1.
inline StimulationPattern random_pattern(Rng& rng, std::size_t electrodes) {
  std::uniform_real_distribution<double> freq(1.0, 400.0);
  std::uniform_real_distribution<double> pulse(0.0, 4.0);
  std::uniform_real_distribution<double> amp(0.0, 60.0);
  std::bernoulli_distribution off(0.4);
  StimulationPattern p;
  for (std::size_t i = 0; i < electrodes; ++i) {
    p.frequency_hz.push_back(freq(rng));
    p.pulse_ms.push_back(pulse(rng));
    p.amplitude_ua.push_back(off(rng) ? 0.0 : amp(rng));
  }
  return p;
}

// Scalar reference for the four constraints, written in the difference form
// (quantity minus limit > 0) rather than the proportion form.
struct OracleReport {
  std::vector<double> pi, cd;
  double ic = 0.0, ae = 0.0;
  std::vector<bool> pi_flag, cd_flag;
  bool ic_flag = false, ae_flag = false;
};

inline OracleReport oracle_evaluate(const StimulationPattern& p, const SafetyLimits& l) {
  OracleReport r;
  double total = 0.0;
  int active = 0;
  for (std::size_t i = 0; i < p.amplitude_ua.size(); ++i) {
    const double period_ms = 1000.0 / p.frequency_hz[i];
    const double occupied_ms = 2.0 * p.pulse_ms[i];
    r.pi.push_back(occupied_ms / period_ms);
    r.pi_flag.push_back(occupied_ms - period_ms > 0.0);
    const double charge = p.amplitude_ua[i] * p.pulse_ms[i];
    r.cd.push_back(charge / l.charge_nc);
    r.cd_flag.push_back(charge - l.charge_nc > 0.0);
    total += p.amplitude_ua[i];
    if (p.amplitude_ua[i] > l.activity_epsilon) ++active;
  }
  r.ic = total / l.current_ua;
  r.ic_flag = total - l.current_ua > 0.0;
  r.ae = active / l.active_electrodes;
  r.ae_flag = active - l.active_electrodes > 0.0;
  return r;
}

// Bin lookup by scanning explicit edges. Out-of-range values clamp.
inline std::size_t scan_bin(double v, double lo, double hi, std::size_t k) {
  if (!(hi > lo)) return 0;
  const double width = (hi - lo) / static_cast<double>(k);
  if (v < lo) return 0;
  for (std::size_t b = 0; b + 1 < k; ++b) {
    const double upper = lo + width * static_cast<double>(b + 1);
    if (v < upper - 1e-12 * std::max(1.0, std::abs(upper))) return b;
  }
  return k - 1;
}

// Straight-line dense/conv evaluation for cross-checking forward().
inline std::vector<double> oracle_forward(const ModelGraph& model, const ImageTensor& image) {
  std::vector<double> x(image.pixels.begin(), image.pixels.end());
  for (const auto& layer : model.layers) {
    std::vector<double> y;
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      for (std::size_t o = 0; o < d->out; ++o) {
        double s = d->bias[o];
        for (std::size_t i = 0; i < d->in; ++i) s += double(d->weight[o * d->in + i]) * x[i];
        y.push_back(s);
      }
    } else if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
      const long pad = long(c->padding);
      for (std::size_t oc = 0; oc < c->out_channels; ++oc)
        for (std::size_t r = 0; r < c->out_height(); ++r)
          for (std::size_t q = 0; q < c->out_width(); ++q) {
            double s = c->bias[oc];
            for (std::size_t ic = 0; ic < c->in_channels; ++ic)
              for (std::size_t kr = 0; kr < c->kernel_h; ++kr)
                for (std::size_t kc = 0; kc < c->kernel_w; ++kc) {
                  const long sr = long(r + kr) - pad, sc = long(q + kc) - pad;
                  if (sr < 0 || sc < 0 || sr >= long(c->in_height) || sc >= long(c->in_width))
                    continue;
                  const double w =
                      c->weight[((oc * c->in_channels + ic) * c->kernel_h + kr) * c->kernel_w + kc];
                  s += w * x[(ic * c->in_height + std::size_t(sr)) * c->in_width + std::size_t(sc)];
                }
            y.push_back(s);
          }
    } else if (const auto* a = std::get_if<ActivationLayer>(&layer)) {
      for (double v : x)
        y.push_back(a->fn == Activation::relu      ? std::max(0.0, v)
                    : a->fn == Activation::sigmoid ? 1.0 / (1.0 + std::exp(-v))
                                                   : std::tanh(v));
    } else {
      const auto& s = std::get<ScaleClampLayer>(layer);
      for (double v : x) y.push_back(std::clamp(s.scale * v + s.offset, double(s.lo), double(s.hi)));
    }
    x = std::move(y);
  }
  return x;
}

// log det via Cholesky (LDL^T without pivoting) in long double.
inline double oracle_logdet_gram(const std::vector<FeatureVector>& rows) {
  const std::size_t n = rows.size();
  std::vector<std::vector<long double>> g(n, std::vector<long double>(n, 0.0L));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < rows[i].size(); ++k)
        g[i][j] += static_cast<long double>(rows[i][k]) * rows[j][k];
  long double logdet = 0.0L;
  for (std::size_t j = 0; j < n; ++j) {
    long double d = g[j][j];
    for (std::size_t k = 0; k < j; ++k) d -= g[j][k] * g[j][k];
    if (d <= 0.0L) return -std::numeric_limits<double>::infinity();
    const long double l = std::sqrt(d);
    g[j][j] = l;
    logdet += 2.0L * std::log(l);
    for (std::size_t i = j + 1; i < n; ++i) {
      long double s = g[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= g[i][k] * g[j][k];
      g[i][j] = s / l;
    }
  }
  return static_cast<double>(logdet);
}

// Record built from a random image pushed through a model, with every
// optional field populated.
inline TestRecord make_record(const ModelGraph& model, const ImageTensor& image,
                              const SafetyLimits& limits, const FeatureExtractor& extractor) {
  TestExecutor exec(model, limits, true, &extractor);
  return exec(image);
}

}  // namespace nfz::testing

#endif  // NFZ_TESTS_SUPPORT_HPP_
