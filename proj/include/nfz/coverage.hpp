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

// Coverage signals for the fuzzer. Every metric maps a test record to a set
// of covered items in a fixed universe; CoverageState is the union of those
// sets as a bitset. Item layouts:
//
//   VO-KMVP family  [IC bins | AE bins | PI bins per electrode | CD bins per
//                    electrode], K bins each (K = 2 for VO-VCC)
//   VO-KMOC         K bins per raw output dimension
//   I-KMIC          K bins per pixel
//   I-Div-Approx    K bins per feature
//   N-NC, N-SNAC,
//   N-TKNC          one item per neuron
//   N-KMNC          K bins per neuron
//   N-NBC           (below lo, above hi) pair per neuron
//
// Neurons are the concatenated per-layer outputs of the activation trace.

#ifndef NFZ_COVERAGE_HPP_
#define NFZ_COVERAGE_HPP_

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "nfz/error.hpp"
#include "nfz/features.hpp"
#include "nfz/image.hpp"
#include "nfz/model.hpp"
#include "nfz/safety.hpp"

namespace nfz {

enum class Strategy {
  basic_none,      // B-N
  basic_all,       // B-A
  basic_random,    // B-FR
  basic_local,     // B-Local
  neuron_nc,       // N-NC
  neuron_kmnc,     // N-KMNC
  neuron_nbc,      // N-NBC
  neuron_snac,     // N-SNAC
  neuron_tknc,     // N-TKNC
  violation_kmvp,  // VO-KMVP
  violation_kmoc,  // VO-KMOC
  violation_kmvp_v,  // VO-KMVP-V
  violation_vcc,   // VO-VCC
  input_kmic,      // I-KMIC
  input_div_approx,  // I-Div-Approx
};

inline constexpr std::array<Strategy, 15> kAllStrategies = {
    Strategy::basic_none,      Strategy::basic_all,        Strategy::basic_random,
    Strategy::basic_local,     Strategy::neuron_nc,        Strategy::neuron_kmnc,
    Strategy::neuron_nbc,      Strategy::neuron_snac,      Strategy::neuron_tknc,
    Strategy::violation_kmvp,  Strategy::violation_kmoc,   Strategy::violation_kmvp_v,
    Strategy::violation_vcc,   Strategy::input_kmic,       Strategy::input_div_approx};

inline std::string_view strategy_name(Strategy s) {
  constexpr std::array<std::string_view, 15> names = {
      "B-N",     "B-A",     "B-FR",    "B-Local", "N-NC",      "N-KMNC", "N-NBC",  "N-SNAC",
      "N-TKNC",  "VO-KMVP", "VO-KMOC", "VO-KMVP-V", "VO-VCC", "I-KMIC", "I-Div-Approx"};
  return names[static_cast<std::size_t>(s)];
}

inline Strategy parse_strategy(std::string_view name) {
  for (auto s : kAllStrategies)
    if (strategy_name(s) == name) return s;
  throw Error(Errc::config, "unknown strategy \"" + std::string(name) + "\"");
}

inline bool is_basic(Strategy s) {
  return s == Strategy::basic_none || s == Strategy::basic_all || s == Strategy::basic_random ||
         s == Strategy::basic_local;
}

inline bool is_neuron(Strategy s) {
  return s == Strategy::neuron_nc || s == Strategy::neuron_kmnc || s == Strategy::neuron_nbc ||
         s == Strategy::neuron_snac || s == Strategy::neuron_tknc;
}

enum class ProfileSpace { outputs, neurons, features };

inline std::string_view profile_space_name(ProfileSpace s) {
  switch (s) {
    case ProfileSpace::outputs: return "outputs";
    case ProfileSpace::neurons: return "neurons";
    case ProfileSpace::features: return "features";
  }
  return "outputs";
}

inline ProfileSpace parse_profile_space(std::string_view name) {
  if (name == "outputs") return ProfileSpace::outputs;
  if (name == "neurons") return ProfileSpace::neurons;
  if (name == "features") return ProfileSpace::features;
  throw Error(Errc::invalid_argument, "unknown profiling space \"" + std::string(name) + "\"");
}

// Which profiled range a strategy needs, if any.
inline std::optional<ProfileSpace> required_profile(Strategy s) {
  switch (s) {
    case Strategy::violation_kmoc: return ProfileSpace::outputs;
    case Strategy::neuron_kmnc:
    case Strategy::neuron_nbc:
    case Strategy::neuron_snac: return ProfileSpace::neurons;
    case Strategy::input_div_approx: return ProfileSpace::features;
    default: return std::nullopt;
  }
}

struct MetricConfig {
  Strategy strategy = Strategy::violation_kmvp;
  std::size_t k = 10;           // bins per dimension
  double min = 0.0;             // proportion range of the KMVP family
  double max = 2.0;
  double nc_threshold = 0.5;    // N-NC activation threshold
  std::size_t tknc_k = 2;       // neurons per layer counted by N-TKNC

  void validate() const {
    if (k < 1) throw Error(Errc::config, "K must be at least 1");
    if (!(min < max)) throw Error(Errc::config, "KMVP range requires min < max");
    if (!std::isfinite(nc_threshold)) throw Error(Errc::config, "NC threshold must be finite");
    if (tknc_k < 1) throw Error(Errc::config, "TKNC K must be at least 1");
  }
};

struct ProfilingStats {
  ProfileSpace space = ProfileSpace::outputs;
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dimensions() const { return lo.size(); }

  void validate() const {
    if (lo.size() != hi.size())
      throw Error(Errc::shape_mismatch, "profiling bounds differ in length");
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (!(lo[i] <= hi[i])) throw Error(Errc::invalid_argument, "profiling bound lo > hi");
  }

  friend bool operator==(const ProfilingStats&, const ProfilingStats&) = default;
};

inline nlohmann::json to_json(const ProfilingStats& stats) {
  return {{"space", profile_space_name(stats.space)}, {"lo", stats.lo}, {"hi", stats.hi}};
}

inline ProfilingStats profiling_stats_from_json(const nlohmann::json& j) {
  ProfilingStats stats;
  try {
    stats.space = parse_profile_space(j.at("space").get<std::string>());
    stats.lo = j.at("lo").get<std::vector<double>>();
    stats.hi = j.at("hi").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_header, std::string("malformed profiling sidecar: ") + e.what());
  }
  stats.validate();
  return stats;
}

// Occupancy bitset over a metric's item universe.
class CoverageState {
 public:
  CoverageState() = default;
  explicit CoverageState(std::size_t universe)
      : universe_(universe), words_((universe + 63) / 64, 0) {}

  std::size_t universe() const { return universe_; }
  std::size_t covered() const { return covered_; }

  double fraction() const {
    return universe_ == 0 ? 0.0
                          : static_cast<double>(covered_) / static_cast<double>(universe_);
  }

  bool test(std::size_t item) const { return (words_[item / 64] >> (item % 64)) & 1u; }

  // Returns true when the item was not covered before.
  bool mark(std::size_t item) {
    if (item >= universe_)
      throw Error(Errc::shape_mismatch, "coverage item " + std::to_string(item) +
                                            " outside universe " + std::to_string(universe_));
    auto& word = words_[item / 64];
    const std::uint64_t bit = std::uint64_t{1} << (item % 64);
    if (word & bit) return false;
    word |= bit;
    ++covered_;
    return true;
  }

  std::size_t merge(std::span<const std::size_t> items) {
    std::size_t added = 0;
    for (auto item : items) added += mark(item) ? 1 : 0;
    return added;
  }

  std::size_t popcount() const {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  const std::vector<std::uint64_t>& words() const { return words_; }

  friend bool operator==(const CoverageState&, const CoverageState&) = default;

 private:
  std::size_t universe_ = 0;
  std::size_t covered_ = 0;
  std::vector<std::uint64_t> words_;
};

inline double coverage_fraction(const CoverageState& state) { return state.fraction(); }

// Everything a metric may consume about one executed test.
struct TestRecord {
  ImageTensor image;
  std::vector<float> raw;
  StimulationPattern pattern;
  ViolationReport report;
  std::optional<ActivationTrace> trace;
  std::optional<FeatureVector> features;
};

// ---------------------------------------------------------------------------
// Bin rules

enum class KmvpMode { all, violation_only, vcc };

namespace detail {
inline std::size_t floor_bin(double v, double lo, double hi, std::size_t k) {
  const double t = std::floor((v - lo) * static_cast<double>(k) / (hi - lo));
  if (!(t > 0.0)) return 0;  // also catches NaN
  if (t >= static_cast<double>(k)) return k - 1;
  return static_cast<std::size_t>(t);
}
}  // namespace detail

// Equal-width bin over [min, max]; values outside land in the outermost bins.
inline std::optional<std::size_t> kmvp_bin(double proportion, std::size_t k, double min,
                                           double max, KmvpMode mode = KmvpMode::all) {
  if (mode == KmvpMode::vcc) {
    k = 2;
    max = 2.0;
  }
  if (mode == KmvpMode::violation_only && proportion < 1.0) return std::nullopt;
  return detail::floor_bin(proportion, min, max, k);
}

// Bin over a profiled [lo, hi]: lower edges inclusive, the top edge of the
// last bin inclusive, out-of-range values clamped. A zero-width range maps
// everything to bin 0.
inline std::size_t clamped_bin(double value, double lo, double hi, std::size_t k) {
  if (!(hi > lo)) return 0;
  return detail::floor_bin(value, lo, hi, k);
}

// N-KMNC: values outside [lo, hi] have no bin.
inline std::optional<std::size_t> kmnc_bin(double value, double lo, double hi, std::size_t k) {
  if (value < lo || value > hi) return std::nullopt;
  if (!(hi > lo)) return 0;
  return detail::floor_bin(value, lo, hi, k);
}

// Indices of the k largest values; ties go to the lower index.
inline std::vector<std::size_t> top_k_indices(std::span<const float> values, std::size_t k) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return values[a] > values[b] || (values[a] == values[b] && a < b);
                    });
  idx.resize(k);
  return idx;
}

// ---------------------------------------------------------------------------
// Item generation per metric family

inline std::size_t kmvp_universe(std::size_t electrodes, std::size_t k, KmvpMode mode = KmvpMode::all) {
  if (mode == KmvpMode::vcc) k = 2;
  return k * 2 + k * 2 * electrodes;
}

inline void kmvp_items(const ViolationReport& report, std::size_t electrodes, std::size_t k,
                       double min, double max, KmvpMode mode, std::vector<std::size_t>& out) {
  if (report.pi.size() != electrodes || report.cd.size() != electrodes)
    throw Error(Errc::shape_mismatch, "report has " + std::to_string(report.pi.size()) +
                                          " electrodes, coverage expects " +
                                          std::to_string(electrodes));
  const std::size_t kk = mode == KmvpMode::vcc ? 2 : k;
  auto push = [&](std::size_t base, double proportion) {
    if (auto bin = kmvp_bin(proportion, k, min, max, mode)) out.push_back(base + *bin);
  };
  push(0, report.ic);
  push(kk, report.ae);
  const std::size_t pi_base = 2 * kk;
  const std::size_t cd_base = 2 * kk + electrodes * kk;
  for (std::size_t i = 0; i < electrodes; ++i) {
    push(pi_base + i * kk, report.pi[i]);
    push(cd_base + i * kk, report.cd[i]);
  }
}

inline void binned_items(std::span<const double> values, const ProfilingStats& stats,
                         std::size_t k, std::vector<std::size_t>& out) {
  if (values.size() != stats.dimensions())
    throw Error(Errc::shape_mismatch, "value vector has " + std::to_string(values.size()) +
                                          " dimensions, profile has " +
                                          std::to_string(stats.dimensions()));
  for (std::size_t d = 0; d < values.size(); ++d)
    out.push_back(d * k + clamped_bin(values[d], stats.lo[d], stats.hi[d], k));
}

inline void kmic_items(const ImageTensor& image, std::size_t k, std::vector<std::size_t>& out) {
  for (std::size_t p = 0; p < image.size(); ++p)
    out.push_back(p * k + clamped_bin(image.pixels[p], 0.0, 1.0, k));
}

struct NeuronParams {
  std::size_t k = 10;
  double threshold = 0.5;
  std::size_t top_k = 2;
};

inline std::size_t neuron_universe(Strategy mode, std::size_t neurons, std::size_t k) {
  switch (mode) {
    case Strategy::neuron_kmnc: return neurons * k;
    case Strategy::neuron_nbc: return 2 * neurons;
    default: return neurons;
  }
}

inline void neuron_items(const ActivationTrace& trace, const ProfilingStats* stats,
                         Strategy mode, const NeuronParams& params,
                         std::vector<std::size_t>& out) {
  if (!is_neuron(mode)) throw Error(Errc::invalid_argument, "not a neuron coverage mode");
  const std::size_t n = trace.neuron_count();
  if (mode != Strategy::neuron_nc && mode != Strategy::neuron_tknc) {
    if (stats == nullptr)
      throw Error(Errc::missing_profile, std::string(strategy_name(mode)) + " needs neuron bounds");
    if (stats->dimensions() != n)
      throw Error(Errc::shape_mismatch, "neuron profile has " + std::to_string(stats->dimensions()) +
                                            " neurons, trace has " + std::to_string(n));
  }
  std::size_t base = 0;
  for (const auto& layer : trace.layers) {
    if (mode == Strategy::neuron_tknc) {
      for (auto i : top_k_indices(layer, params.top_k)) out.push_back(base + i);
      base += layer.size();
      continue;
    }
    for (std::size_t i = 0; i < layer.size(); ++i) {
      const double v = layer[i];
      const std::size_t n_idx = base + i;
      switch (mode) {
        case Strategy::neuron_nc:
          if (v >= params.threshold) out.push_back(n_idx);
          break;
        case Strategy::neuron_kmnc:
          if (auto bin = kmnc_bin(v, stats->lo[n_idx], stats->hi[n_idx], params.k))
            out.push_back(n_idx * params.k + *bin);
          break;
        case Strategy::neuron_nbc:
          if (v < stats->lo[n_idx]) out.push_back(2 * n_idx);
          if (v > stats->hi[n_idx]) out.push_back(2 * n_idx + 1);
          break;
        case Strategy::neuron_snac:
          if (v > stats->hi[n_idx]) out.push_back(n_idx);
          break;
        default: break;
      }
    }
    base += layer.size();
  }
}

// Stand-alone observe operations over a state sized for the metric.

inline std::size_t kmvp_observe(CoverageState& state, const TestRecord& record,
                                const MetricConfig& config, KmvpMode mode = KmvpMode::all) {
  const std::size_t electrodes = record.report.electrode_count();
  if (state.universe() != kmvp_universe(electrodes, config.k, mode))
    throw Error(Errc::shape_mismatch, "electrode count does not match the coverage universe");
  std::vector<std::size_t> items;
  kmvp_items(record.report, electrodes, config.k, config.min, config.max, mode, items);
  return state.merge(items);
}

inline std::size_t kmoc_observe(CoverageState& state, const TestRecord& record,
                                const ProfilingStats& stats, std::size_t k) {
  std::vector<double> values(record.raw.begin(), record.raw.end());
  std::vector<std::size_t> items;
  binned_items(values, stats, k, items);
  return state.merge(items);
}

inline std::size_t kmic_observe(CoverageState& state, const ImageTensor& image, std::size_t k) {
  std::vector<std::size_t> items;
  kmic_items(image, k, items);
  return state.merge(items);
}

inline std::size_t divapprox_observe(CoverageState& state, const FeatureVector& features,
                                     const ProfilingStats& stats, std::size_t k) {
  std::vector<std::size_t> items;
  binned_items(features, stats, k, items);
  return state.merge(items);
}

inline std::size_t neuron_observe(CoverageState& state, const ActivationTrace& trace,
                                  const ProfilingStats* stats, Strategy mode,
                                  const NeuronParams& params) {
  std::vector<std::size_t> items;
  neuron_items(trace, stats, mode, params, items);
  return state.merge(items);
}

// ---------------------------------------------------------------------------

// Dimensions of the spaces a metric can be defined over.
struct MetricContext {
  std::size_t electrodes = 0;
  std::size_t outputs = 0;
  std::size_t pixels = 0;
  std::vector<std::size_t> layer_sizes;
  std::size_t features = 0;

  std::size_t neurons() const {
    return std::accumulate(layer_sizes.begin(), layer_sizes.end(), std::size_t{0});
  }

  static MetricContext of(const ModelGraph& model, std::size_t feature_count = 0) {
    return {model.layout.electrode_count, model.output_size(), model.input_size(),
            model.layer_sizes(), feature_count};
  }
};

// One configured coverage metric. Stateless apart from its configuration;
// the coverage itself lives in a CoverageState so candidate items can be
// computed concurrently and merged by a single writer.
class CoverageMetric {
 public:
  CoverageMetric(MetricConfig config, MetricContext context,
                 std::optional<ProfilingStats> stats = std::nullopt)
      : config_(config), context_(std::move(context)), stats_(std::move(stats)) {
    config_.validate();
    if (auto space = required_profile(config_.strategy)) {
      if (!stats_)
        throw Error(Errc::missing_profile,
                    std::string(strategy_name(config_.strategy)) + " requires profiling data");
      if (stats_->space != *space)
        throw Error(Errc::missing_profile, "profile covers the " +
                                               std::string(profile_space_name(stats_->space)) +
                                               " space, metric needs " +
                                               std::string(profile_space_name(*space)));
      const std::size_t expected = *space == ProfileSpace::outputs   ? context_.outputs
                                   : *space == ProfileSpace::neurons ? context_.neurons()
                                                                     : context_.features;
      if (stats_->dimensions() != expected)
        throw Error(Errc::shape_mismatch, "profile has " + std::to_string(stats_->dimensions()) +
                                              " dimensions, metric needs " +
                                              std::to_string(expected));
    }
  }

  const MetricConfig& config() const { return config_; }
  Strategy strategy() const { return config_.strategy; }
  const std::optional<ProfilingStats>& stats() const { return stats_; }
  bool needs_trace() const { return is_neuron(config_.strategy); }
  bool needs_features() const { return config_.strategy == Strategy::input_div_approx; }

  std::size_t universe() const {
    const std::size_t k = config_.k;
    switch (config_.strategy) {
      case Strategy::violation_kmvp:
      case Strategy::violation_kmvp_v: return kmvp_universe(context_.electrodes, k);
      case Strategy::violation_vcc: return kmvp_universe(context_.electrodes, k, KmvpMode::vcc);
      case Strategy::violation_kmoc: return k * context_.outputs;
      case Strategy::input_kmic: return k * context_.pixels;
      case Strategy::input_div_approx: return k * context_.features;
      case Strategy::neuron_nc:
      case Strategy::neuron_kmnc:
      case Strategy::neuron_nbc:
      case Strategy::neuron_snac:
      case Strategy::neuron_tknc: return neuron_universe(config_.strategy, context_.neurons(), k);
      default: return 0;
    }
  }

  CoverageState empty_state() const { return CoverageState(universe()); }

  // Items covered by one record. Basic strategies cover nothing.
  std::vector<std::size_t> items(const TestRecord& record) const {
    std::vector<std::size_t> out;
    const std::size_t k = config_.k;
    switch (config_.strategy) {
      case Strategy::violation_kmvp:
        kmvp_items(record.report, context_.electrodes, k, config_.min, config_.max,
                   KmvpMode::all, out);
        break;
      case Strategy::violation_kmvp_v:
        kmvp_items(record.report, context_.electrodes, k, config_.min, config_.max,
                   KmvpMode::violation_only, out);
        break;
      case Strategy::violation_vcc:
        kmvp_items(record.report, context_.electrodes, k, config_.min, config_.max,
                   KmvpMode::vcc, out);
        break;
      case Strategy::violation_kmoc: {
        std::vector<double> values(record.raw.begin(), record.raw.end());
        binned_items(values, *stats_, k, out);
        break;
      }
      case Strategy::input_kmic: kmic_items(record.image, k, out); break;
      case Strategy::input_div_approx:
        if (!record.features)
          throw Error(Errc::invalid_argument, "I-Div-Approx needs record features");
        binned_items(*record.features, *stats_, k, out);
        break;
      case Strategy::neuron_nc:
      case Strategy::neuron_kmnc:
      case Strategy::neuron_nbc:
      case Strategy::neuron_snac:
      case Strategy::neuron_tknc:
        if (!record.trace)
          throw Error(Errc::invalid_argument, "neuron coverage needs an activation trace");
        neuron_items(*record.trace, stats_ ? &*stats_ : nullptr, config_.strategy,
                     {k, config_.nc_threshold, config_.tknc_k}, out);
        break;
      default: break;
    }
    return out;
  }

  // Marks the record's items; returns how many were new.
  std::size_t observe(CoverageState& state, const TestRecord& record) const {
    if (state.universe() != universe())
      throw Error(Errc::shape_mismatch, "coverage state does not belong to this metric");
    const auto covered = items(record);
    return state.merge(covered);
  }

  CoverageState recompute(std::span<const TestRecord> records) const {
    CoverageState state = empty_state();
    for (const auto& r : records) observe(state, r);
    return state;
  }

 private:
  MetricConfig config_;
  MetricContext context_;
  std::optional<ProfilingStats> stats_;
};

// Per-dimension min/max over a profiling dataset, in dataset order.
inline ProfilingStats profile(const ModelGraph& model, std::span<const ImageTensor> dataset,
                              ProfileSpace space, const FeatureExtractor* extractor = nullptr) {
  if (dataset.empty()) throw Error(Errc::empty_input, "profiling dataset is empty");
  if (space == ProfileSpace::features && extractor == nullptr)
    throw Error(Errc::missing_profile, "feature profiling requires an extractor");
  ProfilingStats stats;
  stats.space = space;
  for (const auto& image : dataset) {
    std::vector<double> values;
    if (space == ProfileSpace::features) {
      values = extractor->extract(image);
    } else {
      auto result = forward(model, image, space == ProfileSpace::neurons);
      if (space == ProfileSpace::outputs) {
        values.assign(result.output.begin(), result.output.end());
      } else {
        for (const auto& layer : result.trace->layers) values.insert(values.end(), layer.begin(), layer.end());
      }
    }
    if (stats.lo.empty()) {
      stats.lo = values;
      stats.hi = values;
      continue;
    }
    if (values.size() != stats.lo.size())
      throw Error(Errc::shape_mismatch, "profiling vectors differ in length");
    for (std::size_t d = 0; d < values.size(); ++d) {
      stats.lo[d] = std::min(stats.lo[d], values[d]);
      stats.hi[d] = std::max(stats.hi[d], values[d]);
    }
  }
  return stats;
}

}  // namespace nfz

#endif  // NFZ_COVERAGE_HPP_
