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

// Campaign configuration file (JSON). Schema, all sections optional except
// model.path and model.seeds; relative paths resolve against the config
// file's directory:
//
//   {
//     "rng_seed": 42,
//     "model":     {"path": "enc.nef", "seeds": "seeds/", "profiling": "profile/",
//                   "extractor": "pooled" | "pooled:<grid>" | "<extractor.nef>"},
//     "limits":    {"preset": "retinal" | "cortical"}
//                | {"charge_nc": 628, "current_ua": 6000, "active_electrodes": 100,
//                   "activity_epsilon": 0},
//     "strategy":  {"name": "VO-KMVP", "k": 10, "min": 0, "max": 2, "nc_threshold": 0.5,
//                   "tknc_k": 2, "m": 10, "gamma": 20, "p_min": 0.1},
//     "mutation":  {"kinds": ["translate", ...], "translate": [lo, hi], ...,
//                   "local": {<same keys, used by B-Local>}},
//     "budget":    {"test_limit": 5000, "mode": "fixed" | "equal_time",
//                   "calibration_tests": 200, "threads": 1},
//     "diversity": {"subset_size": 200, "subsets": 5}
//   }
//
// Unknown keys are rejected.

#ifndef NFZ_CONFIG_HPP_
#define NFZ_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nfz/coverage.hpp"
#include "nfz/diversity.hpp"
#include "nfz/error.hpp"
#include "nfz/fuzzer.hpp"
#include "nfz/mutation.hpp"
#include "nfz/safety.hpp"

namespace nfz {

enum class BudgetMode { fixed, equal_time };

struct CampaignConfig {
  std::filesystem::path model_path;
  std::filesystem::path seeds_path;
  std::optional<std::filesystem::path> profiling_path;
  std::string extractor = "pooled";
  std::string limits_preset;  // empty when explicit values were given
  FuzzConfig fuzz;
  BudgetMode budget_mode = BudgetMode::fixed;
  std::size_t calibration_tests = 200;
  DiversityConfig diversity;
  nlohmann::json source;  // the file as read, for the report snapshot
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::string& where,
                           std::initializer_list<const char*> known) {
  if (!j.is_object()) throw Error(Errc::config, where + " must be an object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw Error(Errc::config, "unknown key " + where + "." + key);
}

template <typename T>
T field(const nlohmann::json& j, const std::string& where, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::config, where + "." + key + " has the wrong type");
  }
}

inline Range range_field(const nlohmann::json& j, const std::string& where, const char* key,
                         Range fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw Error(Errc::config, where + "." + key + " must be [lo, hi]");
  return {v[0].get<double>(), v[1].get<double>()};
}

inline MutationConfig parse_mutation(const nlohmann::json& j, const std::string& where,
                                     MutationConfig c, bool allow_local) {
  if (allow_local)
    reject_unknown(j, where, {"kinds", "translate", "rotate", "scale", "shear", "brightness",
                              "contrast", "blur_sigma", "noise_sigma", "perturb_fraction",
                              "perturb_magnitude", "local"});
  else
    reject_unknown(j, where, {"kinds", "translate", "rotate", "scale", "shear", "brightness",
                              "contrast", "blur_sigma", "noise_sigma", "perturb_fraction",
                              "perturb_magnitude"});
  if (j.contains("kinds")) {
    c.enabled.clear();
    for (const auto& name : field<std::vector<std::string>>(j, where, "kinds", {})) {
      try {
        c.enabled.push_back(parse_mutation_kind(name));
      } catch (const Error& e) {
        throw Error(Errc::config, where + ".kinds: " + e.what());
      }
    }
  }
  c.translate = range_field(j, where, "translate", c.translate);
  c.rotate_degrees = range_field(j, where, "rotate", c.rotate_degrees);
  c.scale = range_field(j, where, "scale", c.scale);
  c.shear = range_field(j, where, "shear", c.shear);
  c.brightness = range_field(j, where, "brightness", c.brightness);
  c.contrast = range_field(j, where, "contrast", c.contrast);
  c.blur_sigma = range_field(j, where, "blur_sigma", c.blur_sigma);
  c.noise_sigma = range_field(j, where, "noise_sigma", c.noise_sigma);
  c.perturb_fraction = range_field(j, where, "perturb_fraction", c.perturb_fraction);
  c.perturb_magnitude = range_field(j, where, "perturb_magnitude", c.perturb_magnitude);
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(Errc::config, where + ": " + e.what());
  }
  return c;
}

}  // namespace detail

inline CampaignConfig parse_campaign_config(const nlohmann::json& j,
                                            const std::filesystem::path& base_dir = {}) {
  using detail::field;
  detail::reject_unknown(j, "config",
                         {"rng_seed", "model", "limits", "strategy", "mutation", "budget",
                          "diversity"});
  CampaignConfig c;
  c.source = j;
  c.fuzz.rng_seed = field<std::uint64_t>(j, "config", "rng_seed", 0);
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };

  if (!j.contains("model")) throw Error(Errc::config, "missing section model");
  const auto& model = j.at("model");
  detail::reject_unknown(model, "model", {"path", "seeds", "profiling", "extractor"});
  if (!model.contains("path")) throw Error(Errc::config, "missing model.path");
  if (!model.contains("seeds")) throw Error(Errc::config, "missing model.seeds");
  c.model_path = resolve(field<std::string>(model, "model", "path", ""));
  c.seeds_path = resolve(field<std::string>(model, "model", "seeds", ""));
  if (model.contains("profiling"))
    c.profiling_path = resolve(field<std::string>(model, "model", "profiling", ""));
  c.extractor = field<std::string>(model, "model", "extractor", "pooled");
  if (c.extractor != "pooled" && c.extractor.rfind("pooled:", 0) != 0)
    c.extractor = resolve(c.extractor).string();

  const nlohmann::json limits = j.value("limits", nlohmann::json{{"preset", "retinal"}});
  detail::reject_unknown(limits, "limits",
                         {"preset", "charge_nc", "current_ua", "active_electrodes",
                          "activity_epsilon"});
  if (limits.contains("preset")) {
    if (limits.size() != 1)
      throw Error(Errc::config, "limits.preset cannot be combined with explicit values");
    c.limits_preset = field<std::string>(limits, "limits", "preset", "");
    if (c.limits_preset == "retinal")
      c.fuzz.limits = SafetyLimits::retinal();
    else if (c.limits_preset == "cortical")
      c.fuzz.limits = SafetyLimits::cortical();
    else
      throw Error(Errc::config, "unknown limits preset \"" + c.limits_preset + "\"");
  } else {
    for (const char* key : {"charge_nc", "current_ua", "active_electrodes"})
      if (!limits.contains(key)) throw Error(Errc::config, std::string("missing limits.") + key);
    c.fuzz.limits = {field<double>(limits, "limits", "charge_nc", 0.0),
                     field<double>(limits, "limits", "current_ua", 0.0),
                     field<double>(limits, "limits", "active_electrodes", 0.0),
                     field<double>(limits, "limits", "activity_epsilon", 0.0)};
  }

  const nlohmann::json strategy = j.value("strategy", nlohmann::json::object());
  detail::reject_unknown(strategy, "strategy",
                         {"name", "k", "min", "max", "nc_threshold", "tknc_k", "m", "gamma",
                          "p_min"});
  auto& metric = c.fuzz.metric;
  metric.strategy = parse_strategy(field<std::string>(strategy, "strategy", "name", "VO-KMVP"));
  metric.k = field<std::size_t>(strategy, "strategy", "k", metric.k);
  metric.min = field<double>(strategy, "strategy", "min", metric.min);
  metric.max = field<double>(strategy, "strategy", "max", metric.max);
  metric.nc_threshold = field<double>(strategy, "strategy", "nc_threshold", metric.nc_threshold);
  metric.tknc_k = field<std::size_t>(strategy, "strategy", "tknc_k", metric.tknc_k);
  c.fuzz.m = field<std::size_t>(strategy, "strategy", "m", c.fuzz.m);
  c.fuzz.scheduler.gamma = field<double>(strategy, "strategy", "gamma", c.fuzz.scheduler.gamma);
  c.fuzz.scheduler.p_min = field<double>(strategy, "strategy", "p_min", c.fuzz.scheduler.p_min);

  const nlohmann::json mutation = j.value("mutation", nlohmann::json::object());
  c.fuzz.mutation = detail::parse_mutation(mutation, "mutation", MutationConfig{}, true);
  if (mutation.contains("local"))
    c.fuzz.local_mutation = detail::parse_mutation(mutation.at("local"), "mutation.local",
                                                   MutationConfig::local(), false);

  const nlohmann::json budget = j.value("budget", nlohmann::json::object());
  detail::reject_unknown(budget, "budget", {"test_limit", "mode", "calibration_tests", "threads"});
  c.fuzz.test_limit = field<std::size_t>(budget, "budget", "test_limit", c.fuzz.test_limit);
  const auto mode = field<std::string>(budget, "budget", "mode", "fixed");
  if (mode == "fixed")
    c.budget_mode = BudgetMode::fixed;
  else if (mode == "equal_time")
    c.budget_mode = BudgetMode::equal_time;
  else
    throw Error(Errc::config, "unknown budget.mode \"" + mode + "\"");
  c.calibration_tests = field<std::size_t>(budget, "budget", "calibration_tests", c.calibration_tests);
  c.fuzz.threads = field<std::size_t>(budget, "budget", "threads", c.fuzz.threads);

  const nlohmann::json diversity = j.value("diversity", nlohmann::json::object());
  detail::reject_unknown(diversity, "diversity", {"subset_size", "subsets"});
  c.diversity.subset_size =
      field<std::size_t>(diversity, "diversity", "subset_size", c.diversity.subset_size);
  c.diversity.subsets = field<std::size_t>(diversity, "diversity", "subsets", c.diversity.subsets);

  try {
    c.fuzz.validate(0);
    c.diversity.validate();
  } catch (const Error& e) {
    if (e.code() == Errc::config) throw;
    throw Error(Errc::config, e.what());
  }
  if (c.budget_mode == BudgetMode::equal_time && c.calibration_tests == 0)
    throw Error(Errc::config, "budget.calibration_tests must be positive");
  return c;
}

inline CampaignConfig load_campaign_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config, std::string("config is not valid JSON: ") + e.what());
  }
  return parse_campaign_config(j, path.parent_path());
}

inline nlohmann::json config_snapshot(const CampaignConfig& c) {
  const auto& f = c.fuzz;
  nlohmann::json limits = {{"charge_nc", f.limits.charge_nc},
                           {"current_ua", f.limits.current_ua},
                           {"active_electrodes", f.limits.active_electrodes},
                           {"activity_epsilon", f.limits.activity_epsilon}};
  if (!c.limits_preset.empty()) limits["preset"] = c.limits_preset;
  nlohmann::json kinds = nlohmann::json::array();
  for (auto k : f.mutation.enabled) kinds.push_back(mutation_kind_name(k));
  return {{"rng_seed", f.rng_seed},
          {"model", c.source.at("model")},
          {"limits", limits},
          {"strategy",
           {{"name", strategy_name(f.metric.strategy)},
            {"k", f.metric.k},
            {"min", f.metric.min},
            {"max", f.metric.max},
            {"nc_threshold", f.metric.nc_threshold},
            {"tknc_k", f.metric.tknc_k},
            {"m", f.m},
            {"gamma", f.scheduler.gamma},
            {"p_min", f.scheduler.p_min}}},
          {"mutation_kinds", kinds},
          {"budget",
           {{"test_limit", f.test_limit},
            {"mode", c.budget_mode == BudgetMode::fixed ? "fixed" : "equal_time"},
            {"threads", f.threads}}},
          {"diversity",
           {{"subset_size", c.diversity.subset_size}, {"subsets", c.diversity.subsets}}}};
}

}  // namespace nfz

#endif  // NFZ_CONFIG_HPP_
