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

// End-to-end campaign driver: config file in, report and artifacts out.
//
// Output directory layout:
//   report.json              deterministic campaign report
//   timings.json             wall-clock measurements
//   campaign.jsonl           one log entry per executed test
//   violations/manifest.json image file -> test, lineage, constraint summary
//   violations/v<test>.pgm   16-bit PGM of each unique violating input

#ifndef NFZ_CAMPAIGN_HPP_
#define NFZ_CAMPAIGN_HPP_

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nfz/config.hpp"
#include "nfz/coverage.hpp"
#include "nfz/diversity.hpp"
#include "nfz/error.hpp"
#include "nfz/features.hpp"
#include "nfz/fuzzer.hpp"
#include "nfz/image.hpp"
#include "nfz/nef.hpp"
#include "nfz/report.hpp"

namespace nfz {

inline FeatureExtractor make_extractor(const std::string& name) {
  if (name == "pooled") return FeatureExtractor::pooled();
  if (name.rfind("pooled:", 0) == 0) {
    try {
      return FeatureExtractor::pooled(std::stoul(name.substr(7)));
    } catch (const std::logic_error&) {
      throw Error(Errc::config, "bad pooled extractor grid in \"" + name + "\"");
    }
  }
  const std::filesystem::path path(name);
  return FeatureExtractor::from_model(load_model_file(path), path.stem().string());
}

// Everything a campaign reads from disk.
struct CampaignInputs {
  ModelGraph model;
  std::vector<ImageTensor> seeds;
  std::vector<ImageTensor> profiling;
  FeatureExtractor extractor = FeatureExtractor::pooled();
  std::string model_name;

  static CampaignInputs load(const CampaignConfig& config) {
    CampaignInputs in;
    in.model = load_model_file(config.model_path);
    in.model_name = config.model_path.stem().string();
    in.seeds = load_images(config.seeds_path);
    if (in.seeds.empty())
      throw Error(Errc::empty_input, "no seed images in " + config.seeds_path.string());
    if (required_profile(config.fuzz.strategy())) {
      if (!config.profiling_path)
        throw Error(Errc::missing_profile, std::string(strategy_name(config.fuzz.strategy())) +
                                               " requires model.profiling");
      in.profiling = load_images(*config.profiling_path);
    }
    in.extractor = make_extractor(config.extractor);
    return in;
  }

  CoverageMetric metric(const CampaignConfig& config) const {
    return make_metric(model, seeds, profiling, config.fuzz.metric, extractor);
  }
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Mean seconds per fuzzing-loop test over a calibration batch.
inline double time_per_test(const CampaignInputs& in, FuzzConfig config, const CoverageMetric& metric,
                            std::size_t tests) {
  config.test_limit = in.seeds.size() + tests;
  Fuzzer f(in.model, config, metric, in.extractor);
  f.initialize(in.seeds);
  const std::size_t before = f.tests_executed();
  const auto t0 = std::chrono::steady_clock::now();
  f.run();
  const double secs = seconds_since(t0);
  return secs / static_cast<double>(std::max<std::size_t>(1, f.tests_executed() - before));
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

inline nlohmann::json violation_summary(const Violation& v) {
  nlohmann::json flags;
  for (auto c : kAllConstraints) flags[std::string(constraint_name(c))] = v.report.violates(c);
  nlohmann::json pi = nlohmann::json::array();
  nlohmann::json cd = nlohmann::json::array();
  for (std::size_t i = 0; i < v.report.electrode_count(); ++i) {
    if (v.report.pi[i] > 1.0) pi.push_back({i, v.report.pi[i]});
    if (v.report.cd[i] > 1.0) cd.push_back({i, v.report.cd[i]});
  }
  return {{"violations", flags},
          {"pi_electrodes", pi},
          {"cd_electrodes", cd},
          {"ic", v.report.ic},
          {"ae", v.report.ae}};
}

}  // namespace detail

inline void write_artifacts(const Fuzzer& fuzzer, const CampaignReport& report,
                            const nlohmann::json& timings, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / "violations", ec);
  if (ec) throw Error(Errc::io, "cannot create " + out_dir.string() + ": " + ec.message());

  detail::write_text(out_dir / "report.json", to_json(report).dump(2) + "\n");
  detail::write_text(out_dir / "timings.json", timings.dump(2) + "\n");

  std::string log;
  for (const auto& e : fuzzer.log()) log += to_json(e).dump() + "\n";
  detail::write_text(out_dir / "campaign.jsonl", log);

  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& v : fuzzer.violations().entries()) {
    char name[32];
    std::snprintf(name, sizeof name, "v%07zu.pgm", v.test_index);
    write_pgm(v.image, out_dir / "violations" / name, true);
    nlohmann::json entry = detail::violation_summary(v);
    entry["file"] = name;
    entry["test"] = v.test_index;
    if (v.lineage) entry["lineage"] = to_json(*v.lineage);
    if (v.random_stream) entry["random_stream"] = *v.random_stream;
    manifest.push_back(std::move(entry));
  }
  detail::write_text(out_dir / "violations" / "manifest.json", manifest.dump(2) + "\n");
}

struct CampaignResult {
  CampaignReport report;
  nlohmann::json timings;
};

// Runs a campaign: load inputs, profile, calibrate the budget when asked,
// fuzz, score diversity, write artifacts under out_dir.
inline CampaignResult run_campaign(CampaignConfig config, const std::filesystem::path& out_dir) {
  const auto t_start = std::chrono::steady_clock::now();
  const auto in = CampaignInputs::load(config);
  config.fuzz.validate(in.seeds.size());

  auto t0 = std::chrono::steady_clock::now();
  const auto metric = in.metric(config);
  nlohmann::json timings{{"profiling_s", detail::seconds_since(t0)}};

  if (config.budget_mode == BudgetMode::equal_time) {
    FuzzConfig baseline = config.fuzz;
    baseline.metric.strategy = Strategy::basic_none;
    const CoverageMetric none(baseline.metric, MetricContext::of(in.model));
    const double base = detail::time_per_test(in, baseline, none, config.calibration_tests);
    const double mine = detail::time_per_test(in, config.fuzz, metric, config.calibration_tests);
    const std::size_t limit = budget_for_strategy(base, mine, config.fuzz.test_limit);
    timings["calibration"] = {{"baseline_s_per_test", base},
                              {"strategy_s_per_test", mine},
                              {"baseline_test_limit", config.fuzz.test_limit},
                              {"test_limit", limit}};
    config.fuzz.test_limit = std::max(limit, in.seeds.size());
  }

  t0 = std::chrono::steady_clock::now();
  Fuzzer fuzzer(in.model, config.fuzz, metric, in.extractor);
  fuzzer.initialize(in.seeds);
  fuzzer.run();
  timings["fuzz_s"] = detail::seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  std::optional<DiversityScores> diversity;
  if (!fuzzer.violations().empty()) {
    Rng rng(config.fuzz.rng_seed ^ 0xd1b54a32d192ed03ULL);
    diversity = diversity_summary(fuzzer.violations(), rng, in.extractor, config.diversity);
  }
  timings["diversity_s"] = detail::seconds_since(t0);

  auto report = make_report(fuzzer, in.model_name, config_snapshot(config), diversity);
  timings["total_s"] = detail::seconds_since(t_start);
  write_artifacts(fuzzer, report, timings, out_dir);
  return {std::move(report), std::move(timings)};
}

inline std::vector<LogEntry> load_campaign_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open campaign log " + path.string());
  std::vector<LogEntry> log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      log.push_back(log_entry_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::bad_header, "campaign log line " + std::to_string(log.size() + 1) +
                                        " is not JSON: " + e.what());
    }
  }
  return log;
}

// Replays a logged campaign against the inputs named by its config.
inline ReplayResult replay_campaign(const CampaignConfig& config, const std::filesystem::path& log_path) {
  const auto in = CampaignInputs::load(config);
  const auto log = load_campaign_log(log_path);
  return replay(in.model, config.fuzz, in.metric(config), in.seeds, log, in.extractor);
}

}  // namespace nfz

#endif  // NFZ_CAMPAIGN_HPP_
