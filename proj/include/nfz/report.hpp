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

// Campaign reports and the offline tables built from them: the normalized
// violation/diversity comparison and the per-model constraint breakdown.

#ifndef NFZ_REPORT_HPP_
#define NFZ_REPORT_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nfz/diversity.hpp"
#include "nfz/error.hpp"
#include "nfz/fuzzer.hpp"
#include "nfz/safety.hpp"

namespace nfz {

struct CampaignReport {
  nlohmann::json config;
  std::string model;
  std::string strategy;
  std::uint64_t rng_seed = 0;
  std::size_t test_limit = 0;
  std::size_t tests = 0;
  std::size_t iterations = 0;
  std::size_t seeds = 0;
  std::size_t corpus_size = 0;
  std::size_t violations = 0;
  std::array<std::size_t, 4> per_constraint{};  // PI, CD, IC, AE
  std::size_t coverage_universe = 0;
  std::size_t coverage_covered = 0;
  double coverage_fraction = 0.0;
  std::vector<TrajectoryPoint> trajectory;
  std::optional<DiversityScores> diversity;

  std::size_t count(Constraint c) const { return per_constraint[static_cast<std::size_t>(c)]; }

  // Violation-space diversity; an empty violation set has none.
  double vd() const { return diversity ? diversity->vd : 0.0; }
};

inline CampaignReport make_report(const Fuzzer& fuzzer, std::string model, nlohmann::json config,
                                  std::optional<DiversityScores> diversity) {
  CampaignReport r;
  r.config = std::move(config);
  r.model = std::move(model);
  r.strategy = strategy_name(fuzzer.config().strategy());
  r.rng_seed = fuzzer.config().rng_seed;
  r.test_limit = fuzzer.config().test_limit;
  r.tests = fuzzer.tests_executed();
  r.iterations = fuzzer.iterations();
  r.seeds = fuzzer.initial_count();
  r.corpus_size = fuzzer.corpus().size();
  r.violations = fuzzer.violations().size();
  for (auto c : kAllConstraints)
    r.per_constraint[static_cast<std::size_t>(c)] = fuzzer.violations().count(c);
  r.coverage_universe = fuzzer.coverage().universe();
  r.coverage_covered = fuzzer.coverage().covered();
  r.coverage_fraction = fuzzer.coverage().fraction();
  r.trajectory = fuzzer.trajectory();
  r.diversity = std::move(diversity);
  return r;
}

inline nlohmann::json to_json(const CampaignReport& r) {
  nlohmann::json per;
  for (auto c : kAllConstraints) per[std::string(constraint_name(c))] = r.count(c);
  nlohmann::json trajectory = nlohmann::json::array();
  for (const auto& p : r.trajectory) trajectory.push_back({p.tests, p.coverage});
  return {{"config", r.config},
          {"model", r.model},
          {"strategy", r.strategy},
          {"rng_seed", r.rng_seed},
          {"test_limit", r.test_limit},
          {"tests", r.tests},
          {"iterations", r.iterations},
          {"seeds", r.seeds},
          {"corpus_size", r.corpus_size},
          {"violations", r.violations},
          {"violations_by_constraint", per},
          {"coverage", {{"universe", r.coverage_universe},
                        {"covered", r.coverage_covered},
                        {"fraction", r.coverage_fraction}}},
          {"coverage_trajectory", trajectory},
          {"diversity", r.diversity ? to_json(*r.diversity) : nlohmann::json(nullptr)}};
}

inline CampaignReport report_from_json(const nlohmann::json& j) {
  CampaignReport r;
  try {
    r.config = j.at("config");
    r.model = j.at("model").get<std::string>();
    r.strategy = j.at("strategy").get<std::string>();
    r.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    r.test_limit = j.at("test_limit").get<std::size_t>();
    r.tests = j.at("tests").get<std::size_t>();
    r.iterations = j.at("iterations").get<std::size_t>();
    r.seeds = j.at("seeds").get<std::size_t>();
    r.corpus_size = j.at("corpus_size").get<std::size_t>();
    r.violations = j.at("violations").get<std::size_t>();
    for (auto c : kAllConstraints)
      r.per_constraint[static_cast<std::size_t>(c)] =
          j.at("violations_by_constraint").at(std::string(constraint_name(c))).get<std::size_t>();
    r.coverage_universe = j.at("coverage").at("universe").get<std::size_t>();
    r.coverage_covered = j.at("coverage").at("covered").get<std::size_t>();
    r.coverage_fraction = j.at("coverage").at("fraction").get<double>();
    for (const auto& p : j.at("coverage_trajectory"))
      r.trajectory.push_back({p.at(0).get<std::size_t>(), p.at(1).get<double>()});
    if (!j.at("diversity").is_null()) r.diversity = diversity_scores_from_json(j.at("diversity"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_header, std::string("malformed campaign report: ") + e.what());
  }
  return r;
}

inline CampaignReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open report " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_header, path.string() + " is not valid JSON: " + e.what());
  }
  return report_from_json(j);
}

// Population z-scores; a column without variance scores 0 everywhere.
inline std::vector<double> z_scores(const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sigma = std::sqrt(var / n);
  std::vector<double> z(values.size(), 0.0);
  if (!(sigma > 1e-12 * std::max(1.0, std::abs(mean)))) return z;
  for (std::size_t i = 0; i < values.size(); ++i) z[i] = (values[i] - mean) / sigma;
  return z;
}

struct ComparisonRow {
  std::string label;
  double violations = 0.0;
  double diversity = 0.0;
  double z_violations = 0.0;
  double z_diversity = 0.0;
  double combined = 0.0;
};

namespace detail {
inline void require_same_limits(const std::vector<CampaignReport>& reports) {
  const auto& first = reports.front().config;
  for (const auto& r : reports)
    if (r.config.value("limits", nlohmann::json()) != first.value("limits", nlohmann::json()))
      throw Error(Errc::invalid_argument, "reports use different safety limits");
}

// Strategy names when all reports share a model, model names when all share
// a strategy; rng seeds disambiguate repeats.
inline std::vector<std::string> row_labels(const std::vector<CampaignReport>& reports) {
  const bool same_model = std::all_of(reports.begin(), reports.end(), [&](const auto& r) {
    return r.model == reports.front().model;
  });
  const bool same_strategy = std::all_of(reports.begin(), reports.end(), [&](const auto& r) {
    return r.strategy == reports.front().strategy;
  });
  if (!same_model && !same_strategy)
    throw Error(Errc::invalid_argument, "reports differ in both model and strategy");
  std::vector<std::string> labels;
  std::map<std::string, std::size_t> uses;
  for (const auto& r : reports) {
    labels.push_back(same_model ? r.strategy : r.model);
    ++uses[labels.back()];
  }
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (uses[labels[i]] > 1) labels[i] += " (rng " + std::to_string(reports[i].rng_seed) + ")";
  return labels;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}
}  // namespace detail

// Z-scored violation counts and violation-space diversity, combined with
// equal weight, sorted by combined score (descending), then label.
inline std::vector<ComparisonRow> compare(std::vector<CampaignReport> reports) {
  if (reports.size() < 2) throw Error(Errc::invalid_argument, "compare needs at least two reports");
  detail::require_same_limits(reports);
  const auto labels = detail::row_labels(reports);
  std::vector<ComparisonRow> rows;
  for (std::size_t i = 0; i < reports.size(); ++i)
    rows.push_back({labels[i], static_cast<double>(reports[i].violations), reports[i].vd()});
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.label < b.label; });
  std::vector<double> v, d;
  for (const auto& r : rows) {
    v.push_back(r.violations);
    d.push_back(r.diversity);
  }
  const auto zv = z_scores(v);
  const auto zd = z_scores(d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].z_violations = zv[i];
    rows[i].z_diversity = zd[i];
    rows[i].combined = (zv[i] + zd[i]) / 2.0;
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.combined > b.combined; });
  return rows;
}

inline std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::string out = "label,violations,diversity,z_violations,z_diversity,combined\n";
  for (const auto& r : rows)
    out += detail::csv_field(r.label) + "," + detail::num(r.violations) + "," +
           detail::num(r.diversity) + "," + detail::num(r.z_violations) + "," +
           detail::num(r.z_diversity) + "," + detail::num(r.combined) + "\n";
  return out;
}

struct BreakdownRow {
  std::string model;
  std::array<std::size_t, 4> counts{};  // PI, CD, IC, AE
  std::size_t total = 0;
};

// Per-model constraint counts from campaigns with identical strategy and
// budget.
inline std::vector<BreakdownRow> model_violation_breakdown(const std::vector<CampaignReport>& reports) {
  if (reports.empty()) throw Error(Errc::invalid_argument, "breakdown needs at least one report");
  for (const auto& r : reports) {
    if (r.test_limit != reports.front().test_limit)
      throw Error(Errc::invalid_argument, "reports have different test limits (" +
                                              std::to_string(r.test_limit) + " vs " +
                                              std::to_string(reports.front().test_limit) + ")");
    if (r.strategy != reports.front().strategy)
      throw Error(Errc::invalid_argument, "reports use different strategies");
  }
  std::vector<BreakdownRow> rows;
  for (const auto& r : reports) rows.push_back({r.model, r.per_constraint, r.violations});
  return rows;
}

inline std::string breakdown_csv(const std::vector<BreakdownRow>& rows) {
  std::string out = "model,PI,CD,IC,AE,total\n";
  for (const auto& r : rows) {
    out += detail::csv_field(r.model);
    for (auto c : r.counts) out += "," + std::to_string(c);
    out += "," + std::to_string(r.total) + "\n";
  }
  return out;
}

inline nlohmann::json breakdown_json(const std::vector<BreakdownRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row{{"model", r.model}, {"total", r.total}};
    for (auto c : kAllConstraints)
      row[std::string(constraint_name(c))] = r.counts[static_cast<std::size_t>(c)];
    out.push_back(row);
  }
  return out;
}

}  // namespace nfz

#endif  // NFZ_REPORT_HPP_
