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

// Diversity of a violation set: geometric diversity (log-determinant of the
// feature Gram matrix) and violation-space diversity (norm of per-column
// standard deviations of per-electrode violation degrees and amplitudes).

#ifndef NFZ_DIVERSITY_HPP_
#define NFZ_DIVERSITY_HPP_

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nfz/error.hpp"
#include "nfz/features.hpp"
#include "nfz/fuzzer.hpp"
#include "nfz/safety.hpp"

namespace nfz {

inline constexpr double kSingular = -std::numeric_limits<double>::infinity();

// log det(A A^T) over the rows of A. Eigenvalues below 1e-12 of the largest
// count as zero, which makes the result -infinity.
inline double geometric_diversity(std::span<const FeatureVector> rows) {
  if (rows.empty()) throw Error(Errc::empty_input, "no feature rows");
  const std::size_t n = rows.size();
  const std::size_t d = rows.front().size();
  Eigen::MatrixXd a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != d) throw Error(Errc::shape_mismatch, "feature rows differ in length");
    for (std::size_t j = 0; j < d; ++j) {
      if (!std::isfinite(rows[i][j])) throw Error(Errc::non_finite, "non-finite feature value");
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  const Eigen::MatrixXd gram = a * a.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw Error(Errc::non_finite, "Gram eigendecomposition failed");
  const auto& ev = solver.eigenvalues();
  const double largest = ev.maxCoeff();
  if (!(largest > 0.0)) return kSingular;
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < 1e-12 * largest) return kSingular;
    logdet += std::log(ev(i));
  }
  return logdet;
}

inline double violation_degree(double proportion) { return std::max(0.0, proportion - 1.0); }

// (degree_PI, degree_CD, amplitude) per electrode, flattened.
inline std::vector<double> violation_space_row(const ViolationReport& report,
                                               const StimulationPattern& pattern) {
  const std::size_t n = report.electrode_count();
  if (report.cd.size() != n || pattern.electrode_count() != n)
    throw Error(Errc::length_mismatch, "report and pattern describe different electrode counts");
  std::vector<double> row(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    row[3 * i] = violation_degree(report.pi[i]);
    row[3 * i + 1] = violation_degree(report.cd[i]);
    row[3 * i + 2] = pattern.amplitude_ua[i];
  }
  return row;
}

// Euclidean norm of the per-column population standard deviations.
inline double violation_space_std(std::span<const std::vector<double>> rows) {
  if (rows.empty()) throw Error(Errc::empty_input, "no violation-space rows");
  const std::size_t cols = rows.front().size();
  const double n = static_cast<double>(rows.size());
  double sum_var = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    double mean = 0.0;
    for (const auto& r : rows) {
      if (r.size() != cols) throw Error(Errc::shape_mismatch, "violation-space rows differ in length");
      mean += r[j];
    }
    mean /= n;
    double var = 0.0;
    for (const auto& r : rows) var += (r[j] - mean) * (r[j] - mean);
    sum_var += var / n;
  }
  return std::sqrt(sum_var);
}

struct DiversityScores {
  double gd = kSingular;   // mean log-det; -inf if any subset is singular
  double vd = 0.0;         // mean violation-space std
  std::size_t n = 0;       // rows per computation
  std::size_t subsets = 0;
  bool subsampled = false;  // false: computed once on the full set
  std::string extractor;
};

struct DiversityConfig {
  std::size_t subset_size = 200;
  std::size_t subsets = 5;

  void validate() const {
    if (subset_size < 1 || subsets < 1)
      throw Error(Errc::config, "diversity subsets must be non-empty");
  }
};

inline nlohmann::json to_json(const DiversityScores& s) {
  return {{"gd_logdet", std::isfinite(s.gd) ? nlohmann::json(s.gd) : nlohmann::json("-inf")},
          {"vd_std", s.vd},
          {"n", s.n},
          {"subsets", s.subsets},
          {"subsampled", s.subsampled},
          {"extractor", s.extractor}};
}

inline DiversityScores diversity_scores_from_json(const nlohmann::json& j) {
  DiversityScores s;
  const auto& gd = j.at("gd_logdet");
  s.gd = gd.is_string() ? kSingular : gd.get<double>();
  s.vd = j.at("vd_std").get<double>();
  s.n = j.at("n").get<std::size_t>();
  s.subsets = j.at("subsets").get<std::size_t>();
  s.subsampled = j.at("subsampled").get<bool>();
  s.extractor = j.at("extractor").get<std::string>();
  return s;
}

// Mean GD and VD over `subsets` uniform draws of `subset_size` violations
// (without replacement within a draw); a single full-set computation when
// there are fewer violations than subset_size.
inline DiversityScores diversity_summary(const ViolationSet& violations, Rng& rng,
                                         const FeatureExtractor& extractor,
                                         const DiversityConfig& config = {}) {
  config.validate();
  if (violations.empty()) throw Error(Errc::empty_input, "violation set is empty");
  const auto& entries = violations.entries();
  DiversityScores scores;
  scores.extractor = extractor.id();

  auto score = [&](std::span<const std::size_t> idx, double& gd, double& vd) {
    std::vector<FeatureVector> features;
    std::vector<std::vector<double>> rows;
    for (auto i : idx) {
      features.push_back(extractor.extract(entries[i].image));
      rows.push_back(violation_space_row(entries[i].report, entries[i].pattern));
    }
    gd = geometric_diversity(features);
    vd = violation_space_std(rows);
  };

  std::vector<std::size_t> all(entries.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (entries.size() < config.subset_size) {
    score(all, scores.gd, scores.vd);
    scores.n = entries.size();
    scores.subsets = 1;
    return scores;
  }
  double gd_sum = 0.0;
  double vd_sum = 0.0;
  for (std::size_t s = 0; s < config.subsets; ++s) {
    std::vector<std::size_t> pick;
    std::sample(all.begin(), all.end(), std::back_inserter(pick), config.subset_size, rng);
    double gd = 0.0;
    double vd = 0.0;
    score(pick, gd, vd);
    gd_sum += gd;
    vd_sum += vd;
  }
  scores.gd = gd_sum / static_cast<double>(config.subsets);
  scores.vd = vd_sum / static_cast<double>(config.subsets);
  scores.n = config.subset_size;
  scores.subsets = config.subsets;
  scores.subsampled = true;
  return scores;
}

}  // namespace nfz

#endif  // NFZ_DIVERSITY_HPP_
