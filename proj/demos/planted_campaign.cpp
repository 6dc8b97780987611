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

// Runs VO-KMVP and B-N on the planted retinal fixture and prints the
// normalized comparison.

#include <iostream>

#include "nfz/nfz.hpp"

int main() {
  const auto model = nfz::fixtures::planted_retinal();
  const auto seeds = nfz::fixtures::planted_seeds();
  const auto profiling = nfz::fixtures::planted_profiling_set();
  const auto extractor = nfz::FeatureExtractor::pooled();

  std::vector<nfz::CampaignReport> reports;
  for (auto strategy : {nfz::Strategy::basic_none, nfz::Strategy::violation_kmvp,
                        nfz::Strategy::violation_kmoc, nfz::Strategy::basic_local}) {
    nfz::FuzzConfig config;
    config.metric.strategy = strategy;
    config.test_limit = 2000;
    config.rng_seed = 7;
    auto fuzzer = nfz::fuzz(model, seeds, profiling, config, extractor);
    std::optional<nfz::DiversityScores> diversity;
    if (!fuzzer.violations().empty()) {
      nfz::Rng rng(7);
      diversity = nfz::diversity_summary(fuzzer.violations(), rng, extractor);
    }
    reports.push_back(nfz::make_report(fuzzer, "planted-retinal", {}, diversity));
    std::cout << reports.back().strategy << ": " << reports.back().violations << " violations, "
              << "coverage " << reports.back().coverage_fraction << "\n";
  }
  std::cout << nfz::comparison_csv(nfz::compare(reports));
}
