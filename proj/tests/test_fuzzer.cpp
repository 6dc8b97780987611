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

#include <gtest/gtest.h>

#include "support.hpp"

namespace nfz {
namespace {

TEST(SeedWeight, Examples) {
  EXPECT_EQ(seed_weight(0, 20, 0.1), 1.0);
  EXPECT_DOUBLE_EQ(seed_weight(18, 20, 0.1), 0.1);
  EXPECT_EQ(seed_weight(100, 20, 0.1), 0.1);
  EXPECT_DOUBLE_EQ(seed_weight(10, 20, 0.1), 0.5);
}

// Property: non-increasing in g, bounded below by p_min.
TEST(SeedWeight, MonotoneAndFloored) {
  for (double gamma : {1.0, 7.5, 20.0, 100.0})
    for (double p_min : {0.01, 0.1, 0.5}) {
      double prev = 2.0;
      for (std::size_t g = 0; g < 300; ++g) {
        const double w = seed_weight(g, gamma, p_min);
        EXPECT_LE(w, prev);
        EXPECT_GE(w, p_min);
        EXPECT_LE(w, 1.0);
        prev = w;
      }
    }
}

TEST(ChooseSeed, SingleSeedAlwaysChosen) {
  Corpus c;
  c.add(ImageTensor(1, 1));
  Rng rng(1);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(choose_seed(c, rng).id, 0u);
  EXPECT_EQ(c[0].g, 10u);
}

TEST(ChooseSeed, EmptyCorpus) {
  Corpus c;
  Rng rng(1);
  EXPECT_THROW(choose_seed(c, rng), Error);
}

TEST(ChooseSeed, RatioMatchesWeights) {
  const SchedulerConfig sched;
  const std::size_t floor_g = 18;  // gamma (1 - p_min)
  std::size_t first = 0;
  const int draws = 10000;
  Rng rng(123);
  for (int i = 0; i < draws; ++i) {
    Corpus c;
    c.add(ImageTensor(1, 1));
    c.add(ImageTensor(1, 1));
    c[1].g = floor_g;
    if (choose_seed(c, rng, sched).id == 0) ++first;
  }
  const double p = 1.0 / 1.1;
  const double sigma = std::sqrt(draws * p * (1 - p));
  EXPECT_NEAR(double(first), draws * p, 3 * sigma);
}

TEST(ChooseSeed, ReproducibleSequence) {
  auto run = [] {
    Corpus c;
    for (int i = 0; i < 5; ++i) c.add(ImageTensor(1, 1));
    Rng rng(42);
    std::vector<std::size_t> picks;
    for (int i = 0; i < 100; ++i) picks.push_back(choose_seed(c, rng).id);
    return picks;
  };
  EXPECT_EQ(run(), run());
}

TEST(MostViolatingSeed, ArgmaxTiesAndFallback) {
  Corpus c;
  c.add(ImageTensor(1, 1));
  c.add(ImageTensor(1, 1));
  EXPECT_FALSE(most_violating_seed(c).has_value());
  c[0].violation_yield = 5;
  c[1].violation_yield = 2;
  EXPECT_EQ(most_violating_seed(c), 0u);
  c[0].violation_yield = 3;
  c[1].violation_yield = 3;
  EXPECT_EQ(most_violating_seed(c), 0u);
  c[1].violation_yield = 4;
  EXPECT_EQ(most_violating_seed(c), 1u);
}

TEST(Budget, Examples) {
  EXPECT_EQ(budget_for_strategy(0.002, 0.004, 10000), 5000u);
  EXPECT_EQ(budget_for_strategy(0.003, 0.003, 777), 777u);
  EXPECT_EQ(budget_for_strategy(0.001, 100.0, 10), 1u);
  EXPECT_THROW(budget_for_strategy(0.002, 0.0, 10000), Error);
  EXPECT_THROW(budget_for_strategy(-1.0, 0.1, 10000), Error);
}

TEST(ViolationSet, DedupesByBytesAndRejectsSafe) {
  ViolationSet set;
  Violation v;
  v.image = ImageTensor(2, 2, 0.5f);
  v.report.any_violation = true;
  EXPECT_TRUE(set.add(v));
  EXPECT_FALSE(set.add(v));
  v.image.pixels[0] = 0.25f;
  EXPECT_TRUE(set.add(v));
  EXPECT_EQ(set.size(), 2u);
  v.report.any_violation = false;
  v.image.pixels[0] = 0.75f;
  EXPECT_THROW(set.add(v), Error);
}

struct Planted {
  ModelGraph model = fixtures::planted_retinal();
  std::vector<ImageTensor> seeds = fixtures::planted_seeds();
  std::vector<ImageTensor> profiling = fixtures::planted_profiling_set();
};

FuzzConfig config_for(Strategy s, std::size_t limit, std::uint64_t rng = 1) {
  FuzzConfig c;
  c.metric.strategy = s;
  c.test_limit = limit;
  c.rng_seed = rng;
  return c;
}

TEST(Fuzz, LimitEqualToSeedCountRunsNoIterations) {
  Planted p;
  p.seeds.erase(p.seeds.begin() + 5);  // drop the violating scene
  const auto f = fuzz(p.model, p.seeds, p.profiling, config_for(Strategy::violation_kmvp, p.seeds.size()));
  EXPECT_EQ(f.iterations(), 0u);
  EXPECT_EQ(f.tests_executed(), p.seeds.size());
  EXPECT_TRUE(f.violations().empty());
}

TEST(Fuzz, TestCountAccounting) {
  Planted p;
  for (std::size_t limit : {8u, 9u, 17u, 18u, 19u, 1003u}) {
    for (std::size_t m : {1u, 3u, 10u}) {
      auto c = config_for(Strategy::violation_kmoc, limit);
      c.m = m;
      const auto f = fuzz(p.model, p.seeds, p.profiling, c);
      const std::size_t k = (limit - p.seeds.size() + m - 1) / m;
      EXPECT_EQ(f.tests_executed(), p.seeds.size() + k * m);
      EXPECT_EQ(f.iterations(), k);
      EXPECT_EQ(f.log().size(), f.tests_executed());
    }
  }
}

TEST(Fuzz, LimitBelowSeedCountIsConfigError) {
  Planted p;
  try {
    fuzz(p.model, p.seeds, p.profiling, config_for(Strategy::basic_none, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config);
  }
}

TEST(Fuzz, DeterministicForSameConfig) {
  Planted p;
  for (auto s : kAllStrategies) {
    const auto a = fuzz(p.model, p.seeds, p.profiling, config_for(s, 400, 9));
    const auto b = fuzz(p.model, p.seeds, p.profiling, config_for(s, 400, 9));
    EXPECT_EQ(a.violations().size(), b.violations().size()) << strategy_name(s);
    EXPECT_EQ(a.corpus().size(), b.corpus().size());
    EXPECT_EQ(a.coverage(), b.coverage());
    ASSERT_EQ(a.log().size(), b.log().size());
    for (std::size_t i = 0; i < a.log().size(); ++i)
      EXPECT_EQ(to_json(a.log()[i]), to_json(b.log()[i]));
  }
}

TEST(Fuzz, ParallelForwardEqualsSequential) {
  Planted p;
  for (auto s : {Strategy::violation_kmvp, Strategy::neuron_kmnc, Strategy::basic_random}) {
    auto seq = config_for(s, 600, 4);
    auto par = seq;
    par.threads = 4;
    const auto a = fuzz(p.model, p.seeds, p.profiling, seq);
    const auto b = fuzz(p.model, p.seeds, p.profiling, par);
    ASSERT_EQ(a.log().size(), b.log().size());
    for (std::size_t i = 0; i < a.log().size(); ++i)
      EXPECT_EQ(to_json(a.log()[i]), to_json(b.log()[i]));
    EXPECT_EQ(a.coverage(), b.coverage());
  }
}

TEST(Fuzz, BasicNoneNeverAdmits) {
  Planted p;
  const auto f = fuzz(p.model, p.seeds, p.profiling, config_for(Strategy::basic_none, 500));
  EXPECT_EQ(f.corpus().size(), p.seeds.size());
  EXPECT_GT(f.violations().size(), 0u);
}

TEST(Fuzz, BasicAllAdmitsEveryMutant) {
  Planted p;
  const auto f = fuzz(p.model, p.seeds, p.profiling, config_for(Strategy::basic_all, 508));
  EXPECT_EQ(f.corpus().size(), 508u);
  for (const auto& e : f.log())
    if (!e.initial) EXPECT_TRUE(e.admitted);
}

TEST(Fuzz, AdmissionIffStrictCoverageIncrease) {
  Planted p;
  for (auto s : {Strategy::violation_kmvp, Strategy::violation_kmoc, Strategy::neuron_nc,
                 Strategy::input_kmic}) {
    const auto f = fuzz(p.model, p.seeds, p.profiling, config_for(s, 800));
    double prev = 0.0;
    std::size_t admitted = 0;
    for (const auto& e : f.log()) {
      if (!e.initial) {
        EXPECT_EQ(e.admitted, e.coverage > prev) << strategy_name(s) << " test " << e.test_index;
        admitted += e.admitted;
      }
      prev = e.coverage;
    }
    EXPECT_EQ(admitted + p.seeds.size(), f.corpus().size());
  }
}

TEST(Fuzz, SaturatedCoverageAdmitsNothing) {
  Planted p;
  auto c = config_for(Strategy::input_kmic, 300);
  c.metric.k = 1;  // every image covers the single bin of every pixel
  const auto f = fuzz(p.model, p.seeds, p.profiling, c);
  EXPECT_EQ(f.coverage().fraction(), 1.0);
  EXPECT_EQ(f.corpus().size(), p.seeds.size());
  EXPECT_GT(f.violations().size(), 0u);
}

TEST(Fuzz, MutantsComeFromOneSeedPerIteration) {
  Planted p;
  const auto f = fuzz(p.model, p.seeds, p.profiling, config_for(Strategy::violation_kmvp, 308));
  const auto& log = f.log();
  for (std::size_t i = p.seeds.size(); i < log.size(); i += 10)
    for (std::size_t j = i; j < i + 10; ++j) {
      EXPECT_EQ(log[j].seed_id, log[i].seed_id);
      ASSERT_TRUE(log[j].mutation.has_value());
      EXPECT_EQ(log[j].mutation->parent, *log[i].seed_id);
    }
}

TEST(Fuzz, ViolationSetInvariants) {
  Planted p;
  const auto f = fuzz(p.model, p.seeds, p.profiling, config_for(Strategy::violation_vcc, 1500));
  std::set<std::string> bytes;
  for (const auto& v : f.violations().entries()) {
    EXPECT_TRUE(v.report.any_violation);
    EXPECT_TRUE(bytes.insert(std::string(v.image.bytes())).second);
  }
  std::size_t yield = 0, mutants = 0;
  for (const auto& s : f.corpus().entries()) {
    EXPECT_LE(s.violation_yield, s.mutants);
    yield += s.violation_yield;
    mutants += s.mutants;
  }
  EXPECT_EQ(mutants, f.tests_executed() - p.seeds.size());
  std::size_t violating = 0;
  for (const auto& e : f.log())
    if (!e.initial && e.any_violation()) ++violating;
  EXPECT_EQ(yield, violating);
}

TEST(Fuzz, SeedsAreNotViolations) {
  Planted p;
  const auto f = fuzz(p.model, p.seeds, p.profiling, config_for(Strategy::basic_none, p.seeds.size()));
  EXPECT_TRUE(f.log()[5].any_violation());
  EXPECT_TRUE(f.violations().empty());
}

TEST(Fuzz, BasicLocalLocksOntoMostViolatingSeed) {
  Planted p;
  const auto f = fuzz(p.model, p.seeds, p.profiling, config_for(Strategy::basic_local, 1008));
  EXPECT_EQ(f.corpus().size(), p.seeds.size());
  const auto& entries = f.corpus().entries();
  const auto best = most_violating_seed(f.corpus());
  ASSERT_TRUE(best.has_value());
  for (const auto& s : entries) EXPECT_LE(s.violation_yield, entries[*best].violation_yield);
  bool locked = false;
  for (const auto& e : f.log()) {
    if (e.initial) continue;
    const auto kind = e.mutation->kind();
    EXPECT_TRUE(kind == MutationKind::noise || kind == MutationKind::pixel_perturb);
    if (locked) EXPECT_EQ(e.seed_id, best);
    locked = locked || e.any_violation();
  }
  EXPECT_GT(f.violations().size(), 750u);
}

TEST(Fuzz, BasicRandomUsesFreshImages) {
  Planted p;
  const auto f = fuzz(p.model, p.seeds, p.profiling, config_for(Strategy::basic_random, 208));
  for (const auto& e : f.log()) {
    if (e.initial) continue;
    EXPECT_FALSE(e.seed_id.has_value());
    EXPECT_TRUE(e.random_stream.has_value());
    EXPECT_FALSE(e.admitted);
  }
  for (const auto& s : f.corpus().entries()) EXPECT_EQ(s.g, 0u);
}

TEST(Fuzz, ProfilingRequiredWhenMetricNeedsIt) {
  Planted p;
  try {
    fuzz(p.model, p.seeds, {}, config_for(Strategy::violation_kmoc, 100));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::missing_profile);
  }
}

TEST(Fuzz, SeedShapeMismatch) {
  Planted p;
  p.seeds.push_back(ImageTensor(4, 4, 0.1f));
  try {
    fuzz(p.model, p.seeds, p.profiling, config_for(Strategy::violation_kmvp, 100));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::shape_mismatch);
  }
}

std::vector<LogEntry> through_json(const std::vector<LogEntry>& log) {
  std::vector<LogEntry> out;
  for (const auto& e : log) out.push_back(log_entry_from_json(nlohmann::json::parse(to_json(e).dump())));
  return out;
}

TEST(Replay, EveryStrategyReplaysExactly) {
  Planted p;
  const auto extractor = FeatureExtractor::pooled();
  for (auto s : kAllStrategies) {
    const auto config = config_for(s, 600, 21);
    const auto f = fuzz(p.model, p.seeds, p.profiling, config, extractor);
    const auto log = through_json(f.log());
    const auto r = replay(p.model, config, f.metric(), p.seeds, log, extractor);
    EXPECT_TRUE(r.ok) << strategy_name(s) << ": " << r.mismatch;
    EXPECT_EQ(r.coverage, f.coverage()) << strategy_name(s);
    EXPECT_EQ(r.violations, f.violations().size());
    EXPECT_EQ(r.admissions, f.admissions());
    EXPECT_EQ(r.tests, f.tests_executed());
  }
}

TEST(Replay, DetectsTamperedLog) {
  Planted p;
  const auto config = config_for(Strategy::violation_kmvp, 300);
  const auto f = fuzz(p.model, p.seeds, p.profiling, config);
  auto log = through_json(f.log());
  auto it = std::find_if(log.begin(), log.end(), [](const LogEntry& e) { return !e.initial; });
  it->admitted = !it->admitted;
  const auto r = replay(p.model, config, f.metric(), p.seeds, log);
  EXPECT_FALSE(r.ok);
  EXPECT_NE(r.mismatch.find("admission"), std::string::npos);

  auto flags = through_json(f.log());
  flags.back().flags[1] = !flags.back().flags[1];
  EXPECT_FALSE(replay(p.model, config, f.metric(), p.seeds, flags).ok);
}

}  // namespace
}  // namespace nfz
