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

// The fuzzing loop: weighted seed scheduling, m mutants per iteration from
// one chosen seed, violation collection, and corpus admission on strict
// coverage increase. Every executed test is appended to a log that is
// sufficient to replay the campaign without the original rng.

#ifndef NFZ_FUZZER_HPP_
#define NFZ_FUZZER_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "nfz/coverage.hpp"
#include "nfz/error.hpp"
#include "nfz/features.hpp"
#include "nfz/image.hpp"
#include "nfz/model.hpp"
#include "nfz/mutation.hpp"
#include "nfz/safety.hpp"

namespace nfz {

struct SchedulerConfig {
  double gamma = 20.0;
  double p_min = 0.1;

  void validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
      throw Error(Errc::config, "scheduler gamma must be positive");
    if (!(p_min > 0.0 && p_min < 1.0)) throw Error(Errc::config, "p_min must lie in (0, 1)");
  }
};

// Selection weight of a seed chosen g times before: 1 - g/gamma, floored at
// p_min once g reaches gamma * (1 - p_min).
inline double seed_weight(std::size_t g, double gamma, double p_min) {
  return std::max(1.0 - static_cast<double>(g) / gamma, p_min);
}

struct SeedEntry {
  std::size_t id = 0;
  ImageTensor image;
  std::size_t g = 0;
  std::size_t violation_yield = 0;
  std::size_t mutants = 0;
  std::optional<MutationRecord> origin;  // unset for initial seeds
};

// The seed set. Ids are dense and equal to the insertion index.
class Corpus {
 public:
  std::size_t add(ImageTensor image, std::optional<MutationRecord> origin = std::nullopt) {
    const std::size_t id = entries_.size();
    entries_.push_back({id, std::move(image), 0, 0, 0, std::move(origin)});
    return id;
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  SeedEntry& operator[](std::size_t id) { return entries_.at(id); }
  const SeedEntry& operator[](std::size_t id) const { return entries_.at(id); }
  const std::vector<SeedEntry>& entries() const { return entries_; }

 private:
  std::vector<SeedEntry> entries_;
};

// Samples a seed with probability proportional to its weight and counts
// the selection.
inline SeedEntry& choose_seed(Corpus& corpus, Rng& rng, const SchedulerConfig& scheduler = {}) {
  if (corpus.empty()) throw Error(Errc::empty_input, "cannot choose from an empty corpus");
  double total = 0.0;
  for (const auto& s : corpus.entries()) total += seed_weight(s.g, scheduler.gamma, scheduler.p_min);
  double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  std::size_t pick = corpus.size() - 1;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    u -= seed_weight(corpus[i].g, scheduler.gamma, scheduler.p_min);
    if (u < 0.0) {
      pick = i;
      break;
    }
  }
  auto& seed = corpus[pick];
  ++seed.g;
  return seed;
}

// Seed with the highest violation yield, ties to the lowest id; nullopt when
// no seed has produced a violation yet.
inline std::optional<std::size_t> most_violating_seed(const Corpus& corpus) {
  std::optional<std::size_t> best;
  for (const auto& s : corpus.entries())
    if (s.violation_yield > 0 && (!best || s.violation_yield > corpus[*best].violation_yield))
      best = s.id;
  return best;
}

// Uniform i.i.d. pixels from a dedicated sub-stream.
inline ImageTensor random_image(std::size_t height, std::size_t width, std::uint64_t stream) {
  Rng rng(stream);
  std::uniform_real_distribution<float> pixel(0.0f, 1.0f);
  ImageTensor image(height, width);
  for (auto& p : image.pixels) p = pixel(rng);
  return image;
}

struct Violation {
  ImageTensor image;
  std::size_t test_index = 0;
  std::optional<MutationRecord> lineage;
  std::optional<std::uint64_t> random_stream;
  ViolationReport report;
  StimulationPattern pattern;
};

// Unique violating tests, keyed by exact image bytes.
class ViolationSet {
 public:
  // Returns false for a duplicate image.
  bool add(Violation v) {
    if (!v.report.any_violation)
      throw Error(Errc::invalid_argument, "only violating tests belong in the violation set");
    if (!seen_.emplace(v.image.bytes()).second) return false;
    entries_.push_back(std::move(v));
    return true;
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Violation>& entries() const { return entries_; }

  std::size_t count(Constraint c) const {
    return static_cast<std::size_t>(std::count_if(
        entries_.begin(), entries_.end(), [c](const Violation& v) { return v.report.violates(c); }));
  }

 private:
  std::vector<Violation> entries_;
  std::unordered_set<std::string> seen_;
};

struct FuzzConfig {
  MetricConfig metric;
  std::size_t m = 10;
  std::size_t test_limit = 5000;
  SchedulerConfig scheduler;
  MutationConfig mutation;
  MutationConfig local_mutation = MutationConfig::local();
  SafetyLimits limits = SafetyLimits::retinal();
  std::uint64_t rng_seed = 0;
  std::size_t threads = 1;  // parallel forwards inside one iteration

  Strategy strategy() const { return metric.strategy; }

  void validate(std::size_t seed_count) const {
    metric.validate();
    scheduler.validate();
    mutation.validate();
    local_mutation.validate();
    limits.validate();
    if (m < 1) throw Error(Errc::config, "m must be at least 1");
    if (test_limit < seed_count)
      throw Error(Errc::config, "test limit " + std::to_string(test_limit) +
                                    " is smaller than the seed set (" +
                                    std::to_string(seed_count) + ")");
    if (threads < 1) throw Error(Errc::config, "threads must be at least 1");
  }
};

inline std::array<bool, 4> violation_flags(const ViolationReport& report) {
  return {report.violates(Constraint::physically_impossible),
          report.violates(Constraint::charge_density),
          report.violates(Constraint::instantaneous_current),
          report.violates(Constraint::active_electrodes)};
}

// One line of the campaign log.
struct LogEntry {
  std::size_t test_index = 0;
  bool initial = false;                         // a seed of the initial set
  std::optional<std::size_t> seed_id;           // parent (or own id for seeds)
  std::optional<MutationRecord> mutation;
  std::optional<std::uint64_t> random_stream;   // B-FR images
  std::array<bool, 4> flags{};                  // PI, CD, IC, AE
  bool unique_violation = false;                // entered the violation set
  double coverage = 0.0;
  bool admitted = false;
  std::optional<std::size_t> new_id;

  bool any_violation() const { return flags[0] || flags[1] || flags[2] || flags[3]; }
};

inline nlohmann::json to_json(const LogEntry& e) {
  nlohmann::json j;
  j["test"] = e.test_index;
  j["initial"] = e.initial;
  j["seed"] = e.seed_id ? nlohmann::json(*e.seed_id) : nlohmann::json(nullptr);
  if (e.mutation) j["mutation"] = to_json(*e.mutation);
  if (e.random_stream) j["random_stream"] = *e.random_stream;
  nlohmann::json flags;
  for (auto c : kAllConstraints)
    flags[std::string(constraint_name(c))] = e.flags[static_cast<std::size_t>(c)];
  j["violations"] = flags;
  j["unique_violation"] = e.unique_violation;
  j["coverage"] = e.coverage;
  j["admitted"] = e.admitted;
  j["new_id"] = e.new_id ? nlohmann::json(*e.new_id) : nlohmann::json(nullptr);
  return j;
}

inline LogEntry log_entry_from_json(const nlohmann::json& j) {
  LogEntry e;
  try {
    e.test_index = j.at("test").get<std::size_t>();
    e.initial = j.at("initial").get<bool>();
    if (!j.at("seed").is_null()) e.seed_id = j.at("seed").get<std::size_t>();
    if (j.contains("mutation")) e.mutation = mutation_record_from_json(j.at("mutation"));
    if (j.contains("random_stream")) e.random_stream = j.at("random_stream").get<std::uint64_t>();
    for (auto c : kAllConstraints)
      e.flags[static_cast<std::size_t>(c)] =
          j.at("violations").at(std::string(constraint_name(c))).get<bool>();
    e.unique_violation = j.at("unique_violation").get<bool>();
    e.coverage = j.at("coverage").get<double>();
    e.admitted = j.at("admitted").get<bool>();
    if (!j.at("new_id").is_null()) e.new_id = j.at("new_id").get<std::size_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::bad_header, std::string("malformed log entry: ") + ex.what());
  }
  return e;
}

// Forward + decode + constraint evaluation (+ trace/features when the
// metric consumes them).
class TestExecutor {
 public:
  TestExecutor(const ModelGraph& model, SafetyLimits limits, bool trace,
               const FeatureExtractor* extractor)
      : model_(&model), limits_(limits), trace_(trace), extractor_(extractor) {}

  TestRecord operator()(ImageTensor image) const {
    auto result = forward(*model_, image, trace_);
    TestRecord record;
    record.pattern = decode_stimulation(result.output, model_->layout);
    record.report = evaluate(record.pattern, limits_);
    record.raw = std::move(result.output);
    record.trace = std::move(result.trace);
    if (extractor_) record.features = extractor_->extract(image);
    record.image = std::move(image);
    return record;
  }

 private:
  const ModelGraph* model_;
  SafetyLimits limits_;
  bool trace_;
  const FeatureExtractor* extractor_;
};

inline bool admits(Strategy s, std::size_t newly_covered) {
  switch (s) {
    case Strategy::basic_all: return true;
    case Strategy::basic_none:
    case Strategy::basic_random:
    case Strategy::basic_local: return false;
    default: return newly_covered > 0;
  }
}

struct TrajectoryPoint {
  std::size_t tests = 0;
  double coverage = 0.0;
};

// One campaign. Construct, initialize with the seed set, then step until
// done (or call run()).
class Fuzzer {
 public:
  Fuzzer(const ModelGraph& model, FuzzConfig config, CoverageMetric metric,
         std::optional<FeatureExtractor> extractor = std::nullopt)
      : model_(model),
        config_(std::move(config)),
        metric_(std::move(metric)),
        extractor_(std::move(extractor)),
        rng_(config_.rng_seed),
        state_(metric_.empty_state()) {
    if (metric_.strategy() != config_.strategy())
      throw Error(Errc::config, "metric strategy differs from campaign strategy");
    if (metric_.needs_features() && !extractor_)
      throw Error(Errc::missing_profile, "I-Div-Approx needs a feature extractor");
  }

  void initialize(std::span<const ImageTensor> seeds) {
    if (initialized_) throw Error(Errc::invalid_argument, "campaign already initialized");
    if (seeds.empty()) throw Error(Errc::empty_input, "seed set is empty");
    config_.validate(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      require_valid(seeds[i]);
      if (seeds[i].height != model_.input_height || seeds[i].width != model_.input_width)
        throw Error(Errc::shape_mismatch, "seed " + std::to_string(i) + " is " +
                                              std::to_string(seeds[i].height) + "x" +
                                              std::to_string(seeds[i].width) + ", model expects " +
                                              std::to_string(model_.input_height) + "x" +
                                              std::to_string(model_.input_width));
    }
    const auto exec = executor();
    for (const auto& seed : seeds) {
      const auto record = exec(seed);
      const std::size_t id = corpus_.add(seed);
      if (metric_.universe() > 0) metric_.observe(state_, record);
      LogEntry e;
      e.test_index = tests_++;
      e.initial = true;
      e.seed_id = id;
      e.flags = violation_flags(record.report);
      e.coverage = state_.fraction();
      log_.push_back(e);
    }
    trajectory_.push_back({tests_, state_.fraction()});
    initialized_ = true;
  }

  bool done() const { return tests_ >= config_.test_limit; }

  // One iteration of the loop: m tests.
  void step() {
    if (!initialized_) throw Error(Errc::invalid_argument, "campaign not initialized");
    if (config_.strategy() == Strategy::basic_random) {
      random_step();
    } else {
      mutant_step();
    }
    trajectory_.push_back({tests_, state_.fraction()});
  }

  void run() {
    while (!done()) step();
  }

  const FuzzConfig& config() const { return config_; }
  const CoverageMetric& metric() const { return metric_; }
  const Corpus& corpus() const { return corpus_; }
  const ViolationSet& violations() const { return violations_; }
  const CoverageState& coverage() const { return state_; }
  const std::vector<LogEntry>& log() const { return log_; }
  const std::vector<TrajectoryPoint>& trajectory() const { return trajectory_; }
  std::size_t tests_executed() const { return tests_; }
  std::size_t iterations() const { return iterations_; }
  std::size_t admissions() const { return corpus_.size() - initial_count(); }

  std::size_t initial_count() const {
    return static_cast<std::size_t>(
        std::count_if(log_.begin(), log_.end(), [](const LogEntry& e) { return e.initial; }));
  }

 private:
  TestExecutor executor() const {
    return TestExecutor(model_, config_.limits, metric_.needs_trace(),
                        metric_.needs_features() ? &*extractor_ : nullptr);
  }

  // Runs exec over the images, in parallel when configured; results come
  // back in input order.
  std::vector<TestRecord> execute_all(std::vector<ImageTensor> images) const {
    const auto exec = executor();
    std::vector<TestRecord> out(images.size());
    const std::size_t workers = std::min(config_.threads, images.size());
    if (workers <= 1) {
      for (std::size_t i = 0; i < images.size(); ++i) out[i] = exec(std::move(images[i]));
      return out;
    }
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < workers; ++w)
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < images.size(); i += workers) out[i] = exec(std::move(images[i]));
      }));
    for (auto& j : jobs) j.get();
    return out;
  }

  void mutant_step() {
    const bool local = config_.strategy() == Strategy::basic_local;
    std::size_t parent_id;
    if (auto best = local ? most_violating_seed(corpus_) : std::nullopt) {
      parent_id = *best;
      ++corpus_[parent_id].g;
    } else {
      parent_id = choose_seed(corpus_, rng_, config_.scheduler).id;
    }
    const MutationConfig& mconf = local ? config_.local_mutation : config_.mutation;

    std::vector<MutationRecord> records;
    std::vector<ImageTensor> images;
    for (std::size_t i = 0; i < config_.m; ++i) {
      auto [image, record] =
          random_mutation(corpus_[parent_id].image, rng_, mconf, parent_id, draws_++);
      images.push_back(std::move(image));
      records.push_back(std::move(record));
    }
    std::vector<TestRecord> results;
    try {
      results = execute_all(std::move(images));
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " [mutant of seed " +
                                std::to_string(parent_id) + ", draws " +
                                std::to_string(records.front().draw_index) + ".." +
                                std::to_string(records.back().draw_index) + "]");
    }
    corpus_[parent_id].mutants += config_.m;

    for (std::size_t i = 0; i < results.size(); ++i) {
      auto& r = results[i];
      LogEntry e;
      e.test_index = tests_++;
      e.seed_id = parent_id;
      e.mutation = records[i];
      e.flags = violation_flags(r.report);
      if (r.report.any_violation) {
        ++corpus_[parent_id].violation_yield;
        e.unique_violation = violations_.add(
            {r.image, e.test_index, records[i], std::nullopt, r.report, r.pattern});
      }
      const std::size_t added = metric_.universe() > 0 ? metric_.observe(state_, r) : 0;
      e.coverage = state_.fraction();
      if (admits(config_.strategy(), added)) {
        e.admitted = true;
        e.new_id = corpus_.add(std::move(r.image), records[i]);
      }
      log_.push_back(std::move(e));
    }
    ++iterations_;
  }

  void random_step() {
    std::vector<std::uint64_t> streams;
    std::vector<ImageTensor> images;
    for (std::size_t i = 0; i < config_.m; ++i) {
      streams.push_back(rng_());
      images.push_back(random_image(model_.input_height, model_.input_width, streams.back()));
    }
    auto results = execute_all(std::move(images));
    for (std::size_t i = 0; i < results.size(); ++i) {
      auto& r = results[i];
      LogEntry e;
      e.test_index = tests_++;
      e.random_stream = streams[i];
      e.flags = violation_flags(r.report);
      if (r.report.any_violation)
        e.unique_violation = violations_.add(
            {r.image, e.test_index, std::nullopt, streams[i], r.report, r.pattern});
      e.coverage = state_.fraction();
      log_.push_back(std::move(e));
    }
    ++iterations_;
  }

  ModelGraph model_;
  FuzzConfig config_;
  CoverageMetric metric_;
  std::optional<FeatureExtractor> extractor_;
  Rng rng_;
  Corpus corpus_;
  ViolationSet violations_;
  CoverageState state_;
  std::vector<LogEntry> log_;
  std::vector<TrajectoryPoint> trajectory_;
  std::size_t tests_ = 0;
  std::size_t iterations_ = 0;
  std::uint64_t draws_ = 0;
  bool initialized_ = false;
};

// The campaign's coverage metric, profiling P first when the metric needs
// bounds.
inline CoverageMetric make_metric(const ModelGraph& model, std::span<const ImageTensor> seeds,
                                  std::span<const ImageTensor> profiling_set,
                                  const MetricConfig& config, const FeatureExtractor& extractor) {
  std::optional<ProfilingStats> stats;
  if (auto space = required_profile(config.strategy)) {
    if (profiling_set.empty())
      throw Error(Errc::missing_profile, std::string(strategy_name(config.strategy)) +
                                             " requires a profiling dataset");
    stats = profile(model, profiling_set, *space, &extractor);
  }
  const std::size_t features = config.strategy == Strategy::input_div_approx && !seeds.empty()
                                   ? extractor.extract(seeds.front()).size()
                                   : 0;
  return CoverageMetric(config, MetricContext::of(model, features), std::move(stats));
}

// Algorithm entry point: PreProcess(P), Cov(S), then iterations until the
// test limit is reached.
inline Fuzzer fuzz(const ModelGraph& model, std::span<const ImageTensor> seeds,
                   std::span<const ImageTensor> profiling_set, const FuzzConfig& config,
                   std::optional<FeatureExtractor> extractor = std::nullopt) {
  if (!extractor) extractor = FeatureExtractor::pooled();
  auto metric = make_metric(model, seeds, profiling_set, config.metric, *extractor);
  Fuzzer fuzzer(model, config, std::move(metric), std::move(extractor));
  fuzzer.initialize(seeds);
  fuzzer.run();
  return fuzzer;
}

// testLimit giving a strategy the same wall-clock budget as the baseline.
inline std::size_t budget_for_strategy(double baseline_per_test, double strategy_per_test,
                                       std::size_t baseline_test_limit) {
  if (!(baseline_per_test > 0.0) || !(strategy_per_test > 0.0) ||
      !std::isfinite(baseline_per_test) || !std::isfinite(strategy_per_test))
    throw Error(Errc::invalid_argument, "per-test times must be positive and finite");
  const double limit =
      std::floor(static_cast<double>(baseline_test_limit) * baseline_per_test / strategy_per_test);
  return std::max<std::size_t>(1, static_cast<std::size_t>(limit));
}

struct ReplayResult {
  bool ok = true;
  std::string mismatch;  // first divergence, empty when ok
  CoverageState coverage;
  std::size_t violations = 0;
  std::size_t admissions = 0;
  std::size_t tests = 0;
};

// Re-executes a campaign from its log and the initial seed set, checking
// every logged violation flag, coverage value, and admission decision.
inline ReplayResult replay(const ModelGraph& model, const FuzzConfig& config,
                           const CoverageMetric& metric, std::span<const ImageTensor> seeds,
                           std::span<const LogEntry> log,
                           const std::optional<FeatureExtractor>& extractor = std::nullopt) {
  ReplayResult out;
  out.coverage = metric.empty_state();
  const TestExecutor exec(model, config.limits, metric.needs_trace(),
                          metric.needs_features() ? &*extractor : nullptr);
  std::vector<ImageTensor> corpus(seeds.begin(), seeds.end());
  ViolationSet violations;
  const bool local = config.strategy() == Strategy::basic_local;
  auto fail = [&](const LogEntry& e, const std::string& what) {
    if (out.ok) {
      out.ok = false;
      out.mismatch = "test " + std::to_string(e.test_index) + ": " + what;
    }
  };
  std::size_t initial = 0;
  for (const auto& e : log) {
    if (e.test_index != out.tests) fail(e, "test index out of sequence");
    ++out.tests;
    ImageTensor image;
    if (e.initial) {
      if (initial >= seeds.size()) {
        fail(e, "more initial entries than seeds");
        break;
      }
      image = seeds[initial++];
    } else if (e.random_stream) {
      image = random_image(model.input_height, model.input_width, *e.random_stream);
    } else if (e.mutation && e.seed_id && *e.seed_id < corpus.size()) {
      image = apply_transform(e.mutation->transform, corpus[*e.seed_id],
                              local ? config.local_mutation : config.mutation);
    } else {
      fail(e, "entry has no reproducible image source");
      break;
    }
    const auto record = exec(image);
    if (violation_flags(record.report) != e.flags) fail(e, "violation flags differ");
    const std::size_t added = metric.universe() > 0 ? metric.observe(out.coverage, record) : 0;
    if (out.coverage.fraction() != e.coverage) fail(e, "coverage fraction differs");
    if (e.initial) continue;
    if (record.report.any_violation) {
      const bool unique = violations.add({record.image, e.test_index, e.mutation, e.random_stream,
                                          record.report, record.pattern});
      if (unique != e.unique_violation) fail(e, "violation uniqueness differs");
    } else if (e.unique_violation) {
      fail(e, "logged violation not reproduced");
    }
    const bool admit = !e.random_stream && admits(config.strategy(), added);
    if (admit != e.admitted) fail(e, "admission decision differs");
    if (admit) {
      if (e.new_id != corpus.size()) fail(e, "admitted id differs");
      corpus.push_back(record.image);
      ++out.admissions;
    }
  }
  if (initial != seeds.size() && out.ok) {
    out.ok = false;
    out.mismatch = "log covers " + std::to_string(initial) + " of " +
                   std::to_string(seeds.size()) + " seeds";
  }
  out.violations = violations.size();
  return out;
}

}  // namespace nfz

#endif  // NFZ_FUZZER_HPP_
