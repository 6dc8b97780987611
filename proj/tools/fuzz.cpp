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

// fuzz: command-line front end.
//
//   fuzz run --config <file> [--out <dir>] [--rng-seed <u64>]
//   fuzz profile --model <nef> --data <dir> --space outputs|neurons|features --out <json>
//   fuzz compare <report...> --out <csv>
//   fuzz breakdown <report...> --out <csv> [--json <file>]
//   fuzz replay --config <file> --log <campaign.jsonl>
//   fuzz fixture <name> --out <dir>
//
// Exit status: 0 success (violations are findings, not failures), 1 runtime
// error, 2 configuration error. Errors are printed to stderr as one JSON
// object.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nfz/nfz.hpp"

namespace fs = std::filesystem;

namespace {

int report_error(const std::string& code, const std::string& message,
                 std::optional<std::size_t> layer, int status) {
  nlohmann::json j{{"error", {{"code", code}, {"message", message}}}};
  if (layer) j["error"]["layer"] = *layer;
  std::cerr << j.dump() << "\n";
  return status;
}

std::optional<std::uint64_t> env_rng_seed() {
  const char* v = std::getenv("FUZZ_RNG_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  try {
    std::size_t pos = 0;
    const auto seed = std::stoull(v, &pos);
    if (pos != std::string(v).size()) throw std::invalid_argument(v);
    return seed;
  } catch (const std::logic_error&) {
    throw nfz::Error(nfz::Errc::config, std::string("FUZZ_RNG_SEED is not an unsigned integer: ") + v);
  }
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw nfz::Error(nfz::Errc::io, "cannot write " + path.string());
  out << text;
}

std::vector<nfz::CampaignReport> load_reports(const std::vector<std::string>& paths) {
  std::vector<nfz::CampaignReport> reports;
  for (const auto& p : paths) reports.push_back(nfz::load_report(p));
  return reports;
}

void write_images(const std::vector<nfz::ImageTensor>& images, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%03zu.f32", i);
    nfz::write_f32_grid(images[i], dir / name);
  }
}

void write_fixture(const std::string& name, const fs::path& out) {
  namespace fx = nfz::fixtures;
  fs::create_directories(out);
  nfz::ModelGraph model;
  bool planted = false;
  std::string preset = "retinal";
  if (name == "planted-retinal") {
    model = fx::planted_retinal();
    planted = true;
  } else if (name == "planted-retinal-clamped") {
    fx::PlantedRetinal p;
    p.clamp = true;
    model = fx::planted_retinal(p);
    planted = true;
  } else if (name == "retinal-tiny") {
    model = fx::retinal_tiny();
  } else if (name == "cortical-tiny") {
    model = fx::cortical_tiny();
    preset = "cortical";
  } else if (name == "planted-cortical") {
    model = fx::planted_cortical();
    preset = "cortical";
  } else if (name == "identity") {
    model = fx::identity_dense();
    preset = "cortical";
  } else {
    throw nfz::Error(nfz::Errc::invalid_argument, "unknown fixture \"" + name + "\"");
  }
  nfz::save_model_file(model, out / (name + ".nef"));
  if (planted) {
    write_images(fx::planted_seeds(), out / "seeds");
    write_images(fx::planted_profiling_set(), out / "profile");
  } else {
    nfz::Rng rng(1);
    std::vector<nfz::ImageTensor> seeds;
    for (std::size_t i = 0; i < 4; ++i)
      seeds.push_back(nfz::random_image(model.input_height, model.input_width, rng()));
    write_images(seeds, out / "seeds");
    write_images(seeds, out / "profile");
  }
  nlohmann::json config{{"rng_seed", 1},
                        {"model", {{"path", name + ".nef"}, {"seeds", "seeds"}, {"profiling", "profile"}}},
                        {"limits", {{"preset", preset}}},
                        {"strategy", {{"name", "VO-KMVP"}}},
                        {"budget", {{"test_limit", 5000}}}};
  write_file(out / "config.json", config.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coverage-guided safety fuzzer for image-to-stimulation encoders"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::optional<std::uint64_t> rng_flag;
  auto* run = app.add_subcommand("run", "Run a fuzzing campaign");
  run->add_option("--config", config_path, "Campaign config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--rng-seed", rng_flag, "Override the campaign rng seed");

  std::string model_path, data_path, space_name, profile_out, extractor_name = "pooled";
  auto* prof = app.add_subcommand("profile", "Profile per-dimension ranges on a dataset");
  prof->add_option("--model", model_path, "Encoder NEF")->required();
  prof->add_option("--data", data_path, "Image directory")->required();
  prof->add_option("--space", space_name, "outputs|neurons|features")
      ->required()
      ->check(CLI::IsMember({"outputs", "neurons", "features"}));
  prof->add_option("--out", profile_out, "Output JSON")->required();
  prof->add_option("--extractor", extractor_name, "Feature extractor (features space)");

  std::vector<std::string> report_paths;
  std::string csv_out;
  auto* cmp = app.add_subcommand("compare", "Normalized violation/diversity comparison");
  cmp->add_option("reports", report_paths, "Campaign report files")->required();
  cmp->add_option("--out", csv_out, "Output CSV")->required();

  std::string json_out;
  auto* brk = app.add_subcommand("breakdown", "Per-model, per-constraint violation counts");
  brk->add_option("reports", report_paths, "Campaign report files")->required();
  brk->add_option("--out", csv_out, "Output CSV")->required();
  brk->add_option("--json", json_out, "Also write JSON here (default: <out>.json)");

  std::string log_path;
  auto* rep = app.add_subcommand("replay", "Re-execute a campaign log and verify it");
  rep->add_option("--config", config_path, "Campaign config (JSON)")->required();
  rep->add_option("--log", log_path, "campaign.jsonl")->required();

  std::string fixture_name;
  auto* fix = app.add_subcommand("fixture", "Write a fixture encoder with seeds and config");
  fix->add_option("name", fixture_name,
                  "planted-retinal|planted-retinal-clamped|retinal-tiny|cortical-tiny|"
                  "planted-cortical|identity")
      ->required();
  fix->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error("config", e.what(), std::nullopt, 2);
  }

  try {
    if (*run) {
      auto config = nfz::load_campaign_config(config_path);
      if (rng_flag)
        config.fuzz.rng_seed = *rng_flag;
      else if (auto env = env_rng_seed())
        config.fuzz.rng_seed = *env;
      const auto result = nfz::run_campaign(std::move(config), out_dir);
      std::cout << result.report.strategy << ": " << result.report.violations
                << " unique violations in " << result.report.tests << " tests, coverage "
                << result.report.coverage_fraction << "\n";
    } else if (*prof) {
      const auto model = nfz::load_model_file(model_path);
      const auto data = nfz::load_images(data_path);
      const auto extractor = nfz::make_extractor(extractor_name);
      const auto stats =
          nfz::profile(model, data, nfz::parse_profile_space(space_name), &extractor);
      write_file(profile_out, nfz::to_json(stats).dump() + "\n");
    } else if (*cmp) {
      const auto rows = nfz::compare(load_reports(report_paths));
      write_file(csv_out, nfz::comparison_csv(rows));
    } else if (*brk) {
      const auto rows = nfz::model_violation_breakdown(load_reports(report_paths));
      write_file(csv_out, nfz::breakdown_csv(rows));
      write_file(json_out.empty() ? csv_out + ".json" : json_out,
                 nfz::breakdown_json(rows).dump(2) + "\n");
    } else if (*rep) {
      const auto config = nfz::load_campaign_config(config_path);
      const auto result = nfz::replay_campaign(config, log_path);
      nlohmann::json j{{"ok", result.ok},
                       {"tests", result.tests},
                       {"violations", result.violations},
                       {"admissions", result.admissions},
                       {"covered", result.coverage.covered()},
                       {"universe", result.coverage.universe()}};
      if (!result.ok) j["mismatch"] = result.mismatch;
      std::cout << j.dump() << "\n";
      return result.ok ? 0 : 1;
    } else if (*fix) {
      write_fixture(fixture_name, out_dir);
    }
  } catch (const nfz::Error& e) {
    return report_error(std::string(nfz::errc_name(e.code())), e.what(), e.layer(),
                        e.code() == nfz::Errc::config ? 2 : 1);
  } catch (const std::exception& e) {
    return report_error("runtime", e.what(), std::nullopt, 1);
  }
  return 0;
}
