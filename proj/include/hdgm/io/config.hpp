#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hdgm/emfit.hpp"
#include "hdgm/scenario.hpp"
#include "hdgm/sim.hpp"

namespace hdgm::io {

// Run configuration (JSON). Every CLI flag overrides its config counterpart.
struct RunConfig {
  std::string response = "y";
  std::vector<std::string> continuous;
  std::vector<std::string> binary;
  std::vector<std::string> interactions;  // base covariate names, paired with Season
  std::string kernel = "exponential";
  std::optional<RainRule> rain;
  EmOptions em;

  // scenario section: shared window/mask/aggregation, one entry per scenario
  struct ScenarioEntry {
    std::string name;
    std::string target;
    double reduction = 0.0;
  };
  std::vector<ScenarioEntry> scenarios;
  ScenarioWindow window;
  MaskRule mask;
  std::vector<std::string> aggregate_by = {"overall"};

  int acf_max_lag = 30;
  int vario_bins = 10;
  int vario_lags = 9;
  std::string output_dir = "out";

  ModelSpec model_spec() const;
  std::vector<ScenarioSpec> scenario_specs() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

SimSpec load_sim_config(const std::filesystem::path& path);

}  // namespace hdgm::io
