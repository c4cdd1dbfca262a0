#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "hdgm/predict.hpp"

namespace hdgm {

// Time window: all grid dates, a season filter, an explicit range, or both.
struct ScenarioWindow {
  std::optional<Season> season;
  std::optional<Date> from;
  std::optional<Date> to;

  bool contains(const Date& d) const;
};

// Spatial mask over pixel metadata.
struct MaskRule {
  std::optional<double> max_altitude;
  bool exclude_forest = false;
  std::vector<std::string> provinces;   // empty = all
  std::vector<std::string> land_types;  // empty = all
};

struct ScenarioSpec {
  std::string name;
  std::string target;  // base covariate reduced by the scenario
  double r = 0.0;      // reduction factor in [0, 1]
  ScenarioWindow window;
  MaskRule mask;
  std::vector<std::string> aggregate_by = {"overall"};  // overall|province|land|season

  void validate(const ModelSpec& model) const;
};

struct GroupSummary {
  std::string key;    // "overall", "province", "land", "season"
  std::string value;  // group label
  long n_pixels = 0;  // D*
  long n_days = 0;    // I*
  long n_cells = 0;   // pixel-days actually present
  double y_bar = 0.0;       // baseline predicted mean, original units
  double delta_mean = 0.0;  // average change, negative = reduction
  double delta_std = 0.0;   // uncertainty of the average change
  double percent = 0.0;     // 100 * delta_mean / y_bar
};

struct PixelSummary {
  std::string pixel_id;
  double lat = 0.0, lon = 0.0;
  long n_days = 0;
  double delta_mean = 0.0;  // change, negative = reduction
  double delta_std = 0.0;
};

struct ScenarioResult {
  std::string name;
  double r = 0.0;
  std::vector<Date> dates;              // window dates actually used
  std::vector<int> pixels;              // masked pixel indices into the grid
  Eigen::MatrixXd change;               // m x T_grid, yhat_r - yhat (negative = reduction),
                                        // NaN outside the mask/window or where skipped
  std::vector<GroupSummary> groups;
  std::vector<PixelSummary> pixel_map;
  std::vector<std::string> warnings;
};

// Indices of the pixels passing the mask rule.
std::vector<int> masked_pixels(const PredictionGrid& grid, const MaskRule& mask);

// Counterfactual grid: the target column multiplied by (1 - r) in original
// units over masked pixels and window dates. Interaction columns are rebuilt
// from the reduced base when the design is constructed, so nothing else here
// changes.
PredictionGrid apply_reduction(const PredictionGrid& grid, const ModelSpec& model,
                               const ScenarioSpec& spec);

// Daily delta yhat - yhat_r = Delta_x' beta, in original units (positive =
// the scenario lowers the response). NaN where the design row is incomplete
// or the pixel-day is outside the scenario mask/window.
Eigen::MatrixXd daily_delta(const FitResult& fit, const PredictionGrid& grid,
                            const ScenarioSpec& spec);

// Group means over the masked pixel-days and the analytic uncertainty
// Delta_x_bar' Sigma_beta Delta_x_bar + 2/(I*^2 D*) sum sigma2_t, back-scaled
// to original units. `delta` is the daily_delta output; `baseline` the
// baseline prediction for the percent column.
ScenarioResult aggregate(const FitResult& fit, const PredictionGrid& grid,
                         const ScenarioSpec& spec, const Eigen::MatrixXd& delta,
                         const GridPrediction& baseline);

// Convenience orchestrator: baseline prediction, daily deltas, aggregation.
ScenarioResult run_scenario(const FitResult& fit, const PredictionGrid& grid,
                            const ScenarioSpec& spec);

}  // namespace hdgm
