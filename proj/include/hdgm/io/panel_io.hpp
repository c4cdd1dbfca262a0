#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hdgm/diagnostics.hpp"
#include "hdgm/emfit.hpp"
#include "hdgm/panel.hpp"
#include "hdgm/predict.hpp"
#include "hdgm/scenario.hpp"

namespace hdgm::io {

struct IngestStats {
  long rows = 0;
  int n = 0;
  int T = 0;
  long observed_cells = 0;
  long missing_cells = 0;
};

// Long-format panel CSV: station_id, date, latitude, longitude, response and
// raw covariate columns; optional altitude/province/land_type metadata. Dates
// become a contiguous daily axis (gaps are missing). Duplicate (station,
// date) pairs and inconsistent coordinates are errors.
ObservationPanel ingest_panel(const std::filesystem::path& path, const ModelSpec& spec,
                              IngestStats* stats = nullptr);

// Long-format grid CSV: pixel_id, date, latitude, longitude, raw covariates,
// optional altitude/province/land_type/forest metadata. Dates are the sorted
// unique dates present; absent pixel-days turn into NaN design rows.
PredictionGrid ingest_grid(const std::filesystem::path& path, const ModelSpec& spec);

// Writers (atomic: write-then-rename). Raw continuous/binary columns only;
// derived columns (intercept, interactions) are rebuilt on ingestion.
void write_panel_csv(const std::filesystem::path& path, const ObservationPanel& panel,
                     const ModelSpec& spec);
void write_latent_csv(const std::filesystem::path& path, const ObservationPanel& panel,
                      const Eigen::MatrixXd& latent);

void write_prediction_csv(const std::filesystem::path& path, const PredictionGrid& grid,
                          const GridPrediction& pred);

void write_scenario_delta_csv(const std::filesystem::path& path, const PredictionGrid& grid,
                              const std::vector<ScenarioResult>& results);
void write_scenario_summary_csv(const std::filesystem::path& path,
                                const std::vector<ScenarioResult>& results);
void write_scenario_pixel_csv(const std::filesystem::path& path,
                              const std::vector<ScenarioResult>& results);

void write_residuals_csv(const std::filesystem::path& path, const ObservationPanel& panel,
                         const Eigen::MatrixXd& residuals);
void write_acf_csv(const std::filesystem::path& path, const ObservationPanel& panel,
                   const StationAcf& acf);
void write_variogram_csv(const std::filesystem::path& path, const Variogram& v);
void write_cv_csv(const std::filesystem::path& path, const CvReport& report);

struct CoefficientRow {
  std::string name;
  double beta_std = 0.0;
  double se_std = 0.0;
  double t_abs = 0.0;
  double p_value = 0.0;
  double beta_orig = 0.0;
  double se_orig = 0.0;
};

// Table-4-style coefficient summary; original-unit columns use the delta
// method through the standardization moments.
std::vector<CoefficientRow> coefficient_table(const FitResult& fit);

void write_coefficients_csv(const std::filesystem::path& path, const FitResult& fit);
void write_sigma2_csv(const std::filesystem::path& path, const FitResult& fit);

}  // namespace hdgm::io
