#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hdgm/emfit.hpp"
#include "hdgm/panel.hpp"

namespace hdgm {

// Prediction targets: pixel sites with raw (original-unit) covariate columns
// per date and per-pixel metadata for masked aggregations. Derived design
// columns (intercept, rain, season interactions) are built at prediction time
// from the fitted ModelSpec, so grids carry only raw inputs.
struct PredictionGrid {
  std::vector<std::string> pixel_ids;
  SiteSet sites;
  std::vector<Date> dates;  // ascending, unique
  // per date: raw column name -> m values (NaN where a pixel-day is absent)
  std::vector<std::map<std::string, Eigen::VectorXd>> raw;

  // per-pixel metadata (empty vectors when the grid file has no such column)
  std::vector<double> altitude;
  std::vector<std::string> province;
  std::vector<std::string> land_type;
  std::vector<std::uint8_t> forest;

  int m() const { return static_cast<int>(pixel_ids.size()); }
  int T() const { return static_cast<int>(dates.size()); }
  void validate() const;

  // raw columns of one date turned into the model design block (m x p).
  Eigen::MatrixXd design_block(const ModelSpec& spec, int t) const;
};

struct GridPrediction {
  std::vector<std::string> pixel_ids;
  std::vector<Date> dates;
  Eigen::MatrixXd y_hat;   // m x T_grid, original units, NaN where skipped
  long skipped = 0;        // pixel-days without a complete design row
};

// Simple-kriging weights applied to the smoothed states, per time step:
// zhat_t(s0) = r0' R^-1 z_t^T. Returns an m x T matrix for the given states.
Eigen::MatrixXd krige_latent(const Eigen::MatrixXd& z_smooth, const SiteSet& fitted_sites,
                             const SiteSet& new_sites, const CorrelationKernel& kernel);

// The kriging weight matrix W = Rcross R^-1 (m x n), exposed for reuse.
Eigen::MatrixXd kriging_weights(const SiteSet& fitted_sites, const SiteSet& new_sites,
                                const CorrelationKernel& kernel);

// yhat(s0, t) = x'(s0, t) beta + alpha zhat_t(s0), computed in standardized
// space and back-transformed. Grid dates must lie inside the fitted axis.
GridPrediction predict_response(const FitResult& fit, const PredictionGrid& grid);

}  // namespace hdgm
