#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "hdgm/emfit.hpp"
#include "hdgm/panel.hpp"

namespace hdgm {

// (y - X beta - alpha z^T) / sigma_t in standardized space; NaN stays NaN.
Eigen::MatrixXd studentized_residuals(const ObservationPanel& panel, const ModelSpec& spec,
                                      const ModelParams& params,
                                      const Eigen::MatrixXd& z_smooth);

struct StationAcf {
  std::vector<int> station;            // indices of stations with enough data
  std::vector<Eigen::VectorXd> acf;    // per station, lags 0..max_lag
  std::vector<int> skipped;            // too-short or constant series
};

// Sample ACF per station with pairwise-complete handling of missing values.
StationAcf station_acf(const Eigen::MatrixXd& residuals, int max_lag = 30);

struct Variogram {
  Eigen::VectorXd h_mid;    // distance bin midpoints (degrees of arc)
  Eigen::VectorXi u_lags;   // time lags (days)
  Eigen::MatrixXd gamma;    // bins x lags, NaN where a bin is empty
  Eigen::MatrixXd count;    // pair counts
};

// Empirical semivariance gamma(h, u) over ordered distinct station pairs,
// missing-aware. Default bins: `space_bins` equal widths up to half the
// maximum pairwise distance; lags 0..time_lags.
Variogram st_variogram(const ObservationPanel& panel, int space_bins = 10, int time_lags = 9);

struct CvReport {
  std::vector<std::string> station;    // held-out station ids
  std::vector<double> rmse;            // per-fold RMSE, original units
  std::vector<long> n_obs;             // held-out observed entries per fold
  std::vector<std::string> failed;     // folds excluded from pooling
  double pooled_rmse = 0.0;
  double insample_rmse = 0.0;          // from the full-panel fit
  std::vector<Eigen::VectorXd> predictions;  // per-fold series, original units
};

// Leave-one-station-out cross-validation: refit without each held-out
// station (standardization moments recomputed on the training set), krige to
// its location, score on its observed values in original units.
CvReport losocv(const ObservationPanel& panel, const ModelSpec& spec, const EmOptions& options,
                const std::vector<std::string>& holdout_ids);

}  // namespace hdgm
