#pragma once

#include <Eigen/Dense>
#include <vector>

#include "hdgm/errors.hpp"

namespace hdgm {

// Inputs for the linear-Gaussian state space
//   y_t = offset_t + alpha * z_t + eps_t,   eps_t ~ N(0, sigma2[t] * I)
//   z_t = g * z_{t-1} + eta_t,              eta_t ~ N(0, sigma_eta)
//   z_0 ~ N(mu0, sigma0)
// offset is the regression mean X_t * beta, precomputed by the caller.
// NaN entries of y are missing; an explicit mask can override (true =
// observed), which lets callers prove masked values never leak.
struct StateSpaceInputs {
  Eigen::MatrixXd y;       // n x T
  Eigen::MatrixXd offset;  // n x T
  double alpha = 1.0;
  double g = 0.0;
  Eigen::MatrixXd sigma_eta;  // n x n innovation covariance
  Eigen::VectorXd sigma2;     // T, per-time measurement variance
  Eigen::VectorXd mu0;        // n
  Eigen::MatrixXd sigma0;     // n x n
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask;  // optional, n x T

  int n() const { return static_cast<int>(y.rows()); }
  int T() const { return static_cast<int>(y.cols()); }
  bool observed(int i, int t) const;
  void validate() const;
};

struct FilterOutput {
  std::vector<Eigen::VectorXd> z_pred;   // z_{t|t-1}, t = 1..T
  std::vector<Eigen::MatrixXd> p_pred;   // P_{t|t-1}
  std::vector<Eigen::VectorXd> z_filt;   // z_{t|t}
  std::vector<Eigen::MatrixXd> p_filt;   // P_{t|t}
  std::vector<Eigen::VectorXd> innovation;      // v_t over observed rows
  std::vector<Eigen::MatrixXd> innovation_cov;  // S_t over observed rows
  std::vector<std::vector<int>> observed_idx;   // observed row indices per t
  double loglik = 0.0;                   // prediction-error decomposition
  double max_presym_asymmetry = 0.0;     // diagnostics: worst asymmetry seen
};

struct SmootherOutput {
  std::vector<Eigen::VectorXd> z_smooth;  // z_t^T, t = 1..T
  std::vector<Eigen::MatrixXd> p_smooth;  // P_t^T
  Eigen::VectorXd z0_smooth;              // z_0^T
  Eigen::MatrixXd p0_smooth;              // P_0^T
  std::vector<Eigen::MatrixXd> lag_one;   // Cov(z_t, z_{t-1} | Y), t = 1..T
  Eigen::MatrixXd s11, s10, s00;          // EM second moments
  double loglik = 0.0;
  double max_presym_asymmetry = 0.0;
};

FilterOutput kalman_filter(const StateSpaceInputs& in);
SmootherOutput kalman_smooth(const StateSpaceInputs& in);

// Gaussian log-density of the observed entries; 0 for a fully missing panel.
double observed_loglik(const StateSpaceInputs& in);

}  // namespace hdgm
