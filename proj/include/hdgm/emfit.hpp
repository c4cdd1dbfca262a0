#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "hdgm/panel.hpp"
#include "hdgm/statespace.hpp"

namespace hdgm {

struct EmOptions {
  int max_iter = 400;
  double tol = 1e-4;        // relative observed-log-likelihood change
  unsigned seed = 1;        // reserved for stochastic extensions; kept for reproducibility
  double variance_floor = 1e-8;
  bool safeguard = true;    // reject g/theta proposals that would decrease Q2
  double monotonicity_slack = 1e-8;
};

// Estimated parameters in standardized space, plus the moments that map back
// to original units.
struct ModelParams {
  Eigen::VectorXd beta;    // p
  double alpha = 0.0;
  double g = 0.0;
  double theta = 1.0;      // degrees of arc
  Eigen::VectorXd sigma2;  // T, per-day measurement variance
  Eigen::VectorXd mu0;     // n
  Eigen::MatrixXd sigma0;  // n x n
  Moments moments;
};

struct FitReport {
  int iterations = 0;
  std::vector<double> loglik_trace;
  bool converged = false;
  double criterion = 0.0;          // last relative log-likelihood change
  Eigen::MatrixXd sigma_beta;      // p x p, standardized space
  double rmse_insample = 0.0;      // original units
  Eigen::MatrixXd studentized;     // n x T, NaN where missing
  int safeguard_activations = 0;
};

// Everything needed downstream: the fitted parameters, the feature pipeline,
// the smoothed latent states that kriging consumes, and the report.
struct FitResult {
  ModelSpec spec;
  SiteSet sites;
  std::vector<std::string> station_ids;
  std::vector<Date> dates;
  ModelParams params;
  FitReport report;
  Eigen::MatrixXd z_smooth;  // n x T, standardized space
};

// --- individual M-step updates (exposed so tests can cross-check each
// closed form against numerical maximization of its objective) ---

using BoolMask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Per-time variance: mean of the conditional residual second moment over the
// observed rows; times with no observations carry the previous value.
Eigen::VectorXd sigma2_update(const Eigen::MatrixXd& y, const std::vector<Eigen::MatrixXd>& x,
                              const BoolMask& mask, const Eigen::VectorXd& beta, double alpha,
                              const std::vector<Eigen::VectorXd>& z_smooth,
                              const std::vector<Eigen::MatrixXd>& p_smooth,
                              const Eigen::VectorXd& sigma2_prev, double floor);

// Weighted least squares of (y - alpha z^T) on X over observed rows.
Eigen::VectorXd beta_update(const Eigen::MatrixXd& y, const std::vector<Eigen::MatrixXd>& x,
                            const BoolMask& mask, const Eigen::VectorXd& sigma2, double alpha,
                            const std::vector<Eigen::VectorXd>& z_smooth,
                            const std::vector<std::string>& column_names);

double alpha_update(const Eigen::MatrixXd& y, const std::vector<Eigen::MatrixXd>& x,
                    const BoolMask& mask, const Eigen::VectorXd& sigma2,
                    const Eigen::VectorXd& beta, const std::vector<Eigen::VectorXd>& z_smooth,
                    const std::vector<Eigen::MatrixXd>& p_smooth);

// g = tr(S10) / tr(S00)
double transition_update(const Eigen::MatrixXd& s10, const Eigen::MatrixXd& s00);

// Range update: maximizes -(log|R(theta)| + n log tr(R(theta)^-1 C)) with
// C = S11 - g(S10 + S10') + g^2 S00 by golden-section search over log theta
// on [d_min/100, 10 d_max]. The innovation scale is profiled out, so the
// maximizer is invariant to a positive scaling of the moments.
double theta_update(const Eigen::MatrixXd& s11, const Eigen::MatrixXd& s10,
                    const Eigen::MatrixXd& s00, double g, const SiteSet& sites,
                    KernelFamily family);
double theta_update_from_distances(const Eigen::MatrixXd& s11, const Eigen::MatrixXd& s10,
                                   const Eigen::MatrixXd& s00, double g,
                                   const Eigen::MatrixXd& distances, KernelFamily family);
double theta_objective(const Eigen::MatrixXd& distances, double theta, const Eigen::MatrixXd& c);

// Plug-in GLS covariance of beta-hat over observed rows:
// [sum_t X_t' Sigma_eps_t^-1 X_t]^-1. Throws NumericalError listing collinear
// columns when the design is singular.
Eigen::MatrixXd beta_covariance(const ObservationPanel& panel, const ModelSpec& spec,
                                const ModelParams& params);

// Innovation covariance under the unit-variance latent convention.
Eigen::MatrixXd innovation_covariance(const Eigen::MatrixXd& distances, double theta, double g,
                                      KernelFamily family);

// In-sample fitted values in original units (NaN where the design row is
// incomplete).
Eigen::MatrixXd in_sample_fit(const ObservationPanel& panel, const ModelSpec& spec,
                              const ModelParams& params, const Eigen::MatrixXd& z_smooth);

FitResult em_fit(const ObservationPanel& panel, const ModelSpec& spec,
                 const EmOptions& options = {});

}  // namespace hdgm
