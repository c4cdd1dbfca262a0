#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hdgm/emfit.hpp"
#include "hdgm/panel.hpp"

namespace hdgm {

// Site layout: either uniform draws in a lat/lon box or an explicit list.
struct SiteBox {
  int count = 10;
  double lat_min = 45.0, lat_max = 46.0;
  double lon_min = 9.0, lon_max = 10.0;
};

struct SkedasticConstant {
  double value = 1.0;
};
struct SkedasticSinusoidal {
  double base = 1.0;
  double amplitude = 0.5;
  double period = 365.0;  // days
};
struct SkedasticExplicit {
  Eigen::VectorXd values;
};
using SkedasticProfile =
    std::variant<SkedasticConstant, SkedasticSinusoidal, SkedasticExplicit>;

struct MissingNone {};
struct MissingUniform {
  double rate = 0.1;
};
struct MissingBlocks {
  int length = 10;  // one contiguous gap of this length per station
};
using MissingMechanism = std::variant<MissingNone, MissingUniform, MissingBlocks>;

struct SimSpec {
  std::variant<SiteBox, SiteSet> sites = SiteBox{};
  int T = 100;
  Date start_date = Date::from_ymd(2016, 1, 1);
  Eigen::VectorXd beta;   // p entries; beta(0) multiplies the intercept
  double alpha = 0.6;
  double g = 0.8;
  double theta = 1.5;     // degrees of arc
  SkedasticProfile sigma2 = SkedasticConstant{};
  MissingMechanism missing = MissingNone{};
  bool stationary_init = true;  // z_0 ~ N(0, R); otherwise N(mu0, sigma0)
  Eigen::VectorXd mu0;          // used when stationary_init is false
  Eigen::MatrixXd sigma0;
  unsigned seed = 42;
  std::vector<std::string> covariate_names;  // optional, p-1 names

  void validate() const;
};

struct SimOutput {
  ObservationPanel panel;     // covariates x1..x_{p-1} plus response "y"
  ModelSpec spec;             // matching model spec (intercept + continuous)
  Eigen::MatrixXd latent;     // n x T latent path
  Eigen::VectorXd sigma2;     // realized variance profile
};

Eigen::VectorXd skedastic_values(const SkedasticProfile& profile, int T);

// Forward-samples the model exactly: z_0, the latent chain with innovation
// covariance (1-g^2) R(theta), and y_t = X_t beta + alpha z_t + eps_t.
SimOutput simulate(const SimSpec& spec);

}  // namespace hdgm
