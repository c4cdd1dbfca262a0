#include <doctest.h>

#include <cmath>
#include <random>

#include "hdgm/predict.hpp"
#include "support/fixtures.hpp"
#include "support/random_instance.hpp"

using namespace hdgm;

TEST_SUITE_BEGIN("predict");

TEST_CASE("kriging interpolates exactly at fitted stations") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> norm(0.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 4 + static_cast<int>(rng() % 4);
    const SiteSet fitted = testsupport::random_sites(n, rng);
    Eigen::MatrixXd z(n, 5);
    for (int t = 0; t < 5; ++t)
      for (int i = 0; i < n; ++i) z(i, t) = norm(rng);

    SiteSet at;
    at.sites = {fitted.sites[1], fitted.sites[n - 1]};
    const Eigen::MatrixXd zh = krige_latent(z, fitted, at, {KernelFamily::Exponential, 1.1});
    CHECK((zh.row(0) - z.row(1)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((zh.row(1) - z.row(n - 1)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("kriging shrinks to the zero process mean far away") {
  std::mt19937_64 rng(37);
  const SiteSet fitted = testsupport::random_sites(5, rng);
  Eigen::MatrixXd z = Eigen::MatrixXd::Constant(5, 3, 2.0);
  SiteSet far;
  far.sites = {{-60.0, -150.0}};
  const Eigen::MatrixXd zh = krige_latent(z, fitted, far, {KernelFamily::Exponential, 0.5});
  CHECK(zh.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("kriging weights match the explicit-inverse computation") {
  std::mt19937_64 rng(41);
  const SiteSet fitted = testsupport::random_sites(6, rng);
  const SiteSet news = testsupport::random_sites(4, rng);
  const CorrelationKernel kernel{KernelFamily::Exponential, 1.3};
  const Eigen::MatrixXd w = kriging_weights(fitted, news, kernel);

  Eigen::MatrixXd r = correlation_matrix(fitted, kernel);
  r.diagonal().array() += kCorrelationJitter;
  const Eigen::MatrixXd w_ref = cross_correlation(news, fitted, kernel) * r.inverse();
  CHECK((w - w_ref).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("predict_response with alpha = 0 is pure back-transformed regression") {
  testsupport::FittedModel m = testsupport::small_fitted_model(51, 6, 20, 25);
  m.fit.params.alpha = 0.0;
  const PredictionGrid grid = testsupport::grid_from_panel(m.sim.panel);
  const GridPrediction pred = predict_response(m.fit, grid);

  const Moments& mom = m.fit.params.moments;
  for (int t = 0; t < grid.T(); ++t) {
    const Eigen::MatrixXd x_std =
        apply_moments_design(grid.design_block(m.fit.spec, t), m.fit.spec, mom);
    for (int i = 0; i < grid.m(); ++i) {
      const double expect =
          x_std.row(i).dot(m.fit.params.beta) * mom.response_std + mom.response_mean;
      CHECK(pred.y_hat(i, t) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("prediction at the stations reproduces the in-sample fitted values") {
  const testsupport::FittedModel m = testsupport::small_fitted_model(52, 7, 25, 30);
  const PredictionGrid grid = testsupport::grid_from_panel(m.sim.panel);
  const GridPrediction pred = predict_response(m.fit, grid);
  const Eigen::MatrixXd fitted =
      in_sample_fit(m.sim.panel, m.fit.spec, m.fit.params, m.fit.z_smooth);
  CHECK((pred.y_hat - fitted).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("grid dates outside the fitted period are rejected") {
  const testsupport::FittedModel m = testsupport::small_fitted_model(53, 5, 10, 10);
  PredictionGrid grid = testsupport::grid_from_panel(m.sim.panel);
  grid.dates[0] = grid.dates[0] + (-400);
  std::sort(grid.dates.begin(), grid.dates.end());
  CHECK_THROWS_AS(predict_response(m.fit, grid), InputError);
}

TEST_CASE("missing grid covariates are skipped and counted") {
  const testsupport::FittedModel m = testsupport::small_fitted_model(54, 5, 10, 10);
  PredictionGrid grid = testsupport::grid_from_panel(m.sim.panel);
  grid.raw[3]["x1"](2) = std::nan("");
  const GridPrediction pred = predict_response(m.fit, grid);
  CHECK(pred.skipped == 1);
  CHECK(std::isnan(pred.y_hat(2, 3)));
  CHECK(std::isfinite(pred.y_hat(1, 3)));
}

TEST_CASE("grid missing a model column is a schema error") {
  const testsupport::FittedModel m = testsupport::small_fitted_model(55, 5, 10, 10);
  PredictionGrid grid = testsupport::grid_from_panel(m.sim.panel);
  for (auto& cols : grid.raw) cols.erase("x2");
  CHECK_THROWS_AS(predict_response(m.fit, grid), InputError);
}

TEST_SUITE_END();
