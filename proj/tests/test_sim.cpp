#include <doctest.h>

#include <cmath>
#include <variant>

#include "hdgm/sim.hpp"

using namespace hdgm;

TEST_SUITE_BEGIN("sim");

TEST_CASE("fixed seed reproduces the panel exactly") {
  SimSpec spec;
  SiteBox box;
  box.count = 6;
  spec.sites = box;
  spec.T = 20;
  spec.beta = Eigen::Vector2d(0.2, 1.0);
  spec.seed = 99;
  spec.missing = MissingUniform{0.2};
  const SimOutput a = simulate(spec);
  const SimOutput b = simulate(spec);
  for (int t = 0; t < 20; ++t)
    for (int i = 0; i < 6; ++i) {
      const bool both_nan = std::isnan(a.panel.y(i, t)) && std::isnan(b.panel.y(i, t));
      CHECK((both_nan || a.panel.y(i, t) == b.panel.y(i, t)));
      CHECK(a.panel.x[t](i, 1) == b.panel.x[t](i, 1));
    }
  CHECK((a.latent - b.latent).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("degenerate model produces iid standard normals") {
  SimSpec spec;
  SiteBox box;
  box.count = 20;
  spec.sites = box;
  spec.T = 500;
  spec.beta = Eigen::VectorXd::Zero(1);
  spec.alpha = 0.0;
  spec.seed = 7;
  const SimOutput out = simulate(spec);
  const double mean = out.panel.y.mean();
  const double var = (out.panel.y.array() - mean).square().mean();
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("latent chain has the requested autocorrelation") {
  SimSpec spec;
  SiteBox box;
  box.count = 1;
  spec.sites = box;
  spec.T = 5000;
  spec.beta = Eigen::VectorXd::Zero(1);
  spec.g = 0.9;
  spec.seed = 11;
  const SimOutput out = simulate(spec);
  const Eigen::VectorXd z = out.latent.row(0);
  const double mean = z.mean();
  double c0 = 0.0, c1 = 0.0;
  for (int t = 0; t < 5000; ++t) c0 += (z(t) - mean) * (z(t) - mean);
  for (int t = 0; t + 1 < 5000; ++t) c1 += (z(t) - mean) * (z(t + 1) - mean);
  CHECK(std::abs(c1 / c0 - 0.9) < 0.05);
  // stationary marginal variance stays at one under the (1-g^2) scaling
  CHECK(std::abs(c0 / 5000 - 1.0) < 0.1);
}

TEST_CASE("innovation spatial correlation follows the exponential kernel") {
  SiteSet sites;
  sites.sites = {{45.0, 9.0}, {45.0, 10.2}};
  SimSpec spec;
  spec.sites = sites;
  spec.T = 1000;
  spec.beta = Eigen::VectorXd::Zero(1);
  spec.g = 0.7;
  spec.theta = 1.5;
  spec.seed = 13;
  const SimOutput out = simulate(spec);

  // recover the innovations from consecutive latent states
  Eigen::MatrixXd eta(2, 999);
  for (int t = 1; t < 1000; ++t)
    eta.col(t - 1) = out.latent.col(t) - spec.g * out.latent.col(t - 1);
  const Eigen::VectorXd e0 = eta.row(0), e1 = eta.row(1);
  const double m0 = e0.mean(), m1 = e1.mean();
  const double c01 = ((e0.array() - m0) * (e1.array() - m1)).mean();
  const double v0 = (e0.array() - m0).square().mean();
  const double v1 = (e1.array() - m1).square().mean();
  const double corr = c01 / std::sqrt(v0 * v1);
  const double d = geodetic_distance(sites.sites[0], sites.sites[1]);
  CHECK(std::abs(corr - std::exp(-d / spec.theta)) < 0.1);
}

TEST_CASE("sinusoidal variance profile spans the requested band") {
  const Eigen::VectorXd s2 =
      skedastic_values(SkedasticSinusoidal{1.0, 0.5, 300.0}, 300);
  CHECK(s2.minCoeff() == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s2.maxCoeff() == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(s2(0) == doctest::Approx(1.0));
}

TEST_CASE("missing mechanisms") {
  SimSpec spec;
  SiteBox box;
  box.count = 10;
  spec.sites = box;
  spec.T = 200;
  spec.beta = Eigen::VectorXd::Zero(1);
  spec.seed = 17;

  SUBCASE("uniform rate") {
    spec.missing = MissingUniform{0.3};
    const SimOutput out = simulate(spec);
    long missing = 0;
    for (int t = 0; t < 200; ++t)
      for (int i = 0; i < 10; ++i)
        if (std::isnan(out.panel.y(i, t))) ++missing;
    CHECK(missing > 0.3 * 2000 - 120);
    CHECK(missing < 0.3 * 2000 + 120);
  }

  SUBCASE("per-station blocks") {
    spec.missing = MissingBlocks{25};
    const SimOutput out = simulate(spec);
    for (int i = 0; i < 10; ++i) {
      int missing = 0;
      for (int t = 0; t < 200; ++t)
        if (std::isnan(out.panel.y(i, t))) ++missing;
      CHECK(missing == 25);
    }
  }
}

TEST_CASE("spec validation") {
  SimSpec spec;
  spec.beta = Eigen::VectorXd::Zero(1);
  spec.g = 1.0;
  CHECK_THROWS_AS(simulate(spec), InputError);
  spec.g = 0.5;
  spec.sigma2 = SkedasticExplicit{Eigen::VectorXd::Ones(3)};
  spec.T = 5;
  CHECK_THROWS_AS(simulate(spec), InputError);
  spec.sigma2 = SkedasticConstant{-1.0};
  CHECK_THROWS_AS(simulate(spec), InputError);
}

TEST_SUITE_END();
