#include <doctest.h>

#include <cmath>

#include "hdgm/scenario.hpp"
#include "support/fixtures.hpp"

using namespace hdgm;

namespace {

ScenarioSpec basic_spec(double r, const std::string& target = "x1") {
  ScenarioSpec s;
  s.name = "test";
  s.target = target;
  s.r = r;
  s.aggregate_by = {"overall", "province", "season"};
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("scenario");

TEST_CASE("apply_reduction scales the target column in the masked window") {
  const testsupport::FittedModel m = testsupport::small_fitted_model(61, 5, 12, 10);
  const PredictionGrid grid = testsupport::grid_from_panel(m.sim.panel);

  SUBCASE("r = 0 leaves the grid identical") {
    const PredictionGrid out = apply_reduction(grid, m.fit.spec, basic_spec(0.0));
    for (int t = 0; t < grid.T(); ++t)
      CHECK((out.raw[t].at("x1") - grid.raw[t].at("x1")).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("r = 1 zeroes the target") {
    const PredictionGrid out = apply_reduction(grid, m.fit.spec, basic_spec(1.0));
    for (int t = 0; t < grid.T(); ++t) CHECK(out.raw[t].at("x1").cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("r = 0.26 multiplies by 0.74") {
    PredictionGrid g2 = grid;
    g2.raw[0].at("x1")(0) = 10.0;
    const PredictionGrid out = apply_reduction(g2, m.fit.spec, basic_spec(0.26));
    CHECK(out.raw[0].at("x1")(0) == doctest::Approx(7.4).epsilon(1e-15));
    // other columns untouched
    CHECK((out.raw[0].at("x2") - g2.raw[0].at("x2")).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("unknown target is a schema error") {
    CHECK_THROWS_AS(apply_reduction(grid, m.fit.spec, basic_spec(0.2, "nope")), InputError);
  }

  SUBCASE("reduction factor outside [0, 1] is rejected") {
    CHECK_THROWS_AS(apply_reduction(grid, m.fit.spec, basic_spec(1.5)), InputError);
  }
}

TEST_CASE("daily_delta") {
  const testsupport::FittedModel m = testsupport::small_fitted_model(62, 6, 15, 25);
  const PredictionGrid grid = testsupport::grid_from_panel(m.sim.panel);

  SUBCASE("r = 0 gives exactly zero everywhere") {
    const Eigen::MatrixXd d = daily_delta(m.fit, grid, basic_spec(0.0));
    CHECK(d.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("equals the difference of two predictions") {
    const ScenarioSpec spec = basic_spec(0.26);
    const Eigen::MatrixXd d = daily_delta(m.fit, grid, spec);
    const GridPrediction base = predict_response(m.fit, grid);
    const GridPrediction reduced =
        predict_response(m.fit, apply_reduction(grid, m.fit.spec, spec));
    CHECK((d - (base.y_hat - reduced.y_hat)).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("linear in r at every pixel-day with nonzero target") {
    const Eigen::MatrixXd d26 = daily_delta(m.fit, grid, basic_spec(0.26));
    const Eigen::MatrixXd d50 = daily_delta(m.fit, grid, basic_spec(0.50));
    for (int t = 0; t < grid.T(); ++t)
      for (int i = 0; i < grid.m(); ++i) {
        if (d26(i, t) == 0.0) continue;
        CHECK(d50(i, t) / d26(i, t) == doctest::Approx(50.0 / 26.0).epsilon(1e-10));
      }
  }

  SUBCASE("monotone in r") {
    const Eigen::MatrixXd d2 = daily_delta(m.fit, grid, basic_spec(0.2));
    const Eigen::MatrixXd d7 = daily_delta(m.fit, grid, basic_spec(0.7));
    for (int t = 0; t < grid.T(); ++t)
      for (int i = 0; i < grid.m(); ++i)
        CHECK(std::abs(d7(i, t)) >= std::abs(d2(i, t)) - 1e-12);
  }

  SUBCASE("single-covariate hand calculation") {
    // beta = 1 in standardized space, delta_x_std = 0.5
    FitResult fit = m.fit;
    fit.params.beta.setZero();
    const int j = fit.spec.column_index("x1");
    fit.params.beta(j) = 1.0;
    PredictionGrid g2 = grid;
    const double r = 0.5;
    const double x_needed = fit.params.moments.std(j);  // r * x / std = 0.5
    g2.raw[0].at("x1").setConstant(x_needed);
    const Eigen::MatrixXd d = daily_delta(fit, g2, basic_spec(r));
    for (int i = 0; i < grid.m(); ++i)
      CHECK(d(i, 0) ==
            doctest::Approx(0.5 * fit.params.moments.response_std).epsilon(1e-12));
  }
}

TEST_CASE("aggregate") {
  const testsupport::FittedModel m = testsupport::small_fitted_model(63, 6, 20, 25);
  const PredictionGrid grid = testsupport::grid_from_panel(m.sim.panel);

  SUBCASE("group means equal the arithmetic mean of the stored deltas") {
    const ScenarioSpec spec = basic_spec(0.3);
    const ScenarioResult res = run_scenario(m.fit, grid, spec);
    for (const GroupSummary& g : res.groups) {
      if (g.key != "overall") continue;
      double sum = 0.0;
      long cnt = 0;
      for (int i : res.pixels)
        for (int t = 0; t < grid.T(); ++t) {
          if (!std::isfinite(res.change(i, t))) continue;
          sum += res.change(i, t);
          ++cnt;
        }
      CHECK(g.n_cells == cnt);
      CHECK(g.delta_mean == doctest::Approx(sum / cnt).epsilon(1e-12));
    }
  }

  SUBCASE("one pixel, one day variance closed form") {
    ScenarioSpec spec = basic_spec(0.4);
    spec.window.from = grid.dates[3];
    spec.window.to = grid.dates[3];
    spec.mask.provinces = {"AA"};
    ScenarioSpec one = spec;
    one.aggregate_by = {"overall"};

    // restrict to a single pixel via altitude
    one.mask.max_altitude = grid.altitude[0] + 1.0;
    const ScenarioResult res = run_scenario(m.fit, grid, one);
    REQUIRE(res.groups.size() == 1);
    const GroupSummary& g = res.groups[0];
    REQUIRE(g.n_pixels == 1);
    REQUIRE(g.n_days == 1);

    const int j = m.fit.spec.column_index("x1");
    const double x = grid.raw[3].at("x1")(0);
    Eigen::VectorXd dx = Eigen::VectorXd::Zero(m.fit.spec.p());
    dx(j) = one.r * x / m.fit.params.moments.std(j);
    const int t_fit = 3;
    const double var_std = dx.dot(m.fit.report.sigma_beta * dx) +
                           2.0 * m.fit.params.sigma2(t_fit);
    CHECK(g.delta_std ==
          doctest::Approx(m.fit.params.moments.response_std * std::sqrt(var_std))
              .epsilon(1e-10));
    CHECK(g.delta_std > 0.0);
  }

  SUBCASE("r = 0 keeps deltas at zero but uncertainty positive") {
    const ScenarioResult res = run_scenario(m.fit, grid, basic_spec(0.0));
    for (const GroupSummary& g : res.groups) {
      CHECK(g.delta_mean == 0.0);
      CHECK(g.delta_std > 0.0);
    }
  }

  SUBCASE("province groups partition the masked pixels") {
    const ScenarioResult res = run_scenario(m.fit, grid, basic_spec(0.3));
    long total = 0;
    for (const GroupSummary& g : res.groups)
      if (g.key == "province") total += g.n_pixels;
    CHECK(total == static_cast<long>(res.pixels.size()));
  }

  SUBCASE("empty mask errors") {
    ScenarioSpec spec = basic_spec(0.3);
    spec.mask.provinces = {"ZZ"};
    CHECK_THROWS_AS(run_scenario(m.fit, grid, spec), InputError);
  }

  SUBCASE("empty window errors") {
    ScenarioSpec spec = basic_spec(0.3);
    spec.window.from = Date::from_ymd(1999, 1, 1);
    spec.window.to = Date::from_ymd(1999, 1, 2);
    CHECK_THROWS_AS(run_scenario(m.fit, grid, spec), InputError);
  }

  SUBCASE("pixel map covers the masked pixels") {
    ScenarioSpec spec = basic_spec(0.3);
    spec.mask.exclude_forest = true;
    const ScenarioResult res = run_scenario(m.fit, grid, spec);
    CHECK(res.pixel_map.size() == res.pixels.size());
    for (int i : res.pixels) CHECK(grid.forest[i] == 0);
  }
}

TEST_CASE("interaction columns flow through the reduction") {
  // hand-built fit: x1 interacts with Season, so the delta picks up the
  // season-specific coefficient on top of the base one
  FitResult fit;
  fit.spec = ModelSpec::build("y", {"x1", "x2"}, {}, {"x1"}, KernelFamily::Exponential,
                              std::nullopt);
  const int p = fit.spec.p();  // intercept, x1, x2, x1:Winter, x1:Summer, x1:Spring
  fit.params.beta.resize(p);
  fit.params.beta << 0.1, 0.8, -0.3, 0.4, -0.2, 0.1;
  fit.params.alpha = 0.5;
  fit.params.g = 0.6;
  fit.params.theta = 1.0;
  fit.params.moments.mean = Eigen::VectorXd::Zero(p);
  fit.params.moments.std = Eigen::VectorXd::Ones(p);
  fit.params.moments.mean(1) = 2.0;
  fit.params.moments.std(1) = 1.5;
  fit.params.moments.std(3) = 0.7;  // x1:Winter has its own moments
  fit.params.moments.response_mean = 10.0;
  fit.params.moments.response_std = 4.0;

  // one winter day and one summer day
  fit.sites.sites = {{45.0, 9.0}, {45.5, 9.5}};
  fit.station_ids = {"p1", "p2"};
  fit.dates = {Date::from_ymd(2020, 1, 15), Date::from_ymd(2020, 7, 15)};
  {
    // contiguity is irrelevant here, but predict needs matching dates
    std::vector<Date> d;
    d.push_back(Date::from_ymd(2020, 1, 15));
    d.push_back(Date::from_ymd(2020, 7, 15));
    fit.dates = d;
  }
  fit.params.sigma2 = Eigen::VectorXd::Ones(2);
  fit.params.mu0 = Eigen::VectorXd::Zero(2);
  fit.params.sigma0 = Eigen::MatrixXd::Identity(2, 2);
  fit.report.sigma_beta = Eigen::MatrixXd::Identity(p, p) * 0.01;
  fit.z_smooth = Eigen::MatrixXd::Zero(2, 2);

  PredictionGrid grid;
  grid.pixel_ids = {"p1", "p2"};
  grid.sites = fit.sites;
  grid.dates = fit.dates;
  grid.raw.resize(2);
  for (int t = 0; t < 2; ++t) {
    grid.raw[t]["x1"] = Eigen::VectorXd::Constant(2, 3.0);
    grid.raw[t]["x2"] = Eigen::VectorXd::Constant(2, 1.0);
  }

  ScenarioSpec spec;
  spec.name = "s";
  spec.target = "x1";
  spec.r = 0.4;

  const Eigen::MatrixXd delta = daily_delta(fit, grid, spec);
  // winter day: base + x1:Winter; summer day: base + x1:Summer
  const double base = 0.8 * 0.4 * 3.0 / 1.5;
  const double winter = base + 0.4 * 0.4 * 3.0 / 0.7;
  const double summer = base + (-0.2) * 0.4 * 3.0 / 1.0;
  CHECK(delta(0, 0) == doctest::Approx(winter * 4.0).epsilon(1e-12));
  CHECK(delta(0, 1) == doctest::Approx(summer * 4.0).epsilon(1e-12));

  // and the two-prediction oracle still agrees
  const GridPrediction b = predict_response(fit, grid);
  const GridPrediction r = predict_response(fit, apply_reduction(grid, fit.spec, spec));
  CHECK((delta - (b.y_hat - r.y_hat)).cwiseAbs().maxCoeff() < 1e-10);

  // linearity in r with interactions in play
  ScenarioSpec spec2 = spec;
  spec2.r = 0.8;
  const Eigen::MatrixXd delta2 = daily_delta(fit, grid, spec2);
  for (int t = 0; t < 2; ++t)
    for (int i = 0; i < 2; ++i)
      CHECK(delta2(i, t) / delta(i, t) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("window filters") {
  ScenarioWindow w;
  w.season = Season::Winter;
  CHECK(w.contains(Date::from_ymd(2020, 1, 15)));
  CHECK(w.contains(Date::from_ymd(2020, 12, 1)));
  CHECK(!w.contains(Date::from_ymd(2020, 7, 1)));
  w.from = Date::from_ymd(2020, 1, 10);
  CHECK(!w.contains(Date::from_ymd(2020, 1, 5)));
}

TEST_SUITE_END();
