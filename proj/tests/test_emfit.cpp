#include <doctest.h>

#include <cmath>
#include <random>

#include "hdgm/emfit.hpp"
#include "hdgm/sim.hpp"
#include "support/optim.hpp"
#include "support/random_instance.hpp"

using namespace hdgm;

namespace {

ObservationPanel tiny_panel(int n, int T, unsigned seed, double missing = 0.0,
                            double alpha = 0.6) {
  SimSpec spec;
  SiteBox box;
  box.count = n;
  spec.sites = box;
  spec.T = T;
  spec.beta = Eigen::Vector3d(0.5, 1.0, -0.7);
  spec.alpha = alpha;
  spec.g = 0.7;
  spec.theta = 1.0;
  spec.seed = seed;
  if (missing > 0.0) spec.missing = MissingUniform{missing};
  return simulate(spec).panel;
}

ModelSpec tiny_spec() {
  return ModelSpec::build("y", {"x1", "x2"}, {}, {}, KernelFamily::Exponential, std::nullopt);
}

}  // namespace

TEST_SUITE_BEGIN("emfit");

TEST_CASE("standardize maps moments and passes binary columns through") {
  ObservationPanel panel;
  panel.station_ids = {"a", "b"};
  panel.sites.sites = {{45.0, 9.0}, {45.5, 9.5}};
  panel.dates = {Date::from_ymd(2020, 1, 1), Date::from_ymd(2020, 1, 2)};
  panel.column_names = {"(Intercept)", "xc", "urban"};
  panel.y.resize(2, 2);
  panel.y << 1.0, 2.0, 3.0, 4.0;
  panel.x.assign(2, Eigen::MatrixXd(2, 3));
  // xc has mean 10, population std 2 over {8, 12, 8, 12}; value 14 maps to 2
  panel.x[0] << 1, 8, 0, 1, 12, 1;
  panel.x[1] << 1, 8, 1, 1, 12, 0;

  ModelSpec spec = ModelSpec::build("y", {"xc"}, {"urban"}, {}, KernelFamily::Exponential,
                                    std::nullopt);
  const StandardizedPanel std_panel = standardize(panel, spec);
  CHECK(std_panel.moments.mean(1) == doctest::Approx(10.0));
  CHECK(std_panel.moments.std(1) == doctest::Approx(2.0));
  CHECK((14.0 - std_panel.moments.mean(1)) / std_panel.moments.std(1) == doctest::Approx(2.0));
  // binary and intercept untouched
  CHECK(std_panel.x[0](0, 2) == 0.0);
  CHECK(std_panel.x[0](1, 2) == 1.0);
  CHECK(std_panel.x[0](0, 0) == 1.0);
  // response round trip
  const Eigen::MatrixXd back = destandardize_response(std_panel.y, std_panel.moments);
  CHECK((back - panel.y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("standardize rejects zero-variance continuous columns") {
  ObservationPanel panel;
  panel.station_ids = {"a", "b"};
  panel.sites.sites = {{45.0, 9.0}, {45.5, 9.5}};
  panel.dates = {Date::from_ymd(2020, 1, 1)};
  panel.column_names = {"(Intercept)", "flat"};
  panel.y = Eigen::MatrixXd::Constant(2, 1, 1.0);
  panel.y(1, 0) = 2.0;
  panel.x.assign(1, Eigen::MatrixXd(2, 2));
  panel.x[0] << 1, 7, 1, 7;
  ModelSpec spec =
      ModelSpec::build("y", {"flat"}, {}, {}, KernelFamily::Exponential, std::nullopt);
  CHECK_THROWS_WITH_AS(standardize(panel, spec), doctest::Contains("flat"), InputError);
}

TEST_CASE("theta_update recovers the range of exact moments and matches grid search") {
  SiteSet sites;
  sites.sites = {{45.0, 9.0}, {45.0, 10.5}};
  const double theta_true = 0.9;
  const double g = 0.6;
  const Eigen::MatrixXd r_true =
      correlation_matrix(sites, {KernelFamily::Exponential, theta_true});

  // S11 = S00 = T * R(theta*), S10 = g S00: C = (1 - g^2) T R(theta*)
  const double T = 50.0;
  const Eigen::MatrixXd s00 = T * r_true;
  const Eigen::MatrixXd s10 = g * s00;
  const Eigen::MatrixXd s11 = s00;

  const double theta_hat = theta_update(s11, s10, s00, g, sites, KernelFamily::Exponential);

  const Eigen::MatrixXd dist = distance_matrix(sites);
  const Eigen::MatrixXd c = s11 - g * (s10 + s10.transpose()) + g * g * s00;
  const double lo = std::log(dist(0, 1) / 100.0), hi = std::log(10.0 * dist(0, 1));
  const double theta_grid = std::exp(testopt::grid_min(
      [&](double lt) { return -theta_objective(dist, std::exp(lt), c); }, lo, hi, 20001));

  CHECK(std::abs(theta_hat - theta_grid) / theta_grid < 1e-3);
  CHECK(theta_hat == doctest::Approx(theta_true).epsilon(1e-3));
}

TEST_CASE("theta_update local optimality and scale invariance") {
  std::mt19937_64 rng(23);
  const SiteSet sites = testsupport::random_sites(5, rng);
  const Eigen::MatrixXd dist = distance_matrix(sites);

  Eigen::MatrixXd a(5, 5);
  std::normal_distribution<double> norm(0.0, 1.0);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) a(i, j) = norm(rng);
  const Eigen::MatrixXd s00 =
      30.0 * correlation_matrix(sites, {KernelFamily::Exponential, 1.4}) +
      a * a.transpose() * 0.05;
  const double g = 0.5;
  const Eigen::MatrixXd s10 = g * s00;
  const Eigen::MatrixXd s11 = s00;

  const double theta_hat = theta_update(s11, s10, s00, g, sites, KernelFamily::Exponential);
  const Eigen::MatrixXd c = s11 - g * (s10 + s10.transpose()) + g * g * s00;
  CHECK(theta_objective(dist, theta_hat, c) >= theta_objective(dist, 0.5 * theta_hat, c));
  CHECK(theta_objective(dist, theta_hat, c) >= theta_objective(dist, 2.0 * theta_hat, c));

  // scaling the moments by a positive constant leaves the argmax unchanged
  const double theta_scaled =
      theta_update(7.3 * s11, 7.3 * s10, 7.3 * s00, g, sites, KernelFamily::Exponential);
  CHECK(theta_scaled == doctest::Approx(theta_hat).epsilon(1e-6));
  const double theta_grid_scaled = std::exp(testopt::grid_min(
      [&](double lt) { return -theta_objective(dist, std::exp(lt), 7.3 * c); },
      std::log(theta_hat / 4), std::log(theta_hat * 4), 20001));
  CHECK(std::abs(theta_scaled - theta_grid_scaled) / theta_grid_scaled < 1e-3);
}

TEST_CASE("theta_update rejects coincident sites") {
  SiteSet sites;
  sites.sites = {{45.0, 9.0}, {45.0, 9.0}};
  const Eigen::MatrixXd s = Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(theta_update(s, s, s, 0.5, sites, KernelFamily::Exponential), InputError);
}

TEST_CASE("M-step closed forms match numerical maximization of their objectives") {
  // frozen E-step on a random instance
  const ObservationPanel panel = tiny_panel(4, 6, 101, 0.2);
  const ModelSpec spec = tiny_spec();
  const StandardizedPanel sp = standardize(panel, spec);
  const BoolMask mask = panel.complete_mask();
  const Eigen::MatrixXd dist = distance_matrix(panel.sites);
  const int n = 4, T = 6, p = 3;

  ModelParams params;
  params.beta = Eigen::Vector3d(0.1, 0.8, -0.5);
  params.alpha = 0.4;
  params.g = 0.6;
  params.theta = 1.2;
  params.sigma2 = Eigen::VectorXd::LinSpaced(T, 0.6, 1.4);
  params.mu0 = Eigen::VectorXd::Zero(n);
  params.sigma0 = Eigen::MatrixXd::Identity(n, n);

  StateSpaceInputs in;
  in.y = sp.y;
  in.offset.resize(n, T);
  for (int t = 0; t < T; ++t) in.offset.col(t) = sp.x[t] * params.beta;
  in.alpha = params.alpha;
  in.g = params.g;
  in.sigma_eta = innovation_covariance(dist, params.theta, params.g, spec.kernel);
  in.sigma2 = params.sigma2;
  in.mu0 = params.mu0;
  in.sigma0 = params.sigma0;
  in.mask = mask;
  const SmootherOutput sm = kalman_smooth(in);

  SUBCASE("sigma2 per-time closed form") {
    const Eigen::VectorXd s2 = sigma2_update(sp.y, sp.x, mask, params.beta, params.alpha,
                                             sm.z_smooth, sm.p_smooth, params.sigma2, 1e-8);
    for (int t = 0; t < T; ++t) {
      double trace = 0.0;
      int n_t = 0;
      for (int i = 0; i < n; ++i) {
        if (!mask(i, t)) continue;
        const double e =
            sp.y(i, t) - sp.x[t].row(i).dot(params.beta) - params.alpha * sm.z_smooth[t](i);
        trace += e * e + params.alpha * params.alpha * sm.p_smooth[t](i, i);
        ++n_t;
      }
      if (n_t == 0) continue;
      const double numeric = testopt::golden_min(
          [&](double s) { return n_t * std::log(s) + trace / s; }, 1e-4, 20.0, 1e-12);
      CHECK(s2(t) == doctest::Approx(numeric).epsilon(1e-4));
    }
  }

  SUBCASE("beta closed form") {
    const Eigen::VectorXd s2 = sigma2_update(sp.y, sp.x, mask, params.beta, params.alpha,
                                             sm.z_smooth, sm.p_smooth, params.sigma2, 1e-8);
    const Eigen::VectorXd beta_hat =
        beta_update(sp.y, sp.x, mask, s2, params.alpha, sm.z_smooth,
                    {"(Intercept)", "x1", "x2"});
    const auto q_beta = [&](const Eigen::VectorXd& b) {
      double q = 0.0;
      for (int t = 0; t < T; ++t)
        for (int i = 0; i < n; ++i) {
          if (!mask(i, t)) continue;
          const double e =
              sp.y(i, t) - sp.x[t].row(i).dot(b) - params.alpha * sm.z_smooth[t](i);
          q += e * e / s2(t);
        }
      return q;
    };
    const Eigen::VectorXd numeric =
        testopt::nelder_mead(q_beta, Eigen::VectorXd::Zero(p), 0.5);
    CHECK((beta_hat - numeric).cwiseAbs().maxCoeff() < 1e-4);
  }

  SUBCASE("alpha closed form") {
    const double a_hat = alpha_update(sp.y, sp.x, mask, params.sigma2, params.beta,
                                      sm.z_smooth, sm.p_smooth);
    const auto q_alpha = [&](double a) {
      double q = 0.0;
      for (int t = 0; t < T; ++t)
        for (int i = 0; i < n; ++i) {
          if (!mask(i, t)) continue;
          const double e = sp.y(i, t) - sp.x[t].row(i).dot(params.beta) - a * sm.z_smooth[t](i);
          q += (e * e + a * a * sm.p_smooth[t](i, i)) / params.sigma2(t);
        }
      return q;
    };
    const double numeric = testopt::golden_min(q_alpha, -3.0, 3.0, 1e-12);
    CHECK(a_hat == doctest::Approx(numeric).epsilon(1e-4));
  }

  SUBCASE("g closed form maximizes the trace least-squares objective") {
    const double g_hat = transition_update(sm.s10, sm.s00);
    const auto q_g = [&](double g) {
      return sm.s11.trace() - 2.0 * g * sm.s10.trace() + g * g * sm.s00.trace();
    };
    const double numeric = testopt::golden_min(q_g, -0.999, 0.999, 1e-13);
    CHECK(g_hat == doctest::Approx(numeric).epsilon(1e-4));
  }
}

TEST_CASE("em_fit on synthetic data: monotone, convergent, sane report") {
  const ObservationPanel panel = tiny_panel(6, 40, 202, 0.1);
  EmOptions opt;
  opt.max_iter = 150;
  opt.tol = 1e-6;
  const FitResult fit = em_fit(panel, tiny_spec(), opt);

  REQUIRE(fit.report.loglik_trace.size() >= 2);
  for (std::size_t k = 1; k < fit.report.loglik_trace.size(); ++k)
    CHECK(fit.report.loglik_trace[k] >= fit.report.loglik_trace[k - 1] - 1e-8);
  CHECK(fit.report.rmse_insample > 0.0);
  CHECK(fit.params.theta > 0.0);
  CHECK(fit.params.sigma2.minCoeff() >= 1e-8);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fit.report.sigma_beta);
  CHECK(es.eigenvalues().minCoeff() > -1e-12);
  CHECK(fit.z_smooth.cols() == 40);
}

TEST_CASE("alpha shrinks toward zero on a pure-regression generator") {
  // the spurious latent absorbs the cross-station common noise (~1/sqrt(n)),
  // so the panel must be large enough for |alpha| < 0.1 to be meaningful
  SimSpec spec;
  SiteBox box;
  box.count = 20;
  spec.sites = box;
  spec.T = 250;
  spec.beta = Eigen::Vector3d(0.3, 1.0, -0.6);
  spec.alpha = 0.0;  // no latent field in the generator
  spec.g = 0.5;
  spec.theta = 1.0;
  spec.seed = 303;
  const SimOutput sim = simulate(spec);

  EmOptions opt;
  opt.max_iter = 250;
  opt.tol = 1e-8;
  const FitResult fit = em_fit(sim.panel, sim.spec, opt);
  CHECK(std::abs(fit.params.alpha) < 0.1);

  // beta matches plain least squares on the standardized panel
  const StandardizedPanel sp = standardize(sim.panel, sim.spec);
  long rows = 0;
  for (int t = 0; t < sp.y.cols(); ++t)
    for (int i = 0; i < sp.y.rows(); ++i)
      if (std::isfinite(sp.y(i, t))) ++rows;
  Eigen::MatrixXd xx(rows, 3);
  Eigen::VectorXd yy(rows);
  long r = 0;
  for (int t = 0; t < sp.y.cols(); ++t)
    for (int i = 0; i < sp.y.rows(); ++i) {
      if (!std::isfinite(sp.y(i, t))) continue;
      xx.row(r) = sp.x[t].row(i);
      yy(r) = sp.y(i, t);
      ++r;
    }
  const Eigen::VectorXd ols = (xx.transpose() * xx).ldlt().solve(xx.transpose() * yy);
  CHECK((fit.params.beta - ols).cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("permutation invariance of the fitted parameters") {
  // every EM update is permutation-equivariant; a short run keeps the
  // floating-point reordering noise far below the 1e-8 bar
  const ObservationPanel panel = tiny_panel(5, 30, 404);
  EmOptions opt;
  opt.max_iter = 20;
  opt.tol = 1e-10;
  const FitResult fit = em_fit(panel, tiny_spec(), opt);

  const std::vector<int> perm = {3, 1, 4, 0, 2};
  ObservationPanel permuted = panel;
  for (int i = 0; i < 5; ++i) {
    permuted.station_ids[i] = panel.station_ids[perm[i]];
    permuted.sites.sites[i] = panel.sites.sites[perm[i]];
    permuted.sites.labels[i] = panel.sites.labels[perm[i]];
    permuted.y.row(i) = panel.y.row(perm[i]);
    for (int t = 0; t < 30; ++t) permuted.x[t].row(i) = panel.x[t].row(perm[i]);
  }
  const FitResult pfit = em_fit(permuted, tiny_spec(), opt);

  CHECK((fit.params.beta - pfit.params.beta).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(pfit.params.alpha == doctest::Approx(fit.params.alpha).epsilon(1e-8));
  CHECK(pfit.params.g == doctest::Approx(fit.params.g).epsilon(1e-8));
  CHECK(pfit.params.theta == doctest::Approx(fit.params.theta).epsilon(1e-6));
  CHECK((fit.params.sigma2 - pfit.params.sigma2).cwiseAbs().maxCoeff() < 1e-8);
  for (int i = 0; i < 5; ++i)
    CHECK(pfit.params.mu0(i) == doctest::Approx(fit.params.mu0(perm[i])).epsilon(1e-7));
}

TEST_CASE("beta_covariance") {
  SUBCASE("orthonormal design with unit variance gives the identity") {
    ObservationPanel panel;
    panel.station_ids = {"a", "b"};
    panel.sites.sites = {{45.0, 9.0}, {45.5, 9.5}};
    panel.dates = {Date::from_ymd(2020, 1, 1)};
    panel.column_names = {"(Intercept)", "u"};
    panel.y.resize(2, 1);
    panel.y << 0.5, -0.5;
    panel.x.assign(1, Eigen::MatrixXd(2, 2));
    const double s = 1.0 / std::sqrt(2.0);
    panel.x[0] << s, s, s, -s;  // orthonormal columns

    ModelSpec spec;
    spec.response = "y";
    spec.columns = {{"(Intercept)", Column::Kind::Intercept, "", Season::Winter},
                    {"u", Column::Kind::Binary, "", Season::Winter}};
    ModelParams params;
    params.sigma2 = Eigen::VectorXd::Ones(1);
    params.moments.mean = Eigen::VectorXd::Zero(2);
    params.moments.std = Eigen::VectorXd::Ones(2);
    const Eigen::MatrixXd cov = beta_covariance(panel, spec, params);
    CHECK((cov - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("duplicated covariate column raises") {
    ObservationPanel panel = tiny_panel(4, 5, 505);
    for (int t = 0; t < 5; ++t) panel.x[t].col(2) = panel.x[t].col(1);
    ModelParams params;
    params.sigma2 = Eigen::VectorXd::Ones(5);
    params.moments.mean = Eigen::VectorXd::Zero(3);
    params.moments.std = Eigen::VectorXd::Ones(3);
    ModelSpec spec;
    spec.response = "y";
    spec.columns = {{"(Intercept)", Column::Kind::Intercept, "", Season::Winter},
                    {"x1", Column::Kind::Binary, "", Season::Winter},
                    {"x2", Column::Kind::Binary, "", Season::Winter}};
    CHECK_THROWS_AS(beta_covariance(panel, spec, params), NumericalError);
  }

  SUBCASE("random design matches the brute-force assembly") {
    const ObservationPanel panel = tiny_panel(4, 6, 606, 0.15);
    const ModelSpec spec = tiny_spec();
    const StandardizedPanel sp = standardize(panel, spec);
    ModelParams params;
    params.sigma2 = Eigen::VectorXd::LinSpaced(6, 0.5, 2.0);
    params.moments = sp.moments;

    const Eigen::MatrixXd cov = beta_covariance(panel, spec, params);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(3, 3);
    for (int t = 0; t < 6; ++t)
      for (int i = 0; i < 4; ++i) {
        if (!panel.cell_complete(i, t)) continue;
        gram += sp.x[t].row(i).transpose() * sp.x[t].row(i) / params.sigma2(t);
      }
    CHECK((cov.inverse() - gram).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("sigma2 carries over on days with no observations") {
  const ObservationPanel panel = tiny_panel(4, 6, 808);
  const ModelSpec spec = tiny_spec();
  const StandardizedPanel sp = standardize(panel, spec);
  BoolMask mask = panel.complete_mask();
  mask.col(2).setConstant(false);  // day 2 fully unobserved

  std::vector<Eigen::VectorXd> z(6, Eigen::VectorXd::Zero(4));
  std::vector<Eigen::MatrixXd> pp(6, Eigen::MatrixXd::Identity(4, 4));
  const Eigen::VectorXd prev = Eigen::VectorXd::LinSpaced(6, 0.5, 1.5);
  const Eigen::VectorXd s2 = sigma2_update(sp.y, sp.x, mask, Eigen::VectorXd::Zero(3), 0.5, z,
                                           pp, prev, 1e-8);
  CHECK(s2(2) == prev(2));
  for (int t : {0, 1, 3, 4, 5}) CHECK(s2(t) != prev(t));
}

TEST_CASE("em_fit input validation") {
  const ObservationPanel panel = tiny_panel(4, 10, 707);
  ObservationPanel single = panel;
  single.station_ids = {panel.station_ids[0]};
  single.sites.sites = {panel.sites.sites[0]};
  single.sites.labels = {panel.sites.labels[0]};
  single.y = panel.y.topRows(1).eval();
  for (auto& xt : single.x) xt = xt.topRows(1).eval();
  CHECK_THROWS_AS(em_fit(single, tiny_spec(), {}), InputError);
}

TEST_SUITE_END();
