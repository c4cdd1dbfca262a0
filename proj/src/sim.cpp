#include "hdgm/sim.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace hdgm {

namespace {

SiteSet draw_sites(const std::variant<SiteBox, SiteSet>& layout, std::mt19937_64& rng) {
  if (std::holds_alternative<SiteSet>(layout)) {
    SiteSet s = std::get<SiteSet>(layout);
    s.validate();
    return s;
  }
  const SiteBox& box = std::get<SiteBox>(layout);
  if (box.count < 1) throw InputError("site box needs at least one site");
  std::uniform_real_distribution<double> ulat(box.lat_min, box.lat_max);
  std::uniform_real_distribution<double> ulon(box.lon_min, box.lon_max);
  SiteSet out;
  for (int i = 0; i < box.count; ++i) {
    const double lat = ulat(rng);
    const double lon = ulon(rng);
    out.sites.push_back({lat, lon});
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%03d", i + 1);
    out.labels.emplace_back(buf);
  }
  out.validate();
  return out;
}

}  // namespace

Eigen::VectorXd skedastic_values(const SkedasticProfile& profile, int T) {
  Eigen::VectorXd out(T);
  if (std::holds_alternative<SkedasticConstant>(profile)) {
    out.setConstant(std::get<SkedasticConstant>(profile).value);
  } else if (std::holds_alternative<SkedasticSinusoidal>(profile)) {
    const auto& s = std::get<SkedasticSinusoidal>(profile);
    for (int t = 0; t < T; ++t)
      out(t) = s.base + s.amplitude * std::sin(2.0 * std::numbers::pi * t / s.period);
  } else {
    out = std::get<SkedasticExplicit>(profile).values;
    if (out.size() != T) throw InputError("explicit variance profile length does not match T");
  }
  for (int t = 0; t < T; ++t)
    if (!(out(t) > 0.0)) throw InputError("variance profile must be positive everywhere");
  return out;
}

void SimSpec::validate() const {
  if (T < 1) throw InputError("simulation needs T >= 1");
  if (beta.size() < 1) throw InputError("simulation needs at least the intercept coefficient");
  if (!(theta > 0.0)) throw InputError("simulation theta must be positive");
  if (std::abs(g) >= 1.0) throw InputError("simulation requires |g| < 1");
}

SimOutput simulate(const SimSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> stdnorm(0.0, 1.0);

  const SiteSet sites = draw_sites(spec.sites, rng);
  const int n = sites.size();
  const int T = spec.T;
  const int p = static_cast<int>(spec.beta.size());

  const Eigen::MatrixXd r =
      correlation_matrix(sites, CorrelationKernel{KernelFamily::Exponential, spec.theta});
  const Eigen::MatrixXd l_stationary =
      cholesky_with_jitter(r, "simulation stationary covariance").matrixL();
  const double innov_scale = std::sqrt(1.0 - spec.g * spec.g);

  const Eigen::VectorXd sigma2 = skedastic_values(spec.sigma2, T);

  // latent chain
  Eigen::MatrixXd latent(n, T);
  Eigen::VectorXd z(n);
  {
    Eigen::VectorXd xi(n);
    for (int i = 0; i < n; ++i) xi(i) = stdnorm(rng);
    if (spec.stationary_init) {
      z = l_stationary * xi;
    } else {
      if (spec.mu0.size() != n || spec.sigma0.rows() != n || spec.sigma0.cols() != n)
        throw InputError("mu0/sigma0 dimensions do not match the site count");
      z = spec.mu0 +
          cholesky_with_jitter(spec.sigma0, "simulation initial covariance").matrixL() * xi;
    }
  }
  for (int t = 0; t < T; ++t) {
    Eigen::VectorXd xi(n);
    for (int i = 0; i < n; ++i) xi(i) = stdnorm(rng);
    z = spec.g * z + innov_scale * (l_stationary * xi);
    latent.col(t) = z;
  }

  // covariates: intercept plus iid standard normal columns
  std::vector<std::string> names;
  names.emplace_back("(Intercept)");
  for (int j = 1; j < p; ++j) {
    if (static_cast<int>(spec.covariate_names.size()) >= j &&
        !spec.covariate_names[j - 1].empty()) {
      names.push_back(spec.covariate_names[j - 1]);
    } else {
      names.push_back("x" + std::to_string(j));
    }
  }

  ObservationPanel panel;
  panel.station_ids = sites.labels;
  if (panel.station_ids.empty())
    for (int i = 0; i < n; ++i) panel.station_ids.push_back("s" + std::to_string(i + 1));
  panel.sites = sites;
  panel.dates.resize(T);
  for (int t = 0; t < T; ++t) panel.dates[t] = spec.start_date + t;
  panel.column_names = names;
  panel.x.resize(T);
  panel.y.resize(n, T);
  for (int t = 0; t < T; ++t) {
    panel.x[t].resize(n, p);
    panel.x[t].col(0).setOnes();
    for (int j = 1; j < p; ++j)
      for (int i = 0; i < n; ++i) panel.x[t](i, j) = stdnorm(rng);
    const double sd = std::sqrt(sigma2(t));
    for (int i = 0; i < n; ++i)
      panel.y(i, t) = panel.x[t].row(i).dot(spec.beta) + spec.alpha * latent(i, t) +
                      sd * stdnorm(rng);
  }

  // missing-completely-at-random mechanisms, applied after generation
  if (std::holds_alternative<MissingUniform>(spec.missing)) {
    const double rate = std::get<MissingUniform>(spec.missing).rate;
    if (rate < 0.0 || rate >= 1.0) throw InputError("missing rate must be in [0, 1)");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < n; ++i)
        if (u(rng) < rate) panel.y(i, t) = std::nan("");
  } else if (std::holds_alternative<MissingBlocks>(spec.missing)) {
    const int len = std::get<MissingBlocks>(spec.missing).length;
    if (len < 0 || len > T) throw InputError("missing block length must be in [0, T]");
    if (len > 0) {
      std::uniform_int_distribution<int> u(0, T - len);
      for (int i = 0; i < n; ++i) {
        const int start = u(rng);
        for (int t = start; t < start + len; ++t) panel.y(i, t) = std::nan("");
      }
    }
  }

  SimOutput out;
  std::vector<std::string> continuous(names.begin() + 1, names.end());
  out.spec = ModelSpec::build("y", continuous, {}, {}, KernelFamily::Exponential, std::nullopt);
  out.panel = std::move(panel);
  out.latent = std::move(latent);
  out.sigma2 = sigma2;
  return out;
}

}  // namespace hdgm
