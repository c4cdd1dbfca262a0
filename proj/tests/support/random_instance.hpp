#pragma once

// Seeded random state-space instances for the oracle tests.

#include <random>

#include "hdgm/geo.hpp"
#include "hdgm/statespace.hpp"

namespace testsupport {

struct InstanceConfig {
  int n = 3;
  int T = 4;
  double missing_rate = 0.0;
  bool heteroskedastic = true;
};

inline hdgm::SiteSet random_sites(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> lat(44.0, 47.0), lon(8.0, 12.0);
  hdgm::SiteSet sites;
  for (int i = 0; i < n; ++i) sites.sites.push_back({lat(rng), lon(rng)});
  return sites;
}

inline hdgm::StateSpaceInputs random_instance(unsigned seed, const InstanceConfig& cfg = {}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> norm(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const int n = cfg.n, T = cfg.T;
  hdgm::StateSpaceInputs in;
  in.alpha = 0.3 + unif(rng);
  in.g = -0.9 + 1.8 * unif(rng);

  const hdgm::SiteSet sites = random_sites(n, rng);
  const double theta = 0.5 + 2.0 * unif(rng);
  in.sigma_eta = (1.0 - in.g * in.g) *
                 hdgm::correlation_matrix(sites, {hdgm::KernelFamily::Exponential, theta});

  in.sigma2.resize(T);
  for (int t = 0; t < T; ++t)
    in.sigma2(t) = cfg.heteroskedastic ? 0.3 + 1.2 * unif(rng) : 1.0;

  in.mu0.resize(n);
  for (int i = 0; i < n; ++i) in.mu0(i) = norm(rng);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = norm(rng);
  in.sigma0 = a * a.transpose() / n + 0.2 * Eigen::MatrixXd::Identity(n, n);

  in.offset.resize(n, T);
  in.y.resize(n, T);
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < n; ++i) {
      in.offset(i, t) = 0.5 * norm(rng);
      in.y(i, t) = in.offset(i, t) + norm(rng);
      if (unif(rng) < cfg.missing_rate) in.y(i, t) = std::nan("");
    }
  return in;
}

}  // namespace testsupport
