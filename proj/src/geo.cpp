#include "hdgm/geo.hpp"

#include <cmath>
#include <numbers>

#include "hdgm/kernels/kernels.hpp"

namespace hdgm {

namespace {
constexpr double kDeg2Rad = std::numbers::pi / 180.0;
constexpr double kRad2Deg = 180.0 / std::numbers::pi;
}  // namespace

void SiteSet::validate() const {
  if (sites.empty()) throw InputError("site set is empty");
  if (!labels.empty() && labels.size() != sites.size())
    throw InputError("site labels do not match the number of sites");
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const Site& s = sites[i];
    if (!std::isfinite(s.lat) || !std::isfinite(s.lon))
      throw InputError("non-finite coordinate at site index " + std::to_string(i));
    if (s.lat < -90.0 || s.lat > 90.0)
      throw InputError("latitude out of [-90, 90] at site index " + std::to_string(i));
    if (s.lon < -180.0 || s.lon > 180.0)
      throw InputError("longitude out of [-180, 180] at site index " + std::to_string(i));
  }
}

void CorrelationKernel::validate() const {
  if (!(theta > 0.0) || !std::isfinite(theta))
    throw InputError("kernel range theta must be positive and finite");
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "exponential") return KernelFamily::Exponential;
  throw InputError("unknown kernel family '" + name + "' (supported: exponential)");
}

std::string kernel_family_to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Exponential: return "exponential";
  }
  return "exponential";
}

double geodetic_distance(const Site& a, const Site& b) {
  if (!std::isfinite(a.lat) || !std::isfinite(a.lon) || !std::isfinite(b.lat) ||
      !std::isfinite(b.lon))
    throw InputError("non-finite coordinate in geodetic_distance");

  const double la = a.lat * kDeg2Rad, lb = b.lat * kDeg2Rad;
  const double dlon = (b.lon - a.lon) * kDeg2Rad;

  // unit vectors -> central angle via atan2(|u x v|, u . v)
  const double ca = std::cos(la), sa = std::sin(la);
  const double cb = std::cos(lb), sb = std::sin(lb);
  const double cd = std::cos(dlon), sd = std::sin(dlon);

  const double dotp = ca * cb * cd + sa * sb;
  const double cx = ca * sb - sa * cb * cd;
  const double cy = cb * sd;
  const double cross = std::sqrt(cx * cx + cy * cy);
  return std::atan2(cross, dotp) * kRad2Deg;
}

Eigen::MatrixXd distance_matrix(const SiteSet& sites) {
  sites.validate();
  const int n = sites.size();
  Eigen::MatrixXd d(n, n);
  for (int i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      const double v = geodetic_distance(sites.sites[i], sites.sites[j]);
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& distances,
                                   const CorrelationKernel& kernel) {
  kernel.validate();
  Eigen::MatrixXd r(distances.rows(), distances.cols());
  kernels::exp_neg_scaled(r.data(), distances.data(),
                          static_cast<std::size_t>(distances.size()), 1.0 / kernel.theta);
  return r;
}

Eigen::MatrixXd correlation_matrix(const SiteSet& sites, const CorrelationKernel& kernel) {
  return correlation_matrix(distance_matrix(sites), kernel);
}

Eigen::MatrixXd cross_correlation(const SiteSet& new_sites, const SiteSet& fitted_sites,
                                  const CorrelationKernel& kernel) {
  new_sites.validate();
  fitted_sites.validate();
  kernel.validate();
  const int m = new_sites.size();
  const int n = fitted_sites.size();
  Eigen::MatrixXd d(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      d(i, j) = geodetic_distance(new_sites.sites[i], fitted_sites.sites[j]);
  Eigen::MatrixXd r(m, n);
  kernels::exp_neg_scaled(r.data(), d.data(), static_cast<std::size_t>(d.size()),
                          1.0 / kernel.theta);
  return r;
}

Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(const Eigen::MatrixXd& m,
                                                 const std::string& context, double jitter) {
  Eigen::MatrixXd a = m;
  a.diagonal().array() += jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success)
    throw NumericalError("matrix not positive definite after jitter: " + context);
  return llt;
}

}  // namespace hdgm
