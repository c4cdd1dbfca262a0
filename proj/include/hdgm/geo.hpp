#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "hdgm/errors.hpp"

namespace hdgm {

// A point on the sphere, in degrees.
struct Site {
  double lat = 0.0;
  double lon = 0.0;
};

// Ordered collection of sites with stable integer ids (the position) and
// optional labels (station codes, pixel ids).
struct SiteSet {
  std::vector<Site> sites;
  std::vector<std::string> labels;  // empty or same length as sites

  int size() const { return static_cast<int>(sites.size()); }
  void validate() const;  // throws InputError on bad coordinates / empty set
};

enum class KernelFamily { Exponential };

// Spatial correlation kernel; theta is the range in degrees of great-circle
// arc, matching the distance unit below.
struct CorrelationKernel {
  KernelFamily family = KernelFamily::Exponential;
  double theta = 1.0;

  void validate() const;
};

KernelFamily kernel_family_from_string(const std::string& name);
std::string kernel_family_to_string(KernelFamily family);

// Central angle between two sites in degrees of arc. Computed from the chord
// via atan2, which is well conditioned at small and antipodal separations.
double geodetic_distance(const Site& a, const Site& b);

// All pairwise distances, in degrees of arc.
Eigen::MatrixXd distance_matrix(const SiteSet& sites);

// rho(d_ij; theta) for all pairs. Unit diagonal, entries in (0, 1].
Eigen::MatrixXd correlation_matrix(const SiteSet& sites, const CorrelationKernel& kernel);
Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& distances,
                                   const CorrelationKernel& kernel);

// m x n matrix of rho(distance(new_i, fitted_j); theta).
Eigen::MatrixXd cross_correlation(const SiteSet& new_sites, const SiteSet& fitted_sites,
                                  const CorrelationKernel& kernel);

// Diagonal jitter added before every Cholesky factorization of a correlation
// matrix, guarding against coincident-site degeneracy.
constexpr double kCorrelationJitter = 1e-10;

// Mean Earth radius; distances are kept in degrees of arc throughout, this is
// for reporting only.
constexpr double kMeanEarthRadiusKm = 6371.0088;
inline double arc_degrees_to_km(double deg) {
  return deg * (3.14159265358979323846 / 180.0) * kMeanEarthRadiusKm;
}

// Cholesky of M + jitter*I. Throws NumericalError (with `context` in the
// message) if the factorization still fails.
Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(const Eigen::MatrixXd& m,
                                                 const std::string& context,
                                                 double jitter = kCorrelationJitter);

}  // namespace hdgm
