#pragma once

// Shared fixtures: a small fitted synthetic model and grids derived from it.

#include "hdgm/emfit.hpp"
#include "hdgm/predict.hpp"
#include "hdgm/sim.hpp"

namespace testsupport {

struct FittedModel {
  hdgm::SimOutput sim;
  hdgm::FitResult fit;
};

inline FittedModel small_fitted_model(unsigned seed = 2024, int n = 8, int T = 30,
                                      int max_iter = 40) {
  hdgm::SimSpec spec;
  hdgm::SiteBox box;
  box.count = n;
  spec.sites = box;
  spec.T = T;
  spec.beta = Eigen::Vector3d(0.4, 1.0, -0.6);
  spec.alpha = 0.6;
  spec.g = 0.7;
  spec.theta = 1.0;
  spec.seed = seed;
  FittedModel out;
  out.sim = hdgm::simulate(spec);
  hdgm::EmOptions opt;
  opt.max_iter = max_iter;
  opt.tol = 1e-7;
  out.fit = hdgm::em_fit(out.sim.panel, out.sim.spec, opt);
  return out;
}

// grid whose pixels sit at the panel stations, with the panel covariates in
// original units and synthetic metadata for masking tests
inline hdgm::PredictionGrid grid_from_panel(const hdgm::ObservationPanel& panel) {
  hdgm::PredictionGrid grid;
  grid.pixel_ids = panel.station_ids;
  grid.sites = panel.sites;
  grid.dates = panel.dates;
  grid.raw.resize(panel.T());
  for (int t = 0; t < panel.T(); ++t) {
    for (int j = 0; j < panel.p(); ++j) {
      const std::string& name = panel.column_names[j];
      if (name == "(Intercept)") continue;
      grid.raw[t][name] = panel.x[t].col(j);
    }
  }
  const int m = grid.m();
  grid.altitude.resize(m);
  grid.province.resize(m);
  grid.land_type.resize(m);
  grid.forest.resize(m);
  for (int i = 0; i < m; ++i) {
    grid.altitude[i] = 100.0 + 90.0 * i;
    grid.province[i] = (i % 2 == 0) ? "AA" : "BB";
    grid.land_type[i] = (i % 3 == 0) ? "urban" : "rural";
    grid.forest[i] = (i % 4 == 0) ? 1 : 0;
  }
  return grid;
}

}  // namespace testsupport
