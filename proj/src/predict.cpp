#include "hdgm/predict.hpp"

#include <algorithm>
#include <cmath>

#include "hdgm/kernels/kernels.hpp"

namespace hdgm {

void PredictionGrid::validate() const {
  if (pixel_ids.empty()) throw InputError("grid has no pixels");
  sites.validate();
  if (sites.size() != m()) throw InputError("grid sites do not match pixel count");
  if (dates.empty()) throw InputError("grid has no dates");
  if (static_cast<int>(raw.size()) != T()) throw InputError("grid raw columns have wrong length");
  for (int t = 1; t < T(); ++t)
    if (!(dates[t - 1] < dates[t])) throw InputError("grid dates must be ascending and unique");
  for (const auto& cols : raw)
    for (const auto& [name, v] : cols)
      if (v.size() != m())
        throw InputError("grid column '" + name + "' has the wrong number of pixels");
}

Eigen::MatrixXd PredictionGrid::design_block(const ModelSpec& spec, int t) const {
  return build_design_row_block(spec, dates[t], raw[t], m());
}

Eigen::MatrixXd kriging_weights(const SiteSet& fitted_sites, const SiteSet& new_sites,
                                const CorrelationKernel& kernel) {
  const Eigen::MatrixXd r = correlation_matrix(fitted_sites, kernel);
  const Eigen::LLT<Eigen::MatrixXd> llt = cholesky_with_jitter(r, "kriging weights");
  const Eigen::MatrixXd cross = cross_correlation(new_sites, fitted_sites, kernel);
  return llt.solve(cross.transpose()).transpose();
}

Eigen::MatrixXd krige_latent(const Eigen::MatrixXd& z_smooth, const SiteSet& fitted_sites,
                             const SiteSet& new_sites, const CorrelationKernel& kernel) {
  if (z_smooth.rows() != fitted_sites.size())
    throw InputError("smoothed states do not match the fitted sites");
  return kriging_weights(fitted_sites, new_sites, kernel) * z_smooth;
}

GridPrediction predict_response(const FitResult& fit, const PredictionGrid& grid) {
  grid.validate();
  const int m = grid.m();
  const int tg = grid.T();
  const int p = fit.spec.p();

  GridPrediction out;
  out.pixel_ids = grid.pixel_ids;
  out.dates = grid.dates;
  out.y_hat.resize(m, tg);

  const CorrelationKernel kernel{fit.spec.kernel, fit.params.theta};
  const Eigen::MatrixXd weights = kriging_weights(fit.sites, grid.sites, kernel);

  for (int t = 0; t < tg; ++t) {
    const Date d = grid.dates[t];
    const auto it = std::lower_bound(fit.dates.begin(), fit.dates.end(), d);
    if (it == fit.dates.end() || !(*it == d))
      throw InputError("grid date " + d.to_string() + " is outside the fitted period");
    const int k = static_cast<int>(it - fit.dates.begin());

    const Eigen::MatrixXd x_std =
        apply_moments_design(grid.design_block(fit.spec, t), fit.spec, fit.params.moments);
    const Eigen::VectorXd z_hat = weights * fit.z_smooth.col(k);
    Eigen::VectorXd y_std = x_std * fit.params.beta + fit.params.alpha * z_hat;
    for (int i = 0; i < m; ++i) {
      bool complete = true;
      for (int j = 0; j < p; ++j)
        if (!std::isfinite(x_std(i, j))) {
          complete = false;
          break;
        }
      if (!complete) {
        y_std(i) = std::nan("");
        ++out.skipped;
      }
    }
    kernels::scale_shift(out.y_hat.col(t).data(), y_std.data(), static_cast<std::size_t>(m),
                         fit.params.moments.response_std, fit.params.moments.response_mean);
  }
  return out;
}

}  // namespace hdgm
