#include "hdgm/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "hdgm/kernels/kernels.hpp"
#include "hdgm/predict.hpp"

namespace hdgm {

Eigen::MatrixXd studentized_residuals(const ObservationPanel& panel, const ModelSpec& spec,
                                      const ModelParams& params,
                                      const Eigen::MatrixXd& z_smooth) {
  panel.validate();
  const int n = panel.n(), T = panel.T();
  if (params.sigma2.size() != T) throw InputError("sigma2 length does not match the panel");
  Eigen::MatrixXd out(n, T);
  for (int t = 0; t < T; ++t) {
    const Eigen::MatrixXd x_std = apply_moments_design(panel.x[t], spec, params.moments);
    const double sd = std::sqrt(params.sigma2(t));
    for (int i = 0; i < n; ++i) {
      if (!panel.cell_complete(i, t)) {
        out(i, t) = std::nan("");
        continue;
      }
      const double y_std =
          (panel.y(i, t) - params.moments.response_mean) / params.moments.response_std;
      out(i, t) =
          (y_std - x_std.row(i).dot(params.beta) - params.alpha * z_smooth(i, t)) / sd;
    }
  }
  return out;
}

StationAcf station_acf(const Eigen::MatrixXd& residuals, int max_lag) {
  if (max_lag < 1) throw InputError("acf needs max_lag >= 1");
  const int n = static_cast<int>(residuals.rows());
  const int T = static_cast<int>(residuals.cols());
  StationAcf out;

  for (int i = 0; i < n; ++i) {
    double mean = 0.0;
    int cnt = 0;
    for (int t = 0; t < T; ++t)
      if (std::isfinite(residuals(i, t))) {
        mean += residuals(i, t);
        ++cnt;
      }
    if (cnt < max_lag + 2) {
      out.skipped.push_back(i);
      continue;
    }
    mean /= cnt;

    double c0 = 0.0;
    for (int t = 0; t < T; ++t)
      if (std::isfinite(residuals(i, t))) c0 += (residuals(i, t) - mean) * (residuals(i, t) - mean);
    c0 /= cnt;
    if (!(c0 > 0.0)) {
      out.skipped.push_back(i);
      continue;
    }

    Eigen::VectorXd acf(max_lag + 1);
    acf(0) = 1.0;
    bool ok = true;
    for (int k = 1; k <= max_lag; ++k) {
      double ck = 0.0;
      int pairs = 0;
      for (int t = 0; t + k < T; ++t) {
        const double a = residuals(i, t), b = residuals(i, t + k);
        if (std::isfinite(a) && std::isfinite(b)) {
          ck += (a - mean) * (b - mean);
          ++pairs;
        }
      }
      if (pairs == 0) {
        ok = false;
        break;
      }
      acf(k) = (ck / pairs) / c0;
    }
    if (!ok) {
      out.skipped.push_back(i);
      continue;
    }
    out.station.push_back(i);
    out.acf.push_back(std::move(acf));
  }
  return out;
}

Variogram st_variogram(const ObservationPanel& panel, int space_bins, int time_lags) {
  panel.validate();
  if (panel.n() < 2) throw InputError("variogram needs at least two stations");
  if (space_bins < 1 || time_lags < 0) throw InputError("invalid variogram binning");

  const int n = panel.n();
  const int T = panel.T();
  const Eigen::MatrixXd dist = distance_matrix(panel.sites);
  const double d_max = dist.maxCoeff();
  if (!(d_max > 0.0)) throw InputError("all stations coincide; variogram undefined");
  const double width = (d_max / 2.0) / space_bins;

  Variogram v;
  v.h_mid.resize(space_bins);
  for (int b = 0; b < space_bins; ++b) v.h_mid(b) = (b + 0.5) * width;
  v.u_lags.resize(time_lags + 1);
  for (int u = 0; u <= time_lags; ++u) v.u_lags(u) = u;
  v.gamma = Eigen::MatrixXd::Zero(space_bins, time_lags + 1);
  v.count = Eigen::MatrixXd::Zero(space_bins, time_lags + 1);

  // contiguous per-station series so the lagged accumulation is one kernel
  // call per (pair, lag)
  const Eigen::MatrixXd series = panel.y.transpose();  // T x n, columns contiguous

  // ordered distinct pairs in both directions keep gamma symmetric in (s, s')
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = dist(i, j);
      const int b = static_cast<int>(d / width);
      if (b < 0 || b >= space_bins) continue;
      const double* yi = series.col(i).data();
      const double* yj = series.col(j).data();
      for (int u = 0; u <= time_lags && u < T; ++u) {
        const auto acc = kernels::finite_sq_diff(yi, yj + u, static_cast<std::size_t>(T - u));
        v.gamma(b, u) += acc.sum_sq;
        v.count(b, u) += static_cast<double>(acc.count);
      }
    }
  }

  for (int b = 0; b < space_bins; ++b)
    for (int u = 0; u <= time_lags; ++u)
      v.gamma(b, u) =
          (v.count(b, u) > 0) ? 0.5 * v.gamma(b, u) / v.count(b, u) : std::nan("");
  return v;
}

CvReport losocv(const ObservationPanel& panel, const ModelSpec& spec, const EmOptions& options,
                const std::vector<std::string>& holdout_ids) {
  panel.validate();
  if (holdout_ids.empty()) throw InputError("losocv needs a non-empty holdout list");
  const int n = panel.n();

  std::vector<int> holdout;
  for (const std::string& id : holdout_ids) {
    const auto it = std::find(panel.station_ids.begin(), panel.station_ids.end(), id);
    if (it == panel.station_ids.end())
      throw InputError("holdout station '" + id + "' is not in the panel");
    holdout.push_back(static_cast<int>(it - panel.station_ids.begin()));
  }
  if (n - 1 < 2) throw InputError("losocv needs at least three stations");

  CvReport report;
  {
    const FitResult full = em_fit(panel, spec, options);
    report.insample_rmse = full.report.rmse_insample;
  }

  double pooled_ss = 0.0;
  long pooled_n = 0;

  for (const int h : holdout) {
    // training panel without the held-out station
    ObservationPanel train;
    train.dates = panel.dates;
    train.column_names = panel.column_names;
    for (int i = 0; i < n; ++i) {
      if (i == h) continue;
      train.station_ids.push_back(panel.station_ids[i]);
      train.sites.sites.push_back(panel.sites.sites[i]);
      if (!panel.sites.labels.empty()) train.sites.labels.push_back(panel.sites.labels[i]);
      if (!panel.altitude.empty()) train.altitude.push_back(panel.altitude[i]);
      if (!panel.province.empty()) train.province.push_back(panel.province[i]);
      if (!panel.land_type.empty()) train.land_type.push_back(panel.land_type[i]);
    }
    const int nt = n - 1;
    train.y.resize(nt, panel.T());
    train.x.assign(panel.T(), Eigen::MatrixXd(nt, panel.p()));
    for (int t = 0; t < panel.T(); ++t) {
      int r = 0;
      for (int i = 0; i < n; ++i) {
        if (i == h) continue;
        train.y(r, t) = panel.y(i, t);
        train.x[t].row(r) = panel.x[t].row(i);
        ++r;
      }
    }

    try {
      const FitResult fit = em_fit(train, spec, options);

      SiteSet target;
      target.sites.push_back(panel.sites.sites[h]);
      const CorrelationKernel kernel{spec.kernel, fit.params.theta};
      const Eigen::MatrixXd z_hat =
          krige_latent(fit.z_smooth, fit.sites, target, kernel);  // 1 x T

      Eigen::VectorXd pred(panel.T());
      double ss = 0.0;
      long cnt = 0;
      for (int t = 0; t < panel.T(); ++t) {
        const Eigen::MatrixXd x_std = apply_moments_design(
            panel.x[t].row(h), spec, fit.params.moments);
        bool complete = true;
        for (int j = 0; j < panel.p(); ++j)
          if (!std::isfinite(x_std(0, j))) complete = false;
        if (!complete) {
          pred(t) = std::nan("");
          continue;
        }
        const double y_std = x_std.row(0).dot(fit.params.beta) + fit.params.alpha * z_hat(0, t);
        pred(t) = y_std * fit.params.moments.response_std + fit.params.moments.response_mean;
        if (std::isfinite(panel.y(h, t))) {
          const double e = panel.y(h, t) - pred(t);
          ss += e * e;
          ++cnt;
        }
      }

      report.station.push_back(panel.station_ids[h]);
      report.rmse.push_back(cnt > 0 ? std::sqrt(ss / cnt) : 0.0);
      report.n_obs.push_back(cnt);
      report.predictions.push_back(std::move(pred));
      pooled_ss += ss;
      pooled_n += cnt;
    } catch (const std::exception& e) {
      report.failed.push_back(panel.station_ids[h] + ": " + e.what());
    }
  }

  report.pooled_rmse = (pooled_n > 0) ? std::sqrt(pooled_ss / pooled_n) : 0.0;
  return report;
}

}  // namespace hdgm
