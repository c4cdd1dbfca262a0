#include "hdgm/emfit.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "hdgm/kernels/kernels.hpp"

namespace hdgm {

namespace {

constexpr double kMaxAbsG = 0.9999;  // stationarity region of the unit-variance convention

// Solves the p x p GLS normal equations, naming collinear columns on failure.
Eigen::VectorXd solve_gram(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                           const std::vector<std::string>& column_names) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < a.cols()) {
    const auto perm = qr.colsPermutation().indices();
    std::ostringstream msg;
    msg << "singular design; collinear columns:";
    for (int k = qr.rank(); k < a.cols(); ++k) {
      const int j = perm(k);
      msg << ' ' << (j < static_cast<int>(column_names.size()) ? column_names[j]
                                                               : std::to_string(j));
    }
    throw NumericalError(msg.str());
  }
  return qr.solve(b);
}

Eigen::MatrixXd invert_gram(const Eigen::MatrixXd& a,
                            const std::vector<std::string>& column_names) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < a.cols()) {
    const auto perm = qr.colsPermutation().indices();
    std::ostringstream msg;
    msg << "singular design; collinear columns:";
    for (int k = qr.rank(); k < a.cols(); ++k) {
      const int j = perm(k);
      msg << ' ' << (j < static_cast<int>(column_names.size()) ? column_names[j]
                                                               : std::to_string(j));
    }
    throw NumericalError(msg.str());
  }
  Eigen::MatrixXd inv = qr.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
  return ((inv + inv.transpose()) * 0.5).eval();
}

Eigen::MatrixXd gls_gram(const std::vector<Eigen::MatrixXd>& x, const BoolMask& mask,
                         const Eigen::VectorXd& sigma2) {
  const int T = static_cast<int>(x.size());
  const int n = static_cast<int>(mask.rows());
  const int p = static_cast<int>(x[0].cols());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  for (int t = 0; t < T; ++t) {
    const double w = 1.0 / sigma2(t);
    for (int i = 0; i < n; ++i) {
      if (!mask(i, t)) continue;
      const auto row = x[t].row(i);
      a.noalias() += w * row.transpose() * row;
    }
  }
  return a;
}

struct ThetaBounds {
  double lo = 0.0;
  double hi = 0.0;
};

double golden_section_max(const std::function<double(double)>& f, double lo, double hi) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double m1 = hi - invphi * (hi - lo);
  double m2 = lo + invphi * (hi - lo);
  double f1 = f(m1), f2 = f(m2);
  while (hi - lo > 1e-10) {
    if (f1 < f2) {
      lo = m1;
      m1 = m2;
      f1 = f2;
      m2 = lo + invphi * (hi - lo);
      f2 = f(m2);
    } else {
      hi = m2;
      m2 = m1;
      f2 = f1;
      m1 = hi - invphi * (hi - lo);
      f1 = f(m1);
    }
  }
  return 0.5 * (lo + hi);
}

ThetaBounds theta_bounds(const Eigen::MatrixXd& distances) {
  const int n = static_cast<int>(distances.rows());
  double d_min = std::numeric_limits<double>::infinity();
  double d_max = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double d = distances(i, j);
      d_max = std::max(d_max, d);
      if (d > 0.0) d_min = std::min(d_min, d);
    }
  if (!(d_max > 0.0))
    throw InputError("all sites coincide; the correlation range is unidentifiable");
  return {d_min / 100.0, 10.0 * d_max};
}

}  // namespace

Eigen::MatrixXd innovation_covariance(const Eigen::MatrixXd& distances, double theta, double g,
                                      KernelFamily family) {
  const CorrelationKernel kernel{family, theta};
  const double scale = 1.0 - g * g;
  if (!(scale > 0.0)) throw NumericalError("transition coefficient outside (-1, 1)");
  return scale * correlation_matrix(distances, kernel);
}

Eigen::VectorXd sigma2_update(const Eigen::MatrixXd& y, const std::vector<Eigen::MatrixXd>& x,
                              const BoolMask& mask, const Eigen::VectorXd& beta, double alpha,
                              const std::vector<Eigen::VectorXd>& z_smooth,
                              const std::vector<Eigen::MatrixXd>& p_smooth,
                              const Eigen::VectorXd& sigma2_prev, double floor) {
  const int n = static_cast<int>(y.rows());
  const int T = static_cast<int>(y.cols());
  Eigen::VectorXd out(T);
  for (int t = 0; t < T; ++t) {
    double trace = 0.0;
    int n_t = 0;
    for (int i = 0; i < n; ++i) {
      if (!mask(i, t)) continue;
      const double e = y(i, t) - x[t].row(i).dot(beta) - alpha * z_smooth[t](i);
      trace += e * e + alpha * alpha * p_smooth[t](i, i);
      ++n_t;
    }
    out(t) = (n_t > 0) ? std::max(trace / n_t, floor) : sigma2_prev(t);
  }
  return out;
}

Eigen::VectorXd beta_update(const Eigen::MatrixXd& y, const std::vector<Eigen::MatrixXd>& x,
                            const BoolMask& mask, const Eigen::VectorXd& sigma2, double alpha,
                            const std::vector<Eigen::VectorXd>& z_smooth,
                            const std::vector<std::string>& column_names) {
  const int n = static_cast<int>(y.rows());
  const int T = static_cast<int>(y.cols());
  const int p = static_cast<int>(x[0].cols());
  const Eigen::MatrixXd a = gls_gram(x, mask, sigma2);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  for (int t = 0; t < T; ++t) {
    const double w = 1.0 / sigma2(t);
    for (int i = 0; i < n; ++i) {
      if (!mask(i, t)) continue;
      b.noalias() += w * (y(i, t) - alpha * z_smooth[t](i)) * x[t].row(i).transpose();
    }
  }
  return solve_gram(a, b, column_names);
}

double alpha_update(const Eigen::MatrixXd& y, const std::vector<Eigen::MatrixXd>& x,
                    const BoolMask& mask, const Eigen::VectorXd& sigma2,
                    const Eigen::VectorXd& beta, const std::vector<Eigen::VectorXd>& z_smooth,
                    const std::vector<Eigen::MatrixXd>& p_smooth) {
  const int n = static_cast<int>(y.rows());
  const int T = static_cast<int>(y.cols());
  double num = 0.0, den = 0.0;
  for (int t = 0; t < T; ++t) {
    const double w = 1.0 / sigma2(t);
    for (int i = 0; i < n; ++i) {
      if (!mask(i, t)) continue;
      const double z = z_smooth[t](i);
      num += w * z * (y(i, t) - x[t].row(i).dot(beta));
      den += w * (z * z + p_smooth[t](i, i));
    }
  }
  if (!(den > 0.0)) return 0.0;
  return num / den;
}

double transition_update(const Eigen::MatrixXd& s10, const Eigen::MatrixXd& s00) {
  const double den = s00.trace();
  if (!(den > 0.0)) throw NumericalError("S00 has non-positive trace in the g update");
  return s10.trace() / den;
}

double theta_objective(const Eigen::MatrixXd& distances, double theta, const Eigen::MatrixXd& c) {
  const CorrelationKernel kernel{KernelFamily::Exponential, theta};
  const Eigen::MatrixXd r = correlation_matrix(distances, kernel);
  const Eigen::LLT<Eigen::MatrixXd> llt = cholesky_with_jitter(r, "theta objective");
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double trace = std::max(llt.solve(c).trace(), 1e-300);
  const double n = static_cast<double>(distances.rows());
  return -(logdet + n * std::log(trace));
}

double theta_update_from_distances(const Eigen::MatrixXd& s11, const Eigen::MatrixXd& s10,
                                   const Eigen::MatrixXd& s00, double g,
                                   const Eigen::MatrixXd& distances, KernelFamily family) {
  if (family != KernelFamily::Exponential)
    throw InputError("only the exponential kernel family is implemented");
  const ThetaBounds bounds = theta_bounds(distances);
  Eigen::MatrixXd c = s11 - g * (s10 + s10.transpose()) + g * g * s00;
  c = ((c + c.transpose()) * 0.5).eval();

  // golden-section maximization over log theta
  const double log_theta = golden_section_max(
      [&](double lt) { return theta_objective(distances, std::exp(lt), c); },
      std::log(bounds.lo), std::log(bounds.hi));
  return std::exp(log_theta);
}

namespace {

// Exact conditional theta step: minimizes T log|R(theta)| + tr(R(theta)^-1 C)
// over the same bracket. Used as the safeguard fallback inside em_fit.
double exact_theta_step(const Eigen::MatrixXd& distances, const Eigen::MatrixXd& c, int T,
                        KernelFamily family) {
  const ThetaBounds bounds = theta_bounds(distances);
  const auto j = [&](double lt) {
    const Eigen::MatrixXd r = correlation_matrix(distances, {family, std::exp(lt)});
    const Eigen::LLT<Eigen::MatrixXd> llt = cholesky_with_jitter(r, "exact theta step");
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -(T * logdet + llt.solve(c).trace());
  };
  return std::exp(golden_section_max(j, std::log(bounds.lo), std::log(bounds.hi)));
}

}  // namespace

double theta_update(const Eigen::MatrixXd& s11, const Eigen::MatrixXd& s10,
                    const Eigen::MatrixXd& s00, double g, const SiteSet& sites,
                    KernelFamily family) {
  return theta_update_from_distances(s11, s10, s00, g, distance_matrix(sites), family);
}

Eigen::MatrixXd beta_covariance(const ObservationPanel& panel, const ModelSpec& spec,
                                const ModelParams& params) {
  panel.validate();
  const int T = panel.T();
  std::vector<Eigen::MatrixXd> x_std(T);
  for (int t = 0; t < T; ++t)
    x_std[t] = apply_moments_design(panel.x[t], spec, params.moments);
  const BoolMask mask = panel.complete_mask();
  std::vector<std::string> names;
  for (const Column& c : spec.columns) names.push_back(c.name);
  return invert_gram(gls_gram(x_std, mask, params.sigma2), names);
}

Eigen::MatrixXd in_sample_fit(const ObservationPanel& panel, const ModelSpec& spec,
                              const ModelParams& params, const Eigen::MatrixXd& z_smooth) {
  const int T = panel.T();
  Eigen::MatrixXd y_std(panel.n(), T);
  for (int t = 0; t < T; ++t) {
    const Eigen::MatrixXd x_std = apply_moments_design(panel.x[t], spec, params.moments);
    y_std.col(t) = x_std * params.beta + params.alpha * z_smooth.col(t);
  }
  return destandardize_response(y_std, params.moments);
}

FitResult em_fit(const ObservationPanel& panel, const ModelSpec& spec, const EmOptions& opt) {
  spec.validate();
  panel.validate();
  if (panel.n() < 2 || panel.T() < 2) throw InputError("em_fit needs n >= 2 and T >= 2");

  const int n = panel.n(), T = panel.T(), p = panel.p();
  const StandardizedPanel std_panel = standardize(panel, spec);
  const BoolMask mask = panel.complete_mask();
  const Eigen::MatrixXd distances = distance_matrix(panel.sites);
  std::vector<std::string> names;
  for (const Column& c : spec.columns) names.push_back(c.name);

  // The loop below runs in the free-scale parameterization (sigma_eta =
  // R(theta), latent variance 1/(1-g^2)), which is the parameterization the
  // printed updates belong to; the returned parameters are converted to the
  // unit-variance latent convention (sigma_eta = (1-g^2) R) at the end. The
  // two are exact reparameterizations of the same likelihood:
  // alpha_r = alpha_u sqrt(1-g^2), mu0_r = mu0_u / sqrt(1-g^2),
  // sigma0_r = sigma0_u / (1-g^2).

  // ---- initialization: OLS on observed rows, scale-appropriate defaults ----
  ModelParams params;
  {
    long rows = 0;
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < n; ++i)
        if (mask(i, t)) ++rows;
    if (rows < p) throw InputError("fewer complete observations than design columns");
    Eigen::MatrixXd xx(rows, p);
    Eigen::VectorXd yy(rows);
    long r = 0;
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < n; ++i) {
        if (!mask(i, t)) continue;
        xx.row(r) = std_panel.x[t].row(i);
        yy(r) = std_panel.y(i, t);
        ++r;
      }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xx);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
      const auto perm = qr.colsPermutation().indices();
      std::ostringstream msg;
      msg << "singular design; collinear columns:";
      for (int k = qr.rank(); k < p; ++k) msg << ' ' << names[perm(k)];
      throw NumericalError(msg.str());
    }
    params.beta = qr.solve(yy);
    const double res_var =
        std::max((yy - xx * params.beta).squaredNorm() / static_cast<double>(rows),
                 opt.variance_floor);
    params.sigma2 = Eigen::VectorXd::Constant(T, res_var);
  }
  params.g = 0.8;
  // alpha = 0.5, sigma0 = I in the unit-variance convention, mapped into the
  // free-scale parameterization of the loop
  params.alpha = 0.5 * std::sqrt(1.0 - params.g * params.g);
  {
    std::vector<double> pos;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (distances(i, j) > 0.0) pos.push_back(distances(i, j));
    if (pos.empty()) throw InputError("all sites coincide; the correlation range is unidentifiable");
    std::nth_element(pos.begin(), pos.begin() + pos.size() / 2, pos.end());
    params.theta = pos[pos.size() / 2];
  }
  params.mu0 = Eigen::VectorXd::Zero(n);
  params.sigma0 =
      Eigen::MatrixXd::Identity(n, n) / (1.0 - params.g * params.g);
  params.moments = std_panel.moments;

  // ---- EM iterations ----
  FitReport report;
  SmootherOutput sm;
  double criterion = std::numeric_limits<double>::infinity();
  int it = 0;

  for (;; ++it) {
    StateSpaceInputs in;
    in.y = std_panel.y;
    in.offset.resize(n, T);
    for (int t = 0; t < T; ++t) in.offset.col(t) = std_panel.x[t] * params.beta;
    in.alpha = params.alpha;
    in.g = params.g;
    in.sigma_eta = correlation_matrix(distances, {spec.kernel, params.theta});
    in.sigma2 = params.sigma2;
    in.mu0 = params.mu0;
    in.sigma0 = params.sigma0;
    in.mask = mask;

    sm = kalman_smooth(in);
    if (!std::isfinite(sm.loglik))
      throw NumericalError("observed log-likelihood is not finite at iteration " +
                           std::to_string(it));
    report.loglik_trace.push_back(sm.loglik);

    if (it > 0) {
      const double prev = report.loglik_trace[it - 1];
      const double diff = sm.loglik - prev;
      if (diff < -opt.monotonicity_slack) {
        std::ostringstream msg;
        msg << "observed log-likelihood decreased at iteration " << it << " (" << prev << " -> "
            << sm.loglik << "); trace:";
        for (double v : report.loglik_trace) msg << ' ' << v;
        throw NumericalError(msg.str());
      }
      criterion = std::abs(diff) / (std::abs(prev) + 1e-12);
      if (criterion < opt.tol) {
        report.converged = true;
        break;
      }
    }
    if (it >= opt.max_iter) break;

    // M-step. sigma2 uses the residuals at the current (beta, alpha); beta
    // and alpha then use the refreshed sigma2 but each other's previous
    // value, exactly as the update formulas cross-reference them.
    params.sigma2 = sigma2_update(std_panel.y, std_panel.x, mask, params.beta, params.alpha,
                                  sm.z_smooth, sm.p_smooth, params.sigma2, opt.variance_floor);
    const Eigen::VectorXd beta_new = beta_update(std_panel.y, std_panel.x, mask, params.sigma2,
                                                 params.alpha, sm.z_smooth, names);
    const double alpha_new = alpha_update(std_panel.y, std_panel.x, mask, params.sigma2,
                                          params.beta, sm.z_smooth, sm.p_smooth);
    params.beta = beta_new;
    params.alpha = alpha_new;
    params.mu0 = sm.z0_smooth;
    params.sigma0 = ((sm.p0_smooth + sm.p0_smooth.transpose()) * 0.5).eval();

    // g: the printed trace ratio, safeguarded by the exact conditional
    // maximizer of the Q2 term at sigma_eta = R(theta_m). The exact form is
    // the R^-1-weighted ratio, so a rejected proposal still makes progress.
    double g_prop = std::clamp(transition_update(sm.s10, sm.s00), -kMaxAbsG, kMaxAbsG);
    if (opt.safeguard) {
      const Eigen::MatrixXd r_old = correlation_matrix(distances, {spec.kernel, params.theta});
      const Eigen::LLT<Eigen::MatrixXd> llt = cholesky_with_jitter(r_old, "EM safeguard");
      const double t11 = llt.solve(sm.s11).trace();
      const double t10 = llt.solve(sm.s10).trace();
      const double t00 = llt.solve(sm.s00).trace();
      const auto q2_g = [&](double g) { return t11 - 2.0 * g * t10 + g * g * t00; };
      if (q2_g(g_prop) > q2_g(params.g) && t00 > 0.0) {
        g_prop = std::clamp(t10 / t00, -kMaxAbsG, kMaxAbsG);
        ++report.safeguard_activations;
      }
    }

    // theta: the scale-profiled line search, safeguarded by the exact
    // conditional objective T log|R| + tr(R^-1 C)
    double theta_prop =
        theta_update_from_distances(sm.s11, sm.s10, sm.s00, g_prop, distances, spec.kernel);
    if (opt.safeguard) {
      Eigen::MatrixXd c = sm.s11 - g_prop * (sm.s10 + sm.s10.transpose()) +
                          g_prop * g_prop * sm.s00;
      c = ((c + c.transpose()) * 0.5).eval();
      const auto q2_theta = [&](double theta) {
        const Eigen::MatrixXd r = correlation_matrix(distances, {spec.kernel, theta});
        const Eigen::LLT<Eigen::MatrixXd> l = cholesky_with_jitter(r, "EM safeguard");
        const double logdet = 2.0 * l.matrixLLT().diagonal().array().log().sum();
        return T * logdet + l.solve(c).trace();
      };
      const double q_prop = q2_theta(theta_prop);
      const double q_old = q2_theta(params.theta);
      if (q_prop > q_old) {
        // exact conditional line search over the same bracket
        const double exact = exact_theta_step(distances, c, T, spec.kernel);
        theta_prop = (q2_theta(exact) <= q_old) ? exact : params.theta;
        ++report.safeguard_activations;
      }
    }
    params.g = g_prop;
    params.theta = theta_prop;
  }

  report.iterations = it;
  report.criterion = criterion;

  // convert to the unit-variance latent convention: z_u = sqrt(1-g^2) z_r,
  // alpha_u z_u = alpha_r z_r, so fitted values and the likelihood are
  // unchanged
  const double unit_scale = std::sqrt(1.0 - params.g * params.g);
  params.alpha /= unit_scale;
  params.mu0 *= unit_scale;
  params.sigma0 *= unit_scale * unit_scale;

  FitResult result;
  result.spec = spec;
  result.sites = panel.sites;
  result.station_ids = panel.station_ids;
  result.dates = panel.dates;
  result.params = std::move(params);

  result.z_smooth.resize(n, T);
  for (int t = 0; t < T; ++t) result.z_smooth.col(t) = unit_scale * sm.z_smooth[t];

  report.sigma_beta = invert_gram(gls_gram(std_panel.x, mask, result.params.sigma2), names);

  report.studentized.resize(n, T);
  for (int t = 0; t < T; ++t) {
    const double sd = std::sqrt(result.params.sigma2(t));
    for (int i = 0; i < n; ++i) {
      report.studentized(i, t) =
          mask(i, t) ? (std_panel.y(i, t) - std_panel.x[t].row(i).dot(result.params.beta) -
                        result.params.alpha * result.z_smooth(i, t)) /
                           sd
                     : std::nan("");
    }
  }

  const Eigen::MatrixXd fitted = in_sample_fit(panel, spec, result.params, result.z_smooth);
  const auto acc = kernels::finite_sq_diff(panel.y.data(), fitted.data(),
                                           static_cast<std::size_t>(panel.y.size()));
  report.rmse_insample = (acc.count > 0) ? std::sqrt(acc.sum_sq / acc.count) : 0.0;

  result.report = std::move(report);
  return result;
}

}  // namespace hdgm
