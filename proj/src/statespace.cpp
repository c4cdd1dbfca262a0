#include "hdgm/statespace.hpp"

#include <cmath>
#include <numbers>

namespace hdgm {

namespace {

// Symmetrizes m in place and returns the largest asymmetry it removed.
double symmetrize(Eigen::MatrixXd& m) {
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  m = ((m + m.transpose()) * 0.5).eval();
  return asym;
}

std::vector<int> observed_rows(const StateSpaceInputs& in, int t) {
  std::vector<int> idx;
  idx.reserve(in.n());
  for (int i = 0; i < in.n(); ++i)
    if (in.observed(i, t)) idx.push_back(i);
  return idx;
}

}  // namespace

bool StateSpaceInputs::observed(int i, int t) const {
  if (mask.size() > 0) return mask(i, t);
  return std::isfinite(y(i, t));
}

void StateSpaceInputs::validate() const {
  const int n_ = n(), T_ = T();
  if (n_ < 1 || T_ < 1) throw InputError("state-space inputs need n >= 1, T >= 1");
  if (offset.rows() != n_ || offset.cols() != T_)
    throw InputError("offset dimensions do not match y");
  if (sigma_eta.rows() != n_ || sigma_eta.cols() != n_)
    throw InputError("sigma_eta must be n x n");
  if (sigma2.size() != T_) throw InputError("sigma2 must have one entry per time");
  for (int t = 0; t < T_; ++t)
    if (!(sigma2(t) > 0.0)) throw InputError("sigma2 must be positive at every time");
  if (mu0.size() != n_) throw InputError("mu0 must have length n");
  if (sigma0.rows() != n_ || sigma0.cols() != n_) throw InputError("sigma0 must be n x n");
  if (mask.size() > 0 && (mask.rows() != n_ || mask.cols() != T_))
    throw InputError("mask dimensions do not match y");
}

FilterOutput kalman_filter(const StateSpaceInputs& in) {
  in.validate();
  const int n = in.n(), T = in.T();
  const double a = in.alpha, g = in.g;

  FilterOutput out;
  out.z_pred.resize(T);
  out.p_pred.resize(T);
  out.z_filt.resize(T);
  out.p_filt.resize(T);
  out.innovation.resize(T);
  out.innovation_cov.resize(T);
  out.observed_idx.resize(T);

  Eigen::VectorXd z = in.mu0;
  Eigen::MatrixXd p = in.sigma0;
  double loglik = 0.0;

  for (int t = 0; t < T; ++t) {
    // predict
    Eigen::VectorXd zp = g * z;
    Eigen::MatrixXd pp = g * g * p + in.sigma_eta;
    out.max_presym_asymmetry = std::max(out.max_presym_asymmetry, symmetrize(pp));
    out.z_pred[t] = zp;
    out.p_pred[t] = pp;

    const std::vector<int> obs = observed_rows(in, t);
    out.observed_idx[t] = obs;
    const int m = static_cast<int>(obs.size());
    if (m == 0) {
      out.z_filt[t] = zp;
      out.p_filt[t] = pp;
      out.innovation[t] = Eigen::VectorXd();
      out.innovation_cov[t] = Eigen::MatrixXd();
      z = zp;
      p = pp;
      continue;
    }

    // row selection for the observed part of the measurement equation
    Eigen::VectorXd v(m);
    Eigen::MatrixXd pc(n, m);  // P_{t|t-1} columns at observed rows
    for (int k = 0; k < m; ++k) {
      const int i = obs[k];
      v(k) = in.y(i, t) - in.offset(i, t) - a * zp(i);
      pc.col(k) = pp.col(i);
    }
    Eigen::MatrixXd s(m, m);
    for (int k = 0; k < m; ++k)
      for (int l = 0; l < m; ++l) s(k, l) = a * a * pp(obs[k], obs[l]);
    s.diagonal().array() += in.sigma2(t) + 1e-10;  // same jitter as the correlation factorizations
    symmetrize(s);

    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success)
      throw NumericalError("innovation covariance not positive definite at time index " +
                           std::to_string(t));

    const Eigen::MatrixXd gain = a * llt.solve(pc.transpose()).transpose();  // n x m
    z = zp + gain * v;
    p = pp - gain * (a * pc.transpose());
    out.max_presym_asymmetry = std::max(out.max_presym_asymmetry, symmetrize(p));

    const Eigen::VectorXd sv = llt.solve(v);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    loglik += -0.5 * (m * std::log(2.0 * std::numbers::pi) + logdet + v.dot(sv));

    out.z_filt[t] = z;
    out.p_filt[t] = p;
    out.innovation[t] = v;
    out.innovation_cov[t] = s;
  }

  out.loglik = loglik;
  return out;
}

SmootherOutput kalman_smooth(const StateSpaceInputs& in) {
  const FilterOutput f = kalman_filter(in);
  const int n = in.n(), T = in.T();
  const double a = in.alpha, g = in.g;

  SmootherOutput out;
  out.z_smooth.resize(T);
  out.p_smooth.resize(T);
  out.lag_one.resize(T);
  out.loglik = f.loglik;
  out.max_presym_asymmetry = f.max_presym_asymmetry;

  // Rauch-Tung-Striebel backward pass, with t = 0 handled from the prior.
  // smoother gain J_t = P_{t|t} g P_{t+1|t}^{-1}
  std::vector<Eigen::MatrixXd> smoother_gain(T);  // J_{t-1} stored at index t
  out.z_smooth[T - 1] = f.z_filt[T - 1];
  out.p_smooth[T - 1] = f.p_filt[T - 1];

  for (int t = T - 2; t >= -1; --t) {
    const Eigen::VectorXd& z_here = (t >= 0) ? f.z_filt[t] : in.mu0;
    const Eigen::MatrixXd& p_here = (t >= 0) ? f.p_filt[t] : in.sigma0;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(f.p_pred[t + 1]);
    const Eigen::MatrixXd j = g * ldlt.solve(p_here).transpose();  // P g P_pred^{-1}
    smoother_gain[t + 1] = j;

    const Eigen::VectorXd& z_next = out.z_smooth[t + 1];
    const Eigen::MatrixXd& p_next = out.p_smooth[t + 1];
    Eigen::VectorXd zs = z_here + j * (z_next - f.z_pred[t + 1]);
    Eigen::MatrixXd ps = p_here + j * (p_next - f.p_pred[t + 1]) * j.transpose();
    out.max_presym_asymmetry = std::max(out.max_presym_asymmetry, symmetrize(ps));

    if (t >= 0) {
      out.z_smooth[t] = zs;
      out.p_smooth[t] = ps;
    } else {
      out.z0_smooth = zs;
      out.p0_smooth = ps;
    }
  }

  // lag-one covariance smoother, initialized at the final time from the
  // filtered gain: P_{T,T-1|T} = (I - K_T H_T) g P_{T-1|T-1}
  {
    const std::vector<int>& obs = f.observed_idx[T - 1];
    Eigen::MatrixXd ikh = Eigen::MatrixXd::Identity(n, n);
    if (!obs.empty()) {
      const int m = static_cast<int>(obs.size());
      Eigen::MatrixXd pc(n, m);
      for (int k = 0; k < m; ++k) pc.col(k) = f.p_pred[T - 1].col(obs[k]);
      Eigen::LLT<Eigen::MatrixXd> llt(f.innovation_cov[T - 1]);
      const Eigen::MatrixXd gain = a * llt.solve(pc.transpose()).transpose();
      // K_T H_T with H_T = alpha * row-selection
      Eigen::MatrixXd kh = Eigen::MatrixXd::Zero(n, n);
      for (int k = 0; k < m; ++k) kh.col(obs[k]) = a * gain.col(k);
      ikh -= kh;
    }
    const Eigen::MatrixXd p_prev = (T >= 2) ? f.p_filt[T - 2] : in.sigma0;
    out.lag_one[T - 1] = ikh * (g * p_prev);
  }
  for (int t = T - 2; t >= 0; --t) {
    const Eigen::MatrixXd& p_filt_t = f.p_filt[t];
    const Eigen::MatrixXd& j_prev = smoother_gain[t];      // J_{t-1}
    const Eigen::MatrixXd& j_here = smoother_gain[t + 1];  // J_t
    out.lag_one[t] = p_filt_t * j_prev.transpose() +
                     j_here * (out.lag_one[t + 1] - g * p_filt_t) * j_prev.transpose();
  }

  out.s11 = Eigen::MatrixXd::Zero(n, n);
  out.s10 = Eigen::MatrixXd::Zero(n, n);
  out.s00 = Eigen::MatrixXd::Zero(n, n);
  for (int t = 0; t < T; ++t) {
    const Eigen::VectorXd& zt = out.z_smooth[t];
    const Eigen::VectorXd& zm = (t >= 1) ? out.z_smooth[t - 1] : out.z0_smooth;
    const Eigen::MatrixXd& pm = (t >= 1) ? out.p_smooth[t - 1] : out.p0_smooth;
    out.s11 += zt * zt.transpose() + out.p_smooth[t];
    out.s10 += zt * zm.transpose() + out.lag_one[t];
    out.s00 += zm * zm.transpose() + pm;
  }
  symmetrize(out.s11);
  symmetrize(out.s00);

  return out;
}

double observed_loglik(const StateSpaceInputs& in) { return kalman_filter(in).loglik; }

}  // namespace hdgm
