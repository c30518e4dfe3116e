#pragma once

// Coefficient covariances for the fixed-effects fit on the dummy-augmented design
// [region dummies | slopes]: classical, Newey-West (within-region serial correlation) and
// Driscoll-Kraay (date-aggregated moments, cross-sectional and serial correlation).

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "r0panel/error.hpp"
#include "r0panel/fixed_effects.hpp"
#include "r0panel/panel.hpp"

namespace r0panel {

/// floor(T^(1/3)) in exact integer arithmetic.
inline int truncation_lag_for_span(long t_max) {
  if (t_max < 1) throw InputError("time span must be positive");
  int lag = 0;
  while (static_cast<long>(lag + 1) * (lag + 1) * (lag + 1) <= t_max) ++lag;
  return lag;
}

/// Truncation lag from the longest per-region time span of the panel.
inline int default_truncation_lag(const Panel& panel) {
  if (panel.obs.empty()) throw InputError("empty panel");
  auto spans = panel.region_spans();
  return truncation_lag_for_span(*std::max_element(spans.begin(), spans.end()));
}

inline double bartlett_weight(int lag, int truncation) {
  return 1.0 - static_cast<double>(lag) / static_cast<double>(truncation + 1);
}

/// Design pieces shared by all covariance flavours.
struct FitDesign {
  Eigen::MatrixXd slopes;   ///< N x k non-intercept regressors
  Eigen::VectorXd residuals;
  Eigen::MatrixXd bread;    ///< (X'X)^{-1}, X = [dummies | slopes]
  std::size_t regions = 0;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(regions) + slopes.cols(); }
};

inline FitDesign make_fit_design(const ThresholdFitResult& fit, const Panel& panel) {
  if (fit.residuals.size() != panel.size())
    throw InputError("fit residuals do not match the panel");
  FitDesign d;
  d.regions = panel.regions();
  const bool with_x = !fit.psi_names.empty();
  d.slopes = detail::slope_design(panel, fit.kappa ? fit.tau : std::nullopt, with_x);
  d.residuals = Eigen::Map<const Eigen::VectorXd>(fit.residuals.data(),
                                                  static_cast<Eigen::Index>(fit.residuals.size()));

  // Partitioned inverse of X'X: with A = region means of the slopes and S the within
  // cross-product, the slope block is S^-1, the cross block -A S^-1 and the intercept
  // block diag(1/T_j) + A S^-1 A'.
  const auto n = static_cast<Eigen::Index>(d.regions);
  const auto k = d.slopes.cols();
  Eigen::MatrixXd within = d.slopes;
  Eigen::MatrixXd means = detail::demean(panel, within);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
  for (const auto& o : panel.obs) counts(static_cast<Eigen::Index>(o.region)) += 1.0;

  d.bread = Eigen::MatrixXd::Zero(n + k, n + k);
  Eigen::MatrixXd s_inv = Eigen::MatrixXd::Zero(k, k);
  if (k > 0) {
    Eigen::MatrixXd S = within.transpose() * within;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw EstimationError("singular within cross-product matrix");
    s_inv = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
    s_inv = 0.5 * (s_inv + s_inv.transpose()).eval();
  }
  d.bread.bottomRightCorner(k, k) = s_inv;
  d.bread.topRightCorner(n, k) = -means * s_inv;
  d.bread.bottomLeftCorner(k, n) = d.bread.topRightCorner(n, k).transpose();
  d.bread.topLeftCorner(n, n) = means * s_inv * means.transpose();
  for (Eigen::Index r = 0; r < n; ++r) d.bread(r, r) += 1.0 / counts(r);
  return d;
}

/// sigma^2 (X'X)^{-1}, sigma^2 = RSS / (N - k - n_regions).
inline Eigen::MatrixXd usual_covariance(const FitDesign& d) {
  const double dof = static_cast<double>(d.residuals.size()) - static_cast<double>(d.dim());
  if (dof <= 0.0) throw EstimationError("no residual degrees of freedom");
  const double sigma2 = d.residuals.squaredNorm() / dof;
  return sigma2 * d.bread;
}

namespace detail {

inline void add_lagged(Eigen::MatrixXd& meat, const Eigen::VectorXd& now,
                       const Eigen::VectorXd& before, double w) {
  meat.noalias() += w * (now * before.transpose() + before * now.transpose());
}

inline Eigen::MatrixXd sandwich(const FitDesign& d, const Eigen::MatrixXd& meat) {
  Eigen::MatrixXd v = d.bread * meat * d.bread;
  return 0.5 * (v + v.transpose());
}

} // namespace detail

/// Bartlett-weighted sum of within-region autocovariances of the scores X_i u_i, lags measured
/// in calendar days. No cross-region terms.
inline Eigen::MatrixXd newey_west_meat(const FitDesign& d, const Panel& panel, int lag) {
  if (lag < 0) throw InputError("truncation lag must be non-negative");
  const auto k = d.slopes.cols();
  const auto dim = d.dim();
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(dim, dim);
  for (auto [b, e] : panel.region_ranges()) {
    if (e <= b) continue;
    const auto r = static_cast<Eigen::Index>(panel.obs[b].region);
    const auto len = static_cast<Eigen::Index>(e - b);
    // Compact scores [u, u * w'] for this region; the dummy coordinate is r.
    Eigen::MatrixXd s(len, 1 + k);
    for (Eigen::Index t = 0; t < len; ++t) {
      const double u = d.residuals(static_cast<Eigen::Index>(b) + t);
      s(t, 0) = u;
      s.row(t).tail(k) = u * d.slopes.row(static_cast<Eigen::Index>(b) + t);
    }
    Eigen::MatrixXd local = s.transpose() * s;
    if (lag > 0) {
      std::map<long, Eigen::Index> at;
      const Date origin = panel.obs[b].date;
      for (Eigen::Index t = 0; t < len; ++t)
        at[days_between(origin, panel.obs[b + static_cast<std::size_t>(t)].date)] = t;
      for (Eigen::Index t = 0; t < len; ++t) {
        const long day = days_between(origin, panel.obs[b + static_cast<std::size_t>(t)].date);
        for (int l = 1; l <= lag; ++l) {
          auto it = at.find(day - l);
          if (it == at.end()) continue;
          detail::add_lagged(local, s.row(t).transpose(), s.row(it->second).transpose(),
                             bartlett_weight(l, lag));
        }
      }
    }
    // Scatter into the full (dummies | slopes) layout.
    std::vector<Eigen::Index> idx{r};
    for (Eigen::Index j = 0; j < k; ++j) idx.push_back(static_cast<Eigen::Index>(d.regions) + j);
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t c = 0; c < idx.size(); ++c)
        meat(idx[a], idx[c]) += local(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c));
  }
  return meat;
}

/// Bartlett-weighted autocovariances of h_t = sum over regions present on date t of X_i u_i.
/// Calendar dates with no observations contribute h_t = 0.
inline Eigen::MatrixXd driscoll_kraay_meat(const FitDesign& d, const Panel& panel, int lag) {
  if (lag < 0) throw InputError("truncation lag must be non-negative");
  const auto k = d.slopes.cols();
  const auto dim = d.dim();
  Date first = panel.obs.front().date, last = first;
  for (const auto& o : panel.obs) {
    first = std::min(first, o.date);
    last = std::max(last, o.date);
  }
  const long days = days_between(first, last) + 1;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, days);
  std::vector<bool> present(static_cast<std::size_t>(days), false);
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const auto& o = panel.obs[i];
    const long t = days_between(first, o.date);
    const double u = d.residuals(static_cast<Eigen::Index>(i));
    h(static_cast<Eigen::Index>(o.region), t) += u;
    h.col(t).tail(k) += u * d.slopes.row(static_cast<Eigen::Index>(i)).transpose();
    present[static_cast<std::size_t>(t)] = true;
  }
  Eigen::MatrixXd meat = h * h.transpose();
  for (int l = 1; l <= lag; ++l) {
    const double w = bartlett_weight(l, lag);
    for (long t = l; t < days; ++t) {
      if (!present[static_cast<std::size_t>(t)] || !present[static_cast<std::size_t>(t - l)]) continue;
      detail::add_lagged(meat, h.col(t), h.col(t - l), w);
    }
  }
  return meat;
}

inline Eigen::MatrixXd usual_se(const ThresholdFitResult& fit, const Panel& panel) {
  return usual_covariance(make_fit_design(fit, panel));
}

inline Eigen::MatrixXd newey_west_se(const ThresholdFitResult& fit, const Panel& panel, int lag) {
  auto d = make_fit_design(fit, panel);
  return detail::sandwich(d, newey_west_meat(d, panel, lag));
}

inline Eigen::MatrixXd driscoll_kraay_se(const ThresholdFitResult& fit, const Panel& panel,
                                         int lag) {
  auto d = make_fit_design(fit, panel);
  return detail::sandwich(d, driscoll_kraay_meat(d, panel, lag));
}

/// Coefficients (region intercepts first, then slopes) with all three covariance flavours.
struct CovarianceReport {
  std::vector<std::string> names;
  std::vector<double> estimates;
  Eigen::MatrixXd usual;
  Eigen::MatrixXd robust1;
  Eigen::MatrixXd robust2;
  int truncation_lag = 0;

  double se(const Eigen::MatrixXd& cov, std::size_t k) const {
    const auto kk = static_cast<Eigen::Index>(k);
    return std::sqrt(std::max(0.0, cov(kk, kk)));
  }
  double t_ratio(const Eigen::MatrixXd& cov, std::size_t k) const {
    const double s = se(cov, k);
    return s > 0.0 ? estimates[k] / s : std::numeric_limits<double>::quiet_NaN();
  }
  std::optional<std::size_t> index_of(const std::string& name) const {
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == name) return k;
    return std::nullopt;
  }
};

inline CovarianceReport covariance_report(const ThresholdFitResult& fit, const Panel& panel,
                                          std::optional<int> lag_override = std::nullopt) {
  auto d = make_fit_design(fit, panel);
  CovarianceReport rep;
  rep.truncation_lag = lag_override ? *lag_override : default_truncation_lag(panel);
  rep.names = fit.region_ids;
  rep.estimates = fit.alpha;
  for (const auto& n : fit.slope_names()) rep.names.push_back(n);
  for (double v : fit.slopes()) rep.estimates.push_back(v);
  rep.usual = usual_covariance(d);
  rep.robust1 = detail::sandwich(d, newey_west_meat(d, panel, rep.truncation_lag));
  rep.robust2 = detail::sandwich(d, driscoll_kraay_meat(d, panel, rep.truncation_lag));
  return rep;
}

} // namespace r0panel
