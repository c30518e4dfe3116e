#pragma once

// Fixed-effects least squares for
//   y_jt = alpha_j + psi' x_{j,t-p} + kappa I(thr_{j,t-p} > tau) + u_jt
// with tau chosen by profiling the residual sum of squares over a grid.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "r0panel/error.hpp"
#include "r0panel/panel.hpp"

namespace r0panel {

inline constexpr const char* kThresholdColumn = "threshold_indicator";

/// Andrews (1993) 5% critical value of the sup-Wald statistic, one restriction, 5% trimming.
inline constexpr double kWeakThresholdCritical = 9.84;

struct ProfilePoint {
  double tau = 0.0;
  double ssr = 0.0;
  bool degenerate = false; ///< indicator absorbed by the fixed effects (or by x) at this tau
};

struct ThresholdFitResult {
  std::optional<double> tau; ///< unset for intercept-only fits
  std::vector<std::string> region_ids;
  std::vector<double> alpha;
  std::vector<std::string> psi_names;
  std::vector<double> psi;
  std::optional<double> kappa; ///< unset when not identified or no threshold term
  double r_squared = 0.0;
  double ssr = 0.0;
  std::vector<double> residuals;
  std::size_t obs_count = 0;
  std::size_t region_count = 0;
  long t_min = 0;
  long t_max = 0;

  std::vector<ProfilePoint> profile;
  bool weak_threshold = false;
  double threshold_f_stat = 0.0;

  /// Names of the non-intercept regressors in design order (psi, then kappa if identified).
  std::vector<std::string> slope_names() const {
    auto out = psi_names;
    if (kappa) out.push_back(kThresholdColumn);
    return out;
  }
  std::vector<double> slopes() const {
    auto out = psi;
    if (kappa) out.push_back(*kappa);
    return out;
  }
  double alpha_of(const std::string& region) const {
    for (std::size_t k = 0; k < region_ids.size(); ++k)
      if (region_ids[k] == region) return alpha[k];
    throw InputError("unknown region '" + region + "'");
  }
};

namespace detail {

inline bool indicator(double thr, double tau) { return thr > tau; }

/// Non-intercept design: panel covariates, then the threshold indicator if requested.
inline Eigen::MatrixXd slope_design(const Panel& panel, std::optional<double> tau,
                                    bool include_x = true) {
  const auto n = static_cast<Eigen::Index>(panel.size());
  const auto m = include_x ? static_cast<Eigen::Index>(panel.regressor_names.size()) : 0;
  Eigen::MatrixXd W(n, m + (tau ? 1 : 0));
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& o = panel.obs[static_cast<std::size_t>(r)];
    for (Eigen::Index k = 0; k < m; ++k) W(r, k) = o.x[static_cast<std::size_t>(k)];
    if (tau) W(r, m) = indicator(o.thr_var, *tau) ? 1.0 : 0.0;
  }
  return W;
}

/// Subtracts region means in place; returns the means (regions x columns).
inline Eigen::MatrixXd demean(const Panel& panel, Eigen::MatrixXd& M) {
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(panel.regions()), M.cols());
  for (auto [b, e] : panel.region_ranges()) {
    if (e <= b) continue;
    const auto r = static_cast<Eigen::Index>(panel.obs[b].region);
    const auto len = static_cast<Eigen::Index>(e - b);
    auto block = M.middleRows(static_cast<Eigen::Index>(b), len);
    means.row(r) = block.colwise().mean();
    block.rowwise() -= means.row(r);
  }
  return means;
}

inline Eigen::VectorXd response(const Panel& panel) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(panel.size()));
  for (std::size_t k = 0; k < panel.size(); ++k) y(static_cast<Eigen::Index>(k)) = panel.obs[k].y;
  return y;
}

inline void check_panel_for_fit(const Panel& panel) {
  panel.validate();
  if (panel.obs.empty()) throw EstimationError("empty panel");
  for (auto [b, e] : panel.region_ranges())
    if (e - b < 2) throw EstimationError("every region needs at least 2 observations");
}

/// Within estimator on a given slope design. Drops nothing; rank problems throw.
inline ThresholdFitResult within_fit(const Panel& panel, Eigen::MatrixXd W,
                                     std::vector<std::string> names) {
  Eigen::VectorXd y = response(panel);
  Eigen::MatrixXd ym = y;
  Eigen::MatrixXd ybar = demean(panel, ym);
  Eigen::MatrixXd wbar = demean(panel, W);
  Eigen::VectorXd yt = ym.col(0);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(W.cols());
  if (W.cols() > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(W);
    qr.setThreshold(1e-10);
    if (qr.rank() < W.cols()) {
      std::vector<std::string> bad;
      const auto& perm = qr.colsPermutation().indices();
      for (Eigen::Index k = qr.rank(); k < W.cols(); ++k)
        bad.push_back(names[static_cast<std::size_t>(perm(k))]);
      std::sort(bad.begin(), bad.end());
      std::string msg = "rank-deficient design after within-transformation; collinear columns:";
      for (const auto& b : bad) msg += " " + b;
      throw RankDeficiencyError(msg, bad);
    }
    beta = qr.solve(yt);
  }

  ThresholdFitResult fit;
  fit.region_ids = panel.region_ids;
  fit.region_count = panel.regions();
  fit.obs_count = panel.size();
  fit.alpha.resize(panel.regions());
  for (std::size_t r = 0; r < panel.regions(); ++r) {
    const auto rr = static_cast<Eigen::Index>(r);
    fit.alpha[r] = ybar(rr, 0) - (W.cols() > 0 ? wbar.row(rr).dot(beta) : 0.0);
  }
  Eigen::VectorXd u = yt - W * beta;
  fit.residuals.assign(u.data(), u.data() + u.size());
  fit.ssr = u.squaredNorm();
  const double tss = yt.squaredNorm();
  fit.r_squared = tss > 0.0 ? std::clamp(1.0 - fit.ssr / tss, 0.0, 1.0) : 1.0;
  auto spans = panel.region_spans();
  fit.t_min = *std::min_element(spans.begin(), spans.end());
  fit.t_max = *std::max_element(spans.begin(), spans.end());
  fit.psi_names = std::move(names);
  fit.psi.assign(beta.data(), beta.data() + beta.size());
  return fit;
}

inline bool indicator_absorbed(const Panel& panel, double tau) {
  for (auto [b, e] : panel.region_ranges()) {
    const bool first = indicator(panel.obs[b].thr_var, tau);
    for (std::size_t k = b + 1; k < e; ++k)
      if (indicator(panel.obs[k].thr_var, tau) != first) return false;
  }
  return true;
}

} // namespace detail

/// Fixed-effects fit at a given threshold. An indicator that is constant within every region
/// is absorbed by the intercepts: it is dropped and kappa is left unset.
inline ThresholdFitResult fit_fixed_effects(const Panel& panel, double tau) {
  detail::check_panel_for_fit(panel);
  const bool absorbed = detail::indicator_absorbed(panel, tau);
  auto names = panel.regressor_names;
  if (!absorbed) names.push_back(kThresholdColumn);
  auto W = detail::slope_design(panel, absorbed ? std::nullopt : std::optional<double>(tau));
  auto fit = detail::within_fit(panel, std::move(W), std::move(names));
  fit.tau = tau;
  if (!absorbed) {
    fit.kappa = fit.psi.back();
    fit.psi.pop_back();
    fit.psi_names.pop_back();
  }
  return fit;
}

/// Intercept-only fit (all mitigating factors and the threshold term removed).
inline ThresholdFitResult counterfactual_fit(const Panel& panel) {
  detail::check_panel_for_fit(panel);
  return detail::within_fit(panel, Eigen::MatrixXd(static_cast<Eigen::Index>(panel.size()), 0), {});
}

/// SSR at every grid point, by partialling the indicator out of the covariate-only fit.
/// Observations are swept once in decreasing order of the threshold variable.
inline std::vector<ProfilePoint> threshold_profile(const Panel& panel, std::vector<double> grid,
                                                   double* ssr_without_threshold = nullptr) {
  detail::check_panel_for_fit(panel);
  if (grid.empty()) throw InputError("tau grid is empty");
  if (!std::is_sorted(grid.begin(), grid.end())) throw InputError("tau grid must be sorted");
  for (double t : grid)
    if (!(t >= 0.0)) throw InputError("tau grid values must be non-negative");

  Eigen::MatrixXd W = detail::slope_design(panel, std::nullopt);
  Eigen::MatrixXd ym = detail::response(panel);
  detail::demean(panel, ym);
  detail::demean(panel, W);
  const auto m = W.cols();
  Eigen::VectorXd e = ym.col(0);
  Eigen::MatrixXd gram_inv = Eigen::MatrixXd::Zero(m, m);
  if (m > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(W);
    qr.setThreshold(1e-10);
    if (qr.rank() < m) {
      std::vector<std::string> bad;
      const auto& perm = qr.colsPermutation().indices();
      for (Eigen::Index k = qr.rank(); k < m; ++k)
        bad.push_back(panel.regressor_names[static_cast<std::size_t>(perm(k))]);
      std::sort(bad.begin(), bad.end());
      std::string msg = "rank-deficient design after within-transformation; collinear columns:";
      for (const auto& b : bad) msg += " " + b;
      throw RankDeficiencyError(msg, bad);
    }
    e -= W * qr.solve(e);
    gram_inv = (W.transpose() * W).ldlt().solve(Eigen::MatrixXd::Identity(m, m));
  }
  const double ssr0 = e.squaredNorm();
  if (ssr_without_threshold) *ssr_without_threshold = ssr0;

  std::vector<std::size_t> order(panel.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return panel.obs[a].thr_var > panel.obs[b].thr_var;
  });
  std::vector<double> region_len(panel.regions(), 0.0), region_hits(panel.regions(), 0.0);
  for (const auto& o : panel.obs) region_len[o.region] += 1.0;

  std::vector<ProfilePoint> out(grid.size());
  Eigen::VectorXd a = Eigen::VectorXd::Zero(m); // sum of demeaned x over obs above tau
  double b = 0.0;                               // sum of residuals over obs above tau
  double hits = 0.0, hits_sq_over_len = 0.0;
  std::size_t next = 0;
  for (std::size_t g = grid.size(); g-- > 0;) {
    const double tau = grid[g];
    while (next < order.size() && detail::indicator(panel.obs[order[next]].thr_var, tau)) {
      const std::size_t k = order[next++];
      const std::size_t r = panel.obs[k].region;
      hits_sq_over_len -= region_hits[r] * region_hits[r] / region_len[r];
      region_hits[r] += 1.0;
      hits_sq_over_len += region_hits[r] * region_hits[r] / region_len[r];
      hits += 1.0;
      if (m > 0) a += W.row(static_cast<Eigen::Index>(k)).transpose();
      b += e(static_cast<Eigen::Index>(k));
    }
    // ||demeaned indicator||^2, then its part orthogonal to the demeaned covariates.
    const double dd = hits - hits_sq_over_len;
    const double den = m > 0 ? dd - a.dot(gram_inv * a) : dd;
    ProfilePoint p{tau, ssr0, false};
    if (dd <= 1e-9 || den <= 1e-9 * std::max(1.0, dd)) {
      p.degenerate = true;
    } else {
      p.ssr = std::max(0.0, ssr0 - b * b / den);
    }
    out[g] = p;
  }
  return out;
}

/// Profile least squares over `grid`; ties go to the smallest tau.
inline ThresholdFitResult profile_threshold_search(const Panel& panel,
                                                   const std::vector<double>& grid) {
  double ssr0 = 0.0;
  auto profile = threshold_profile(panel, grid, &ssr0);
  std::size_t best = 0;
  for (std::size_t g = 1; g < profile.size(); ++g)
    if (profile[g].ssr < profile[best].ssr) best = g;

  auto fit = fit_fixed_effects(panel, profile[best].tau);
  fit.profile = std::move(profile);

  const double ssr_min = fit.profile[best].ssr;
  const double gain = ssr0 - ssr_min;
  const double dof = static_cast<double>(fit.obs_count) - static_cast<double>(fit.region_count) -
                     static_cast<double>(fit.psi.size()) - 1.0;
  if (fit.profile[best].degenerate || gain <= 1e-12 * std::max(ssr0, 1e-300)) {
    fit.threshold_f_stat = 0.0;
  } else if (ssr_min <= 0.0 || dof <= 0.0) {
    fit.threshold_f_stat = std::numeric_limits<double>::infinity();
  } else {
    fit.threshold_f_stat = gain / (ssr_min / dof);
  }
  fit.weak_threshold = fit.threshold_f_stat < kWeakThresholdCritical;
  return fit;
}

/// Grid on multiples of 0.01 between the 1st and 99th percentiles of the pooled threshold
/// variable, plus 0.01, 0.40 and 0.70.
inline std::vector<double> default_tau_grid(const Panel& panel) {
  std::vector<double> q;
  q.reserve(panel.size());
  for (const auto& o : panel.obs) q.push_back(o.thr_var);
  std::vector<long> ticks{1, 40, 70};
  if (!q.empty()) {
    std::sort(q.begin(), q.end());
    auto quantile = [&](double p) {
      double h = p * static_cast<double>(q.size() - 1);
      auto lo = static_cast<std::size_t>(std::floor(h));
      auto hi = std::min(lo + 1, q.size() - 1);
      return q[lo] + (h - static_cast<double>(lo)) * (q[hi] - q[lo]);
    };
    const long lo = std::max(0L, static_cast<long>(std::ceil(quantile(0.01) * 100.0 - 1e-9)));
    const long hi = static_cast<long>(std::floor(quantile(0.99) * 100.0 + 1e-9));
    for (long k = lo; k <= hi; ++k) ticks.push_back(k);
  }
  std::sort(ticks.begin(), ticks.end());
  ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());
  std::vector<double> grid;
  grid.reserve(ticks.size());
  for (long k : ticks) grid.push_back(static_cast<double>(k) / 100.0);
  return grid;
}

/// Parses "lo:hi:step" or a comma-separated list of values.
inline std::vector<double> parse_tau_grid(const std::string& text) {
  std::vector<double> grid;
  auto snap = [](double v) { return std::round(v * 1e10) / 1e10; };
  if (text.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto next = text.find(':', pos);
      auto tok = text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
      auto v = csv::parse_double(tok);
      if (!v) throw InputError("bad tau grid '" + text + "'");
      parts.push_back(*v);
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0])
      throw InputError("tau grid must be lo:hi:step with step > 0");
    const auto n = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
    for (long k = 0; k <= n; ++k) grid.push_back(snap(parts[0] + static_cast<double>(k) * parts[2]));
  } else {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto next = text.find(',', pos);
      auto tok = text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
      auto v = csv::parse_double(tok);
      if (!v) throw InputError("bad tau grid '" + text + "'");
      grid.push_back(*v);
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  }
  for (double t : grid)
    if (t < 0.0) throw InputError("tau grid values must be non-negative");
  return grid;
}

} // namespace r0panel
