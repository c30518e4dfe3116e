#pragma once

// Synthetic epidemics driven by the transmission equation
//   (1 - c_{t+1}) / (1 - c_t) = exp(-beta_t i_t),  beta_t / gamma = alpha_j + psi'x_{t-p}
//                                                    + kappa I(thr_{t-p} > tau) + u_t
// with reported cases = true cases / MF_t, plus a chain-binomial check of the moment condition.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "r0panel/date.hpp"
#include "r0panel/epi_transform.hpp"
#include "r0panel/error.hpp"
#include "r0panel/ingest.hpp"
#include "r0panel/panel.hpp"

namespace r0panel {

/// x_t = clamp(mean + phi (x_{t-1} - mean) + sd e_t, lo, hi); sd = 0 gives a constant path.
struct CovariateProcess {
  std::string name;
  double mean = 0.5;
  double phi = 0.9;
  double sd = 0.02;
  double lo = 0.0;
  double hi = 1.0;
};

struct SimConfig {
  std::size_t n_regions = 10;
  std::int64_t population = 10'000'000;
  std::size_t horizon = 200;
  double gamma = kRecoveryRate;
  std::vector<double> alpha; ///< one per region; empty = evenly spread over [3, 6]
  std::vector<double> psi{-1.3, -0.4};
  double kappa = -2.3;
  double tau = 0.40;
  /// One per psi entry.
  std::vector<CovariateProcess> covariates = default_processes();
  double noise_sd = 0.0;
  double mf_start = 1.0;
  double mf_end = 1.0;
  int lag_p = 10;
  double initial_share = 2e-7; ///< true per-capita cases on day 0
  long stagger = 2;            ///< region j starts j * stagger days after `start`
  Date start{std::chrono::year{2020} / 3 / 6};
  std::uint64_t seed = 1;

  std::vector<double> resolved_alpha() const {
    if (!alpha.empty()) return alpha;
    std::vector<double> a(n_regions);
    for (std::size_t j = 0; j < n_regions; ++j)
      a[j] = n_regions > 1 ? 3.0 + 3.0 * double(j) / double(n_regions - 1) : 4.5;
    return a;
  }

  /// Stringency and economic support shaped like the observed indices (means 0.62 and 0.45).
  static std::vector<CovariateProcess> default_processes() {
    return {{column::kStringency, 0.62, 0.95, 0.02, 0.0, 1.0},
            {column::kEconSupport, 0.45, 0.95, 0.02, 0.0, 1.0}};
  }

  std::vector<std::string> covariate_names() const {
    std::vector<std::string> out;
    for (const auto& c : covariates) out.push_back(c.name);
    return out;
  }

  void validate() const {
    if (n_regions == 0) throw InputError("simulation needs at least one region");
    if (population <= 0) throw InputError("population must be positive");
    if (horizon < 30) throw InputError("simulation horizon must be at least 30 days");
    if (!(gamma > 0.0 && gamma < 1.0)) throw InputError("gamma must be in (0, 1)");
    if (!alpha.empty() && alpha.size() != n_regions) throw InputError("need one alpha per region");
    for (double a : resolved_alpha())
      if (!(a > 0.0)) throw InputError("alpha must be positive");
    if (covariates.size() != psi.size()) throw InputError("need one covariate process per psi entry");
    if (!(tau >= 0.0)) throw InputError("tau must be non-negative");
    if (!(noise_sd >= 0.0)) throw InputError("noise sd must be non-negative");
    if (!(mf_start >= 1.0 && mf_end >= 1.0)) throw InputError("MF must be >= 1");
    if (lag_p < 0) throw InputError("lag_p must be non-negative");
    if (!(initial_share > 0.0 && initial_share < 1.0)) throw InputError("initial share must be in (0, 1)");
    for (const auto& c : covariates)
      if (c.name.empty() || !(c.lo <= c.hi) || !(c.sd >= 0.0)) throw InputError("bad covariate process '" + c.name + "'");
  }
};

struct RegionTruth {
  std::string region_id;
  double alpha = 0.0;
  std::size_t beta_floored = 0; ///< days where the linear index was negative and beta set to 0
  bool halted = false;          ///< cumulative share reached 1
  std::size_t length = 0;
};

struct SimOutput {
  std::vector<ingest::ReportedSeries> cases;
  CovariateTable covariates;
  std::vector<RegionTruth> truth;
  SimConfig config;
};

inline std::string sim_region_id(std::size_t j) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "SIM%03u", unsigned(j % 1000));
  return buf;
}

inline SimOutput simulate_panel(const SimConfig& cfg) {
  cfg.validate();
  SimOutput out;
  out.config = cfg;
  const auto alpha = cfg.resolved_alpha();
  const auto T = cfg.horizon;
  const long p = cfg.lag_p;
  const double pop = static_cast<double>(cfg.population);
  for (const auto& c : cfg.covariates) out.covariates.ensure_column(c.name);

  for (std::size_t j = 0; j < cfg.n_regions; ++j) {
    std::seed_seq seq{std::uint64_t(cfg.seed), std::uint64_t(j), std::uint64_t(0x5eed)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> N(0.0, 1.0);
    RegionTruth truth{sim_region_id(j), alpha[j], 0, false, T};
    const Date start = add_days(cfg.start, long(j) * cfg.stagger);

    // Covariates on days -p .. T-1 relative to the region start.
    std::vector<std::vector<double>> x(cfg.covariates.size(), std::vector<double>(T + std::size_t(p)));
    for (std::size_t k = 0; k < cfg.covariates.size(); ++k) {
      const auto& proc = cfg.covariates[k];
      double v = proc.mean;
      for (std::size_t s = 0; s < x[k].size(); ++s) {
        v = std::clamp(proc.mean + proc.phi * (v - proc.mean) + proc.sd * N(rng), proc.lo, proc.hi);
        x[k][s] = v;
        out.covariates.set(truth.region_id, add_days(start, long(s) - p), proc.name, v);
      }
    }
    const auto mf = schedule_for({cfg.mf_start, cfg.mf_end, std::nullopt}, start, T).values;

    std::vector<double> dc(T, 0.0), reported(T, 0.0);
    double c = cfg.initial_share, i = cfg.initial_share;
    dc[0] = cfg.initial_share;
    reported[0] = dc[0] * pop / mf[0];
    std::size_t len = T;
    for (std::size_t t = 0; t + 1 < T; ++t) {
      const long lagged = long(t) - p;
      const double thr = lagged >= 0 ? per_100k(reported[std::size_t(lagged)], cfg.population) : 0.0;
      double y = alpha[j] + (thr > cfg.tau ? cfg.kappa : 0.0);
      for (std::size_t k = 0; k < cfg.psi.size(); ++k) y += cfg.psi[k] * x[k][t]; // dated t - p
      if (cfg.noise_sd > 0.0) y += cfg.noise_sd * N(rng);
      if (y < 0.0) {
        y = 0.0;
        ++truth.beta_floored;
      }
      const double next = (1.0 - c) * -std::expm1(-cfg.gamma * y * i);
      if (!(c + next < 1.0)) {
        truth.halted = true;
        len = t + 1;
        break;
      }
      dc[t + 1] = next;
      c += next;
      i = (1.0 - cfg.gamma) * i + next;
      reported[t + 1] = next * pop / mf[t + 1];
    }
    truth.length = len;
    ingest::ReportedSeries s{truth.region_id, cfg.population, start, {}};
    for (std::size_t t = 0; t < len; ++t) s.new_cases.push_back(reported[t]);
    out.cases.push_back(std::move(s));
    out.truth.push_back(truth);
  }
  return out;
}

inline nlohmann::json truth_json(const SimOutput& sim) {
  using nlohmann::json;
  const auto& cfg = sim.config;
  json j = json::object();
  json regions = json::array();
  for (const auto& r : sim.truth)
    regions.push_back({{"region_id", r.region_id}, {"alpha", r.alpha}, {"beta_floored", r.beta_floored},
                       {"halted", r.halted}, {"length", r.length}});
  json psi = json::object();
  for (std::size_t k = 0; k < cfg.psi.size(); ++k) psi[cfg.covariates[k].name] = cfg.psi[k];
  j["regions"] = regions;
  j["psi"] = psi;
  j["kappa"] = cfg.kappa;
  j["tau"] = cfg.tau;
  j["gamma"] = cfg.gamma;
  j["lag_p"] = cfg.lag_p;
  j["noise_sd"] = cfg.noise_sd;
  j["mf"] = {{"start", cfg.mf_start}, {"end", cfg.mf_end}};
  j["seed"] = cfg.seed;
  return j;
}

// ---- moment condition ----

struct MomentRow {
  std::int64_t n = 0;
  double deviation = 0.0;      ///< mean |E[S_{t+1}/S_t | I_t] - exp(-beta I_t / n)| over visited states
  double raw_deviation = 0.0;  ///< mean of S_{t+1}/S_t - exp(-beta i_t) over all steps
  double raw_std_error = 0.0;
  std::size_t steps = 0;
};

struct MomentConfig {
  double beta = 0.25;
  double gamma = kRecoveryRate;
  double initial_share = 0.01;
  std::size_t days = 120;
  std::size_t paths = 200;
  std::uint64_t seed = 7;
};

/// Reed-Frost chain binomial: each susceptible escapes each infective with probability
/// 1 - beta/n, so S_{t+1} | S_t, I_t ~ Bin(S_t, (1 - beta/n)^{I_t}) and recoveries are
/// Bin(I_t, gamma). The conditional mean is known in closed form at every visited state, which
/// removes the sampling noise that would otherwise swamp an O(1/n) bias.
inline MomentRow moment_check_at(std::int64_t n, const MomentConfig& mc) {
  if (n < 10) throw InputError("population too small for the moment check");
  std::mt19937_64 rng(mc.seed ^ static_cast<std::uint64_t>(n));
  MomentRow row;
  row.n = n;
  double dev = 0.0, raw = 0.0, raw_sq = 0.0;
  const double escape = std::log1p(-mc.beta / double(n));
  for (std::size_t path = 0; path < mc.paths; ++path) {
    std::int64_t I = std::max<std::int64_t>(1, std::llround(mc.initial_share * double(n)));
    std::int64_t S = n - I;
    for (std::size_t t = 0; t < mc.days && I > 0 && S > 0; ++t) {
      const double exact = std::exp(double(I) * escape);
      const double approx = std::exp(-mc.beta * double(I) / double(n));
      std::binomial_distribution<std::int64_t> stay(S, exact);
      std::binomial_distribution<std::int64_t> recover(I, mc.gamma);
      const std::int64_t s_next = stay(rng);
      const std::int64_t r = recover(rng);
      const double ratio = double(s_next) / double(S);
      dev += std::abs(exact - approx);
      raw += ratio - approx;
      raw_sq += (ratio - approx) * (ratio - approx);
      ++row.steps;
      I += (S - s_next) - r;
      S = s_next;
    }
  }
  const double m = double(row.steps);
  row.deviation = dev / m;
  row.raw_deviation = raw / m;
  row.raw_std_error = std::sqrt(std::max(0.0, raw_sq / m - row.raw_deviation * row.raw_deviation) / m);
  return row;
}

inline std::vector<MomentRow> moment_check(const std::vector<std::int64_t>& n_grid,
                                           const MomentConfig& mc = {}) {
  std::vector<MomentRow> out;
  for (auto n : n_grid) out.push_back(moment_check_at(n, mc));
  return out;
}

/// Least-squares slope of log(deviation) on log(n).
inline double log_log_slope(const std::vector<MomentRow>& rows) {
  if (rows.size() < 2) throw InputError("need at least two population sizes");
  double mx = 0, my = 0;
  for (const auto& r : rows) mx += std::log(double(r.n)), my += std::log(r.deviation);
  mx /= double(rows.size());
  my /= double(rows.size());
  double sxy = 0, sxx = 0;
  for (const auto& r : rows) {
    const double dx = std::log(double(r.n)) - mx;
    sxy += dx * (std::log(r.deviation) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

} // namespace r0panel
