#pragma once

// Reported case counts -> per-capita cumulative cases c_t, active infections i_t and the
// scaled transmission rate beta_t / gamma that serves as the regression's dependent variable.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "r0panel/date.hpp"
#include "r0panel/error.hpp"

namespace r0panel {

/// Calibrated recovery rate (per day): a 14-day mean infectious period.
inline constexpr double kRecoveryRate = 1.0 / 14.0;

inline constexpr int kSmoothingWindow = 7;

/// Raw reported daily new cases for one region on a contiguous daily calendar.
struct RegionSeries {
  std::string region_id;
  std::int64_t population = 0;
  Date start{};
  std::vector<double> new_cases;

  std::size_t size() const noexcept { return new_cases.size(); }
  Date date_at(std::size_t k) const { return add_days(start, static_cast<long>(k)); }
  Date end() const { return date_at(size() - 1); }

  void validate() const {
    if (population <= 0) throw InputError(region_id + ": population must be positive");
    for (double v : new_cases)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw InputError(region_id + ": reported new cases must be finite and non-negative");
  }
};

/// Multiplication factor (true / reported cases) per day, linear between the endpoints.
struct MFSchedule {
  double mf_start = 1.0;
  double mf_end = 1.0;
  std::vector<double> values;
};

enum class MfOrder { SmoothThenScale, ScaleThenSmooth };

inline double per_100k(double cases, std::int64_t population) {
  return cases * 1e5 / static_cast<double>(population);
}

/// Trailing seven-day mean; the first six days average over the available prefix.
inline std::vector<double> seven_day_ma(std::span<const double> series) {
  if (series.empty()) throw InputError("empty series");
  std::vector<double> out(series.size());
  for (std::size_t t = 0; t < series.size(); ++t) {
    const std::size_t width = std::min<std::size_t>(t + 1, kSmoothingWindow);
    double sum = 0.0;
    for (std::size_t s = t + 1 - width; s <= t; ++s) sum += series[s];
    out[t] = sum / static_cast<double>(width);
  }
  return out;
}

inline MFSchedule build_mf_schedule(double mf_start, double mf_end, std::size_t horizon) {
  if (horizon < 2) throw InputError("MF schedule horizon must be at least 2 days");
  if (!(mf_start >= 1.0) || !(mf_end >= 1.0)) throw InputError("MF must be >= 1");
  MFSchedule s{mf_start, mf_end, std::vector<double>(horizon)};
  const double last = static_cast<double>(horizon - 1);
  for (std::size_t k = 0; k < horizon; ++k)
    s.values[k] = mf_start + (mf_end - mf_start) * (static_cast<double>(k) / last);
  s.values.back() = mf_end;
  return s;
}

/// Index of the first day with a positive value, if any.
inline std::optional<std::size_t> first_positive(std::span<const double> series) {
  for (std::size_t t = 0; t < series.size(); ++t)
    if (series[t] > 0.0) return t;
  return std::nullopt;
}

/// Adjusted per-capita daily new cases and their running total, from the outbreak start on.
struct AccumulatedCases {
  Date start{};
  std::size_t offset = 0; ///< days trimmed from the front of the raw series
  std::vector<double> dc;
  std::vector<double> c;
  std::vector<double> smoothed_reported; ///< aligned with dc/c
};

/// Smooths the full raw series, trims to the first positive smoothed day and applies the MF.
/// `mf` must cover exactly the trimmed span.
inline AccumulatedCases adjust_and_accumulate(const RegionSeries& raw, const MFSchedule& mf,
                                              bool smoothing,
                                              MfOrder order = MfOrder::SmoothThenScale) {
  raw.validate();
  if (raw.new_cases.empty()) throw InputError(raw.region_id + ": empty series");
  std::vector<double> smoothed =
      smoothing ? seven_day_ma(raw.new_cases) : std::vector<double>(raw.new_cases);
  auto first = first_positive(smoothed);
  if (!first) throw InputError(raw.region_id + ": no positive case counts");
  const std::size_t n = raw.size() - *first;
  if (mf.values.size() != n)
    throw InputError(raw.region_id + ": MF schedule length " + std::to_string(mf.values.size()) +
                     " does not match series length " + std::to_string(n));

  AccumulatedCases out;
  out.offset = *first;
  out.start = raw.date_at(*first);
  out.smoothed_reported.assign(smoothed.begin() + static_cast<long>(*first), smoothed.end());
  out.dc.resize(n);
  if (order == MfOrder::SmoothThenScale || !smoothing) {
    for (std::size_t t = 0; t < n; ++t) out.dc[t] = out.smoothed_reported[t] * mf.values[t];
  } else {
    // Days before the outbreak start carry zero reported cases, so their MF is irrelevant.
    std::vector<double> scaled(raw.new_cases);
    for (std::size_t t = 0; t < n; ++t) scaled[*first + t] *= mf.values[t];
    auto sm = seven_day_ma(scaled);
    for (std::size_t t = 0; t < n; ++t) out.dc[t] = sm[*first + t];
  }
  const auto pop = static_cast<double>(raw.population);
  out.c.resize(n);
  double total = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    out.dc[t] /= pop;
    total += out.dc[t];
    if (total >= 1.0)
      throw InputError(raw.region_id + " " + format_date(raw.date_at(*first + t)) +
                       ": per-capita cases exceed population, check MF/population");
    out.c[t] = total;
  }
  return out;
}

inline void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InputError("gamma must lie in (0, 1]");
}

/// i_t = (1 - gamma) i_{t-1} + (c_t - c_{t-1}), with c = i = 0 before the first day.
inline std::vector<double> active_infections(std::span<const double> c, double gamma) {
  check_gamma(gamma);
  std::vector<double> i(c.size());
  double prev_i = 0.0, prev_c = 0.0;
  for (std::size_t t = 0; t < c.size(); ++t) {
    double dc = c[t] - prev_c;
    if (dc < 0.0) throw InputError("cumulative cases decreased");
    prev_i = (1.0 - gamma) * prev_i + dc;
    i[t] = prev_i;
    prev_c = c[t];
  }
  return i;
}

/// Same recursion driven by the daily increments directly (no differencing round-off).
inline std::vector<double> active_infections_from_increments(std::span<const double> dc,
                                                             double gamma) {
  check_gamma(gamma);
  std::vector<double> i(dc.size());
  double prev = 0.0;
  for (std::size_t t = 0; t < dc.size(); ++t) {
    if (dc[t] < 0.0) throw InputError("cumulative cases decreased");
    prev = (1.0 - gamma) * prev + dc[t];
    i[t] = prev;
  }
  return i;
}

namespace detail {

inline std::optional<double> scaled_rate(double c_now, double increment, double i_now,
                                         double gamma) {
  if (!(i_now > 0.0)) return std::nullopt;
  // ln((1 - c_{t+1}) / (1 - c_t)) = log1p(-dc / (1 - c_t)); exact for tiny c.
  double v = -std::log1p(-increment / (1.0 - c_now)) / (gamma * i_now);
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

} // namespace detail

/// y[t] = -ln((1 - c_{t+1}) / (1 - c_t)) / (gamma i_t); the final day and days with
/// i_t = 0 are missing.
inline std::vector<std::optional<double>> transmission_lhs(std::span<const double> c,
                                                           std::span<const double> i,
                                                           double gamma) {
  check_gamma(gamma);
  if (c.size() != i.size()) throw InputError("c and i lengths differ");
  std::vector<std::optional<double>> y(c.size());
  for (std::size_t t = 0; t < c.size(); ++t) {
    if (!(c[t] < 1.0) || c[t] < 0.0) throw InputError("per-capita cumulative cases outside [0, 1)");
    if (t + 1 == c.size()) break;
    if (c[t + 1] < c[t]) throw InputError("cumulative cases decreased");
    y[t] = detail::scaled_rate(c[t], c[t + 1] - c[t], i[t], gamma);
  }
  return y;
}

/// Variant taking the daily increments alongside c.
inline std::vector<std::optional<double>> transmission_lhs(std::span<const double> c,
                                                           std::span<const double> dc,
                                                           std::span<const double> i,
                                                           double gamma) {
  check_gamma(gamma);
  if (c.size() != i.size() || c.size() != dc.size()) throw InputError("series lengths differ");
  std::vector<std::optional<double>> y(c.size());
  for (std::size_t t = 0; t < c.size(); ++t) {
    if (!(c[t] < 1.0) || c[t] < 0.0) throw InputError("per-capita cumulative cases outside [0, 1)");
    if (t + 1 == c.size()) break;
    if (dc[t + 1] < 0.0) throw InputError("cumulative cases decreased");
    y[t] = detail::scaled_rate(c[t], dc[t + 1], i[t], gamma);
  }
  return y;
}

/// How the MF schedule is laid out in time.
struct MfSpec {
  double mf_start = 1.0;
  double mf_end = 1.0;
  /// When set, one schedule over [first, second] shared by every region instead of each
  /// region's own span from first case to sample end.
  std::optional<std::pair<Date, Date>> common_calendar;
};

struct TransformOptions {
  double gamma = kRecoveryRate;
  bool smoothing = true;
  MfOrder order = MfOrder::SmoothThenScale;
  /// Threshold variable from MF-adjusted instead of reported cases.
  bool threshold_uses_adjusted = false;
};

/// Everything derived for one region, indexed from its outbreak start.
struct EpiFrame {
  std::string region_id;
  std::int64_t population = 0;
  Date start{};
  std::vector<double> dc;          ///< adjusted per-capita daily new cases
  std::vector<double> c;           ///< adjusted per-capita cumulative cases
  std::vector<double> i;           ///< per-capita active infections
  std::vector<double> dc_per_100k; ///< smoothed daily new cases per 100k (threshold variable)
  std::vector<std::optional<double>> y; ///< beta_t / gamma for day t

  std::size_t size() const noexcept { return c.size(); }
  Date date_at(std::size_t k) const { return add_days(start, static_cast<long>(k)); }
};

inline MFSchedule schedule_for(const MfSpec& spec, Date region_start, std::size_t length) {
  if (!spec.common_calendar) return build_mf_schedule(spec.mf_start, spec.mf_end, length);
  auto [cal_start, cal_end] = *spec.common_calendar;
  long horizon = days_between(cal_start, cal_end) + 1;
  auto full = build_mf_schedule(spec.mf_start, spec.mf_end, static_cast<std::size_t>(horizon));
  MFSchedule s{spec.mf_start, spec.mf_end, std::vector<double>(length)};
  for (std::size_t k = 0; k < length; ++k) {
    long idx = days_between(cal_start, region_start) + static_cast<long>(k);
    idx = std::clamp(idx, 0L, horizon - 1);
    s.values[k] = full.values[static_cast<std::size_t>(idx)];
  }
  return s;
}

inline EpiFrame build_epi_frame(const RegionSeries& raw, const MfSpec& mf,
                                const TransformOptions& opt = {}) {
  raw.validate();
  if (raw.new_cases.empty()) throw InputError(raw.region_id + ": empty series");
  std::vector<double> smoothed =
      opt.smoothing ? seven_day_ma(raw.new_cases) : std::vector<double>(raw.new_cases);
  auto first = first_positive(smoothed);
  if (!first) throw InputError(raw.region_id + ": no positive case counts");
  const std::size_t n = raw.size() - *first;
  const Date start = raw.date_at(*first);
  MFSchedule schedule = n >= 2 ? schedule_for(mf, start, n)
                               : MFSchedule{mf.mf_start, mf.mf_end, {mf.mf_start}};
  auto acc = adjust_and_accumulate(raw, schedule, opt.smoothing, opt.order);

  EpiFrame f;
  f.region_id = raw.region_id;
  f.population = raw.population;
  f.start = acc.start;
  f.dc = std::move(acc.dc);
  f.c = std::move(acc.c);
  f.i = active_infections_from_increments(f.dc, opt.gamma);
  f.y = transmission_lhs(f.c, f.dc, f.i, opt.gamma);
  f.dc_per_100k.resize(n);
  for (std::size_t t = 0; t < n; ++t)
    f.dc_per_100k[t] = opt.threshold_uses_adjusted
                           ? f.dc[t] * 1e5
                           : per_100k(acc.smoothed_reported[t], raw.population);
  return f;
}

} // namespace r0panel
