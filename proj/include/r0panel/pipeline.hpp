#pragma once

// End-to-end runs: load data (canonical files, raw snapshots or a simulation), build the
// panel, fit, and write the results bundle.

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "r0panel/config.hpp"
#include "r0panel/fixed_effects.hpp"
#include "r0panel/inference.hpp"
#include "r0panel/ingest.hpp"
#include "r0panel/panel.hpp"
#include "r0panel/simulate.hpp"

namespace r0panel {

namespace fs = std::filesystem;
using nlohmann::json;

struct Dataset {
  std::vector<ingest::ReportedSeries> cases;
  CovariateTable covariates;
  Warnings warnings;
  std::optional<json> truth;
};

namespace detail {

inline std::ifstream open_input(const std::string& path, const std::string& what) {
  if (path.empty()) throw InputError("config: no path given for " + what);
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + what + " '" + path + "'");
  return in;
}

inline std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

inline void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir + "': " + ec.message());
}

inline Dataset ingest_raw(const RunConfig& cfg) {
  const auto& d = *cfg.data;
  Dataset ds;
  auto map = d.column_map.empty() ? ingest::ColumnMap::bundled() : ingest::ColumnMap::load(cfg.resolve(d.column_map));
  std::optional<Date> end = cfg.window_end;

  std::vector<ingest::StateInfo> states;
  std::vector<std::string> regions = cfg.regions;
  if (cfg.sample == SampleKind::UsStates) {
    if (d.states.empty()) {
      states = ingest::bundled_states();
    } else {
      auto in = open_input(cfg.resolve(d.states), "state table");
      states = ingest::load_states(in);
    }
    if (regions.empty()) regions = ingest::contiguous_state_names(states);
    auto in = open_input(cfg.resolve(d.cdc), "CDC case file");
    ds.cases = ingest::parse_cdc_states(in, states, regions, map, end, ds.warnings);
  } else if (cfg.sample == SampleKind::Countries) {
    if (regions.empty()) throw InputError("config: country runs need an explicit 'regions' list");
    auto in = open_input(cfg.resolve(d.owid), "OWID file");
    auto res = ingest::parse_owid(in, regions, map, end, ds.warnings);
    ds.cases = std::move(res.series);
    if (cfg.vaccination) ds.covariates.merge(res.vaccinated);
  } else {
    throw InputError("config: raw sources need sample 'us_states' or 'countries'");
  }
  if (ds.cases.empty()) throw InputError("no case series read");

  // Daily covariate range: p days before the earliest series to the last case date.
  Date first = ds.cases.front().start, last = first;
  for (const auto& s : ds.cases) {
    first = std::min(first, s.start);
    last = std::max(last, add_days(s.start, long(s.new_cases.size()) - 1));
  }
  const ingest::DateRange range{add_days(first, -cfg.lag_p), last};
  std::vector<std::string> present;
  for (const auto& s : ds.cases) present.push_back(s.region_id);

  {
    auto in = open_input(cfg.resolve(d.oxcgrt), "OxCGRT file");
    auto level = cfg.sample == SampleKind::UsStates ? ingest::OxcgrtLevel::UsStates : ingest::OxcgrtLevel::National;
    ds.covariates.merge(ingest::parse_oxcgrt(in, level, present, map, ds.warnings));
  }
  if (cfg.delta) {
    auto in = open_input(cfg.resolve(d.variants), "variants file");
    ds.covariates.merge(ingest::parse_variants(in, present, map, range, ds.warnings,
                                               cfg.variant_step_hold ? ingest::VariantFill::StepHold
                                                                     : ingest::VariantFill::Linear));
  }
  if (cfg.sample == SampleKind::UsStates) {
    if (cfg.vaccination) {
      auto in = open_input(cfg.resolve(d.us_vaccinations), "US vaccination file");
      ds.covariates.merge(ingest::parse_us_vaccinations(in, present, map, range, ds.warnings));
    }
    if (cfg.governor_interaction) {
      auto path = d.governors.empty() ? ingest::default_data_dir() + "/governors.csv" : cfg.resolve(d.governors);
      auto in = open_input(path, "governor table");
      ds.covariates.merge(ingest::governor_table(in, states, present, range));
    }
  }
  return ds;
}

inline Dataset load_canonical(const RunConfig& cfg) {
  Dataset ds;
  const auto& d = *cfg.data;
  {
    auto path = cfg.resolve(d.cases);
    auto in = open_input(path, "cases file");
    ds.cases = ingest::read_cases_csv(in, path);
  }
  {
    auto path = cfg.resolve(d.covariates);
    auto in = open_input(path, "covariates file");
    ds.covariates = ingest::read_covariates_csv(in, path);
  }
  if (cfg.window_end) {
    for (auto& s : ds.cases) {
      const long keep = days_between(s.start, *cfg.window_end) + 1;
      if (keep < long(s.new_cases.size())) s.new_cases.resize(std::size_t(std::max(0L, keep)));
    }
    std::erase_if(ds.cases, [](const auto& s) { return s.new_cases.empty(); });
  }
  return ds;
}

} // namespace detail

inline Dataset load_dataset(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.simulation) {
    auto sim = simulate_panel(*cfg.simulation);
    return {std::move(sim.cases), std::move(sim.covariates), {}, truth_json(sim)};
  }
  return cfg.data->canonical() ? detail::load_canonical(cfg) : detail::ingest_raw(cfg);
}

inline RegressorSpec regressor_spec(const RunConfig& cfg, const CovariateTable& covariates) {
  RegressorSpec spec;
  if (cfg.sample == SampleKind::Synthetic) {
    spec.columns = covariates.columns();
    return spec;
  }
  spec.columns = {column::kStringency, column::kEconSupport};
  if (cfg.vaccination) spec.columns.push_back(column::kVaccinated);
  if (cfg.delta) spec.columns.push_back(column::kDelta);
  if (cfg.governor_interaction) spec.interactions.push_back({column::kRepGovernor, column::kEconSupport});
  return spec;
}

struct Prepared {
  std::vector<EpiFrame> frames;
  Panel panel;
  Warnings warnings;
};

inline Prepared prepare(const RunConfig& cfg, const Dataset& ds) {
  Prepared out;
  out.warnings = ds.warnings;
  std::vector<const ingest::ReportedSeries*> chosen;
  if (cfg.regions.empty()) {
    for (const auto& s : ds.cases) chosen.push_back(&s);
  } else {
    std::string missing;
    for (const auto& r : cfg.regions) {
      auto it = std::find_if(ds.cases.begin(), ds.cases.end(), [&](const auto& s) { return s.region_id == r; });
      if (it == ds.cases.end()) missing += " " + r;
      else chosen.push_back(&*it);
    }
    if (!missing.empty()) throw InputError("regions missing from case data:" + missing);
  }
  TransformOptions opt;
  opt.gamma = cfg.gamma;
  opt.smoothing = cfg.smoothing;
  opt.threshold_uses_adjusted = cfg.threshold_uses_adjusted;
  const auto mf = cfg.resolved_mf();
  for (const auto* s : chosen) out.frames.push_back(build_epi_frame(s->to_region_series(&out.warnings), mf, opt));
  SampleWindow window{cfg.window_start, cfg.window_end};
  out.panel = build_panel(out.frames, ds.covariates, cfg.lag_p, regressor_spec(cfg, ds.covariates),
                          out.warnings, window);
  if (out.panel.obs.empty()) throw InputError("panel is empty after assembly");
  return out;
}

struct EstimateBundle {
  ThresholdFitResult fit;
  CovarianceReport cov;
  std::size_t grid_points = 0;
  std::size_t warnings = 0;
  std::vector<std::string> dropped_regions;
};

inline EstimateBundle estimate(const RunConfig& cfg, const Prepared& prep) {
  EstimateBundle b;
  if (cfg.mitigation) {
    auto grid = cfg.tau_grid == "default" ? default_tau_grid(prep.panel) : parse_tau_grid(cfg.tau_grid);
    b.grid_points = grid.size();
    b.fit = profile_threshold_search(prep.panel, grid);
  } else {
    b.fit = counterfactual_fit(prep.panel);
  }
  b.cov = covariance_report(b.fit, prep.panel, cfg.se_lag);
  b.warnings = prep.warnings.size();
  for (const auto& w : prep.warnings)
    if (w.kind == "region_dropped") b.dropped_regions.push_back(w.region);
  return b;
}

inline json fit_meta_json(const RunConfig& cfg, const EstimateBundle& b) {
  const auto& f = b.fit;
  json j = json::object();
  j["scenario"] = cfg.scenario;
  j["mitigation"] = cfg.mitigation;
  j["tau"] = f.tau && cfg.mitigation ? json(*f.tau) : json(nullptr);
  j["kappa_identified"] = f.kappa.has_value();
  j["r_squared"] = f.r_squared;
  j["ssr"] = f.ssr;
  j["obs_count"] = f.obs_count;
  j["region_count"] = f.region_count;
  j["t_min"] = f.t_min;
  j["t_max"] = f.t_max;
  j["truncation_lag"] = b.cov.truncation_lag;
  j["weak_threshold"] = cfg.mitigation ? json(f.weak_threshold) : json(nullptr);
  j["threshold_f_stat"] = cfg.mitigation && std::isfinite(f.threshold_f_stat) ? json(f.threshold_f_stat) : json(nullptr);
  j["tau_grid_points"] = b.grid_points;
  j["warnings"] = b.warnings;
  j["dropped_regions"] = b.dropped_regions;
  return j;
}

inline void write_r0_table(std::ostream& out, const EstimateBundle& b) {
  csv::write_row(out, {"region", "estimate", "se_usual", "se_robust1", "se_robust2"});
  const auto& c = b.cov;
  for (std::size_t k = 0; k < b.fit.region_ids.size(); ++k)
    csv::write_row(out, {c.names[k], csv::format_exact(c.estimates[k]), csv::format_exact(c.se(c.usual, k)),
                         csv::format_exact(c.se(c.robust1, k)), csv::format_exact(c.se(c.robust2, k))});
}

/// Slope coefficients in the mitigating-factor table layout.
inline void write_coefficients(std::ostream& out, const EstimateBundle& b) {
  csv::write_row(out, {"term", "estimate", "se_usual", "se_robust1", "se_robust2", "t_robust2"});
  const auto& c = b.cov;
  for (std::size_t k = b.fit.region_ids.size(); k < c.names.size(); ++k) {
    const double t = c.t_ratio(c.robust2, k);
    csv::write_row(out, {c.names[k], csv::format_exact(c.estimates[k]), csv::format_exact(c.se(c.usual, k)),
                         csv::format_exact(c.se(c.robust1, k)), csv::format_exact(c.se(c.robust2, k)),
                         std::isfinite(t) ? csv::format_exact(t) : ""});
  }
}

inline void write_bundle(const std::string& dir, const RunConfig& cfg, const EstimateBundle& b) {
  detail::make_dir(dir);
  {
    auto out = detail::open_output(fs::path(dir) / "r0_table.csv");
    write_r0_table(out, b);
  }
  {
    auto out = detail::open_output(fs::path(dir) / "coefficients.csv");
    write_coefficients(out, b);
  }
  {
    auto out = detail::open_output(fs::path(dir) / "fit_meta.json");
    out << fit_meta_json(cfg, b).dump(2) << '\n';
  }
  {
    auto out = detail::open_output(fs::path(dir) / "config.json");
    out << config_to_json(cfg).dump(2) << '\n';
  }
}

inline std::string out_dir(const RunConfig& cfg) { return cfg.resolve(cfg.out); }

// ---- subcommands ----

inline void cmd_ingest(const RunConfig& cfg) {
  auto ds = load_dataset(cfg);
  auto prep = prepare(cfg, ds);
  const auto dir = out_dir(cfg);
  detail::make_dir(dir);
  {
    auto out = detail::open_output(fs::path(dir) / "cases.csv");
    ingest::write_cases_csv(out, ds.cases);
  }
  {
    auto out = detail::open_output(fs::path(dir) / "covariates.csv");
    ingest::write_covariates_csv(out, ds.covariates);
  }
  {
    auto out = detail::open_output(fs::path(dir) / "panel.csv");
    write_panel_csv(out, prep.panel);
  }
  {
    auto out = detail::open_output(fs::path(dir) / "warnings.jsonl");
    ingest::write_warnings_jsonl(out, prep.warnings);
  }
}

inline EstimateBundle cmd_estimate(const RunConfig& cfg) {
  auto prep = prepare(cfg, load_dataset(cfg));
  auto b = estimate(cfg, prep);
  write_bundle(out_dir(cfg), cfg, b);
  return b;
}

inline EstimateBundle cmd_counterfactual(RunConfig cfg) {
  cfg.mitigation = false;
  return cmd_estimate(cfg);
}

inline SimOutput cmd_simulate(const RunConfig& cfg) {
  if (!cfg.simulation) throw InputError("config has no 'simulation' section");
  auto sim = simulate_panel(*cfg.simulation);
  const auto dir = out_dir(cfg);
  detail::make_dir(dir);
  {
    auto out = detail::open_output(fs::path(dir) / "cases.csv");
    ingest::write_cases_csv(out, sim.cases);
  }
  {
    auto out = detail::open_output(fs::path(dir) / "covariates.csv");
    ingest::write_covariates_csv(out, sim.covariates);
  }
  {
    auto out = detail::open_output(fs::path(dir) / "truth.json");
    out << truth_json(sim).dump(2) << '\n';
  }
  return sim;
}

} // namespace r0panel
