#pragma once

// Scenario files: one JSON tree per run (sample, data sources or simulation, window, MF, grid).

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "r0panel/date.hpp"
#include "r0panel/epi_transform.hpp"
#include "r0panel/error.hpp"
#include "r0panel/simulate.hpp"

namespace r0panel {

enum class SampleKind { UsStates, Countries, Synthetic };

struct DataPaths {
  // canonical files written by `ingest` (or `simulate`)
  std::string cases;
  std::string covariates;
  // raw source snapshots
  std::string cdc;
  std::string owid;
  std::string oxcgrt;
  std::string variants;
  std::string us_vaccinations;
  std::string governors;
  std::string states;
  std::string column_map;

  bool canonical() const { return !cases.empty(); }
};

struct RunConfig {
  std::string scenario = "run";
  SampleKind sample = SampleKind::Synthetic;
  std::vector<std::string> regions; ///< empty = every region in the data (contiguous set for US)
  std::optional<DataPaths> data;
  std::optional<SimConfig> simulation;
  std::optional<Date> window_start;
  std::optional<Date> window_end;
  MfSpec mf{1.0, 1.0, std::nullopt};
  bool common_mf_calendar = false;
  double gamma = kRecoveryRate;
  int lag_p = 10;
  std::string tau_grid = "default";
  bool vaccination = false;
  bool delta = false;
  bool governor_interaction = false;
  bool smoothing = true;
  bool threshold_uses_adjusted = false;
  bool variant_step_hold = true;
  bool mitigation = true;
  std::optional<int> se_lag;
  std::string out = "results";
  std::string base_dir = "."; ///< relative paths resolve against the config file's directory

  void validate() const {
    if (data.has_value() == simulation.has_value())
      throw InputError("config needs exactly one of 'data' or 'simulation'");
    if (window_start && window_end && !(*window_start < *window_end))
      throw InputError("window end must be after window start");
    if (lag_p < 0) throw InputError("lag_p must be non-negative");
    if (!(gamma > 0.0 && gamma < 1.0)) throw InputError("gamma must be in (0, 1)");
    if (!(mf.mf_start >= 1.0 && mf.mf_end >= 1.0)) throw InputError("MF must be >= 1");
    if (common_mf_calendar && !(window_start && window_end))
      throw InputError("a common MF calendar needs both window dates");
    if (se_lag && *se_lag < 0) throw InputError("se_lag must be non-negative");
    if (simulation) simulation->validate();
  }

  MfSpec resolved_mf() const {
    MfSpec m = mf;
    if (common_mf_calendar) m.common_calendar = std::make_pair(*window_start, *window_end);
    return m;
  }

  std::string resolve(const std::string& path) const {
    if (path.empty()) return path;
    std::filesystem::path p(path);
    return p.is_absolute() ? path : (std::filesystem::path(base_dir) / p).lexically_normal().string();
  }
};

namespace detail {

using nlohmann::json;

inline Date json_date(const json& j, const std::string& key) {
  auto d = parse_date(j.get<std::string>());
  if (!d) throw InputError("config: bad date for '" + key + "'");
  return *d;
}

template <class T>
void take(const json& j, const char* key, T& into) {
  if (j.contains(key) && !j[key].is_null()) into = j[key].get<T>();
}

inline std::string sample_name(SampleKind k) {
  switch (k) {
  case SampleKind::UsStates: return "us_states";
  case SampleKind::Countries: return "countries";
  case SampleKind::Synthetic: return "synthetic";
  }
  return "synthetic";
}

inline SimConfig sim_from_json(const json& j) {
  SimConfig s;
  take(j, "n_regions", s.n_regions);
  take(j, "population", s.population);
  take(j, "horizon", s.horizon);
  take(j, "gamma", s.gamma);
  take(j, "alpha", s.alpha);
  take(j, "psi", s.psi);
  take(j, "kappa", s.kappa);
  take(j, "tau", s.tau);
  take(j, "noise_sd", s.noise_sd);
  take(j, "lag_p", s.lag_p);
  take(j, "initial_share", s.initial_share);
  take(j, "stagger", s.stagger);
  take(j, "seed", s.seed);
  if (j.contains("mf")) {
    take(j["mf"], "start", s.mf_start);
    take(j["mf"], "end", s.mf_end);
  }
  if (j.contains("start")) s.start = json_date(j["start"], "simulation.start");
  if (j.contains("covariates")) {
    s.covariates.clear();
    for (const auto& c : j["covariates"]) {
      CovariateProcess p;
      p.name = c.at("name").get<std::string>();
      take(c, "mean", p.mean);
      take(c, "phi", p.phi);
      take(c, "sd", p.sd);
      take(c, "lo", p.lo);
      take(c, "hi", p.hi);
      s.covariates.push_back(p);
    }
  }
  return s;
}

inline json sim_to_json(const SimConfig& s) {
  json covs = json::array();
  for (const auto& c : s.covariates)
    covs.push_back({{"name", c.name}, {"mean", c.mean}, {"phi", c.phi}, {"sd", c.sd}, {"lo", c.lo}, {"hi", c.hi}});
  return {{"n_regions", s.n_regions}, {"population", s.population}, {"horizon", s.horizon},
          {"gamma", s.gamma}, {"alpha", s.alpha}, {"psi", s.psi}, {"kappa", s.kappa}, {"tau", s.tau},
          {"noise_sd", s.noise_sd}, {"lag_p", s.lag_p}, {"initial_share", s.initial_share},
          {"stagger", s.stagger}, {"seed", s.seed}, {"mf", {{"start", s.mf_start}, {"end", s.mf_end}}},
          {"start", format_date(s.start)}, {"covariates", covs}};
}

} // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j, const std::string& base_dir = ".") {
  using detail::take;
  RunConfig c;
  c.base_dir = base_dir;
  try {
    take(j, "scenario", c.scenario);
    if (j.contains("sample")) {
      auto s = j["sample"].get<std::string>();
      if (s == "us_states") c.sample = SampleKind::UsStates;
      else if (s == "countries") c.sample = SampleKind::Countries;
      else if (s == "synthetic") c.sample = SampleKind::Synthetic;
      else throw InputError("config: unknown sample '" + s + "'");
    }
    take(j, "regions", c.regions);
    if (j.contains("data") && !j["data"].is_null()) {
      DataPaths d;
      const auto& dj = j["data"];
      take(dj, "cases", d.cases);
      take(dj, "covariates", d.covariates);
      take(dj, "cdc", d.cdc);
      take(dj, "owid", d.owid);
      take(dj, "oxcgrt", d.oxcgrt);
      take(dj, "variants", d.variants);
      take(dj, "us_vaccinations", d.us_vaccinations);
      take(dj, "governors", d.governors);
      take(dj, "states", d.states);
      take(dj, "column_map", d.column_map);
      c.data = d;
    }
    if (j.contains("simulation") && !j["simulation"].is_null()) c.simulation = detail::sim_from_json(j["simulation"]);
    if (j.contains("window")) {
      const auto& w = j["window"];
      if (w.contains("start") && !w["start"].is_null()) c.window_start = detail::json_date(w["start"], "window.start");
      if (w.contains("end") && !w["end"].is_null()) c.window_end = detail::json_date(w["end"], "window.end");
    }
    if (j.contains("mf")) {
      take(j["mf"], "start", c.mf.mf_start);
      take(j["mf"], "end", c.mf.mf_end);
      std::string cal = "region";
      take(j["mf"], "calendar", cal);
      if (cal != "region" && cal != "common") throw InputError("config: mf.calendar must be region or common");
      c.common_mf_calendar = cal == "common";
    }
    take(j, "gamma", c.gamma);
    take(j, "lag_p", c.lag_p);
    if (j.contains("tau_grid")) {
      const auto& g = j["tau_grid"];
      if (g.is_string()) {
        c.tau_grid = g.get<std::string>();
      } else if (g.is_array()) {
        std::string s;
        for (const auto& v : g) s += (s.empty() ? "" : ",") + csv::format_exact(v.get<double>());
        c.tau_grid = s;
      }
    }
    if (j.contains("covariates")) {
      take(j["covariates"], "vaccination", c.vaccination);
      take(j["covariates"], "delta", c.delta);
      take(j["covariates"], "governor_interaction", c.governor_interaction);
    }
    take(j, "smoothing", c.smoothing);
    take(j, "threshold_uses_adjusted", c.threshold_uses_adjusted);
    if (j.contains("variant_fill")) {
      auto v = j["variant_fill"].get<std::string>();
      if (v != "step" && v != "linear") throw InputError("config: variant_fill must be step or linear");
      c.variant_step_hold = v == "step";
    }
    take(j, "mitigation", c.mitigation);
    if (j.contains("se_lag") && !j["se_lag"].is_null()) c.se_lag = j["se_lag"].get<int>();
    take(j, "out", c.out);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config '" + path + "': " + e.what());
  }
  auto dir = std::filesystem::path(path).parent_path().string();
  return config_from_json(j, dir.empty() ? "." : dir);
}

/// Fully resolved configuration, echoed into every results bundle.
inline nlohmann::json config_to_json(const RunConfig& c) {
  using nlohmann::json;
  json j = json::object();
  j["scenario"] = c.scenario;
  j["sample"] = detail::sample_name(c.sample);
  j["regions"] = c.regions;
  if (c.data) {
    const auto& d = *c.data;
    json dj = json::object();
    auto put = [&](const char* k, const std::string& v) {
      if (!v.empty()) dj[k] = c.resolve(v);
    };
    put("cases", d.cases);
    put("covariates", d.covariates);
    put("cdc", d.cdc);
    put("owid", d.owid);
    put("oxcgrt", d.oxcgrt);
    put("variants", d.variants);
    put("us_vaccinations", d.us_vaccinations);
    put("governors", d.governors);
    put("states", d.states);
    put("column_map", d.column_map);
    j["data"] = dj;
  } else {
    j["data"] = nullptr;
  }
  j["simulation"] = c.simulation ? detail::sim_to_json(*c.simulation) : json(nullptr);
  j["window"] = {{"start", c.window_start ? json(format_date(*c.window_start)) : json(nullptr)},
                 {"end", c.window_end ? json(format_date(*c.window_end)) : json(nullptr)}};
  j["mf"] = {{"start", c.mf.mf_start}, {"end", c.mf.mf_end}, {"calendar", c.common_mf_calendar ? "common" : "region"}};
  j["gamma"] = c.gamma;
  j["lag_p"] = c.lag_p;
  j["tau_grid"] = c.tau_grid;
  j["covariates"] = {{"vaccination", c.vaccination}, {"delta", c.delta}, {"governor_interaction", c.governor_interaction}};
  j["smoothing"] = c.smoothing;
  j["threshold_uses_adjusted"] = c.threshold_uses_adjusted;
  j["variant_fill"] = c.variant_step_hold ? "step" : "linear";
  j["mitigation"] = c.mitigation;
  j["se_lag"] = c.se_lag ? json(*c.se_lag) : json(nullptr);
  j["out"] = c.out;
  return j;
}

} // namespace r0panel
