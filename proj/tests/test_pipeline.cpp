#include <gtest/gtest.h>

#include "r0panel/pipeline.hpp"
#include "r0panel/report_compare.hpp"
#include "tmp_dir.hpp"

using namespace r0panel;
namespace fs = std::filesystem;

namespace {

RunConfig synthetic(const fs::path& out) {
  auto cfg = load_config(std::string(R0PANEL_CONFIG_DIR) + "/synthetic.json");
  cfg.out = out.string();
  return cfg;
}

} // namespace

TEST(Config, SyntheticFixtureParses) {
  auto cfg = load_config(std::string(R0PANEL_CONFIG_DIR) + "/synthetic.json");
  ASSERT_TRUE(cfg.simulation);
  EXPECT_FALSE(cfg.data);
  EXPECT_EQ(cfg.sample, SampleKind::Synthetic);
  EXPECT_FALSE(cfg.smoothing);
  EXPECT_EQ(cfg.simulation->covariates.size(), 2u);
  EXPECT_DOUBLE_EQ(cfg.simulation->covariates[0].hi, 0.2);
  EXPECT_EQ(cfg.base_dir, R0PANEL_CONFIG_DIR);
}

TEST(Config, ScenarioFilesParse) {
  for (const char* name : {"us_prevax_mf5-2", "us_prevax_mf8-2.5", "us_full_mf5-2", "us_full_mf8-2.5",
                           "countries_prevax_mf5-2", "countries_prevax_mf8-2.5", "countries_full_mf5-2",
                           "countries_full_mf8-2.5"}) {
    auto cfg = load_config(std::string(R0PANEL_CONFIG_DIR) + "/" + name + ".json");
    EXPECT_NO_THROW(cfg.validate()) << name;
    EXPECT_EQ(cfg.regions.size(), cfg.sample == SampleKind::UsStates ? 48u : 19u) << name;
    EXPECT_EQ(cfg.vaccination, cfg.delta) << name;
  }
}

TEST(Config, RoundTripsThroughJson) {
  auto cfg = load_config(std::string(R0PANEL_CONFIG_DIR) + "/us_full_mf8-2.5.json");
  auto j = config_to_json(cfg);
  auto back = config_from_json(j, cfg.base_dir);
  EXPECT_EQ(config_to_json(back).dump(), j.dump());
}

TEST(Config, Validation) {
  using nlohmann::json;
  json both = {{"data", {{"cases", "a.csv"}}}, {"simulation", json::object()}};
  EXPECT_THROW(config_from_json(both).validate(), InputError);
  json neither = {{"scenario", "x"}};
  EXPECT_THROW(config_from_json(neither).validate(), InputError);
  json window = {{"simulation", json::object()}, {"window", {{"start", "2021-01-31"}, {"end", "2020-03-06"}}}};
  EXPECT_THROW(config_from_json(window).validate(), InputError);
  EXPECT_THROW(config_from_json({{"sample", "planets"}}), InputError);
  EXPECT_THROW(config_from_json({{"window", {{"start", "March 6"}}}}), InputError);
  EXPECT_THROW(config_from_json({{"lag_p", "ten"}}), InputError);
}

TEST(Pipeline, SyntheticEstimateRecoversTruth) {
  auto dir = scratch_dir();
  auto cfg = synthetic(dir / "bundle");
  auto b = cmd_estimate(cfg);
  for (const char* f : {"r0_table.csv", "coefficients.csv", "fit_meta.json", "config.json"})
    EXPECT_TRUE(fs::exists(dir / "bundle" / f)) << f;
  auto sim = simulate_panel(*cfg.simulation);
  auto meta = report::read_json((dir / "bundle" / "fit_meta.json").string());
  EXPECT_EQ(meta["tau"].get<double>(), cfg.simulation->tau);
  auto diff = report::compare(report::bundle_values((dir / "bundle").string()), report::truth_values(truth_json(sim)),
                              {1e-6, std::nullopt, std::nullopt});
  EXPECT_TRUE(diff.pass) << diff.to_text();
  EXPECT_EQ(diff.rows.size(), 10u + 3u + 1u);
  EXPECT_EQ(b.fit.obs_count, meta["obs_count"].get<std::size_t>());
}

TEST(Pipeline, RerunIsByteIdentical) {
  auto dir = scratch_dir();
  auto cfg = synthetic(dir / "a");
  cfg.simulation->noise_sd = 0.1;
  cmd_estimate(cfg);
  cfg.out = (dir / "b").string();
  cmd_estimate(cfg);
  for (const char* f : {"r0_table.csv", "coefficients.csv", "fit_meta.json"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}

TEST(Pipeline, CanonicalFilesReproduceSimulationRun) {
  // simulate -> files -> estimate matches estimating straight from the simulation.
  auto dir = scratch_dir();
  auto cfg = synthetic(dir / "sim");
  cfg.simulation->noise_sd = 0.1;
  cmd_simulate(cfg);
  EXPECT_TRUE(fs::exists(dir / "sim" / "truth.json"));
  auto direct = estimate(cfg, prepare(cfg, load_dataset(cfg)));

  RunConfig files = cfg;
  files.simulation.reset();
  files.data = DataPaths{};
  files.data->cases = (dir / "sim" / "cases.csv").string();
  files.data->covariates = (dir / "sim" / "covariates.csv").string();
  auto via = estimate(files, prepare(files, load_dataset(files)));
  ASSERT_EQ(direct.fit.alpha.size(), via.fit.alpha.size());
  for (std::size_t j = 0; j < via.fit.alpha.size(); ++j) EXPECT_EQ(direct.fit.alpha[j], via.fit.alpha[j]);
  EXPECT_EQ(*direct.fit.tau, *via.fit.tau);
}

TEST(Pipeline, MissingDataPathNamesThePath) {
  auto dir = scratch_dir();
  RunConfig cfg;
  cfg.data = DataPaths{};
  cfg.data->cases = (dir / "nowhere" / "cases.csv").string();
  cfg.data->covariates = (dir / "covariates.csv").string();
  cfg.out = (dir / "out").string();
  try {
    cmd_estimate(cfg);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find(cfg.data->cases), std::string::npos) << e.what();
  }
}

TEST(Pipeline, RequestedRegionAbsentIsInputError) {
  auto dir = scratch_dir();
  auto cfg = synthetic(dir / "x");
  cfg.regions = {"SIM000", "SIM042"};
  try {
    cmd_estimate(cfg);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("SIM042"), std::string::npos);
  }
}

TEST(Pipeline, CounterfactualBundle) {
  auto dir = scratch_dir();
  auto cfg = synthetic(dir / "full");
  auto full = cmd_estimate(cfg);
  cfg.out = (dir / "cf").string();
  auto cf = cmd_counterfactual(cfg);
  auto meta = report::read_json((dir / "cf" / "fit_meta.json").string());
  EXPECT_TRUE(meta["tau"].is_null());
  EXPECT_FALSE(meta["mitigation"].get<bool>());
  EXPECT_EQ(slurp(dir / "cf" / "coefficients.csv"), "term,estimate,se_usual,se_robust1,se_robust2,t_robust2\n");
  for (std::size_t j = 0; j < cf.fit.alpha.size(); ++j) EXPECT_LT(cf.fit.alpha[j], full.fit.alpha[j]);
}

TEST(Pipeline, BundleEchoesResolvedConfig) {
  auto dir = scratch_dir();
  auto cfg = synthetic(dir / "bundle");
  cmd_estimate(cfg);
  auto echoed = report::read_json((dir / "bundle" / "config.json").string());
  EXPECT_EQ(echoed["tau_grid"], "0.01:1.00:0.01");
  EXPECT_EQ(echoed["simulation"]["seed"], 1);
  EXPECT_EQ(echoed["smoothing"], false);
}

TEST(Pipeline, IngestWritesCanonicalFiles) {
  auto dir = scratch_dir();
  auto cfg = synthetic(dir / "ingest");
  cmd_ingest(cfg);
  for (const char* f : {"cases.csv", "covariates.csv", "panel.csv", "warnings.jsonl"})
    EXPECT_TRUE(fs::exists(dir / "ingest" / f)) << f;
  std::ifstream in(dir / "ingest" / "panel.csv");
  auto back = read_panel_csv(in);
  auto prep = prepare(cfg, load_dataset(cfg));
  EXPECT_EQ(back.obs.size(), prep.panel.obs.size());
}

namespace {

// Raw CDC and OxCGRT state files written from a simulation, so the raw-source path runs end to end.
RunConfig raw_us_config(const fs::path& dir) {
  const std::vector<std::pair<std::string, std::string>> states{
      {"AL", "Alabama"}, {"AZ", "Arizona"}, {"CA", "California"}, {"CO", "Colorado"}, {"GA", "Georgia"}, {"IL", "Illinois"}};
  SimConfig sim;
  sim.n_regions = states.size();
  sim.population = 1'000'000; // well under every state population, so MF scaling stays below 1
  sim.noise_sd = 0.1;
  sim.covariates = {{column::kStringency, 0.1, 0.9, 0.03, 0.0, 0.2}, {column::kEconSupport, 0.1, 0.9, 0.03, 0.0, 0.2}};
  auto out = simulate_panel(sim);

  std::ofstream cdc(dir / "cdc.csv"), ox(dir / "oxcgrt.csv");
  cdc << "submission_date,state,new_case\n";
  ox << "CountryName,RegionName,Jurisdiction,Date,StringencyIndex,EconomicSupportIndex\n";
  for (std::size_t j = 0; j < states.size(); ++j) {
    const auto& s = out.cases[j];
    for (std::size_t t = 0; t < s.new_cases.size(); ++t) {
      const auto ymd = std::chrono::year_month_day{add_days(s.start, long(t))};
      char buf[16];
      std::snprintf(buf, sizeof buf, "%02u/%02u/%04d", unsigned(ymd.month()), unsigned(ymd.day()), int(ymd.year()));
      cdc << buf << ',' << states[j].first << ',' << std::llround(*s.new_cases[t]) << '\n';
    }
    for (const auto& [d, row] : out.covariates.rows().at(s.region_id)) {
      auto iso = format_date(d);
      iso.erase(std::remove(iso.begin(), iso.end(), '-'), iso.end());
      ox << "United States," << states[j].second << ",STATE_TOTAL," << iso << ',' << csv::format_exact(100 * *row[0])
         << ',' << csv::format_exact(100 * *row[1]) << '\n';
    }
  }
  RunConfig cfg;
  cfg.scenario = "raw_us";
  cfg.sample = SampleKind::UsStates;
  for (const auto& s : states) cfg.regions.push_back(s.second);
  cfg.data = DataPaths{};
  cfg.data->cdc = (dir / "cdc.csv").string();
  cfg.data->oxcgrt = (dir / "oxcgrt.csv").string();
  cfg.window_start = parse_date("2020-03-06");
  cfg.window_end = parse_date("2020-09-01");
  cfg.mf = {2.0, 1.0, std::nullopt};
  cfg.governor_interaction = true;
  return cfg;
}

} // namespace

TEST(Pipeline, RawUsSourcesEndToEnd) {
  auto dir = scratch_dir();
  auto cfg = raw_us_config(dir);
  cfg.out = (dir / "bundle").string();
  auto b = cmd_estimate(cfg);
  EXPECT_EQ(b.fit.region_count, 6u);
  EXPECT_TRUE(b.fit.tau.has_value());
  auto coefs = report::read_keyed((dir / "bundle" / "coefficients.csv").string(), "term", "estimate");
  EXPECT_TRUE(coefs.count("rep_governor_x_econ_support"));
  EXPECT_TRUE(coefs.count("stringency"));
  auto r0 = report::bundle_r0((dir / "bundle").string());
  EXPECT_TRUE(r0.count("Alabama"));
  for (const auto& [k, v] : r0) EXPECT_TRUE(std::isfinite(v)) << k;
}

TEST(Pipeline, IngestedFilesReproduceRawRun) {
  // ingest -> canonical files -> estimate gives the same bundle as estimating from the raw sources.
  auto dir = scratch_dir();
  auto raw = raw_us_config(dir);
  raw.out = (dir / "ingest").string();
  cmd_ingest(raw);
  raw.out = (dir / "raw").string();
  cmd_estimate(raw);

  RunConfig canon = raw;
  canon.data = DataPaths{};
  canon.data->cases = (dir / "ingest" / "cases.csv").string();
  canon.data->covariates = (dir / "ingest" / "covariates.csv").string();
  canon.out = (dir / "canon").string();
  cmd_estimate(canon);
  EXPECT_EQ(slurp(dir / "raw" / "r0_table.csv"), slurp(dir / "canon" / "r0_table.csv"));
  EXPECT_EQ(slurp(dir / "raw" / "coefficients.csv"), slurp(dir / "canon" / "coefficients.csv"));
}
