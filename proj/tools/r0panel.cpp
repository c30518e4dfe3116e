// r0panel: ingest, estimate, counterfactual, simulate, report, compare.
// Exit codes: 0 ok, 1 estimation failure, 2 bad input or config, 3 comparison outside tolerance.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "r0panel/pipeline.hpp"
#include "r0panel/report_compare.hpp"

using namespace r0panel;

namespace {

struct Overrides {
  std::string config;
  std::string out;
  std::optional<double> mf_start, mf_end;
  std::string window;
  std::optional<int> lag;
  std::optional<int> se_lag;
  std::string tau_grid;
  bool no_mitigation = false;
  std::optional<std::uint64_t> seed;
};

void add_run_flags(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "scenario config (JSON)")->required();
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--mf-start", o.mf_start, "multiplication factor at the first case date");
  sub->add_option("--mf-end", o.mf_end, "multiplication factor at the last case date");
  sub->add_option("--window", o.window, "sample window START:END (YYYY-MM-DD, either side may be empty)");
  sub->add_option("--lag", o.lag, "regressor lag p in days");
  sub->add_option("--se-lag", o.se_lag, "HAC truncation lag (default floor(T_max^(1/3)))");
  sub->add_option("--tau-grid", o.tau_grid, "threshold grid: default, lo:hi:step, or comma list");
  sub->add_flag("--no-mitigation", o.no_mitigation, "intercept-only fit");
  sub->add_option("--seed", o.seed, "simulation seed");
}

RunConfig resolve(const Overrides& o) {
  auto cfg = load_config(o.config);
  if (!o.out.empty()) cfg.out = std::filesystem::absolute(o.out).string();
  if (o.mf_start) cfg.mf.mf_start = *o.mf_start;
  if (o.mf_end) cfg.mf.mf_end = *o.mf_end;
  if (!o.window.empty()) {
    auto colon = o.window.find(':');
    if (colon == std::string::npos) throw InputError("--window expects START:END");
    auto side = [](const std::string& s) -> std::optional<Date> {
      if (s.empty()) return std::nullopt;
      auto d = parse_date(s);
      if (!d) throw InputError("--window: bad date '" + s + "'");
      return d;
    };
    if (auto d = side(o.window.substr(0, colon))) cfg.window_start = d;
    if (auto d = side(o.window.substr(colon + 1))) cfg.window_end = d;
  }
  if (o.lag) {
    cfg.lag_p = *o.lag;
    if (cfg.simulation) cfg.simulation->lag_p = *o.lag;
  }
  if (o.se_lag) cfg.se_lag = o.se_lag;
  if (!o.tau_grid.empty()) cfg.tau_grid = o.tau_grid;
  if (o.no_mitigation) cfg.mitigation = false;
  if (o.seed) {
    if (!cfg.simulation) throw InputError("--seed applies to simulation configs only");
    cfg.simulation->seed = *o.seed;
  }
  cfg.validate();
  return cfg;
}

void print_fit(const RunConfig& cfg, const EstimateBundle& b) {
  const auto& f = b.fit;
  std::cout << cfg.scenario << ": " << f.region_count << " regions, " << f.obs_count << " obs, T " << f.t_min
            << ".." << f.t_max << ", L " << b.cov.truncation_lag;
  if (f.tau && cfg.mitigation) std::cout << ", tau " << *f.tau << (f.weak_threshold ? " (weak)" : "");
  std::cout << ", R2 " << csv::format_fixed(f.r_squared, 4) << '\n';
  if (b.warnings) std::cout << b.warnings << " warnings\n";
  std::cout << "wrote " << out_dir(cfg) << '\n';
}

int run(int argc, char** argv) {
  CLI::App app{"Panel threshold regressions for region-specific R0"};
  app.require_subcommand(1);
  Overrides o;

  auto* ingest = app.add_subcommand("ingest", "read sources, write canonical cases/covariates/panel and warnings");
  add_run_flags(ingest, o);
  auto* est = app.add_subcommand("estimate", "fit and write r0_table.csv, coefficients.csv, fit_meta.json");
  add_run_flags(est, o);
  auto* cf = app.add_subcommand("counterfactual", "intercept-only fit (no mitigating factors)");
  add_run_flags(cf, o);
  auto* sim = app.add_subcommand("simulate", "write synthetic cases/covariates and truth.json");
  add_run_flags(sim, o);

  std::vector<std::string> bundles;
  std::string report_out = "report";
  double bin_width = 0.5;
  auto* rep = app.add_subcommand("report", "histogram and ranked bar-chart tables from results bundles");
  rep->add_option("bundles", bundles, "results bundle directories")->required();
  rep->add_option("--out", report_out, "output directory");
  rep->add_option("--bin-width", bin_width, "histogram bin width");

  std::string bundle, reference, truth, sample = "prevax", mf = "5-2", column = "estimate", json_out;
  double abs_tol = 1e-6;
  std::optional<double> rel_tol;
  std::optional<std::size_t> min_pass;
  auto* cmp = app.add_subcommand("compare", "compare a bundle with a reference table or truth.json");
  cmp->add_option("bundle", bundle, "results bundle directory")->required();
  auto* ref_opt = cmp->add_option("--reference", reference, "long-format reference CSV");
  cmp->add_option("--truth", truth, "truth.json from simulate")->excludes(ref_opt);
  cmp->add_option("--sample", sample, "reference sample column (prevax, full)");
  cmp->add_option("--mf", mf, "reference MF column (5-2, 8-2.5)");
  cmp->add_option("--column", column, "reference value column");
  cmp->add_option("--abs", abs_tol, "absolute tolerance");
  cmp->add_option("--rel", rel_tol, "relative tolerance (row passes if within abs or rel)");
  cmp->add_option("--min-pass", min_pass, "rows that must pass (default: all)");
  cmp->add_option("--json", json_out, "write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (*ingest) {
    auto cfg = resolve(o);
    cmd_ingest(cfg);
    std::cout << "wrote " << out_dir(cfg) << '\n';
  } else if (*est) {
    auto cfg = resolve(o);
    print_fit(cfg, cmd_estimate(cfg));
  } else if (*cf) {
    auto cfg = resolve(o);
    cfg.mitigation = false;
    print_fit(cfg, cmd_counterfactual(cfg));
  } else if (*sim) {
    auto cfg = resolve(o);
    auto s = cmd_simulate(cfg);
    std::size_t floored = 0, halted = 0;
    for (const auto& t : s.truth) floored += t.beta_floored, halted += t.halted;
    std::cout << s.truth.size() << " regions simulated, " << floored << " floored days, " << halted
              << " halted\nwrote " << out_dir(cfg) << '\n';
  } else if (*rep) {
    std::cout << report::cmd_report(bundles, report_out, bin_width) << '\n';
  } else if (*cmp) {
    report::Values result, ref;
    if (!truth.empty()) {
      result = report::bundle_values(bundle);
      ref = report::truth_values(report::read_json(truth));
    } else if (!reference.empty()) {
      result = report::bundle_r0(bundle, column);
      ref = report::read_reference(reference, sample, mf, column);
    } else {
      throw InputError("compare needs --reference or --truth");
    }
    auto d = report::compare(result, ref, {abs_tol, rel_tol, min_pass});
    std::cout << d.to_text();
    if (!json_out.empty()) {
      std::ofstream out(json_out, std::ios::binary);
      if (!out) throw InputError("cannot write '" + json_out + "'");
      out << d.to_json().dump(2) << '\n';
    }
    return d.pass ? 0 : 3;
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const RankDeficiencyError& e) {
    std::cerr << "error: " << e.what();
    for (const auto& c : e.columns()) std::cerr << (&c == &e.columns().front() ? " [" : ", ") << c;
    std::cerr << (e.columns().empty() ? "" : "]") << '\n';
    return 1;
  } catch (const EstimationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
