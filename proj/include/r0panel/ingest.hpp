#pragma once

// Readers for the downloaded source snapshots (OWID, CDC state cases, OxCGRT, CoVariants,
// governor terms) and the canonical cases/covariates CSVs the rest of the pipeline reads.

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "r0panel/csv.hpp"
#include "r0panel/date.hpp"
#include "r0panel/epi_transform.hpp"
#include "r0panel/error.hpp"
#include "r0panel/panel.hpp"

namespace r0panel::ingest {

using nlohmann::json;

inline std::string default_data_dir() {
#ifdef R0PANEL_DATA_DIR
  return R0PANEL_DATA_DIR;
#else
  return "data";
#endif
}

/// Source column names, each field a list of accepted spellings (schemas drifted over time).
class ColumnMap {
public:
  ColumnMap() = default;
  explicit ColumnMap(json j) : j_(std::move(j)) {}

  static ColumnMap load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open column map '" + path + "'");
    try {
      return ColumnMap(json::parse(in));
    } catch (const json::exception& e) {
      throw InputError("column map '" + path + "': " + e.what());
    }
  }
  static ColumnMap bundled() { return load(default_data_dir() + "/column_map.json"); }

  std::vector<std::string> candidates(const std::string& source, const std::string& field) const {
    if (!j_.contains(source) || !j_[source].contains(field)) return {field};
    const auto& v = j_[source][field];
    if (v.is_string()) return {v.get<std::string>()};
    return v.get<std::vector<std::string>>();
  }

  std::optional<std::size_t> find(const csv::Table& t, const std::string& source,
                                  const std::string& field) const {
    for (const auto& name : candidates(source, field))
      if (auto c = t.column(name)) return c;
    return std::nullopt;
  }

  std::size_t require(const csv::Table& t, const std::string& source, const std::string& field) const {
    if (auto c = find(t, source, field)) return *c;
    std::string names;
    for (const auto& n : candidates(source, field)) names += (names.empty() ? "" : "|") + n;
    throw InputError(source + ": missing column for '" + field + "' (" + names + ")");
  }

  std::map<std::string, std::string> renames(const std::string& source, const std::string& key) const {
    if (!j_.contains(source) || !j_[source].contains(key)) return {};
    return j_[source][key].get<std::map<std::string, std::string>>();
  }

private:
  json j_;
};

struct StateInfo {
  std::string code;
  std::string name;
  std::int64_t population = 0;
  bool contiguous = false;
};

inline std::vector<StateInfo> load_states(std::istream& in) {
  auto t = csv::read_stream(in);
  const auto c = t.require_column("code", "states"), n = t.require_column("name", "states"),
             p = t.require_column("population", "states"), g = t.require_column("contiguous", "states");
  std::vector<StateInfo> out;
  for (const auto& row : t.rows) {
    auto pop = csv::parse_double(row[p]);
    if (!pop || *pop <= 0) throw InputError("states: bad population for " + row[c]);
    out.push_back({row[c], row[n], static_cast<std::int64_t>(*pop), row[g] == "1"});
  }
  return out;
}

inline std::vector<StateInfo> bundled_states() {
  std::ifstream in(default_data_dir() + "/us_states.csv");
  if (!in) throw InputError("cannot open bundled state table");
  return load_states(in);
}

/// The 48 contiguous states plus the District of Columbia.
inline std::vector<std::string> contiguous_state_names(const std::vector<StateInfo>& states) {
  std::vector<std::string> out;
  for (const auto& s : states)
    if (s.contiguous) out.push_back(s.name);
  return out;
}

/// Reported daily cases as read from a source; nullopt marks a day missing inside the sample.
struct ReportedSeries {
  std::string region_id;
  std::int64_t population = 0;
  Date start{};
  std::vector<std::optional<double>> new_cases;

  /// Missing days enter the accumulation as zero (the backlog is reported later).
  RegionSeries to_region_series(Warnings* warnings = nullptr) const {
    RegionSeries s{region_id, population, start, {}};
    s.new_cases.reserve(new_cases.size());
    for (std::size_t t = 0; t < new_cases.size(); ++t) {
      if (!new_cases[t] && warnings)
        warnings->push_back({"missing_cases", region_id, format_date(add_days(start, long(t))),
                             std::nullopt, "missing day treated as zero new cases"});
      s.new_cases.push_back(new_cases[t].value_or(0.0));
    }
    return s;
  }
};

struct DateRange {
  Date first{};
  Date last{};
};

namespace detail {

using DailyCells = std::map<std::string, std::map<Date, std::optional<double>>>;

inline std::optional<Date> row_date(const std::string& cell, const std::string& source, long line,
                                    const std::string& region, Warnings& w) {
  auto d = parse_date(cell);
  if (!d) w.push_back({"rejected_row", region, cell, line, source + ": malformed date"});
  return d;
}

/// Shares may overshoot [0, 1] by source rounding noise below 1e-6; anything larger is an error.
inline double checked_share(double v, const std::string& source, long line) {
  constexpr double slack = 1e-6;
  if (v < -slack || v > 1.0 + slack)
    throw InputError(source + " line " + std::to_string(line) + ": share " + csv::format_exact(v) +
                     " outside [0, 1]");
  return std::clamp(v, 0.0, 1.0);
}

inline void put_unique(DailyCells& cells, const std::string& region, Date d,
                       std::optional<double> v, const std::string& source, long line) {
  auto [it, fresh] = cells[region].emplace(d, v);
  if (!fresh)
    throw InputError(source + " line " + std::to_string(line) + ": duplicate key (" + region + ", " +
                     format_date(d) + ")");
}

/// Daily series from the first row to `end` (or the last row). Leading missing values are
/// zero (no report yet); later gaps stay missing; negative revisions are floored at zero.
inline ReportedSeries assemble(const std::string& region, std::int64_t population,
                               const std::map<Date, std::optional<double>>& rows,
                               std::optional<Date> end, const std::string& source, Warnings& w) {
  ReportedSeries s;
  s.region_id = region;
  s.population = population;
  s.start = rows.begin()->first;
  Date last = end ? std::min(*end, rows.rbegin()->first) : rows.rbegin()->first;
  if (last < s.start) return s;
  bool reported = false;
  for (Date d = s.start; d <= last; d = add_days(d, 1)) {
    auto it = rows.find(d);
    std::optional<double> v = it == rows.end() ? std::nullopt : it->second;
    if (v && *v < 0.0) {
      w.push_back({"negative_revision", region, format_date(d), std::nullopt,
                   source + ": negative daily count " + csv::format_exact(*v) + " floored at 0"});
      v = 0.0;
    }
    if (v) reported = true;
    if (!v && !reported) v = 0.0;
    s.new_cases.push_back(v);
  }
  return s;
}

/// Previous observation carried forward on every day of `range`; zero before the first.
inline void step_hold(CovariateTable& out, const std::string& region, const std::string& column,
                      const std::map<Date, double>& obs, DateRange range) {
  double current = 0.0;
  auto it = obs.begin();
  while (it != obs.end() && it->first < range.first) current = (it++)->second;
  for (Date d = range.first; d <= range.last; d = add_days(d, 1)) {
    while (it != obs.end() && it->first <= d) current = (it++)->second;
    out.set(region, d, column, current);
  }
}

/// Straight line between observations, flat after the last, zero before the first.
inline void linear_fill(CovariateTable& out, const std::string& region, const std::string& column,
                        const std::map<Date, double>& obs, DateRange range) {
  for (Date d = range.first; d <= range.last; d = add_days(d, 1)) {
    auto hi = obs.lower_bound(d);
    double v = 0.0;
    if (hi != obs.end() && hi->first == d) {
      v = hi->second;
    } else if (hi == obs.begin()) {
      v = 0.0;
    } else if (hi == obs.end()) {
      v = std::prev(hi)->second;
    } else {
      auto lo = std::prev(hi);
      double f = double(days_between(lo->first, d)) / double(days_between(lo->first, hi->first));
      v = lo->second + f * (hi->second - lo->second);
    }
    out.set(region, d, column, v);
  }
}

inline std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

} // namespace detail

struct OwidResult {
  std::vector<ReportedSeries> series;
  CovariateTable vaccinated; ///< vaccinated_share, step-held daily
};

/// Country case series and fully-vaccinated shares. Requested countries missing from the file
/// are listed as "unknown_region" warnings rather than failing the run.
inline OwidResult parse_owid(std::istream& in, const std::vector<std::string>& countries,
                             const ColumnMap& map, std::optional<Date> end, Warnings& w,
                             const std::string& source = "owid") {
  auto t = csv::read_stream(in);
  const auto rc = map.require(t, "owid", "region"), dc = map.require(t, "owid", "date"),
             nc = map.require(t, "owid", "new_cases"), pc = map.require(t, "owid", "population");
  const auto vc = map.find(t, "owid", "people_fully_vaccinated");
  const auto wanted = detail::as_set(countries);

  detail::DailyCells cases;
  std::map<std::string, std::map<Date, double>> vax;
  std::map<std::string, std::int64_t> population;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto& row = t.rows[k];
    const long line = t.line_numbers[k];
    if (!wanted.count(row[rc])) continue;
    auto d = detail::row_date(row[dc], source, line, row[rc], w);
    if (!d) continue;
    if (end && *d > *end) continue;
    detail::put_unique(cases, row[rc], *d, csv::parse_double(row[nc]), source, line);
    if (auto p = csv::parse_double(row[pc]); p && *p > 0 && !population.count(row[rc]))
      population[row[rc]] = static_cast<std::int64_t>(*p);
    if (vc)
      if (auto v = csv::parse_double(row[*vc]); v && population.count(row[rc]))
        vax[row[rc]][*d] = detail::checked_share(*v / double(population[row[rc]]), source, line);
  }

  OwidResult out;
  for (const auto& c : countries) {
    auto it = cases.find(c);
    if (it == cases.end()) {
      w.push_back({"unknown_region", c, "", std::nullopt, source + ": country not found"});
      continue;
    }
    if (!population.count(c)) throw InputError(source + ": no population for '" + c + "'");
    auto s = detail::assemble(c, population[c], it->second, end, source, w);
    if (s.new_cases.empty()) continue;
    detail::step_hold(out.vaccinated, c, column::kVaccinated, vax[c],
                      {s.start, add_days(s.start, long(s.new_cases.size()) - 1)});
    out.series.push_back(std::move(s));
  }
  return out;
}

/// State case series keyed by full state name. Only the contiguous states and DC are read;
/// a requested state absent from the file is an error.
inline std::vector<ReportedSeries> parse_cdc_states(std::istream& in,
                                                    const std::vector<StateInfo>& states,
                                                    const std::vector<std::string>& requested,
                                                    const ColumnMap& map, std::optional<Date> end,
                                                    Warnings& w, const std::string& source = "cdc") {
  auto t = csv::read_stream(in);
  const auto rc = map.require(t, "cdc", "region"), dc = map.require(t, "cdc", "date"),
             nc = map.require(t, "cdc", "new_cases");
  const auto merge = map.renames("cdc", "merge");
  std::map<std::string, const StateInfo*> by_code;
  for (const auto& s : states)
    if (s.contiguous) by_code[s.code] = &s;
  const auto wanted = detail::as_set(requested);
  for (const auto& r : requested) {
    bool known = false;
    for (const auto& s : states) known |= s.name == r && s.contiguous;
    if (!known) throw InputError(source + ": '" + r + "' is not a contiguous state or DC");
  }

  // Sub-jurisdictions (e.g. NYC) are summed into their state after the duplicate check.
  std::map<std::string, detail::DailyCells> parts;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto& row = t.rows[k];
    const long line = t.line_numbers[k];
    std::string code = row[rc];
    if (auto m = merge.find(code); m != merge.end()) code = m->second;
    auto st = by_code.find(code);
    if (st == by_code.end() || !wanted.count(st->second->name)) continue;
    auto d = detail::row_date(row[dc], source, line, st->second->name, w);
    if (!d) continue;
    if (end && *d > *end) continue;
    detail::put_unique(parts[row[rc]], st->second->name, *d, csv::parse_double(row[nc]), source, line);
  }
  detail::DailyCells cases;
  for (const auto& [part, cells] : parts)
    for (const auto& [name, rows] : cells)
      for (const auto& [d, v] : rows) {
        auto [it, fresh] = cases[name].emplace(d, v);
        if (!fresh && v) it->second = it->second.value_or(0.0) + *v;
      }

  std::vector<std::string> absent;
  for (const auto& r : requested)
    if (!cases.count(r)) absent.push_back(r);
  if (!absent.empty()) {
    std::string msg = source + ": states missing from file:";
    for (const auto& a : absent) msg += " " + a;
    throw InputError(msg);
  }
  std::vector<ReportedSeries> out;
  for (const auto& r : requested) {
    const StateInfo* info = nullptr;
    for (const auto& s : states)
      if (s.name == r) info = &s;
    auto s = detail::assemble(r, info->population, cases[r], end, source, w);
    if (!s.new_cases.empty()) out.push_back(std::move(s));
  }
  return out;
}

enum class OxcgrtLevel { National, UsStates };

/// Stringency and economic support indices rescaled from 0-100 to [0, 1].
inline CovariateTable parse_oxcgrt(std::istream& in, OxcgrtLevel level,
                                   const std::vector<std::string>& regions, const ColumnMap& map,
                                   Warnings& w, const std::string& source = "oxcgrt") {
  auto t = csv::read_stream(in);
  const auto cc = map.require(t, "oxcgrt", "country"), dc = map.require(t, "oxcgrt", "date"),
             sc = map.require(t, "oxcgrt", "stringency"), ec = map.require(t, "oxcgrt", "econ_support");
  const auto rc = map.find(t, "oxcgrt", "region"), jc = map.find(t, "oxcgrt", "jurisdiction");
  const auto wanted = detail::as_set(regions);

  CovariateTable out({column::kStringency, column::kEconSupport});
  std::set<std::pair<std::string, Date>> seen;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto& row = t.rows[k];
    const long line = t.line_numbers[k];
    const std::string sub = rc ? row[*rc] : "";
    const std::string jur = jc ? row[*jc] : "";
    std::string key;
    if (level == OxcgrtLevel::National) {
      if (!sub.empty() || (!jur.empty() && jur != "NAT_TOTAL")) continue;
      key = row[cc];
    } else {
      if (row[cc] != "United States" || sub.empty() || (!jur.empty() && jur != "STATE_TOTAL")) continue;
      key = sub;
    }
    if (!wanted.count(key)) continue;
    auto d = detail::row_date(row[dc], source, line, key, w);
    if (!d) continue;
    if (!seen.insert({key, *d}).second)
      throw InputError(source + " line " + std::to_string(line) + ": duplicate key (" + key + ", " +
                       format_date(*d) + ")");
    if (auto v = csv::parse_double(row[sc])) out.set(key, *d, column::kStringency, detail::checked_share(*v / 100.0, source, line));
    if (auto v = csv::parse_double(row[ec])) out.set(key, *d, column::kEconSupport, detail::checked_share(*v / 100.0, source, line));
  }
  for (const auto& r : regions)
    if (!out.has_region(r)) w.push_back({"unknown_region", r, "", std::nullopt, source + ": region not found"});
  return out;
}

enum class VariantFill { StepHold, Linear };

/// Delta share on every day of `range`, from a coarser (typically biweekly) source.
inline CovariateTable parse_variants(std::istream& in, const std::vector<std::string>& regions,
                                     const ColumnMap& map, DateRange range, Warnings& w,
                                     VariantFill fill = VariantFill::StepHold,
                                     const std::string& source = "variants") {
  auto t = csv::read_stream(in);
  const auto rc = map.require(t, "variants", "region"), dc = map.require(t, "variants", "date");
  const auto share = map.find(t, "variants", "share");
  const auto num = map.find(t, "variants", "numerator"), den = map.find(t, "variants", "denominator");
  if (!share && !(num && den)) throw InputError(source + ": need a share column or numerator/denominator");
  const auto wanted = detail::as_set(regions);

  std::map<std::string, std::map<Date, double>> obs;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto& row = t.rows[k];
    const long line = t.line_numbers[k];
    if (!wanted.count(row[rc])) continue;
    auto d = detail::row_date(row[dc], source, line, row[rc], w);
    if (!d) continue;
    std::optional<double> v;
    if (share) {
      v = csv::parse_double(row[*share]);
    } else {
      auto a = csv::parse_double(row[*num]), b = csv::parse_double(row[*den]);
      if (a && b && *b > 0) v = *a / *b;
    }
    if (!v) continue;
    if (!obs[row[rc]].emplace(*d, detail::checked_share(*v, source, line)).second)
      throw InputError(source + " line " + std::to_string(line) + ": duplicate key (" + row[rc] + ", " +
                       format_date(*d) + ")");
  }
  CovariateTable out({column::kDelta});
  for (const auto& r : regions) {
    if (!obs.count(r)) w.push_back({"unknown_region", r, "", std::nullopt, source + ": region not found"});
    if (fill == VariantFill::StepHold)
      detail::step_hold(out, r, column::kDelta, obs[r], range);
    else
      detail::linear_fill(out, r, column::kDelta, obs[r], range);
  }
  return out;
}

/// Fully-vaccinated share per US state from a per-hundred column.
inline CovariateTable parse_us_vaccinations(std::istream& in, const std::vector<std::string>& states,
                                            const ColumnMap& map, DateRange range, Warnings& w,
                                            const std::string& source = "us_vaccinations") {
  auto t = csv::read_stream(in);
  const auto rc = map.require(t, "owid_us_vaccinations", "region"),
             dc = map.require(t, "owid_us_vaccinations", "date"),
             vc = map.require(t, "owid_us_vaccinations", "fully_vaccinated_per_hundred");
  const auto aliases = map.renames("owid_us_vaccinations", "aliases");
  const auto wanted = detail::as_set(states);
  std::map<std::string, std::map<Date, double>> obs;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto& row = t.rows[k];
    const long line = t.line_numbers[k];
    std::string key = row[rc];
    if (auto a = aliases.find(key); a != aliases.end()) key = a->second;
    if (!wanted.count(key)) continue;
    auto d = detail::row_date(row[dc], source, line, key, w);
    if (!d) continue;
    auto v = csv::parse_double(row[vc]);
    if (!v) continue;
    if (!obs[key].emplace(*d, detail::checked_share(*v / 100.0, source, line)).second)
      throw InputError(source + " line " + std::to_string(line) + ": duplicate key (" + key + ", " +
                       format_date(*d) + ")");
  }
  CovariateTable out({column::kVaccinated});
  for (const auto& s : states) {
    if (!obs.count(s)) w.push_back({"unknown_region", s, "", std::nullopt, source + ": state not found"});
    detail::step_hold(out, s, column::kVaccinated, obs[s], range);
  }
  return out;
}

/// Republican-governor dummy per state and day: rows (state code, 0/1, start, end-exclusive).
inline CovariateTable governor_table(std::istream& in, const std::vector<StateInfo>& states,
                                     const std::vector<std::string>& regions, DateRange range) {
  auto t = csv::read_stream(in);
  const auto sc = t.require_column("state", "governors"), pc = t.require_column("rep_governor", "governors"),
             bc = t.require_column("start", "governors"), ec = t.require_column("end", "governors");
  std::map<std::string, std::string> name_of;
  for (const auto& s : states) name_of[s.code] = s.name;
  CovariateTable out({column::kRepGovernor});
  const auto wanted = detail::as_set(regions);
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto& row = t.rows[k];
    auto name = name_of.find(row[sc]);
    if (name == name_of.end()) throw InputError("governors: unknown state code '" + row[sc] + "'");
    if (!wanted.count(name->second)) continue;
    auto from = parse_date(row[bc]);
    auto to = row[ec].empty() ? std::optional<Date>(add_days(range.last, 1)) : parse_date(row[ec]);
    if (!from || !to || (row[pc] != "0" && row[pc] != "1"))
      throw InputError("governors line " + std::to_string(t.line_numbers[k]) + ": malformed row");
    for (Date d = std::max(*from, range.first); d < *to && d <= range.last; d = add_days(d, 1))
      out.set(name->second, d, column::kRepGovernor, row[pc] == "1" ? 1.0 : 0.0);
  }
  for (const auto& r : regions)
    if (!out.has_region(r)) throw InputError("governors: no terms for '" + r + "'");
  return out;
}

// ---- canonical files ----

inline void write_cases_csv(std::ostream& out, const std::vector<ReportedSeries>& series) {
  csv::write_row(out, {"region_id", "date", "population", "new_cases"});
  auto sorted = series;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.region_id < b.region_id; });
  for (const auto& s : sorted)
    for (std::size_t t = 0; t < s.new_cases.size(); ++t)
      csv::write_row(out, {s.region_id, format_date(add_days(s.start, long(t))), std::to_string(s.population),
                           s.new_cases[t] ? csv::format_exact(*s.new_cases[t]) : ""});
}

inline std::vector<ReportedSeries> read_cases_csv(std::istream& in, const std::string& source = "cases.csv") {
  auto t = csv::read_stream(in);
  const auto rc = t.require_column("region_id", source), dc = t.require_column("date", source),
             pc = t.require_column("population", source), nc = t.require_column("new_cases", source);
  std::map<std::string, std::int64_t> population;
  detail::DailyCells cells;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto& row = t.rows[k];
    const long line = t.line_numbers[k];
    auto d = parse_date(row[dc]);
    auto p = csv::parse_double(row[pc]);
    if (!d || !p || *p <= 0)
      throw InputError(source + " line " + std::to_string(line) + ": malformed row");
    population[row[rc]] = static_cast<std::int64_t>(*p);
    auto v = csv::parse_double(row[nc]);
    if (v && *v < 0) throw InputError(source + " line " + std::to_string(line) + ": negative new_cases");
    detail::put_unique(cells, row[rc], *d, v, source, line);
  }
  std::vector<ReportedSeries> out;
  for (const auto& [region, rows] : cells) {
    ReportedSeries s{region, population[region], rows.begin()->first, {}};
    for (Date d = s.start; d <= rows.rbegin()->first; d = add_days(d, 1)) {
      auto it = rows.find(d);
      s.new_cases.push_back(it == rows.end() ? std::nullopt : it->second);
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline void write_covariates_csv(std::ostream& out, const CovariateTable& table) {
  std::vector<std::string> header{"region_id", "date"};
  for (const auto& c : table.columns()) header.push_back(c);
  csv::write_row(out, header);
  for (const auto& [region, by_date] : table.rows())
    for (const auto& [d, row] : by_date) {
      std::vector<std::string> cells{region, format_date(d)};
      for (std::size_t k = 0; k < table.columns().size(); ++k)
        cells.push_back(k < row.size() && row[k] ? csv::format_exact(*row[k]) : "");
      csv::write_row(out, cells);
    }
}

inline CovariateTable read_covariates_csv(std::istream& in, const std::string& source = "covariates.csv") {
  auto t = csv::read_stream(in);
  const auto rc = t.require_column("region_id", source), dc = t.require_column("date", source);
  std::vector<std::string> columns;
  std::vector<std::size_t> at;
  for (std::size_t k = 0; k < t.header.size(); ++k)
    if (k != rc && k != dc) {
      columns.push_back(t.header[k]);
      at.push_back(k);
    }
  CovariateTable out(columns);
  std::set<std::pair<std::string, Date>> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const long line = t.line_numbers[r];
    auto d = parse_date(row[dc]);
    if (!d) throw InputError(source + " line " + std::to_string(line) + ": malformed date");
    if (!seen.insert({row[rc], *d}).second)
      throw InputError(source + " line " + std::to_string(line) + ": duplicate key (" + row[rc] + ", " +
                       format_date(*d) + ")");
    for (std::size_t k = 0; k < columns.size(); ++k)
      if (auto v = csv::parse_double(row[at[k]])) out.set(row[rc], *d, columns[k], *v);
  }
  return out;
}

inline json warning_json(const Warning& w) {
  json j = json::object();
  j["kind"] = w.kind;
  j["region"] = w.region;
  j["date"] = w.date;
  j["line"] = w.line ? json(*w.line) : json(nullptr);
  j["message"] = w.message;
  return j;
}

/// One JSON object per line.
inline void write_warnings_jsonl(std::ostream& out, const Warnings& warnings) {
  for (const auto& w : warnings) out << warning_json(w).dump() << '\n';
}

} // namespace r0panel::ingest
