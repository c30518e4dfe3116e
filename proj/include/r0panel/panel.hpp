#pragma once

// Unbalanced panel assembly: one observation per (region, day t) pairing beta_t / gamma with
// covariates and the threshold variable dated t - p.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "r0panel/csv.hpp"
#include "r0panel/date.hpp"
#include "r0panel/epi_transform.hpp"
#include "r0panel/error.hpp"

namespace r0panel {

namespace column {
inline constexpr const char* kStringency = "stringency";
inline constexpr const char* kEconSupport = "econ_support";
inline constexpr const char* kVaccinated = "vaccinated_share";
inline constexpr const char* kDelta = "delta_share";
inline constexpr const char* kRepGovernor = "rep_governor";
} // namespace column

/// Dated covariate values per region on a shared column layout. Absent cells are nullopt.
class CovariateTable {
public:
  using Row = std::vector<std::optional<double>>;

  CovariateTable() = default;
  explicit CovariateTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  const std::vector<std::string>& columns() const noexcept { return columns_; }

  std::optional<std::size_t> column_index(const std::string& name) const {
    for (std::size_t k = 0; k < columns_.size(); ++k)
      if (columns_[k] == name) return k;
    return std::nullopt;
  }

  std::size_t ensure_column(const std::string& name) {
    if (auto k = column_index(name)) return *k;
    columns_.push_back(name);
    for (auto& [region, by_date] : rows_)
      for (auto& [d, row] : by_date) row.resize(columns_.size());
    return columns_.size() - 1;
  }

  void set(const std::string& region, Date date, const std::string& name, double value) {
    std::size_t k = ensure_column(name);
    auto& row = rows_[region][date];
    row.resize(columns_.size());
    row[k] = value;
  }

  std::optional<double> get(const std::string& region, Date date, std::size_t k) const {
    auto r = rows_.find(region);
    if (r == rows_.end()) return std::nullopt;
    auto d = r->second.find(date);
    if (d == r->second.end() || k >= d->second.size()) return std::nullopt;
    return d->second[k];
  }

  std::optional<double> get(const std::string& region, Date date, const std::string& name) const {
    auto k = column_index(name);
    if (!k) return std::nullopt;
    return get(region, date, *k);
  }

  bool has_region(const std::string& region) const { return rows_.count(region) > 0; }

  const std::map<std::string, std::map<Date, Row>>& rows() const noexcept { return rows_; }

  /// Copies every cell of `other` into this table (other wins on conflicts).
  void merge(const CovariateTable& other) {
    for (const auto& [region, by_date] : other.rows_)
      for (const auto& [d, row] : by_date)
        for (std::size_t k = 0; k < row.size(); ++k)
          if (row[k]) set(region, d, other.columns_[k], *row[k]);
  }

private:
  std::vector<std::string> columns_;
  std::map<std::string, std::map<Date, Row>> rows_;
};

/// Product of two covariate columns, e.g. Republican-governor dummy x economic support.
struct Interaction {
  std::string left;
  std::string right;
  std::string name() const { return left + "_x_" + right; }
};

struct RegressorSpec {
  std::vector<std::string> columns;
  std::vector<Interaction> interactions;

  std::vector<std::string> names() const {
    std::vector<std::string> out = columns;
    for (const auto& ia : interactions) out.push_back(ia.name());
    return out;
  }

  /// Stringency and economic support, plus vaccination/Delta shares for samples past the
  /// vaccine roll-out and the Republican-governor interaction for US states.
  static RegressorSpec standard(bool vaccination_era, bool us_states) {
    RegressorSpec s;
    s.columns = {column::kStringency, column::kEconSupport};
    if (vaccination_era) {
      s.columns.push_back(column::kVaccinated);
      s.columns.push_back(column::kDelta);
    }
    if (us_states) s.interactions.push_back({column::kRepGovernor, column::kEconSupport});
    return s;
  }
};

struct PanelObservation {
  std::size_t region = 0; ///< index into Panel::region_ids
  Date date{};            ///< day t of beta_t; regressors are dated t - p
  double y = 0.0;
  std::vector<double> x;
  double thr_var = 0.0;
};

/// Observations sorted by (region, date); region indices follow region_ids order.
struct Panel {
  std::vector<std::string> region_ids;
  std::vector<std::string> regressor_names;
  std::vector<PanelObservation> obs;
  int lag_p = 0;

  std::size_t size() const noexcept { return obs.size(); }
  std::size_t regions() const noexcept { return region_ids.size(); }
  const std::string& region_of(const PanelObservation& o) const { return region_ids[o.region]; }

  /// Per-region (first, one-past-last) observation ranges.
  std::vector<std::pair<std::size_t, std::size_t>> region_ranges() const {
    std::vector<std::pair<std::size_t, std::size_t>> out(regions(), {0, 0});
    std::vector<bool> seen(regions(), false);
    for (std::size_t k = 0; k < obs.size(); ++k) {
      auto r = obs[k].region;
      if (!seen[r]) {
        out[r] = {k, k};
        seen[r] = true;
      }
      out[r].second = k + 1;
    }
    return out;
  }

  /// Calendar span (days, inclusive) of each region's observations.
  std::vector<long> region_spans() const {
    std::vector<long> out(regions(), 0);
    for (auto [b, e] : region_ranges())
      if (e > b) out[obs[b].region] = days_between(obs[b].date, obs[e - 1].date) + 1;
    return out;
  }

  void validate() const {
    for (std::size_t k = 0; k < obs.size(); ++k) {
      const auto& o = obs[k];
      if (o.region >= regions()) throw InputError("panel: region index out of range");
      if (o.x.size() != regressor_names.size())
        throw InputError("panel: covariate vector length mismatch");
      if (k > 0) {
        const auto& p = obs[k - 1];
        if (p.region > o.region || (p.region == o.region && p.date >= o.date))
          throw InputError("panel: observations must be sorted by region then date");
      }
    }
  }
};

/// Optional restriction of observation dates t to [first, last - 1]: y_t needs c_{t+1}.
struct SampleWindow {
  std::optional<Date> first;
  std::optional<Date> last;
};

inline Panel build_panel(const std::vector<EpiFrame>& frames, const CovariateTable& covariates,
                         int lag_p, const RegressorSpec& spec, Warnings& warnings,
                         const SampleWindow& window = {}) {
  if (lag_p < 0) throw InputError("lag_p must be non-negative");
  Panel panel;
  panel.lag_p = lag_p;
  panel.regressor_names = spec.names();

  std::vector<std::size_t> col_idx;
  for (const auto& name : spec.columns) {
    auto k = covariates.column_index(name);
    if (!k) throw InputError("covariate column '" + name + "' not available");
    col_idx.push_back(*k);
  }
  std::vector<std::pair<std::size_t, std::size_t>> ia_idx;
  for (const auto& ia : spec.interactions) {
    auto l = covariates.column_index(ia.left), r = covariates.column_index(ia.right);
    if (!l || !r) throw InputError("interaction column '" + ia.name() + "' not available");
    ia_idx.emplace_back(*l, *r);
  }

  std::vector<const EpiFrame*> ordered;
  for (const auto& f : frames) ordered.push_back(&f);
  std::sort(ordered.begin(), ordered.end(),
            [](auto* a, auto* b) { return a->region_id < b->region_id; });

  for (const EpiFrame* f : ordered) {
    const auto& id = f->region_id;
    if (f->size() < static_cast<std::size_t>(lag_p) + 2) {
      warnings.push_back({"region_dropped", id, "", std::nullopt,
                          "fewer than lag_p + 2 usable days"});
      continue;
    }
    std::vector<PanelObservation> rows;
    long gaps = 0, missing_y = 0;
    for (std::size_t t = static_cast<std::size_t>(lag_p); t + 1 < f->size(); ++t) {
      const Date d = f->date_at(t);
      if (window.first && d < *window.first) continue;
      if (window.last && d >= *window.last) continue;
      if (!f->y[t]) {
        ++missing_y;
        continue;
      }
      const Date lagged = add_days(d, -lag_p);
      PanelObservation o;
      o.date = d;
      o.y = *f->y[t];
      o.thr_var = f->dc_per_100k[t - static_cast<std::size_t>(lag_p)];
      bool complete = true;
      for (std::size_t k : col_idx) {
        auto v = covariates.get(id, lagged, k);
        if (!v) {
          complete = false;
          break;
        }
        o.x.push_back(*v);
      }
      for (auto [l, r] : ia_idx) {
        if (!complete) break;
        auto a = covariates.get(id, lagged, l), b = covariates.get(id, lagged, r);
        if (!a || !b) {
          complete = false;
          break;
        }
        o.x.push_back(*a * *b);
      }
      if (!complete) {
        ++gaps;
        continue;
      }
      rows.push_back(std::move(o));
    }
    if (gaps > 0)
      warnings.push_back({"covariate_gap", id, "", std::nullopt,
                          std::to_string(gaps) + " dates dropped for missing covariates"});
    if (missing_y > 0)
      warnings.push_back({"missing_y", id, "", std::nullopt,
                          std::to_string(missing_y) + " dates with zero active infections"});
    if (rows.size() < 2) {
      warnings.push_back({"region_dropped", id, "", std::nullopt,
                          "fewer than 2 complete observations"});
      continue;
    }
    const std::size_t r = panel.region_ids.size();
    panel.region_ids.push_back(id);
    for (auto& o : rows) {
      o.region = r;
      panel.obs.push_back(std::move(o));
    }
  }
  return panel;
}

// Columnar interchange format: region_id,date,y,<regressors...>,thr_var

inline void write_panel_csv(std::ostream& out, const Panel& panel) {
  std::vector<std::string> header{"region_id", "date", "y"};
  for (const auto& n : panel.regressor_names) header.push_back(n);
  header.push_back("thr_var");
  csv::write_row(out, header);
  std::vector<std::string> cells;
  for (const auto& o : panel.obs) {
    cells.clear();
    cells.push_back(panel.region_of(o));
    cells.push_back(format_date(o.date));
    cells.push_back(csv::format_exact(o.y));
    for (double v : o.x) cells.push_back(csv::format_exact(v));
    cells.push_back(csv::format_exact(o.thr_var));
    csv::write_row(out, cells);
  }
}

inline Panel read_panel_csv(std::istream& in, int lag_p = 0, const std::string& source = "panel") {
  auto table = csv::read_stream(in);
  const auto& h = table.header;
  if (h.size() < 4 || h[0] != "region_id" || h[1] != "date" || h[2] != "y" || h.back() != "thr_var")
    throw InputError(source + ": expected header region_id,date,y,...,thr_var");
  Panel panel;
  panel.lag_p = lag_p;
  panel.regressor_names.assign(h.begin() + 3, h.end() - 1);
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<PanelObservation>> by_region;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto where = source + ":" + std::to_string(table.line_numbers[r]);
    auto d = parse_date(row[1]);
    if (!d) throw InputError(where + ": malformed date '" + row[1] + "'");
    PanelObservation o;
    o.date = *d;
    auto y = csv::parse_double(row[2]);
    auto q = csv::parse_double(row.back());
    if (!y || !q) throw InputError(where + ": non-numeric y or thr_var");
    o.y = *y;
    o.thr_var = *q;
    for (std::size_t k = 3; k + 1 < row.size(); ++k) {
      auto v = csv::parse_double(row[k]);
      if (!v) throw InputError(where + ": non-numeric covariate '" + h[k] + "'");
      o.x.push_back(*v);
    }
    auto [it, inserted] = index.emplace(row[0], by_region.size());
    if (inserted) by_region.emplace_back();
    by_region[it->second].push_back(std::move(o));
  }
  for (const auto& [id, k] : index) {
    auto& rows = by_region[k];
    std::sort(rows.begin(), rows.end(), [](auto& a, auto& b) { return a.date < b.date; });
    for (std::size_t j = 1; j < rows.size(); ++j)
      if (rows[j].date == rows[j - 1].date)
        throw InputError(source + ": duplicate key (" + id + ", " + format_date(rows[j].date) + ")");
    const std::size_t r = panel.region_ids.size();
    panel.region_ids.push_back(id);
    for (auto& o : rows) {
      o.region = r;
      panel.obs.push_back(std::move(o));
    }
  }
  return panel;
}

} // namespace r0panel
