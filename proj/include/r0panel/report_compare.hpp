#pragma once

// Results bundles against reference tables or a simulation truth record, and the summary
// tables behind the R0 histograms and ranked bar charts.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "r0panel/csv.hpp"
#include "r0panel/error.hpp"

namespace r0panel::report {

using nlohmann::json;

/// key -> value, ordered so every report is written in the same order.
using Values = std::map<std::string, double>;

struct Tolerance {
  double abs = 1e-6;
  std::optional<double> rel;        ///< a row passes if within abs OR within rel
  std::optional<std::size_t> min_pass; ///< unset = every reference key must match and pass
};

struct Deviation {
  std::string key;
  double result = 0.0;
  double reference = 0.0;
  double abs_dev = 0.0;
  double rel_dev = 0.0; ///< |result - reference| / |reference|; inf when reference is 0 and they differ
  bool pass = false;
};

struct DiffReport {
  std::vector<Deviation> rows;
  std::vector<std::string> missing_in_result;    ///< reference keys with no result
  std::vector<std::string> missing_in_reference; ///< result keys with no reference
  Tolerance tolerance;
  std::size_t passed = 0;
  std::size_t required = 0;
  bool pass = false;

  double max_abs() const {
    double m = 0.0;
    for (const auto& r : rows) m = std::max(m, r.abs_dev);
    return m;
  }

  json to_json() const {
    json rs = json::array();
    for (const auto& r : rows)
      rs.push_back({{"key", r.key}, {"result", r.result}, {"reference", r.reference}, {"abs_dev", r.abs_dev},
                    {"rel_dev", std::isfinite(r.rel_dev) ? json(r.rel_dev) : json(nullptr)}, {"pass", r.pass}});
    return {{"pass", pass},
            {"passed", passed},
            {"required", required},
            {"compared", rows.size()},
            {"max_abs_dev", max_abs()},
            {"tolerance",
             {{"abs", tolerance.abs},
              {"rel", tolerance.rel ? json(*tolerance.rel) : json(nullptr)},
              {"min_pass", tolerance.min_pass ? json(*tolerance.min_pass) : json(nullptr)}}},
            {"missing_in_result", missing_in_result},
            {"missing_in_reference", missing_in_reference},
            {"rows", rs}};
  }

  std::string to_text() const {
    std::ostringstream out;
    std::size_t width = 3;
    for (const auto& r : rows) width = std::max(width, r.key.size());
    for (const auto& r : rows) {
      out << r.key << std::string(width - r.key.size() + 2, ' ') << csv::format_fixed(r.result, 4) << "  ref "
          << csv::format_fixed(r.reference, 4) << "  abs " << csv::format_fixed(r.abs_dev, 6) << "  rel "
          << (std::isfinite(r.rel_dev) ? csv::format_fixed(r.rel_dev, 4) : std::string("inf"))
          << (r.pass ? "  ok" : "  FAIL") << '\n';
    }
    for (const auto& k : missing_in_result) out << k << "  missing from result\n";
    for (const auto& k : missing_in_reference) out << k << "  not in reference\n";
    out << (pass ? "PASS" : "FAIL") << ": " << passed << "/" << required << " within abs " << tolerance.abs;
    if (tolerance.rel) out << " or rel " << *tolerance.rel;
    out << ", max abs deviation " << max_abs() << '\n';
    return out.str();
  }
};

inline DiffReport compare(const Values& result, const Values& reference, const Tolerance& tol = {}) {
  if (!(tol.abs >= 0.0) || (tol.rel && !(*tol.rel >= 0.0))) throw InputError("tolerances must be non-negative");
  DiffReport d;
  d.tolerance = tol;
  for (const auto& [key, ref] : reference) {
    auto it = result.find(key);
    if (it == result.end()) {
      d.missing_in_result.push_back(key);
      continue;
    }
    Deviation row{key, it->second, ref, std::abs(it->second - ref), 0.0, false};
    row.rel_dev = ref != 0.0 ? row.abs_dev / std::abs(ref) : (row.abs_dev == 0.0 ? 0.0 : INFINITY);
    row.pass = row.abs_dev <= tol.abs || (tol.rel && row.rel_dev <= *tol.rel);
    d.passed += row.pass;
    d.rows.push_back(row);
  }
  for (const auto& [key, v] : result)
    if (!reference.count(key)) d.missing_in_reference.push_back(key);
  d.required = tol.min_pass.value_or(reference.size());
  d.pass = d.passed >= d.required && (tol.min_pass || d.missing_in_result.empty());
  return d;
}

// ---- readers ----

inline double cell_number(const csv::Table& t, std::size_t row, std::size_t col, const std::string& source) {
  auto v = csv::parse_double(t.rows[row][col]);
  if (!v) throw InputError(source + ":" + std::to_string(t.line_numbers[row]) + ": bad number '" + t.rows[row][col] + "'");
  return *v;
}

/// `value_column` of a keyed CSV (r0_table.csv: region/estimate, coefficients.csv: term/estimate).
inline Values read_keyed(const std::string& path, const std::string& key_column, const std::string& value_column) {
  auto t = csv::read_file(path);
  const auto k = t.require_column(key_column, path), v = t.require_column(value_column, path);
  Values out;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    if (!out.emplace(t.rows[r][k], cell_number(t, r, v, path)).second)
      throw InputError(path + ": duplicate key '" + t.rows[r][k] + "'");
  return out;
}

inline Values bundle_r0(const std::string& dir, const std::string& column = "estimate") {
  return read_keyed((std::filesystem::path(dir) / "r0_table.csv").string(), "region", column);
}

/// Region intercepts, slope coefficients and tau from a bundle, keyed as truth_values() keys them.
inline Values bundle_values(const std::string& dir) {
  Values out;
  for (const auto& [k, v] : bundle_r0(dir)) out["alpha:" + k] = v;
  for (const auto& [k, v] : read_keyed((std::filesystem::path(dir) / "coefficients.csv").string(), "term", "estimate"))
    out["coef:" + k] = v;
  const auto meta_path = (std::filesystem::path(dir) / "fit_meta.json").string();
  std::ifstream in(meta_path);
  if (!in) throw InputError("cannot open '" + meta_path + "'");
  auto meta = json::parse(in, nullptr, false);
  if (meta.is_discarded()) throw InputError(meta_path + ": not valid JSON");
  if (meta.contains("tau") && meta["tau"].is_number()) out["tau"] = meta["tau"].get<double>();
  return out;
}

/// truth.json from `simulate`. Threshold indicator is named as the estimator names it.
inline Values truth_values(const json& truth, const std::string& threshold_term = "threshold_indicator") {
  Values out;
  try {
    for (const auto& r : truth.at("regions")) out["alpha:" + r.at("region_id").get<std::string>()] = r.at("alpha").get<double>();
    for (const auto& [k, v] : truth.at("psi").items()) out["coef:" + k] = v.get<double>();
    out["coef:" + threshold_term] = truth.at("kappa").get<double>();
    out["tau"] = truth.at("tau").get<double>();
  } catch (const json::exception& e) {
    throw InputError(std::string("truth record: ") + e.what());
  }
  return out;
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw InputError(path + ": not valid JSON");
  return j;
}

/// Long-format reference table (key column, sample, mf, value columns) filtered to one column of
/// the reference table, e.g. sample "prevax", mf "5-2".
inline Values read_reference(const std::string& path, const std::string& sample, const std::string& mf,
                             const std::string& value_column = "estimate") {
  auto t = csv::read_file(path);
  const auto key = t.column("region") ? *t.column("region") : t.require_column("term", path);
  const auto s = t.require_column("sample", path), m = t.require_column("mf", path);
  const auto v = t.require_column(value_column, path);
  Values out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r][s] != sample || t.rows[r][m] != mf || t.rows[r][v].empty()) continue;
    out[t.rows[r][key]] = cell_number(t, r, v, path);
  }
  if (out.empty()) throw InputError(path + ": no rows for sample '" + sample + "', mf '" + mf + "'");
  return out;
}

// ---- report ----

struct NamedEstimates {
  std::string name; ///< bundle label
  Values r0;
};

struct Summary {
  std::vector<std::pair<std::string, double>> bundle_means;
  double mean = 0.0; ///< pooled over every region of every bundle
  std::size_t count = 0;

  std::string line() const {
    std::ostringstream s;
    s << "mean R0 " << csv::format_fixed(mean, 2) << " over " << count << " estimates";
    if (bundle_means.size() > 1) {
      s << " (";
      for (std::size_t k = 0; k < bundle_means.size(); ++k)
        s << (k ? ", " : "") << bundle_means[k].first << " " << csv::format_fixed(bundle_means[k].second, 2);
      s << ")";
    }
    return s.str();
  }
};

inline Summary summarize(const std::vector<NamedEstimates>& bundles) {
  Summary s;
  double total = 0.0;
  for (const auto& b : bundles) {
    double sum = 0.0;
    for (const auto& [k, v] : b.r0) sum += v;
    if (!b.r0.empty()) s.bundle_means.emplace_back(b.name, sum / double(b.r0.size()));
    total += sum;
    s.count += b.r0.size();
  }
  if (s.count == 0) throw InputError("report: no estimates");
  s.mean = total / double(s.count);
  return s;
}

/// Bin counts on [k w, (k+1) w), bins spanning every bundle so columns line up.
inline void write_histogram(std::ostream& out, const std::vector<NamedEstimates>& bundles, double width = 0.5) {
  if (!(width > 0.0)) throw InputError("histogram bin width must be positive");
  long lo = 0, hi = 0;
  bool first = true;
  for (const auto& b : bundles)
    for (const auto& [k, v] : b.r0) {
      const long bin = long(std::floor(v / width));
      lo = first ? bin : std::min(lo, bin);
      hi = first ? bin : std::max(hi, bin);
      first = false;
    }
  csv::write_row(out, {"bundle", "bin_lo", "bin_hi", "count"});
  for (const auto& b : bundles) {
    std::vector<std::size_t> counts(std::size_t(hi - lo + 1), 0);
    for (const auto& [k, v] : b.r0) ++counts[std::size_t(long(std::floor(v / width)) - lo)];
    for (long bin = lo; bin <= hi; ++bin)
      csv::write_row(out, {b.name, csv::format_fixed(double(bin) * width, 2), csv::format_fixed(double(bin + 1) * width, 2),
                           std::to_string(counts[std::size_t(bin - lo)])});
  }
}

/// Regions ranked by estimate, largest first; ties by name.
inline void write_bar_chart(std::ostream& out, const std::vector<NamedEstimates>& bundles) {
  csv::write_row(out, {"bundle", "rank", "region", "estimate"});
  for (const auto& b : bundles) {
    std::vector<std::pair<std::string, double>> rows(b.r0.begin(), b.r0.end());
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& c) { return a.second > c.second; });
    for (std::size_t k = 0; k < rows.size(); ++k)
      csv::write_row(out, {b.name, std::to_string(k + 1), rows[k].first, csv::format_fixed(rows[k].second, 2)});
  }
}

/// Reads r0_table.csv from each bundle directory and writes histogram.csv, bar_chart.csv and
/// summary.txt into `out_dir`. Returns the summary line.
inline std::string cmd_report(const std::vector<std::string>& bundle_dirs, const std::string& out_dir, double width = 0.5) {
  if (bundle_dirs.empty()) throw InputError("report: no bundles given");
  std::vector<NamedEstimates> bundles;
  for (const auto& d : bundle_dirs) {
    auto name = std::filesystem::path(d).lexically_normal().filename().string();
    if (name.empty()) name = std::filesystem::path(d).lexically_normal().parent_path().filename().string();
    bundles.push_back({name, bundle_r0(d)});
  }
  auto s = summarize(bundles);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw InputError("cannot create output directory '" + out_dir + "': " + ec.message());
  auto open = [&](const char* f) {
    std::ofstream o(std::filesystem::path(out_dir) / f, std::ios::binary);
    if (!o) throw InputError("cannot write '" + (std::filesystem::path(out_dir) / f).string() + "'");
    return o;
  };
  {
    auto o = open("histogram.csv");
    write_histogram(o, bundles, width);
  }
  {
    auto o = open("bar_chart.csv");
    write_bar_chart(o, bundles);
  }
  {
    auto o = open("summary.txt");
    o << s.line() << '\n';
  }
  return s.line();
}

} // namespace r0panel::report
