#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ckb/core_types.hpp"

namespace ckb {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Flat `key = value` configuration; `#` starts a comment.
///
/// Mandatory keys: m, eta, D, sigma0, t_end, n_steps. Everything else has a
/// default. `force` selects the single-run realization (white, constant or
/// zero, with F0 for constant).
struct RunConfig {
  double m = 0.0;
  double eta = 0.0;
  double D = 0.0;
  double sigma0 = 0.0;
  double x0 = 0.0;
  double t_end = 0.0;
  std::size_t n_steps = 0;
  double x_min = -32.0;
  double x_max = 32.0;
  std::size_t n_points = 1024;
  std::size_t n_paths = 2000;
  std::uint64_t seed = 42;
  std::string engine = "analytic";
  std::vector<double> probe_times;  // empty: {0.5, 1, 2, 5, 10} / gamma
  std::string force = "white";
  double F0 = 0.0;
  double norm_tol = 1e-8;
  double width_tol = 1e-8;
  double engine_tol = 1e-3;

  PhysicalParams params() const { return {m, eta, D}; }
  TimeGrid tgrid() const { return {t_end, n_steps}; }
  SpatialGrid xgrid() const { return {x_min, x_max, n_points}; }
};

inline RunConfig parse_config(std::istream& in, const std::string& source = "<config>") {
  RunConfig cfg;
  std::map<std::string, int> seen;
  std::string raw;
  int line_no = 0;

  auto fail = [&](const std::string& msg) -> ParseError { return ParseError(source + ":" + std::to_string(line_no) + ": " + msg); };

  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw fail("expected 'key = value'");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw fail("empty key");
    if (value.empty()) throw fail("empty value for key '" + key + "'");
    if (seen.count(key)) throw fail("duplicate key '" + key + "' (first set on line " + std::to_string(seen[key]) + ")");
    seen[key] = line_no;

    auto num = [&]() {
      auto v = parse_double(value);
      if (!v || !std::isfinite(*v)) throw fail("key '" + key + "': not a finite number: '" + std::string(value) + "'");
      return *v;
    };
    auto count = [&]() -> std::uint64_t {
      std::uint64_t v = 0;
      const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
      if (res.ec != std::errc() || res.ptr != value.data() + value.size())
        throw fail("key '" + key + "': not a non-negative integer: '" + std::string(value) + "'");
      return v;
    };

    if (key == "m") cfg.m = num();
    else if (key == "eta") cfg.eta = num();
    else if (key == "D") cfg.D = num();
    else if (key == "sigma0") cfg.sigma0 = num();
    else if (key == "x0") cfg.x0 = num();
    else if (key == "t_end") cfg.t_end = num();
    else if (key == "n_steps") cfg.n_steps = count();
    else if (key == "x_min") cfg.x_min = num();
    else if (key == "x_max") cfg.x_max = num();
    else if (key == "n_points") cfg.n_points = count();
    else if (key == "n_paths") cfg.n_paths = count();
    else if (key == "seed") cfg.seed = count();
    else if (key == "F0") cfg.F0 = num();
    else if (key == "norm_tol") cfg.norm_tol = num();
    else if (key == "width_tol") cfg.width_tol = num();
    else if (key == "engine_tol") cfg.engine_tol = num();
    else if (key == "engine") {
      cfg.engine = value;
      if (cfg.engine != "analytic" && cfg.engine != "solver" && cfg.engine != "both")
        throw fail("engine must be analytic, solver or both");
    } else if (key == "force") {
      cfg.force = value;
      if (cfg.force != "white" && cfg.force != "constant" && cfg.force != "zero")
        throw fail("force must be white, constant or zero");
    } else if (key == "probe_times") {
      std::string_view rest = value;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string_view item = detail::trim(rest.substr(0, comma));
        auto v = parse_double(item);
        if (!v || !(*v >= 0.0)) throw fail("probe_times: bad entry '" + std::string(item) + "'");
        cfg.probe_times.push_back(*v);
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
      }
    } else {
      throw fail("unknown key '" + key + "'");
    }
  }

  for (const char* k : {"m", "eta", "D", "sigma0", "t_end", "n_steps"})
    if (!seen.count(k)) throw ParseError(source + ": missing mandatory key '" + std::string(k) + "'");
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open config file '" + path + "'");
  return parse_config(f, path);
}

/// Comma-separated table with a header row.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<double> row) {
    if (row.size() != header_.size()) throw std::invalid_argument("CSV row width does not match header");
    rows_.push_back(std::move(row));
  }

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<double>>& rows() const { return rows_; }

  void write(std::ostream& os) const {
    for (std::size_t c = 0; c < header_.size(); ++c) os << (c ? "," : "") << header_[c];
    os << '\n';
    for (const auto& r : rows_) {
      for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "," : "") << format_double(r[c]);
      os << '\n';
    }
  }

  static CsvTable read(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError("CSV: missing header");
    std::vector<std::string> header;
    std::stringstream hs(line);
    for (std::string cell; std::getline(hs, cell, ',');) header.push_back(cell);
    CsvTable t(header);
    int line_no = 1;
    while (std::getline(is, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::vector<double> row;
      std::stringstream rs(line);
      for (std::string cell; std::getline(rs, cell, ',');) {
        auto v = parse_double(cell);
        if (!v) throw ParseError("CSV line " + std::to_string(line_no) + ": bad number '" + cell + "'");
        row.push_back(*v);
      }
      t.add_row(std::move(row));
    }
    return t;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<double>> rows_;
};

inline const std::vector<std::string>& ensemble_csv_columns() {
  static const std::vector<std::string> cols{"t",      "tau",          "center_mean",    "center_var",
                                             "dx_qu",  "dx_cl_sample", "dx_cl_analytic", "dx_total"};
  return cols;
}

inline const std::vector<std::string>& simulate_csv_columns() {
  static const std::vector<std::string> cols{"t",    "tau", "norm", "mean_x", "var_x",
                                             "sigma_analytic", "f1", "I", "f2"};
  return cols;
}

}  // namespace ckb
