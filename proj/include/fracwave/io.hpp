#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fracwave/error.hpp"
#include "fracwave/experiments.hpp"

#ifndef FRACWAVE_VERSION
#define FRACWAVE_VERSION "unknown"
#endif

namespace fracwave::io {

namespace fs = std::filesystem;

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// ---------------------------------------------------------------- CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorKind::io, "missing column", "no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
  std::vector<double> values(const std::string& name) const {
    const std::size_t c = column(name);
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r[c]);
    return v;
  }
};

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "write failed", "cannot open " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::io, "write failed", "error writing " + path.string());
}

inline std::string read_text(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::io, "not found", path.string() + " does not exist");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "read failed", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string to_csv(const CsvTable& t) {
  std::string s;
  for (std::size_t j = 0; j < t.header.size(); ++j) s += (j ? "," : "") + t.header[j];
  s += '\n';
  for (const auto& r : t.rows) {
    for (std::size_t j = 0; j < r.size(); ++j) s += (j ? "," : "") + format_number(r[j]);
    s += '\n';
  }
  return s;
}

inline void write_csv(const fs::path& path, const CsvTable& t) { write_text(path, to_csv(t)); }

inline CsvTable read_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  CsvTable t;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) out.push_back(cell);
    return out;
  };
  if (!std::getline(in, line) || line.empty()) throw Error(ErrorKind::io, "empty file", path.string() + " has no header");
  t.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size())
      throw Error(ErrorKind::io, "bad row",
                  path.string() + ":" + std::to_string(lineno) + " has " + std::to_string(cells.size()) + " cells");
    std::vector<double> r;
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (end == c.c_str())
        throw Error(ErrorKind::io, "bad cell", path.string() + ":" + std::to_string(lineno) + " '" + c + "'");
      r.push_back(v);
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

// ---------------------------------------------------------------- SVG

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
  bool dashed = false;
  bool markers = false;
};

struct PlotSpec {
  std::string title, xlabel, ylabel;
  bool logx = false, logy = false;
  std::vector<PlotSeries> series;
};

/// Standalone SVG line plot with axes, ticks and a legend.
inline std::string to_svg(const PlotSpec& p) {
  const double W = 640, H = 420, ml = 70, mr = 20, mt = 40, mb = 55;
  auto tx = [&](double v) { return p.logx ? std::log10(v) : v; };
  auto ty = [&](double v) { return p.logy ? std::log10(v) : v; };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : p.series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      const double a = tx(s.x[i]), b = ty(s.y[i]);
      if (!std::isfinite(a) || !std::isfinite(b)) continue;
      x0 = std::min(x0, a), x1 = std::max(x1, a), y0 = std::min(y0, b), y1 = std::max(y1, b);
    }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-300) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-300) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad, y1 += pad;
  auto px = [&](double a) { return ml + (a - x0) / (x1 - x0) * (W - ml - mr); };
  auto py = [&](double b) { return H - mb - (b - y0) / (y1 - y0) * (H - mt - mb); };
  auto num = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f", v);
    return std::string(b);
  };
  auto esc = [](const std::string& s) {
    std::string o;
    for (char c : s) {
      if (c == '<') o += "&lt;";
      else if (c == '>') o += "&gt;";
      else if (c == '&') o += "&amp;";
      else o += c;
    }
    return o;
  };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << esc(p.title) << "</text>\n";
  o << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << W - ml - mr << "\" height=\"" << H - mt - mb
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double a = x0 + (x1 - x0) * k / 4.0, b = y0 + (y1 - y0) * k / 4.0;
    const double va = p.logx ? std::pow(10.0, a) : a, vb = p.logy ? std::pow(10.0, b) : b;
    o << "<text x=\"" << num(px(a)) << "\" y=\"" << H - mb + 16 << "\" text-anchor=\"middle\">" << format_number(va)
      << "</text>\n";
    o << "<text x=\"" << ml - 6 << "\" y=\"" << num(py(b) + 4) << "\" text-anchor=\"end\">" << format_number(vb)
      << "</text>\n";
  }
  o << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << esc(p.xlabel)
    << (p.logx ? " (log)" : "") << "</text>\n";
  o << "<text x=\"16\" y=\"" << (mt + H - mb) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (mt + H - mb) / 2 << ")\">" << esc(p.ylabel) << (p.logy ? " (log)" : "") << "</text>\n";
  for (std::size_t k = 0; k < p.series.size(); ++k) {
    const auto& s = p.series[k];
    const char* c = colors[k % 6];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      const double a = tx(s.x[i]), b = ty(s.y[i]);
      if (!std::isfinite(a) || !std::isfinite(b)) continue;
      pts += num(px(a)) + "," + num(py(b)) + " ";
      if (s.markers) o << "<circle cx=\"" << num(px(a)) << "\" cy=\"" << num(py(b)) << "\" r=\"2.5\" fill=\"" << c << "\"/>\n";
    }
    o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\""
      << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"" << pts << "\"/>\n";
    o << "<text x=\"" << ml + 10 << "\" y=\"" << mt + 16 + 15 * k << "\" fill=\"" << c << "\">" << esc(s.label)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

inline void write_svg(const fs::path& path, const PlotSpec& p) { write_text(path, to_svg(p)); }

// ---------------------------------------------------------------- config

/// Every tunable of the command-line tools. Text form: one `key = value` per
/// line, `#` starts a comment.
struct RunConfig {
  int p = 3;
  double alpha = 1.0;
  double L = 256.0;
  std::size_t points = 1024;
  double tol = 1e-12;
  int max_iter = 5000;
  // evolve
  double t_end = 10.0;
  double cfl = 0.5;
  double record_dt = 0.5;
  double energy_budget = 1e-9;
  // profile
  double b = 0.05;
  std::vector<double> b_list{0.02, 0.04, 0.08, 0.16};
  // spectrum
  int eigenpairs = 3;
  int trials = 200;
  // blow-up experiment, including the weights of N and F
  BlowupConfig blowup;
  unsigned threads = 1;
  std::uint64_t seed = 20240601;
};

namespace detail {
inline double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty())
    throw Error(ErrorKind::config, "bad value", "field '" + key + "': expected a number, got '" + v + "'");
  return x;
}
inline long long to_int(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (x != std::floor(x) || std::abs(x) > 9e15)
    throw Error(ErrorKind::config, "bad value", "field '" + key + "': expected an integer, got '" + v + "'");
  return static_cast<long long>(x);
}
inline std::size_t to_count(const std::string& key, const std::string& v) {
  const long long x = to_int(key, v);
  if (x < 0) throw Error(ErrorKind::config, "bad value", "field '" + key + "' must be non-negative");
  return static_cast<std::size_t>(x);
}
inline std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::string cell;
  std::istringstream in(v);
  while (std::getline(in, cell, ',')) {
    cell.erase(0, cell.find_first_not_of(" \t"));
    cell.erase(cell.find_last_not_of(" \t") + 1);
    out.push_back(to_double(key, cell));
  }
  return out;
}
inline std::string trim(std::string s) {
  s.erase(0, s.find_first_not_of(" \t\r"));
  const auto e = s.find_last_not_of(" \t\r");
  s.erase(e == std::string::npos ? 0 : e + 1);
  return s;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;
struct FieldDef {
  Setter set;
  Getter get;
};

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_number(v[i]);
  return s;
}

#define FW_NUM(name, expr, conv)                                                             \
  {name, {[](RunConfig& c, const std::string& k, const std::string& v) { expr = conv(k, v); }, \
          [](const RunConfig& c) { return format_number(static_cast<double>(expr)); }}}

inline const std::map<std::string, FieldDef>& fields() {
  static const std::map<std::string, FieldDef> f = {
      FW_NUM("p", c.p, to_int),
      FW_NUM("alpha", c.alpha, to_double),
      FW_NUM("L", c.L, to_double),
      FW_NUM("points", c.points, to_count),
      FW_NUM("tol", c.tol, to_double),
      FW_NUM("max_iter", c.max_iter, to_int),
      FW_NUM("t_end", c.t_end, to_double),
      FW_NUM("cfl", c.cfl, to_double),
      FW_NUM("record_dt", c.record_dt, to_double),
      FW_NUM("energy_budget", c.energy_budget, to_double),
      FW_NUM("b", c.b, to_double),
      FW_NUM("eigenpairs", c.eigenpairs, to_int),
      FW_NUM("trials", c.trials, to_int),
      FW_NUM("n", c.blowup.n, to_int),
      FW_NUM("lambda_in", c.blowup.lambda_in, to_double),
      FW_NUM("t_stop", c.blowup.t_stop, to_double),
      FW_NUM("t_min", c.blowup.t_min, to_double),
      FW_NUM("box", c.blowup.box, to_double),
      FW_NUM("resolution", c.blowup.resolution, to_double),
      FW_NUM("regrid_above", c.blowup.regrid_above, to_double),
      FW_NUM("records_per_doubling", c.blowup.records_per_doubling, to_int),
      FW_NUM("blowup_cfl", c.blowup.cfl, to_double),
      FW_NUM("blowup_energy_budget", c.blowup.energy_budget, to_double),
      FW_NUM("theta", c.blowup.weights.theta, to_double),
      FW_NUM("B", c.blowup.weights.B, to_double),
      FW_NUM("threads", c.threads, to_count),
      FW_NUM("seed", c.seed, to_count),
      {"b_list",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.b_list = to_list(k, v); },
        [](const RunConfig& c) { return join(c.b_list); }}},
      {"direction",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.blowup.direction = parse_direction(v); },
        [](const RunConfig& c) { return std::string(to_string(c.blowup.direction)); }}},
  };
  return f;
}
#undef FW_NUM
}  // namespace detail

/// Sets one field from its text form.
inline void set_field(RunConfig& c, const std::string& key, const std::string& value) {
  const auto& f = detail::fields();
  const auto it = f.find(key);
  if (it == f.end()) throw Error(ErrorKind::config, "unknown key", "unknown config field '" + key + "'");
  it->second.set(c, key, detail::trim(value));
}

/// Cross-field checks; messages name the offending field.
inline void validate(const RunConfig& c) {
  auto bad = [](const std::string& field, const std::string& why) {
    throw Error(ErrorKind::config, "invalid field", "field '" + field + "': " + why);
  };
  if (c.p != 2 && c.p != 3) bad("p", "must be 2 or 3");
  if (!(c.alpha > 0.5 && c.alpha <= 2.0)) bad("alpha", "must lie in (0.5, 2]");
  if (!(c.L > 0.0)) bad("L", "must be positive");
  if (c.points < 16 || (c.points & (c.points - 1)) != 0) bad("points", "must be a power of two >= 16");
  if (!(c.L / static_cast<double>(c.points) <= 0.25)) bad("points", "grid spacing L/points must be <= 0.25 to resolve Q");
  if (!(c.tol > 0.0)) bad("tol", "must be positive");
  if (c.max_iter < 1) bad("max_iter", "must be >= 1");
  if (!(c.cfl > 0.0)) bad("cfl", "must be positive");
  if (!(c.t_end > 0.0)) bad("t_end", "must be positive");
  if (!(c.record_dt >= 0.0)) bad("record_dt", "must be >= 0");
  if (!(c.energy_budget > 0.0)) bad("energy_budget", "must be positive");
  if (!(c.b > 0.0)) bad("b", "must be positive");
  if (c.b_list.size() < 4) bad("b_list", "needs at least four values");
  if (c.eigenpairs < 1) bad("eigenpairs", "must be >= 1");
  if (c.trials < 1) bad("trials", "must be >= 1");
  if (c.threads < 1) bad("threads", "must be >= 1");
  try {
    validate(c.blowup);
  } catch (const Error& e) {
    throw Error(ErrorKind::config, e.code(), e.detail());
  }
}

/// Parses `key = value` text; unknown keys and malformed values are errors
/// carrying the line number.
inline RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>") {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::config, "parse error", origin + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      set_field(c, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorKind::config, e.code(), origin + ":" + std::to_string(lineno) + ": " + e.detail());
    }
  }
  validate(c);
  return c;
}

/// Reads and validates a config file. A missing file raises code "not found"
/// (ErrorKind::io), distinct from parse errors (ErrorKind::config).
inline RunConfig parse_config(const fs::path& path) { return parse_config_text(read_text(path), path.string()); }

/// Text form that parses back to the same config.
inline std::string to_text(const RunConfig& c) {
  std::string s;
  for (const auto& [k, f] : detail::fields()) s += k + " = " + f.get(c) + "\n";
  return s;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  for (const auto& [k, f] : detail::fields()) j[k] = f.get(c);
  return j;
}

// ---------------------------------------------------------------- run manifest

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Provenance record of one run directory. It is written when the run
/// starts (status "running") and once more when it ends.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::string version = FRACWAVE_VERSION;
  nlohmann::json grid;
  std::string started, finished;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, sha256
  std::vector<std::string> outputs;
  std::string status = "running";
  std::string message;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["config"] = config;
    j["version"] = version;
    j["grid"] = grid;
    j["started"] = started;
    j["finished"] = finished;
    j["inputs"] = nlohmann::json::array();
    for (const auto& [p, d] : inputs) j["inputs"].push_back({{"path", p}, {"sha256", d}});
    j["outputs"] = outputs;
    j["status"] = status;
    j["message"] = message;
    return j;
  }
  void write(const fs::path& dir) const { write_text(dir / "manifest.json", to_json().dump(2) + "\n"); }
};

}  // namespace fracwave::io
