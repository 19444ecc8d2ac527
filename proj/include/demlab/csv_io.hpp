#pragma once
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "demlab/attack_search.hpp"
#include "demlab/montecarlo.hpp"
#include "demlab/optimize.hpp"
#include "demlab/scan_map.hpp"

namespace demlab::csv {

// All artifact files are plain CSV with '#' comment headers carrying the
// resolved configuration, so a run can be reproduced byte for byte from the
// file itself. Numbers are written with 17 significant digits (round-trip
// exact for doubles).

struct ParseError : std::runtime_error {
  int line;
  explicit ParseError(int line_number, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_number) + ": " +
                           what),
        line(line_number) {}
};

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline double parse_double(const std::string& tok, int line) {
  // strtod rather than stod: stod throws on subnormal values (underflow sets
  // ERANGE), but filtered maps legitimately contain them.
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  const bool consumed = end == tok.c_str() + tok.size() && !tok.empty();
  const bool overflow = errno == ERANGE && std::abs(v) == HUGE_VAL;
  if (!consumed || overflow)
    throw ParseError(line, "not a number: '" + tok + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// ---------------------------------------------------------------------------
// Efficiency maps and raw scans
//
// Header:  # phi_min_mrad=.. phi_max_mrad=.. theta_min_mrad=..
//          theta_max_mrad=.. n_phi=.. n_theta=..   (one line)
// Raw scans add: # bg_h=.. bg_v=.. bg_d=.. bg_a=.. t_int_s=..
// Data rows (phi-major): phi_mrad,theta_mrad,eta_h,eta_v,eta_d,eta_a
// (cnt_* columns instead of eta_* for raw scans).

inline void write_map(std::ostream& os, const EfficiencyMap& map,
                      const std::vector<std::string>& extra_header = {}) {
  const GridSpec& g = map.grid;
  for (const auto& h : extra_header) os << "# " << h << "\n";
  os << "# phi_min_mrad=" << fmt(g.phi_min_mrad)
     << " phi_max_mrad=" << fmt(g.phi_max_mrad)
     << " theta_min_mrad=" << fmt(g.theta_min_mrad)
     << " theta_max_mrad=" << fmt(g.theta_max_mrad) << " n_phi=" << g.n_phi
     << " n_theta=" << g.n_theta << "\n";
  os << "# columns: phi_mrad,theta_mrad,eta_h,eta_v,eta_d,eta_a\n";
  for (int ip = 0; ip < g.n_phi; ++ip)
    for (int it = 0; it < g.n_theta; ++it) {
      const std::size_t c = g.cell(ip, it);
      os << fmt(g.phi_at(ip)) << ',' << fmt(g.theta_at(it));
      for (int ch = 0; ch < 4; ++ch) os << ',' << fmt(map.eta[ch][c]);
      os << '\n';
    }
}

inline void write_raw_scan(std::ostream& os, const RawScan& scan,
                           const std::vector<std::string>& extra_header = {}) {
  const GridSpec& g = scan.grid;
  for (const auto& h : extra_header) os << "# " << h << "\n";
  os << "# phi_min_mrad=" << fmt(g.phi_min_mrad)
     << " phi_max_mrad=" << fmt(g.phi_max_mrad)
     << " theta_min_mrad=" << fmt(g.theta_min_mrad)
     << " theta_max_mrad=" << fmt(g.theta_max_mrad) << " n_phi=" << g.n_phi
     << " n_theta=" << g.n_theta << "\n";
  os << "# bg_h=" << fmt(scan.background_rate[Pol::H])
     << " bg_v=" << fmt(scan.background_rate[Pol::V])
     << " bg_d=" << fmt(scan.background_rate[Pol::D])
     << " bg_a=" << fmt(scan.background_rate[Pol::A])
     << " t_int_s=" << fmt(scan.integration_s) << "\n";
  os << "# columns: phi_mrad,theta_mrad,cnt_h,cnt_v,cnt_d,cnt_a\n";
  for (int ip = 0; ip < g.n_phi; ++ip)
    for (int it = 0; it < g.n_theta; ++it) {
      const std::size_t c = g.cell(ip, it);
      os << fmt(g.phi_at(ip)) << ',' << fmt(g.theta_at(it));
      for (int ch = 0; ch < 4; ++ch) os << ',' << fmt(scan.counts[ch][c]);
      os << '\n';
    }
}

namespace detail {

struct ScanFile {
  std::map<std::string, std::string> keys;
  std::vector<std::array<double, 6>> rows;
  std::vector<int> row_lines;
};

inline ScanFile read_scan_file(std::istream& is) {
  ScanFile f;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string tok;
      while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq != std::string::npos && eq > 0)
          f.keys[tok.substr(0, eq)] = tok.substr(eq + 1);
      }
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != 6)
      throw ParseError(lineno, "expected 6 comma-separated values, got " +
                                   std::to_string(cells.size()));
    std::array<double, 6> row;
    for (int i = 0; i < 6; ++i) row[i] = parse_double(cells[i], lineno);
    f.rows.push_back(row);
    f.row_lines.push_back(lineno);
  }
  return f;
}

inline double header_double(const ScanFile& f, const std::string& key) {
  const auto it = f.keys.find(key);
  if (it == f.keys.end())
    throw ParseError(0, "missing header key '" + key + "'");
  return parse_double(it->second, 0);
}

inline GridSpec header_grid(const ScanFile& f) {
  GridSpec g;
  g.phi_min_mrad = header_double(f, "phi_min_mrad");
  g.phi_max_mrad = header_double(f, "phi_max_mrad");
  g.theta_min_mrad = header_double(f, "theta_min_mrad");
  g.theta_max_mrad = header_double(f, "theta_max_mrad");
  g.n_phi = static_cast<int>(header_double(f, "n_phi"));
  g.n_theta = static_cast<int>(header_double(f, "n_theta"));
  g.validate();
  if (f.rows.size() != g.n_cells())
    throw ParseError(0, "expected " + std::to_string(g.n_cells()) +
                            " data rows, got " + std::to_string(f.rows.size()));
  return g;
}

}  // namespace detail

inline EfficiencyMap read_map(std::istream& is) {
  const auto f = detail::read_scan_file(is);
  EfficiencyMap map = EfficiencyMap::zeros(detail::header_grid(f));
  for (std::size_t r = 0; r < f.rows.size(); ++r)
    for (int ch = 0; ch < 4; ++ch) {
      const double v = f.rows[r][2 + ch];
      if (!(v >= 0.0 && v <= 1.0))
        throw ParseError(f.row_lines[r], "efficiency outside [0,1]");
      map.eta[ch][r] = v;
    }
  return map;
}

inline RawScan read_raw_scan(std::istream& is) {
  const auto f = detail::read_scan_file(is);
  RawScan scan;
  scan.grid = detail::header_grid(f);
  scan.background_rate[Pol::H] = detail::header_double(f, "bg_h");
  scan.background_rate[Pol::V] = detail::header_double(f, "bg_v");
  scan.background_rate[Pol::D] = detail::header_double(f, "bg_d");
  scan.background_rate[Pol::A] = detail::header_double(f, "bg_a");
  scan.integration_s = detail::header_double(f, "t_int_s");
  for (auto& ch : scan.counts) ch.assign(scan.grid.n_cells(), 0.0);
  for (std::size_t r = 0; r < f.rows.size(); ++r)
    for (int ch = 0; ch < 4; ++ch) scan.counts[ch][r] = f.rows[r][2 + ch];
  return scan;
}

// A raw scan announces itself through the bg_* header keys; either file kind
// yields a normalized map.
inline EfficiencyMap read_map_auto(std::istream& is) {
  std::stringstream buffer;
  buffer << is.rdbuf();
  const std::string text = buffer.str();
  {
    std::istringstream probe(text);
    std::string line;
    while (std::getline(probe, line)) {
      if (line.empty() || line[0] != '#') break;
      if (line.find("bg_h=") != std::string::npos) {
        std::istringstream body(text);
        return normalize_scan(read_raw_scan(body));
      }
    }
  }
  std::istringstream body(text);
  return read_map(body);
}

// ---------------------------------------------------------------------------
// Attack-point report: pol,phi_mrad,theta_mrad,eta_h,eta_v,eta_d,eta_a,delta

inline void write_attack_report(
    std::ostream& os, const AttackSearchResult& result,
    const std::vector<std::string>& extra_header = {}) {
  for (const auto& h : extra_header) os << "# " << h << "\n";
  os << "# columns: pol,phi_mrad,theta_mrad,eta_h,eta_v,eta_d,eta_a,delta\n";
  for (Pol j : kAllPols)
    for (const AttackPoint& pt : result.qualifying[index_of(j)]) {
      os << name_of(j) << ',' << fmt(pt.phi_mrad) << ',' << fmt(pt.theta_mrad);
      for (int ch = 0; ch < 4; ++ch) os << ',' << fmt(pt.eta_hat.v[ch]);
      os << ',' << fmt(pt.delta) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Sweep results:
// loss_db,R_ab,QBER_ab,R_e,QBER_e,mu_H,mu_V,mu_D,mu_A,residual,converged

inline void write_sweep(std::ostream& os, const std::vector<SweepResult>& rows,
                        const std::vector<std::string>& extra_header = {}) {
  for (const auto& h : extra_header) os << "# " << h << "\n";
  os << "# columns: loss_db,R_ab,QBER_ab,R_e,QBER_e,mu_H,mu_V,mu_D,mu_A,"
        "residual,converged\n";
  for (const SweepResult& r : rows) {
    os << fmt(r.loss_db) << ',' << fmt(r.baseline.total_rate) << ','
       << fmt(r.baseline.qber);
    if (r.attack_available) {
      os << ',' << fmt(r.attack.total_rate) << ',' << fmt(r.attack.qber_e);
      for (double m : r.attack.mu) os << ',' << fmt(m);
      os << ',' << fmt(r.attack.residual) << ','
         << (r.attack.converged ? "true" : "false");
    } else {
      os << ",0,0,0,0,0,0,1,false";
    }
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Oracle comparison: quantity,analytic,estimate,stderr,z

inline void write_comparison(std::ostream& os, const ComparisonReport& rep,
                             const std::vector<std::string>& extra_header = {}) {
  for (const auto& h : extra_header) os << "# " << h << "\n";
  os << "# columns: quantity,analytic,estimate,stderr,z\n";
  for (const ComparisonRow& r : rep.rows) {
    os << r.quantity << ',' << fmt(r.analytic) << ',' << fmt(r.estimate) << ','
       << fmt(r.stderr_est) << ',';
    if (r.sufficient)
      os << fmt(r.z);
    else
      os << "nan";
    os << '\n';
  }
}

template <typename WriteFn>
inline void write_file(const std::string& path, WriteFn&& fn) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  fn(os);
  os.flush();
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace demlab::csv
