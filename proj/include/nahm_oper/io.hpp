#pragma once

#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tbe.hpp"

namespace nahm {

using json = nlohmann::ordered_json;

inline std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// CSV dump: y_index, z_index, matrix_entry_row, matrix_entry_col, re, im (y-major, then z, row, col).
inline void write_field_csv(std::ostream& os, const GradedMesh& m, const Field& f) {
  if (f.size() != size_t(m.size())) throw dimension_error("write_field_csv: field size does not match mesh");
  os << "y_index,z_index,matrix_entry_row,matrix_entry_col,re,im\n";
  for (int iy = 0; iy < m.ny(); ++iy)
    for (int iz = 0; iz < m.nz(); ++iz) {
      const Mat& a = f[m.index(iy, iz)];
      for (int r = 0; r < a.rows(); ++r)
        for (int c = 0; c < a.cols(); ++c)
          os << iy << ',' << iz << ',' << r << ',' << c << ',' << fmt_double(a(r, c).real()) << ','
             << fmt_double(a(r, c).imag()) << '\n';
    }
}

inline Field read_field_csv(std::istream& is, const GradedMesh& m, int n) {
  Field f(m.size(), Mat::Zero(n, n));
  std::string line;
  if (!std::getline(is, line) || line.rfind("y_index,", 0) != 0) throw config_error("read_field_csv: missing header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<std::string> cols;
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
    if (cols.size() != 6) throw config_error("read_field_csv: expected 6 columns: " + line);
    const int iy = std::stoi(cols[0]), iz = std::stoi(cols[1]), r = std::stoi(cols[2]), c = std::stoi(cols[3]);
    if (iy < 0 || iy >= m.ny() || iz < 0 || iz >= m.nz() || r < 0 || r >= n || c < 0 || c >= n)
      throw config_error("read_field_csv: index out of range: " + line);
    f[m.index(iy, iz)](r, c) = cplx(std::stod(cols[4]), std::stod(cols[5]));
  }
  return f;
}

inline void write_field_file(const std::string& path, const GradedMesh& m, const Field& f) {
  std::ofstream os(path);
  if (!os) throw config_error("cannot write " + path);
  write_field_csv(os, m, f);
}

/// Matrix as rows of [re, im] pairs.
inline json mat_json(const Mat& a) {
  json rows = json::array();
  for (int r = 0; r < a.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < a.cols(); ++c) row.push_back({a(r, c).real(), a(r, c).imag()});
    rows.push_back(row);
  }
  return rows;
}

inline Mat mat_from_json(const json& j) {
  const int n = int(j.size());
  Mat a(n, n);
  for (int r = 0; r < n; ++r) {
    if (int(j[r].size()) != n) throw config_error("matrix must be square");
    for (int c = 0; c < n; ++c) a(r, c) = cplx(j[r][c][0].get<double>(), j[r][c][1].get<double>());
  }
  return a;
}

inline json cplx_json(cplx z) { return {z.real(), z.imag()}; }

/// Series coefficients keyed "(j,l)" for the term y^j log^l y.
inline json admissible_json(const AdmissibleMetric& am) {
  json j;
  j["order"] = am.order;
  j["blend"] = {am.blend_start, am.blend_end};
  json coeff = json::object();
  for (const auto& [k, v] : am.sigma.terms())
    coeff["(" + std::to_string(k.first) + "," + std::to_string(k.second) + ")"] = mat_json(v);
  j["sigma_coefficients"] = coeff;
  j["H_flat"] = am.H_flat ? mat_json(*am.H_flat) : json(nullptr);
  return j;
}

inline json history_json(const std::vector<HistoryEntry>& h) {
  json a = json::array();
  for (const auto& e : h)
    a.push_back({{"t", e.t}, {"iteration", e.iteration}, {"residual", e.residual}, {"step", e.step},
                 {"linear_solver", e.linear_solver}});
  return a;
}

inline std::string utc_now() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

/// Report document; everything outside "timestamp" is deterministic for fixed inputs.
inline json solve_report_json(const json& parameters, const GradedMesh& m, const ContinuityResult& r,
                              const std::optional<OperPoint>& extracted) {
  const SolveReport& rep = r.report;
  json j;
  j["schema_version"] = 1;
  j["parameters"] = parameters;
  j["mesh"] = {{"count", m.ny()}, {"y_min", m.y.front()}, {"y_max", m.y.back()}, {"grading", m.grading}};
  j["history"] = history_json(rep.history);
  j["convergence"] = {{"newton_steps", rep.newton_total}, {"cg_steps", rep.cg_steps}, {"lu_steps", rep.lu_steps},
                      {"last_good_t", rep.last_good_t}};
  json norms;
  norms["omega_sup"] = rep.omega_sup;
  norms["omega_weighted"] = rep.omega_weighted.divergent ? json("divergent") : json(rep.omega_weighted.value);
  norms["s_sup"] = rep.s_sup;
  norms["s_weighted"] = rep.s_weighted.divergent ? json("divergent") : json(rep.s_weighted.value);
  j["norms"] = norms;
  json np = json::array();
  for (const auto& f : rep.nahm_pole)
    np.push_back({{"field", f.field}, {"coefficient", mat_json(f.coefficient)}, {"expected", mat_json(f.expected)},
                  {"relative_error", f.rel_error}});
  j["nahm_pole"] = np;
  j["flat_pair"] = {{"P1", mat_json(rep.flat_pair.P1)}, {"P2", mat_json(rep.flat_pair.P2)},
                    {"w", cplx_json(rep.flat_pair.w)}};
  if (rep.flat_fit.available)
    j["flat_fit"] = {{"delta", rep.flat_fit.delta},
                     {"predicted_delta", rep.flat_fit.predicted_delta},
                     {"r2", rep.flat_fit.r2},
                     {"window", {rep.flat_fit.y_from, rep.flat_fit.y_to}}};
  if (r.admissible) j["admissible"] = admissible_json(*r.admissible);
  if (extracted) {
    json q = json::array();
    for (cplx z : extracted->q) q.push_back(cplx_json(z));
    j["extracted_oper"] = {{"n", extracted->n}, {"beta", extracted->tilt.beta}, {"q", q}};
  } else {
    j["extracted_oper"] = nullptr;
  }
  j["timestamp"] = {{"utc", utc_now()}, {"wall_time_s", rep.wall_time}};
  return j;
}

}  // namespace nahm
