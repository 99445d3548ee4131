#pragma once

#include <cstdlib>
#include <fstream>
#include <set>

#include "io.hpp"

namespace nahm {

struct MeshConfig {
  double y_min = 1e-2, y_max = 12.0;
  int count = 200;
  double grading = 1.08;
};

struct RunConfig {
  int n = 2;
  double beta = 0.2;
  std::vector<cplx> q{cplx(0.5)};
  MeshConfig mesh;
  int halvings = 10;
  std::vector<double> schedule;  ///< explicit schedule; overrides halvings when non-empty
  double final_tol = 1e-8, stage_tol = 1e-7, residual_tol = 1e-10;
  std::string output_dir = "nahm_out";
  unsigned seed = 1;
  double mu = 1.0, delta = 0.5, epsilon = 0.5;
  int order = -1;
  int draws = 100;
  double perturb = 0.3;
};

inline json cplx_value_json(cplx z) { return z.imag() == 0.0 ? json(z.real()) : cplx_json(z); }

inline json config_to_json(const RunConfig& c) {
  json j;
  j["n"] = c.n;
  j["beta"] = c.beta;
  json q = json::array();
  for (cplx z : c.q) q.push_back(cplx_value_json(z));
  j["q"] = q;
  j["mesh"] = {{"y_min", c.mesh.y_min}, {"y_max", c.mesh.y_max}, {"count", c.mesh.count}, {"grading", c.mesh.grading}};
  j["schedule"] = {{"halvings", c.halvings}, {"values", c.schedule}};
  j["tolerances"] = {{"final", c.final_tol}, {"stage", c.stage_tol}, {"residual", c.residual_tol}};
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  j["weights"] = {{"mu", c.mu}, {"delta", c.delta}};
  j["epsilon"] = c.epsilon;
  j["order"] = c.order;
  j["draws"] = c.draws;
  j["perturb"] = c.perturb;
  return j;
}

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& prefix) {
  if (!j.is_object()) throw config_error((prefix.empty() ? std::string("config") : prefix) + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw config_error(prefix + (prefix.empty() ? "" : ".") + k + ": unknown key");
}

template <class T>
void read_key(const json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw config_error(path + ": wrong type");
  }
}

inline cplx cplx_from_value(const json& v, const std::string& path) {
  if (v.is_number()) return cplx(v.get<double>(), 0.0);
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return cplx(v[0].get<double>(), v[1].get<double>());
  throw config_error(path + ": expected a number or [re, im]");
}

}  // namespace detail

/// Overlays the keys present in `j` onto `c`; unknown keys are rejected with their path.
inline void apply_config_json(const json& j, RunConfig& c) {
  detail::reject_unknown(j, {"n", "beta", "q", "mesh", "schedule", "tolerances", "output_dir", "seed", "weights",
                             "epsilon", "order", "draws", "perturb"},
                         "");
  detail::read_key(j, "n", c.n, "n");
  detail::read_key(j, "beta", c.beta, "beta");
  if (j.contains("q")) {
    const json& q = j["q"];
    if (!q.is_array()) throw config_error("q: expected an array");
    c.q.clear();
    for (size_t k = 0; k < q.size(); ++k) c.q.push_back(detail::cplx_from_value(q[k], "q[" + std::to_string(k) + "]"));
  }
  if (j.contains("mesh")) {
    const json& m = j["mesh"];
    detail::reject_unknown(m, {"y_min", "y_max", "count", "grading"}, "mesh");
    detail::read_key(m, "y_min", c.mesh.y_min, "mesh.y_min");
    detail::read_key(m, "y_max", c.mesh.y_max, "mesh.y_max");
    detail::read_key(m, "count", c.mesh.count, "mesh.count");
    detail::read_key(m, "grading", c.mesh.grading, "mesh.grading");
  }
  if (j.contains("schedule")) {
    const json& s = j["schedule"];
    detail::reject_unknown(s, {"halvings", "values"}, "schedule");
    detail::read_key(s, "halvings", c.halvings, "schedule.halvings");
    detail::read_key(s, "values", c.schedule, "schedule.values");
  }
  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    detail::reject_unknown(t, {"final", "stage", "residual"}, "tolerances");
    detail::read_key(t, "final", c.final_tol, "tolerances.final");
    detail::read_key(t, "stage", c.stage_tol, "tolerances.stage");
    detail::read_key(t, "residual", c.residual_tol, "tolerances.residual");
  }
  detail::read_key(j, "output_dir", c.output_dir, "output_dir");
  detail::read_key(j, "seed", c.seed, "seed");
  if (j.contains("weights")) {
    const json& w = j["weights"];
    detail::reject_unknown(w, {"mu", "delta"}, "weights");
    detail::read_key(w, "mu", c.mu, "weights.mu");
    detail::read_key(w, "delta", c.delta, "weights.delta");
  }
  detail::read_key(j, "epsilon", c.epsilon, "epsilon");
  detail::read_key(j, "order", c.order, "order");
  detail::read_key(j, "draws", c.draws, "draws");
  detail::read_key(j, "perturb", c.perturb, "perturb");
}

inline void load_config_file(const std::string& path, RunConfig& c) {
  std::ifstream is(path);
  if (!is) throw config_error("config: cannot open " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error("config: parse error: " + std::string(e.what()));
  }
  apply_config_json(j, c);
}

inline std::vector<double> config_schedule(const RunConfig& c) {
  if (!c.schedule.empty()) return c.schedule;
  std::vector<double> s;
  for (int k = 0; k <= c.halvings; ++k) s.push_back(std::ldexp(1.0, -k));
  s.push_back(0.0);
  return s;
}

inline GradedMesh config_mesh(const RunConfig& c) {
  return make_mesh(c.mesh.y_min, c.mesh.y_max, c.mesh.count, c.mesh.grading);
}

/// Checks every field against the library preconditions; errors carry the field path.
inline void validate_config(const RunConfig& c) {
  auto fail = [](const std::string& path, const std::string& msg) { throw config_error(path + ": " + msg); };
  if (c.n < 2 || c.n > 8) fail("n", "rank must be in [2, 8]");
  if (!(std::abs(c.beta) < std::numbers::pi / 6.0) || c.beta == 0.0) fail("beta", "must lie in (-pi/6, pi/6) minus 0");
  if (int(c.q.size()) != c.n - 1) fail("q", "expected n-1 = " + std::to_string(c.n - 1) + " differentials");
  for (size_t k = 0; k < c.q.size(); ++k)
    if (!std::isfinite(c.q[k].real()) || !std::isfinite(c.q[k].imag())) fail("q[" + std::to_string(k) + "]", "not finite");
  if (!(c.mesh.y_min > 0.0)) fail("mesh.y_min", "must be positive");
  if (!(c.mesh.y_max > c.mesh.y_min)) fail("mesh.y_max", "must exceed mesh.y_min");
  if (!(c.mesh.grading > 1.0)) fail("mesh.grading", "must exceed 1");
  if (c.mesh.count < 8) fail("mesh.count", "at least 8 nodes required");
  try {
    config_mesh(c);
  } catch (const nahm_error& e) {
    fail("mesh.count", e.what());
  }
  if (c.halvings < 0 || c.halvings > 40) fail("schedule.halvings", "must be in [0, 40]");
  try {
    if (!c.schedule.empty()) check_schedule(c.schedule);
  } catch (const nahm_error& e) {
    fail("schedule.values", e.what());
  }
  if (!(c.final_tol > 0.0)) fail("tolerances.final", "must be positive");
  if (!(c.stage_tol > 0.0)) fail("tolerances.stage", "must be positive");
  if (!(c.residual_tol > 0.0)) fail("tolerances.residual", "must be positive");
  if (c.output_dir.empty()) fail("output_dir", "must not be empty");
  if (!(c.mu > -1.0 && c.mu < 2.0)) fail("weights.mu", "must lie in (-1, 2)");
  if (!(c.delta > 0.0)) fail("weights.delta", "must be positive");
  if (!(c.epsilon > 0.0 && c.epsilon <= 1.0)) fail("epsilon", "must lie in (0, 1]");
  if (c.order != -1 && (c.order < 1 || c.order > 12)) fail("order", "must be -1 or in [1, 12]");
  if (c.draws < 1) fail("draws", "must be positive");
  if (!(c.perturb >= 0.0)) fail("perturb", "must be non-negative");
}

inline ContinuityOptions continuity_options(const RunConfig& c) {
  ContinuityOptions o;
  o.schedule = config_schedule(c);
  o.newton.tol = c.stage_tol;
  o.final_tol = c.final_tol;
  o.order = c.order;
  o.seed = c.seed;
  o.mu = c.mu;
  o.delta = c.delta;
  return o;
}

/// NAHM_OPER_OUT replaces the output directory taken from defaults or the config file.
inline void apply_environment(RunConfig& c) {
  if (const char* e = std::getenv("NAHM_OPER_OUT"); e && *e) c.output_dir = e;
}

}  // namespace nahm
