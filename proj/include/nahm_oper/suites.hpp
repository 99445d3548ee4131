#pragma once

#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "identities.hpp"

namespace nahm {

/// One measured quantity against its threshold.
struct Check {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string invariant;  ///< violated invariant and anchor phrase, reported on FAIL
};

struct SuiteResult {
  std::string name;
  std::vector<Check> checks;
  double seconds = 0.0;
  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return !checks.empty();
  }
};

inline Check check_below(std::string name, double value, double threshold, std::string invariant) {
  return {std::move(name), value < threshold, value, threshold, std::move(invariant)};
}

inline Check check_above(std::string name, double value, double threshold, std::string invariant) {
  return {std::move(name), value > threshold, value, threshold, std::move(invariant)};
}

namespace detail {

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
};

/// Records the elapsed time; a positive limit adds a runtime check.
inline void add_runtime(SuiteResult& r, const Stopwatch& w, double limit = 0.0) {
  r.seconds = w.seconds();
  if (limit > 0.0) r.checks.push_back(check_below("runtime_s", r.seconds, limit, "runtime budget"));
}

inline std::string fmt_short(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------- algebra

inline SuiteResult algebra_suite(int n_max = 8, int beta_samples = 20) {
  detail::Stopwatch sw;
  SuiteResult r{"algebra", {}, 0.0};
  double triple = 0.0, spec = 0.0, roots = 0.0;
  for (int n = 2; n <= n_max; ++n) {
    const auto t = principal_triple(n);
    triple = std::max({triple, maxabs(comm(t.e_zero, t.e_plus) - 2.0 * t.e_plus),
                       maxabs(comm(t.e_zero, t.e_minus) + 2.0 * t.e_minus),
                       maxabs(comm(t.e_plus, t.e_minus) - t.e_zero)});
    std::vector<double> expect;
    for (int k = 1; k < n; ++k)
      for (int j = 0; j < 2 * k + 1; ++j) expect.push_back(k * (k + 1.0));
    std::sort(expect.begin(), expect.end());
    const auto ev = casimir_spectrum(n);
    if (ev.size() != expect.size()) {
      spec = std::numeric_limits<double>::infinity();
    } else {
      for (size_t i = 0; i < ev.size(); ++i) spec = std::max(spec, std::abs(ev[i] - expect[i]));
    }
    std::vector<double> er;
    for (int k = n - 1; k >= 1; --k) er.push_back(-double(k));
    for (int k = 2; k <= n; ++k) er.push_back(double(k));
    const auto got = indicial_roots(n);
    if (got.size() != er.size()) {
      roots = std::numeric_limits<double>::infinity();
    } else {
      for (size_t i = 0; i < got.size(); ++i) roots = std::max(roots, std::abs(got[i] - er[i]));
    }
  }
  double trig = 0.0;
  const double lim = std::numbers::pi / 6.0;
  for (int k = 0; k < beta_samples; ++k) {
    double b = -lim + 2.0 * lim * (k + 0.5) / beta_samples;
    if (std::abs(b) < 1e-3) b = 1e-3;
    const TiltParams tp = tilt_params(b);
    trig = std::max({trig, std::abs(tp.c_minus + std::tan(3.0 * b)), std::abs(tp.c_plus - 1.0 / std::cos(3.0 * b))});
  }
  r.checks.push_back(check_below("principal_triple_relations", triple, 1e-9, "principal sl2 triple relations"));
  r.checks.push_back(check_below("casimir_spectrum", spec, 1e-9, "Casimir eigenvalues k(k+1)"));
  r.checks.push_back(check_below("indicial_roots", roots, 1e-9, "indicial roots -(n-1),...,-1,2,...,n"));
  r.checks.push_back(check_below("tilt_trig_identities", trig, 1e-12, "c_minus = -tan 3b, c_plus = 1/cos 3b"));
  detail::add_runtime(r, sw, 5.0);
  return r;
}

// ---------------------------------------------------------------- model

/// Largest residual of the four equation systems on the model solution.
inline double model_max_residual(int n, double beta, const GradedMesh& m) {
  const UnitaryFields f = model_fields(n, beta, m);
  const TiltParams tp = tilt_params(beta);
  return std::max({max_residual(m, tebe_residuals(m, f, beta)), max_residual(m, reduced_residuals(m, f, beta)),
                   max_residual(m, commutator_residuals(m, f, beta)),
                   max_residual(m, gebe_residuals(m, f, tp.t, nullptr, nullptr, beta))});
}

inline SuiteResult model_suite(const GradedMesh& m, const std::vector<int>& ranks = {2, 3, 4},
                               const std::vector<double>& betas = {0.1, 0.2, 0.3}) {
  detail::Stopwatch sw;
  SuiteResult r{"model", {}, 0.0};
  for (int n : ranks)
    for (double b : betas)
      r.checks.push_back(check_below("model_residual_n" + std::to_string(n) + "_beta" + detail::fmt_short(b),
                                     model_max_residual(n, b, m), 1e-10,
                                     "tilted Nahm-pole model solution solves all four systems"));
  detail::add_runtime(r, sw, 30.0);
  return r;
}

// ---------------------------------------------------------------- identities

inline SuiteResult identity_suite(const GradedMesh& m, int draws = 100, unsigned seed = 1) {
  detail::Stopwatch sw;
  SuiteResult r{"identities", {}, 0.0};
  const HoloData h = make_holo(principal_triple(2).e_plus, 0.25);
  const GradedMesh coarse = make_mesh(1e-2, 10.0, 100, 1.08 * 1.08);
  const OrderEstimate ke = keyeq_order(h, coarse, 3, seed);
  const OrderEstimate wz = weitzenbock_order(h, coarse, 3, seed);
  r.checks.push_back(check_above("keyequation_order", ke.order, 1.8, "key identity for the deformed moment map"));
  r.checks.push_back(check_above("weitzenbock_order", wz.order, 1.8, "Weitzenbock formula for the linearization"));
  const GradedMesh torus = make_mesh(m.y.front(), m.y.back(), 60, 1.2, 4, 1.0);
  double eq = 0.0;
  for (int k = 0; k < draws; ++k) {
    const int n = 2 + k % 3;
    const double beta = 0.05 + 0.4 * ((k * 37) % 100) / 100.0;
    eq = std::max(eq, equivalence_discrepancy(torus, random_fields(torus, n, seed + k), beta));
  }
  r.checks.push_back(check_below("system_equivalence", eq, 1e-9, "equivalence of the four equation systems"));
  std::mt19937 rng(seed);
  double gv = 0.0;
  for (int k = 0; k < draws; ++k) {
    const int n = 2 + k % 4;
    const Mat s = random_hermitian(n, rng, 0.1 + 2.0 * (k % 7) / 7.0);
    const auto [g, v] = gamma_v_defects(s, random_complex(n, rng));
    gv = std::max({gv, g, v});
  }
  r.checks.push_back(check_below("gamma_v_identities", gv, 1e-10, "exp(ad s) = 1 + ad s gamma(s), v(s)^2 = gamma(-s)"));
  detail::add_runtime(r, sw);
  return r;
}

// ---------------------------------------------------------------- twisted Hitchin

inline SuiteResult hitchin_suite(unsigned seed = 1) {
  detail::Stopwatch sw;
  SuiteResult r{"twisted_hitchin", {}, 0.0};
  double closed = 0.0;
  for (double q : {0.25, 0.5, 0.7, 1.0, 2.0, 4.0}) {
    const auto d = hitchin_section_higgs(2, {cplx(q)});
    const MetricSolve s = solve_hitchin_constant(d);
    Mat expect = Mat::Zero(2, 2);
    expect(0, 0) = std::sqrt(q);
    expect(1, 1) = 1.0 / std::sqrt(q);
    closed = std::max(closed, maxabs(s.H - expect));
  }
  r.checks.push_back(check_below("closed_form_n2", closed, 1e-10, "constant-mode harmonic metric diag(sqrt q, 1/sqrt q)"));

  double rt = 0.0, uniq = 0.0, corl = 0.0;
  const std::vector<std::vector<cplx>> qs = {{cplx(0.5)}, {cplx(0.3, 0.2), cplx(-0.5, 0.1)},
                                             {cplx(0.2), cplx(0.0), cplx(0.4, -0.3)}};
  for (size_t k = 0; k < qs.size(); ++k) {
    const int n = int(qs[k].size()) + 1;
    const auto d = hitchin_section_higgs(n, qs[k]);
    const MetricSolve hs = solve_hitchin_constant(d);
    for (cplx w : {cplx(0.5), cplx(0.2, 0.7), cplx(0.0, -1.0)}) {
      const FlatPair fp = twist(d, hs.H, w);
      const HiggsData back = untwist(fp, hs.H);
      rt = std::max(rt, maxabs(back.alpha0 - d.alpha0) + maxabs(back.phi - d.phi));
      const Mat g = detail::random_frame(n, seed + 11 * unsigned(k)), gi = g.inverse();
      const FlatPair pq{g * fp.P1 * gi, g * fp.P2 * gi, w};
      const MetricSolve a = solve_twisted_hitchin(pq, detail::random_frame(n, seed + 2));
      const MetricSolve b = solve_twisted_hitchin(pq, detail::random_frame(n, seed + 9));
      uniq = std::max(uniq, maxabs(a.H - b.H));
      if (w == cplx(0.0, -1.0)) {
        const HiggsData c = corlette_split(pq, a.H);
        const double err = std::max({maxabs(c.alpha0 - g * d.alpha0 * gi),
                                     maxabs(c.phi - g * d.phi * gi), hitchin_constant_residual(c, a.H)});
        corl = std::max(corl, err);
      }
    }
  }
  r.checks.push_back(check_below("twist_untwist_roundtrip", rt, 1e-12, "twist and untwist are inverse"));
  r.checks.push_back(check_below("twisted_uniqueness", uniq, 1e-8, "uniqueness of the twisted harmonic metric"));
  r.checks.push_back(check_below("corlette_split_w_minus_i", corl, 1e-8, "harmonic-metric split of a flat connection"));
  detail::add_runtime(r, sw, 20.0);
  return r;
}

// ---------------------------------------------------------------- continuity solves

/// Benchmark mesh for the main solves.
inline GradedMesh benchmark_mesh() { return make_mesh(1e-2, 12.0, 200, 1.08); }

/// Relative difference of det-normalized metrics g e^a g and g e^b g.
inline double metric_distance(const Field& a, const Field& b) {
  double e = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const Mat ea = exp_herm(herm_part(a[i])), eb = exp_herm(herm_part(b[i]));
    e = std::max(e, maxabs(ea - eb) / std::max(maxabs(eb), 1e-300));
  }
  return e;
}

/// Max relative error of q recovered through the Kobayashi-Hitchin map (absolute when q = 0).
inline double kh_error(const OperPoint& op, const OperPoint& got) {
  double e = 0.0;
  for (size_t k = 0; k < op.q.size(); ++k) {
    const double scale = op.q[k] == cplx(0.0) ? 1.0 : std::abs(op.q[k]);
    e = std::max(e, std::abs(got.q[k] - op.q[k]) / scale);
  }
  return e;
}

/// KH map after conjugating the flat pair by a random unitary.
inline OperPoint kh_conjugated(const FlatPair& p, double beta, unsigned seed) {
  std::mt19937 rng(seed);
  const HermEig e = herm_eig(random_hermitian(int(p.P2.rows()), rng, 1.0));
  const Mat U = e.U * (I * e.w.cast<cplx>()).array().exp().matrix().asDiagonal() * e.U.adjoint();
  return kobayashi_hitchin({U * p.P1 * U.adjoint(), U * p.P2 * U.adjoint(), p.w}, beta);
}

/// Per-solve diagnostics shared by the main-solve, boundary and Donaldson suites.
struct SolveRecord {
  OperPoint op;
  ContinuityResult res;
  double c0_sup = 0.0, c0_bound = 0.0;
  bool c0_holds = false;
};

inline SolveRecord solve_record(const OperPoint& op, const GradedMesh& m, const ContinuityOptions& opt = {}) {
  SolveRecord s{op, continuity_solve(op, m, opt)};
  const HoloData h = oper_local_frame(op);
  const Field om0 = moment_map(m, h, s.res.bg0, {zero_field(m, op.n), s.res.bg0.id});
  const C0Diagnostic c = c0_diagnostic(m, om0, s.res.s);
  s.c0_sup = c.sup_s;
  s.c0_bound = c.bound;
  s.c0_holds = c.holds;
  return s;
}

inline SuiteResult main_solve_suite(const GradedMesh& m, double beta = 0.2,
                                    const std::vector<double>& q2 = {0.0, 0.25, 0.5, 1.0}, double perturb = 0.3,
                                    unsigned seed = 1, std::vector<SolveRecord>* records = nullptr) {
  detail::Stopwatch sw;
  SuiteResult r{"main_solve", {}, 0.0};
  for (size_t k = 0; k < q2.size(); ++k) {
    const OperPoint op = make_oper(2, beta, {cplx(q2[k])});
    const std::string tag = "_q" + detail::fmt_short(q2[k]);
    SolveRecord rec = solve_record(op, m);
    r.checks.push_back(check_below("omega_sup" + tag, rec.res.report.omega_sup, 1e-8,
                                   "solution of the twisted extended Bogomolny equations"));
    if (q2[k] == 0.0)
      r.checks.push_back(check_below("model_recovery" + tag, metric_distance(rec.res.sigma, zero_field(m, 2)), 1e-6,
                                     "uniqueness at the model solution"));
    ContinuityOptions po;
    po.perturb_amplitude = perturb;
    po.seed = seed + unsigned(k);
    const ContinuityResult alt = continuity_solve(op, m, po);
    r.checks.push_back(check_below("distinct_starts" + tag, metric_distance(alt.sigma, rec.res.sigma), 1e-6,
                                   "injectivity: solutions with equal boundary data coincide"));
    const OperPoint got = kobayashi_hitchin(rec.res.report.flat_pair, beta);
    r.checks.push_back(check_below("kh_roundtrip" + tag, kh_error(op, got), 1e-4,
                                   "Kobayashi-Hitchin map recovers the oper"));
    if (records) records->push_back(std::move(rec));
  }
  detail::add_runtime(r, sw, 300.0);
  return r;
}

inline double filtration_error(const std::vector<double>& rates, int n) {
  double e = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double ex = -(n - 1) / 2.0 + i - 1;
    e = std::max(e, std::abs(rates[i - 1] - ex) / std::max(std::abs(ex), 1.0));
  }
  return e;
}

inline SuiteResult boundary_suite(const GradedMesh& m, double beta = 0.2, std::vector<SolveRecord>* records = nullptr) {
  detail::Stopwatch sw;
  SuiteResult r{"boundary", {}, 0.0};
  for (const OperPoint& op : {make_oper(2, beta, {cplx(0.5)}), make_oper(3, beta, {cplx(0.3), cplx(0.2)})}) {
    const std::string tag = "_n" + std::to_string(op.n);
    SolveRecord rec = solve_record(op, m);
    const HoloData h = oper_local_frame(op);
    double np = 0.0;
    for (const auto& f : rec.res.report.nahm_pole) np = std::max(np, f.rel_error);
    r.checks.push_back(check_below("nahm_pole" + tag, np, 0.01, "tilted Nahm pole boundary condition"));
    const FiltrationResult fr = filtration_extract(m, h, deformed_frame(m, h, rec.res.bg0, rec.res.s));
    r.checks.push_back(check_below("filtration_rates" + tag, filtration_error(fr.rates, op.n), 0.02,
                                   "filtration by vanishing rates -(n-1)/2 + i - 1"));
    if (op.n == 2) {
      const ExpFit& ff = rec.res.report.flat_fit;
      r.checks.push_back(check_above("flat_limit_r2" + tag, ff.available ? ff.r2 : 0.0, 0.99,
                                     "exponential convergence to the flat limit"));
    }
    if (records) records->push_back(std::move(rec));
  }
  detail::add_runtime(r, sw);
  return r;
}

inline SuiteResult donaldson_suite(const GradedMesh& m, const std::vector<SolveRecord>& records, int directions = 50,
                                   unsigned seed = 1, double beta = 0.2) {
  detail::Stopwatch sw;
  SuiteResult r{"donaldson", {}, 0.0};
  const OperPoint op = make_oper(2, beta, {cplx(0.5)});
  const HoloData h = oper_local_frame(op);
  const AdmissibleMetric am = build_H0(h, 2);
  const Background K = admissible_background(m, am);
  double grad = 0.0, fdmin = std::numeric_limits<double>::infinity();
  for (int k = 0; k < directions; ++k) {
    const Field s = window_field(m, 2, seed + unsigned(k), 0.5, 0.05, 0.8 * m.y.back());
    if (k < 5) {
      const double t = 0.5, e = 1e-3;
      const double d = donaldson_derivatives(m, h, K, s, t).first;
      const Field sp = scaled(s, t + e), sm = scaled(s, t - e);
      const double fd = (donaldson_M(m, h, K, sp) - donaldson_M(m, h, K, sm)) / (2.0 * e);
      grad = std::max(grad, std::abs(fd - d) / std::max(std::abs(d), 1e-12));
    }
    fdmin = std::min(fdmin, donaldson_derivatives(m, h, K, s, 0.0).second);
  }
  r.checks.push_back(check_below("gradient_vs_fd", grad, 1e-6, "first variation of the Donaldson functional"));
  r.checks.push_back(check_above("second_derivative_min", fdmin, 0.0, "convexity of the Donaldson functional"));
  bool all = !records.empty();
  double worst = 0.0;
  for (const auto& rec : records) {
    all = all && rec.c0_holds;
    worst = std::max(worst, rec.c0_sup / std::max(rec.c0_bound, 1e-300));
  }
  r.checks.push_back({"c0_diagnostic", all, worst, 1.0, "C0 estimate sup|s| <= sup u with -u'' = |Omega_H0|"});
  detail::add_runtime(r, sw);
  return r;
}

}  // namespace nahm
