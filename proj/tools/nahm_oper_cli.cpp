// nahm-oper: command-line driver for the solver library.

#include <filesystem>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "nahm_oper/config.hpp"
#include "nahm_oper/suites.hpp"

namespace fs = std::filesystem;
using namespace nahm;

namespace {

constexpr int exit_fail = 1, exit_convergence = 2, exit_config = 3;

struct Summary {
  std::string subcommand;
  json config;
  std::vector<Check> checks;

  void add(Check c) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " = " << std::setprecision(6) << c.value
              << " (threshold " << c.threshold << ")";
    if (!c.pass) std::cout << "  violated: " << c.invariant;
    std::cout << '\n';
    checks.push_back(std::move(c));
  }
  void add_suite(const SuiteResult& r) {
    for (const auto& c : r.checks)
      if (c.name != "runtime_s") add(c);
  }
  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  json to_json() const {
    json a = json::array();
    for (const auto& c : checks)
      a.push_back({{"name", c.name},
                   {"status", c.pass ? "PASS" : "FAIL"},
                   {"value", c.value},
                   {"threshold", c.threshold},
                   {"invariant", c.invariant}});
    return {{"schema_version", 1}, {"subcommand", subcommand}, {"status", pass() ? "PASS" : "FAIL"},
            {"config", config},   {"checks", a}};
  }
};

void write_json(const fs::path& p, const json& j) {
  std::ofstream os(p);
  if (!os) throw config_error("output_dir: cannot write " + p.string());
  os << j.dump(2) << '\n';
}

fs::path prepare_out(const RunConfig& c) {
  fs::path d(c.output_dir);
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw config_error("output_dir: " + ec.message());
  return d;
}

OperPoint config_oper(const RunConfig& c) { return make_oper(c.n, c.beta, c.q); }

std::string fmt_cplx(cplx z) {
  std::ostringstream os;
  os << std::setprecision(10) << z.real();
  if (z.imag() != 0.0) os << (z.imag() < 0 ? " - " : " + ") << std::abs(z.imag()) << "i";
  return os.str();
}

// ---------------------------------------------------------------- subcommands

void run_verify_model(const RunConfig& c, Summary& s) {
  const GradedMesh m = config_mesh(c);
  const UnitaryFields f = model_fields(c.n, c.beta, m);
  const TiltParams tp = tilt_params(c.beta);
  const std::string inv = "tilted Nahm-pole model solution solves all four systems";
  s.add(check_below("tebe_residual", max_residual(m, tebe_residuals(m, f, c.beta)), c.residual_tol, inv));
  s.add(check_below("reduced_residual", max_residual(m, reduced_residuals(m, f, c.beta)), c.residual_tol, inv));
  s.add(check_below("commutator_residual", max_residual(m, commutator_residuals(m, f, c.beta)), c.residual_tol, inv));
  s.add(check_below("gebe_residual", max_residual(m, gebe_residuals(m, f, tp.t, nullptr, nullptr, c.beta)),
                    c.residual_tol, inv));
  std::cout << "max residual = " << model_max_residual(c.n, c.beta, m) << '\n';
}

void run_indicial_roots(int n, Summary& s) {
  const auto roots = indicial_roots(n);
  for (size_t i = 0; i < roots.size(); ++i) std::cout << (i ? " " : "") << roots[i];
  std::cout << "\n\n  k  casimir  multiplicity  roots\n";
  for (int k = 1; k < n; ++k)
    std::cout << std::setw(3) << k << std::setw(9) << k * (k + 1) << std::setw(14) << 2 * k + 1 << "  " << -k << ", "
              << k + 1 << '\n';
  double err = 0.0;
  for (int k = 1; k < n; ++k) {
    err = std::max(err, std::abs(roots[n - 1 - k] + k));
    err = std::max(err, std::abs(roots[n - 2 + k] - (k + 1)));
  }
  s.add(check_below("indicial_roots", err, 1e-9, "indicial roots -(n-1),...,-1,2,...,n"));
}

void run_solve_hitchin(const RunConfig& c, Summary& s) {
  const HiggsData d = hitchin_section_higgs(c.n, c.q);
  const MetricSolve hs = solve_hitchin_constant(d);
  s.add(check_below("hitchin_residual", hitchin_constant_residual(d, hs.H), c.residual_tol,
                    "constant-mode Hitchin equations"));
  if (c.n == 2 && c.q[0].imag() == 0.0 && c.q[0].real() > 0.0) {
    Mat e = Mat::Zero(2, 2);
    e(0, 0) = std::sqrt(c.q[0].real());
    e(1, 1) = 1.0 / e(0, 0);
    s.add(check_below("closed_form_n2", maxabs(hs.H - e), 1e-10, "constant-mode harmonic metric diag(sqrt q, 1/sqrt q)"));
  }
  const TiltParams tp = tilt_params(c.beta);
  const FlatPair fp = twist(d, hs.H, cplx(tp.w, 0.0));
  const HiggsData back = untwist(fp, hs.H);
  s.add(check_below("twist_untwist_roundtrip", maxabs(back.alpha0 - d.alpha0) + maxabs(back.phi - d.phi), 1e-12,
                    "twist and untwist are inverse"));
  const MetricSolve a = solve_twisted_hitchin(fp, detail::random_frame(c.n, c.seed));
  const MetricSolve b = solve_twisted_hitchin(fp, detail::random_frame(c.n, c.seed + 1));
  s.add(check_below("twisted_uniqueness", maxabs(a.H - b.H), 1e-8, "uniqueness of the twisted harmonic metric"));
  const FlatPair fc = twist(d, hs.H, cplx(0.0, -1.0));
  const MetricSolve hc = solve_twisted_hitchin(fc, detail::random_frame(c.n, c.seed + 2));
  const HiggsData split = corlette_split(fc, hc.H);
  s.add(check_below("corlette_split_w_minus_i",
                    std::max({maxabs(split.alpha0 - d.alpha0), maxabs(split.phi - d.phi),
                              hitchin_constant_residual(split, hc.H)}),
                    1e-8, "harmonic-metric split of a flat connection"));
  json out = {{"H", mat_json(hs.H)}, {"twisted_H", mat_json(a.H)}, {"w", tp.w}};
  try {
    const MetricSolve bm = boundary_metric(oper_local_frame(config_oper(c)).alpha, c.beta);
    out["boundary_metric"] = mat_json(bm.H);
  } catch (const reducible_error& e) {
    out["boundary_metric"] = nullptr;
    out["reducible_certificate"] = mat_json(e.certificate);
  }
  write_json(prepare_out(c) / "hitchin.json", out);
}

ContinuityResult solve_with_report(const RunConfig& c, const GradedMesh& m, const fs::path& out,
                                   std::optional<OperPoint>* extracted = nullptr) {
  const OperPoint op = config_oper(c);
  const ContinuityResult r = continuity_solve(op, m, continuity_options(c));
  std::optional<OperPoint> kh;
  try {
    kh = kobayashi_hitchin(r.report.flat_pair, c.beta);
  } catch (const nahm_error&) {
  }
  write_json(out / "report.json", solve_report_json(config_to_json(c), m, r, kh));
  write_field_file((out / "sigma.csv").string(), m, r.sigma);
  write_field_file((out / "s.csv").string(), m, r.s);
  write_field_file((out / "omega.csv").string(), m,
                   moment_map(m, oper_local_frame(op), r.bg0, {r.s, r.bg0.id}));
  if (extracted) *extracted = kh;
  return r;
}

void run_solve_tbe(const RunConfig& c, Summary& s) {
  const GradedMesh m = config_mesh(c);
  const fs::path out = prepare_out(c);
  const OperPoint op = config_oper(c);
  const HoloData h = oper_local_frame(op);
  std::optional<OperPoint> kh;
  const ContinuityResult r = solve_with_report(c, m, out, &kh);
  const SolveReport& rep = r.report;
  s.add(check_below("omega_sup", rep.omega_sup, c.final_tol, "solution of the twisted extended Bogomolny equations"));
  double np = 0.0;
  for (const auto& f : rep.nahm_pole) np = std::max(np, f.rel_error);
  s.add(check_below("nahm_pole", np, 0.01, "tilted Nahm pole boundary condition"));
  const Field om0 = moment_map(m, h, r.bg0, {zero_field(m, c.n), r.bg0.id});
  const C0Diagnostic c0 = c0_diagnostic(m, om0, r.s);
  s.add({"c0_diagnostic", c0.holds, c0.sup_s, c0.bound, "C0 estimate sup|s| <= sup u with -u'' = |Omega_H0|"});
  if (rep.flat_fit.available)
    s.add(check_above("flat_limit_r2", rep.flat_fit.r2, 0.99, "exponential convergence to the flat limit"));
  s.add(check_above("admissibility_rate", admissibility_rate(m, r.s), c.epsilon,
                    "deformation within the admissible class near the boundary"));
  const DeformedFrame df = deformed_frame(m, h, r.bg0, r.s);
  const FiltrationResult fr = filtration_extract(m, h, df);
  s.add(check_below("filtration_rates", filtration_error(fr.rates, c.n), 0.02,
                    "filtration by vanishing rates -(n-1)/2 + i - 1"));
  double induced = std::numeric_limits<double>::infinity();
  for (double x : fr.induced) induced = std::min(induced, x);
  s.add(check_above("induced_map_min", induced, 0.1 / std::sin(c.beta), "graded pieces connected by isomorphisms"));
  if (kh) s.add(check_below("kh_roundtrip", kh_error(op, *kh), 1e-4, "Kobayashi-Hitchin map recovers the oper"));
  else s.add({"kh_roundtrip", false, std::numeric_limits<double>::infinity(), 1e-4, "flat limit at infinity"});
  std::cout << "newton steps = " << rep.newton_total << ", omega_sup = " << rep.omega_sup << '\n';
}

void run_kh_map(const RunConfig& c, Summary& s) {
  const GradedMesh m = config_mesh(c);
  const OperPoint op = config_oper(c);
  const ContinuityResult r = solve_with_report(c, m, prepare_out(c));
  const OperPoint got = kobayashi_hitchin(r.report.flat_pair, c.beta);
  for (size_t k = 0; k < got.q.size(); ++k) std::cout << "recovered q" << k + 2 << " = " << fmt_cplx(got.q[k]) << '\n';
  s.add(check_below("kh_roundtrip", kh_error(op, got), 1e-4, "Kobayashi-Hitchin map recovers the oper"));
  s.add(check_below("kh_gauge_invariance", kh_error(got, kh_conjugated(r.report.flat_pair, c.beta, c.seed)), 1e-10,
                    "invariance of the Hitchin fibration under conjugation"));
}

void run_check_identities(const RunConfig& c, Summary& s) {
  s.add_suite(identity_suite(config_mesh(c), c.draws, c.seed));
}

void run_donaldson(const RunConfig& c, Summary& s) {
  const GradedMesh m = config_mesh(c);
  const OperPoint op = config_oper(c);
  const HoloData h = oper_local_frame(op);
  bool zero = true;
  for (cplx z : c.q) zero = zero && z == cplx(0.0);
  const Background K = zero ? model_background(m, c.n) : admissible_background(m, build_H0(h, c.order < 0 ? c.n : c.order));
  const int dirs = std::min(c.draws, 50);
  double grad = 0.0, second = std::numeric_limits<double>::infinity();
  for (int k = 0; k < dirs; ++k) {
    const Field v = window_field(m, c.n, c.seed + unsigned(k), 0.5, 0.05, 0.8 * m.y.back());
    if (k < 5) {
      const double t = 0.5, e = 1e-3;
      const double d = donaldson_derivatives(m, h, K, v, t).first;
      const double fd = (donaldson_M(m, h, K, scaled(v, t + e)) - donaldson_M(m, h, K, scaled(v, t - e))) / (2.0 * e);
      grad = std::max(grad, std::abs(fd - d) / std::max(std::abs(d), 1e-12));
    }
    second = std::min(second, donaldson_derivatives(m, h, K, v, 0.0).second);
  }
  s.add(check_below("gradient_vs_fd", grad, 1e-6, "first variation of the Donaldson functional"));
  s.add(check_above("second_derivative_min", second, 0.0, "convexity of the Donaldson functional"));
  const Field v = window_field(m, c.n, c.seed, 0.5, 0.05, 0.8 * m.y.back());
  std::ofstream os(prepare_out(c) / "donaldson_scan.csv");
  os << "t,M,dM,d2M\n";
  std::vector<double> vals;
  for (int k = -20; k <= 20; ++k) {
    const double t = k / 10.0;
    const double M = donaldson_M(m, h, K, scaled(v, t));
    const DonaldsonDerivatives d = donaldson_derivatives(m, h, K, v, t);
    vals.push_back(M);
    os << fmt_double(t) << ',' << fmt_double(M) << ',' << fmt_double(d.first) << ',' << fmt_double(d.second) << '\n';
  }
  double worst = std::numeric_limits<double>::infinity();
  for (size_t k = 1; k + 1 < vals.size(); ++k) worst = std::min(worst, vals[k + 1] - 2.0 * vals[k] + vals[k - 1]);
  s.add(check_above("scan_convexity", worst, 0.0, "convexity of the Donaldson functional"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical solver for the twisted extended Bogomolny equations with Nahm-pole boundary"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<int> n, count, halvings, order, draws;
  std::optional<double> beta, y_min, y_max, grading, final_tol, stage_tol, residual_tol, mu, delta, epsilon, perturb;
  std::optional<unsigned> seed;
  std::optional<std::string> out;
  std::vector<std::string> q_list;
  std::vector<double> schedule;
  std::vector<std::optional<double>> qk(9);

  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--n", n, "rank");
  app.add_option("--beta", beta, "tilt angle in (-pi/6, pi/6)");
  app.add_option("--q", q_list, "differentials q2..qn, each 're' or 're:im'")->delimiter(',');
  for (int k = 2; k <= 8; ++k) app.add_option("--q" + std::to_string(k), qk[k], "real q" + std::to_string(k));
  app.add_option("--y-min", y_min, "mesh lower end");
  app.add_option("--y-max", y_max, "mesh upper end");
  app.add_option("--count", count, "mesh node count");
  app.add_option("--grading", grading, "mesh grading ratio");
  app.add_option("--halvings", halvings, "continuity schedule 1, 1/2, ..., 2^-k, 0");
  app.add_option("--schedule", schedule, "explicit continuity schedule")->delimiter(',');
  app.add_option("--final-tol", final_tol, "residual tolerance at t = 0");
  app.add_option("--stage-tol", stage_tol, "residual tolerance for t > 0");
  app.add_option("--residual-tol", residual_tol, "model residual tolerance");
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--mu", mu, "weight exponent");
  app.add_option("--delta", delta, "weight decay rate");
  app.add_option("--epsilon", epsilon, "admissibility exponent");
  app.add_option("--order", order, "series order of the approximate metric (-1 = n)");
  app.add_option("--draws", draws, "random draws");
  app.add_option("--perturb", perturb, "perturbation amplitude of the starting metric");

  int roots_n = 0;
  auto* verify = app.add_subcommand("verify-model", "residual suites on the model solution");
  auto* roots = app.add_subcommand("indicial-roots", "indicial roots and Casimir table");
  roots->add_option("N", roots_n, "rank")->required();
  auto* hitchin = app.add_subcommand("solve-hitchin", "constant-mode Hitchin and twisted Hitchin solves");
  auto* tbe = app.add_subcommand("solve-tbe", "continuity solve with report");
  auto* kh = app.add_subcommand("kh-map", "Kobayashi-Hitchin round trip");
  auto* ident = app.add_subcommand("check-identities", "identity suite");
  auto* don = app.add_subcommand("donaldson", "Donaldson functional checks and scan");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_config;
  }

  RunConfig c;
  Summary summary;
  try {
    if (!config_path.empty()) load_config_file(config_path, c);
    apply_environment(c);
    if (n) c.n = *n;
    if (beta) c.beta = *beta;
    if (n && !(q_list.size() || config_path.size())) c.q.assign(size_t(std::max(*n - 1, 0)), cplx(0.0));
    if (!q_list.empty()) {
      c.q.clear();
      for (size_t k = 0; k < q_list.size(); ++k) {
        const std::string& t = q_list[k];
        const auto p = t.find(':');
        try {
          c.q.push_back(p == std::string::npos ? cplx(std::stod(t)) : cplx(std::stod(t.substr(0, p)), std::stod(t.substr(p + 1))));
        } catch (const std::exception&) {
          throw config_error("q[" + std::to_string(k) + "]: cannot parse '" + t + "'");
        }
      }
    }
    for (int k = 2; k <= 8; ++k)
      if (qk[k]) {
        if (int(c.q.size()) < k - 1) c.q.resize(size_t(k - 1), cplx(0.0));
        c.q[size_t(k - 2)] = *qk[k];
      }
    if (y_min) c.mesh.y_min = *y_min;
    if (y_max) c.mesh.y_max = *y_max;
    if (count) c.mesh.count = *count;
    if (grading) c.mesh.grading = *grading;
    if (halvings) c.halvings = *halvings;
    if (!schedule.empty()) c.schedule = schedule;
    if (final_tol) c.final_tol = *final_tol;
    if (stage_tol) c.stage_tol = *stage_tol;
    if (residual_tol) c.residual_tol = *residual_tol;
    if (out) c.output_dir = *out;
    if (seed) c.seed = *seed;
    if (mu) c.mu = *mu;
    if (delta) c.delta = *delta;
    if (epsilon) c.epsilon = *epsilon;
    if (order) c.order = *order;
    if (draws) c.draws = *draws;
    if (perturb) c.perturb = *perturb;
    if (*roots) {
      if (roots_n < 2 || roots_n > 64) throw config_error("N: rank must be in [2, 64]");
    } else {
      validate_config(c);
    }

    summary.config = config_to_json(c);
    if (*verify) {
      summary.subcommand = "verify-model";
      run_verify_model(c, summary);
    } else if (*roots) {
      summary.subcommand = "indicial-roots";
      summary.config["n"] = roots_n;
      run_indicial_roots(roots_n, summary);
    } else if (*hitchin) {
      summary.subcommand = "solve-hitchin";
      run_solve_hitchin(c, summary);
    } else if (*tbe) {
      summary.subcommand = "solve-tbe";
      run_solve_tbe(c, summary);
    } else if (*kh) {
      summary.subcommand = "kh-map";
      run_kh_map(c, summary);
    } else if (*ident) {
      summary.subcommand = "check-identities";
      run_check_identities(c, summary);
    } else if (*don) {
      summary.subcommand = "donaldson";
      run_donaldson(c, summary);
    }
    write_json(prepare_out(c) / "summary.json", summary.to_json());
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const convergence_error& e) {
    std::cerr << "convergence error: " << e.what() << '\n';
    return exit_convergence;
  } catch (const nahm_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_fail;
  }
  std::cout << (summary.pass() ? "PASS" : "FAIL") << '\n';
  return summary.pass() ? 0 : exit_fail;
}
