#pragma once

#include <chrono>
#include <numbers>

#include <Eigen/SparseLU>

#include "nahm_model.hpp"
#include "residuals.hpp"

namespace nahm {

/// Frame data of H = H0 e^s together with the unitary U of the frame e^{s/2} G0 = U e^{sigma/2} g_m.
struct DeformedFrame {
  FrameData fd;
  Field sigma, U;
};

inline DeformedFrame deformed_frame(const GradedMesh& m, const HoloData& h, const Background& bg, const Field& s) {
  require_background(bg, {s, ""}, m);
  DeformedFrame r;
  std::tie(r.sigma, r.U) = total_exponent(bg, {s, ""});
  r.fd = frame_data(m, h, bg.nahm, r.sigma);
  return r;
}

enum class LRoute { defining, weitzenbock };

namespace detail {

/// Linearized moment map in the frame e^{sigma/2} g_m.
inline Field apply_L_frame(const GradedMesh& m, const HoloData& h, const FrameData& fd, const Field& v, LRoute route) {
  const int ny = m.ny();
  const double s2 = std::pow(h.tilt.sin(), 2);
  Field out(ny, Mat::Zero(h.n, h.n));
  std::vector<double> yh(ny - 1);
  for (int i = 0; i + 1 < ny; ++i) yh[i] = 0.5 * (m.y[i] + m.y[i + 1]);
  if (route == LRoute::defining) {
    // L v = s^2 [B, [B^+, v]] - D3 D3* v, D3 w = w' - [K, w], D3* w = w' + [K^+, w]
    Field w(ny - 1);
    for (int i = 0; i + 1 < ny; ++i) {
      const Mat dv = (v[i + 1] - v[i]) / (m.y[i + 1] - m.y[i]);
      w[i] = dv + comm(fd.Khalf[i].adjoint(), 0.5 * (v[i] + v[i + 1]));
    }
    for (int i = 1; i + 1 < ny; ++i) {
      const Mat dw = (w[i] - w[i - 1]) / (yh[i] - yh[i - 1]);
      const Mat D3w = dw - comm(fd.K[i], 0.5 * (w[i] + w[i - 1]));
      out[i] = s2 * comm(fd.B[i], comm(fd.B[i].adjoint(), v[i])) - D3w;
    }
  } else {
    // -nabla^2 v + ad_Kh^2 v + s^2/2 (ad_B ad_B+ + ad_B+ ad_B) v + [Omega, v]/2, nabla = d_y - ad_Ka
    Field g(ny - 1);
    for (int i = 0; i + 1 < ny; ++i) {
      const Mat dv = (v[i + 1] - v[i]) / (m.y[i + 1] - m.y[i]);
      g[i] = dv - comm(aherm_part(fd.Khalf[i]), 0.5 * (v[i] + v[i + 1]));
    }
    for (int i = 1; i + 1 < ny; ++i) {
      const Mat dg = (g[i] - g[i - 1]) / (yh[i] - yh[i - 1]);
      const Mat lap = dg - comm(aherm_part(fd.K[i]), 0.5 * (g[i] + g[i - 1]));
      const Mat Kh = herm_part(fd.K[i]);
      const Mat& B = fd.B[i];
      const Mat Bd = B.adjoint();
      out[i] = -lap + comm(Kh, comm(Kh, v[i])) +
               0.5 * s2 * (comm(B, comm(Bd, v[i])) + comm(Bd, comm(B, v[i]))) + 0.5 * comm(fd.omega[i], v[i]);
    }
  }
  return out;
}

inline void require_field_shape(const Field& a, const Field& b, const char* what) {
  if (a.size() != b.size()) throw dimension_error(std::string(what) + ": field length mismatch");
  for (size_t k = 0; k < a.size(); ++k) require_same(a[k], b[k], what);
}

}  // namespace detail

/// Linearization L_H of the moment map at H = H0 e^{s_bg}, acting on v given in the frame e^{s_bg/2} G0.
inline Field apply_L(const GradedMesh& m, const HoloData& h, const Background& bg, const Field& s_bg, const Field& v,
                     LRoute route = LRoute::defining) {
  detail::require_field_shape(s_bg, v, "apply_L");
  const DeformedFrame df = deformed_frame(m, h, bg, s_bg);
  Field vv(v.size());
  for (size_t k = 0; k < v.size(); ++k) vv[k] = df.U[k].adjoint() * v[k] * df.U[k];
  Field r = detail::apply_L_frame(m, h, df.fd, vv, route);
  for (size_t k = 0; k < r.size(); ++k) r[k] = df.U[k] * r[k] * df.U[k].adjoint();
  return r;
}

/// N_t(s) = Omega(H0 e^s) + t s on interior nodes; the Dirichlet rows carry s itself.
inline Field Nt_residual(const GradedMesh& m, const HoloData& h, const Background& bg, const Field& s, double t) {
  Field r = moment_map(m, h, bg, {s, bg.id});
  for (int i = 1; i + 1 < m.ny(); ++i) r[i] += t * s[i];
  r[0] = s[0];
  r[m.ny() - 1] = s[m.ny() - 1];
  return r;
}

/// Directional derivative of N_t at s along ds: L x - [Omega, x]/2 + [a, Omega] + t ds, x + 2a = 2 gamma(ad_{s/2}) ds/2.
inline Field Nt_derivative(const GradedMesh& m, const HoloData& h, const Background& bg, const Field& s, double t,
                           const Field& ds) {
  const DeformedFrame df = deformed_frame(m, h, bg, s);
  Field x(s.size()), a(s.size()), om(s.size());
  for (size_t k = 0; k < s.size(); ++k) {
    const Mat D = gamma_apply(herm_part(0.5 * s[k]), 0.5 * ds[k]);
    x[k] = 2.0 * herm_part(D);
    a[k] = aherm_part(D);
    om[k] = df.U[k] * df.fd.omega[k] * df.U[k].adjoint();
  }
  Field L = apply_L(m, h, bg, s, x);
  for (int i = 1; i + 1 < m.ny(); ++i) L[i] += comm(a[i], om[i]) - 0.5 * comm(om[i], x[i]) + t * ds[i];
  L[0] = ds[0];
  L[m.ny() - 1] = ds[m.ny() - 1];
  return L;
}

/// Discrete weighted inner product sum_i w_i Re tr(a_i b_i^dagger) with trapezoid weights.
inline double weighted_inner(const GradedMesh& m, const Field& a, const Field& b) {
  const auto w = trapezoid_weights(m);
  double r = 0.0;
  for (int i = 0; i < m.ny(); ++i) r += w[i] * (a[i].conjugate().cwiseProduct(b[i])).sum().real();
  return r;
}

/// Pointwise defect of <Omega_H - Omega_H0, s> = -(|s|^2)''/2 + sin^2 b |v(s) D2* s|^2 + |v(s) D3* s|^2.
/// Uses -(|s|^2)''/2 = -<s, s''> - |s'|^2, so commuting data satisfy the discrete identity to roundoff.
inline Field keyeq_defect(const GradedMesh& m, const HoloData& h, const Background& bg, const Field& s) {
  const int ny = m.ny();
  const Field OH = moment_map(m, h, bg, {s, bg.id});
  const DeformedFrame d0 = deformed_frame(m, h, bg, zero_field(m, h.n));
  const double sb2 = std::pow(h.tilt.sin(), 2);
  Field out(ny, Mat::Zero(1, 1));
  for (int i = 1; i + 1 < ny; ++i) {
    const double hm = m.y[i] - m.y[i - 1], hp = m.y[i + 1] - m.y[i];
    const Mat dsi = 0.5 * ((s[i + 1] - s[i]) / hp + (s[i] - s[i - 1]) / hm);
    const Mat d2s = 2.0 / (hm + hp) * ((s[i + 1] - s[i]) / hp - (s[i] - s[i - 1]) / hm);
    const double lhs = (s[i] * OH[i]).trace().real() - (s[i] * d0.fd.omega[i]).trace().real();
    const double rhs = -(s[i] * d2s).trace().real() - dsi.squaredNorm() +
                       sb2 * v_apply(s[i], comm(d0.fd.B[i].adjoint(), s[i])).squaredNorm() +
                       v_apply(s[i], dsi + comm(d0.fd.K[i].adjoint(), s[i])).squaredNorm();
    out[i](0, 0) = lhs - rhs;
  }
  return out;
}

inline double keyeq_check(const GradedMesh& m, const HoloData& h, const Background& bg, const Field& s) {
  return interior_max(m, keyeq_defect(m, h, bg, s));
}

/// Gauss-Legendre nodes and weights on [0, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre01(int k) {
  std::vector<double> x(k), w(k);
  for (int i = 0; i < k; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (k + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int j = 2; j <= k; ++j) {
        const double p2 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      const double dp = k * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) {
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
        break;
      }
    }
  }
  return {x, w};
}

/// int_y tr(s Omega(K e^{u s})) with trapezoid weights.
inline double donaldson_integrand(const GradedMesh& m, const HoloData& h, const Background& K, const Field& s, double u) {
  const Field O = moment_map(m, h, K, {scaled(s, u), K.id});
  const auto w = trapezoid_weights(m);
  double r = 0.0;
  for (int i = 0; i < m.ny(); ++i) r += w[i] * (s[i] * O[i]).trace().real();
  return r;
}

/// M(K e^s, K) = int_0^1 int <s, Omega(K e^{us})> dy du, Gauss-Legendre in u.
inline double donaldson_M(const GradedMesh& m, const HoloData& h, const Background& K, const Field& s, int order = 8) {
  const auto [x, w] = gauss_legendre01(order);
  double r = 0.0;
  for (int k = 0; k < order; ++k) r += w[k] * donaldson_integrand(m, h, K, s, x[k]);
  return r;
}

struct DonaldsonDerivatives {
  double first = 0.0, second = 0.0;
};

/// Derivatives of t -> M(K e^{ts}, K): first = int tr(s Omega_t), second = int s^2|[B,s]|^2 + |D3* s|^2.
inline DonaldsonDerivatives donaldson_derivatives(const GradedMesh& m, const HoloData& h, const Background& K,
                                                  const Field& s, double t) {
  DonaldsonDerivatives d;
  d.first = donaldson_integrand(m, h, K, s, t);
  const DeformedFrame df = deformed_frame(m, h, K, scaled(s, t));
  Field sv(m.ny());
  for (int i = 0; i < m.ny(); ++i) sv[i] = df.U[i].adjoint() * s[i] * df.U[i];
  const auto w = trapezoid_weights(m);
  const double sb2 = std::pow(h.tilt.sin(), 2);
  for (int i = 0; i < m.ny(); ++i) d.second += w[i] * sb2 * comm(df.fd.B[i], sv[i]).squaredNorm();
  for (int i = 0; i + 1 < m.ny(); ++i) {
    const double hy = m.y[i + 1] - m.y[i];
    const Mat g = (sv[i + 1] - sv[i]) / hy + comm(df.fd.Khalf[i].adjoint(), 0.5 * (sv[i] + sv[i + 1]));
    d.second += hy * g.squaredNorm();
  }
  return d;
}

struct C0Diagnostic {
  double sup_s = 0.0, bound = 0.0;
  bool holds = true;
  std::vector<double> u;
};

/// Scalar comparison: -u'' = |Omega_H0| with u = 0 at both ends; sup |s| <= sup u.
inline C0Diagnostic c0_diagnostic(const GradedMesh& m, const Field& omega0, const Field& s) {
  const int ny = m.ny();
  Eigen::VectorXd rhs(ny), diag(ny), lo(ny), up(ny);
  for (int i = 0; i < ny; ++i) {
    rhs(i) = (i == 0 || i == ny - 1) ? 0.0 : omega0[i].norm();
    diag(i) = 1.0;
    lo(i) = up(i) = 0.0;
  }
  for (int i = 1; i + 1 < ny; ++i) {
    const double hm = m.y[i] - m.y[i - 1], hp = m.y[i + 1] - m.y[i];
    lo(i) = -2.0 / (hm * (hm + hp));
    up(i) = -2.0 / (hp * (hm + hp));
    diag(i) = 2.0 / (hm * hp);
  }
  // Thomas algorithm
  std::vector<double> c(ny), d(ny), u(ny);
  c[0] = up(0) / diag(0);
  d[0] = rhs(0) / diag(0);
  for (int i = 1; i < ny; ++i) {
    const double den = diag(i) - lo(i) * c[i - 1];
    if (den == 0.0) throw convergence_error("c0_diagnostic: scalar solve failed");
    c[i] = up(i) / den;
    d[i] = (rhs(i) - lo(i) * d[i - 1]) / den;
  }
  u[ny - 1] = d[ny - 1];
  for (int i = ny - 2; i >= 0; --i) u[i] = d[i] - c[i] * u[i + 1];
  C0Diagnostic r;
  r.u = u;
  for (int i = 0; i < ny; ++i) {
    r.sup_s = std::max(r.sup_s, s[i].norm());
    r.bound = std::max(r.bound, u[i]);
  }
  r.holds = r.sup_s <= r.bound * (1.0 + 1e-9) + 1e-14;
  return r;
}

/// Log-log slope of |s| + y|s'| on the smallest interior nodes (admissibility window sup|s| + y|ds| <= C y^eps).
inline double admissibility_rate(const GradedMesh& m, const Field& s, int nodes = 6) {
  const Field ds = dy(m, s);
  std::vector<double> lx, ly;
  for (int i = 1; i + 1 < m.ny() && int(lx.size()) < nodes; ++i) {
    const double v = s[i].norm() + m.y[i] * ds[i].norm();
    if (v <= 0.0) return std::numeric_limits<double>::infinity();
    lx.push_back(std::log(m.y[i]));
    ly.push_back(std::log(v));
  }
  const int k = int(lx.size());
  double mx = 0, my = 0, sxy = 0, sxx = 0;
  for (int i = 0; i < k; ++i) {
    mx += lx[i] / k;
    my += ly[i] / k;
  }
  for (int i = 0; i < k; ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

struct NewtonOptions {
  double tol = 1e-7;  ///< intermediate stages; the t = 0 stage uses ContinuityOptions::final_tol
  int max_iter = 40;
  double fd_step = 1e-6;
  bool use_cg = true;
};

struct HistoryEntry {
  double t = 0.0;
  int iteration = 0;
  double residual = 0.0;
  double step = 1.0;
  std::string linear_solver;
};

struct NahmPoleFit {
  std::string field;
  Mat coefficient, expected;
  double rel_error = 0.0;
};

struct ExpFit {
  double delta = 0.0, r2 = 0.0, predicted_delta = 0.0;
  double y_from = 0.0, y_to = 0.0;
  bool available = false;
};

struct SolveReport {
  double omega_sup = 0.0;
  WeightedNorm omega_weighted, s_weighted;
  double s_sup = 0.0;
  std::vector<HistoryEntry> history;
  std::vector<NahmPoleFit> nahm_pole;
  FlatPair flat_pair;
  ExpFit flat_fit;
  double wall_time = 0.0;
  int ny = 0, newton_total = 0, cg_steps = 0, lu_steps = 0;
  double last_good_t = 1.0;
};

struct ContinuityOptions {
  std::vector<double> schedule;
  NewtonOptions newton;
  double final_tol = 1e-8;
  int order = -1;  ///< series order of H0; -1 = n
  BuildOptions build;
  double perturb_amplitude = 0.0;  ///< random compact perturbation of the starting metric
  unsigned seed = 1;
  double mu = 1.0, delta = 0.5;
};

inline std::vector<double> default_schedule() {
  std::vector<double> t{1.0};
  for (int k = 1; k <= 10; ++k) t.push_back(std::ldexp(1.0, -k));
  t.push_back(0.0);
  return t;
}

inline void check_schedule(const std::vector<double>& t) {
  if (t.empty() || t.back() != 0.0) throw config_error("schedule: last value must be 0");
  for (size_t k = 1; k < t.size(); ++k)
    if (!(t[k] < t[k - 1])) throw config_error("schedule: values must decrease strictly");
}

namespace detail {

inline RVec pack(const Field& s, const std::vector<Mat>& basis) {
  const int ny = int(s.size()), d = int(basis.size());
  RVec x((ny - 2) * d);
  for (int i = 1; i + 1 < ny; ++i) x.segment((i - 1) * d, d) = herm_coords(s[i], basis);
  return x;
}

inline Field unpack(const RVec& x, const std::vector<Mat>& basis, int ny) {
  const int n = int(basis[0].rows()), d = int(basis.size());
  Field s(ny, Mat::Zero(n, n));
  for (int i = 1; i + 1 < ny; ++i) s[i] = herm_from_coords(x, basis, (i - 1) * d);
  return s;
}

inline RVec residual_vec(const Field& N, const std::vector<Mat>& basis) { return pack(N, basis); }

/// Block-tridiagonal Jacobian of the interior residual by 3-colored central differences.
inline Eigen::SparseMatrix<double> fd_jacobian(const std::function<RVec(const RVec&)>& F, const RVec& x, int ny, int d,
                                               double h) {
  const int N = int(x.size());
  std::vector<Eigen::Triplet<double>> trip;
  for (int color = 0; color < 3; ++color)
    for (int a = 0; a < d; ++a) {
      RVec xp = x, xm = x;
      bool any = false;
      for (int i = 1; i + 1 < ny; ++i)
        if (i % 3 == color) {
          xp((i - 1) * d + a) += h;
          xm((i - 1) * d + a) -= h;
          any = true;
        }
      if (!any) continue;
      const RVec df = (F(xp) - F(xm)) / (2.0 * h);
      for (int i = 1; i + 1 < ny; ++i) {
        if (i % 3 != color) continue;
        const int col = (i - 1) * d + a;
        for (int r = std::max(1, i - 1); r <= std::min(ny - 2, i + 1); ++r)
          for (int b = 0; b < d; ++b) {
            const double v = df((r - 1) * d + b);
            if (v != 0.0) trip.emplace_back((r - 1) * d + b, col, v);
          }
      }
    }
  Eigen::SparseMatrix<double> J(N, N);
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

}  // namespace detail

/// Damped Newton for N_t(s) = 0 (interior nodes; s = 0 on the Dirichlet rows).
inline Field newton_stage(const GradedMesh& m, const HoloData& h, const Background& bg, Field s, double t,
                          const NewtonOptions& opt, SolveReport* rep = nullptr) {
  const auto basis = hermitian_basis(h.n);
  const int ny = m.ny(), d = int(basis.size());
  s[0].setZero();
  s[ny - 1].setZero();
  auto F = [&](const RVec& x) { return detail::residual_vec(Nt_residual(m, h, bg, detail::unpack(x, basis, ny), t), basis); };
  const auto wts = trapezoid_weights(m);
  RVec W(d * (ny - 2));
  for (int i = 1; i + 1 < ny; ++i) W.segment((i - 1) * d, d).setConstant(wts[i]);
  RVec x = detail::pack(s, basis);
  RVec r = F(x);
  for (int it = 0;; ++it) {
    const double res = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
    if (rep) rep->history.push_back({t, it, res, it ? rep->history.back().step : 0.0, ""});
    if (res < opt.tol) break;
    if (it == opt.max_iter)
      throw convergence_error("continuity: Newton stage t=" + std::to_string(t) + " did not converge (residual " +
                              std::to_string(res) + ")");
    const Eigen::SparseMatrix<double> J = detail::fd_jacobian(F, x, ny, d, opt.fd_step);
    RVec dx;
    std::string used = "lu";
    if (opt.use_cg) {
      // weighted operator W J is symmetric up to O(h^2) and positive: CG on its symmetric part
      Eigen::SparseMatrix<double> A = W.asDiagonal() * J;
      Eigen::SparseMatrix<double> As = 0.5 * (A + Eigen::SparseMatrix<double>(A.transpose()));
      Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
      cg.setTolerance(1e-12);
      cg.setMaxIterations(4 * int(x.size()));
      cg.compute(As);
      RVec cand = cg.solve(-(W.asDiagonal() * r).eval());
      if (cg.info() == Eigen::Success && cand.allFinite() && (J * cand + r).norm() <= 1e-3 * r.norm()) {
        dx = cand;
        used = "cg";
      }
    }
    if (used == "lu") {
      Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
      lu.compute(J);
      if (lu.info() != Eigen::Success) throw convergence_error("continuity: Jacobian factorization failed");
      dx = lu.solve(-r);
    }
    double lam = 1.0;
    RVec xn, rn;
    const double r0 = r.norm();
    for (int ls = 0;; ++ls) {
      xn = x + lam * dx;
      rn = F(xn);
      if (rn.norm() <= (1.0 - 1e-4 * lam) * r0) break;
      if (ls == 30) throw convergence_error("continuity: line search failed at t=" + std::to_string(t));
      lam *= 0.5;
    }
    x = xn;
    r = rn;
    if (rep) {
      rep->newton_total++;
      (used == "cg" ? rep->cg_steps : rep->lu_steps)++;
      rep->history.back().linear_solver = used;
      rep->history.back().step = lam;
    }
  }
  return detail::unpack(x, basis, ny);
}

/// Smooth compact random Hermitian field supported in (max(0.5, 10 y_min), y_max / 2).
inline Field random_compact_field(const GradedMesh& m, int n, double amplitude, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> N;
  const auto basis = hermitian_basis(n);
  std::vector<double> c(basis.size()), ph(basis.size());
  for (auto& x : c) x = N(rng);
  for (auto& x : ph) x = 2.0 * std::numbers::pi * std::uniform_real_distribution<double>(0, 1)(rng);
  const double a = std::max(0.5, 10.0 * m.y.front()), b = 0.5 * m.y.back();
  if (!(b > a)) throw domain_error("random_compact_field: mesh too short for the perturbation window");
  Field s(m.ny(), Mat::Zero(n, n));
  double top = 0.0;
  for (int i = 0; i < m.ny(); ++i) {
    const double y = m.y[i];
    if (y <= a || y >= b) continue;
    const double win = std::pow(std::sin(std::numbers::pi * std::log(y / a) / std::log(b / a)), 4);
    for (size_t k = 0; k < basis.size(); ++k) s[i] += win * c[k] * std::cos((k + 1) * 0.4 * y + ph[k]) * basis[k];
    top = std::max(top, maxabs(s[i]));
  }
  if (top > 0.0)
    for (auto& x : s) x *= amplitude / top;
  return s;
}

struct ContinuityResult {
  Field s;               ///< final deformation relative to bg0
  Background bg_start;   ///< H_{-1}
  Background bg0;        ///< H0 = H_{-1} e^kappa
  Field sigma;           ///< total exponent: H = g_m e^sigma g_m
  Field U;               ///< frame rotation of e^{s/2} G0
  std::optional<AdmissibleMetric> admissible;
  SolveReport report;
};

/// H0 = H_{-1} e^kappa with kappa = Omega(H_{-1}); returns the starting s = -kappa in the H0-unitary frame.
inline std::pair<Background, Field> kappa_shift(const GradedMesh& m, const HoloData& h, const Background& start) {
  Field kappa = moment_map(m, h, start, {zero_field(m, h.n), start.id});
  for (auto& k : kappa) k = traceless_part(herm_part(k));
  Background bg0;
  bg0.id = "continuity";
  bg0.nahm = start.nahm;
  bg0.sigma.resize(m.ny());
  Field s0(m.ny());
  for (int i = 0; i < m.ny(); ++i) {
    const NodePolar p = node_polar(kappa[i], start.sigma[i]);
    bg0.sigma[i] = p.sigma;
    s0[i] = herm_part(-(p.U.adjoint() * kappa[i] * p.U));
  }
  return {bg0, s0};
}

namespace detail {

inline Mat fit_intercept(const std::vector<double>& y, const std::vector<Mat>& v) {
  // least squares v = c0 + c1 y
  const int k = int(y.size());
  double sy = 0, syy = 0;
  for (double x : y) {
    sy += x;
    syy += x * x;
  }
  const double det = k * syy - sy * sy;
  Mat s0 = Mat::Zero(v[0].rows(), v[0].cols()), s1 = s0;
  for (int i = 0; i < k; ++i) {
    s0 += v[i];
    s1 += y[i] * v[i];
  }
  return (syy * s0 - sy * s1) / det;
}

}  // namespace detail

/// Unitary fields of H = H0 e^s in the frame e^{s/2} G0 (values only).
inline UnitaryFields solution_fields(const GradedMesh& m, const HoloData& h, const DeformedFrame& df) {
  UnitaryFields f = fields_from_frame(h, df.fd);
  for (int i = 0; i < m.ny(); ++i) {
    const Mat& U = df.U[i];
    for (auto* x : {&f.A_z, &f.phi_z, &f.phi_1, &f.A_y}) (*x)[i] = U * (*x)[i] * U.adjoint();
  }
  f.dA_z.clear();
  f.dphi_z.clear();
  f.dphi_1.clear();
  f.dA_y.clear();
  return f;
}

/// Leading y^-1 coefficients of A_z, A_zb, phi_z, phi_zb, phi_1 fitted on the smallest interior nodes.
inline std::vector<NahmPoleFit> extract_nahm_pole(const GradedMesh& m, const HoloData& h, const UnitaryFields& f,
                                                  int nodes = 6) {
  const auto t = principal_triple(h.n);
  const double s = h.tilt.sin(), c = h.tilt.cos();
  std::vector<double> ys;
  std::vector<Mat> az, azb, pz, pzb, p1;
  for (int i = 1; i < m.ny() && int(ys.size()) < nodes; ++i) {
    const double y = m.y[i];
    ys.push_back(y);
    az.push_back(y * f.A_z[i]);
    azb.push_back(-y * f.A_z[i].adjoint());
    pz.push_back(y * f.phi_z[i]);
    pzb.push_back(-y * f.phi_z[i].adjoint());
    p1.push_back(y * f.phi_1[i]);
  }
  std::vector<NahmPoleFit> out;
  auto add = [&](const char* name, const std::vector<Mat>& v, const Mat& ex) {
    NahmPoleFit r{name, detail::fit_intercept(ys, v), ex, 0.0};
    r.rel_error = (r.coefficient - ex).norm() / ex.norm();
    out.push_back(r);
  };
  add("A_z", az, s * t.e_plus);
  add("A_zbar", azb, -s * t.e_minus);
  add("phi_z", pz, c * t.e_plus);
  add("phi_zbar", pzb, -c * t.e_minus);
  add("phi_1", p1, 0.5 * I * c * t.e_zero);
  return out;
}

/// Least-squares fit of log|sigma - sigma_flat| = a - delta y on [y_from, y_to].
inline ExpFit fit_flat_decay(const GradedMesh& m, const HoloData& h, const Field& sigma, const Mat& H_flat,
                             double y_from, double y_to) {
  ExpFit r;
  r.y_from = y_from;
  r.y_to = y_to;
  std::vector<double> xs, ls;
  for (int i = 0; i < m.ny(); ++i) {
    const double y = m.y[i];
    if (y < y_from || y > y_to) continue;
    const double dev = (sigma[i] - flat_exponent(H_flat, h.n, y, h.tilt.sin())).norm();
    if (dev <= 0.0) continue;
    xs.push_back(y);
    ls.push_back(std::log(dev));
  }
  if (xs.size() < 3) return r;
  const int k = int(xs.size());
  double mx = 0, ml = 0;
  for (int i = 0; i < k; ++i) {
    mx += xs[i] / k;
    ml += ls[i] / k;
  }
  double sxx = 0, sxl = 0, sll = 0;
  for (int i = 0; i < k; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxl += (xs[i] - mx) * (ls[i] - ml);
    sll += (ls[i] - ml) * (ls[i] - ml);
  }
  r.delta = -sxl / sxx;
  r.r2 = sll > 0.0 ? sxl * sxl / (sxx * sll) : 1.0;
  // spectral gap of the flat limit: sin b times the smallest eigenvalue gap of alpha
  Eigen::ComplexEigenSolver<Mat> es(h.alpha);
  double gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < h.n; ++i)
    for (int j = i + 1; j < h.n; ++j) gap = std::min(gap, std::abs(es.eigenvalues()(i) - es.eigenvalues()(j)));
  r.predicted_delta = h.tilt.sin() * gap;
  r.available = true;
  return r;
}

/// Full continuity solve for the oper point.
inline ContinuityResult continuity_solve(const OperPoint& op, const GradedMesh& m, ContinuityOptions opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!m.sigma_invariant()) throw dimension_error("continuity_solve: Sigma-invariant mesh required");
  if (opt.schedule.empty()) opt.schedule = default_schedule();
  check_schedule(opt.schedule);
  const HoloData h = oper_local_frame(op);
  ContinuityResult res;
  bool zero = true;
  for (const auto& q : op.q) zero = zero && q == cplx(0.0);
  if (zero) {
    res.bg_start = model_background(m, op.n);
  } else {
    res.admissible = build_H0(h, opt.order < 0 ? op.n : opt.order, opt.build);
    res.bg_start = admissible_background(m, *res.admissible);
  }
  if (opt.perturb_amplitude > 0.0) {
    const Field r = random_compact_field(m, op.n, opt.perturb_amplitude, opt.seed);
    for (int i = 0; i < m.ny(); ++i) res.bg_start.sigma[i] = node_polar(r[i], res.bg_start.sigma[i]).sigma;
    res.bg_start.id += "+perturbed";
  }
  Field s;
  std::tie(res.bg0, s) = kappa_shift(m, h, res.bg_start);
  SolveReport& rep = res.report;
  rep.ny = m.ny();
  for (double t : opt.schedule) {
    NewtonOptions no = opt.newton;
    if (t == 0.0) no.tol = opt.final_tol;
    try {
      s = newton_stage(m, h, res.bg0, s, t, no, &rep);
    } catch (const convergence_error& e) {
      throw convergence_error(std::string(e.what()) + "; last good t=" + std::to_string(rep.last_good_t));
    }
    rep.last_good_t = t;
  }
  res.s = s;
  const DeformedFrame df = deformed_frame(m, h, res.bg0, s);
  res.sigma = df.sigma;
  res.U = df.U;
  const Field om = moment_map(m, h, res.bg0, {s, res.bg0.id});
  rep.omega_sup = interior_max(m, om);
  rep.omega_weighted = weighted_norm(m, om, opt.mu, opt.delta, 0);
  rep.s_weighted = weighted_norm(m, s, opt.mu, opt.delta, 1);
  rep.s_sup = maxabs(s);
  const UnitaryFields f = solution_fields(m, h, df);
  rep.nahm_pole = extract_nahm_pole(m, h, f);
  const int last = m.ny() - 1;
  const Mat Bw = df.U[last] * df.fd.B[last] * df.U[last].adjoint();
  rep.flat_pair = {Mat::Zero(h.n, h.n), Bw, cplx(h.tilt.w, 0.0)};
  if (res.admissible && res.admissible->H_flat)
    rep.flat_fit = fit_flat_decay(m, h, res.sigma, *res.admissible->H_flat, std::max(2.0, 0.2 * m.y.back()),
                                  m.y.back() - 3.0);
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

struct FiltrationResult {
  std::vector<double> rates;   ///< sorted ascending
  Mat basis;                   ///< columns at y = 1 ordered by descending rate (E_1 first)
  std::vector<double> induced; ///< |component of D2 E_i -> E_{i+1}/E_i|, i = 1..n-1
};

/// Parallel transport of D3 s = 0 (v' = K v in the unitary frame) from y = 1 toward y_min.
inline FiltrationResult filtration_extract(const GradedMesh& m, const HoloData& h, const DeformedFrame& df,
                                           int fit_nodes = 8, double degeneracy_tol = 0.05) {
  const int n = h.n, ny = m.ny();
  int i1 = 0;
  while (i1 + 1 < ny && m.y[i1] < 1.0) ++i1;
  // unitary-frame K at nodes and half nodes, rotated by U
  auto Kn = [&](int i) { return Mat(df.U[i] * df.fd.K[i] * df.U[i].adjoint()); };
  Mat Phi = Mat::Identity(n, n);
  std::vector<Mat> Phis(ny);
  Phis[i1] = Phi;
  for (int i = i1; i > 0; --i) {
    const double hh = m.y[i - 1] - m.y[i];
    const Mat Ka = df.fd.K[i], Kb = df.fd.K[i - 1];
    const Mat Km = df.fd.Khalf[i - 1];
    // RK4 in the frame e^{sigma/2} g_m; the unitary rotation is applied at the end
    const Mat k1 = Ka * Phi;
    const Mat k2 = Km * (Phi + 0.5 * hh * k1);
    const Mat k3 = Km * (Phi + 0.5 * hh * k2);
    const Mat k4 = Kb * (Phi + hh * k3);
    Phi = Phi + hh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    Phis[i - 1] = Phi;
  }
  (void)Kn;
  // singular values of Phi(y <- 1) against log y on the smallest nodes
  std::vector<std::vector<double>> logsv(n);
  std::vector<double> ly;
  for (int i = 1; i < ny && int(ly.size()) < fit_nodes; ++i) {
    Eigen::JacobiSVD<Mat> svd(Phis[i]);
    ly.push_back(std::log(m.y[i]));
    for (int k = 0; k < n; ++k) logsv[k].push_back(std::log(svd.singularValues()(k)));
  }
  FiltrationResult r;
  const int k = int(ly.size());
  double mx = 0;
  for (double x : ly) mx += x / k;
  for (int c = 0; c < n; ++c) {
    double my = 0, sxy = 0, sxx = 0;
    for (double v : logsv[c]) my += v / k;
    for (int i = 0; i < k; ++i) {
      sxy += (ly[i] - mx) * (logsv[c][i] - my);
      sxx += (ly[i] - mx) * (ly[i] - mx);
    }
    r.rates.push_back(sxy / sxx);
  }
  std::sort(r.rates.begin(), r.rates.end());
  for (int c = 1; c < n; ++c)
    if (r.rates[c] - r.rates[c - 1] < degeneracy_tol)
      throw convergence_error("filtration_extract: ambiguous filtration (degenerate vanishing rates)");
  // right singular vectors at the smallest node: fastest vanishing first
  Eigen::JacobiSVD<Mat> svd(Phis[1], Eigen::ComputeFullV);
  Mat V = svd.matrixV();  // columns ordered by descending singular value = most growing first
  Mat basis(n, n);
  for (int c = 0; c < n; ++c) basis.col(c) = V.col(n - 1 - c);
  r.basis = basis;
  // induced D2 = B at y = 1 in the filtration basis
  const Mat M = basis.inverse() * df.fd.B[i1] * basis;
  for (int c = 0; c + 1 < n; ++c) r.induced.push_back(std::abs(M(c + 1, c)));
  return r;
}

/// Kobayashi-Hitchin map: flat pair at y_max, untwisted by w = tan b, read through the Hitchin fibration.
inline OperPoint kobayashi_hitchin(const FlatPair& slice, double beta, double flat_tol = 1e-8) {
  const TiltParams tp = tilt_params(beta);
  const int n = int(slice.P2.rows());
  const double sc = std::max(1.0, maxabs(slice.P1) * maxabs(slice.P2));
  if (flatness_defect(slice) > flat_tol * sc) throw convergence_error("kobayashi_hitchin: slice is not flat");
  const HiggsData d = untwist({slice.P1, slice.P2, cplx(tp.w, 0.0)}, Mat::Identity(n, n));
  const auto p = hitchin_fibration(d.phi);
  // phi = sin b cos b B and B is conjugate to alpha
  const double f = tp.sin() * tp.cos();
  std::vector<cplx> pa(p.size());
  for (size_t j = 0; j < p.size(); ++j) pa[j] = p[j] / std::pow(f, double(j + 2));
  const auto qh = q_from_p(n, pa);
  OperPoint op{n, tp, {}};
  for (int k = 2; k <= n; ++k) op.q.push_back(qh[k - 2] * std::pow(tp.sin(), k - 1));
  return op;
}

}  // namespace nahm
