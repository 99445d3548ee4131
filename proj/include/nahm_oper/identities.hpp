#pragma once

#include <random>

#include "tbe.hpp"

namespace nahm {

/// Random Hermitian matrix with max-entry norm `size`.
inline Mat random_hermitian(int n, std::mt19937& rng, double size = 1.0) {
  std::normal_distribution<double> N;
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = cplx(N(rng), N(rng));
  Mat h = traceless_part(herm_part(a));
  return h * (size / std::max(maxabs(h), 1e-300));
}

inline Mat random_complex(int n, std::mt19937& rng) {
  std::normal_distribution<double> N;
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = cplx(N(rng), N(rng));
  return traceless_part(a);
}

/// Smooth random unitary-gauge fields: low Fourier modes on the torus, slow profiles in y.
inline UnitaryFields random_fields(const GradedMesh& m, int n, unsigned seed, double amplitude = 0.5) {
  std::mt19937 rng(seed);
  const int modes = 2;
  std::vector<Mat> c[4];
  for (auto& v : c)
    for (int k = 0; k < 3 * modes; ++k) v.push_back(random_complex(n, rng));
  UnitaryFields f;
  for (auto* x : {&f.A_z, &f.phi_z, &f.phi_1, &f.A_y}) x->assign(m.size(), Mat::Zero(n, n));
  const double tp = 2.0 * std::numbers::pi / m.torus_period;
  for (int iy = 0; iy < m.ny(); ++iy)
    for (int iz = 0; iz < m.nz(); ++iz) {
      const double y = m.y[iy], x2 = (iz % m.torus_size) * m.hz(), x3 = (iz / m.torus_size) * m.hz();
      Mat acc[4];
      for (int q = 0; q < 4; ++q) {
        acc[q] = Mat::Zero(n, n);
        for (int k = 0; k < modes; ++k) {
          const double ph = tp * (k * x2 + (k + 1) * x3);
          acc[q] += std::cos(0.3 * (k + 1) * y) * c[q][3 * k] + std::cos(ph) * c[q][3 * k + 1] +
                    std::sin(ph + 0.2 * y) * c[q][3 * k + 2];
        }
        acc[q] *= amplitude / modes;
      }
      const int idx = m.index(iy, iz);
      f.A_z[idx] = acc[0];
      f.phi_z[idx] = acc[1];
      f.phi_1[idx] = aherm_part(acc[2]);
      f.A_y[idx] = aherm_part(acc[3]);
    }
  return f;
}

/// Relative discrepancy of the exact linear relations between the four equation systems.
inline double equivalence_discrepancy(const GradedMesh& m, const UnitaryFields& f, double beta) {
  const TiltParams tp = tilt_params(beta);
  const double s = std::sin(beta), t3 = std::tan(3.0 * beta), s2 = std::sin(2.0 * beta);
  const TebeResiduals T = tebe_residuals(m, f, beta);
  const ReducedResiduals E = reduced_residuals(m, f, beta);
  const SystemResiduals S = commutator_residuals(m, f, beta);
  const GebeResiduals G = gebe_residuals(m, f, tp.t, nullptr, nullptr, beta);
  double err = 0.0, scale = 1e-300;
  auto rel = [&](const Field& a, const Field& b) {
    for (int iy = 1; iy + 1 < m.ny(); ++iy)
      for (int iz = 0; iz < m.nz(); ++iz) {
        const int k = m.index(iy, iz);
        err = std::max(err, maxabs(a[k] - b[k]));
        scale = std::max({scale, maxabs(a[k]), maxabs(b[k])});
      }
  };
  const cplx i(0.0, 1.0);
  const cplx cp = tp.c_plus;
  rel(G.G1_23, scaled(E.E1, -2.0 * i) + scaled(E.E2, i * cp));
  rel(G.G1_yz, scaled(E.E3, -i) + scaled(E.E4, i * t3));
  rel(G.G1_yzb, scaled(E.E3b, -i) + scaled(E.E4b, i * t3));
  rel(G.G2_z, scaled(E.E4, cp));
  rel(G.G2_zb, scaled(E.E4b, -cp));
  rel(G.G2_y, scaled(E.E2, 2.0 * i * s * cp));
  rel(G.G3, scaled(E.E5, -2.0));
  rel(S.Imm, scaled(T.omega, 0.25));
  rel(S.I12, scaled(T.c12, -s2 / 4.0));
  rel(S.I13, scaled(T.c13, -0.5));
  rel(S.I23, scaled(T.c23, -0.5));
  return err / scale;
}

/// max |e^{ad s} x - x - [s, gamma(s) x]| and max |v(s) v(s) x - gamma(-s) x|.
inline std::pair<double, double> gamma_v_defects(const Mat& s, const Mat& x) {
  const double g = maxabs(Ad_exp(s, x) - x - comm(s, gamma_apply(s, x)));
  const double v = maxabs(v_apply(s, v_apply(s, x)) - gamma_apply(Mat(-s), x));
  return {g, v};
}

/// Smooth Dirichlet test field: sin^4 log-window on (a, b) times slow oscillations.
inline Field window_field(const GradedMesh& m, int n, unsigned seed, double amplitude, double a, double b) {
  std::mt19937 rng(seed);
  const Mat c0 = random_hermitian(n, rng), c1 = random_hermitian(n, rng), c2 = random_hermitian(n, rng);
  Field s(m.size(), Mat::Zero(n, n));
  for (int i = 0; i < m.ny(); ++i) {
    const double y = m.y[i];
    if (y <= a || y >= b) continue;
    const double w = std::pow(std::sin(std::numbers::pi * std::log(y / a) / std::log(b / a)), 4);
    s[i] = amplitude * w * (std::cos(y) * c0 + std::sin(2.0 * y) * c1 + 0.5 * c2);
  }
  return s;
}

struct OrderEstimate {
  std::vector<int> counts;
  std::vector<double> errors;
  double order = 0.0;  ///< log2 of the last error ratio
};

inline double last_order(const std::vector<double>& e) {
  return e.size() < 2 ? 0.0 : std::log2(e[e.size() - 2] / e.back());
}

/// Key-identity defect on `levels` nested meshes for a fixed smooth test field.
inline OrderEstimate keyeq_order(const HoloData& h, GradedMesh m, int levels, unsigned seed, double amplitude = 0.8) {
  OrderEstimate r;
  for (int l = 0; l < levels; ++l) {
    const Field s = window_field(m, h.n, seed, amplitude, 0.05, 0.8 * m.y.back());
    r.counts.push_back(m.ny());
    r.errors.push_back(keyeq_check(m, h, model_background(m, h.n), s));
    m = refine_mesh(m);
  }
  r.order = last_order(r.errors);
  return r;
}

/// Max difference of the defining and Weitzenbock evaluations of L on nested meshes.
inline OrderEstimate weitzenbock_order(const HoloData& h, GradedMesh m, int levels, unsigned seed) {
  OrderEstimate r;
  for (int l = 0; l < levels; ++l) {
    const Field bg_s = window_field(m, h.n, seed + 1, 0.3, 0.05, 0.8 * m.y.back());
    const Field v = window_field(m, h.n, seed, 1.0, 0.05, 0.8 * m.y.back());
    const Background bg = model_background(m, h.n);
    const Field a = apply_L(m, h, bg, bg_s, v, LRoute::defining);
    const Field b = apply_L(m, h, bg, bg_s, v, LRoute::weitzenbock);
    r.counts.push_back(m.ny());
    r.errors.push_back(interior_max(m, a - b));
    m = refine_mesh(m);
  }
  r.order = last_order(r.errors);
  return r;
}

/// Order of the continuity solution sigma on nested meshes (max over the coarse nodes).
inline OrderEstimate solution_order(const OperPoint& op, GradedMesh m, int levels, const ContinuityOptions& opt = {}) {
  OrderEstimate r;
  std::vector<Field> sig;
  for (int l = 0; l < levels; ++l) {
    sig.push_back(continuity_solve(op, m, opt).sigma);
    r.counts.push_back(m.ny());
    m = refine_mesh(m);
  }
  const int base = r.counts.front();
  for (int l = 0; l + 1 < levels; ++l) {
    double e = 0.0;
    for (int i = 0; i < base; ++i) e = std::max(e, maxabs(sig[l][size_t(i) << l] - sig[l + 1][size_t(i) << (l + 1)]));
    r.errors.push_back(e);
  }
  r.order = last_order(r.errors);
  return r;
}

}  // namespace nahm
