#pragma once

#include "fields.hpp"

namespace nahm {

/// Value and first derivatives (d_y, d = d2 - i d3, dbar = d2 + i d3) of a field.
struct Jet {
  Field v, y, h, a;
};

inline Jet make_jet(const GradedMesh& m, const Field& v, const Field& dyv) {
  return {v, dyv.empty() ? dy(m, v) : dyv, dhol(m, v), dahol(m, v)};
}

/// Jet of X^bar = -X^dagger from the jet of X.
inline Jet conj_jet(const Jet& j) {
  return {scaled(adjoint(j.v), -1.0), scaled(adjoint(j.y), -1.0), scaled(adjoint(j.a), -1.0),
          scaled(adjoint(j.h), -1.0)};
}

inline Jet lin(const Jet& p, cplx a, const Jet& q, cplx b) {
  return {scaled(p.v, a) + scaled(q.v, b), scaled(p.y, a) + scaled(q.y, b), scaled(p.h, a) + scaled(q.h, b),
          scaled(p.a, a) + scaled(q.a, b)};
}

struct FieldJets {
  Jet Az, Azb, pz, pzb, p1, Ay;
};

inline FieldJets field_jets(const GradedMesh& m, const UnitaryFields& f) {
  FieldJets j;
  j.Az = make_jet(m, f.A_z, f.dA_z);
  j.pz = make_jet(m, f.phi_z, f.dphi_z);
  j.p1 = make_jet(m, f.phi_1, f.dphi_1);
  j.Ay = make_jet(m, f.A_y, f.dA_y);
  j.Azb = conj_jet(j.Az);
  j.pzb = conj_jet(j.pz);
  return j;
}

/// First-order operator d_kind + p, kind 0 = dbar, 1 = d, 2 = d_y.
struct Op {
  int kind;
  Jet p;
};

inline const Field& deriv(const Jet& j, int kind) { return kind == 0 ? j.a : (kind == 1 ? j.h : j.y); }

/// [d_a + p, d_b + q] as a multiplication operator.
inline Field op_bracket(const Op& x, const Op& z) {
  const Field& a = deriv(z.p, x.kind);
  const Field& b = deriv(x.p, z.kind);
  Field r(a.size());
  for (size_t k = 0; k < a.size(); ++k) r[k] = a[k] - b[k] + comm(x.p.v[k], z.p.v[k]);
  return r;
}

/// [D, D^dagger] with the formal adjoint D^dagger = -(d_conj - p^dagger).
inline Field op_bracket_adjoint(const Op& x) {
  static constexpr int conj_kind[3] = {1, 0, 2};
  Op xc{conj_kind[x.kind], {scaled(adjoint(x.p.v), -1.0), scaled(adjoint(x.p.y), -1.0),
                            scaled(adjoint(x.p.a), -1.0), scaled(adjoint(x.p.h), -1.0)}};
  return scaled(op_bracket(x, xc), -1.0);
}

struct DOperators {
  Op D1, D2, D3;
};

/// D1 = dbar + A_zb - tan b phi_zb, D2 = d + A_z + cot b phi_z, D3 = d_y + A_y - i phi_1 / cos b.
inline DOperators d_operators(const FieldJets& j, double beta) {
  const double t = std::tan(beta), c = std::cos(beta);
  return {{0, lin(j.Azb, 1.0, j.pzb, -t)}, {1, lin(j.Az, 1.0, j.pz, 1.0 / t)}, {2, lin(j.Ay, 1.0, j.p1, -I / c)}};
}

struct TebeResiduals {
  Field c12, c13, c23, omega;
  std::vector<const Field*> all() const { return {&c12, &c13, &c23, &omega}; }
};

/// TEBE commutators and the moment map cos^2[D1,D1^+] + sin^2[D2,D2^+] + [D3,D3^+] from fields.
inline TebeResiduals tebe_residuals(const GradedMesh& m, const UnitaryFields& f, double beta) {
  const FieldJets j = field_jets(m, f);
  const DOperators d = d_operators(j, beta);
  const double c2 = std::pow(std::cos(beta), 2), s2 = std::pow(std::sin(beta), 2);
  TebeResiduals r;
  r.c12 = op_bracket(d.D1, d.D2);
  r.c13 = op_bracket(d.D1, d.D3);
  r.c23 = op_bracket(d.D2, d.D3);
  r.omega = scaled(op_bracket_adjoint(d.D1), c2) + scaled(op_bracket_adjoint(d.D2), s2) + op_bracket_adjoint(d.D3);
  return r;
}

/// Half-normalized component building blocks at every node.
struct ComponentAtoms {
  Field f, X, Y, Dyp1, Fyz, Fyzb, Dzp1, Dzbp1, Dypz, Dypzb, Q, Qb;
  Field pz, pzb, p1;
};

inline ComponentAtoms component_atoms(const GradedMesh& m, const UnitaryFields& uf) {
  const FieldJets j = field_jets(m, uf);
  const size_t N = uf.A_z.size();
  ComponentAtoms a;
  for (auto* x : {&a.f, &a.X, &a.Y, &a.Dyp1, &a.Fyz, &a.Fyzb, &a.Dzp1, &a.Dzbp1, &a.Dypz, &a.Dypzb, &a.Q, &a.Qb,
                  &a.pz, &a.pzb, &a.p1})
    x->resize(N);
  for (size_t k = 0; k < N; ++k) {
    // halve z-components and z-derivatives
    const Mat Az = 0.5 * j.Az.v[k], Azb = 0.5 * j.Azb.v[k], pz = 0.5 * j.pz.v[k], pzb = 0.5 * j.pzb.v[k];
    const Mat& p1 = j.p1.v[k];
    const Mat& Ay = j.Ay.v[k];
    auto dz = [&](const Jet& x, double sc) -> Mat { return 0.25 * sc * x.h[k]; };
    auto dzb = [&](const Jet& x, double sc) -> Mat { return 0.25 * sc * x.a[k]; };
    const Mat Fzzb = dz(j.Azb, 1.0) - dzb(j.Az, 1.0) + comm(Az, Azb);
    a.f[k] = Fzzb - comm(pz, pzb);
    const Mat Dzpzb = dz(j.pzb, 1.0) + comm(Az, pzb);
    const Mat Dzbpz = dzb(j.pz, 1.0) + comm(Azb, pz);
    a.X[k] = Dzpzb - Dzbpz;
    a.Y[k] = Dzpzb + Dzbpz;
    a.Dyp1[k] = j.p1.y[k] + comm(Ay, p1);
    a.Fyz[k] = 0.5 * j.Az.y[k] - 0.5 * j.Ay.h[k] + comm(Ay, Az);
    a.Fyzb[k] = 0.5 * j.Azb.y[k] - 0.5 * j.Ay.a[k] + comm(Ay, Azb);
    a.Dzp1[k] = 0.5 * j.p1.h[k] + comm(Az, p1);
    a.Dzbp1[k] = 0.5 * j.p1.a[k] + comm(Azb, p1);
    a.Dypz[k] = 0.5 * j.pz.y[k] + comm(Ay, pz);
    a.Dypzb[k] = 0.5 * j.pzb.y[k] + comm(Ay, pzb);
    a.Q[k] = comm(pz, p1);
    a.Qb[k] = -comm(pzb, p1);
    a.pz[k] = pz;
    a.pzb[k] = pzb;
    a.p1[k] = p1;
  }
  return a;
}

/// The reduced system: E1..E5 and the dbar companions E3b, E4b.
struct ReducedResiduals {
  Field E1, E2, E3, E4, E5, E3b, E4b;
  std::vector<const Field*> all() const { return {&E1, &E2, &E3, &E4, &E5, &E3b, &E4b}; }
};

inline ReducedResiduals reduced_residuals(const GradedMesh& m, const UnitaryFields& uf, double beta) {
  const ComponentAtoms a = component_atoms(m, uf);
  const double s = std::sin(beta), c = std::cos(beta), c2 = std::cos(2 * beta), cot2 = 1.0 / std::tan(2 * beta);
  const size_t N = a.f.size();
  ReducedResiduals r;
  for (auto* x : {&r.E1, &r.E2, &r.E3, &r.E4, &r.E5, &r.E3b, &r.E4b}) x->resize(N);
  for (size_t k = 0; k < N; ++k) {
    r.E1[k] = a.f[k] + cot2 * a.X[k];
    r.E2[k] = I * a.Dyp1[k] + a.X[k] / s;
    r.E3[k] = I * a.Fyz[k] + (c2 / c) * a.Dzp1[k] - 2.0 * s * a.Q[k];
    r.E4[k] = I * a.Dypz[k] - 2.0 * s * a.Dzp1[k] - (c2 / c) * a.Q[k];
    r.E5[k] = a.Y[k];
    r.E3b[k] = I * a.Fyzb[k] - (c2 / c) * a.Dzbp1[k] - 2.0 * s * a.Qb[k];
    r.E4b[k] = I * a.Dypzb[k] + 2.0 * s * a.Dzbp1[k] - (c2 / c) * a.Qb[k];
  }
  return r;
}

/// Commutator and moment-map combinations I12, I13, I23, Imm.
struct SystemResiduals {
  Field I12, I13, I23, Imm;
  std::vector<const Field*> all() const { return {&I12, &I13, &I23, &Imm}; }
};

inline SystemResiduals commutator_residuals(const GradedMesh& m, const UnitaryFields& uf, double beta) {
  const ComponentAtoms a = component_atoms(m, uf);
  const double s = std::sin(beta), c = std::cos(beta), t = std::tan(beta), c2 = std::cos(2 * beta),
               s2 = std::sin(2 * beta);
  const size_t N = a.f.size();
  SystemResiduals r;
  for (auto* x : {&r.I12, &r.I13, &r.I23, &r.Imm}) x->resize(N);
  for (size_t k = 0; k < N; ++k) {
    r.I12[k] = s2 * a.f[k] + c2 * a.X[k] - a.Y[k];
    r.I13[k] = a.Fyzb[k] - t * a.Dypzb[k] + (I / c) * a.Dzbp1[k] - (I * s / (c * c)) * comm(a.pzb[k], a.p1[k]);
    r.I23[k] = a.Fyz[k] + (1.0 / t) * a.Dypz[k] + (I / c) * a.Dzp1[k] + (I / s) * comm(a.pz[k], a.p1[k]);
    r.Imm[k] = c2 * a.f[k] - s2 * a.X[k] - (I / (2.0 * c)) * a.Dyp1[k];
  }
  return r;
}

/// GEBE residuals in complex components: G1_23, G1_yz, G1_yzb, G2_z, G2_zb, G2_y, G3.
struct GebeResiduals {
  Field G1_23, G1_yz, G1_yzb, G2_z, G2_zb, G2_y, G3;
  std::vector<const Field*> all() const { return {&G1_23, &G1_yz, &G1_yzb, &G2_z, &G2_zb, &G2_y, &G3}; }
};

/// Evaluates the generalized Bogomolny system with twist parameter t; A1 defaults to tan(beta) phi_1.
inline GebeResiduals gebe_residuals(const GradedMesh& m, const UnitaryFields& uf, double t_param,
                                    const Field* A1_field = nullptr, const Field* dA1_field = nullptr,
                                    double beta_for_constraint = 0.0) {
  const FieldJets j = field_jets(m, uf);
  const double cm = 0.5 * (t_param - 1.0 / t_param), cp = 0.5 * (t_param + 1.0 / t_param);
  const size_t N = uf.A_z.size();
  Jet A1;
  if (A1_field) {
    A1 = make_jet(m, *A1_field, dA1_field ? *dA1_field : Field{});
  } else {
    const double tb = std::tan(beta_for_constraint);
    A1 = {scaled(j.p1.v, tb), scaled(j.p1.y, tb), scaled(j.p1.h, tb), scaled(j.p1.a, tb)};
  }
  GebeResiduals g;
  for (auto* x : {&g.G1_23, &g.G1_yz, &g.G1_yzb, &g.G2_z, &g.G2_zb, &g.G2_y, &g.G3}) x->resize(N);
  for (size_t k = 0; k < N; ++k) {
    // real components: X2 = Xz + Xzb, X3 = i (Xz - Xzb) in the half normalization
    auto re2 = [&](const Mat& z, const Mat& zb) -> Mat { return 0.5 * (z + zb); };
    auto re3 = [&](const Mat& z, const Mat& zb) -> Mat { return 0.5 * I * (z - zb); };
    // index 0 = x2, 1 = x3, 2 = y; D[i][f] = d_i of field
    Mat A[3] = {re2(j.Az.v[k], j.Azb.v[k]), re3(j.Az.v[k], j.Azb.v[k]), j.Ay.v[k]};
    Mat P[3] = {re2(j.pz.v[k], j.pzb.v[k]), re3(j.pz.v[k], j.pzb.v[k]), Mat::Zero(j.p1.v[k].rows(), j.p1.v[k].cols())};
    // d2 = (d + dbar)/2 and d3 = i (d - dbar)/2 in field normalization
    auto d_of = [&](const Jet& x, int i) -> Mat {
      if (i == 0) return 0.5 * (x.h[k] + x.a[k]);
      if (i == 1) return 0.5 * I * (x.h[k] - x.a[k]);
      return x.y[k];
    };
    auto dA = [&](int i, int c) -> Mat {
      if (c == 2) return d_of(j.Ay, i);
      const Mat z = d_of(j.Az, i), zb = d_of(j.Azb, i);
      return c == 0 ? re2(z, zb) : re3(z, zb);
    };
    auto dP = [&](int i, int c) -> Mat {
      if (c == 2) return Mat::Zero(A[0].rows(), A[0].cols());
      const Mat z = d_of(j.pz, i), zb = d_of(j.pzb, i);
      return c == 0 ? re2(z, zb) : re3(z, zb);
    };
    const Mat& p1 = j.p1.v[k];
    const Mat& a1 = A1.v[k];
    auto D = [&](int i, int c) -> Mat { return dP(i, c) + comm(A[i], P[c]); };
    auto F = [&](int i, int c) -> Mat { return dA(i, c) - dA(c, i) + comm(A[i], A[c]); };
    auto dAphi = [&](int i, int c) -> Mat { return D(i, c) - D(c, i); };
    Mat Dp1[3], DA1[3], v[3];
    for (int i = 0; i < 3; ++i) {
      Dp1[i] = d_of(j.p1, i) + comm(A[i], p1);
      DA1[i] = d_of(A1, i) + comm(A[i], a1);
      v[i] = Dp1[i] + comm(P[i], a1);
    }
    static constexpr int cyc[3][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}};
    Mat G1[3], G2[3];
    for (const auto& cc : cyc) {
      const int i = cc[0], c = cc[1], kk = cc[2];
      G1[kk] = F(i, c) - comm(P[i], P[c]) + cm * dAphi(i, c) - cp * v[kk];
      G2[kk] = DA1[kk] - comm(P[kk], p1) + cm * (Dp1[kk] + comm(P[kk], a1)) - cp * dAphi(i, c);
    }
    const Mat G3 = -(D(0, 0) + D(1, 1)) - comm(p1, a1);
    const Mat wy2 = G1[1], wy3 = -G1[0];
    g.G1_23[k] = G1[2];
    g.G1_yz[k] = 0.5 * (wy2 - I * wy3);
    g.G1_yzb[k] = 0.5 * (wy2 + I * wy3);
    g.G2_z[k] = 0.5 * (G2[0] - I * G2[1]);
    g.G2_zb[k] = 0.5 * (G2[0] + I * G2[1]);
    g.G2_y[k] = G2[2];
    g.G3[k] = G3;
  }
  return g;
}

/// Hitchin residual of Sigma-slice fields: (f, D_zbar phi_z) in half normalization.
inline std::pair<Field, Field> hitchin_residual(const GradedMesh& m, const UnitaryFields& uf) {
  const ComponentAtoms a = component_atoms(m, uf);
  const FieldJets j = field_jets(m, uf);
  Field hol(a.f.size());
  for (size_t k = 0; k < hol.size(); ++k) hol[k] = 0.25 * j.pz.a[k] + comm(0.5 * j.Azb.v[k], a.pz[k]);
  return {a.f, hol};
}

template <class R>
double max_residual(const GradedMesh& m, const R& r) {
  double x = 0.0;
  for (const Field* f : r.all()) x = std::max(x, interior_max(m, *f));
  return x;
}

struct WeightedNorm {
  double value = 0.0;
  bool divergent = false;
};

/// Discrete proxy of the y^mu e^{delta y} C^k_ie norm (Holder seminorm omitted).
inline WeightedNorm weighted_norm(const GradedMesh& m, const Field& u, double mu, double delta, int k,
                                  double threshold = 1e6) {
  if (k < 0 || k > 2) throw domain_error("weighted_norm: k must be 0, 1 or 2");
  Field uy = dy(m, u), uyy = dyy(m, u), uz = scaled(dhol(m, u), 0.5);
  Field uzz = scaled(dhol(m, uz), 0.5), uzy = scaled(dhol(m, uy), 0.5);
  WeightedNorm w;
  for (int iy = 0; iy < m.ny(); ++iy) {
    const double y = m.y[iy], wt = std::pow(y, -mu) * std::exp(delta * y);
    for (int iz = 0; iz < m.nz(); ++iz) {
      const int q = m.index(iy, iz);
      double acc = maxabs(u[q]);
      if (k >= 1) acc += maxabs(y * uy[q]) + maxabs(y * uz[q]);
      if (k >= 2) acc += maxabs(y * uy[q] + y * y * uyy[q]) + maxabs(y * y * uzz[q]) + maxabs(y * uz[q] + y * y * uzy[q]);
      w.value = std::max(w.value, wt * acc);
    }
  }
  w.divergent = !(w.value < threshold);
  return w;
}

}  // namespace nahm
