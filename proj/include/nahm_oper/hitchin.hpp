#pragma once

#include <random>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include "lie_core.hpp"

namespace nahm {

/// Constant-mode Higgs pair on the flat torus: dbar-coefficient alpha0 and phi_z.
struct HiggsData {
  int n = 0;
  Mat alpha0;
  Mat phi;
};

/// Constant coefficients of P1 (dz-bar part) and P2 (dz part) of a flat connection.
struct FlatPair {
  Mat P1, P2;
  cplx w{1.0, 0.0};
};

/// Non-convergence with a basis of a common invariant subspace (empty if none was found).
struct reducible_error : convergence_error {
  Mat certificate;
  reducible_error(const std::string& what, Mat cert) : convergence_error(what), certificate(std::move(cert)) {}
};

inline HiggsData hitchin_section_higgs(int n, const std::vector<cplx>& q) {
  if (n < 2) throw invalid_rank("hitchin_section_higgs: rank must be at least 2");
  if (int(q.size()) != n - 1) throw domain_error("hitchin_section_higgs: expected n-1 differentials");
  HiggsData d;
  d.n = n;
  d.alpha0 = Mat::Zero(n, n);
  d.phi = principal_triple(n).e_plus;
  // bottom row (q_n, ..., q_2, 0)
  for (int j = 2; j <= n; ++j) d.phi(n - 1, n - j) += q[j - 2];
  return d;
}

/// Coefficients c_k of det(lambda - phi) = sum_k c_k lambda^{n-k} (Faddeev-LeVerrier).
inline std::vector<cplx> char_poly(const Mat& phi) {
  require_square(phi, "char_poly");
  const int n = int(phi.rows());
  std::vector<cplx> c(n + 1);
  c[0] = 1.0;
  Mat M = Mat::Zero(n, n);
  const Mat Id = Mat::Identity(n, n);
  for (int k = 1; k <= n; ++k) {
    M = phi * M + c[k - 1] * Id;
    c[k] = -(phi * M).trace() / double(k);
  }
  return c;
}

/// (p_2, ..., p_n) with det(lambda - phi) = sum lambda^{n-j} (-1)^j p_j.
inline std::vector<cplx> hitchin_fibration(const Mat& phi) {
  const auto c = char_poly(phi);
  const int n = int(phi.rows());
  std::vector<cplx> p;
  for (int j = 2; j <= n; ++j) p.push_back(((j % 2) ? -1.0 : 1.0) * c[j]);
  return p;
}

/// Inverse of q -> hitchin_fibration(section(q)) by Newton on the polynomial map.
inline std::vector<cplx> q_from_p(int n, const std::vector<cplx>& p, double tol = 1e-13) {
  if (int(p.size()) != n - 1) throw domain_error("q_from_p: expected n-1 invariants");
  const int m = n - 1;
  auto F = [&](const Vec& q) {
    std::vector<cplx> qq(q.data(), q.data() + m);
    const auto pp = hitchin_fibration(hitchin_section_higgs(n, qq).phi);
    Vec r(m);
    for (int k = 0; k < m; ++k) r(k) = pp[k] - p[k];
    return r;
  };
  Vec q(m);
  for (int k = 0; k < m; ++k) q(k) = ((k % 2) ? 1.0 : -1.0) * p[k];
  double scale = 1.0;
  for (const auto& x : p) scale = std::max(scale, std::abs(x));
  for (int it = 0; it < 100; ++it) {
    const Vec r = F(q);
    if (r.cwiseAbs().maxCoeff() < tol * scale) return {q.data(), q.data() + m};
    Mat Jm(m, m);
    const double h = 1e-7 * std::max(1.0, q.cwiseAbs().maxCoeff());
    for (int k = 0; k < m; ++k) {
      Vec qp = q, qm = q;
      qp(k) += h;
      qm(k) -= h;
      Jm.col(k) = (F(qp) - F(qm)) / (2.0 * h);
    }
    q -= Jm.fullPivLu().solve(r);
  }
  throw convergence_error("q_from_p: Newton did not converge");
}

struct IrreducibilityResult {
  bool irreducible = true;
  Mat certificate;  ///< orthonormal basis of a common invariant subspace when reducible
  int algebra_dim = 0;
};

namespace detail {

inline Mat orth_basis(const Mat& cols, double tol) {
  if (cols.cols() == 0) return cols;
  Eigen::JacobiSVD<Mat> svd(cols, Eigen::ComputeThinU);
  const double top = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  int r = 0;
  for (int k = 0; k < svd.singularValues().size(); ++k) r += svd.singularValues()(k) > tol * std::max(top, 1e-300);
  return svd.matrixU().leftCols(r);
}

/// Smallest subspace containing v and invariant under all generators.
inline Mat cyclic_span(const std::vector<Mat>& gens, const Vec& v, double tol) {
  Mat basis = orth_basis(v, tol);
  for (;;) {
    Mat cols(basis.rows(), basis.cols() * (gens.size() + 1));
    cols.leftCols(basis.cols()) = basis;
    for (size_t g = 0; g < gens.size(); ++g) cols.middleCols(basis.cols() * (g + 1), basis.cols()) = gens[g] * basis;
    Mat nb = orth_basis(cols, tol);
    if (nb.cols() == basis.cols()) return basis;
    basis = nb;
  }
}

/// Dimension of the associative algebra generated by the matrices (with identity).
inline int algebra_dimension(const std::vector<Mat>& gens, double tol) {
  const int n = int(gens[0].rows());
  auto flat = [&](const Mat& m) { return Vec(Eigen::Map<const Vec>(m.data(), n * n)); };
  Mat B(n * n, 0);
  std::vector<Mat> frontier{Mat::Identity(n, n)};
  auto try_add = [&](const Mat& w) {
    Mat nb(n * n, B.cols() + 1);
    nb << B, flat(w);
    Mat o = orth_basis(nb, tol);
    if (o.cols() > B.cols()) {
      B = o;
      return true;
    }
    return false;
  };
  try_add(frontier[0]);
  while (!frontier.empty() && B.cols() < n * n) {
    std::vector<Mat> next;
    for (const auto& w : frontier)
      for (const auto& g : gens) {
        const Mat x = g * w;
        if (try_add(x)) next.push_back(x / std::max(maxabs(x), 1e-300));
      }
    frontier = std::move(next);
  }
  return int(B.cols());
}

}  // namespace detail

/// Irreducibility of the joint action, with an invariant-subspace certificate when reducible.
inline IrreducibilityResult is_irreducible(const std::vector<Mat>& gens, unsigned seed = 7, double tol = 1e-9) {
  if (gens.empty()) throw domain_error("is_irreducible: empty list");
  const int n = int(gens[0].rows());
  for (const auto& g : gens) require_same(g, gens[0], "is_irreducible");
  IrreducibilityResult res;
  res.algebra_dim = detail::algebra_dimension(gens, tol);
  if (res.algebra_dim == n * n) return res;
  res.irreducible = false;
  std::mt19937 rng(seed);
  std::normal_distribution<double> N;
  std::vector<Mat> probes = gens;
  for (int k = 0; k < 6; ++k) {
    Mat x = Mat::Zero(n, n), word = Mat::Identity(n, n);
    for (const auto& g : gens) {
      x += cplx(N(rng), N(rng)) * g;
      word = word * (g + cplx(N(rng), N(rng)) * Mat::Identity(n, n));
    }
    probes.push_back(x);
    probes.push_back(word);
  }
  std::vector<Mat> adj;
  for (const auto& g : gens) adj.push_back(g.adjoint());
  for (const auto& p : probes) {
    Eigen::ComplexEigenSolver<Mat> es(p);
    for (int c = 0; c < n; ++c) {
      Mat span = detail::cyclic_span(gens, es.eigenvectors().col(c), tol);
      if (span.cols() < n) {
        res.certificate = span;
        return res;
      }
      // invariant subspace of the adjoints: its orthogonal complement is invariant
      Eigen::ComplexEigenSolver<Mat> ea(p.adjoint());
      Mat sa = detail::cyclic_span(adj, ea.eigenvectors().col(c), tol);
      if (sa.cols() < n) {
        Eigen::FullPivHouseholderQR<Mat> qr(sa);
        Mat Q = qr.matrixQ();
        res.certificate = Q.rightCols(n - sa.cols());
        return res;
      }
    }
  }
  return res;
}

/// Result of a constant-mode convex metric solve.
struct MetricSolve {
  Mat H;  ///< det-normalized positive Hermitian metric
  Mat G;  ///< frame with H = G^dagger G
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> history;
};

namespace detail {

struct ConvexTerms {
  std::vector<Mat> P;
  std::vector<double> wt;
};

inline double functional_value(const ConvexTerms& t, const Mat& G) {
  const Mat Gi = G.inverse();
  double f = 0.0;
  for (size_t i = 0; i < t.P.size(); ++i) f += t.wt[i] * (G * t.P[i] * Gi).squaredNorm();
  return f;
}

inline Mat moment(const ConvexTerms& t, const Mat& G) {
  const Mat Gi = G.inverse();
  Mat R = Mat::Zero(G.rows(), G.cols());
  for (size_t i = 0; i < t.P.size(); ++i) {
    const Mat Q = G * t.P[i] * Gi;
    R += t.wt[i] * comm(Q, Q.adjoint());
  }
  return R;
}

/// Fixes the stabilizer freedom of a solution frame: among G' = Y^{1/2} G with Y > 0 commuting with
/// the (normal, commuting) Q_i, picks the one of minimal tr(G'^dagger G') at fixed determinant.
inline Mat canonical_frame(const Mat& G, const std::vector<Mat>& Q) {
  const int n = int(G.rows());
  Mat N = Mat::Zero(n, n);
  double c = 1.0;
  for (const auto& q : Q) {
    N += c * q;
    c *= std::numbers::sqrt2 + 0.1234;
  }
  Eigen::ComplexEigenSolver<Mat> es(N);
  const Vec ev = es.eigenvalues();
  const double sc = std::max(1e-300, ev.cwiseAbs().maxCoeff());
  std::vector<int> cluster(n, -1);
  int nc = 0;
  for (int i = 0; i < n; ++i) {
    if (cluster[i] >= 0) continue;
    for (int j = i; j < n; ++j)
      if (cluster[j] < 0 && std::abs(ev(j) - ev(i)) < 1e-7 * sc) cluster[j] = nc;
    ++nc;
  }
  const Mat M = G * G.adjoint();
  Mat Y = Mat::Zero(n, n);
  double logdet = 0.0;
  for (int k = 0; k < nc; ++k) {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i)
      if (cluster[i] == k) idx.push_back(i);
    Mat V(n, idx.size());
    for (size_t a = 0; a < idx.size(); ++a) V.col(a) = es.eigenvectors().col(idx[a]);
    const Mat E = orth_basis(V, 1e-10);
    const Mat Mk = E.adjoint() * M * E;
    const Mat Mki = Mk.inverse();
    Y += E * Mki * E.adjoint();
    logdet -= std::log(Mk.determinant().real());
  }
  Y = herm_part(Y) * std::exp(-logdet / n);
  return sqrt_pos(Y) * G;
}

/// Damped Newton for min over G = e^{x/2} G of sum wt_i |G P_i G^{-1}|^2.
inline MetricSolve convex_metric_solve(const ConvexTerms& terms, Mat G, double tol, int max_iter,
                                       const std::vector<Mat>& gens_for_cert, const char* who) {
  const int n = int(G.rows());
  const auto basis = hermitian_basis(n);
  const int d = int(basis.size());
  MetricSolve out;
  double scale = 0.0;
  for (size_t i = 0; i < terms.P.size(); ++i) scale += terms.wt[i] * terms.P[i].squaredNorm();
  scale = std::max(scale, 1e-300);
  auto fail = [&](const std::string& why) {
    const auto irr = is_irreducible(gens_for_cert);
    throw reducible_error(std::string(who) + ": " + why +
                              (irr.irreducible ? " (data irreducible)" : " (data reducible, certificate attached)"),
                          irr.certificate);
  };
  for (int it = 0; it <= max_iter; ++it) {
    const Mat Gi = G.inverse();
    std::vector<Mat> Q;
    for (const auto& p : terms.P) Q.push_back(G * p * Gi);
    Mat R = Mat::Zero(n, n);
    for (size_t i = 0; i < Q.size(); ++i) R += terms.wt[i] * comm(Q[i], Q[i].adjoint());
    RVec g(d);
    for (int a = 0; a < d; ++a) g(a) = (basis[a] * R).trace().real();
    out.history.push_back(maxabs(R));
    out.iterations = it;
    double f = 0.0;
    for (size_t i = 0; i < Q.size(); ++i) f += terms.wt[i] * Q[i].squaredNorm();
    if (f < 1e-12 * scale) fail("functional tends to zero (orbit not closed)");
    if (maxabs(R) < tol * f) {
      G = canonical_frame(G, Q);
      const Mat Gi2 = G.inverse();
      Mat R2 = Mat::Zero(n, n);
      for (size_t i = 0; i < terms.P.size(); ++i) {
        const Mat q = G * terms.P[i] * Gi2;
        R2 += terms.wt[i] * comm(q, q.adjoint());
      }
      Mat H = herm_part(G.adjoint() * G);
      const double det = H.determinant().real();
      out.H = H / std::pow(det, 1.0 / n);
      out.G = G / std::pow(det, 0.5 / n);
      out.residual = maxabs(R2);
      return out;
    }
    if (it == max_iter) break;
    std::vector<std::vector<Mat>> adx(d);
    for (int a = 0; a < d; ++a)
      for (const auto& q : Q) adx[a].push_back(comm(basis[a], q));
    RMat Hs(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) {
        double h = 0.0;
        for (size_t i = 0; i < Q.size(); ++i) h += terms.wt[i] * (adx[a][i].conjugate().cwiseProduct(adx[b][i])).sum().real();
        Hs(a, b) = Hs(b, a) = h;
      }
    Eigen::SparseMatrix<double> Hsp = Hs.sparseView();
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-14);
    cg.setMaxIterations(10 * d);
    cg.compute(Hsp);
    RVec x = cg.solve(-g);
    if (cg.info() != Eigen::Success || !x.allFinite()) x = Hs.ldlt().solve(-g);
    if (!x.allFinite() || x.dot(g) >= 0.0) x = -g;
    const Mat X = herm_from_coords(x, basis);
    const double f0 = functional_value(terms, G), slope = x.dot(g);
    double lam = 1.0;
    Mat Gn;
    for (int ls = 0; ls < 60; ++ls) {
      Gn = exp_herm(0.5 * lam * X) * G;
      if (functional_value(terms, Gn) <= f0 + 1e-4 * lam * slope) break;
      lam *= 0.5;
    }
    G = Gn;
    Eigen::JacobiSVD<Mat> svd(G);
    if (svd.singularValues()(0) / svd.singularValues()(n - 1) > 1e12) fail("frame degenerates (no minimizer)");
  }
  fail("Newton did not converge");
  return out;
}

inline Mat random_frame(int n, unsigned seed, double size = 0.5) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> N;
  const auto basis = hermitian_basis(n);
  RVec c(basis.size());
  for (auto& x : c) x = size * N(rng);
  return exp_herm(herm_from_coords(c, basis));
}

}  // namespace detail

/// Max entry of [a, a^{+H}] + [phi, phi^{+H}] in the unitary frame sqrt(H).
inline double hitchin_constant_residual(const HiggsData& d, const Mat& H) {
  const Mat G = sqrt_pos(herm_part(H)), Gi = G.inverse();
  const Mat a = G * d.alpha0 * Gi, p = G * d.phi * Gi;
  return maxabs(comm(a, a.adjoint()) + comm(p, p.adjoint()));
}

/// Harmonic metric for constant Higgs data: [a, a^{+H}] + [phi, phi^{+H}] = 0, det H = 1.
inline MetricSolve solve_hitchin_constant(const HiggsData& d, const Mat& H_init = Mat(), double tol = 1e-12,
                                          int max_iter = 200) {
  require_same(d.alpha0, d.phi, "solve_hitchin_constant");
  if (std::abs(d.phi.trace()) > 1e-12 * std::max(1.0, maxabs(d.phi)))
    throw domain_error("solve_hitchin_constant: phi not traceless");
  if (maxabs(comm(d.alpha0, d.phi)) > 1e-12 * std::max(1.0, maxabs(d.alpha0) * maxabs(d.phi)))
    throw domain_error("solve_hitchin_constant: phi not holomorphic ([alpha0, phi] != 0)");
  const Mat G0 = H_init.size() ? sqrt_pos(herm_part(H_init)) : Mat(Mat::Identity(d.n, d.n));
  return detail::convex_metric_solve({{d.alpha0, d.phi}, {1.0, 1.0}}, G0, tol, max_iter, {d.alpha0, d.phi},
                                     "solve_hitchin_constant");
}

inline Mat h_adjoint(const Mat& X, const Mat& H) { return H.inverse() * X.adjoint() * H; }

/// Forward twist: P1 = alpha0 + w phi^{+H}, P2 = -alpha0^{+H} + phi / w.
inline FlatPair twist(const HiggsData& d, const Mat& H, cplx w) {
  if (w == cplx(0.0)) throw domain_error("twist: w = 0");
  return {d.alpha0 + w * h_adjoint(d.phi, H), -h_adjoint(d.alpha0, H) + d.phi / w, w};
}

/// Backward twist: alpha0 = (P1 - |w|^2 P2^{+H}) / (1 + |w|^2), phi = w (P2 + P1^{+H}) / (1 + |w|^2).
inline HiggsData untwist(const FlatPair& p, const Mat& H) {
  if (p.w == cplx(0.0)) throw domain_error("untwist: w = 0");
  const double w2 = std::norm(p.w);
  HiggsData d;
  d.n = int(p.P1.rows());
  d.alpha0 = (p.P1 - w2 * h_adjoint(p.P2, H)) / (1.0 + w2);
  d.phi = p.w * (p.P2 + h_adjoint(p.P1, H)) / (1.0 + w2);
  return d;
}

inline double flatness_defect(const FlatPair& p) { return maxabs(comm(p.P1, p.P2)); }

/// Max entry of [P1, P1^{+H}] + |w|^2 [P2, P2^{+H}] in the unitary frame sqrt(H).
inline double twisted_residual(const FlatPair& p, const Mat& H) {
  const Mat G = sqrt_pos(herm_part(H)), Gi = G.inverse();
  const Mat a = G * p.P1 * Gi, b = G * p.P2 * Gi;
  return maxabs(comm(a, a.adjoint()) + std::norm(p.w) * comm(b, b.adjoint()));
}

inline MetricSolve solve_twisted_hitchin(const FlatPair& p, const Mat& H_init = Mat(), double tol = 1e-12,
                                         int max_iter = 200) {
  require_same(p.P1, p.P2, "solve_twisted_hitchin");
  if (p.w == cplx(0.0)) throw domain_error("solve_twisted_hitchin: w = 0");
  const double sc = std::max(1.0, maxabs(p.P1) * maxabs(p.P2));
  if (flatness_defect(p) > 1e-10 * sc) throw domain_error("solve_twisted_hitchin: pair is not flat");
  const int n = int(p.P1.rows());
  const Mat G0 = H_init.size() ? sqrt_pos(herm_part(H_init)) : Mat(Mat::Identity(n, n));
  return detail::convex_metric_solve({{p.P1, p.P2}, {1.0, std::norm(p.w)}}, G0, tol, max_iter, {p.P1, p.P2},
                                     "solve_twisted_hitchin");
}

/// Second derivative of the twisted functional along H_t = K e^{t s} at t = 0.
inline double twisted_second_variation(const FlatPair& p, const Mat& K, const Mat& s) {
  const Mat G = sqrt_pos(herm_part(K)), Gi = G.inverse();
  // s is K-self-adjoint; in the unitary frame it is G s G^{-1}
  const Mat x = herm_part(G * s * Gi);
  const Mat a = G * p.P1 * Gi, b = G * p.P2 * Gi;
  return comm(x, a).squaredNorm() + std::norm(p.w) * comm(x, b).squaredNorm();
}

/// Decomposition of a flat pair at |w| = 1 into the harmonic data (dbar_H, phi_H).
inline HiggsData corlette_split(const FlatPair& p, const Mat& H) {
  if (std::abs(std::abs(p.w) - 1.0) > 1e-12) throw domain_error("corlette_split: needs |w| = 1");
  return untwist(p, H);
}

/// I_w = ((1 - |w|^2) I + i (w - conj w) J + (w + conj w) K) / (1 + |w|^2) on tangent pairs.
inline std::pair<Mat, Mat> hyperkahler_Iw(cplx w, const Mat& a, const Mat& b) {
  require_same(a, b, "hyperkahler_Iw");
  const double r2 = std::norm(w);
  const double ci = (1.0 - r2) / (1.0 + r2);
  const double cj = (I * (w - std::conj(w))).real() / (1.0 + r2);
  const double ck = (w + std::conj(w)).real() / (1.0 + r2);
  // I(a,b) = (ia, ib), J(a,b) = (i b*, -i a*), K(a,b) = (-b*, a*)
  const Mat as = a.adjoint(), bs = b.adjoint();
  return {ci * I * a + cj * I * bs - ck * bs, ci * I * b - cj * I * as + ck * as};
}

/// H_flat at y = infinity: twisted solve for (D1, D2) = (dbar, d + alpha) with w = tan(beta).
inline MetricSolve boundary_metric(const Mat& alpha, double beta, double tol = 1e-12) {
  const TiltParams tp = tilt_params(beta);
  FlatPair p{Mat::Zero(alpha.rows(), alpha.cols()), alpha, cplx(tp.w, 0.0)};
  return solve_twisted_hitchin(p, Mat(), tol);
}

}  // namespace nahm
