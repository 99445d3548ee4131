#pragma once

#include "lie_core.hpp"
#include "mesh.hpp"

namespace nahm {

/// Parallel holomorphic gauge data: D1 = dbar, D2 = d + alpha, D3 = d_y with alpha constant.
struct HoloData {
  int n = 0;
  TiltParams tilt;
  Mat alpha;
};

inline HoloData make_holo(const Mat& alpha, double beta) {
  require_square(alpha, "make_holo");
  if (alpha.rows() < 2) throw invalid_rank("make_holo: rank must be at least 2");
  return {int(alpha.rows()), tilt_params(beta), alpha};
}

/// Background metric H0 = g_m e^{sigma} g_m with g_m = (y sin b)^{-e0/2} (or the identity).
struct Background {
  std::string id = "model";
  bool nahm = true;
  Field sigma;
};

inline Background model_background(const GradedMesh& m, int n, std::string id = "model") {
  return {std::move(id), true, zero_field(m, n)};
}

inline Background identity_background(const GradedMesh& m, int n) { return {"identity", false, zero_field(m, n)}; }

/// Hermitian deformation s in the H0-unitary frame: H = G0^dagger e^s G0.
struct MetricDeformation {
  Field s;
  std::string background_id;
};

/// Grid fields in unitary gauge; optional y-derivative fields replace the mesh stencils when set.
struct UnitaryFields {
  Field A_z, phi_z, phi_1, A_y;
  Field dA_z, dphi_z, dphi_1, dA_y;
  Field A_zb() const { return scaled(adjoint(A_z), -1.0); }
  Field phi_zb() const { return scaled(adjoint(phi_z), -1.0); }
};

inline void check_unitary(const UnitaryFields& f, double tol = 1e-12) {
  for (size_t k = 0; k < f.phi_1.size(); ++k) {
    if (maxabs(f.phi_1[k] + f.phi_1[k].adjoint()) > tol * std::max(1.0, maxabs(f.phi_1[k])))
      throw domain_error("UnitaryFields: phi_1 not anti-Hermitian");
    if (maxabs(f.A_y[k] + f.A_y[k].adjoint()) > tol * std::max(1.0, maxabs(f.A_y[k])))
      throw domain_error("UnitaryFields: A_y not anti-Hermitian");
  }
}

/// Diagonal of g_m = (y sin b)^{-e0/2}.
inline RVec model_frame_diag(int n, double y, double sb) {
  RVec d(n);
  for (int i = 0; i < n; ++i) d(i) = std::pow(y * sb, -0.5 * (n - 1 - 2 * i));
  return d;
}

/// g_m alpha g_m^{-1}.
inline Mat model_conjugate(const Mat& a, double y, double sb) {
  const int n = int(a.rows());
  const RVec d = model_frame_diag(n, y, sb);
  Mat r = a;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) r(i, j) *= d(i) / d(j);
  return r;
}

/// Per-node connection data of the frame G = e^{sigma/2} g_m in Sigma-invariant mode.
struct FrameData {
  Field B;       ///< G alpha G^{-1}
  Field K;       ///< G' G^{-1}
  Field dK;      ///< y-derivative of K
  Field omega;   ///< moment map in this frame
  Field Khalf;   ///< K at half nodes (size ny-1)
};

/// Background part of K: -e0/(2y) for the Nahm background, and its derivative.
inline Mat km_of(const PrincipalTriple& t, bool nahm, double y) {
  return nahm ? Mat(-t.e_zero / (2.0 * y)) : Mat(Mat::Zero(t.n, t.n));
}
inline Mat dkm_of(const PrincipalTriple& t, bool nahm, double y) {
  return nahm ? Mat(t.e_zero / (2.0 * y * y)) : Mat(Mat::Zero(t.n, t.n));
}

/// Frame data from the total Hermitian exponent sigma (H = g_m e^sigma g_m).
inline FrameData frame_data(const GradedMesh& m, const HoloData& h, bool nahm, const Field& sigma) {
  if (!m.sigma_invariant()) throw dimension_error("frame_data: metric operators run in Sigma-invariant mode");
  const int ny = m.ny(), n = h.n;
  const auto t = principal_triple(n);
  const double sb = h.tilt.sin();
  FrameData fd;
  fd.Khalf.resize(ny - 1);
  Field delta_half(ny - 1);
  std::vector<double> yh(ny - 1);
  for (int i = 0; i + 1 < ny; ++i) {
    yh[i] = 0.5 * (m.y[i] + m.y[i + 1]);
    const Mat sh = 0.5 * (sigma[i] + sigma[i + 1]);
    const Mat dsh = (sigma[i + 1] - sigma[i]) / (m.y[i + 1] - m.y[i]);
    const Mat km = km_of(t, nahm, yh[i]);
    delta_half[i] = gamma_apply(0.5 * sh, 0.5 * dsh + comm(0.5 * sh, km));
    fd.Khalf[i] = km + delta_half[i];
  }
  fd.B.resize(ny);
  fd.K.resize(ny);
  fd.dK.resize(ny);
  fd.omega.assign(ny, Mat::Zero(n, n));
  for (int i = 0; i < ny; ++i) {
    const int lo = std::max(i - 1, 0), hi = std::min(i, ny - 2);
    Mat delta, ddelta;
    if (i == 0 || i == ny - 1) {
      delta = delta_half[hi == lo ? lo : hi];
      const int a = (i == 0) ? 0 : ny - 3;
      ddelta = (delta_half[a + 1] - delta_half[a]) / (yh[a + 1] - yh[a]);
    } else {
      delta = 0.5 * (delta_half[i - 1] + delta_half[i]);
      ddelta = (delta_half[i] - delta_half[i - 1]) / (yh[i] - yh[i - 1]);
    }
    fd.K[i] = km_of(t, nahm, m.y[i]) + delta;
    fd.dK[i] = dkm_of(t, nahm, m.y[i]) + ddelta;
    const Mat E = exp_herm(0.5 * sigma[i]);
    const Mat Einv = exp_herm(-0.5 * sigma[i]);
    const Mat Bm = nahm ? model_conjugate(h.alpha, m.y[i], sb) : h.alpha;
    fd.B[i] = E * Bm * Einv;
    if (i > 0 && i + 1 < ny) {
      const Mat Kh = herm_part(fd.K[i]), Ka = aherm_part(fd.K[i]);
      fd.omega[i] = sb * sb * comm(fd.B[i], fd.B[i].adjoint()) - 2.0 * (herm_part(fd.dK[i]) + comm(Kh, Ka));
    }
  }
  return fd;
}

/// Polar data at one node: W = e^{s/2} e^{sigma0/2} = U e^{sigma/2}.
struct NodePolar {
  Mat sigma, U;
};

inline NodePolar node_polar(const Mat& s, const Mat& sigma0) {
  const Mat W = exp_herm(0.5 * s) * exp_herm(0.5 * sigma0);
  NodePolar p;
  p.sigma = traceless_part(log_pos(herm_part(W.adjoint() * W)));
  p.U = W * exp_herm(-0.5 * p.sigma);
  return p;
}

inline void require_background(const Background& bg, const MetricDeformation& d, const GradedMesh& m) {
  if (!d.background_id.empty() && d.background_id != bg.id)
    throw domain_error("metric deformation refers to background '" + d.background_id + "', got '" + bg.id + "'");
  if (d.s.size() != size_t(m.size()) || bg.sigma.size() != size_t(m.size()))
    throw dimension_error("metric deformation: field size does not match mesh");
}

/// Total exponent sigma and the unitary U per node for H = H0 e^s.
inline std::pair<Field, Field> total_exponent(const Background& bg, const MetricDeformation& d) {
  Field sig(d.s.size()), U(d.s.size());
  for (size_t k = 0; k < d.s.size(); ++k) {
    if (!is_hermitian(d.s[k], 1e-10)) throw domain_error("metric deformation: s not Hermitian");
    if (maxabs(d.s[k]) == 0.0) {
      sig[k] = bg.sigma[k];
      U[k] = Mat::Identity(d.s[k].rows(), d.s[k].cols());
      continue;
    }
    const NodePolar p = node_polar(d.s[k], bg.sigma[k]);
    sig[k] = p.sigma;
    U[k] = p.U;
  }
  return {sig, U};
}

/// Moment map of H = H0 e^s in the frame e^{s/2} G0 (Hermitian); Dirichlet rows are zero.
inline Field moment_map(const GradedMesh& m, const HoloData& h, const Background& bg, const MetricDeformation& d) {
  require_background(bg, d, m);
  auto [sig, U] = total_exponent(bg, d);
  FrameData fd = frame_data(m, h, bg.nahm, sig);
  for (size_t k = 0; k < fd.omega.size(); ++k) fd.omega[k] = U[k] * fd.omega[k] * U[k].adjoint();
  return fd.omega;
}

/// Metric H = g_m e^sigma g_m at every node.
inline Field metric_field(const GradedMesh& m, const HoloData& h, bool nahm, const Field& sigma) {
  Field H(sigma.size());
  for (int i = 0; i < m.ny(); ++i) {
    const Mat e = exp_herm(sigma[i]);
    if (!nahm) {
      H[i] = e;
      continue;
    }
    const RVec g = model_frame_diag(h.n, m.y[i], h.tilt.sin());
    H[i] = g.cast<cplx>().asDiagonal() * e * g.cast<cplx>().asDiagonal();
  }
  return H;
}

/// Unitary-gauge fields in the frame e^{sigma/2} g_m, with exact y-derivative fields.
inline UnitaryFields fields_from_frame(const HoloData& h, const FrameData& fd) {
  const double s = h.tilt.sin(), c = h.tilt.cos();
  const size_t ny = fd.B.size();
  UnitaryFields f;
  for (auto* x : {&f.A_z, &f.phi_z, &f.phi_1, &f.A_y, &f.dA_z, &f.dphi_z, &f.dphi_1, &f.dA_y}) x->resize(ny);
  for (size_t i = 0; i < ny; ++i) {
    const Mat& B = fd.B[i];
    const Mat dB = comm(fd.K[i], B);
    f.A_z[i] = s * s * B;
    f.phi_z[i] = s * c * B;
    f.dA_z[i] = s * s * dB;
    f.dphi_z[i] = s * c * dB;
    f.A_y[i] = -aherm_part(fd.K[i]);
    f.dA_y[i] = -aherm_part(fd.dK[i]);
    f.phi_1[i] = -I * c * herm_part(fd.K[i]);
    f.dphi_1[i] = -I * c * herm_part(fd.dK[i]);
  }
  return f;
}

/// Unitary gauge formula with g = sqrt(H), in Sigma-invariant mode.
inline UnitaryFields chern_fields(const GradedMesh& m, const HoloData& h, const Background& bg,
                                  const MetricDeformation& d) {
  require_background(bg, d, m);
  auto [sig, U] = total_exponent(bg, d);
  (void)U;
  const Field H = metric_field(m, h, bg.nahm, sig);
  for (const auto& x : H) {
    Eigen::SelfAdjointEigenSolver<Mat> es(herm_part(x));
    if (es.eigenvalues().minCoeff() <= 0.0) throw decomposition_error("chern_fields: metric not positive definite");
  }
  return fields_from_frame(h, frame_data(m, h, bg.nahm, sig));
}

}  // namespace nahm
