#pragma once

#include <limits>
#include <map>
#include <optional>

#include "fields.hpp"
#include "hitchin.hpp"

namespace nahm {

/// Model tilted Nahm pole fields: A_z = y^-1 e+ sin b, phi_z = y^-1 e+ cos b, phi_1 = (i/2y) e0 cos b, A_y = 0.
inline UnitaryFields model_fields(int n, double beta, const GradedMesh& m) {
  const TiltParams tp = tilt_params(beta);
  const auto t = principal_triple(n);
  const double s = tp.sin(), c = tp.cos();
  UnitaryFields f;
  for (auto* x : {&f.A_z, &f.phi_z, &f.phi_1, &f.A_y, &f.dA_z, &f.dphi_z, &f.dphi_1, &f.dA_y}) x->resize(m.size());
  for (int iy = 0; iy < m.ny(); ++iy) {
    const double y = m.y[iy];
    for (int iz = 0; iz < m.nz(); ++iz) {
      const int k = m.index(iy, iz);
      f.A_z[k] = s / y * t.e_plus;
      f.phi_z[k] = c / y * t.e_plus;
      f.phi_1[k] = I * c / (2.0 * y) * t.e_zero;
      f.A_y[k] = Mat::Zero(n, n);
      f.dA_z[k] = -s / (y * y) * t.e_plus;
      f.dphi_z[k] = -c / (y * y) * t.e_plus;
      f.dphi_1[k] = -I * c / (2.0 * y * y) * t.e_zero;
      f.dA_y[k] = Mat::Zero(n, n);
    }
  }
  return f;
}

/// H0 = exp(-log(y sin b) e0) at every node.
inline Field model_metric(int n, double beta, const GradedMesh& m) {
  const double s = tilt_params(beta).sin();
  Field H(m.size());
  for (int iy = 0; iy < m.ny(); ++iy) {
    const RVec g = model_frame_diag(n, m.y[iy], s);
    const Mat h = (g.array() * g.array()).matrix().cast<cplx>().asDiagonal();
    for (int iz = 0; iz < m.nz(); ++iz) H[m.index(iy, iz)] = h;
  }
  return H;
}

struct OperPoint {
  int n = 0;
  TiltParams tilt;
  std::vector<cplx> q;  ///< (q_2, ..., q_n)
};

inline OperPoint make_oper(int n, double beta, std::vector<cplx> q) {
  if (n < 2) throw invalid_rank("make_oper: rank must be at least 2");
  if (int(q.size()) != n - 1) throw domain_error("make_oper: expected n-1 differentials");
  return {n, tilt_params(beta), std::move(q)};
}

/// Holomorphic gauge alpha = e+ + bottom row q_k / sin^{k-1} b at (n, n-k+1).
inline HoloData oper_local_frame(const OperPoint& op) {
  if (int(op.q.size()) != op.n - 1) throw domain_error("oper_local_frame: expected n-1 differentials");
  const double s = op.tilt.sin();
  Mat a = principal_triple(op.n).e_plus;
  for (int k = 2; k <= op.n; ++k) a(op.n - 1, op.n - k) = op.q[k - 2] / std::pow(s, k - 1);
  return {op.n, op.tilt, a};
}

/// phi_z^mod = e+ / (y sin b).
inline Mat oper_phi_mod(const OperPoint& op, double y) {
  return principal_triple(op.n).e_plus / (y * op.tilt.sin());
}

/// b(y): bottom row (y^{n-1} q_n, ..., y q_2, 0).
inline Mat oper_b(const OperPoint& op, double y) {
  Mat b = Mat::Zero(op.n, op.n);
  for (int k = 2; k <= op.n; ++k) b(op.n - 1, op.n - k) = std::pow(y, k - 1) * op.q[k - 2];
  return b;
}

/// Truncated series sum c_{j,l} y^j (log y)^l with matrix coefficients.
class PowerLogSeries {
 public:
  using Key = std::pair<int, int>;

  PowerLogSeries(int n, int max_power) : n_(n), max_power_(max_power) {}

  int n() const { return n_; }
  int max_power() const { return max_power_; }
  const std::map<Key, Mat>& terms() const { return c_; }

  void add(int j, int l, const Mat& m) {
    if (j > max_power_) return;
    auto it = c_.find({j, l});
    if (it == c_.end())
      c_.emplace(Key{j, l}, m);
    else
      it->second += m;
  }

  Mat coeff(int j, int l) const {
    auto it = c_.find({j, l});
    return it == c_.end() ? Mat(Mat::Zero(n_, n_)) : it->second;
  }

  int max_log(int j) const {
    int r = -1;
    for (const auto& [k, v] : c_)
      if (k.first == j) r = std::max(r, k.second);
    return r;
  }

  int min_power() const {
    int r = std::numeric_limits<int>::max();
    for (const auto& [k, v] : c_)
      if (maxabs(v) > 0.0) r = std::min(r, k.first);
    return r;
  }

  PowerLogSeries operator+(const PowerLogSeries& o) const {
    PowerLogSeries r = *this;
    r.max_power_ = std::min(max_power_, o.max_power_);
    for (const auto& [k, v] : o.c_) r.add(k.first, k.second, v);
    r.prune();
    return r;
  }

  PowerLogSeries operator*(const PowerLogSeries& o) const {
    PowerLogSeries r(n_, std::min(max_power_, o.max_power_));
    for (const auto& [a, x] : c_)
      for (const auto& [b, y] : o.c_) r.add(a.first + b.first, a.second + b.second, x * y);
    return r;
  }

  PowerLogSeries scaled(cplx s) const {
    PowerLogSeries r = *this;
    for (auto& [k, v] : r.c_) v *= s;
    return r;
  }

  PowerLogSeries adjoint() const {
    PowerLogSeries r = *this;
    for (auto& [k, v] : r.c_) v = v.adjoint().eval();
    return r;
  }

  PowerLogSeries derivative() const {
    PowerLogSeries r(n_, max_power_ - 1);
    for (const auto& [k, v] : c_) {
      if (k.first != 0) r.add(k.first - 1, k.second, double(k.first) * v);
      if (k.second > 0) r.add(k.first - 1, k.second - 1, double(k.second) * v);
    }
    return r;
  }

  /// exp of a series whose terms all have positive power.
  PowerLogSeries exp() const {
    if (!c_.empty() && min_power() <= 0) throw domain_error("PowerLogSeries::exp: needs positive powers");
    PowerLogSeries r(n_, max_power_), term(n_, max_power_);
    r.add(0, 0, Mat::Identity(n_, n_));
    term.add(0, 0, Mat::Identity(n_, n_));
    for (int k = 1; k <= max_power_ + 1; ++k) {
      term = (term * *this).scaled(1.0 / k);
      if (term.c_.empty()) break;
      r = r + term;
    }
    return r;
  }

  Mat eval(double y) const {
    Mat r = Mat::Zero(n_, n_);
    const double L = std::log(y);
    for (const auto& [k, v] : c_) r += std::pow(y, k.first) * std::pow(L, k.second) * v;
    return r;
  }

  /// Value and y-derivative at y.
  std::pair<Mat, Mat> eval_with_derivative(double y) const {
    Mat v = Mat::Zero(n_, n_), d = Mat::Zero(n_, n_);
    const double L = std::log(y);
    for (const auto& [k, c] : c_) {
      const double p = std::pow(y, k.first), lp = std::pow(L, k.second);
      v += p * lp * c;
      double dv = k.first * std::pow(y, k.first - 1) * lp;
      if (k.second > 0) dv += k.second * std::pow(y, k.first - 1) * std::pow(L, k.second - 1);
      d += dv * c;
    }
    return {v, d};
  }

 private:
  void prune() {
    for (auto it = c_.begin(); it != c_.end();)
      it = (maxabs(it->second) == 0.0) ? c_.erase(it) : std::next(it);
  }

  int n_;
  int max_power_;
  std::map<Key, Mat> c_;
};

inline PowerLogSeries comm(const PowerLogSeries& a, const PowerLogSeries& b) { return a * b + (b * a).scaled(-1.0); }

/// g_m alpha g_m^{-1} as a series: entry (i,j) carries (y sin b)^{i-j}.
inline PowerLogSeries model_frame_alpha(const HoloData& h, int max_power) {
  const double s = h.tilt.sin();
  PowerLogSeries r(h.n, max_power);
  for (int i = 0; i < h.n; ++i)
    for (int j = 0; j < h.n; ++j) {
      if (h.alpha(i, j) == cplx(0.0)) continue;
      if (j - i >= 2) throw domain_error("model_frame_alpha: alpha has entries two levels above the diagonal");
      Mat e = Mat::Zero(h.n, h.n);
      e(i, j) = h.alpha(i, j) * std::pow(s, i - j);
      r.add(i - j, 0, e);
    }
  return r;
}

/// Moment map series for H = g_m e^sigma g_m with sigma a positive-power series.
inline PowerLogSeries moment_map_series(const HoloData& h, const PowerLogSeries& sigma) {
  const int n = h.n, P = sigma.max_power();
  const double s = h.tilt.sin();
  const PowerLogSeries X = sigma.scaled(0.5);
  const PowerLogSeries E = X.exp(), Ei = X.scaled(-1.0).exp();
  const PowerLogSeries B = E * model_frame_alpha(h, P) * Ei;
  PowerLogSeries km(n, P);
  km.add(-1, 0, -0.5 * principal_triple(n).e_zero);
  const PowerLogSeries K = E.derivative() * Ei + E * km * Ei;
  const PowerLogSeries Kd = K.adjoint();
  const PowerLogSeries Kh = (K + Kd).scaled(0.5), Ka = (K + Kd.scaled(-1.0)).scaled(0.5);
  return comm(B, B.adjoint()).scaled(s * s) + (Kh.derivative() + comm(Kh, Ka)).scaled(-2.0);
}

struct AdmissibleMetric {
  int order = 0;
  HoloData holo;
  PowerLogSeries sigma{2, 0};  ///< series exponent: H0 = g_m e^sigma g_m near y = 0
  std::optional<Mat> H_flat;   ///< y -> infinity metric in the holomorphic frame
  double blend_start = 0.5, blend_end = 3.0;
};

struct BuildOptions {
  int max_order = 6;
  int extra_powers = 6;
  double blend_start = 0.5, blend_end = 3.0;
  bool with_boundary = true;
};

namespace detail {

/// Principal triple conjugated by the diagonal unitary that carries e+ to the superdiagonal of alpha.
inline PrincipalTriple aligned_triple(const Mat& alpha) {
  const int n = int(alpha.rows());
  PrincipalTriple t = principal_triple(n);
  Vec d = Vec::Ones(n);
  for (int i = 0; i + 1 < n; ++i) {
    const cplx r = alpha(i, i + 1) / t.e_plus(i, i + 1);
    if (std::abs(std::abs(r) - 1.0) > 1e-12) return t;
    d(i + 1) = d(i) / (r / std::abs(r));
  }
  const Mat D = d.asDiagonal();
  t.e_plus = D * t.e_plus * D.adjoint();
  t.e_minus = D * t.e_minus * D.adjoint();
  return t;
}

}  // namespace detail

/// Casimir eigenvalue index k of each component solve.
inline AdmissibleMetric build_H0(const HoloData& h, int J, const BuildOptions& opt = {}) {
  if (J < 0) throw domain_error("build_H0: order must be non-negative");
  if (J > opt.max_order) throw domain_error("build_H0: order " + std::to_string(J) + " exceeds configured maximum " +
                                            std::to_string(opt.max_order));
  const int n = h.n, P = J + opt.extra_powers;
  const auto t = detail::aligned_triple(h.alpha);
  AdmissibleMetric am;
  am.order = J;
  am.holo = h;
  am.blend_start = opt.blend_start;
  am.blend_end = opt.blend_end;
  am.sigma = PowerLogSeries(n, P);
  PowerLogSeries om = moment_map_series(h, am.sigma);
  double scale = 1.0;
  for (const auto& [k, v] : om.terms()) scale = std::max(scale, maxabs(v));
  for (int j = -2; j < 0; ++j)
    for (int l = 0; l <= std::max(0, om.max_log(j)); ++l)
      if (maxabs(om.coeff(j, l)) > 1e-10 * scale)
        throw domain_error("build_H0: holomorphic data is not of Nahm pole type (y^" + std::to_string(j) + " term)");
  for (int m = 0; m <= J; ++m) {
    const int j = m + 2, L = om.max_log(m);
    if (L < 0) continue;
    for (int k = 1; k < n; ++k) {
      const double lam = k * (k + 1.0), shift = lam - j * (j - 1.0);
      const bool resonant = std::abs(shift) < 1e-9;
      std::vector<Mat> F(L + 1);
      for (int l = 0; l <= L; ++l) F[l] = casimir_project(t, om.coeff(m, l), k);
      std::vector<Mat> c(L + 3, Mat::Zero(n, n));
      if (!resonant) {
        for (int l = L; l >= 0; --l)
          c[l] = ((l + 1.0) * (2 * j - 1.0) * c[l + 1] + (l + 2.0) * (l + 1.0) * c[l + 2] - F[l]) / shift;
      } else {
        for (int l = L; l >= 0; --l)
          c[l + 1] = (F[l] - (l + 2.0) * (l + 1.0) * c[l + 2]) / ((l + 1.0) * (2 * j - 1.0));
      }
      for (int l = 0; l < int(c.size()); ++l)
        if (maxabs(c[l]) > 0.0) am.sigma.add(j, l, herm_part(c[l]));
    }
    om = moment_map_series(h, am.sigma);
    for (int l = 0; l <= std::max(0, om.max_log(m)); ++l) {
      const Mat r = om.coeff(m, l);
      if (maxabs(r) > 1e-9 * scale) {
        for (int k = 1; k < n; ++k)
          if (maxabs(casimir_project(t, r, k)) > 1e-9 * scale)
            throw convergence_error("build_H0: resonance bookkeeping failed at y^" + std::to_string(m) + " (log^" +
                                    std::to_string(l) + ") in Casimir component k=" + std::to_string(k));
        throw convergence_error("build_H0: residual coefficient at y^" + std::to_string(m) + " not removed");
      }
    }
  }
  if (opt.with_boundary) {
    bool nilpotent = true;
    for (int i = 0; i < n; ++i)
      for (int jj = 0; jj <= i; ++jj) nilpotent = nilpotent && h.alpha(i, jj) == cplx(0.0);
    if (!nilpotent) am.H_flat = boundary_metric(h.alpha, h.tilt.beta).H;
  }
  return am;
}

inline AdmissibleMetric build_H0(const OperPoint& op, int J, const BuildOptions& opt = {}) {
  return build_H0(oper_local_frame(op), J, opt);
}

/// Smooth step: 0 for y <= a, 1 for y >= b.
inline double smooth_step(double y, double a, double b) {
  auto f = [](double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; };
  const double x = (y - a) / (b - a);
  return f(x) / (f(x) + f(1.0 - x));
}

/// sigma such that g_m e^sigma g_m = H_flat at y.
inline Mat flat_exponent(const Mat& H_flat, int n, double y, double sb) {
  const RVec g = model_frame_diag(n, y, sb);
  const RVec gi = g.cwiseInverse();
  return log_pos(herm_part(gi.cast<cplx>().asDiagonal() * H_flat * gi.cast<cplx>().asDiagonal()));
}

/// Mesh exponent of the admissible metric: series near 0 blended into H_flat.
inline Background admissible_background(const GradedMesh& m, const AdmissibleMetric& am) {
  if (!m.sigma_invariant()) throw dimension_error("admissible_background: Sigma-invariant mesh required");
  Background bg;
  bg.id = "admissible";
  bg.nahm = true;
  bg.sigma.resize(m.ny());
  const double sb = am.holo.tilt.sin();
  for (int i = 0; i < m.ny(); ++i) {
    const double y = m.y[i];
    const double psi = am.H_flat ? smooth_step(y, am.blend_start, am.blend_end) : 0.0;
    Mat sig = Mat::Zero(am.holo.n, am.holo.n);
    if (psi < 1.0) sig += (1.0 - psi) * am.sigma.eval(y);
    if (psi > 0.0) sig += psi * flat_exponent(*am.H_flat, am.holo.n, y, sb);
    bg.sigma[i] = herm_part(sig);
  }
  return bg;
}

/// Pointwise moment map of g_m e^{sigma(y)} g_m with exact derivatives, model terms cancelled analytically.
inline Mat analytic_moment_map(const HoloData& h, const std::function<std::pair<Mat, Mat>(double)>& sigma, double y) {
  const auto t = principal_triple(h.n);
  const double s = h.tilt.sin();
  auto delta = [&](double yy) {
    const auto [sg, dsg] = sigma(yy);
    const Mat km = -t.e_zero / (2.0 * yy);
    return Mat(gamma_apply(herm_part(0.5 * sg), 0.5 * dsg + comm(0.5 * sg, km)));
  };
  const double e = 1e-3 * y;
  const Mat D = delta(y);
  const Mat dD = (delta(y - 2 * e) - 8.0 * delta(y - e) + 8.0 * delta(y + e) - delta(y + 2 * e)) / (12.0 * e);
  const auto [sg, dsg] = sigma(y);
  const Mat Bm = model_conjugate(t.e_plus, y, s);
  const Mat X = herm_part(0.5 * sg), Bh = model_conjugate(h.alpha, y, s);
  // B - Bm = (e^{ad X} - 1) Bh + (Bh - Bm)
  const Mat Dif = gamma_apply(X, comm(X, Bh)) + model_conjugate(h.alpha - t.e_plus, y, s);
  const Mat B = Bm + Dif;
  const Mat km = -t.e_zero / (2.0 * y);
  const Mat Dh = herm_part(D), Da = aherm_part(D);
  return s * s * (comm(Dif, B.adjoint()) + comm(Bm, Dif.adjoint())) - 2.0 * (herm_part(dD) + comm(km, Da) + comm(Dh, Da));
}

/// Moment map of the series metric (no blending) at every mesh node.
inline Field series_moment_map(const GradedMesh& m, const AdmissibleMetric& am) {
  Field r(m.ny());
  auto sig = [&](double y) { return am.sigma.eval_with_derivative(y); };
  for (int i = 0; i < m.ny(); ++i) r[i] = analytic_moment_map(am.holo, sig, m.y[i]);
  return r;
}

/// Slope of log|Omega| against log y over the smallest nodes (index >= 1, y < 0.1); +inf when |Omega| < 1e-13 there.
inline double vanishing_order(const GradedMesh& m, const Field& omega, int nodes = 6) {
  std::vector<double> xs, ys;
  double top = 0.0;
  for (int i = 1; i < m.ny() && int(xs.size()) < nodes; ++i) {
    if (m.y[i] >= 0.1) break;
    const double v = maxabs(omega[m.index(i, 0)]);
    top = std::max(top, v);
    xs.push_back(std::log(m.y[i]));
    ys.push_back(v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity());
  }
  if (xs.size() < 4) throw domain_error("vanishing_order: needs at least 4 nodes below y = 0.1");
  if (top < 1e-13) return std::numeric_limits<double>::infinity();
  const int k = int(xs.size());
  double mx = 0, my = 0;
  for (int i = 0; i < k; ++i) {
    mx += xs[i] / k;
    my += ys[i] / k;
  }
  double sxy = 0, sxx = 0;
  for (int i = 0; i < k; ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace nahm
