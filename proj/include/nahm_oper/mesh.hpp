#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "types.hpp"

namespace nahm {

/// Three-point weights for one node: coefficients of u[i-1+off], u[i+off], u[i+1+off].
struct Stencil3 {
  int first = 0;
  std::array<double, 3> w{};
};

/// y-nodes refined geometrically toward 0, uniform above 1, times an N x N periodic torus grid.
struct GradedMesh {
  std::vector<double> y;
  double grading = 1.0;
  int torus_size = 1;
  double torus_period = 1.0;
  double map_a = 0.0, map_b = 0.0;  ///< smooth node map parameters (0 when built from explicit nodes)
  std::vector<Stencil3> d1, d2;

  int ny() const { return int(y.size()); }
  int nz() const { return torus_size * torus_size; }
  int size() const { return ny() * nz(); }
  int index(int iy, int iz) const { return iy * nz() + iz; }
  double hz() const { return torus_period / torus_size; }
  bool sigma_invariant() const { return torus_size == 1; }
  int count_below(double v) const {
    int c = 0;
    for (double x : y) c += x < v;
    return c;
  }
};

inline Stencil3 first_derivative_stencil(const std::vector<double>& y, int i) {
  const int n = int(y.size());
  Stencil3 s;
  if (i == 0 || i == n - 1) {
    // one-sided second order
    const int a = (i == 0) ? 0 : n - 3;
    const double x0 = y[a], x1 = y[a + 1], x2 = y[a + 2], x = y[i];
    s.first = a;
    s.w[0] = ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2));
    s.w[1] = ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2));
    s.w[2] = ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1));
    return s;
  }
  const double hm = y[i] - y[i - 1], hp = y[i + 1] - y[i];
  s.first = i - 1;
  s.w = {-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))};
  return s;
}

inline Stencil3 second_derivative_stencil(const std::vector<double>& y, int i) {
  const int n = int(y.size());
  int a = std::clamp(i - 1, 0, n - 3);
  const double x0 = y[a], x1 = y[a + 1], x2 = y[a + 2];
  Stencil3 s;
  s.first = a;
  s.w = {2.0 / ((x0 - x1) * (x0 - x2)), 2.0 / ((x1 - x0) * (x1 - x2)), 2.0 / ((x2 - x0) * (x2 - x1))};
  return s;
}

namespace detail {

/// Node coordinate of the map dy/dxi = a b y / sqrt(a^2 y^2 + b^2): geometric ratio e^a near 0, spacing b far out.
inline double mesh_xi(double y, double a, double b) {
  const double u = a * y / b, r = std::hypot(1.0, u);
  // atanh(1/r) = log((r + 1) / u), stable as u -> 0
  return (r - std::log1p(r) + std::log(u)) / a;
}

inline double mesh_y(double xi, double a, double b, double guess) {
  double y = guess;
  for (int it = 0; it < 200; ++it) {
    const double f = mesh_xi(y, a, b) - xi;
    const double dxi = std::sqrt(a * a * y * y + b * b) / (a * b * y);
    double yn = y - f / dxi;
    if (yn <= 0.0) yn = 0.5 * y;
    if (std::abs(yn - y) <= 1e-15 * y) return yn;
    y = yn;
  }
  return y;
}

inline void build_stencils(GradedMesh& m) {
  m.d1.clear();
  m.d2.clear();
  for (int i = 0; i < m.ny(); ++i) {
    m.d1.push_back(first_derivative_stencil(m.y, i));
    m.d2.push_back(second_derivative_stencil(m.y, i));
  }
}

inline GradedMesh mapped_mesh(double y_min, double y_max, int count, double a, double b, int torus_size, double period) {
  GradedMesh m;
  m.grading = std::exp(a);
  m.map_a = a;
  m.map_b = b;
  m.torus_size = torus_size;
  m.torus_period = period;
  const double x0 = mesh_xi(y_min, a, b), x1 = mesh_xi(y_max, a, b);
  m.y.push_back(y_min);
  for (int k = 1; k + 1 < count; ++k) m.y.push_back(mesh_y(x0 + (x1 - x0) * k / (count - 1), a, b, m.y.back()));
  m.y.push_back(y_max);
  build_stencils(m);
  return m;
}

}  // namespace detail

/// Smoothly graded mesh: ratio `grading` between neighbours near y_min, uniform spacing far out.
inline GradedMesh make_mesh(double y_min, double y_max, int count, double grading, int torus_size = 1,
                            double period = 1.0) {
  if (!(y_min > 0.0 && y_min < 1.0 && y_max > 1.0)) throw domain_error("make_mesh: need 0 < y_min < 1 < y_max");
  if (count < 16) throw domain_error("make_mesh: count must be at least 16");
  if (!(grading > 1.0)) throw domain_error("make_mesh: grading ratio must exceed 1");
  if (torus_size < 1 || !(period > 0.0)) throw domain_error("make_mesh: bad torus parameters");
  const double a = std::log(grading);
  if (!(count - 1 > std::log(y_max / y_min) / a + 1.0))
    throw domain_error("make_mesh: count too small for the graded part");
  // far spacing b: total xi-length equals count - 1 (decreasing in b)
  auto len = [&](double b) { return detail::mesh_xi(y_max, a, b) - detail::mesh_xi(y_min, a, b); };
  double lo = 1e-12, hi = 1.0;
  while (len(hi) > count - 1) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    (len(mid) > count - 1 ? lo : hi) = mid;
  }
  const double b = std::sqrt(lo * hi);
  return detail::mapped_mesh(y_min, y_max, count, a, b, torus_size, period);
}

/// Mesh on explicit nodes (stencils rebuilt).
inline GradedMesh mesh_from_nodes(std::vector<double> y, double grading, int torus_size = 1, double period = 1.0) {
  if (y.size() < 4) throw domain_error("mesh_from_nodes: need at least 4 nodes");
  for (size_t i = 1; i < y.size(); ++i)
    if (!(y[i] > y[i - 1])) throw domain_error("mesh_from_nodes: nodes must increase");
  GradedMesh m;
  m.y = std::move(y);
  m.grading = grading;
  m.torus_size = torus_size;
  m.torus_period = period;
  detail::build_stencils(m);
  return m;
}

/// Halves every y-cell: midpoints of the node map when available, else geometric below 1 and arithmetic above.
inline GradedMesh refine_mesh(const GradedMesh& m) {
  if (m.map_a > 0.0)
    return detail::mapped_mesh(m.y.front(), m.y.back(), 2 * m.ny() - 1, 0.5 * m.map_a, 0.5 * m.map_b, m.torus_size,
                               m.torus_period);
  std::vector<double> y;
  for (int i = 0; i + 1 < m.ny(); ++i) {
    y.push_back(m.y[i]);
    y.push_back(m.y[i + 1] <= 1.0 ? std::sqrt(m.y[i] * m.y[i + 1]) : 0.5 * (m.y[i] + m.y[i + 1]));
  }
  y.push_back(m.y.back());
  return mesh_from_nodes(std::move(y), std::sqrt(m.grading), m.torus_size, m.torus_period);
}

/// Trapezoid weights on the y-nodes.
inline std::vector<double> trapezoid_weights(const GradedMesh& m) {
  std::vector<double> w(m.ny(), 0.0);
  for (int i = 0; i + 1 < m.ny(); ++i) {
    const double h = m.y[i + 1] - m.y[i];
    w[i] += 0.5 * h;
    w[i + 1] += 0.5 * h;
  }
  return w;
}

inline Field zero_field(const GradedMesh& m, int n) { return Field(m.size(), Mat::Zero(n, n)); }

/// y-derivative by the mesh stencils.
inline Field dy(const GradedMesh& m, const Field& f) {
  Field r(f.size());
  for (int iy = 0; iy < m.ny(); ++iy) {
    const auto& s = m.d1[iy];
    for (int iz = 0; iz < m.nz(); ++iz)
      r[m.index(iy, iz)] = s.w[0] * f[m.index(s.first, iz)] + s.w[1] * f[m.index(s.first + 1, iz)] +
                           s.w[2] * f[m.index(s.first + 2, iz)];
  }
  return r;
}

inline Field dyy(const GradedMesh& m, const Field& f) {
  Field r(f.size());
  for (int iy = 0; iy < m.ny(); ++iy) {
    const auto& s = m.d2[iy];
    for (int iz = 0; iz < m.nz(); ++iz)
      r[m.index(iy, iz)] = s.w[0] * f[m.index(s.first, iz)] + s.w[1] * f[m.index(s.first + 1, iz)] +
                           s.w[2] * f[m.index(s.first + 2, iz)];
  }
  return r;
}

/// Periodic central difference in torus direction dir (0 = x2, 1 = x3).
inline Field dtorus(const GradedMesh& m, const Field& f, int dir) {
  const int N = m.torus_size;
  Field r(f.size(), Mat::Zero(f[0].rows(), f[0].cols()));
  if (N == 1) return r;
  const double h = m.hz();
  for (int iy = 0; iy < m.ny(); ++iy)
    for (int i3 = 0; i3 < N; ++i3)
      for (int i2 = 0; i2 < N; ++i2) {
        int p2 = i2, p3 = i3, q2 = i2, q3 = i3;
        if (dir == 0) {
          p2 = (i2 + 1) % N;
          q2 = (i2 + N - 1) % N;
        } else {
          p3 = (i3 + 1) % N;
          q3 = (i3 + N - 1) % N;
        }
        r[m.index(iy, i2 + N * i3)] = (f[m.index(iy, p2 + N * p3)] - f[m.index(iy, q2 + N * q3)]) / (2.0 * h);
      }
  return r;
}

/// d = d2 - i d3, the holomorphic derivative in the field normalization.
inline Field dhol(const GradedMesh& m, const Field& f) {
  Field a = dtorus(m, f, 0), b = dtorus(m, f, 1);
  for (size_t k = 0; k < a.size(); ++k) a[k] -= I * b[k];
  return a;
}

/// dbar = d2 + i d3.
inline Field dahol(const GradedMesh& m, const Field& f) {
  Field a = dtorus(m, f, 0), b = dtorus(m, f, 1);
  for (size_t k = 0; k < a.size(); ++k) a[k] += I * b[k];
  return a;
}

inline Field adjoint(const Field& f) {
  Field r(f.size());
  for (size_t k = 0; k < f.size(); ++k) r[k] = f[k].adjoint();
  return r;
}

inline Field scaled(const Field& f, cplx c) {
  Field r(f.size());
  for (size_t k = 0; k < f.size(); ++k) r[k] = c * f[k];
  return r;
}

inline Field operator+(const Field& a, const Field& b) {
  Field r(a.size());
  for (size_t k = 0; k < a.size(); ++k) r[k] = a[k] + b[k];
  return r;
}

inline Field operator-(const Field& a, const Field& b) {
  Field r(a.size());
  for (size_t k = 0; k < a.size(); ++k) r[k] = a[k] - b[k];
  return r;
}

/// Max norm over nodes with 1 <= iy <= ny-2.
inline double interior_max(const GradedMesh& m, const Field& f) {
  double r = 0.0;
  for (int iy = 1; iy + 1 < m.ny(); ++iy)
    for (int iz = 0; iz < m.nz(); ++iz) r = std::max(r, maxabs(f[m.index(iy, iz)]));
  return r;
}

}  // namespace nahm
