#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nahm {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

/// Grid-sampled matrix field, one matrix per mesh node.
using Field = std::vector<Mat>;

inline constexpr cplx I{0.0, 1.0};

struct nahm_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct invalid_rank : nahm_error {
  using nahm_error::nahm_error;
};
struct domain_error : nahm_error {
  using nahm_error::nahm_error;
};
struct dimension_error : nahm_error {
  using nahm_error::nahm_error;
};
struct decomposition_error : nahm_error {
  using nahm_error::nahm_error;
};
/// Raised when an iterative solve stalls; carries the last good state description.
struct convergence_error : nahm_error {
  using nahm_error::nahm_error;
};
struct config_error : nahm_error {
  using nahm_error::nahm_error;
};

/// Max-entry norm.
inline double maxabs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

inline double maxabs(const Field& f) {
  double r = 0.0;
  for (const auto& m : f) r = std::max(r, maxabs(m));
  return r;
}

inline Mat comm(const Mat& a, const Mat& b) { return a * b - b * a; }

inline Mat herm_part(const Mat& m) { return 0.5 * (m + m.adjoint()); }
inline Mat aherm_part(const Mat& m) { return 0.5 * (m - m.adjoint()); }

inline bool is_hermitian(const Mat& m, double tol = 1e-12) {
  return maxabs(m - m.adjoint()) < tol * std::max(1.0, maxabs(m));
}

inline void require_square(const Mat& m, const char* what) {
  if (m.rows() != m.cols()) throw dimension_error(std::string(what) + ": matrix not square");
}

inline void require_same(const Mat& a, const Mat& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw dimension_error(std::string(what) + ": dimension mismatch");
}

}  // namespace nahm
