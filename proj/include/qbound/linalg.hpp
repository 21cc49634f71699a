#pragma once

// Small dense/sparse helpers shared by the modules.

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "qbound/types.hpp"

namespace qbound::linalg {

inline double max_abs(const CMat& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

inline double hermitian_defect(const CMat& a) { return max_abs(a - a.adjoint()); }

inline double hermitian_defect(const SpMat& a) {
  SpMat d = a - SpMat(a.adjoint());
  double m = 0.0;
  for (int k = 0; k < d.outerSize(); ++k)
    for (SpMat::InnerIterator it(d, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

inline double unitarity_defect(const CMat& u) {
  return max_abs(u.adjoint() * u - CMat::Identity(u.cols(), u.cols()));
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases of
/// diag(R) divided out.
template <class Rng>
CMat haar_unitary(int n, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  CMat g(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) g(i, j) = cplx(gauss(rng), gauss(rng)) / std::sqrt(2.0);
  Eigen::HouseholderQR<CMat> qr(g);
  CMat q = qr.householderQ();
  CMat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j) {
    const cplx d = r(j, j);
    const double ad = std::abs(d);
    if (ad > 0.0) q.col(j) *= d / ad;
  }
  return q;
}

template <class Rng>
CVec random_complex(int n, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  CVec v(n);
  for (int i = 0; i < n; ++i) v(i) = cplx(gauss(rng), gauss(rng));
  return v;
}

/// Nearest unitary (orthogonal polar factor). For rectangular input with
/// rows >= cols the result has orthonormal columns.
inline CMat polar_unitary(const CMat& a) {
  Eigen::JacobiSVD<CMat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

/// Orthonormal basis of ker(c) via a complete orthogonal decomposition of c^H.
/// Returns the numerical rank through `rank`.
inline CMat null_space(const CMat& c, double threshold, int* rank = nullptr) {
  const int n = static_cast<int>(c.cols());
  if (c.rows() == 0) {
    if (rank) *rank = 0;
    return CMat::Identity(n, n);
  }
  CMat ch = c.adjoint();
  Eigen::CompleteOrthogonalDecomposition<CMat> cod;
  cod.setThreshold(threshold);
  cod.compute(ch);
  const int r = static_cast<int>(cod.rank());
  if (rank) *rank = r;
  CMat q = cod.householderQ();
  return q.rightCols(n - r);
}

/// Eigendecomposition of a normal matrix: the complex Schur form of a normal
/// matrix is diagonal and its Schur vectors are an orthonormal eigenbasis even
/// inside degenerate eigenspaces.
struct NormalEigen {
  CVec values;
  CMat vectors;
};

inline NormalEigen normal_eigen(const CMat& u) {
  Eigen::ComplexSchur<CMat> schur(u, true);
  NormalEigen out;
  out.values = schur.matrixT().diagonal();
  out.vectors = schur.matrixU();
  return out;
}

inline SpMat sparse_from_dense(const CMat& a, double drop = 0.0) {
  std::vector<Triplet> t;
  for (int j = 0; j < a.cols(); ++j)
    for (int i = 0; i < a.rows(); ++i)
      if (std::abs(a(i, j)) > drop) t.emplace_back(i, j, a(i, j));
  SpMat s(a.rows(), a.cols());
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

/// Weighted inner product sum_j w_j conj(a_j) b_j.
inline cplx weighted_dot(const CVec& a, const RVec& w, const CVec& b) {
  return (a.conjugate().array() * w.array().cast<cplx>() * b.array()).sum();
}

inline double weighted_norm(const CVec& a, const RVec& w) {
  return std::sqrt(std::max(0.0, (a.cwiseAbs2().array() * w.array()).sum()));
}

}  // namespace qbound::linalg
