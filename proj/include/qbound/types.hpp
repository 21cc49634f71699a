#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace qbound {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<cplx>;
using Triplet = Eigen::Triplet<cplx>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I_unit{0.0, 1.0};

// Error taxonomy. Every failure surfaced by the library is one of these.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DimensionError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct AssemblyError : Error {
  using Error::Error;
};
struct SolverError : Error {
  using Error::Error;
};
struct PreconditionError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

}  // namespace qbound
