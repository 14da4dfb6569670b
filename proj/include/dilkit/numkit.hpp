#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace dilkit {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using IMatrix = Eigen::MatrixXi;

enum class ErrorKind {
  InvalidInput,
  DimensionMismatch,
  AlgebraMismatch,
  NotAProjection,
  NotCP,
  NotContractive,
  NotPositive,
  NotCommuting,
  CapExceeded,
  ExchangeConditionViolated,
  UnitConstraintViolated,
  UnsupportedDepth,
  UnsupportedSupport,
  NotStrong,
  NotAboveP,
  NotMarkov,
  NotRowContractive,
  ParameterOutOfRange,
};

const char* error_kind_name(ErrorKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct Tolerance {
  double rank_rel = 1e-9;
  double eq_rel = 1e-8;
};

void require_finite(const CMatrix& m, const char* what = "matrix");

// ||a-b||_F <= eq_rel * max(||a||, ||b||, 1)
bool approx_equal(const CMatrix& a, const CMatrix& b, const Tolerance& tol);

double op_norm(const CMatrix& m);

std::size_t numerical_rank(const CMatrix& m, const Tolerance& tol);

// Orthonormal basis of the numerical null space, one vector per column.
CMatrix kernel_basis(const CMatrix& m, const Tolerance& tol);

// Orthonormal basis of the numerical column space.
CMatrix range_basis(const CMatrix& m, const Tolerance& tol);

// Column space / rank keeping singular values strictly above an absolute cut.
CMatrix range_basis_above(const CMatrix& m, double cut);
std::size_t rank_above(const CMatrix& m, double cut);

// Orthonormal basis of the orthogonal complement of span(basis) in C^n,
// where basis has orthonormal columns.
CMatrix complement_basis(const CMatrix& basis, Eigen::Index n, const Tolerance& tol);

// Hermitian square root of a positive semidefinite matrix (negative
// eigenvalues from rounding are clipped to zero).
CMatrix psd_sqrt(const CMatrix& m);

double min_hermitian_eigenvalue(const CMatrix& m);

// Kronecker product a (x) b.
CMatrix kron(const CMatrix& a, const CMatrix& b);

struct CompletionResult {
  bool exists = false;
  bool dims_match = false;
  double gram_residual = 0.0;    // ||X X* - Y Y*||_F
  std::optional<CMatrix> unitary;  // U with X U^T = Y
};

// Decides whether a d x d' unitary U with x_stack * U^T = y_stack exists.
CompletionResult unitary_completion_exists(const CMatrix& x_stack, const CMatrix& y_stack,
                                           const Tolerance& tol);

}  // namespace dilkit
