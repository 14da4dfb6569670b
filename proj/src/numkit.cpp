#include "dilkit/numkit.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace dilkit {

const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::AlgebraMismatch: return "AlgebraMismatch";
    case ErrorKind::NotAProjection: return "NotAProjection";
    case ErrorKind::NotCP: return "NotCP";
    case ErrorKind::NotContractive: return "NotContractive";
    case ErrorKind::NotPositive: return "NotPositive";
    case ErrorKind::NotCommuting: return "NotCommuting";
    case ErrorKind::CapExceeded: return "CapExceeded";
    case ErrorKind::ExchangeConditionViolated: return "ExchangeConditionViolated";
    case ErrorKind::UnitConstraintViolated: return "UnitConstraintViolated";
    case ErrorKind::UnsupportedDepth: return "UnsupportedDepth";
    case ErrorKind::UnsupportedSupport: return "UnsupportedSupport";
    case ErrorKind::NotStrong: return "NotStrong";
    case ErrorKind::NotAboveP: return "NotAboveP";
    case ErrorKind::NotMarkov: return "NotMarkov";
    case ErrorKind::NotRowContractive: return "NotRowContractive";
    case ErrorKind::ParameterOutOfRange: return "ParameterOutOfRange";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(error_kind_name(kind)) + ": " + what), kind_(kind) {}

void require_finite(const CMatrix& m, const char* what) {
  if (!m.allFinite()) throw Error(ErrorKind::InvalidInput, std::string(what) + " has non-finite entries");
}

bool approx_equal(const CMatrix& a, const CMatrix& b, const Tolerance& tol) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  const double scale = std::max({a.norm(), b.norm(), 1.0});
  return (a - b).norm() <= tol.eq_rel * scale;
}

namespace {

Eigen::BDCSVD<CMatrix> full_svd(const CMatrix& m) {
  return Eigen::BDCSVD<CMatrix>(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
}

std::size_t rank_from_singular(const Eigen::VectorXd& s, const Tolerance& tol) {
  if (s.size() == 0) return 0;
  const double smax = s(0);
  if (smax <= 0.0) return 0;
  const double cut = tol.rank_rel * smax;
  std::size_t r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cut) ++r;
  return r;
}

}  // namespace

double op_norm(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::BDCSVD<CMatrix> svd(m);
  return svd.singularValues()(0);
}

std::size_t numerical_rank(const CMatrix& m, const Tolerance& tol) {
  require_finite(m);
  if (m.size() == 0) return 0;
  Eigen::BDCSVD<CMatrix> svd(m);
  return rank_from_singular(svd.singularValues(), tol);
}

CMatrix kernel_basis(const CMatrix& m, const Tolerance& tol) {
  require_finite(m);
  const Eigen::Index n = m.cols();
  if (m.rows() == 0 || n == 0) return CMatrix::Identity(n, n);
  auto svd = full_svd(m);
  const auto r = static_cast<Eigen::Index>(rank_from_singular(svd.singularValues(), tol));
  return svd.matrixV().rightCols(n - r);
}

CMatrix range_basis(const CMatrix& m, const Tolerance& tol) {
  require_finite(m);
  if (m.rows() == 0 || m.cols() == 0) return CMatrix(m.rows(), 0);
  // Thin factor is enough; rank decides how many columns we keep.
  Eigen::BDCSVD<CMatrix> svd(m, Eigen::ComputeThinU);
  const auto r = static_cast<Eigen::Index>(rank_from_singular(svd.singularValues(), tol));
  return svd.matrixU().leftCols(r);
}

CMatrix range_basis_above(const CMatrix& m, double cut) {
  require_finite(m);
  if (m.rows() == 0 || m.cols() == 0) return CMatrix(m.rows(), 0);
  Eigen::BDCSVD<CMatrix> svd(m, Eigen::ComputeThinU);
  Eigen::Index r = 0;
  while (r < svd.singularValues().size() && svd.singularValues()(r) > cut) ++r;
  return svd.matrixU().leftCols(r);
}

std::size_t rank_above(const CMatrix& m, double cut) {
  require_finite(m);
  if (m.size() == 0) return 0;
  Eigen::BDCSVD<CMatrix> svd(m);
  std::size_t r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > cut) ++r;
  return r;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

CMatrix complement_basis(const CMatrix& basis, Eigen::Index n, const Tolerance& tol) {
  if (basis.cols() == 0) return CMatrix::Identity(n, n);
  if (basis.rows() != n) throw Error(ErrorKind::DimensionMismatch, "complement_basis");
  return kernel_basis(basis.adjoint(), tol);
}

CMatrix psd_sqrt(const CMatrix& m) {
  if (m.size() == 0) return m;
  CMatrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

double min_hermitian_eigenvalue(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  CMatrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

CompletionResult unitary_completion_exists(const CMatrix& x_stack, const CMatrix& y_stack,
                                           const Tolerance& tol) {
  if (x_stack.rows() != y_stack.rows())
    throw Error(ErrorKind::DimensionMismatch, "unitary_completion_exists: row counts differ");
  require_finite(x_stack, "x_stack");
  require_finite(y_stack, "y_stack");

  CompletionResult res;
  res.dims_match = x_stack.cols() == y_stack.cols();
  const CMatrix gx = x_stack * x_stack.adjoint();
  const CMatrix gy = y_stack * y_stack.adjoint();
  res.gram_residual = (gx - gy).norm();
  if (!res.dims_match || !approx_equal(gx, gy, tol)) return res;

  const Eigen::Index d = x_stack.cols();
  CMatrix v = CMatrix::Identity(d, d);
  if (d > 0 && x_stack.rows() > 0) {
    // Orthogonal Procrustes: the minimiser of ||X V - Y|| over unitaries is
    // P Q* for X* Y = P S Q*; it is exact whenever an exact solution exists.
    Eigen::BDCSVD<CMatrix> svd(x_stack.adjoint() * y_stack, Eigen::ComputeFullU | Eigen::ComputeFullV);
    v = svd.matrixU() * svd.matrixV().adjoint();
  }
  const double scale = std::max(y_stack.norm(), 1.0);
  const double resid = (x_stack * v - y_stack).norm();
  if (resid > tol.eq_rel * scale) return res;
  res.exists = true;
  res.unitary = v.transpose();
  return res;
}

}  // namespace dilkit
