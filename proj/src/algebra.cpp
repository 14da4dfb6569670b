#include "dilkit/algebra.hpp"

#include <algorithm>

namespace dilkit {

BlockAlgebra::BlockAlgebra(std::vector<int> block_dims) : dims_(std::move(block_dims)) {
  if (dims_.empty()) throw Error(ErrorKind::InvalidInput, "block algebra needs at least one block");
  offsets_.reserve(dims_.size());
  for (int n : dims_) {
    if (n < 1) throw Error(ErrorKind::InvalidInput, "block dimensions must be positive");
    offsets_.push_back(total_);
    total_ += n;
  }
}

int BlockAlgebra::block_of(int i) const {
  for (int k = num_blocks() - 1; k >= 0; --k)
    if (i >= offsets_[k]) return k;
  return 0;
}

bool BlockAlgebra::contains(const CMatrix& dense, const Tolerance& tol) const {
  if (dense.rows() != total_ || dense.cols() != total_) return false;
  CMatrix off = dense;
  for (int k = 0; k < num_blocks(); ++k) off.block(offsets_[k], offsets_[k], dims_[k], dims_[k]).setZero();
  return off.norm() <= tol.eq_rel * std::max(dense.norm(), 1.0);
}

std::vector<CMatrix> BlockAlgebra::matrix_units() const {
  std::vector<CMatrix> out;
  for (int k = 0; k < num_blocks(); ++k)
    for (int r = 0; r < dims_[k]; ++r)
      for (int s = 0; s < dims_[k]; ++s) {
        CMatrix e = CMatrix::Zero(total_, total_);
        e(offsets_[k] + r, offsets_[k] + s) = 1.0;
        out.push_back(std::move(e));
      }
  return out;
}

CMatrix BlockAlgebra::block_projection(int k) const {
  CMatrix p = CMatrix::Zero(total_, total_);
  p.block(offsets_[k], offsets_[k], dims_[k], dims_[k]).setIdentity();
  return p;
}

void require_same(const BlockAlgebra& a, const BlockAlgebra& b, const char* what) {
  if (a != b) throw Error(ErrorKind::AlgebraMismatch, what);
}

AlgebraElement::AlgebraElement(BlockAlgebra parent, std::vector<CMatrix> blocks)
    : parent_(std::move(parent)), blocks_(std::move(blocks)) {
  if (static_cast<int>(blocks_.size()) != parent_.num_blocks())
    throw Error(ErrorKind::AlgebraMismatch, "wrong number of blocks");
  for (int k = 0; k < parent_.num_blocks(); ++k) {
    const int n = parent_.block_dim(k);
    if (blocks_[k].rows() != n || blocks_[k].cols() != n)
      throw Error(ErrorKind::AlgebraMismatch, "block shape does not match parent");
    require_finite(blocks_[k], "algebra element");
  }
}

AlgebraElement AlgebraElement::from_dense(const BlockAlgebra& parent, const CMatrix& dense,
                                          const Tolerance& tol) {
  if (!parent.contains(dense, tol)) throw Error(ErrorKind::AlgebraMismatch, "matrix is not in the block algebra");
  std::vector<CMatrix> blocks;
  for (int k = 0; k < parent.num_blocks(); ++k)
    blocks.push_back(dense.block(parent.offset(k), parent.offset(k), parent.block_dim(k), parent.block_dim(k)));
  return AlgebraElement(parent, std::move(blocks));
}

AlgebraElement AlgebraElement::zero(const BlockAlgebra& parent) {
  std::vector<CMatrix> blocks;
  for (int n : parent.block_dims()) blocks.push_back(CMatrix::Zero(n, n));
  return AlgebraElement(parent, std::move(blocks));
}

AlgebraElement AlgebraElement::identity(const BlockAlgebra& parent) {
  std::vector<CMatrix> blocks;
  for (int n : parent.block_dims()) blocks.push_back(CMatrix::Identity(n, n));
  return AlgebraElement(parent, std::move(blocks));
}

CMatrix AlgebraElement::dense() const {
  CMatrix d = CMatrix::Zero(parent_.total_dim(), parent_.total_dim());
  for (int k = 0; k < parent_.num_blocks(); ++k)
    d.block(parent_.offset(k), parent_.offset(k), parent_.block_dim(k), parent_.block_dim(k)) = blocks_[k];
  return d;
}

AlgebraElement AlgebraElement::operator*(const AlgebraElement& o) const {
  require_same(parent_, o.parent_, "multiply");
  std::vector<CMatrix> b;
  for (std::size_t k = 0; k < blocks_.size(); ++k) b.push_back(blocks_[k] * o.blocks_[k]);
  return AlgebraElement(parent_, std::move(b));
}

AlgebraElement AlgebraElement::operator+(const AlgebraElement& o) const {
  require_same(parent_, o.parent_, "add");
  std::vector<CMatrix> b;
  for (std::size_t k = 0; k < blocks_.size(); ++k) b.push_back(blocks_[k] + o.blocks_[k]);
  return AlgebraElement(parent_, std::move(b));
}

AlgebraElement AlgebraElement::operator-(const AlgebraElement& o) const { return *this + o.scaled(-1.0); }

AlgebraElement AlgebraElement::scaled(cplx s) const {
  std::vector<CMatrix> b;
  for (const auto& x : blocks_) b.push_back(s * x);
  return AlgebraElement(parent_, std::move(b));
}

AlgebraElement AlgebraElement::adjoint() const {
  std::vector<CMatrix> b;
  for (const auto& x : blocks_) b.push_back(x.adjoint());
  return AlgebraElement(parent_, std::move(b));
}

double AlgebraElement::norm() const {
  double n = 0.0;
  for (const auto& x : blocks_) n = std::max(n, op_norm(x));
  return n;
}

bool AlgebraElement::is_positive(const Tolerance& tol) const {
  for (const auto& x : blocks_) {
    if (!approx_equal(x, x.adjoint(), tol)) return false;
    if (min_hermitian_eigenvalue(x) < -tol.eq_rel) return false;
  }
  return true;
}

bool AlgebraElement::is_projection(const Tolerance& tol) const {
  for (const auto& x : blocks_) {
    if (!approx_equal(x, x.adjoint(), tol)) return false;
    if (!approx_equal(x * x, x, tol)) return false;
  }
  return true;
}

bool AlgebraElement::approx(const AlgebraElement& o, const Tolerance& tol) const {
  require_same(parent_, o.parent_, "compare");
  return approx_equal(dense(), o.dense(), tol);
}

CMatrix Unitalization::embed(const CMatrix& b) const {
  CMatrix out = CMatrix::Zero(algebra.total_dim(), algebra.total_dim());
  out.topLeftCorner(b.rows(), b.cols()) = b;
  return out;
}

CMatrix Unitalization::restrict(const CMatrix& b) const {
  const int n = algebra.total_dim() - 1;
  return b.topLeftCorner(n, n);
}

Unitalization unitalize_algebra(const BlockAlgebra& b) {
  std::vector<int> dims = b.block_dims();
  dims.push_back(1);
  Unitalization u{BlockAlgebra(dims), CMatrix(), CMatrix()};
  const int n = b.total_dim();
  u.old_unit = CMatrix::Zero(n + 1, n + 1);
  u.old_unit.topLeftCorner(n, n).setIdentity();
  u.new_unit = CMatrix::Zero(n + 1, n + 1);
  u.new_unit(n, n) = 1.0;
  return u;
}

AlgebraElement central_cover(const AlgebraElement& p, const Tolerance& tol) {
  if (!p.is_projection(tol)) throw Error(ErrorKind::NotAProjection, "central_cover");
  const auto& alg = p.parent();
  std::vector<CMatrix> blocks;
  for (int k = 0; k < alg.num_blocks(); ++k) {
    const int n = alg.block_dim(k);
    const bool nonzero = p.block(k).norm() > tol.eq_rel * std::max(1.0, p.block(k).norm());
    blocks.push_back(nonzero ? CMatrix(CMatrix::Identity(n, n)) : CMatrix(CMatrix::Zero(n, n)));
  }
  return AlgebraElement(alg, std::move(blocks));
}

std::vector<AlgebraElement> central_projections(const BlockAlgebra& b) {
  std::vector<AlgebraElement> out;
  const int K = b.num_blocks();
  for (unsigned mask = 0; mask < (1u << K); ++mask) {
    std::vector<CMatrix> blocks;
    for (int k = 0; k < K; ++k) {
      const int n = b.block_dim(k);
      blocks.push_back((mask >> k) & 1u ? CMatrix(CMatrix::Identity(n, n)) : CMatrix(CMatrix::Zero(n, n)));
    }
    out.emplace_back(b, std::move(blocks));
  }
  return out;
}

}  // namespace dilkit
