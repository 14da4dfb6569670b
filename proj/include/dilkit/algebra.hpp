#pragma once

#include "dilkit/numkit.hpp"

#include <vector>

namespace dilkit {

// B = M_{n_1} + ... + M_{n_K}, represented block-diagonally on C^{n_1+...+n_K}.
class BlockAlgebra {
 public:
  BlockAlgebra() = default;
  explicit BlockAlgebra(std::vector<int> block_dims);

  int num_blocks() const { return static_cast<int>(dims_.size()); }
  int block_dim(int k) const { return dims_[k]; }
  int offset(int k) const { return offsets_[k]; }
  int total_dim() const { return total_; }
  const std::vector<int>& block_dims() const { return dims_; }

  // Which block contains representation index i.
  int block_of(int i) const;

  bool operator==(const BlockAlgebra& o) const { return dims_ == o.dims_; }
  bool operator!=(const BlockAlgebra& o) const { return !(*this == o); }

  // Zero outside the diagonal blocks?
  bool contains(const CMatrix& dense, const Tolerance& tol) const;
  // Matrix units E^k_{rs} in the representation, ordered by (k, r, s).
  std::vector<CMatrix> matrix_units() const;
  CMatrix unit() const { return CMatrix::Identity(total_, total_); }
  CMatrix block_projection(int k) const;

 private:
  std::vector<int> dims_;
  std::vector<int> offsets_;
  int total_ = 0;
};

void require_same(const BlockAlgebra& a, const BlockAlgebra& b, const char* what);

class AlgebraElement {
 public:
  AlgebraElement(BlockAlgebra parent, std::vector<CMatrix> blocks);
  static AlgebraElement from_dense(const BlockAlgebra& parent, const CMatrix& dense, const Tolerance& tol);
  static AlgebraElement zero(const BlockAlgebra& parent);
  static AlgebraElement identity(const BlockAlgebra& parent);

  const BlockAlgebra& parent() const { return parent_; }
  const CMatrix& block(int k) const { return blocks_[k]; }
  CMatrix dense() const;

  AlgebraElement operator*(const AlgebraElement& o) const;
  AlgebraElement operator+(const AlgebraElement& o) const;
  AlgebraElement operator-(const AlgebraElement& o) const;
  AlgebraElement scaled(cplx s) const;
  AlgebraElement adjoint() const;
  double norm() const;
  bool is_positive(const Tolerance& tol) const;
  bool is_projection(const Tolerance& tol) const;
  bool approx(const AlgebraElement& o, const Tolerance& tol) const;

 private:
  BlockAlgebra parent_;
  std::vector<CMatrix> blocks_;
};

struct Unitalization {
  BlockAlgebra algebra;    // dims (n_1, ..., n_K, 1)
  CMatrix old_unit;        // 1_B + 0
  CMatrix new_unit;        // 0 + 1
  CMatrix embed(const CMatrix& b) const;        // b + 0
  CMatrix restrict(const CMatrix& b) const;     // upper-left corner
};

Unitalization unitalize_algebra(const BlockAlgebra& b);

// Smallest central projection dominating p.
AlgebraElement central_cover(const AlgebraElement& p, const Tolerance& tol);

// All central projections, one per subset of blocks (bit k = block k present).
std::vector<AlgebraElement> central_projections(const BlockAlgebra& b);

}  // namespace dilkit
