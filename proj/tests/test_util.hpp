#pragma once

#include "dilkit/cpmap.hpp"

#include <random>

namespace testutil {

using namespace dilkit;

inline CMatrix random_matrix(std::mt19937& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = cplx(n(rng), n(rng));
  return m;
}

inline CMatrix random_unitary(std::mt19937& rng, int d) {
  Eigen::HouseholderQR<CMatrix> qr(random_matrix(rng, d, d));
  return qr.householderQ() * CMatrix::Identity(d, d);
}

// Random block-diagonal operator between the representation spaces of two
// algebras that maps block l of b into block k of a for one chosen (k,l).
inline CMatrix random_block_operator(std::mt19937& rng, const BlockAlgebra& a, const BlockAlgebra& b, int k, int l) {
  CMatrix c = CMatrix::Zero(a.total_dim(), b.total_dim());
  c.block(a.offset(k), b.offset(l), a.block_dim(k), b.block_dim(l)) = random_matrix(rng, a.block_dim(k), b.block_dim(l));
  return c;
}

// Random CP map on a block algebra: `count` Kraus operators, each supported
// on a random block pair, then scaled so that ||T(1)|| = scale.
inline CPMap random_cp(std::mt19937& rng, const BlockAlgebra& b, int count, double scale = 1.0) {
  std::vector<CMatrix> kraus;
  std::uniform_int_distribution<int> blk(0, b.num_blocks() - 1);
  for (int i = 0; i < count; ++i) {
    if (b.num_blocks() == 1) {
      kraus.push_back(random_matrix(rng, b.total_dim(), b.total_dim()));
    } else {
      kraus.push_back(random_block_operator(rng, b, b, blk(rng), blk(rng)));
    }
  }
  CPMap t(b, b, kraus);
  const double n = op_norm(t.unit_image());
  if (n > 0)
    for (auto& c : kraus) c *= std::sqrt(scale / n);
  return CPMap(b, b, kraus);
}

inline CMatrix dense_unit(const BlockAlgebra& b, int k, int r, int s) {
  CMatrix e = CMatrix::Zero(b.total_dim(), b.total_dim());
  e(b.offset(k) + r, b.offset(k) + s) = 1.0;
  return e;
}

}  // namespace testutil

namespace testutil {

inline CorrVector random_vector(std::mt19937& rng, const Correspondence& e) {
  CorrVector v = CorrVector::zero(e);
  for (int k = 0; k < e.left().num_blocks(); ++k)
    for (int l = 0; l < e.right().num_blocks(); ++l) v.block(k, l) = random_matrix(rng, v.block(k, l).rows(), v.block(k, l).cols());
  return v;
}

inline Correspondence random_corr(std::mt19937& rng, const BlockAlgebra& a, const BlockAlgebra& b, int max_mult) {
  std::uniform_int_distribution<int> m(0, max_mult);
  IMatrix mult(a.num_blocks(), b.num_blocks());
  for (int k = 0; k < a.num_blocks(); ++k)
    for (int l = 0; l < b.num_blocks(); ++l) mult(k, l) = m(rng);
  return Correspondence(a, b, mult);
}

inline BilinearMap random_bilinear(std::mt19937& rng, const Correspondence& s, const Correspondence& t) {
  std::vector<CMatrix> blocks;
  for (int k = 0; k < s.left().num_blocks(); ++k)
    for (int l = 0; l < s.right().num_blocks(); ++l) blocks.push_back(random_matrix(rng, t.dim(k, l), s.dim(k, l)));
  return BilinearMap(s, t, blocks);
}

}  // namespace testutil
