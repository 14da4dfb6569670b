#include "doctest.h"
#include "dilkit/algebra.hpp"

#include <random>

using namespace dilkit;

namespace {

AlgebraElement random_element(std::mt19937& rng, const BlockAlgebra& b) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<CMatrix> blocks;
  for (int d : b.block_dims()) {
    CMatrix m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = cplx(n(rng), n(rng));
    blocks.push_back(m);
  }
  return AlgebraElement(b, blocks);
}

}  // namespace

TEST_CASE("basic element operations") {
  Tolerance tol;
  BlockAlgebra b({2, 1});
  const auto one = AlgebraElement::identity(b);
  CHECK((one * one).approx(one, tol));
  CMatrix d(2, 2);
  d << 1, 0, 0, -1;
  CHECK_FALSE(AlgebraElement(BlockAlgebra({2}), {d}).is_positive(tol));
  CHECK(one.is_projection(tol));
  CHECK_THROWS_AS(one * AlgebraElement::identity(BlockAlgebra({3})), Error);
}

TEST_CASE("norm of Bhat's T(1) with C = 6") {
  // T(1) = (1/C) [[4,1],[1,1]] for C = 6, norm (5+sqrt13)/12
  CMatrix t1(2, 2);
  t1 << 4, 1, 1, 1;
  t1 /= 6.0;
  AlgebraElement e(BlockAlgebra({2}), {t1});
  CHECK(e.norm() == doctest::Approx((5.0 + std::sqrt(13.0)) / 12.0).epsilon(1e-12));
}

TEST_CASE("C* identity") {
  std::mt19937 rng(1);
  BlockAlgebra b({1, 2, 3});
  for (int i = 0; i < 50; ++i) {
    const auto a = random_element(rng, b);
    CHECK((a.adjoint() * a).norm() == doctest::Approx(a.norm() * a.norm()).epsilon(1e-10));
  }
}

TEST_CASE("unitalization") {
  const auto u = unitalize_algebra(BlockAlgebra({1}));
  CHECK(u.algebra.block_dims() == std::vector<int>{1, 1});
  CHECK(unitalize_algebra(u.algebra).algebra.block_dims() == std::vector<int>{1, 1, 1});
  const auto m = unitalize_algebra(BlockAlgebra({2}));
  CHECK(m.algebra.total_dim() == 3);
  std::mt19937 rng(2);
  const CMatrix b = random_element(rng, BlockAlgebra({2})).dense();
  const CMatrix e = m.embed(b);
  CHECK((m.old_unit * e * m.old_unit - e).norm() < 1e-14);
  CHECK((m.restrict(e) - b).norm() < 1e-14);
  CHECK((m.old_unit + m.new_unit - m.algebra.unit()).norm() < 1e-14);
  // embed is multiplicative
  const CMatrix c = random_element(rng, BlockAlgebra({2})).dense();
  CHECK((m.embed(b * c) - m.embed(b) * m.embed(c)).norm() < 1e-12);
}

TEST_CASE("central cover") {
  Tolerance tol;
  BlockAlgebra m3({3});
  CMatrix p = CMatrix::Zero(3, 3);
  p(0, 0) = 1.0;
  CHECK(central_cover(AlgebraElement(m3, {p}), tol).approx(AlgebraElement::identity(m3), tol));
  CHECK(central_cover(AlgebraElement::identity(m3), tol).approx(AlgebraElement::identity(m3), tol));

  BlockAlgebra b({1, 2});
  const AlgebraElement q(b, {CMatrix::Identity(1, 1), CMatrix::Zero(2, 2)});
  const auto c = central_cover(q, tol);
  CHECK(c.approx(q, tol));

  CMatrix notp = CMatrix::Identity(3, 3) * 0.5;
  CHECK_THROWS_AS(central_cover(AlgebraElement(m3, {notp}), tol), Error);

  // minimality among all central projections dominating a random projection
  BlockAlgebra big({1, 2, 2});
  CMatrix v = CMatrix::Zero(2, 1);
  v << 1, cplx(0, 1);
  v /= std::sqrt(2.0);
  const AlgebraElement r(big, {CMatrix::Zero(1, 1), CMatrix::Zero(2, 2), v * v.adjoint()});
  const auto cr = central_cover(r, tol);
  CHECK(cr.is_projection(tol));
  for (const auto& z : central_projections(big)) {
    CHECK((z * cr).approx(cr * z, tol));
    const bool dominates = (z * r).approx(r, tol);
    if (dominates) CHECK((z * cr).approx(cr, tol));
  }
}
