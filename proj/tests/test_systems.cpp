#include "doctest.h"
#include "dilkit/systems.hpp"
#include "test_util.hpp"

#include <set>

using namespace dilkit;
using namespace testutil;

namespace {

const Tolerance tol{};

Eigen::MatrixXd scex3_matrix() {
  Eigen::MatrixXd t(3, 3);
  t << 0.5, 0, 0.5, 0.25, 0.5, 0.25, 0.25, 0.5, 0.25;
  return t;
}

const BlockAlgebra C1({1});

Correspondence hilbert(int n) {
  IMatrix m(1, 1);
  m << n;
  return Correspondence(C1, C1, m);
}

CorrVector hvec(const Correspondence& h, const CVector& v) {
  CorrVector x = CorrVector::zero(h);
  x.block(0, 0) = v;
  return x;
}

CVector basis(int n, int i) {
  CVector v = CVector::Zero(n);
  v(i) = 1.0;
  return v;
}

FlipData swap_flips(int d, int n) {
  FlipData fd;
  const Correspondence h = hilbert(n);
  fd.spaces.assign(d, h);
  for (int i = 1; i <= d; ++i)
    for (int j = 1; j < i; ++j) fd.flips[{j, i}] = hilbert_swap(h, h);
  return fd;
}

FlipData identity_flips(int d, const Correspondence& e) {
  FlipData fd;
  fd.spaces.assign(d, e);
  for (int i = 1; i <= d; ++i)
    for (int j = 1; j < i; ++j) fd.flips[{j, i}] = BilinearMap::identity(tensor(e, e));
  return fd;
}

// E = C^2, only F_{2,3} is the swap.
FlipData flip_example() {
  FlipData fd = identity_flips(3, hilbert(2));
  fd.flips[{2, 3}] = hilbert_swap(hilbert(2), hilbert(2));
  return fd;
}

BilinearMap random_bilinear_unitary(std::mt19937& rng, const Correspondence& e) {
  std::vector<CMatrix> blocks;
  for (int k = 0; k < e.left().num_blocks(); ++k)
    for (int l = 0; l < e.right().num_blocks(); ++l) blocks.push_back(random_unitary(rng, e.dim(k, l)));
  return BilinearMap(e, e, blocks);
}

// <x, b x> for a dense b of the left algebra.
CMatrix expectation(const CorrVector& x, const CMatrix& b) { return x.inner(x.left_mul(b)); }

}  // namespace

TEST_CASE("grid indices and compositions") {
  const GridCap g({2, 1});
  const auto idx = g.indices();
  CHECK(idx.size() == 6);
  CHECK(idx.front() == Index{0, 0});
  CHECK(degree(idx.back()) == 3);
  CHECK_FALSE(g.contains({3, 0}));

  for (int n = 1; n <= 6; ++n) CHECK(CompositionEnumerator({n}).compositions().size() == (1u << (n - 1)));

  // Brute force over all words of nonzero parts in the box.
  for (const Index& target : {Index{1, 1}, Index{2, 1}, Index{2, 2}}) {
    const CompositionEnumerator en(target);
    const auto& comps = en.compositions();
    std::set<std::vector<Index>> seen(comps.begin(), comps.end());
    CHECK(seen.size() == comps.size());
    std::vector<Index> parts;
    for (const auto& a : GridCap(target).indices())
      if (!is_zero(a)) parts.push_back(a);
    std::size_t count = 0;
    std::vector<std::vector<Index>> words{{}};
    for (int len = 1; len <= degree(target); ++len) {
      std::vector<std::vector<Index>> next;
      for (const auto& w : words)
        for (const auto& p : parts) {
          auto v = w;
          v.push_back(p);
          next.push_back(v);
        }
      words = next;
      for (const auto& w : words) {
        Index s = zero_index(2);
        for (const auto& p : w) s = add(s, p);
        if (s == target) {
          ++count;
          CHECK(seen.count(w) == 1);
        }
      }
    }
    CHECK(count == comps.size());
  }
  CHECK(CompositionEnumerator({1, 1}).compositions().size() == 3);
}

TEST_CASE("trivial product system") {
  const BlockAlgebra B({2, 1});
  FlipData fd;
  fd.spaces = {Correspondence::trivial(B)};
  fd.vectors = {CorrVector::unit(B)};
  const TruncatedSystem sys = product_from_flips(fd, GridCap({3}), tol);
  const auto rep = validate(sys, tol);
  CHECK(rep.passed());
  CHECK(rep.max_residual() < 1e-14);
  for (const auto& [n, e] : sys.members) CHECK(e.same_shape(Correspondence::trivial(B)));
  const SpannedResult sp = spanned_subsystem(sys, tol);
  CHECK_FALSE(sp.proper);
  for (const auto& [n, s] : sp.spaces) CHECK(s.sub.total_mult() == sys.member(n).total_mult());
  const SubsystemSolution sol = product_subsystem_solver(sys, tol);
  CHECK(sol.trivial());
}

TEST_CASE("gns system of the identity and a damaged coproduct") {
  const BlockAlgebra M2({2});
  const TruncatedSystem sys = gns_system({CPMap::identity(M2)}, GridCap({3}), tol);
  CHECK(sys.kind == SystemKind::Sub);
  for (const auto& [n, e] : sys.members) CHECK(e.mult()(0, 0) == 1);
  const auto rep = validate(sys, tol);
  CHECK(rep.passed());
  for (const auto& [key, w] : sys.structure) {
    CHECK(residual_check("", compose(w, w.adjoint()) - BilinearMap::identity(w.target()), 1e-10).passed);
  }

  TruncatedSystem bad = sys;
  bad.structure[{Index{1}, Index{1}}] = sys.map({1}, {1}).scaled(0.5);
  const auto rep2 = validate(bad, tol);
  CHECK_FALSE(rep2.passed());
  bool found = false;
  for (const auto& c : rep2.failures())
    if (c.name == "isometry (1),(1)") {
      found = true;
      CHECK(c.residual == doctest::Approx(0.75).epsilon(1e-12));
    }
  CHECK(found);
}

TEST_CASE("gns system of (T, T^2) on C^3") {
  const CPMap t = CPMap::from_markov_matrix(scex3_matrix());
  const CPMap t2 = compose(t, t);
  const TruncatedSystem sys = gns_system({t, t2}, GridCap({1, 1}), tol);
  const auto rep = validate(sys, tol);
  CHECK(rep.passed());
  const IMatrix m10 = sys.member({1, 0}).mult(), m01 = sys.member({0, 1}).mult(), m11 = sys.member({1, 1}).mult();
  const IMatrix prod = m10 * m01;
  bool strict = false;
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l) {
      CHECK(m11(k, l) <= prod(k, l));
      strict = strict || m11(k, l) < prod(k, l);
    }
  CHECK(strict);
  CHECK(m11 == gns(compose(t, t2), tol).corr.mult());

  // The unit reproduces the semigroup.
  const BlockAlgebra B = t.domain();
  for (const auto& n : sys.cap.indices()) {
    CPMap tn = CPMap::identity(B);
    for (int r = 0; r < n[0]; ++r) tn = compose(t, tn);
    for (int r = 0; r < n[1]; ++r) tn = compose(t2, tn);
    for (const auto& e : B.matrix_units()) CHECK((expectation(sys.vector(n), e) - tn.apply(e)).norm() < 1e-9);
  }
}

TEST_CASE("gns system of commuting elementary maps is trivial") {
  const BlockAlgebra M2({2});
  CMatrix c1(2, 2), c2(2, 2);
  c1 << 0.8, 0, 0, cplx(0, 0.5);
  c2 << cplx(0.3, 0.1), 0, 0, -0.9;
  const CPMap t1(M2, M2, {c1}), t2(M2, M2, {c2});
  const TruncatedSystem sys = gns_system({t1, t2}, GridCap({2, 2}), tol);
  for (const auto& [n, e] : sys.members) CHECK(e.mult()(0, 0) == 1);
  CHECK(validate(sys, tol).passed());
}

TEST_CASE("gns system rejects noncommuting maps") {
  const BlockAlgebra M2({2});
  std::mt19937 rng(4);
  const CPMap a = random_cp(rng, M2, 2), b = random_cp(rng, M2, 2);
  CHECK_THROWS_AS(gns_system({a, b}, GridCap({1, 1}), tol), Error);
}

TEST_CASE("exchange decision") {
  CHECK(check_exchange(identity_flips(3, hilbert(2)), tol).holds);
  CHECK(check_exchange(swap_flips(3, 2), tol).holds);
  CHECK(check_exchange(swap_flips(4, 2), tol).holds);
  const ExchangeResult r = check_exchange(flip_example(), tol);
  CHECK_FALSE(r.holds);
  CHECK(*r.triple == std::array<int, 3>{1, 2, 3});
  CHECK(std::abs(r.witness_residual - std::sqrt(2.0)) < 1e-12);
  FlipData two = flip_example();
  two.spaces.resize(2);
  two.flips.erase({1, 3});
  two.flips.erase({2, 3});
  two.flips[{1, 2}] = hilbert_swap(hilbert(2), hilbert(2));
  CHECK(check_exchange(two, tol).holds);
}

TEST_CASE("exchange decision is gauge invariant") {
  std::mt19937 rng(11);
  const Correspondence e = hilbert(2);
  for (const FlipData& base : {swap_flips(3, 2), flip_example()}) {
    std::vector<BilinearMap> a;
    for (int i = 0; i < 3; ++i) a.push_back(random_bilinear_unitary(rng, e));
    FlipData g = base;
    for (auto& [key, fl] : g.flips) {
      const auto [j, i] = key;
      fl = compose(tensor(a[j - 1], a[i - 1]), compose(fl, tensor(a[i - 1], a[j - 1]).adjoint())).materialize();
    }
    CHECK(flip_gauge_residual(base, g, a) < 1e-12);
    CHECK(check_exchange(base, tol).holds == check_exchange(g, tol).holds);
  }
}

TEST_CASE("truncated systems from flips") {
  const FlipData id = identity_flips(3, hilbert(2));
  const TruncatedSystem sys = truncated_from_flips(id, tol);
  CHECK(validate(sys, tol).passed());
  long nonzero = 0, dim = 0;
  for (const auto& [n, e] : sys.members) {
    if (e.complex_dim() > 0) ++nonzero;
    dim += e.complex_dim();
  }
  CHECK(nonzero == 10);
  CHECK(dim == 31);
  CHECK(check_exchange(id, tol).holds);

  const FlipData fx = flip_example();
  CHECK(validate(truncated_from_flips(fx, tol), tol).passed());
  CHECK_FALSE(check_exchange(fx, tol).holds);
}

TEST_CASE("upper triangular form of a truncated system") {
  std::mt19937 rng(5);
  const BlockAlgebra B({1, 2});
  const Correspondence e = random_corr(rng, B, B, 2);
  const Correspondence ee = tensor(e, e);
  std::map<std::pair<int, int>, BilinearMap> w;
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 3; ++j) w[{i, j}] = random_bilinear_unitary(rng, ee);
  const TruncatedSystem sys = truncated_from_unitaries(e, 3, w, tol);
  CHECK(validate(sys, tol).passed());
  const UpperTriangular ut = upper_triangular_form(sys, tol);
  CHECK(validate(ut.normalized, tol).passed());
  CHECK(morphism_residual(sys, ut.normalized, ut.iso) < 1e-12);
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= i; ++j)
      CHECK(residual_check("", ut.normalized.map(unit_index(3, i), unit_index(3, j)) - BilinearMap::identity(ee), 0)
                .residual < 1e-14);
  // A wrong identification is detected.
  auto bad = ut.iso;
  bad[{1, 1, 0}] = bad[{1, 1, 0}].scaled(cplx(0, 1)) + BilinearMap::identity(ee).scaled(0.1);
  CHECK(morphism_residual(sys, ut.normalized, bad) > 1e-3);
}

TEST_CASE("product systems from swap flips") {
  const FlipData fd = swap_flips(2, 2);
  const TruncatedSystem sys = product_from_flips(fd, GridCap({2, 2}), tol);
  const auto rep = validate(sys, tol);
  CHECK(rep.passed());
  CHECK(rep.max_residual() < 1e-10);
  const BilinearMap& u12 = sys.map({1, 0}, {0, 1});
  const BilinearMap& u21 = sys.map({0, 1}, {1, 0});
  CHECK(residual_check("", compose(u12.adjoint(), u21) - fd.flip(1, 2), 0).residual < 1e-12);
  CHECK(residual_check("", sys.map({0, 0}, {2, 1}) - BilinearMap::identity(sys.member({2, 1})), 0).residual == 0.0);

  FlipData fu = fd;
  fu.vectors = {hvec(hilbert(2), basis(2, 0)), hvec(hilbert(2), basis(2, 0))};
  const TruncatedSystem su = product_from_flips(fu, GridCap({2, 2}), tol);
  CHECK(validate(su, tol).passed());

  const TruncatedSystem s3 = product_from_flips(swap_flips(3, 2), GridCap({1, 1, 1}), tol);
  CHECK(validate(s3, tol).passed());
}

TEST_CASE("product systems from random flips over C + M_2") {
  std::mt19937 rng(8);
  const BlockAlgebra B({1, 2});
  const Correspondence e1 = random_corr(rng, B, B, 2), e2 = e1;
  FlipData fd;
  fd.spaces = {e1, e2};
  const Correspondence a = tensor(e2, e1), b = tensor(e1, e2);
  std::vector<CMatrix> blocks;
  for (int k = 0; k < 2; ++k)
    for (int l = 0; l < 2; ++l) {
      REQUIRE(a.dim(k, l) == b.dim(k, l));
      blocks.push_back(random_unitary(rng, a.dim(k, l)));
    }
  fd.flips[{1, 2}] = BilinearMap(a, b, blocks);
  const TruncatedSystem sys = product_from_flips(fd, GridCap({2, 2}), tol);
  const auto rep = validate(sys, tol);
  CHECK(rep.passed());
  CHECK(rep.max_residual() < 1e-10);
}

TEST_CASE("product_from_flips errors") {
  CHECK_THROWS_AS(product_from_flips(flip_example(), GridCap({1, 1, 1}), tol), Error);
  try {
    product_from_flips(flip_example(), GridCap({1, 1, 1}), tol);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ExchangeConditionViolated);
  }
  FlipData fd = identity_flips(2, hilbert(2));
  fd.vectors = {hvec(hilbert(2), basis(2, 0)), hvec(hilbert(2), basis(2, 1))};
  try {
    product_from_flips(fd, GridCap({1, 1}), tol);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnitConstraintViolated);
  }
}

TEST_CASE("spanned subsystem recursion agrees with the composition span") {
  std::mt19937 rng(21);
  const BlockAlgebra B({1, 2});
  for (int trial = 0; trial < 3; ++trial) {
    const Correspondence e = random_corr(rng, B, B, 2);
    if (e.is_zero()) continue;
    const CorrVector xi = random_vector(rng, e);
    const IsoResult iso = iso_with_constraints(tensor(e, e), tensor(e, e), {tensor(xi, xi)}, {tensor(xi, xi)}, tol);
    REQUIRE(iso.exists);
    FlipData fd;
    fd.spaces = {e, e};
    fd.flips[{1, 2}] = *iso.witness;
    fd.vectors = {xi, xi};
    const TruncatedSystem sys = product_from_flips(fd, GridCap({2, 2}), tol);
    const SpannedResult sp = spanned_subsystem(sys, tol);
    CHECK(validate(sp.system, tol).passed());
    for (const auto& n : sys.cap.indices()) {
      const SubCorrespondence direct = spanned_by_compositions(sys, n, tol);
      CHECK(is_contained(direct, sp.spaces.at(n), tol));
      CHECK(is_contained(sp.spaces.at(n), direct, tol));
      if (!is_zero(n)) {
        const SubCorrespondence g = generated_sub(sys.member(n), {sys.vector(n)}, tol);
        CHECK(is_contained(g, sp.spaces.at(n), tol));
      }
    }
  }
}

TEST_CASE("product subsystem solver") {
  // Bhat's data at C = 6 with the product identification H_2 = H_1 (x) H_1.
  const double C = 6.0;
  const Correspondence h = hilbert(3);
  CVector dvec = CVector::Zero(3);
  dvec(0) = std::sqrt(2.0 / C);
  Eigen::MatrixXd D(3, 3);
  D << 9, 3 * std::sqrt(3.0), 0, -std::sqrt(3.0), 3, 0, -std::sqrt(6.0), 3 * std::sqrt(2.0), 0;
  D /= 6 * C;
  CVector dd(9);
  for (int x = 0; x < 3; ++x)
    for (int y = 0; y < 3; ++y) dd(x * 3 + y) = D(x, y);
  FlipData fd;
  fd.spaces = {h};
  TruncatedSystem sys = product_from_flips(fd, GridCap({2}), tol);
  sys.unit.emplace();
  (*sys.unit)[{0}] = CorrVector::unit(C1);
  (*sys.unit)[{1}] = hvec(h, dvec);
  (*sys.unit)[{2}] = hvec(sys.member({2}), dd);
  const SubsystemSolution sol = product_subsystem_solver(sys, tol);
  CHECK(sol.kernel_dim == 0);

  // A unit inside a proper subspace leaves a kernel.
  (*sys.unit)[{1}] = hvec(h, basis(3, 0));
  (*sys.unit)[{2}] = hvec(sys.member({2}), basis(9, 0));
  CHECK(product_subsystem_solver(sys, tol).kernel_dim == 2);

  FlipData fu = swap_flips(2, 2);
  fu.vectors = {hvec(hilbert(2), basis(2, 0)), hvec(hilbert(2), basis(2, 0))};
  const SubsystemSolution s2 = product_subsystem_solver(product_from_flips(fu, GridCap({1, 1}), tol), tol);
  CHECK(s2.kernel_dim == 2);
  CHECK(s2.kept[0].sub.total_mult() == 1);

  // Depth limits.
  CHECK_THROWS_AS(product_subsystem_solver(product_from_flips(fu, GridCap({1, 0}), tol), tol), Error);
  FlipData f3 = swap_flips(3, 2);
  f3.vectors.assign(3, hvec(hilbert(2), basis(2, 0)));
  CHECK_THROWS_AS(product_subsystem_solver(product_from_flips(f3, GridCap({1, 1, 1}), tol), tol), Error);
}
