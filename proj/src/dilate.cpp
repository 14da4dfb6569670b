#include "dilkit/dilate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dilkit {

// ---------------------------------------------------------------------------
// Triples

CMatrix DilationTriple::theta(const Index& n, const CMatrix& a) const {
  if (static_cast<int>(n.size()) != d()) throw Error(ErrorKind::DimensionMismatch, "theta: index length");
  CMatrix x = a;
  for (int i = 0; i < d(); ++i)
    for (int r = 0; r < n[i]; ++r) x = generators[i].apply(x);
  return x;
}

namespace {

constexpr std::size_t kBasisLimit = 36;

CMatrix random_element(std::mt19937& rng, const BlockAlgebra& a) {
  std::normal_distribution<double> nd(0.0, 1.0);
  CMatrix x = CMatrix::Zero(a.total_dim(), a.total_dim());
  for (int k = 0; k < a.num_blocks(); ++k)
    for (int r = 0; r < a.block_dim(k); ++r)
      for (int s = 0; s < a.block_dim(k); ++s) x(a.offset(k) + r, a.offset(k) + s) = cplx(nd(rng), nd(rng));
  return x / x.norm();
}

// Elements of Q A Q to test identities on: all matrix units when there are
// few, otherwise normalized random samples.
std::vector<CMatrix> probe_elements(const BlockAlgebra& a, const std::optional<CMatrix>& q, unsigned seed,
                                    int samples = 6) {
  std::vector<CMatrix> out;
  std::size_t units = 0;
  for (int n : a.block_dims()) units += static_cast<std::size_t>(n) * n;
  if (!q && units <= kBasisLimit) return a.matrix_units();
  std::mt19937 rng(seed);
  for (int i = 0; i < samples; ++i) {
    CMatrix x = random_element(rng, a);
    if (q) x = (*q) * x * (*q);
    out.push_back(x);
  }
  return out;
}

std::vector<Index> nonzero_indices(const GridCap& cap) {
  std::vector<Index> out;
  for (const auto& n : cap.indices())
    if (!is_zero(n)) out.push_back(n);
  return out;
}

}  // namespace

TripleCheck check_triple(const DilationTriple& t, const Tolerance& tol, unsigned seed) {
  TripleCheck c;
  const BlockAlgebra& A = t.ambient;
  c.projection = A.contains(t.p, tol) && approx_equal(t.p, t.p.adjoint(), tol) && approx_equal(t.p * t.p, t.p, tol);
  const auto xs = probe_elements(A, t.interior, seed);
  for (const auto& g : t.generators) {
    for (const auto& a : xs)
      for (const auto& b : xs) c.multiplicativity = std::max(c.multiplicativity, op_norm(g.apply(a * b) - g.apply(a) * g.apply(b)));
  }
  for (int i = 0; i < t.d(); ++i)
    for (int j = i + 1; j < t.d(); ++j)
      for (const auto& a : xs)
        c.commutation = std::max(c.commutation, op_norm(t.generators[i].apply(t.generators[j].apply(a)) -
                                                        t.generators[j].apply(t.generators[i].apply(a))));
  c.passed = c.projection && c.multiplicativity <= tol.eq_rel && c.commutation <= tol.eq_rel;
  return c;
}

const char* status_name(Status s) {
  switch (s) {
    case Status::Pass: return "PASS";
    case Status::Fail: return "FAIL";
    case Status::Unchecked: return "UNCHECKED";
  }
  return "?";
}

std::optional<ClassCheck> Classification::first_failure(const std::string& predicate) const {
  for (const auto& c : checks)
    if (c.predicate == predicate && c.status == Status::Fail) return c;
  return std::nullopt;
}

bool Classification::any_unchecked() const {
  return std::any_of(checks.begin(), checks.end(), [](const ClassCheck& c) { return c.status == Status::Unchecked; });
}

Corner corner_of(const BlockAlgebra& a, const CMatrix& p, const Tolerance& tol) {
  std::vector<int> dims;
  std::vector<CMatrix> bases;
  std::vector<int> blocks;
  for (int k = 0; k < a.num_blocks(); ++k) {
    const int n = a.block_dim(k), o = a.offset(k);
    const CMatrix pk = p.block(o, o, n, n);
    CMatrix basis = range_basis(pk, tol);
    // Diagonal projections keep the coordinate basis.
    if (pk.isDiagonal(tol.eq_rel)) {
      std::vector<int> keep;
      for (int i = 0; i < n; ++i)
        if (std::abs(pk(i, i)) > 0.5) keep.push_back(i);
      if (static_cast<Eigen::Index>(keep.size()) == basis.cols()) {
        basis = CMatrix::Zero(n, static_cast<Eigen::Index>(keep.size()));
        for (std::size_t j = 0; j < keep.size(); ++j) basis(keep[j], static_cast<Eigen::Index>(j)) = 1.0;
      }
    }
    if (basis.cols() == 0) continue;
    dims.push_back(static_cast<int>(basis.cols()));
    bases.push_back(basis);
    blocks.push_back(k);
  }
  if (dims.empty()) throw Error(ErrorKind::InvalidInput, "corner of a zero projection");
  Corner c{BlockAlgebra(dims), CMatrix::Zero(a.total_dim(), 0)};
  c.embed = CMatrix::Zero(a.total_dim(), c.algebra.total_dim());
  for (std::size_t b = 0; b < dims.size(); ++b)
    c.embed.block(a.offset(blocks[b]), c.algebra.offset(static_cast<int>(b)), a.block_dim(blocks[b]), dims[b]) = bases[b];
  return c;
}

LinearMapData corner_map(const DilationTriple& t, const Index& n, const Tolerance& tol) {
  const Corner c = corner_of(t.ambient, t.p, tol);
  return LinearMapData::from_function(c.algebra, c.algebra,
                                      [&](const CMatrix& b) { return c.to_corner(t.theta(n, c.from_corner(b))); });
}

Classification classify(const DilationTriple& t, const GridCap& cap, const Tolerance& tol) {
  if (cap.d != t.d()) throw Error(ErrorKind::DimensionMismatch, "classify: cap dimension differs from d");
  Classification cl;
  const double eps = tol.eq_rel;
  const CMatrix one = t.ambient.unit();
  const CMatrix& p = t.p;
  const Corner corner = corner_of(t.ambient, p, tol);
  const auto units = corner.algebra.matrix_units();
  auto record = [&](const char* pred, const Index& m, const Index& n, bool in_depth, double r) {
    ClassCheck c{pred, m, n, r, Status::Unchecked};
    if (in_depth) c.status = r <= eps ? Status::Pass : Status::Fail;
    cl.checks.push_back(c);
  };
  const auto idx = nonzero_indices(cap);
  std::map<Index, CMatrix> thp, thq;  // theta_n(p), theta_n(1 - p)
  for (const auto& n : idx) {
    thp[n] = t.theta(n, p);
    thq[n] = t.theta(n, one - p);
    const bool ok = t.within_depth(n);
    const Index none;
    record("markov", none, n, ok, op_norm(p * thp[n] * p - p));
    record("increasing", none, n, ok, op_norm(thp[n] * p - p));
    record("strong", none, n, ok, op_norm(thq[n] * p));
  }
  for (const auto& m : idx)
    for (const auto& n : idx) {
      const Index mn = add(m, n);
      if (!cap.contains(mn)) continue;
      const bool ok = t.within_depth(mn);
      double semi = 0.0;
      for (const auto& b : units) {
        const CMatrix x = corner.from_corner(b);
        const CMatrix sn = p * t.theta(n, x) * p;
        semi = std::max(semi, op_norm(p * t.theta(m, sn) * p - p * t.theta(mn, x) * p));
      }
      record("semigroup", m, n, ok, semi);
      record("good", m, n, ok, op_norm(thp[mn] * thq[n] * p));
      const CMatrix xi_m = thp[m] * p, xi_n = thp[n] * p;
      record("unit", m, n, ok, op_norm(t.theta(n, xi_m) * xi_n - thp[mn] * p));
    }
  auto holds = [&](const char* pred) {
    return std::none_of(cl.checks.begin(), cl.checks.end(),
                        [&](const ClassCheck& c) { return c.predicate == pred && c.status == Status::Fail; });
  };
  const bool projection = approx_equal(p * p, p, tol) && approx_equal(p, p.adjoint(), tol) && t.ambient.contains(p, tol);
  cl.is_dilation = holds("semigroup");
  cl.is_weak = cl.is_dilation && projection;
  cl.is_strong = cl.is_weak && holds("strong");
  cl.is_good = cl.is_weak && holds("good");
  cl.is_markov_dilated = cl.is_weak && holds("markov");
  cl.p_increasing = holds("increasing");
  for (std::size_t i = 0; i < cl.checks.size(); ++i)
    if (cl.checks[i].predicate == "good" && cl.checks[i].status != cl.checks[i + 1].status) cl.good_matches_unit = false;
  return cl;
}

// ---------------------------------------------------------------------------
// Superproduct system of a triple

bool Superproduct::is_product() const {
  return std::all_of(surjective.begin(), surjective.end(), [](const auto& kv) { return kv.second; });
}

Superproduct superproduct_of_triple(const DilationTriple& t, const GridCap& cap, const Tolerance& tol) {
  if (cap.d != t.d()) throw Error(ErrorKind::DimensionMismatch, "superproduct_of_triple: cap dimension differs from d");
  Superproduct out;
  out.corner = corner_of(t.ambient, t.p, tol);
  const Corner& cor = out.corner;
  const BlockAlgebra& A = t.ambient;
  const BlockAlgebra& B = cor.algebra;
  const CMatrix& J = cor.embed;
  const int nb = B.total_dim();

  // For every 1-dimensional piece of p in block k, its first embedding column.
  std::vector<std::pair<int, int>> anchors;  // (ambient block, column of J)
  for (int b = 0; b < B.num_blocks(); ++b) {
    const int col = B.offset(b);
    for (int k = 0; k < A.num_blocks(); ++k)
      if (J.block(A.offset(k), col, A.block_dim(k), 1).norm() > 0) anchors.push_back({k, col});
  }

  TruncatedSystem& sys = out.system;
  sys.kind = SystemKind::Super;
  sys.cap = cap;
  sys.algebra = B;
  sys.unit.emplace();
  std::map<Index, std::vector<CMatrix>> gens;          // dense right-module generators of E_n
  std::map<Index, std::vector<CorrVector>> gen_images;  // their canonical images

  for (const auto& n : cap.indices()) {
    if (is_zero(n)) {
      sys.members[n] = Correspondence::trivial(B);
      (*sys.unit)[n] = CorrVector::unit(B);
      continue;
    }
    const CMatrix tp = t.theta(n, t.p);
    std::vector<CMatrix> xs;
    for (const auto& [k, col] : anchors) {
      const int o = A.offset(k), m = A.block_dim(k);
      const CMatrix basis = range_basis(tp.block(o, o, m, m), tol);
      for (Eigen::Index f = 0; f < basis.cols(); ++f) {
        CMatrix x = CMatrix::Zero(A.total_dim(), A.total_dim());
        x.block(o, 0, m, A.total_dim()) = basis.col(f) * J.col(col).adjoint();
        xs.push_back(std::move(x));
      }
    }
    const std::size_t ngen = xs.size();
    xs.push_back(tp * t.p);  // xi_n
    struct Split {
      Index m, r;
      std::size_t first;
    };
    std::vector<Split> splits;
    for (const auto& [m, gm] : gens) {
      if (is_zero(m)) continue;
      Index r = n;
      bool fits = true;
      for (std::size_t i = 0; i < r.size(); ++i) {
        r[i] -= m[i];
        fits = fits && r[i] >= 0;
      }
      if (!fits || is_zero(r)) continue;
      splits.push_back({m, r, xs.size()});
      for (const auto& x : gm)
        for (const auto& y : gens.at(r)) xs.push_back(t.theta(r, x) * y);
    }
    const int count = static_cast<int>(xs.size());
    CMatrix G(A.total_dim(), static_cast<Eigen::Index>(count) * nb);
    for (int i = 0; i < count; ++i) G.middleCols(static_cast<Eigen::Index>(i) * nb, nb) = xs[i] * J;
    CMatrix last_a, last_m;
    const GramPresentation gp = GramPresentation::from_function(B, B, count, [&](int i, int j, const CMatrix& a) {
      if (last_a.size() == 0 || last_a != a) {
        last_a = a;
        last_m = G.adjoint() * t.theta(n, cor.from_corner(a)) * G;
      }
      return CMatrix(last_m.block(static_cast<Eigen::Index>(i) * nb, static_cast<Eigen::Index>(j) * nb, nb, nb));
    });
    const Canonical can = canonicalize(gp, tol);
    sys.members[n] = can.corr;
    (*sys.unit)[n] = can.images[ngen];
    gens[n].assign(xs.begin(), xs.begin() + static_cast<long>(ngen));
    gen_images[n].assign(can.images.begin(), can.images.begin() + static_cast<long>(ngen));

    for (const auto& sp : splits) {
      const Correspondence src = tensor(sys.member(sp.m), sys.member(sp.r));
      const auto& gm = gen_images.at(sp.m);
      const auto& gr = gen_images.at(sp.r);
      std::vector<CMatrix> blocks;
      for (int k = 0; k < B.num_blocks(); ++k)
        for (int l = 0; l < B.num_blocks(); ++l) {
          const Eigen::Index nn = static_cast<Eigen::Index>(B.block_dim(k)) * B.block_dim(l);
          const Eigen::Index pairs = static_cast<Eigen::Index>(gm.size() * gr.size());
          CMatrix X(src.dim(k, l), pairs * nn), Y(can.corr.dim(k, l), pairs * nn);
          Eigen::Index c = 0;
          for (std::size_t i = 0; i < gm.size(); ++i)
            for (std::size_t j = 0; j < gr.size(); ++j, ++c) {
              X.middleCols(c * nn, nn) = tensor(gm[i], gr[j]).block(k, l);
              Y.middleCols(c * nn, nn) = can.images[sp.first + c].block(k, l);
            }
          CMatrix V = CMatrix::Zero(Y.rows(), X.rows());
          if (X.rows() > 0 && X.cols() > 0) {
            Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(X);
            V = Y * cod.pseudoInverse();
          }
          if (X.cols() > 0) out.product_consistency = std::max(out.product_consistency, (V * X - Y).norm());
          blocks.push_back(std::move(V));
        }
      sys.structure[{sp.m, sp.r}] = BilinearMap(src, can.corr, std::move(blocks));
    }
  }
  for (const auto& m : cap.indices())
    for (const auto& n : cap.indices()) {
      const Index mn = add(m, n);
      if (!cap.contains(mn)) continue;
      if (is_zero(m) || is_zero(n)) {
        sys.structure[{m, n}] = BilinearMap::identity(sys.member(mn));
        continue;
      }
      out.surjective[{m, n}] = rank_deficit(sys.map(m, n), tol) == 0;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Unitalization and compression

DilationTriple unitalize_dilation(const DilationTriple& t, const Tolerance& tol) {
  const CMatrix one = t.ambient.unit();
  for (const auto& n : nonzero_indices(GridCap::uniform(t.d(), 2))) {
    if (!t.within_depth(n)) continue;
    if (op_norm(t.theta(n, one - t.p) * t.p) > tol.eq_rel)
      throw Error(ErrorKind::NotStrong, "unitalize_dilation: theta_n(1 - p) p != 0 at " + index_string(n));
  }
  const Unitalization u = unitalize_algebra(t.ambient);
  DilationTriple out;
  out.ambient = u.algebra;
  for (const auto& g : t.generators) out.generators.push_back(unitalize_cpmap(g, tol));
  out.p = u.embed(t.p) + u.new_unit;
  if (t.interior) out.interior = u.embed(*t.interior) + u.new_unit;
  out.depth = t.depth;
  return out;
}

namespace {

void require_above(const BlockAlgebra& a, const CMatrix& P, const CMatrix& p, const Tolerance& tol) {
  if (!a.contains(P, tol) || !approx_equal(P * P, P, tol) || !approx_equal(P, P.adjoint(), tol))
    throw Error(ErrorKind::NotAProjection, "P is not a projection in the ambient algebra");
  if (!approx_equal(P * p, p, tol)) throw Error(ErrorKind::NotAboveP, "P does not dominate p");
}

}  // namespace

CompressionResult is_compressing(const DilationTriple& t, const CMatrix& P, const GridCap& cap, const Tolerance& tol) {
  require_above(t.ambient, P, t.p, tol);
  CompressionResult res;
  const Corner c = corner_of(t.ambient, P, tol);
  std::vector<CMatrix> xs;
  for (const auto& b : probe_elements(c.algebra, std::nullopt, 7)) {
    CMatrix x = c.from_corner(b);
    if (t.interior) x = (*t.interior) * x * (*t.interior);
    xs.push_back(x);
  }
  for (const auto& n : nonzero_indices(cap)) {
    if (!t.within_depth(n)) continue;
    double comm = 0.0, mult = 0.0;
    for (const auto& a : xs) {
      const CMatrix ta = t.theta(n, a);
      comm = std::max(comm, op_norm(P * ta - ta * P));
      for (const auto& b : xs) {
        const CMatrix lhs = P * t.theta(n, a * b) * P;
        const CMatrix rhs = P * ta * P * t.theta(n, b) * P;
        mult = std::max(mult, op_norm(lhs - rhs));
      }
    }
    if (comm > tol.eq_rel && !res.witness) res.witness = n;
    res.commutator = std::max(res.commutator, comm);
    res.multiplicativity = std::max(res.multiplicativity, mult);
  }
  res.compressing = !res.witness;
  return res;
}

DilationTriple compress(const DilationTriple& t, const CMatrix& P, const Tolerance& tol) {
  require_above(t.ambient, P, t.p, tol);
  const Corner c = corner_of(t.ambient, P, tol);
  DilationTriple out;
  out.ambient = c.algebra;
  for (const auto& g : t.generators) {
    std::vector<CMatrix> kraus;
    for (const auto& k : g.kraus()) kraus.push_back(c.embed.adjoint() * k * c.embed);
    out.generators.emplace_back(c.algebra, c.algebra, std::move(kraus), tol);
  }
  out.p = c.to_corner(t.p);
  if (t.interior) out.interior = c.to_corner(*t.interior);
  out.depth = t.depth;
  return out;
}

// ---------------------------------------------------------------------------
// Two-parameter Markov dilation

TwoParamDilation two_param_markov_dilation(const CPMap& t1, const CPMap& t2, const GridCap& cap, const Tolerance& tol) {
  if (cap.d != 2) throw Error(ErrorKind::DimensionMismatch, "two_param_markov_dilation: cap must be over N_0^2");
  require_same(t1.domain(), t2.domain(), "two_param_markov_dilation: algebras differ");
  if (!is_markov(t1, tol) || !is_markov(t2, tol)) throw Error(ErrorKind::NotMarkov, "two_param_markov_dilation: maps must be unital");
  if (!maps_approx_equal(compose(t1, t2), compose(t2, t1), tol))
    throw Error(ErrorKind::NotCommuting, "two_param_markov_dilation: maps do not commute");
  const BlockAlgebra& B = t1.domain();
  TwoParamDilation out;
  const GNSResult g1 = gns(t1, tol), g2 = gns(t2, tol);
  out.gns1 = g1.corr;
  out.gns2 = g2.corr;
  const DirectSum ds = direct_sum(g1.corr, g2.corr);
  const Correspondence& E = ds.sum;
  const CorrVector xi1 = ds.inj1.apply(g1.cyclic), xi2 = ds.inj2.apply(g2.cyclic);
  const Correspondence EE = tensor(E, E);
  const CorrVector x21 = tensor(xi2, xi1), x12 = tensor(xi1, xi2);
  out.f21 = generated_sub(EE, {x21}, tol);
  out.f12 = generated_sub(EE, {x12}, tol);
  const IMatrix m21 = tensor(g2.corr, g1.corr).mult(), m12 = tensor(g1.corr, g2.corr).mult();
  out.f21_strict = (out.f21.sub.mult().array() < m21.array()).any();
  out.f12_strict = (out.f12.sub.mult().array() < m12.array()).any();

  const IsoResult phi = iso_with_constraints(out.f21.sub, out.f12.sub, {out.f21.inclusion.apply_adjoint(x21)},
                                             {out.f12.inclusion.apply_adjoint(x12)}, tol);
  if (!phi.exists) throw Error(ErrorKind::NotCommuting, "two_param_markov_dilation: xi_2 (.) xi_1 and xi_1 (.) xi_2 have different Gram data");
  const BilinearMap& f = *phi.witness;
  const BilinearMap p21 = out.f21.projection(), p12 = out.f12.projection();
  const BilinearMap flip = (compose(out.f12.inclusion, compose(f, out.f21.inclusion.adjoint())) +
                            compose(out.f21.inclusion, compose(f.adjoint(), out.f12.inclusion.adjoint())) +
                            BilinearMap::identity(EE) - p21 - p12)
                               .materialize();
  out.flips.spaces = {E, E};
  out.flips.flips[{1, 2}] = flip;
  out.flips.vectors = {xi1, xi2};
  out.flip_exchange = (flip.apply(x21) - x12).norm();
  out.system = product_from_flips(out.flips, cap, tol);

  const Index e1{1, 0}, e2{0, 1};
  out.flip_recovery = residual_check("", compose(out.system.map(e1, e2).adjoint(), out.system.map(e2, e1)) - flip, 0.0).residual;
  const GridCap level({std::min(1, cap.cap[0]), std::min(1, cap.cap[1])});
  const TruncatedSystem low = restrict_to(out.system, level);
  out.spanned = spanned_subsystem(low, tol);
  if (B.num_blocks() == 1 && level.cap == Index{1, 1}) out.solver = product_subsystem_solver(low, tol);
  return out;
}

// ---------------------------------------------------------------------------
// Row contractions

RowContraction RowContraction::make(std::vector<CMatrix> c, const Tolerance& tol) {
  if (c.empty()) throw Error(ErrorKind::InvalidInput, "row contraction needs at least one operator");
  RowContraction rc;
  rc.dim_g = static_cast<int>(c[0].rows());
  CMatrix s = CMatrix::Zero(rc.dim_g, rc.dim_g);
  for (const auto& x : c) {
    if (x.rows() != rc.dim_g || x.cols() != rc.dim_g) throw Error(ErrorKind::DimensionMismatch, "row contraction: operators must be square of one size");
    require_finite(x, "row contraction operator");
    s += x.adjoint() * x;
  }
  if (op_norm(s) > 1.0 + tol.eq_rel) throw Error(ErrorKind::NotRowContractive, "sum c_i* c_i exceeds the identity");
  rc.c = std::move(c);
  return rc;
}

CPMap RowContraction::map() const {
  const BlockAlgebra g({dim_g});
  return CPMap(g, g, c);
}

TruncatedCoisometricDilation dilate_row_contraction(const RowContraction& rc, int levels, const Tolerance& tol) {
  if (levels < 1) throw Error(ErrorKind::InvalidInput, "dilate_row_contraction: need at least one level");
  TruncatedCoisometricDilation out;
  const int g = rc.dim_g, d = static_cast<int>(rc.c.size());
  out.dim_g = g;
  out.d = d;
  out.levels = levels;
  // A: G^d -> G, (x_i) -> sum c_i* x_i, and the defect of A* A on G^d.
  CMatrix A(g, static_cast<Eigen::Index>(d) * g);
  for (int i = 0; i < d; ++i) A.middleCols(static_cast<Eigen::Index>(i) * g, g) = rc.c[i].adjoint();
  const CMatrix defect_sq = CMatrix::Identity(A.cols(), A.cols()) - A.adjoint() * A;
  const CMatrix defect = psd_sqrt(defect_sq);
  // Absolute cut: the defect has norm at most 1, and rounding in an exact
  // coisometry must not produce spurious defect directions.
  const CMatrix R = range_basis_above(defect_sq, tol.rank_rel);
  out.defect_dim = static_cast<int>(R.cols());
  std::vector<long> size(levels + 1), off(levels + 2);
  off[0] = 0;
  size[0] = g;
  long width = out.defect_dim;
  for (int n = 1; n <= levels; ++n) {
    size[n] = width;
    width *= d;
  }
  for (int n = 0; n <= levels; ++n) off[n + 1] = off[n] + size[n];
  out.total = static_cast<int>(off[levels + 1]);
  const CMatrix RD = R.adjoint() * defect;
  for (int i = 0; i < d; ++i) {
    CMatrix V = CMatrix::Zero(out.total, out.total);
    V.topLeftCorner(g, g) = rc.c[i].adjoint();
    V.block(off[1], 0, size[1], g) = RD.middleCols(static_cast<Eigen::Index>(i) * g, g);
    for (int n = 1; n < levels; ++n)
      for (long x = 0; x < size[n]; ++x) V(off[n + 1] + i * size[n] + x, off[n] + x) = 1.0;
    out.w.push_back(V.adjoint());
  }
  out.p = CMatrix::Zero(out.total, out.total);
  out.p.topLeftCorner(g, g).setIdentity();
  out.interior = CMatrix::Zero(out.total, out.total);
  out.interior.topLeftCorner(off[levels], off[levels]).setIdentity();
  return out;
}

double TruncatedCoisometricDilation::interior_residual() const {
  double r = 0.0;
  const CMatrix id = CMatrix::Identity(total, total);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      CMatrix x = w[i] * w[j].adjoint();
      if (i == j) x -= id;
      r = std::max(r, op_norm(x * interior));
    }
  return r;
}

double TruncatedCoisometricDilation::corner_residual(const RowContraction& rc) const {
  double r = 0.0;
  for (int i = 0; i < d; ++i) {
    CMatrix c = CMatrix::Zero(total, total);
    c.topLeftCorner(dim_g, dim_g) = rc.c[i];
    r = std::max(r, (p * w[i] * p - w[i] * p).cwiseAbs().maxCoeff() + (w[i] * p - c).cwiseAbs().maxCoeff());
  }
  return r;
}

DilationTriple TruncatedCoisometricDilation::triple(const std::optional<CMatrix>& q) const {
  DilationTriple t;
  t.ambient = BlockAlgebra({total});
  t.generators.emplace_back(t.ambient, t.ambient, w);
  t.p = q ? *q : p;
  t.interior = interior;
  t.depth = levels - 1;
  return t;
}

// ---------------------------------------------------------------------------
// CP-semigroups of subproduct systems

SubproductSemigroup semigroup_from_subproduct(const TruncatedSystem& sys, const Tolerance& tol) {
  (void)tol;
  if (sys.kind != SystemKind::Sub) throw Error(ErrorKind::InvalidInput, "semigroup_from_subproduct: needs a subproduct system");
  if (sys.algebra != BlockAlgebra({1}))
    throw Error(ErrorKind::InvalidInput, "semigroup_from_subproduct: only systems of Hilbert spaces are supported");
  // The members must die out inside the cap: some degree layer is entirely
  // zero, so treating out-of-cap members as zero is consistent.
  int top = 0;
  for (const auto& [n, e] : sys.members)
    if (e.total_mult() > 0) top = std::max(top, degree(n));
  bool layer = false, layer_zero = true;
  for (const auto& [n, e] : sys.members)
    if (degree(n) == top + 1) {
      layer = true;
      layer_zero = layer_zero && e.total_mult() == 0;
    }
  if (!layer || !layer_zero)
    throw Error(ErrorKind::UnsupportedSupport, "semigroup_from_subproduct: support reaches the edge of the cap");

  SubproductSemigroup s;
  s.cap = sys.cap;
  for (const auto& n : sys.cap.indices()) {
    s.offset[n] = s.dim;
    s.mult[n] = sys.member(n).total_mult();
    s.dim += s.mult[n];
  }
  s.algebra = BlockAlgebra({static_cast<int>(s.dim)});
  for (const auto& t : sys.cap.indices()) {
    const long dt = s.mult[t];
    std::vector<CMatrix> kraus;
    for (long j = 0; j < dt; ++j) {
      // L_j x = v_t(x (.) f_j); v_t on E_r (.) E_t is w*_{r,t}.
      CMatrix L = CMatrix::Zero(s.dim, s.dim);
      for (const auto& r : sys.cap.indices()) {
        const Index rt = add(r, t);
        if (!sys.cap.contains(rt) || s.mult[r] == 0 || s.mult[rt] == 0) continue;
        const CMatrix w = sys.map(r, t).block(0, 0);  // (d_r d_t) x d_{rt}
        for (long x = 0; x < s.mult[r]; ++x)
          L.block(s.offset[rt], s.offset[r] + x, s.mult[rt], 1) = w.row(x * dt + j).adjoint();
      }
      kraus.push_back(L.adjoint());
    }
    s.maps.emplace(t, CPMap(s.algebra, s.algebra, std::move(kraus)));
  }
  return s;
}

SemigroupCheck check_subproduct_semigroup(const SubproductSemigroup& s, const Tolerance& tol) {
  SemigroupCheck out;
  const auto idx = s.cap.indices();
  std::mt19937 rng(3);
  std::vector<CMatrix> probes;
  for (int i = 0; i < 4; ++i) probes.push_back(random_element(rng, s.algebra));
  for (const auto& m : idx)
    for (const auto& n : idx) {
      const Index mn = add(m, n);
      if (!s.cap.contains(mn)) continue;
      // Compare the Kraus-generated maps exactly through their Choi data on
      // small algebras, otherwise on random elements.
      for (const auto& a : probes)
        out.semigroup_residual =
            std::max(out.semigroup_residual, op_norm(s.at(m).apply(s.at(n).apply(a)) - s.at(mn).apply(a)));
    }
  for (const auto& n : idx) {
    const auto& k = s.at(n).kraus();
    CMatrix stack(static_cast<Eigen::Index>(s.dim) * s.dim, static_cast<Eigen::Index>(k.size()));
    for (std::size_t i = 0; i < k.size(); ++i) stack.col(i) = Eigen::Map<const CVector>(k[i].data(), k[i].size());
    const long rank = k.empty() ? 0 : static_cast<long>(numerical_rank(stack, tol));
    if (rank != s.mult.at(n)) out.multiplicities_match = false;
  }
  return out;
}

}  // namespace dilkit
