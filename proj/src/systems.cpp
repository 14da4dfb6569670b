#include "dilkit/systems.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

namespace dilkit {

// ---------------------------------------------------------------------------
// Indices

GridCap::GridCap(Index c) : d(static_cast<int>(c.size())), cap(std::move(c)) {
  if (d < 1) throw Error(ErrorKind::InvalidInput, "GridCap: d must be at least 1");
  for (int v : cap)
    if (v < 0) throw Error(ErrorKind::InvalidInput, "GridCap: negative bound");
}

bool GridCap::contains(const Index& n) const {
  if (static_cast<int>(n.size()) != d) return false;
  for (int i = 0; i < d; ++i)
    if (n[i] < 0 || n[i] > cap[i]) return false;
  return true;
}

std::vector<Index> GridCap::indices() const {
  std::vector<Index> out;
  Index n(d, 0);
  for (;;) {
    out.push_back(n);
    int i = d - 1;
    while (i >= 0 && n[i] == cap[i]) n[i--] = 0;
    if (i < 0) break;
    ++n[i];
  }
  std::stable_sort(out.begin(), out.end(), [](const Index& a, const Index& b) { return degree(a) < degree(b); });
  return out;
}

Index zero_index(int d) { return Index(d, 0); }

Index unit_index(int d, int i) {
  Index n(d, 0);
  n.at(i - 1) = 1;
  return n;
}

Index add(const Index& a, const Index& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::DimensionMismatch, "index lengths differ");
  Index c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
  return c;
}

bool is_zero(const Index& n) {
  return std::all_of(n.begin(), n.end(), [](int v) { return v == 0; });
}

int degree(const Index& n) {
  int s = 0;
  for (int v : n) s += v;
  return s;
}

std::string index_string(const Index& n) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < n.size(); ++i) os << (i ? "," : "") << n[i];
  os << ')';
  return os.str();
}

const char* system_kind_name(SystemKind k) {
  switch (k) {
    case SystemKind::Sub: return "SUB";
    case SystemKind::Super: return "SUPER";
    case SystemKind::Product: return "PRODUCT";
  }
  return "?";
}

const Correspondence& TruncatedSystem::member(const Index& n) const {
  auto it = members.find(n);
  if (it == members.end()) throw Error(ErrorKind::InvalidInput, "no member at " + index_string(n));
  return it->second;
}

const BilinearMap& TruncatedSystem::map(const Index& m, const Index& n) const {
  auto it = structure.find({m, n});
  if (it == structure.end())
    throw Error(ErrorKind::InvalidInput, "no structure map at " + index_string(m) + "," + index_string(n));
  return it->second;
}

const CorrVector& TruncatedSystem::vector(const Index& n) const {
  if (!unit) throw Error(ErrorKind::InvalidInput, "system has no distinguished vectors");
  auto it = unit->find(n);
  if (it == unit->end()) throw Error(ErrorKind::InvalidInput, "no vector at " + index_string(n));
  return it->second;
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

std::vector<Check> ValidationReport::failures() const {
  std::vector<Check> out;
  for (const auto& c : checks)
    if (!c.passed) out.push_back(c);
  return out;
}

double ValidationReport::max_residual() const {
  double m = 0.0;
  for (const auto& c : checks) m = std::max(m, c.residual);
  return m;
}

namespace {

constexpr long kExactLimit = 96;

}  // namespace

Check residual_check(std::string name, const BilinearMap& r, double tol, unsigned seed) {
  const Correspondence& s = r.source();
  const Correspondence& t = r.target();
  const int K = s.left().num_blocks(), L = s.right().num_blocks();
  long biggest = 0;
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) biggest = std::max<long>(biggest, std::max(s.dim(k, l), t.dim(k, l)));
  Check c;
  c.name = std::move(name);
  if (biggest <= kExactLimit) {
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < L; ++l) c.residual = std::max(c.residual, r.block(k, l).norm());
  } else {
    c.probed = true;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < L; ++l) {
        const int n = s.dim(k, l);
        if (n == 0 || t.dim(k, l) == 0) continue;
        CMatrix x(n, 2);
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = cplx(ud(rng), ud(rng));
        const CMatrix y = r.apply_block(k, l, x);
        for (Eigen::Index j = 0; j < x.cols(); ++j)
          c.residual = std::max(c.residual, y.col(j).norm() / x.col(j).norm());
      }
  }
  c.passed = c.residual <= tol;
  return c;
}

namespace {

Check failed_check(std::string name) {
  Check c;
  c.name = std::move(name);
  c.residual = std::numeric_limits<double>::infinity();
  c.passed = false;
  return c;
}

Check vector_check(std::string name, const CorrVector& a, const CorrVector& b, double tol) {
  Check c;
  c.name = std::move(name);
  if (!a.parent().same_shape(b.parent())) return failed_check(c.name);
  c.residual = (a - b).norm();
  c.passed = c.residual <= tol;
  return c;
}

std::string pair_name(const char* what, const Index& m, const Index& n) {
  return std::string(what) + " " + index_string(m) + "," + index_string(n);
}

}  // namespace

ValidationReport validate(const TruncatedSystem& sys, const Tolerance& tol) {
  ValidationReport rep;
  const double eps = tol.eq_rel;
  const auto idx = sys.cap.indices();
  const BlockAlgebra& B = sys.algebra;
  const bool sub = sys.kind == SystemKind::Sub;
  unsigned seed = 1;

  for (const auto& n : idx) {
    auto it = sys.members.find(n);
    if (it == sys.members.end() || it->second.left() != B || it->second.right() != B)
      rep.checks.push_back(failed_check("member " + index_string(n)));
  }
  if (!rep.passed()) return rep;
  const Index zero = zero_index(sys.d());
  if (!sys.member(zero).same_shape(Correspondence::trivial(B)))
    rep.checks.push_back(failed_check("member (0) is the trivial correspondence"));

  // Shapes and marginal / isometry conditions.
  for (const auto& m : idx)
    for (const auto& n : idx) {
      const Index mn = add(m, n);
      if (!sys.cap.contains(mn)) continue;
      auto it = sys.structure.find({m, n});
      const Correspondence tens = tensor(sys.member(m), sys.member(n));
      const Correspondence& whole = sys.member(mn);
      if (it == sys.structure.end()) {
        rep.checks.push_back(failed_check(pair_name("structure map", m, n)));
        continue;
      }
      const BilinearMap& s = it->second;
      const Correspondence& src = sub ? whole : tens;
      const Correspondence& dst = sub ? tens : whole;
      if (!s.source().same_shape(src) || !s.target().same_shape(dst)) {
        rep.checks.push_back(failed_check(pair_name("structure map shape", m, n)));
        continue;
      }
      if (is_zero(m) || is_zero(n)) {
        rep.checks.push_back(residual_check(pair_name("marginal", m, n), s - BilinearMap::identity(whole), eps, seed++));
        continue;
      }
      rep.checks.push_back(
          residual_check(pair_name("isometry", m, n), compose(s.adjoint(), s) - BilinearMap::identity(src), eps, seed++));
      if (sys.kind != SystemKind::Product) continue;
      // A square isometry is unitary, with the same defect on both sides.
      if (src.mult() == dst.mult()) {
        Check co = rep.checks.back();
        co.name = pair_name("coisometry", m, n);
        rep.checks.push_back(co);
      } else {
        rep.checks.push_back(
            residual_check(pair_name("coisometry", m, n), compose(s, s.adjoint()) - BilinearMap::identity(whole), eps, seed++));
      }
    }
  if (!rep.passed()) return rep;

  // (Co)associativity.
  for (const auto& m : idx) {
    if (is_zero(m)) continue;
    for (const auto& n : idx) {
      if (is_zero(n) || !sys.cap.contains(add(m, n))) continue;
      for (const auto& r : idx) {
        if (is_zero(r)) continue;
        const Index mnr = add(add(m, n), r);
        if (!sys.cap.contains(mnr)) continue;
        const Correspondence& Em = sys.member(m);
        const Correspondence& Er = sys.member(r);
        const BlockAlgebra& A = B;
        const Correspondence one = Correspondence::trivial(A);
        BilinearMap lhs, rhs;
        if (sub) {
          lhs = compose(BilinearMap::amplify(Em, sys.map(n, r), one), sys.map(m, add(n, r)));
          rhs = compose(BilinearMap::amplify(one, sys.map(m, n), Er), sys.map(add(m, n), r));
        } else {
          lhs = compose(sys.map(m, add(n, r)), BilinearMap::amplify(Em, sys.map(n, r), one));
          rhs = compose(sys.map(add(m, n), r), BilinearMap::amplify(one, sys.map(m, n), Er));
        }
        rep.checks.push_back(residual_check("associativity " + index_string(m) + "," + index_string(n) + "," +
                                                index_string(r),
                                            lhs - rhs, eps, seed++));
      }
    }
  }

  if (sys.unit) {
    auto it0 = sys.unit->find(zero);
    if (it0 == sys.unit->end())
      rep.checks.push_back(failed_check("unit at (0)"));
    else
      rep.checks.push_back(vector_check("unit at (0)", it0->second, CorrVector::unit(B), eps));
    for (const auto& m : idx) {
      if (is_zero(m)) continue;
      for (const auto& n : idx) {
        if (is_zero(n)) continue;
        const Index mn = add(m, n);
        if (!sys.cap.contains(mn)) continue;
        if (!sys.unit->count(m) || !sys.unit->count(n) || !sys.unit->count(mn)) {
          rep.checks.push_back(failed_check(pair_name("unit", m, n)));
          continue;
        }
        const CorrVector prod = tensor(sys.vector(m), sys.vector(n));
        if (sub)
          rep.checks.push_back(vector_check(pair_name("unit", m, n), sys.map(m, n).apply(sys.vector(mn)), prod, eps));
        else
          rep.checks.push_back(vector_check(pair_name("unit", m, n), sys.map(m, n).apply(prod), sys.vector(mn), eps));
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// GNS subproduct systems

namespace {

// The bilinear map sending the cyclic vector x of its source to y.
BilinearMap cyclic_map(const CorrVector& x, const CorrVector& y) {
  const Correspondence& s = x.parent();
  const Correspondence& t = y.parent();
  std::vector<CMatrix> blocks;
  for (int k = 0; k < s.left().num_blocks(); ++k)
    for (int l = 0; l < s.right().num_blocks(); ++l) {
      const CMatrix& X = x.block(k, l);
      if (X.rows() == 0) {
        blocks.push_back(CMatrix::Zero(t.dim(k, l), 0));
        continue;
      }
      Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(X);
      blocks.push_back(y.block(k, l) * cod.pseudoInverse());
    }
  return BilinearMap(s, t, std::move(blocks));
}

}  // namespace

TruncatedSystem gns_system(const std::vector<CPMap>& ts, const GridCap& cap, const Tolerance& tol) {
  if (static_cast<int>(ts.size()) != cap.d) throw Error(ErrorKind::DimensionMismatch, "gns_system: need one map per direction");
  const BlockAlgebra B = ts.at(0).domain();
  for (const auto& t : ts) {
    require_same(t.domain(), B, "gns_system: domain");
    require_same(t.codomain(), B, "gns_system: codomain");
    if (!is_contractive(t, tol)) throw Error(ErrorKind::NotContractive, "gns_system: map is not contractive");
  }
  for (std::size_t i = 0; i < ts.size(); ++i)
    for (std::size_t j = i + 1; j < ts.size(); ++j)
      if (!maps_approx_equal(compose(ts[i], ts[j]), compose(ts[j], ts[i]), tol))
        throw Error(ErrorKind::NotCommuting,
                    "gns_system: T_" + std::to_string(i + 1) + " and T_" + std::to_string(j + 1) + " do not commute");

  TruncatedSystem sys;
  sys.kind = SystemKind::Sub;
  sys.cap = cap;
  sys.algebra = B;
  sys.unit.emplace();
  std::map<Index, CPMap> tn;
  for (const auto& n : cap.indices()) {
    if (is_zero(n)) {
      tn[n] = CPMap::identity(B);
      sys.members[n] = Correspondence::trivial(B);
      (*sys.unit)[n] = CorrVector::unit(B);
      continue;
    }
    int last = cap.d - 1;
    while (n[last] == 0) --last;
    Index prev = n;
    --prev[last];
    tn[n] = minimal_kraus(compose(ts[last], tn.at(prev)), tol);
    const GNSResult g = gns(tn[n], tol);
    sys.members[n] = g.corr;
    (*sys.unit)[n] = g.cyclic;
  }
  for (const auto& m : cap.indices())
    for (const auto& n : cap.indices()) {
      const Index mn = add(m, n);
      if (!cap.contains(mn)) continue;
      if (is_zero(m) || is_zero(n)) {
        sys.structure[{m, n}] = BilinearMap::identity(sys.member(mn));
        continue;
      }
      sys.structure[{m, n}] = cyclic_map(sys.vector(mn), tensor(sys.vector(m), sys.vector(n)));
    }
  return sys;
}

// ---------------------------------------------------------------------------
// Flip-built systems

ExchangeResult check_exchange(const FlipData& fd, const Tolerance& tol) {
  if (fd.d() <= 2) return ExchangeResult{};
  return exchange_residual(fd, tol);
}

TruncatedSystem truncated_from_unitaries(const Correspondence& e, int d,
                                         const std::map<std::pair<int, int>, BilinearMap>& w, const Tolerance& tol) {
  require_same(e.left(), e.right(), "truncated_from_unitaries: E must be a correspondence over one algebra");
  (void)tol;
  const BlockAlgebra& B = e.left();
  const Correspondence ee = tensor(e, e);
  TruncatedSystem sys;
  sys.kind = SystemKind::Sub;
  sys.cap = GridCap::uniform(d, 2);
  sys.algebra = B;
  for (const auto& n : sys.cap.indices()) {
    const int deg = degree(n);
    sys.members[n] = deg == 0 ? Correspondence::trivial(B) : deg == 1 ? e : deg == 2 ? ee : Correspondence::zero(B, B);
  }
  auto generator = [d](const Index& n) {
    if (degree(n) != 1) return 0;
    for (int i = 0; i < d; ++i)
      if (n[i] == 1) return i + 1;
    return 0;
  };
  for (const auto& m : sys.cap.indices())
    for (const auto& n : sys.cap.indices()) {
      const Index mn = add(m, n);
      if (!sys.cap.contains(mn)) continue;
      const Correspondence& whole = sys.member(mn);
      if (is_zero(m) || is_zero(n)) {
        sys.structure[{m, n}] = BilinearMap::identity(whole);
        continue;
      }
      const int i = generator(m), j = generator(n);
      if (i && j) {
        auto it = w.find({i, j});
        if (it == w.end())
          throw Error(ErrorKind::InvalidInput,
                      "truncated_from_unitaries: missing w_(" + std::to_string(i) + "," + std::to_string(j) + ")");
        if (!it->second.source().same_shape(ee) || !it->second.target().same_shape(ee))
          throw Error(ErrorKind::DimensionMismatch, "truncated_from_unitaries: w must act on E (.) E");
        sys.structure[{m, n}] = it->second;
      } else {
        sys.structure[{m, n}] = BilinearMap::zero(whole, tensor(sys.member(m), sys.member(n)));
      }
    }
  return sys;
}

TruncatedSystem truncated_from_flips(const FlipData& fd, const Tolerance& tol) {
  fd.validate(tol);
  const Correspondence& e = fd.spaces.at(0);
  for (const auto& s : fd.spaces)
    if (!s.same_shape(e)) throw Error(ErrorKind::InvalidInput, "truncated_from_flips: all E_i must be equal");
  const int d = fd.d();
  std::map<std::pair<int, int>, BilinearMap> w;
  const BilinearMap id = BilinearMap::identity(tensor(e, e));
  for (int i = 1; i <= d; ++i)
    for (int j = 1; j <= i; ++j) {
      w[{i, j}] = id;
      if (j < i) w[{j, i}] = fd.flip(j, i);
    }
  return truncated_from_unitaries(e, d, w, tol);
}

FlipData flips_of_truncated(const TruncatedSystem& sys) {
  const int d = sys.d();
  FlipData fd;
  const Correspondence& e = sys.member(unit_index(d, 1));
  fd.spaces.assign(d, e);
  for (int i = 1; i <= d; ++i)
    for (int j = 1; j < i; ++j) {
      const BilinearMap& wij = sys.map(unit_index(d, i), unit_index(d, j));
      const BilinearMap& wji = sys.map(unit_index(d, j), unit_index(d, i));
      fd.flips[{j, i}] = compose(wji, wij.adjoint()).materialize();
    }
  return fd;
}

UpperTriangular upper_triangular_form(const TruncatedSystem& sys, const Tolerance& tol) {
  UpperTriangular out;
  out.flips = flips_of_truncated(sys);
  out.normalized = truncated_from_flips(out.flips, tol);
  const int d = sys.d();
  for (const auto& n : sys.cap.indices()) {
    const Correspondence& src = sys.member(n);
    const Correspondence& dst = out.normalized.member(n);
    if (degree(n) <= 1) {
      out.iso[n] = BilinearMap::identity(src);
    } else if (degree(n) == 2) {
      // n = e_i + e_j with j <= i
      int i = 0, j = 0;
      for (int t = d; t >= 1; --t)
        if (n[t - 1] > 0) {
          i = t;
          break;
        }
      for (int t = 1; t <= d; ++t)
        if (n[t - 1] > 0) {
          j = t;
          break;
        }
      out.iso[n] = sys.map(unit_index(d, i), unit_index(d, j));
    } else {
      out.iso[n] = BilinearMap::zero(src, dst);
    }
  }
  return out;
}

double morphism_residual(const TruncatedSystem& s, const TruncatedSystem& t, const std::map<Index, BilinearMap>& a) {
  double worst = 0.0;
  for (const auto& [key, ms] : s.structure) {
    const auto& [m, n] = key;
    const BilinearMap& mt = t.map(m, n);
    const BilinearMap amn = tensor(a.at(m), a.at(n));
    const BilinearMap r = s.kind == SystemKind::Sub ? compose(mt, a.at(add(m, n))) - compose(amn, ms)
                                                     : compose(a.at(add(m, n)), ms) - compose(mt, amn);
    worst = std::max(worst, residual_check("morphism", r, 0.0).residual);
  }
  return worst;
}

double flip_gauge_residual(const FlipData& f, const FlipData& g, const std::vector<BilinearMap>& a) {
  double worst = 0.0;
  for (const auto& [key, fl] : f.flips) {
    const auto [j, i] = key;
    const BilinearMap lhs = compose(tensor(a.at(j - 1), a.at(i - 1)), fl);
    const BilinearMap rhs = compose(g.flip(j, i), tensor(a.at(i - 1), a.at(j - 1)));
    worst = std::max(worst, residual_check("gauge", lhs - rhs, 0.0).residual);
  }
  return worst;
}

namespace {

IndexFunction pattern_of(const Index& n) {
  IndexFunction f;
  for (std::size_t i = 0; i < n.size(); ++i)
    for (int r = 0; r < n[i]; ++r) f.push_back(static_cast<int>(i) + 1);
  return f;
}

}  // namespace

TruncatedSystem product_from_flips(const FlipData& fd, const GridCap& cap, const Tolerance& tol) {
  if (fd.d() != cap.d) throw Error(ErrorKind::DimensionMismatch, "product_from_flips: cap dimension differs from d");
  fd.validate(tol);
  const ExchangeResult ex = check_exchange(fd, tol);
  if (!ex.holds) {
    const auto& t = *ex.triple;
    throw Error(ErrorKind::ExchangeConditionViolated, "exchange condition fails at (" + std::to_string(t[0]) + "," +
                                                          std::to_string(t[1]) + "," + std::to_string(t[2]) + ")");
  }
  const BlockAlgebra B = fd.spaces.at(0).left();
  const bool with_unit = !fd.vectors.empty();
  if (with_unit)
    for (const auto& [key, fl] : fd.flips) {
      const auto [j, i] = key;
      const CorrVector lhs = fl.apply(tensor(fd.vectors[i - 1], fd.vectors[j - 1]));
      const CorrVector rhs = tensor(fd.vectors[j - 1], fd.vectors[i - 1]);
      const double r = (lhs - rhs).norm();
      if (r > tol.eq_rel * std::max(1.0, rhs.norm()))
        throw Error(ErrorKind::UnitConstraintViolated, "flip (" + std::to_string(j) + "," + std::to_string(i) +
                                                           ") does not exchange the vectors, residual " +
                                                           std::to_string(r));
    }

  TruncatedSystem sys;
  sys.kind = SystemKind::Product;
  sys.cap = cap;
  sys.algebra = B;
  if (with_unit) sys.unit.emplace();
  for (const auto& n : cap.indices()) {
    const IndexFunction f = pattern_of(n);
    sys.members[n] = f.empty() ? Correspondence::trivial(B) : pattern_space(fd, f);
    if (with_unit) {
      CorrVector x = CorrVector::unit(B);
      for (int v : f) x = tensor(x, fd.vectors[v - 1]);
      (*sys.unit)[n] = x;
    }
  }
  for (const auto& m : cap.indices())
    for (const auto& n : cap.indices()) {
      const Index mn = add(m, n);
      if (!cap.contains(mn)) continue;
      IndexFunction f = pattern_of(m);
      const IndexFunction g = pattern_of(n);
      f.insert(f.end(), g.begin(), g.end());
      if (is_zero(m) || is_zero(n) || inversions(f) == 0)
        sys.structure[{m, n}] = BilinearMap::identity(sys.member(mn));
      else
        sys.structure[{m, n}] = pi_f(fd, f, tol, false);
    }
  return sys;
}

// ---------------------------------------------------------------------------
// Unit-spanned subsystems

CompositionEnumerator::CompositionEnumerator(Index target) : target_(std::move(target)) {
  std::vector<Index> cur;
  const GridCap box(target_);
  const auto parts = box.indices();
  std::function<void(const Index&)> rec = [&](const Index& rest) {
    if (is_zero(rest)) {
      if (!cur.empty()) all_.push_back(cur);
      return;
    }
    for (const auto& a : parts) {
      if (is_zero(a)) continue;
      bool fits = true;
      for (std::size_t i = 0; i < a.size(); ++i) fits = fits && a[i] <= rest[i];
      if (!fits) continue;
      Index r = rest;
      for (std::size_t i = 0; i < a.size(); ++i) r[i] -= a[i];
      cur.push_back(a);
      rec(r);
      cur.pop_back();
    }
  };
  rec(target_);
}

namespace {

SubCorrespondence whole_trivial(const BlockAlgebra& B) {
  const Correspondence one = Correspondence::trivial(B);
  return SubCorrespondence{one, BilinearMap::identity(one)};
}

void require_vectors(const TruncatedSystem& sys, const char* who) {
  if (!sys.unit) throw Error(ErrorKind::InvalidInput, std::string(who) + ": system has no distinguished vectors");
  if (sys.kind == SystemKind::Sub) throw Error(ErrorKind::InvalidInput, std::string(who) + ": needs products, not coproducts");
}

}  // namespace

long rank_deficit(const BilinearMap& v, const Tolerance& tol) {
  long gap = 0;
  const Correspondence& t = v.target();
  double smax = 0.0;
  std::vector<CMatrix> blocks;
  for (int k = 0; k < t.left().num_blocks(); ++k)
    for (int l = 0; l < t.right().num_blocks(); ++l) {
      blocks.push_back(v.block(k, l));
      if (blocks.back().size()) smax = std::max(smax, op_norm(blocks.back()));
    }
  std::size_t b = 0;
  for (int k = 0; k < t.left().num_blocks(); ++k)
    for (int l = 0; l < t.right().num_blocks(); ++l, ++b) {
      const long r = smax > 0.0 && blocks[b].size() ? static_cast<long>(rank_above(blocks[b], tol.rank_rel * smax)) : 0;
      gap += t.dim(k, l) - r;
    }
  return gap;
}

TruncatedSystem restrict_to(const TruncatedSystem& sys, const GridCap& cap) {
  TruncatedSystem out;
  out.kind = sys.kind;
  out.cap = cap;
  out.algebra = sys.algebra;
  if (sys.unit) out.unit.emplace();
  for (const auto& n : cap.indices()) {
    if (!sys.cap.contains(n)) throw Error(ErrorKind::InvalidInput, "restrict_to: cap is not inside the system's cap");
    out.members[n] = sys.member(n);
    if (sys.unit) (*out.unit)[n] = sys.vector(n);
  }
  for (const auto& [key, m] : sys.structure)
    if (cap.contains(add(key.first, key.second))) out.structure[key] = m;
  return out;
}

SubCorrespondence spanned_by_compositions(const TruncatedSystem& sys, const Index& n, const Tolerance& tol) {
  require_vectors(sys, "spanned_by_compositions");
  if (is_zero(n)) return whole_trivial(sys.algebra);
  std::vector<BilinearMap> maps;
  const CompositionEnumerator en(n);
  for (const auto& comp : en.compositions()) {
    Index acc = comp[0];
    BilinearMap p = generated_sub(sys.member(acc), {sys.vector(acc)}, tol).inclusion;
    for (std::size_t s = 1; s < comp.size(); ++s) {
      const Index& c = comp[s];
      const BilinearMap next = generated_sub(sys.member(c), {sys.vector(c)}, tol).inclusion;
      p = compose(sys.map(acc, c), tensor(p, next));
      acc = add(acc, c);
    }
    maps.push_back(p);
  }
  return span_of(sys.member(n), maps, tol);
}

SpannedResult spanned_subsystem(const TruncatedSystem& sys, const Tolerance& tol) {
  require_vectors(sys, "spanned_subsystem");
  SpannedResult out;
  const auto idx = sys.cap.indices();
  const BlockAlgebra& B = sys.algebra;
  std::map<Index, SubCorrespondence> gen;
  for (const auto& n : idx) {
    if (is_zero(n)) {
      out.spaces.emplace(n, whole_trivial(B));
      continue;
    }
    gen.emplace(n, generated_sub(sys.member(n), {sys.vector(n)}, tol));
    std::vector<BilinearMap> maps{gen.at(n).inclusion};
    for (const auto& a : idx) {
      if (is_zero(a)) continue;
      for (const auto& b : idx) {
        if (is_zero(b) || add(a, b) != n) continue;
        maps.push_back(compose(sys.map(a, b), tensor(out.spaces.at(a).inclusion, gen.at(b).inclusion)));
      }
    }
    out.spaces.emplace(n, span_of(sys.member(n), maps, tol));
  }

  TruncatedSystem& s = out.system;
  s.kind = SystemKind::Super;
  s.cap = sys.cap;
  s.algebra = B;
  s.unit.emplace();
  for (const auto& n : idx) {
    s.members[n] = out.spaces.at(n).sub;
    (*s.unit)[n] = out.spaces.at(n).inclusion.apply_adjoint(sys.vector(n));
  }
  for (const auto& a : idx)
    for (const auto& b : idx) {
      const Index ab = add(a, b);
      if (!sys.cap.contains(ab)) continue;
      if (is_zero(a) || is_zero(b)) {
        s.structure[{a, b}] = BilinearMap::identity(s.member(ab));
        continue;
      }
      const BilinearMap v = compose(out.spaces.at(ab).inclusion.adjoint(),
                                    compose(sys.map(a, b), tensor(out.spaces.at(a).inclusion, out.spaces.at(b).inclusion)))
                                .materialize();
      s.structure[{a, b}] = v;
      if (!out.proper) {
        const long gap = rank_deficit(v, tol);
        if (gap > 0) {
          out.proper = true;
          out.witness = std::make_pair(a, b);
          out.rank_gap = gap;
        }
      }
    }
  return out;
}

// ---------------------------------------------------------------------------
// Product subsystem solver

namespace {

// Columns spanning a candidate subspace of each multiplicity block.
struct Generators {
  Correspondence space;
  std::vector<CMatrix> cols;  // index k * L + l

  explicit Generators(const Correspondence& e) : space(e) {
    for (int k = 0; k < e.left().num_blocks(); ++k)
      for (int l = 0; l < e.right().num_blocks(); ++l) cols.push_back(CMatrix(e.dim(k, l), 0));
  }
  CMatrix& at(int k, int l) { return cols[static_cast<std::size_t>(k) * space.right().num_blocks() + l]; }
  void append(int k, int l, const CMatrix& c) {
    CMatrix& m = at(k, l);
    CMatrix n(m.rows(), m.cols() + c.cols());
    n << m, c;
    m = std::move(n);
  }
  void add_vector(const CorrVector& x) {
    for (int k = 0; k < space.left().num_blocks(); ++k)
      for (int l = 0; l < space.right().num_blocks(); ++l) append(k, l, x.block(k, l));
  }
  SubCorrespondence span(const Tolerance& tol) {
    IMatrix m(space.left().num_blocks(), space.right().num_blocks());
    for (int k = 0; k < m.rows(); ++k)
      for (int l = 0; l < m.cols(); ++l) m(k, l) = static_cast<int>(at(k, l).cols());
    const Correspondence src(space.left(), space.right(), m);
    return span_of(space, {BilinearMap(src, space, cols)}, tol);
  }
};

// Splits multiplicity data z of X (.) Y (columns of the (k,l) block) into
// slices along X (over iX, for fixed j, iY, column) and along Y.
void add_slices(const Correspondence& x, const Correspondence& y, int k, int l, const CMatrix& z, Generators* gx,
                Generators* gy) {
  if (z.cols() == 0) return;
  std::map<std::pair<int, long>, std::vector<std::pair<long, long>>> by_y;  // (j, iY) -> (iX, iXY)
  std::map<std::pair<int, long>, std::vector<std::pair<long, long>>> by_x;  // (j, iX) -> (iY, iXY)
  for_each_tensor_pair(x, y, k, l, [&](int j, long ix, long iy, long ixy) {
    by_y[{j, iy}].push_back({ix, ixy});
    by_x[{j, ix}].push_back({iy, ixy});
  });
  if (gx)
    for (const auto& [key, list] : by_y) {
      CMatrix s = CMatrix::Zero(x.dim(k, key.first), z.cols());
      for (const auto& [ix, ixy] : list) s.row(ix) = z.row(ixy);
      gx->append(k, key.first, s);
    }
  if (gy)
    for (const auto& [key, list] : by_x) {
      CMatrix s = CMatrix::Zero(y.dim(key.first, l), z.cols());
      for (const auto& [iy, ixy] : list) s.row(iy) = z.row(ixy);
      gy->append(key.first, l, s);
    }
}

void add_vector_slices(const Correspondence& x, const Correspondence& y, const CorrVector& z, Generators* gx,
                       Generators* gy) {
  for (int k = 0; k < z.parent().left().num_blocks(); ++k)
    for (int l = 0; l < z.parent().right().num_blocks(); ++l)
      add_slices(x, y, k, l, z.block(k, l), gx, gy);
}

void require_unitary(const BilinearMap& u, const Tolerance& tol) {
  const double a = residual_check("", compose(u.adjoint(), u) - BilinearMap::identity(u.source()), 0.0).residual;
  const double b = residual_check("", compose(u, u.adjoint()) - BilinearMap::identity(u.target()), 0.0).residual;
  if (std::max(a, b) > tol.eq_rel)
    throw Error(ErrorKind::InvalidInput, "product_subsystem_solver: structure map is not unitary");
}

long total_mult(const SubCorrespondence& s) { return s.sub.total_mult(); }

}  // namespace

SubsystemSolution product_subsystem_solver(const TruncatedSystem& sys, const Tolerance& tol) {
  require_vectors(sys, "product_subsystem_solver");
  const int d = sys.d();
  SubsystemSolution out;
  if (d == 1) {
    if (sys.cap.cap[0] < 2) throw Error(ErrorKind::UnsupportedDepth, "product_subsystem_solver: needs level 2");
    const Index e1{1}, two{2};
    const Correspondence& E = sys.member(e1);
    const BilinearMap& u = sys.map(e1, e1);
    require_unitary(u, tol);
    Generators g(E);
    g.add_vector(sys.vector(e1));
    add_vector_slices(E, E, u.apply_adjoint(sys.vector(two)), &g, &g);
    out.kept.push_back(g.span(tol));
    out.iterations = 1;
  } else if (d == 2) {
    if (sys.cap.cap[0] < 1 || sys.cap.cap[1] < 1)
      throw Error(ErrorKind::UnsupportedDepth, "product_subsystem_solver: needs level (1,1)");
    const Index e1{1, 0}, e2{0, 1}, both{1, 1};
    const Correspondence& E1 = sys.member(e1);
    const Correspondence& E2 = sys.member(e2);
    const BilinearMap& u12 = sys.map(e1, e2);
    const BilinearMap& u21 = sys.map(e2, e1);
    require_unitary(u12, tol);
    require_unitary(u21, tol);
    Generators g1(E1), g2(E2);
    g1.add_vector(sys.vector(e1));
    g2.add_vector(sys.vector(e2));
    add_vector_slices(E1, E2, u12.apply_adjoint(sys.vector(both)), &g1, &g2);
    add_vector_slices(E2, E1, u21.apply_adjoint(sys.vector(both)), &g2, &g1);
    // W = u21* u12 must map P1 (.) P2 onto P2 (.) P1.
    const BilinearMap w = compose(u21.adjoint(), u12).materialize();
    long prev = -1;
    for (;;) {
      ++out.iterations;
      const SubCorrespondence p1 = g1.span(tol), p2 = g2.span(tol);
      const long now = total_mult(p1) + total_mult(p2);
      if (now == prev) {
        out.kept = {p1, p2};
        break;
      }
      prev = now;
      const BilinearMap fwd = compose(w, tensor(p1.inclusion, p2.inclusion));
      const BilinearMap bwd = compose(w.adjoint(), tensor(p2.inclusion, p1.inclusion));
      for (int k = 0; k < sys.algebra.num_blocks(); ++k)
        for (int l = 0; l < sys.algebra.num_blocks(); ++l) {
          add_slices(E2, E1, k, l, fwd.block(k, l), &g2, &g1);
          add_slices(E1, E2, k, l, bwd.block(k, l), &g1, &g2);
        }
    }
  } else {
    throw Error(ErrorKind::UnsupportedDepth, "product_subsystem_solver: only d = 1 and d = 2 are supported");
  }
  for (const auto& p : out.kept) {
    out.complement.push_back(complement(p, tol));
    out.kernel_dim += total_mult(out.complement.back());
  }
  return out;
}

}  // namespace dilkit
