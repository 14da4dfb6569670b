#include "dilkit/cpmap.hpp"

#include <algorithm>
#include <cmath>

namespace dilkit {

namespace {

CMatrix apply_kraus(const std::vector<CMatrix>& kraus, const CMatrix& a, Eigen::Index out_dim) {
  CMatrix out = CMatrix::Zero(out_dim, out_dim);
  for (const auto& c : kraus) out.noalias() += c.adjoint() * a * c;
  return out;
}

}  // namespace

CPMap::CPMap(BlockAlgebra domain, BlockAlgebra codomain, std::vector<CMatrix> kraus, const Tolerance& tol)
    : domain_(std::move(domain)), codomain_(std::move(codomain)), kraus_(std::move(kraus)) {
  for (const auto& c : kraus_) {
    if (c.rows() != domain_.total_dim() || c.cols() != codomain_.total_dim())
      throw Error(ErrorKind::DimensionMismatch, "Kraus operator has the wrong shape");
    require_finite(c, "Kraus operator");
  }
  if (codomain_.num_blocks() == 1) return;  // every operator is in a full matrix algebra
  for (int k = 0; k < domain_.num_blocks(); ++k) {
    const int n = domain_.block_dim(k), o = domain_.offset(k);
    for (int r = 0; r < n; ++r)
      for (int s = 0; s < n; ++s) {
        CMatrix img = CMatrix::Zero(codomain_.total_dim(), codomain_.total_dim());
        for (const auto& c : kraus_) img.noalias() += c.row(o + r).adjoint() * c.row(o + s);
        if (!codomain_.contains(img, tol))
          throw Error(ErrorKind::InvalidInput, "Kraus family does not map the domain into the codomain algebra");
      }
  }
}

CPMap CPMap::identity(const BlockAlgebra& b) {
  return CPMap(b, b, {CMatrix::Identity(b.total_dim(), b.total_dim())});
}

CPMap CPMap::zero(const BlockAlgebra& domain, const BlockAlgebra& codomain) { return CPMap(domain, codomain, {}); }

CPMap CPMap::from_markov_matrix(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) throw Error(ErrorKind::DimensionMismatch, "matrix must be square");
  if (!m.allFinite()) throw Error(ErrorKind::InvalidInput, "matrix has non-finite entries");
  if ((m.array() < 0).any()) throw Error(ErrorKind::InvalidInput, "matrix has negative entries");
  const int n = static_cast<int>(m.rows());
  BlockAlgebra c(std::vector<int>(n, 1));
  std::vector<CMatrix> kraus;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (m(i, j) > 0.0) {
        CMatrix e = CMatrix::Zero(n, n);
        e(i, j) = std::sqrt(m(i, j));
        kraus.push_back(std::move(e));
      }
  return CPMap(c, c, std::move(kraus));
}

CMatrix CPMap::apply(const CMatrix& a) const {
  if (a.rows() != domain_.total_dim() || a.cols() != domain_.total_dim())
    throw Error(ErrorKind::DimensionMismatch, "argument is not in the domain representation");
  return apply_kraus(kraus_, a, codomain_.total_dim());
}

Eigen::MatrixXd CPMap::row_matrix() const {
  for (int d : domain_.block_dims())
    if (d != 1) throw Error(ErrorKind::InvalidInput, "row_matrix needs a commutative domain");
  for (int d : codomain_.block_dims())
    if (d != 1) throw Error(ErrorKind::InvalidInput, "row_matrix needs a commutative codomain");
  const int n = domain_.total_dim(), m = codomain_.total_dim();
  Eigen::MatrixXd out(n, m);
  for (int i = 0; i < n; ++i) {
    CMatrix e = CMatrix::Zero(n, n);
    e(i, i) = 1.0;
    const CMatrix img = apply(e);
    for (int j = 0; j < m; ++j) out(i, j) = img(j, j).real();
  }
  return out;
}

LinearMapData LinearMapData::of(const CPMap& t) {
  return from_function(t.domain(), t.codomain(), [&](const CMatrix& a) { return t.apply(a); });
}

LinearMapData LinearMapData::from_function(const BlockAlgebra& domain, const BlockAlgebra& codomain,
                                           const std::function<CMatrix(const CMatrix&)>& f) {
  LinearMapData d{domain, codomain, {}};
  for (const auto& e : domain.matrix_units()) {
    CMatrix img = f(e);
    if (img.rows() != codomain.total_dim() || img.cols() != codomain.total_dim())
      throw Error(ErrorKind::DimensionMismatch, "linear map value has the wrong shape");
    d.images.push_back(std::move(img));
  }
  return d;
}

CMatrix choi(const LinearMapData& m) {
  const BlockAlgebra& A = m.domain;
  const int nb = m.codomain.total_dim();
  if (static_cast<int>(m.images.size()) != [&] {
        int s = 0;
        for (int d : A.block_dims()) s += d * d;
        return s;
      }())
    throw Error(ErrorKind::DimensionMismatch, "linear map data does not cover the matrix units");
  CMatrix c = CMatrix::Zero(static_cast<Eigen::Index>(A.total_dim()) * nb, static_cast<Eigen::Index>(A.total_dim()) * nb);
  std::size_t idx = 0;
  for (int k = 0; k < A.num_blocks(); ++k) {
    const int n = A.block_dim(k), o = A.offset(k);
    for (int r = 0; r < n; ++r)
      for (int s = 0; s < n; ++s, ++idx) {
        const CMatrix& img = m.images[idx];
        if (img.rows() != nb || img.cols() != nb) throw Error(ErrorKind::DimensionMismatch, "linear map value shape");
        c.block(static_cast<Eigen::Index>(o + r) * nb, static_cast<Eigen::Index>(o + s) * nb, nb, nb) = img;
      }
  }
  return c;
}

CMatrix choi(const CPMap& t) { return choi(LinearMapData::of(t)); }

CMatrix choi_block(const LinearMapData& m, int k, int l) {
  const BlockAlgebra& A = m.domain;
  const BlockAlgebra& B = m.codomain;
  std::size_t idx = 0;
  for (int q = 0; q < k; ++q) idx += static_cast<std::size_t>(A.block_dim(q)) * A.block_dim(q);
  const int n = A.block_dim(k), nl = B.block_dim(l), ol = B.offset(l);
  CMatrix c(static_cast<Eigen::Index>(n) * nl, static_cast<Eigen::Index>(n) * nl);
  for (int r = 0; r < n; ++r)
    for (int s = 0; s < n; ++s, ++idx)
      c.block(r * nl, s * nl, nl, nl) = m.images[idx].block(ol, ol, nl, nl);
  return c;
}

bool is_completely_positive(const LinearMapData& m, const Tolerance& tol) {
  const CMatrix c = choi(m);
  if (!approx_equal(c, c.adjoint(), tol)) return false;
  const double scale = std::max(1.0, op_norm(c));
  return min_hermitian_eigenvalue(0.5 * (c + c.adjoint())) >= -tol.eq_rel * scale;
}

bool is_unital(const CPMap& t, const Tolerance& tol) {
  if (t.domain().total_dim() != t.codomain().total_dim()) return false;
  return op_norm(t.unit_image() - t.codomain().unit()) <= tol.eq_rel;
}

bool is_contractive(const CPMap& t, const Tolerance& tol) { return op_norm(t.unit_image()) <= 1.0 + tol.eq_rel; }

bool is_markov(const CPMap& t, const Tolerance& tol) { return is_unital(t, tol); }

CPMap compose(const CPMap& s, const CPMap& t) {
  require_same(t.codomain(), s.domain(), "compose: codomain of t must be the domain of s");
  std::vector<CMatrix> kraus;
  kraus.reserve(t.kraus().size() * s.kraus().size());
  for (const auto& ct : t.kraus())
    for (const auto& cs : s.kraus()) kraus.push_back(ct * cs);
  return CPMap(t.domain(), s.codomain(), std::move(kraus));
}

CPMap power(const CPMap& t, int n) {
  require_same(t.domain(), t.codomain(), "power");
  if (n < 0) throw Error(ErrorKind::ParameterOutOfRange, "negative power");
  CPMap out = CPMap::identity(t.domain());
  for (int i = 0; i < n; ++i) out = compose(t, out);
  return out;
}

CPMap minimal_kraus(const CPMap& t, const Tolerance& tol) {
  const LinearMapData data = LinearMapData::of(t);
  const BlockAlgebra& A = t.domain();
  const BlockAlgebra& B = t.codomain();
  std::vector<Eigen::SelfAdjointEigenSolver<CMatrix>> eig;
  double lmax = 0.0;
  for (int k = 0; k < A.num_blocks(); ++k)
    for (int l = 0; l < B.num_blocks(); ++l) {
      const CMatrix c = choi_block(data, k, l);
      eig.emplace_back(0.5 * (c + c.adjoint()));
      lmax = std::max(lmax, eig.back().eigenvalues().cwiseAbs().maxCoeff());
    }
  std::vector<CMatrix> kraus;
  std::size_t idx = 0;
  for (int k = 0; k < A.num_blocks(); ++k)
    for (int l = 0; l < B.num_blocks(); ++l, ++idx) {
      const auto& ev = eig[idx].eigenvalues();
      const auto& vecs = eig[idx].eigenvectors();
      const int nk = A.block_dim(k), nl = B.block_dim(l);
      if (ev(0) < -tol.eq_rel * std::max(1.0, lmax)) throw Error(ErrorKind::NotCP, "Choi matrix is not positive");
      for (Eigen::Index i = ev.size() - 1; i >= 0; --i) {
        if (ev(i) <= tol.rank_rel * lmax) break;
        CMatrix c = CMatrix::Zero(A.total_dim(), B.total_dim());
        const double s = std::sqrt(ev(i));
        for (int r = 0; r < nk; ++r)
          for (int q = 0; q < nl; ++q) c(A.offset(k) + r, B.offset(l) + q) = s * std::conj(vecs(r * nl + q, i));
        kraus.push_back(std::move(c));
      }
    }
  return CPMap(A, B, std::move(kraus));
}

CPMap unitalize_cpmap(const CPMap& t, const Tolerance& tol) {
  require_same(t.domain(), t.codomain(), "unitalize_cpmap");
  if (!is_contractive(t, tol)) throw Error(ErrorKind::NotContractive, "unitalize_cpmap: ||T(1)|| > 1");
  const Unitalization u = unitalize_algebra(t.domain());
  const int n = t.domain().total_dim();
  std::vector<CMatrix> kraus;
  for (const auto& c : t.kraus()) {
    CMatrix big = CMatrix::Zero(n + 1, n + 1);
    big.topLeftCorner(n, n) = c;
    kraus.push_back(std::move(big));
  }
  CMatrix defect = CMatrix::Zero(n + 1, n + 1);
  defect.topLeftCorner(n, n) = t.codomain().unit() - t.unit_image();
  defect(n, n) = 1.0;
  const CMatrix r = psd_sqrt(defect);
  for (int j = 0; j <= n; ++j) {
    CMatrix k = CMatrix::Zero(n + 1, n + 1);
    k.row(n) = r.row(j);
    if (k.norm() > tol.rank_rel) kraus.push_back(std::move(k));
  }
  return CPMap(u.algebra, u.algebra, std::move(kraus), tol);
}

double map_distance(const CPMap& a, const CPMap& b) {
  require_same(a.domain(), b.domain(), "map_distance domain");
  require_same(a.codomain(), b.codomain(), "map_distance codomain");
  return (choi(a) - choi(b)).norm();
}

bool maps_approx_equal(const CPMap& a, const CPMap& b, const Tolerance& tol) {
  require_same(a.domain(), b.domain(), "maps_approx_equal domain");
  require_same(a.codomain(), b.codomain(), "maps_approx_equal codomain");
  return approx_equal(choi(a), choi(b), tol);
}

GNSResult gns(const CPMap& t, const Tolerance& tol) {
  if (!is_completely_positive(LinearMapData::of(t), tol)) throw Error(ErrorKind::NotCP, "gns: map is not CP");
  const BlockAlgebra& A = t.domain();
  const BlockAlgebra& B = t.codomain();
  const int K = A.num_blocks(), L = B.num_blocks();
  const int n = static_cast<int>(t.kraus().size());
  Correspondence raw(A, B, IMatrix::Constant(K, L, n));
  CorrVector xi = CorrVector::zero(raw);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < L; ++l)
        xi.set_component(k, l, i, t.kraus()[i].block(A.offset(k), B.offset(l), A.block_dim(k), B.block_dim(l)));
  const SubCorrespondence sub = generated_sub(raw, {xi}, tol);
  return GNSResult{sub.sub, sub.inclusion.apply_adjoint(xi)};
}

}  // namespace dilkit
