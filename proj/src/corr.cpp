#include "dilkit/corr.hpp"

#include "dilkit/cpmap.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <mutex>
#include <unordered_map>

namespace dilkit {

// ---------------------------------------------------------------------------
// Correspondence

struct Correspondence::Data {
  BlockAlgebra left, right;
  IMatrix mult;
  std::vector<std::shared_ptr<const Atom>> chain;
  std::vector<int> inter;
  long paths = 1;
  std::vector<BlockLayout> layouts;
};

std::shared_ptr<const Correspondence::Data> Correspondence::make(
    BlockAlgebra left, BlockAlgebra right, std::vector<std::shared_ptr<const Atom>> chain) {
  auto d = std::make_shared<Data>();
  d->left = std::move(left);
  d->right = std::move(right);
  d->chain = std::move(chain);
  const int K = d->left.num_blocks();
  const int L = d->right.num_blocks();
  if (d->chain.empty()) {
    d->mult = IMatrix::Identity(K, L);
  } else {
    d->mult = d->chain.front()->mult;
    for (std::size_t t = 1; t < d->chain.size(); ++t) {
      d->inter.push_back(d->chain[t]->left.num_blocks());
      d->mult = d->mult * d->chain[t]->mult;
    }
  }
  for (int c : d->inter) d->paths *= c;
  const std::size_t q = d->chain.size();
  d->layouts.resize(static_cast<std::size_t>(K) * L);
  std::vector<int> nodes(d->inter.size());
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) {
      BlockLayout& lay = d->layouts[static_cast<std::size_t>(k) * L + l];
      lay.path_offset.assign(d->paths, -1);
      lay.path_size.assign(d->paths, 0);
      for (long code = 0; code < d->paths; ++code) {
        long rest = code;
        for (int t = static_cast<int>(d->inter.size()) - 1; t >= 0; --t) {
          nodes[t] = static_cast<int>(rest % d->inter[t]);
          rest /= d->inter[t];
        }
        long size = 1;
        if (q == 0) {
          size = (k == l) ? 1 : 0;
        } else {
          for (std::size_t t = 0; t < q; ++t) {
            const int a = t == 0 ? k : nodes[t - 1];
            const int b = t + 1 == q ? l : nodes[t];
            size *= d->chain[t]->mult(a, b);
            if (size == 0) break;
          }
        }
        if (size > 0) {
          lay.path_offset[code] = lay.total;
          lay.path_size[code] = size;
          lay.total += size;
        }
      }
    }
  return d;
}

Correspondence::Correspondence() : Correspondence(trivial(BlockAlgebra({1}))) {}

Correspondence::Correspondence(BlockAlgebra left, BlockAlgebra right, IMatrix mult) {
  if (mult.rows() != left.num_blocks() || mult.cols() != right.num_blocks())
    throw Error(ErrorKind::DimensionMismatch, "multiplicity matrix shape does not match algebras");
  if ((mult.array() < 0).any()) throw Error(ErrorKind::InvalidInput, "negative multiplicity");
  auto atom = std::make_shared<Atom>(Atom{left, right, std::move(mult)});
  d_ = make(std::move(left), std::move(right), {atom});
}

Correspondence Correspondence::trivial(const BlockAlgebra& b) { return Correspondence(make(b, b, {})); }

Correspondence Correspondence::zero(const BlockAlgebra& left, const BlockAlgebra& right) {
  return Correspondence(left, right, IMatrix::Zero(left.num_blocks(), right.num_blocks()));
}

const BlockAlgebra& Correspondence::left() const { return d_->left; }
const BlockAlgebra& Correspondence::right() const { return d_->right; }
const IMatrix& Correspondence::mult() const { return d_->mult; }

long Correspondence::total_mult() const {
  long s = 0;
  for (Eigen::Index i = 0; i < mult().size(); ++i) s += mult().data()[i];
  return s;
}

long Correspondence::complex_dim() const {
  long s = 0;
  for (int k = 0; k < left().num_blocks(); ++k)
    for (int l = 0; l < right().num_blocks(); ++l)
      s += static_cast<long>(left().block_dim(k)) * right().block_dim(l) * dim(k, l);
  return s;
}

bool Correspondence::is_trivial() const { return d_->chain.empty(); }
bool Correspondence::is_zero() const { return (mult().array() == 0).all(); }
int Correspondence::chain_length() const { return static_cast<int>(d_->chain.size()); }
const std::vector<std::shared_ptr<const Atom>>& Correspondence::chain() const { return d_->chain; }
std::vector<int> Correspondence::intermediate_counts() const { return d_->inter; }

const BlockLayout& Correspondence::layout(int k, int l) const {
  return d_->layouts[static_cast<std::size_t>(k) * right().num_blocks() + l];
}

std::vector<int> Correspondence::decode_path(long code) const {
  std::vector<int> nodes(d_->inter.size());
  for (int t = static_cast<int>(d_->inter.size()) - 1; t >= 0; --t) {
    nodes[t] = static_cast<int>(code % d_->inter[t]);
    code /= d_->inter[t];
  }
  return nodes;
}

bool Correspondence::same_shape(const Correspondence& o) const {
  if (d_ == o.d_) return true;
  if (left() != o.left() || right() != o.right() || mult() != o.mult()) return false;
  // Multiplicity indices are laid out along the chain, so the factorisation
  // has to agree as well.
  if (chain().size() != o.chain().size()) return false;
  for (std::size_t t = 0; t < chain().size(); ++t) {
    const Atom& a = *chain()[t];
    const Atom& b = *o.chain()[t];
    if (&a == &b) continue;
    if (a.left != b.left || a.right != b.right || a.mult != b.mult) return false;
  }
  return true;
}

Correspondence tensor(const Correspondence& e, const Correspondence& f) {
  require_same(e.right(), f.left(), "tensor: right algebra of the first factor must be the left algebra of the second");
  if (e.is_trivial()) return f;
  if (f.is_trivial()) return e;
  auto chain = e.chain();
  chain.insert(chain.end(), f.chain().begin(), f.chain().end());
  return Correspondence(Correspondence::make(e.left(), f.right(), std::move(chain)));
}

Correspondence tensor_power(const Correspondence& e, int n) {
  require_same(e.left(), e.right(), "tensor_power");
  Correspondence out = Correspondence::trivial(e.left());
  for (int i = 0; i < n; ++i) out = tensor(out, e);
  return out;
}

Correspondence tensor_chain(const std::vector<Correspondence>& factors, const BlockAlgebra& base) {
  Correspondence out = Correspondence::trivial(base);
  for (const auto& f : factors) out = tensor(out, f);
  return out;
}

namespace {

void tensor_pairs(const Correspondence& x, const Correspondence& y, const Correspondence& xy, int k, int l,
                  const std::function<void(int, long, long, long)>& f) {
  if (x.is_trivial()) {
    for (long i = 0; i < y.dim(k, l); ++i) f(k, 0, i, i);
    return;
  }
  if (y.is_trivial()) {
    for (long i = 0; i < x.dim(k, l); ++i) f(l, i, 0, i);
    return;
  }
  const int J = x.right().num_blocks();
  long py = 1;
  for (int c : y.intermediate_counts()) py *= c;
  long px = 1;
  for (int c : x.intermediate_counts()) px *= c;
  const BlockLayout& lxy = xy.layout(k, l);
  for (int j = 0; j < J; ++j) {
    const BlockLayout& lx = x.layout(k, j);
    const BlockLayout& ly = y.layout(j, l);
    if (lx.total == 0 || ly.total == 0) continue;
    for (long cx = 0; cx < px; ++cx) {
      if (lx.path_offset[cx] < 0) continue;
      for (long cy = 0; cy < py; ++cy) {
        if (ly.path_offset[cy] < 0) continue;
        const long cxy = (cx * J + j) * py + cy;
        const long off = lxy.path_offset[cxy];
        const long sx = lx.path_size[cx], sy = ly.path_size[cy];
        for (long mx = 0; mx < sx; ++mx)
          for (long my = 0; my < sy; ++my)
            f(j, lx.path_offset[cx] + mx, ly.path_offset[cy] + my, off + mx * sy + my);
      }
    }
  }
}

}  // namespace

void for_each_tensor_pair(const Correspondence& x, const Correspondence& y, int k, int l,
                          const std::function<void(int, long, long, long)>& f) {
  tensor_pairs(x, y, tensor(x, y), k, l, f);
}

// ---------------------------------------------------------------------------
// CorrVector

CorrVector::CorrVector(Correspondence parent, std::vector<CMatrix> blocks)
    : parent_(std::move(parent)), blocks_(std::move(blocks)) {
  const int K = parent_.left().num_blocks(), L = parent_.right().num_blocks();
  if (static_cast<int>(blocks_.size()) != K * L) throw Error(ErrorKind::DimensionMismatch, "CorrVector block count");
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) {
      const CMatrix& b = blocks_[static_cast<std::size_t>(k) * L + l];
      if (b.rows() != parent_.dim(k, l) ||
          b.cols() != static_cast<Eigen::Index>(parent_.left().block_dim(k)) * parent_.right().block_dim(l))
        throw Error(ErrorKind::DimensionMismatch, "CorrVector block shape");
    }
}

CorrVector CorrVector::zero(const Correspondence& parent) {
  std::vector<CMatrix> blocks;
  for (int k = 0; k < parent.left().num_blocks(); ++k)
    for (int l = 0; l < parent.right().num_blocks(); ++l)
      blocks.push_back(CMatrix::Zero(parent.dim(k, l),
                                     static_cast<Eigen::Index>(parent.left().block_dim(k)) * parent.right().block_dim(l)));
  return CorrVector(parent, std::move(blocks));
}

CorrVector CorrVector::unit(const BlockAlgebra& b) {
  CorrVector v = zero(Correspondence::trivial(b));
  for (int k = 0; k < b.num_blocks(); ++k) {
    const int n = b.block_dim(k);
    CMatrix id = CMatrix::Identity(n, n);
    v.block(k, k).row(0) = Eigen::Map<const CMatrix>(id.data(), 1, n * n);
  }
  return v;
}

const CMatrix& CorrVector::block(int k, int l) const {
  return blocks_[static_cast<std::size_t>(k) * parent_.right().num_blocks() + l];
}
CMatrix& CorrVector::block(int k, int l) {
  return blocks_[static_cast<std::size_t>(k) * parent_.right().num_blocks() + l];
}

CMatrix CorrVector::component(int k, int l, long m) const {
  const int nk = parent_.left().block_dim(k), nl = parent_.right().block_dim(l);
  CMatrix row = block(k, l).row(m);
  return Eigen::Map<const CMatrix>(row.data(), nk, nl);
}

void CorrVector::set_component(int k, int l, long m, const CMatrix& x) {
  const int nk = parent_.left().block_dim(k), nl = parent_.right().block_dim(l);
  if (x.rows() != nk || x.cols() != nl) throw Error(ErrorKind::DimensionMismatch, "component shape");
  block(k, l).row(m) = Eigen::Map<const CMatrix>(x.data(), 1, static_cast<Eigen::Index>(nk) * nl);
}

CMatrix CorrVector::inner(const CorrVector& y) const {
  if (!parent_.same_shape(y.parent_)) throw Error(ErrorKind::AlgebraMismatch, "inner product across correspondences");
  const auto& B = parent_.right();
  CMatrix out = CMatrix::Zero(B.total_dim(), B.total_dim());
  for (int k = 0; k < parent_.left().num_blocks(); ++k)
    for (int l = 0; l < B.num_blocks(); ++l) {
      if (parent_.dim(k, l) == 0) continue;
      const int nk = parent_.left().block_dim(k), nl = B.block_dim(l);
      const CMatrix m = block(k, l).adjoint() * y.block(k, l);
      for (int s = 0; s < nl; ++s)
        for (int t = 0; t < nl; ++t) {
          cplx acc = 0.0;
          for (int r = 0; r < nk; ++r) acc += m(r + s * nk, r + t * nk);
          out(B.offset(l) + s, B.offset(l) + t) += acc;
        }
    }
  return out;
}

CorrVector CorrVector::left_mul(const CMatrix& a) const {
  const auto& A = parent_.left();
  if (a.rows() != A.total_dim() || a.cols() != A.total_dim()) throw Error(ErrorKind::DimensionMismatch, "left_mul");
  CorrVector out = *this;
  for (int k = 0; k < A.num_blocks(); ++k) {
    const int nk = A.block_dim(k);
    const CMatrix ak = a.block(A.offset(k), A.offset(k), nk, nk);
    for (int l = 0; l < parent_.right().num_blocks(); ++l) {
      if (parent_.dim(k, l) == 0) continue;
      const int nl = parent_.right().block_dim(l);
      out.block(k, l) = block(k, l) * kron(CMatrix::Identity(nl, nl), ak.transpose());
    }
  }
  return out;
}

CorrVector CorrVector::right_mul(const CMatrix& b) const {
  const auto& B = parent_.right();
  if (b.rows() != B.total_dim() || b.cols() != B.total_dim()) throw Error(ErrorKind::DimensionMismatch, "right_mul");
  CorrVector out = *this;
  for (int l = 0; l < B.num_blocks(); ++l) {
    const int nl = B.block_dim(l);
    const CMatrix bl = b.block(B.offset(l), B.offset(l), nl, nl);
    for (int k = 0; k < parent_.left().num_blocks(); ++k) {
      if (parent_.dim(k, l) == 0) continue;
      const int nk = parent_.left().block_dim(k);
      out.block(k, l) = block(k, l) * kron(bl, CMatrix::Identity(nk, nk));
    }
  }
  return out;
}

CorrVector CorrVector::operator+(const CorrVector& o) const {
  if (!parent_.same_shape(o.parent_)) throw Error(ErrorKind::AlgebraMismatch, "sum across correspondences");
  CorrVector out = *this;
  for (std::size_t i = 0; i < blocks_.size(); ++i) out.blocks_[i] += o.blocks_[i];
  return out;
}

CorrVector CorrVector::operator-(const CorrVector& o) const { return *this + o.scaled(-1.0); }

CorrVector CorrVector::scaled(cplx s) const {
  CorrVector out = *this;
  for (auto& b : out.blocks_) b *= s;
  return out;
}

double CorrVector::norm() const { return std::sqrt(op_norm(inner(*this))); }

double CorrVector::frobenius() const {
  double s = 0.0;
  for (const auto& b : blocks_) s += b.squaredNorm();
  return std::sqrt(s);
}

CorrVector tensor(const CorrVector& x, const CorrVector& y) {
  const Correspondence& X = x.parent();
  const Correspondence& Y = y.parent();
  const Correspondence XY = tensor(X, Y);
  CorrVector out = CorrVector::zero(XY);
  const auto& A = X.left();
  const auto& J = X.right();
  const auto& C = Y.right();
  for (int k = 0; k < A.num_blocks(); ++k)
    for (int l = 0; l < C.num_blocks(); ++l) {
      if (XY.dim(k, l) == 0) continue;
      CMatrix& dst = out.block(k, l);
      const int nk = A.block_dim(k), nl = C.block_dim(l);
      tensor_pairs(X, Y, XY, k, l, [&](int j, long ix, long iy, long ixy) {
        const int nj = J.block_dim(j);
        if (nk == 1 && nj == 1 && nl == 1) {
          dst(ixy, 0) = x.block(k, j)(ix, 0) * y.block(j, l)(iy, 0);
          return;
        }
        CMatrix rx = x.block(k, j).row(ix);
        CMatrix ry = y.block(j, l).row(iy);
        CMatrix prod = Eigen::Map<const CMatrix>(rx.data(), nk, nj) * Eigen::Map<const CMatrix>(ry.data(), nj, nl);
        dst.row(ixy) = Eigen::Map<const CMatrix>(prod.data(), 1, static_cast<Eigen::Index>(nk) * nl);
      });
    }
  return out;
}

// ---------------------------------------------------------------------------
// BilinearMap nodes

struct BilinearMap::Node {
  Correspondence source, target;
  Node(Correspondence s, Correspondence t) : source(std::move(s)), target(std::move(t)) {}
  virtual ~Node() = default;
  virtual CMatrix apply(int k, int l, const CMatrix& x) const = 0;
  virtual CMatrix apply_adj(int k, int l, const CMatrix& y) const = 0;
  virtual bool dense() const { return false; }
};

namespace {

using NodePtr = std::shared_ptr<const BilinearMap::Node>;

struct DenseNode final : BilinearMap::Node {
  std::vector<CMatrix> blocks;
  DenseNode(Correspondence s, Correspondence t, std::vector<CMatrix> b)
      : Node(std::move(s), std::move(t)), blocks(std::move(b)) {}
  const CMatrix& at(int k, int l) const { return blocks[static_cast<std::size_t>(k) * source.right().num_blocks() + l]; }
  CMatrix apply(int k, int l, const CMatrix& x) const override { return at(k, l) * x; }
  CMatrix apply_adj(int k, int l, const CMatrix& y) const override { return at(k, l).adjoint() * y; }
  bool dense() const override { return true; }
};

struct IdentityNode final : BilinearMap::Node {
  explicit IdentityNode(const Correspondence& e) : Node(e, e) {}
  CMatrix apply(int, int, const CMatrix& x) const override { return x; }
  CMatrix apply_adj(int, int, const CMatrix& y) const override { return y; }
};

struct ComposeNode final : BilinearMap::Node {
  NodePtr first, second;  // second o first
  ComposeNode(NodePtr f, NodePtr s) : Node(f->source, s->target), first(std::move(f)), second(std::move(s)) {}
  CMatrix apply(int k, int l, const CMatrix& x) const override { return second->apply(k, l, first->apply(k, l, x)); }
  CMatrix apply_adj(int k, int l, const CMatrix& y) const override {
    return first->apply_adj(k, l, second->apply_adj(k, l, y));
  }
};

struct AdjointNode final : BilinearMap::Node {
  NodePtr inner;
  explicit AdjointNode(NodePtr n) : Node(n->target, n->source), inner(std::move(n)) {}
  CMatrix apply(int k, int l, const CMatrix& x) const override { return inner->apply_adj(k, l, x); }
  CMatrix apply_adj(int k, int l, const CMatrix& y) const override { return inner->apply(k, l, y); }
};

struct SumNode final : BilinearMap::Node {
  NodePtr a, b;
  cplx sa, sb;
  SumNode(NodePtr a_, NodePtr b_, cplx sa_, cplx sb_)
      : Node(a_->source, a_->target), a(std::move(a_)), b(std::move(b_)), sa(sa_), sb(sb_) {}
  CMatrix apply(int k, int l, const CMatrix& x) const override {
    CMatrix out = sa * a->apply(k, l, x);
    if (sb != cplx(0.0)) out += sb * b->apply(k, l, x);
    return out;
  }
  CMatrix apply_adj(int k, int l, const CMatrix& y) const override {
    CMatrix out = std::conj(sa) * a->apply_adj(k, l, y);
    if (sb != cplx(0.0)) out += std::conj(sb) * b->apply_adj(k, l, y);
    return out;
  }
};

// Gather tables for id_P (.) C (.) id_S at one outer block (k,l), grouped by
// the junction blocks (a,b) where the inner map acts.
struct GatherGroup {
  int a = 0, b = 0;
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> src;  // d^C_ab x groups
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> tgt;  // d^C'_ab x groups
};

struct AmplifyTables {
  std::vector<std::vector<GatherGroup>> per_block;  // k*L + l
};

std::shared_ptr<const AmplifyTables> build_tables(const Correspondence& P, const Correspondence& C,
                                                  const Correspondence& Cp, const Correspondence& S) {
  auto tables = std::make_shared<AmplifyTables>();
  const BlockAlgebra& A = P.left();
  const BlockAlgebra& Z = S.right();
  const int K = A.num_blocks(), L = Z.num_blocks();
  const int Ka = C.left().num_blocks(), Kb = C.right().num_blocks();
  tables->per_block.resize(static_cast<std::size_t>(K) * L);

  const Correspondence PC = tensor(P, C), PCp = tensor(P, Cp);
  const Correspondence src = tensor(PC, S), tgt = tensor(PCp, S);

  struct Decomp {
    int a;
    long ip, ic;
  };
  for (int k = 0; k < K; ++k) {
    // iPC at (k,b) -> (a, iP, iC)
    std::vector<std::vector<Decomp>> dec(Kb), decp(Kb);
    for (int b = 0; b < Kb; ++b) {
      dec[b].resize(PC.dim(k, b));
      decp[b].resize(PCp.dim(k, b));
      tensor_pairs(P, C, PC, k, b, [&](int a, long ip, long ic, long ipc) { dec[b][ipc] = {a, ip, ic}; });
      tensor_pairs(P, Cp, PCp, k, b, [&](int a, long ip, long ic, long ipc) { decp[b][ipc] = {a, ip, ic}; });
    }
    long maxp = 1;
    for (int a = 0; a < Ka; ++a) maxp = std::max<long>(maxp, P.is_trivial() ? 1 : P.dim(k, a));
    for (int l = 0; l < L; ++l) {
      long maxs = 1;
      for (int b = 0; b < Kb; ++b) maxs = std::max<long>(maxs, S.is_trivial() ? 1 : S.dim(b, l));
      std::map<std::pair<int, int>, std::unordered_map<std::int64_t, int>> gid;
      std::map<std::pair<int, int>, std::vector<std::vector<int>>> srcs, tgts;
      auto key_of = [&](long ip, long is) { return static_cast<std::int64_t>(ip) * maxs + is; };
      tensor_pairs(PC, S, src, k, l, [&](int b, long ipc, long is, long row) {
        const Decomp& d = dec[b][ipc];
        auto& ids = gid[{d.a, b}];
        auto& lists = srcs[{d.a, b}];
        const auto key = key_of(d.ip, is);
        auto it = ids.find(key);
        int g;
        if (it == ids.end()) {
          g = static_cast<int>(lists.size());
          ids.emplace(key, g);
          lists.emplace_back(C.dim(d.a, b), -1);
        } else {
          g = it->second;
        }
        lists[g][d.ic] = static_cast<int>(row);
      });
      tensor_pairs(PCp, S, tgt, k, l, [&](int b, long ipc, long is, long row) {
        const Decomp& d = decp[b][ipc];
        auto& ids = gid[{d.a, b}];
        auto& lists = tgts[{d.a, b}];
        const auto key = key_of(d.ip, is);
        auto it = ids.find(key);
        if (it == ids.end()) return;  // source side is zero there; target rows stay zero
        const int g = it->second;
        if (lists.size() < srcs[{d.a, b}].size()) lists.resize(srcs[{d.a, b}].size());
        if (lists[g].empty()) lists[g].assign(Cp.dim(d.a, b), -1);
        lists[g][d.ic] = static_cast<int>(row);
      });
      auto& groups = tables->per_block[static_cast<std::size_t>(k) * L + l];
      for (auto& [ab, lists] : srcs) {
        GatherGroup gg;
        gg.a = ab.first;
        gg.b = ab.second;
        const int G = static_cast<int>(lists.size());
        const int dc = C.dim(gg.a, gg.b), dcp = Cp.dim(gg.a, gg.b);
        gg.src.resize(dc, G);
        gg.tgt.resize(dcp, G);
        auto& tl = tgts[ab];
        for (int g = 0; g < G; ++g) {
          for (int i = 0; i < dc; ++i) gg.src(i, g) = lists[g][i];
          for (int i = 0; i < dcp; ++i) gg.tgt(i, g) = (g < static_cast<int>(tl.size()) && !tl[g].empty()) ? tl[g][i] : -1;
        }
        groups.push_back(std::move(gg));
      }
    }
  }
  return tables;
}

struct AmplifyNode final : BilinearMap::Node {
  BilinearMap inner;
  std::vector<CMatrix> inner_blocks;  // a*Kb + b
  int kb = 1;
  std::shared_ptr<const AmplifyTables> tables;

  AmplifyNode(Correspondence s, Correspondence t, BilinearMap in, std::shared_ptr<const AmplifyTables> tb)
      : Node(std::move(s), std::move(t)), inner(std::move(in)), tables(std::move(tb)) {
    const int Ka = inner.source().left().num_blocks();
    kb = inner.source().right().num_blocks();
    // Composite inner maps are applied lazily; materialising them costs more
    // than the gathered products they would save.
    if (inner.is_dense())
      for (int a = 0; a < Ka; ++a)
        for (int b = 0; b < kb; ++b) inner_blocks.push_back(inner.block(a, b));
  }

  CMatrix run(bool adj, int k, int l, long rows_out, const CMatrix& x) const {
    const int L = target.right().num_blocks();
    CMatrix out = CMatrix::Zero(rows_out, x.cols());
    const Eigen::Index c = x.cols();
    for (const GatherGroup& gg : tables->per_block[static_cast<std::size_t>(k) * L + l]) {
      const auto& sidx = adj ? gg.tgt : gg.src;
      const auto& tidx = adj ? gg.src : gg.tgt;
      const Eigen::Index G = sidx.cols();
      if (tidx.rows() == 0 || G == 0) continue;
      CMatrix z(sidx.rows(), G * c);
      for (Eigen::Index g = 0; g < G; ++g)
        for (Eigen::Index i = 0; i < sidx.rows(); ++i) {
          const int r = sidx(i, g);
          for (Eigen::Index cc = 0; cc < c; ++cc) z(i, g * c + cc) = r >= 0 ? x(r, cc) : cplx(0.0);
        }
      CMatrix w;
      if (inner_blocks.empty()) {
        w = adj ? inner.apply_adjoint_block(gg.a, gg.b, z) : inner.apply_block(gg.a, gg.b, z);
      } else {
        const CMatrix& m = inner_blocks[static_cast<std::size_t>(gg.a) * kb + gg.b];
        w = adj ? CMatrix(m.adjoint() * z) : CMatrix(m * z);
      }
      for (Eigen::Index g = 0; g < G; ++g)
        for (Eigen::Index i = 0; i < tidx.rows(); ++i) {
          const int r = tidx(i, g);
          if (r < 0) continue;
          for (Eigen::Index cc = 0; cc < c; ++cc) out(r, cc) = w(i, g * c + cc);
        }
    }
    return out;
  }

  CMatrix apply(int k, int l, const CMatrix& x) const override { return run(false, k, l, target.dim(k, l), x); }
  CMatrix apply_adj(int k, int l, const CMatrix& y) const override { return run(true, k, l, source.dim(k, l), y); }
};

// Gather tables depend only on the shapes involved, so they are cached by a
// serialised shape key and shared between maps.
void push_algebra(std::vector<int>& key, const BlockAlgebra& a) {
  key.push_back(a.num_blocks());
  for (int k = 0; k < a.num_blocks(); ++k) key.push_back(a.block_dim(k));
}

void push_shape(std::vector<int>& key, const Correspondence& c) {
  key.push_back(-1);
  if (c.is_trivial()) push_algebra(key, c.left());
  for (const auto& atom : c.chain()) {
    key.push_back(-2);
    push_algebra(key, atom->left);
    push_algebra(key, atom->right);
    for (Eigen::Index i = 0; i < atom->mult.size(); ++i) key.push_back(atom->mult.data()[i]);
  }
}

constexpr std::size_t kTableCacheLimit = 512;
std::mutex g_table_mutex;
std::map<std::vector<int>, std::shared_ptr<const AmplifyTables>> g_table_cache;

std::shared_ptr<const AmplifyTables> cached_tables(const Correspondence& P, const Correspondence& C,
                                                   const Correspondence& Cp, const Correspondence& S) {
  std::vector<int> key;
  push_shape(key, P);
  push_shape(key, C);
  push_shape(key, Cp);
  push_shape(key, S);
  {
    std::lock_guard<std::mutex> lock(g_table_mutex);
    auto it = g_table_cache.find(key);
    if (it != g_table_cache.end()) return it->second;
  }
  auto tables = build_tables(P, C, Cp, S);
  std::lock_guard<std::mutex> lock(g_table_mutex);
  if (g_table_cache.size() >= kTableCacheLimit) g_table_cache.clear();
  g_table_cache.emplace(std::move(key), tables);
  return tables;
}

}  // namespace

BilinearMap::BilinearMap(Correspondence source, Correspondence target, std::vector<CMatrix> blocks) {
  if (source.left() != target.left() || source.right() != target.right())
    throw Error(ErrorKind::AlgebraMismatch, "bilinear map must preserve the algebra pair");
  const int K = source.left().num_blocks(), L = source.right().num_blocks();
  if (static_cast<int>(blocks.size()) != K * L) throw Error(ErrorKind::DimensionMismatch, "bilinear map block count");
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) {
      const CMatrix& b = blocks[static_cast<std::size_t>(k) * L + l];
      if (b.rows() != target.dim(k, l) || b.cols() != source.dim(k, l))
        throw Error(ErrorKind::DimensionMismatch, "bilinear map block shape");
    }
  n_ = std::make_shared<DenseNode>(std::move(source), std::move(target), std::move(blocks));
}

BilinearMap BilinearMap::identity(const Correspondence& e) { return BilinearMap(std::make_shared<IdentityNode>(e)); }

BilinearMap BilinearMap::zero(const Correspondence& source, const Correspondence& target) {
  std::vector<CMatrix> blocks;
  for (int k = 0; k < source.left().num_blocks(); ++k)
    for (int l = 0; l < source.right().num_blocks(); ++l)
      blocks.push_back(CMatrix::Zero(target.dim(k, l), source.dim(k, l)));
  return BilinearMap(source, target, std::move(blocks));
}

const Correspondence& BilinearMap::source() const { return n_->source; }
const Correspondence& BilinearMap::target() const { return n_->target; }

CMatrix BilinearMap::apply_block(int k, int l, const CMatrix& x) const {
  if (x.rows() != source().dim(k, l)) throw Error(ErrorKind::DimensionMismatch, "apply_block rows");
  if (target().dim(k, l) == 0) return CMatrix::Zero(0, x.cols());
  if (x.rows() == 0) return CMatrix::Zero(target().dim(k, l), x.cols());
  return n_->apply(k, l, x);
}

CMatrix BilinearMap::apply_adjoint_block(int k, int l, const CMatrix& y) const {
  if (y.rows() != target().dim(k, l)) throw Error(ErrorKind::DimensionMismatch, "apply_adjoint_block rows");
  if (source().dim(k, l) == 0) return CMatrix::Zero(0, y.cols());
  if (y.rows() == 0) return CMatrix::Zero(source().dim(k, l), y.cols());
  return n_->apply_adj(k, l, y);
}

CorrVector BilinearMap::apply(const CorrVector& x) const {
  if (!x.parent().same_shape(source())) throw Error(ErrorKind::DimensionMismatch, "apply: vector not in source");
  CorrVector out = CorrVector::zero(target());
  for (int k = 0; k < source().left().num_blocks(); ++k)
    for (int l = 0; l < source().right().num_blocks(); ++l) out.block(k, l) = apply_block(k, l, x.block(k, l));
  return out;
}

CorrVector BilinearMap::apply_adjoint(const CorrVector& y) const {
  if (!y.parent().same_shape(target())) throw Error(ErrorKind::DimensionMismatch, "apply_adjoint: vector not in target");
  CorrVector out = CorrVector::zero(source());
  for (int k = 0; k < source().left().num_blocks(); ++k)
    for (int l = 0; l < source().right().num_blocks(); ++l) out.block(k, l) = apply_adjoint_block(k, l, y.block(k, l));
  return out;
}

CMatrix BilinearMap::block(int k, int l) const {
  if (n_->dense()) return static_cast<const DenseNode&>(*n_).at(k, l);
  const int d = source().dim(k, l);
  return apply_block(k, l, CMatrix::Identity(d, d));
}

BilinearMap BilinearMap::materialize() const {
  if (is_dense()) return *this;
  std::vector<CMatrix> blocks;
  for (int k = 0; k < source().left().num_blocks(); ++k)
    for (int l = 0; l < source().right().num_blocks(); ++l) blocks.push_back(block(k, l));
  return BilinearMap(source(), target(), std::move(blocks));
}

bool BilinearMap::is_dense() const { return n_->dense(); }

BilinearMap BilinearMap::adjoint() const {
  if (auto a = std::dynamic_pointer_cast<const AdjointNode>(n_)) return BilinearMap(a->inner);
  return BilinearMap(std::make_shared<AdjointNode>(n_));
}

BilinearMap BilinearMap::then(const BilinearMap& next) const { return compose(next, *this); }

BilinearMap compose(const BilinearMap& a, const BilinearMap& b) {
  if (!b.target().same_shape(a.source())) throw Error(ErrorKind::DimensionMismatch, "compose: shapes do not chain");
  return BilinearMap(std::make_shared<ComposeNode>(b.n_, a.n_));
}

BilinearMap BilinearMap::operator+(const BilinearMap& o) const {
  if (!source().same_shape(o.source()) || !target().same_shape(o.target()))
    throw Error(ErrorKind::DimensionMismatch, "sum of bilinear maps with different shapes");
  return BilinearMap(std::make_shared<SumNode>(n_, o.n_, 1.0, 1.0));
}

BilinearMap BilinearMap::operator-(const BilinearMap& o) const {
  if (!source().same_shape(o.source()) || !target().same_shape(o.target()))
    throw Error(ErrorKind::DimensionMismatch, "difference of bilinear maps with different shapes");
  return BilinearMap(std::make_shared<SumNode>(n_, o.n_, 1.0, -1.0));
}

BilinearMap BilinearMap::scaled(cplx s) const { return BilinearMap(std::make_shared<SumNode>(n_, n_, s, 0.0)); }

BilinearMap BilinearMap::amplify(const Correspondence& prefix, const BilinearMap& inner, const Correspondence& suffix) {
  require_same(prefix.right(), inner.source().left(), "amplify: prefix");
  require_same(inner.source().right(), suffix.left(), "amplify: suffix");
  if (prefix.is_trivial() && suffix.is_trivial()) return inner;
  const Correspondence src = tensor(tensor(prefix, inner.source()), suffix);
  const Correspondence tgt = tensor(tensor(prefix, inner.target()), suffix);

  auto tables = cached_tables(prefix, inner.source(), inner.target(), suffix);
  return BilinearMap(std::make_shared<AmplifyNode>(src, tgt, inner, std::move(tables)));
}

BilinearMap tensor(const BilinearMap& a, const BilinearMap& b) {
  require_same(a.source().right(), b.source().left(), "tensor of bilinear maps");
  const BilinearMap idb = BilinearMap::amplify(a.source(), b, Correspondence::trivial(b.source().right()));
  const BilinearMap aid = BilinearMap::amplify(Correspondence::trivial(a.source().left()), a, b.target());
  return compose(aid, idb);
}

double BilinearMap::norm() const {
  double n = 0.0;
  for (int k = 0; k < source().left().num_blocks(); ++k)
    for (int l = 0; l < source().right().num_blocks(); ++l) n = std::max(n, op_norm(block(k, l)));
  return n;
}

// ---------------------------------------------------------------------------
// Subcorrespondences

namespace {

SubCorrespondence sub_from_bases(const Correspondence& ambient, std::vector<CMatrix> bases) {
  const int K = ambient.left().num_blocks(), L = ambient.right().num_blocks();
  IMatrix mult(K, L);
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) mult(k, l) = static_cast<int>(bases[static_cast<std::size_t>(k) * L + l].cols());
  Correspondence sub(ambient.left(), ambient.right(), mult);
  return SubCorrespondence{sub, BilinearMap(sub, ambient, std::move(bases))};
}

}  // namespace

SubCorrespondence generated_sub(const Correspondence& ambient, const std::vector<CorrVector>& vectors,
                                const Tolerance& tol) {
  const int K = ambient.left().num_blocks(), L = ambient.right().num_blocks();
  std::vector<CMatrix> stacks;
  double smax = 0.0;
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) {
      const long d = ambient.dim(k, l);
      Eigen::Index cols = 0;
      for (const auto& v : vectors) {
        if (!v.parent().same_shape(ambient)) throw Error(ErrorKind::DimensionMismatch, "generated_sub: foreign vector");
        cols += v.block(k, l).cols();
      }
      CMatrix m(d, cols);
      Eigen::Index c = 0;
      for (const auto& v : vectors) {
        m.middleCols(c, v.block(k, l).cols()) = v.block(k, l);
        c += v.block(k, l).cols();
      }
      smax = std::max(smax, op_norm(m));
      stacks.push_back(std::move(m));
    }
  const double cut = tol.rank_rel * smax;
  std::vector<CMatrix> bases;
  for (auto& m : stacks) bases.push_back(smax > 0.0 ? range_basis_above(m, cut) : CMatrix(m.rows(), 0));
  return sub_from_bases(ambient, std::move(bases));
}

SubCorrespondence complement(const SubCorrespondence& s, const Tolerance& tol) {
  const Correspondence& ambient = s.inclusion.target();
  const int K = ambient.left().num_blocks(), L = ambient.right().num_blocks();
  std::vector<CMatrix> bases;
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) bases.push_back(complement_basis(s.inclusion.block(k, l), ambient.dim(k, l), tol));
  return sub_from_bases(ambient, std::move(bases));
}

SubCorrespondence span_of(const Correspondence& ambient, const std::vector<BilinearMap>& inclusions,
                          const Tolerance& tol) {
  const int K = ambient.left().num_blocks(), L = ambient.right().num_blocks();
  std::vector<CMatrix> stacks;
  double smax = 0.0;
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) {
      Eigen::Index cols = 0;
      std::vector<CMatrix> parts;
      for (const auto& inc : inclusions) {
        if (!inc.target().same_shape(ambient)) throw Error(ErrorKind::DimensionMismatch, "span_of: foreign map");
        parts.push_back(inc.block(k, l));
        cols += parts.back().cols();
      }
      CMatrix m(ambient.dim(k, l), cols);
      Eigen::Index c = 0;
      for (const auto& p : parts) {
        m.middleCols(c, p.cols()) = p;
        c += p.cols();
      }
      smax = std::max(smax, op_norm(m));
      stacks.push_back(std::move(m));
    }
  std::vector<CMatrix> bases;
  for (auto& m : stacks) bases.push_back(smax > 0.0 ? range_basis_above(m, tol.rank_rel * smax) : CMatrix(m.rows(), 0));
  return sub_from_bases(ambient, std::move(bases));
}

SubCorrespondence image_of(const BilinearMap& m, const Tolerance& tol) { return span_of(m.target(), {m}, tol); }

bool is_contained(const SubCorrespondence& a, const SubCorrespondence& b, const Tolerance& tol) {
  const Correspondence& amb = a.inclusion.target();
  for (int k = 0; k < amb.left().num_blocks(); ++k)
    for (int l = 0; l < amb.right().num_blocks(); ++l) {
      const CMatrix qa = a.inclusion.block(k, l);
      const CMatrix qb = b.inclusion.block(k, l);
      const CMatrix rest = qa - qb * (qb.adjoint() * qa);
      if (rest.norm() > tol.eq_rel * std::max(1.0, qa.norm())) return false;
    }
  return true;
}

DirectSum direct_sum(const Correspondence& e, const Correspondence& f) {
  require_same(e.left(), f.left(), "direct_sum left");
  require_same(e.right(), f.right(), "direct_sum right");
  Correspondence s(e.left(), e.right(), e.mult() + f.mult());
  std::vector<CMatrix> b1, b2;
  for (int k = 0; k < e.left().num_blocks(); ++k)
    for (int l = 0; l < e.right().num_blocks(); ++l) {
      const int de = e.dim(k, l), df = f.dim(k, l);
      CMatrix i1 = CMatrix::Zero(de + df, de), i2 = CMatrix::Zero(de + df, df);
      i1.topRows(de).setIdentity();
      i2.bottomRows(df).setIdentity();
      b1.push_back(i1);
      b2.push_back(i2);
    }
  return DirectSum{s, BilinearMap(e, s, std::move(b1)), BilinearMap(f, s, std::move(b2))};
}

// ---------------------------------------------------------------------------
// Gram presentations

GramPresentation GramPresentation::from_function(const BlockAlgebra& left, const BlockAlgebra& right, int count,
                                                 const std::function<CMatrix(int, int, const CMatrix&)>& gram) {
  GramPresentation g{left, right, count, {}};
  const int K = left.num_blocks(), L = right.num_blocks();
  g.scalarized.assign(static_cast<std::size_t>(K) * L, CMatrix());
  for (int k = 0; k < K; ++k) {
    const int nk = left.block_dim(k);
    for (int l = 0; l < L; ++l) {
      const int nl = right.block_dim(l);
      g.scalarized[static_cast<std::size_t>(k) * L + l] = CMatrix::Zero(count * nk * nl, count * nk * nl);
    }
    for (int r = 0; r < nk; ++r)
      for (int s = 0; s < nk; ++s) {
        CMatrix e = CMatrix::Zero(left.total_dim(), left.total_dim());
        e(left.offset(k) + r, left.offset(k) + s) = 1.0;
        for (int i = 0; i < count; ++i)
          for (int j = 0; j < count; ++j) {
            const CMatrix v = gram(i, j, e);
            for (int l = 0; l < L; ++l) {
              const int nl = right.block_dim(l);
              const int nn = nk * nl;
              CMatrix& G = g.scalarized[static_cast<std::size_t>(k) * L + l];
              for (int t = 0; t < nl; ++t)
                for (int tp = 0; tp < nl; ++tp)
                  G(i * nn + r + t * nk, j * nn + s + tp * nk) = v(right.offset(l) + t, right.offset(l) + tp);
            }
          }
      }
  }
  return g;
}

Canonical canonicalize(const GramPresentation& g, const Tolerance& tol) {
  const int K = g.left.num_blocks(), L = g.right.num_blocks();
  double lmax = 0.0;
  std::vector<Eigen::SelfAdjointEigenSolver<CMatrix>> eig(static_cast<std::size_t>(K) * L);
  for (int kl = 0; kl < K * L; ++kl) {
    const CMatrix& G = g.scalarized[kl];
    if (G.size() == 0) continue;
    if (!approx_equal(G, G.adjoint(), tol)) throw Error(ErrorKind::NotPositive, "Gram data is not Hermitian");
    eig[kl].compute(0.5 * (G + G.adjoint()));
    lmax = std::max(lmax, eig[kl].eigenvalues().cwiseAbs().maxCoeff());
  }
  IMatrix mult = IMatrix::Zero(K, L);
  std::vector<CMatrix> factors(static_cast<std::size_t>(K) * L);
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) {
      const int kl = k * L + l;
      const int nn = g.left.block_dim(k) * g.right.block_dim(l);
      if (g.scalarized[kl].size() == 0) {
        factors[kl] = CMatrix(0, static_cast<Eigen::Index>(g.count) * nn);
        continue;
      }
      const auto& ev = eig[kl].eigenvalues();
      if (ev(0) < -tol.eq_rel * std::max(1.0, lmax)) throw Error(ErrorKind::NotPositive, "Gram data is not positive");
      std::vector<Eigen::Index> keep;
      for (Eigen::Index i = ev.size() - 1; i >= 0; --i)
        if (ev(i) > tol.rank_rel * lmax) keep.push_back(i);
      CMatrix V(keep.size(), ev.size());
      for (std::size_t m = 0; m < keep.size(); ++m)
        V.row(m) = std::sqrt(ev(keep[m])) * eig[kl].eigenvectors().col(keep[m]).adjoint();
      mult(k, l) = static_cast<int>(keep.size());
      factors[kl] = std::move(V);
    }
  Correspondence corr(g.left, g.right, mult);
  std::vector<CorrVector> images;
  for (int i = 0; i < g.count; ++i) {
    CorrVector v = CorrVector::zero(corr);
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < L; ++l) {
        const int nn = g.left.block_dim(k) * g.right.block_dim(l);
        v.block(k, l) = factors[k * L + l].middleCols(static_cast<Eigen::Index>(i) * nn, nn);
      }
    images.push_back(std::move(v));
  }
  return Canonical{corr, images};
}

// ---------------------------------------------------------------------------
// Constrained isomorphisms

IsoResult iso_with_constraints(const Correspondence& e, const Correspondence& f, const std::vector<CorrVector>& xs,
                               const std::vector<CorrVector>& ys, const Tolerance& tol) {
  if (e.left() != f.left() || e.right() != f.right()) throw Error(ErrorKind::AlgebraMismatch, "iso_with_constraints");
  if (xs.size() != ys.size()) throw Error(ErrorKind::DimensionMismatch, "iso_with_constraints: |xs| != |ys|");
  const int K = e.left().num_blocks(), L = e.right().num_blocks();
  IsoResult res;
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l)
      if (e.dim(k, l) != f.dim(k, l)) {
        res.block = std::make_pair(k + 1, l + 1);
        res.dims = std::make_pair(e.dim(k, l), f.dim(k, l));
        return res;
      }
  std::vector<CMatrix> blocks;
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) {
      const int d = e.dim(k, l);
      const Eigen::Index nn = static_cast<Eigen::Index>(e.left().block_dim(k)) * e.right().block_dim(l);
      CMatrix X(d, nn * static_cast<Eigen::Index>(xs.size())), Y(d, nn * static_cast<Eigen::Index>(ys.size()));
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!xs[i].parent().same_shape(e) || !ys[i].parent().same_shape(f))
          throw Error(ErrorKind::DimensionMismatch, "iso_with_constraints: constraint vector outside its space");
        X.middleCols(static_cast<Eigen::Index>(i) * nn, nn) = xs[i].block(k, l);
        Y.middleCols(static_cast<Eigen::Index>(i) * nn, nn) = ys[i].block(k, l);
      }
      const CompletionResult c = unitary_completion_exists(X.transpose(), Y.transpose(), tol);
      if (!c.exists) {
        res.block = std::make_pair(k + 1, l + 1);
        res.gram_residual = c.gram_residual;
        return res;
      }
      blocks.push_back(*c.unitary);
    }
  res.exists = true;
  res.witness = BilinearMap(e, f, std::move(blocks));
  return res;
}

StrongCommuteResult strongly_commute(const CPMap& t, const CPMap& s, const Tolerance& tol) {
  require_same(t.domain(), t.codomain(), "strongly_commute: t must act on one algebra");
  require_same(s.domain(), s.codomain(), "strongly_commute: s must act on one algebra");
  require_same(t.domain(), s.domain(), "strongly_commute: maps act on different algebras");
  if (!maps_approx_equal(compose(t, s), compose(s, t), tol))
    throw Error(ErrorKind::NotCommuting, "strongly_commute: t o s != s o t");
  const GNSResult ge = gns(t, tol);
  const GNSResult gf = gns(s, tol);
  StrongCommuteResult r;
  const Correspondence ef = tensor(ge.corr, gf.corr);
  const Correspondence fe = tensor(gf.corr, ge.corr);
  r.mult_ef = ef.mult();
  r.mult_fe = fe.mult();
  r.iso = iso_with_constraints(ef, fe, {tensor(ge.cyclic, gf.cyclic)}, {tensor(gf.cyclic, ge.cyclic)}, tol);
  r.strongly = r.iso.exists;
  return r;
}

}  // namespace dilkit
