#include "dilkit/perm.hpp"

#include <algorithm>
#include <array>
#include <numeric>

namespace dilkit {

void validate_index_function(const IndexFunction& f, int p) {
  for (int v : f)
    if (v < 1 || v > p) throw Error(ErrorKind::InvalidInput, "index function value out of range");
}

long inversions(const IndexFunction& f) {
  long n = 0;
  for (std::size_t j = 0; j < f.size(); ++j)
    for (std::size_t i = j + 1; i < f.size(); ++i)
      if (f[j] > f[i]) ++n;
  return n;
}

Permutation sigma_f(const IndexFunction& f) {
  Permutation s(f.size());
  std::iota(s.begin(), s.end(), 1);
  std::stable_sort(s.begin(), s.end(), [&](int a, int b) { return f[a - 1] < f[b - 1]; });
  return s;
}

IndexFunction compose(const IndexFunction& f, const Permutation& sigma) {
  if (f.size() != sigma.size()) throw Error(ErrorKind::DimensionMismatch, "compose: lengths differ");
  IndexFunction g(f.size());
  for (std::size_t j = 0; j < f.size(); ++j) g[j] = f[sigma[j] - 1];
  return g;
}

bool is_admissible(const IndexFunction& f, const TranspositionChain& chain) {
  IndexFunction g = f;
  for (int k : chain) {
    if (k < 1 || k >= static_cast<int>(g.size())) return false;
    if (g[k - 1] <= g[k]) return false;
    std::swap(g[k - 1], g[k]);
  }
  return true;
}

bool is_maximal(const IndexFunction& f, const TranspositionChain& chain) {
  return is_admissible(f, chain) && static_cast<long>(chain.size()) == inversions(f);
}

Permutation chain_permutation(int q, const TranspositionChain& chain) {
  Permutation s(q);
  std::iota(s.begin(), s.end(), 1);
  for (int k : chain) {
    if (k < 1 || k >= q) throw Error(ErrorKind::InvalidInput, "transposition index out of range");
    std::swap(s[k - 1], s[k]);
  }
  return s;
}

TranspositionChain maximal_chain(const IndexFunction& f) {
  IndexFunction g = f;
  TranspositionChain chain;
  for (;;) {
    int k = 0;
    for (std::size_t i = 0; i + 1 < g.size(); ++i)
      if (g[i] > g[i + 1]) {
        k = static_cast<int>(i) + 1;
        break;
      }
    if (k == 0) return chain;
    std::swap(g[k - 1], g[k]);
    chain.push_back(k);
  }
}

namespace {

void dfs(IndexFunction& g, TranspositionChain& cur, std::vector<TranspositionChain>& out) {
  bool any = false;
  for (std::size_t i = 0; i + 1 < g.size(); ++i) {
    if (g[i] <= g[i + 1]) continue;
    any = true;
    std::swap(g[i], g[i + 1]);
    cur.push_back(static_cast<int>(i) + 1);
    dfs(g, cur, out);
    cur.pop_back();
    std::swap(g[i], g[i + 1]);
  }
  if (!any) out.push_back(cur);
}

}  // namespace

std::vector<TranspositionChain> all_maximal_chains(const IndexFunction& f, int cap) {
  if (static_cast<int>(f.size()) > cap) throw Error(ErrorKind::CapExceeded, "all_maximal_chains: length exceeds cap");
  IndexFunction g = f;
  TranspositionChain cur;
  std::vector<TranspositionChain> out;
  dfs(g, cur, out);
  return out;
}

const BilinearMap& FlipData::flip(int j, int i) const {
  auto it = flips.find({j, i});
  if (it == flips.end()) throw Error(ErrorKind::InvalidInput, "missing flip F_{" + std::to_string(j) + "," + std::to_string(i) + "}");
  return it->second;
}

void FlipData::validate(const Tolerance& tol) const {
  if (spaces.empty()) throw Error(ErrorKind::InvalidInput, "flip data without spaces");
  for (const auto& e : spaces) {
    require_same(e.left(), spaces[0].left(), "flip data spaces");
    require_same(e.right(), spaces[0].left(), "flip data spaces");
  }
  for (int i = 1; i <= d(); ++i)
    for (int j = 1; j < i; ++j) {
      const BilinearMap& f = flip(j, i);
      if (!f.source().same_shape(tensor(spaces[i - 1], spaces[j - 1])) ||
          !f.target().same_shape(tensor(spaces[j - 1], spaces[i - 1])))
        throw Error(ErrorKind::DimensionMismatch, "flip F_{j,i} must map E_i (.) E_j to E_j (.) E_i");
      const BilinearMap ff = compose(f.adjoint(), f).materialize();
      const BilinearMap gg = compose(f, f.adjoint()).materialize();
      for (int k = 0; k < f.source().left().num_blocks(); ++k)
        for (int l = 0; l < f.source().right().num_blocks(); ++l) {
          const int n = f.source().dim(k, l);
          if (f.target().dim(k, l) != n ||
              !approx_equal(ff.block(k, l), CMatrix::Identity(n, n), tol) ||
              !approx_equal(gg.block(k, l), CMatrix::Identity(n, n), tol))
            throw Error(ErrorKind::InvalidInput, "flip is not a bilinear unitary");
        }
    }
  if (!vectors.empty()) {
    if (static_cast<int>(vectors.size()) != d()) throw Error(ErrorKind::DimensionMismatch, "one vector per space");
    for (int i = 0; i < d(); ++i)
      if (!vectors[i].parent().same_shape(spaces[i]))
        throw Error(ErrorKind::DimensionMismatch, "vector does not belong to its space");
  }
}

BilinearMap hilbert_swap(const Correspondence& ei, const Correspondence& ej) {
  const BlockAlgebra c({1});
  if (ei.left() != c || ei.right() != c || ej.left() != c || ej.right() != c)
    throw Error(ErrorKind::AlgebraMismatch, "hilbert_swap needs correspondences over C");
  const Correspondence src = tensor(ei, ej), tgt = tensor(ej, ei);
  const int a = ei.dim(0, 0), b = ej.dim(0, 0);
  CMatrix m = CMatrix::Zero(a * b, a * b);
  for (int x = 0; x < a; ++x)
    for (int y = 0; y < b; ++y) m(y * a + x, x * b + y) = 1.0;
  return BilinearMap(src, tgt, {m});
}

Correspondence pattern_space(const FlipData& fd, const IndexFunction& f) {
  validate_index_function(f, fd.d());
  std::vector<Correspondence> factors;
  for (int v : f) factors.push_back(fd.spaces[v - 1]);
  return tensor_chain(factors, fd.spaces.at(0).left());
}

namespace {

BilinearMap amp(const Correspondence& pre, const BilinearMap& m, const Correspondence& suf) {
  return BilinearMap::amplify(pre, m, suf);
}

}  // namespace

ExchangeResult exchange_residual(const FlipData& fd, const Tolerance& tol) {
  ExchangeResult res;
  const int d = fd.d();
  for (int k = 1; k <= d; ++k)
    for (int j = k + 1; j <= d; ++j)
      for (int i = j + 1; i <= d; ++i) {
        const Correspondence& Ek = fd.spaces[k - 1];
        const Correspondence& Ej = fd.spaces[j - 1];
        const Correspondence& Ei = fd.spaces[i - 1];
        const BlockAlgebra& B = Ek.left();
        const Correspondence one = Correspondence::trivial(B);
        const BilinearMap lhs = compose(amp(Ek, fd.flip(j, i), one),
                                        compose(amp(one, fd.flip(k, i), Ej), amp(Ei, fd.flip(k, j), one)));
        const BilinearMap rhs = compose(amp(one, fd.flip(k, j), Ei),
                                        compose(amp(Ej, fd.flip(k, i), one), amp(one, fd.flip(j, i), Ek)));
        const BilinearMap diff = (lhs - rhs).materialize();
        const BilinearMap ref = lhs.materialize();
        double worst = 0.0, scale = 1.0;
        for (int a = 0; a < B.num_blocks(); ++a)
          for (int b = 0; b < B.num_blocks(); ++b) {
            worst = std::max(worst, op_norm(diff.block(a, b)));
            scale = std::max(scale, op_norm(ref.block(a, b)));
          }
        if (worst <= tol.eq_rel * scale) continue;
        res.holds = false;
        res.triple = std::array<int, 3>{k, j, i};
        res.residual_norm = worst;
        res.residual = diff;
        double best = -1.0;
        for (int a = 0; a < B.num_blocks(); ++a)
          for (int b = 0; b < B.num_blocks(); ++b) {
            const CMatrix& m = diff.block(a, b);
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
              const double n = m.col(c).norm();
              if (n > best * (1.0 + 1e-12) + 1e-300) {
                best = n;
                res.witness_index = static_cast<long>(c);
                res.witness_block = std::make_pair(a + 1, b + 1);
              }
            }
          }
        res.witness_residual = best;
        return res;
      }
  return res;
}

BilinearMap pi_f_chain(const FlipData& fd, const IndexFunction& f, const TranspositionChain& chain) {
  validate_index_function(f, fd.d());
  if (!is_maximal(f, chain)) throw Error(ErrorKind::InvalidInput, "chain is not a maximal admissible chain for f");
  const BlockAlgebra& B = fd.spaces.at(0).left();
  IndexFunction g = f;
  BilinearMap out = BilinearMap::identity(pattern_space(fd, f));
  for (int kappa : chain) {
    std::vector<Correspondence> pre, suf;
    for (int t = 0; t < kappa - 1; ++t) pre.push_back(fd.spaces[g[t] - 1]);
    for (std::size_t t = kappa + 1; t < g.size(); ++t) suf.push_back(fd.spaces[g[t] - 1]);
    const int i = g[kappa - 1], j = g[kappa];
    const BilinearMap step = BilinearMap::amplify(tensor_chain(pre, B), fd.flip(j, i), tensor_chain(suf, B));
    out = compose(step, out);
    std::swap(g[kappa - 1], g[kappa]);
  }
  return out;
}

BilinearMap pi_f(const FlipData& fd, const IndexFunction& f, const Tolerance& tol, bool check_exchange) {
  if (check_exchange) {
    const ExchangeResult r = exchange_residual(fd, tol);
    if (!r.holds) {
      const auto& t = *r.triple;
      throw Error(ErrorKind::ExchangeConditionViolated,
                  "exchange condition fails at (" + std::to_string(t[0]) + "," + std::to_string(t[1]) + "," +
                      std::to_string(t[2]) + ")");
    }
  }
  return pi_f_chain(fd, f, maximal_chain(f));
}

}  // namespace dilkit
