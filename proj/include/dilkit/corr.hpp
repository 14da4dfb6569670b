#pragma once

#include "dilkit/algebra.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace dilkit {

class CPMap;

// One factor of a tensor chain: a correspondence from `left` to `right` with
// multiplicity matrix `mult`.
struct Atom {
  BlockAlgebra left;
  BlockAlgebra right;
  IMatrix mult;
};

// Offsets of the multiplicity index of a chain at one block pair (k,l).
// Paths (intermediate block indices) are ordered lexicographically, and
// within a path the factor multiplicity indices are ordered lexicographically.
struct BlockLayout {
  std::vector<long> path_offset;  // indexed by path code, -1 when the path is empty
  std::vector<long> path_size;
  long total = 0;
};

// Finite-dimensional correspondence in canonical form
//   E = sum_{k,l} M_{n_k x n_l} (x) C^{d_kl}.
class Correspondence {
 public:
  Correspondence();
  Correspondence(BlockAlgebra left, BlockAlgebra right, IMatrix mult);

  static Correspondence trivial(const BlockAlgebra& b);
  static Correspondence zero(const BlockAlgebra& left, const BlockAlgebra& right);

  const BlockAlgebra& left() const;
  const BlockAlgebra& right() const;
  const IMatrix& mult() const;
  int dim(int k, int l) const { return mult()(k, l); }
  long total_mult() const;
  // Complex dimension of the underlying space sum n_k n_l d_kl.
  long complex_dim() const;

  bool is_trivial() const;
  bool is_zero() const;
  int chain_length() const;  // 0 for the trivial correspondence
  const std::vector<std::shared_ptr<const Atom>>& chain() const;
  // Block counts of the intermediate algebras of the chain.
  std::vector<int> intermediate_counts() const;
  const BlockLayout& layout(int k, int l) const;
  // Blocks of the intermediate nodes along a path code.
  std::vector<int> decode_path(long code) const;

  bool same_shape(const Correspondence& o) const;  // algebras, mult and chain factorisation agree

  friend Correspondence tensor(const Correspondence& e, const Correspondence& f);

 private:
  struct Data;
  std::shared_ptr<const Data> d_;
  explicit Correspondence(std::shared_ptr<const Data> d) : d_(std::move(d)) {}
  static std::shared_ptr<const Data> make(BlockAlgebra left, BlockAlgebra right,
                                          std::vector<std::shared_ptr<const Atom>> chain);
};

Correspondence tensor(const Correspondence& e, const Correspondence& f);
Correspondence tensor_power(const Correspondence& e, int n);
Correspondence tensor_chain(const std::vector<Correspondence>& factors, const BlockAlgebra& base);

// Calls f(j, iX, iY, iXY) for every pair of multiplicity indices of x at (k,j)
// and y at (j,l), with iXY the index of the simple tensor in x (.) y at (k,l).
void for_each_tensor_pair(const Correspondence& x, const Correspondence& y, int k, int l,
                          const std::function<void(int, long, long, long)>& f);

// Element of a correspondence. Block (k,l) is stored as a d_kl x (n_k n_l)
// matrix: row m is the column-major vectorisation of x_{k,l,m}.
class CorrVector {
 public:
  CorrVector() = default;
  CorrVector(Correspondence parent, std::vector<CMatrix> blocks);
  static CorrVector zero(const Correspondence& parent);
  // The unit 1 of B as an element of the trivial correspondence.
  static CorrVector unit(const BlockAlgebra& b);

  const Correspondence& parent() const { return parent_; }
  const CMatrix& block(int k, int l) const;
  CMatrix& block(int k, int l);
  CMatrix component(int k, int l, long m) const;
  void set_component(int k, int l, long m, const CMatrix& x);

  // <x, y> as a dense element of the right algebra.
  CMatrix inner(const CorrVector& y) const;
  CorrVector left_mul(const CMatrix& a) const;   // a dense element of the left algebra
  CorrVector right_mul(const CMatrix& b) const;  // b dense element of the right algebra
  CorrVector operator+(const CorrVector& o) const;
  CorrVector operator-(const CorrVector& o) const;
  CorrVector scaled(cplx s) const;
  double norm() const;  // sqrt ||<x,x>||
  double frobenius() const;

 private:
  Correspondence parent_;
  std::vector<CMatrix> blocks_;
};

CorrVector tensor(const CorrVector& x, const CorrVector& y);

// Adjointable bilinear map between correspondences with the same algebra
// pair; acts only on multiplicity spaces. Composite maps stay matrix-free.
class BilinearMap {
 public:
  struct Node;

  BilinearMap() = default;
  BilinearMap(Correspondence source, Correspondence target, std::vector<CMatrix> blocks);
  static BilinearMap identity(const Correspondence& e);
  static BilinearMap zero(const Correspondence& source, const Correspondence& target);

  const Correspondence& source() const;
  const Correspondence& target() const;

  // x has d_kl(source) rows; result has d_kl(target) rows.
  CMatrix apply_block(int k, int l, const CMatrix& x) const;
  CMatrix apply_adjoint_block(int k, int l, const CMatrix& y) const;
  CorrVector apply(const CorrVector& x) const;
  CorrVector apply_adjoint(const CorrVector& y) const;

  CMatrix block(int k, int l) const;  // materialised
  BilinearMap materialize() const;
  bool is_dense() const;

  BilinearMap adjoint() const;
  // this followed by next, i.e. next o this
  BilinearMap then(const BilinearMap& next) const;
  BilinearMap operator+(const BilinearMap& o) const;
  BilinearMap operator-(const BilinearMap& o) const;
  BilinearMap scaled(cplx s) const;

  // id_prefix (.) inner (.) id_suffix
  static BilinearMap amplify(const Correspondence& prefix, const BilinearMap& inner,
                             const Correspondence& suffix);

  double norm() const;  // max_kl ||A_kl|| (materialises)

 private:
  std::shared_ptr<const Node> n_;
  explicit BilinearMap(std::shared_ptr<const Node> n) : n_(std::move(n)) {}
  friend BilinearMap compose(const BilinearMap& a, const BilinearMap& b);
};

// a o b
BilinearMap compose(const BilinearMap& a, const BilinearMap& b);
// a (.) b = (a (.) id)(id (.) b)
BilinearMap tensor(const BilinearMap& a, const BilinearMap& b);

struct SubCorrespondence {
  Correspondence sub;
  BilinearMap inclusion;  // isometry sub -> ambient
  BilinearMap projection() const { return compose(inclusion, inclusion.adjoint()); }
};

SubCorrespondence generated_sub(const Correspondence& ambient, const std::vector<CorrVector>& vectors,
                                const Tolerance& tol);
SubCorrespondence complement(const SubCorrespondence& s, const Tolerance& tol);
// Sum of subcorrespondences (closed span of the union).
SubCorrespondence span_of(const Correspondence& ambient, const std::vector<BilinearMap>& inclusions,
                          const Tolerance& tol);
// Image of a bilinear map (range projection).
SubCorrespondence image_of(const BilinearMap& m, const Tolerance& tol);
bool is_contained(const SubCorrespondence& a, const SubCorrespondence& b, const Tolerance& tol);

struct DirectSum {
  Correspondence sum;
  BilinearMap inj1, inj2;
};
DirectSum direct_sum(const Correspondence& e, const Correspondence& f);

// Generators g_1..g_N with Gram data G^{kl}_{(i,r,t),(j,s,t')} = <g_i, E^k_{rs} g_j>_l[t,t'].
struct GramPresentation {
  BlockAlgebra left, right;
  int count = 0;
  std::vector<CMatrix> scalarized;  // index k*L + l, rows/cols (i, r + t n_k)
  static GramPresentation from_function(
      const BlockAlgebra& left, const BlockAlgebra& right, int count,
      const std::function<CMatrix(int i, int j, const CMatrix& a)>& gram);
};

struct Canonical {
  Correspondence corr;
  std::vector<CorrVector> images;
};
Canonical canonicalize(const GramPresentation& g, const Tolerance& tol);

struct IsoResult {
  bool exists = false;
  std::optional<BilinearMap> witness;
  // First failing block (1-based) with its two multiplicities, if the
  // failure is dimensional; otherwise the Gram residual at that block.
  std::optional<std::pair<int, int>> block;
  std::optional<std::pair<int, int>> dims;
  double gram_residual = 0.0;
};

IsoResult iso_with_constraints(const Correspondence& e, const Correspondence& f,
                               const std::vector<CorrVector>& xs, const std::vector<CorrVector>& ys,
                               const Tolerance& tol);

struct StrongCommuteResult {
  bool strongly = false;
  IMatrix mult_ef;  // mult(E (.) F)
  IMatrix mult_fe;  // mult(F (.) E)
  IsoResult iso;
};

StrongCommuteResult strongly_commute(const CPMap& t, const CPMap& s, const Tolerance& tol);

}  // namespace dilkit
