#pragma once

#include "dilkit/systems.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dilkit {

// (A, theta, p): d commuting endomorphisms of a block algebra A and a
// projection p in A. A truncated triple carries an interior projection Q on
// which the generators are exactly multiplicative, and a depth: identities
// involving compositions longer than the depth are never asserted.
struct DilationTriple {
  BlockAlgebra ambient;
  std::vector<CPMap> generators;
  CMatrix p;
  std::optional<CMatrix> interior;
  std::optional<int> depth;

  int d() const { return static_cast<int>(generators.size()); }
  // theta_n(a) = theta_d^{n_d}( ... theta_1^{n_1}(a))
  CMatrix theta(const Index& n, const CMatrix& a) const;
  bool within_depth(const Index& n) const { return !depth || degree(n) <= *depth; }
};

struct TripleCheck {
  double multiplicativity = 0.0;
  double commutation = 0.0;
  bool projection = true;
  bool passed = false;
};

// Multiplicativity on basis pairs of QAQ (random samples when the basis is
// large), commutation of the generators, and p a projection in A.
TripleCheck check_triple(const DilationTriple& t, const Tolerance& tol, unsigned seed = 0);

enum class Status { Pass, Fail, Unchecked };
const char* status_name(Status s);

struct ClassCheck {
  std::string predicate;  // semigroup, markov, increasing, strong, good, unit
  Index m, n;             // n only for single-index predicates
  double residual = 0.0;
  Status status = Status::Unchecked;
};

struct Classification {
  std::vector<ClassCheck> checks;
  bool is_dilation = false;
  bool is_weak = false;
  bool is_strong = false;
  bool is_good = false;
  bool is_markov_dilated = false;
  bool p_increasing = false;
  // Good verdict agrees with the unit property of xi_n = theta_n(p) p.
  bool good_matches_unit = true;
  std::optional<ClassCheck> first_failure(const std::string& predicate) const;
  bool any_unchecked() const;
};

Classification classify(const DilationTriple& t, const GridCap& cap, const Tolerance& tol);

// The corner B = pAp as a block algebra with the isometry J: C^{dim B} -> H.
struct Corner {
  BlockAlgebra algebra;
  CMatrix embed;  // H x dim B
  CMatrix to_corner(const CMatrix& a) const { return embed.adjoint() * a * embed; }
  CMatrix from_corner(const CMatrix& b) const { return embed * b * embed.adjoint(); }
};
Corner corner_of(const BlockAlgebra& a, const CMatrix& p, const Tolerance& tol);

// The dilated semigroup S_n = p theta_n(p . p) p as a linear map on pAp.
LinearMapData corner_map(const DilationTriple& t, const Index& n, const Tolerance& tol);

struct Superproduct {
  TruncatedSystem system;  // SUPER over pAp with xi_n = theta_n(p) p
  Corner corner;
  std::map<std::pair<Index, Index>, bool> surjective;
  double product_consistency = 0.0;  // |V X - Y| when fitting the products
  bool is_product() const;
};

Superproduct superproduct_of_triple(const DilationTriple& t, const GridCap& cap, const Tolerance& tol);

// p~ = p + 1~ - 1 and theta~ the unitalized generators on A~.
DilationTriple unitalize_dilation(const DilationTriple& t, const Tolerance& tol);

struct CompressionResult {
  bool compressing = false;
  double commutator = 0.0;        // max |[P, theta_n(P a P)]|
  double multiplicativity = 0.0;  // max over theta^P_n
  std::optional<Index> witness;
};

CompressionResult is_compressing(const DilationTriple& t, const CMatrix& P, const GridCap& cap, const Tolerance& tol);
DilationTriple compress(const DilationTriple& t, const CMatrix& P, const Tolerance& tol);

struct TwoParamDilation {
  TruncatedSystem system;  // PRODUCT over N_0^2 with unit
  FlipData flips;          // E = E_1 + E_2 twice, the flip, xi_1 and xi_2
  Correspondence gns1, gns2;
  SubCorrespondence f21, f12;  // generated by xi_2 (.) xi_1 and xi_1 (.) xi_2 in E (.) E
  bool f21_strict = false;     // F_21 strictly inside E_2 (.) E_1
  bool f12_strict = false;
  bool quasi_generic() const { return f21_strict || f12_strict; }
  bool generic() const { return f21_strict && f12_strict; }
  SpannedResult spanned;  // at level (1,1)
  std::optional<SubsystemSolution> solver;  // when the algebra is a factor
  double flip_recovery = 0.0;  // |u*_{e1,e2} u_{e2,e1} - F|
  double flip_exchange = 0.0;  // |F(xi_2 (.) xi_1) - xi_1 (.) xi_2|
};

TwoParamDilation two_param_markov_dilation(const CPMap& t1, const CPMap& t2, const GridCap& cap,
                                           const Tolerance& tol);

struct RowContraction {
  int dim_g = 0;
  std::vector<CMatrix> c;
  static RowContraction make(std::vector<CMatrix> c, const Tolerance& tol);
  CPMap map() const;  // T(a) = sum c_i* a c_i
};

// K_N = G + sum_{n=1..N} (C^d)^{(x)(n-1)} (x) D.
struct TruncatedCoisometricDilation {
  int dim_g = 0, d = 0, levels = 0, defect_dim = 0, total = 0;
  std::vector<CMatrix> w;  // coisometries on K_N
  CMatrix p;               // projection onto G
  CMatrix interior;        // projection onto G and levels 1..N-1
  double interior_residual() const;  // max |(w_i w_j* - delta_ij) Q|
  double corner_residual(const RowContraction& rc) const;  // max |p w_i p - w_i p| + |w_i p - c_i|
  // (B(K_N), sum_i w_i* . w_i, q) with depth N-1; q defaults to p.
  DilationTriple triple(const std::optional<CMatrix>& q = std::nullopt) const;
};

TruncatedCoisometricDilation dilate_row_contraction(const RowContraction& rc, int levels, const Tolerance& tol);

struct SubproductSemigroup {
  BlockAlgebra algebra;          // B^a(E) = M_{dim E}
  GridCap cap;
  std::map<Index, long> offset;  // of E_n inside E
  std::map<Index, long> mult;    // dim E_n
  long dim = 0;
  std::map<Index, CPMap> maps;   // T_n(a) = v_n (a (.) id_n) v_n*
  const CPMap& at(const Index& n) const { return maps.at(n); }
};

// Systems over C whose members vanish outside the cap.
SubproductSemigroup semigroup_from_subproduct(const TruncatedSystem& sys, const Tolerance& tol);

struct SemigroupCheck {
  double semigroup_residual = 0.0;  // max |T_m T_n - T_{m+n}| over in-cap pairs
  bool multiplicities_match = true;  // minimal Kraus rank of T_n = dim E_n
};
SemigroupCheck check_subproduct_semigroup(const SubproductSemigroup& s, const Tolerance& tol);

}  // namespace dilkit
