#pragma once

#include "dilkit/cpmap.hpp"
#include "dilkit/perm.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dilkit {

using Index = std::vector<int>;

// Index set {n : 0 <= n <= cap componentwise} of N_0^d.
struct GridCap {
  int d = 1;
  Index cap;

  GridCap() = default;
  explicit GridCap(Index cap);
  static GridCap uniform(int d, int c) { return GridCap(Index(d, c)); }

  bool contains(const Index& n) const;
  // All indices, ordered by total degree, then lexicographically.
  std::vector<Index> indices() const;
};

Index zero_index(int d);
Index unit_index(int d, int i);  // e_i, 1-based
Index add(const Index& a, const Index& b);
bool is_zero(const Index& n);
int degree(const Index& n);
std::string index_string(const Index& n);  // "(1,0,2)"

enum class SystemKind { Sub, Super, Product };
const char* system_kind_name(SystemKind k);

// Structure map convention: for SUB the coproduct w_{m,n}: E_{m+n} -> E_m (.) E_n,
// otherwise the product v_{m,n}: E_m (.) E_n -> E_{m+n}.
struct TruncatedSystem {
  SystemKind kind = SystemKind::Product;
  GridCap cap;
  BlockAlgebra algebra;
  std::map<Index, Correspondence> members;
  std::map<std::pair<Index, Index>, BilinearMap> structure;
  // Distinguished vectors. validate() checks the unit relations when present.
  std::optional<std::map<Index, CorrVector>> unit;

  int d() const { return cap.d; }
  const Correspondence& member(const Index& n) const;
  const BilinearMap& map(const Index& m, const Index& n) const;
  const CorrVector& vector(const Index& n) const;
};

struct Check {
  std::string name;
  double residual = 0.0;
  bool passed = true;
  bool probed = false;  // residual estimated on random probes, not exact
};

struct ValidationReport {
  std::vector<Check> checks;
  bool passed() const;
  std::vector<Check> failures() const;
  double max_residual() const;
};

// Residual norm of a bilinear map that should vanish. Small blocks give the
// Frobenius norm (an upper bound for the operator norm), larger ones the
// largest ratio |R x| / |x| over seeded probes.
Check residual_check(std::string name, const BilinearMap& r, double tol, unsigned seed = 0);

ValidationReport validate(const TruncatedSystem& sys, const Tolerance& tol);

// SUB system of GNS correspondences of T_n = T_d^{n_d} o ... o T_1^{n_1}, with
// w_{m,n}: xi_{m+n} -> xi_m (.) xi_n and the cyclic unit.
TruncatedSystem gns_system(const std::vector<CPMap>& ts, const GridCap& cap, const Tolerance& tol);

// Members and structure maps inside a smaller cap.
TruncatedSystem restrict_to(const TruncatedSystem& sys, const GridCap& cap);

// Sum over blocks of (target multiplicity - rank): zero iff the map is onto.
long rank_deficit(const BilinearMap& v, const Tolerance& tol);

// Vacuous (holds) for d <= 2.
ExchangeResult check_exchange(const FlipData& fd, const Tolerance& tol);

// Truncated SUB system on cap (2,...,2): F_0 = B, F_{e_i} = E,
// F_{e_i+e_j} = E (.) E, all other members zero. Upper triangular form:
// w_{e_i,e_j} = id for j <= i and w_{e_j,e_i} = F_{j,i} for j < i.
TruncatedSystem truncated_from_flips(const FlipData& fd, const Tolerance& tol);

// The same support with arbitrary unitaries w_{e_i,e_j}: F_{e_i+e_j} -> E (.) E,
// keyed by 1-based (i, j) for all i, j.
TruncatedSystem truncated_from_unitaries(const Correspondence& e, int d,
                                         const std::map<std::pair<int, int>, BilinearMap>& w,
                                         const Tolerance& tol);

// Flips F_{j,i} = w_{e_j,e_i} w_{e_i,e_j}* read off a truncated system.
FlipData flips_of_truncated(const TruncatedSystem& sys);

struct UpperTriangular {
  TruncatedSystem normalized;
  FlipData flips;
  std::map<Index, BilinearMap> iso;  // a_n: member of the input -> member of the normal form
};
UpperTriangular upper_triangular_form(const TruncatedSystem& sys, const Tolerance& tol);

// max over in-cap pairs of the morphism residual
//   SUB: |w'_{m,n} a_{m+n} - (a_m (.) a_n) w_{m,n}|
//   otherwise: |a_{m+n} v_{m,n} - v'_{m,n} (a_m (.) a_n)|.
double morphism_residual(const TruncatedSystem& s, const TruncatedSystem& t,
                         const std::map<Index, BilinearMap>& a);

// max_{j<i} |(a_j (.) a_i) F_{j,i} - F'_{j,i} (a_i (.) a_j)| for a family a_1..a_d.
double flip_gauge_residual(const FlipData& f, const FlipData& g, const std::vector<BilinearMap>& a);

// E_n = E_1^{(.)n_1} (.) ... (.) E_d^{(.)n_d} with products pi_f.
TruncatedSystem product_from_flips(const FlipData& fd, const GridCap& cap, const Tolerance& tol);

// Ordered tuples of nonzero indices summing to the target, listed in tensor
// order (leftmost factor first).
class CompositionEnumerator {
 public:
  explicit CompositionEnumerator(Index target);
  const Index& target() const { return target_; }
  const std::vector<std::vector<Index>>& compositions() const { return all_; }

 private:
  Index target_;
  std::vector<std::vector<Index>> all_;
};

struct SpannedResult {
  TruncatedSystem system;                     // SUPER
  std::map<Index, SubCorrespondence> spaces;  // inside the input members
  bool proper = false;
  std::optional<std::pair<Index, Index>> witness;  // first non-surjective pair
  long rank_gap = 0;                               // at the witness
};

SpannedResult spanned_subsystem(const TruncatedSystem& sys, const Tolerance& tol);
// Span of the products over every composition of n, straight from the
// enumerator. Used to cross-check the recursion.
SubCorrespondence spanned_by_compositions(const TruncatedSystem& sys, const Index& n, const Tolerance& tol);

struct SubsystemSolution {
  // Per generator e_i: the complement q_i as a subcorrespondence of E_{e_i}.
  std::vector<SubCorrespondence> complement;
  std::vector<SubCorrespondence> kept;
  long kernel_dim = 0;  // total multiplicity of the q_i
  int iterations = 0;
  bool trivial() const { return kernel_dim == 0; }
};

// Largest projections q_i on E_{e_i} with q_i xi_{e_i} = 0 compatible with
// the products at level 2 (d = 1) or (1,1) (d = 2). The structure maps used
// must be unitary; the distinguished vectors need not form a unit.
SubsystemSolution product_subsystem_solver(const TruncatedSystem& sys, const Tolerance& tol);

}  // namespace dilkit
