#pragma once

#include "dilkit/algebra.hpp"
#include "dilkit/corr.hpp"

#include <functional>
#include <vector>

namespace dilkit {

// Completely positive map T: A -> B with T(a) = sum_i c_i* a c_i, where each
// Kraus operator c_i maps the representation space of B into that of A.
class CPMap {
 public:
  CPMap() = default;
  // Checks that T maps every matrix unit of the domain into the codomain.
  CPMap(BlockAlgebra domain, BlockAlgebra codomain, std::vector<CMatrix> kraus, const Tolerance& tol = {});

  static CPMap identity(const BlockAlgebra& b);
  static CPMap zero(const BlockAlgebra& domain, const BlockAlgebra& codomain);
  // Map on C^n given by a nonnegative matrix M in the row convention
  // T(a)_j = sum_i a_i M_ij; Kraus operators sqrt(M_ij) e_i e_j*.
  static CPMap from_markov_matrix(const Eigen::MatrixXd& m);

  const BlockAlgebra& domain() const { return domain_; }
  const BlockAlgebra& codomain() const { return codomain_; }
  const std::vector<CMatrix>& kraus() const { return kraus_; }

  CMatrix apply(const CMatrix& a) const;
  CMatrix unit_image() const { return apply(domain_.unit()); }

  // Only for commutative domain and codomain. Row form M_ij = T(e_i)_j and the
  // column form (its transpose), which acts on column vectors of values.
  Eigen::MatrixXd row_matrix() const;
  Eigen::MatrixXd column_matrix() const { return row_matrix().transpose(); }

 private:
  BlockAlgebra domain_, codomain_;
  std::vector<CMatrix> kraus_;
};

// A linear map given by its values on the matrix units of the domain, in the
// order of BlockAlgebra::matrix_units().
struct LinearMapData {
  BlockAlgebra domain, codomain;
  std::vector<CMatrix> images;
  static LinearMapData of(const CPMap& t);
  static LinearMapData from_function(const BlockAlgebra& domain, const BlockAlgebra& codomain,
                                     const std::function<CMatrix(const CMatrix&)>& f);
};

// Block-diagonal Choi matrix sum_k sum_{rs} e_r e_s* (x) T(E^k_rs), of size
// total_dim(A) * total_dim(B).
CMatrix choi(const LinearMapData& m);
CMatrix choi(const CPMap& t);
// Choi block for the block pair (k,l): size n_k n_l, index r n_l + t.
CMatrix choi_block(const LinearMapData& m, int k, int l);

bool is_completely_positive(const LinearMapData& m, const Tolerance& tol);
bool is_unital(const CPMap& t, const Tolerance& tol);
bool is_contractive(const CPMap& t, const Tolerance& tol);
bool is_markov(const CPMap& t, const Tolerance& tol);

// s o t; Kraus operators c^t_i c^s_j in lexicographic order (i, j).
CPMap compose(const CPMap& s, const CPMap& t);
CPMap power(const CPMap& t, int n);
// Kraus family of cardinality rank(choi), one operator per eigenvector of
// each Choi block.
CPMap minimal_kraus(const CPMap& t, const Tolerance& tol);
// T~(b + mu 1~) = T(b) + mu (1 - T(1)) + mu 1~ on the unitalized algebra.
CPMap unitalize_cpmap(const CPMap& t, const Tolerance& tol);

// Frobenius distance of the Choi matrices.
double map_distance(const CPMap& a, const CPMap& b);
bool maps_approx_equal(const CPMap& a, const CPMap& b, const Tolerance& tol);

struct GNSResult {
  Correspondence corr;
  CorrVector cyclic;
};
GNSResult gns(const CPMap& t, const Tolerance& tol);

}  // namespace dilkit
