#pragma once

#include "dilkit/corr.hpp"

#include <array>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace dilkit {

// f: {1..q} -> {1..p}, stored as f(1), ..., f(q).
using IndexFunction = std::vector<int>;
// Permutation of {1..q}, stored as sigma(1), ..., sigma(q).
using Permutation = std::vector<int>;
// Adjacent transpositions tau_kappa (swap kappa, kappa+1), 1-based, applied
// left to right: f o tau_{k1} o tau_{k2} o ...
using TranspositionChain = std::vector<int>;

void validate_index_function(const IndexFunction& f, int p);

long inversions(const IndexFunction& f);
// The unique permutation with f o sigma nondecreasing that keeps the order of
// positions carrying equal values (a stable argsort).
Permutation sigma_f(const IndexFunction& f);
IndexFunction compose(const IndexFunction& f, const Permutation& sigma);

bool is_admissible(const IndexFunction& f, const TranspositionChain& chain);
bool is_maximal(const IndexFunction& f, const TranspositionChain& chain);
Permutation chain_permutation(int q, const TranspositionChain& chain);

// Always takes the leftmost inverted adjacent pair.
TranspositionChain maximal_chain(const IndexFunction& f);
// Exhaustive; throws CapExceeded when q > cap.
std::vector<TranspositionChain> all_maximal_chains(const IndexFunction& f, int cap = 8);

// Correspondences E_1..E_d over one algebra with flips
// F_{j,i}: E_i (.) E_j -> E_j (.) E_i for j < i, and optional vectors.
struct FlipData {
  std::vector<Correspondence> spaces;
  std::map<std::pair<int, int>, BilinearMap> flips;  // key (j, i), 1-based
  std::vector<CorrVector> vectors;                   // empty or one per space

  int d() const { return static_cast<int>(spaces.size()); }
  const BilinearMap& flip(int j, int i) const;
  // Shapes, unitarity of the flips, and vector membership.
  void validate(const Tolerance& tol) const;
};

// The tensor flip x (.) y -> y (.) x of two Hilbert spaces (correspondences
// over C), as a map E_i (.) E_j -> E_j (.) E_i.
BilinearMap hilbert_swap(const Correspondence& ei, const Correspondence& ej);

// E_{f(1)} (.) ... (.) E_{f(q)}
Correspondence pattern_space(const FlipData& fd, const IndexFunction& f);

struct ExchangeResult {
  bool holds = true;
  // First failing triple k < j < i (1-based) in lexicographic order.
  std::optional<std::array<int, 3>> triple;
  double residual_norm = 0.0;      // operator norm of the residual
  double witness_residual = 0.0;   // residual on the witness basis vector
  long witness_index = -1;         // multiplicity index of the witness (0-based)
  std::optional<std::pair<int, int>> witness_block;  // 1-based
  std::optional<BilinearMap> residual;
};

// Detailed exchange conditions
// (id_k (.) F_{j,i})(F_{k,i} (.) id_j)(id_i (.) F_{k,j}) =
//   (F_{k,j} (.) id_i)(id_j (.) F_{k,i})(F_{j,i} (.) id_k)  for all k < j < i.
ExchangeResult exchange_residual(const FlipData& fd, const Tolerance& tol);

// Operator E_{f(1)} (.) ... (.) E_{f(q)} -> E_{f o sigma(1)} (.) ... built from
// amplified flips along a maximal admissible chain.
BilinearMap pi_f_chain(const FlipData& fd, const IndexFunction& f, const TranspositionChain& chain);
BilinearMap pi_f(const FlipData& fd, const IndexFunction& f, const Tolerance& tol, bool check_exchange = true);

}  // namespace dilkit
