// Acceptance suite: one line per criterion, nonzero exit if any fails.
#include "dilkit/gallery.hpp"
#include "test_util.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>

using namespace dilkit;
using namespace testutil;

namespace {

const Tolerance tol{};

struct Outcome {
  bool pass = true;
  std::string detail;
};

void require(Outcome& o, bool cond, const std::string& what) {
  if (!cond && o.pass) {
    o.pass = false;
    o.detail = what;
  }
}

// The listed claims exist and pass, and the whole report passes.
void require_claims(Outcome& o, const ExampleReport& r, std::initializer_list<const char*> ids) {
  for (const char* id : ids) {
    bool found = false;
    for (const auto& c : r.claims) {
      if (c.id != id) continue;
      found = true;
      require(o, c.pass, fmt::format("{}: claim {} fails (residual {:.3g})", r.id, id, c.residual));
    }
    require(o, found, fmt::format("{}: claim {} missing", r.id, id));
  }
  require(o, r.verdict() == Verdict::Pass, fmt::format("{}: verdict {}", r.id, verdict_name(r.verdict())));
}

double computed(const ExampleReport& r, const std::string& id) { return std::get<double>(r.claim(id).computed); }

// Column-stochastic nonnegative matrix.
Eigen::MatrixXd random_stochastic(std::mt19937& rng, int n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = u(rng);
  for (int j = 0; j < n; ++j) m.col(j) /= m.col(j).sum();
  return m;
}

// Unital CP map on M_n with `count` Kraus operators cut from a random isometry.
CPMap random_markov(std::mt19937& rng, int n, int count) {
  Eigen::HouseholderQR<CMatrix> qr(random_matrix(rng, n * count, n));
  const CMatrix v = qr.householderQ() * CMatrix::Identity(n * count, n);
  std::vector<CMatrix> kraus;
  for (int i = 0; i < count; ++i) kraus.push_back(v.middleRows(i * n, n));
  const BlockAlgebra b({n});
  return CPMap(b, b, kraus);
}

// a id + b t + c t^2 as one Kraus family.
CPMap mix(const CPMap& t, double a, double b, double c) {
  const BlockAlgebra& B = t.domain();
  std::vector<CMatrix> kraus{std::sqrt(a) * B.unit()};
  for (const auto& k : t.kraus()) kraus.push_back(std::sqrt(b) * k);
  const CPMap t2 = compose(t, t);
  for (const auto& k : t2.kraus()) kraus.push_back(std::sqrt(c) * k);
  return CPMap(B, B, kraus);
}

CMatrix power_apply(const CPMap& t1, const CPMap& t2, const Index& n, CMatrix b) {
  for (int i = 0; i < n[0]; ++i) b = t1.apply(b);
  for (int i = 0; i < n[1]; ++i) b = t2.apply(b);
  return b;
}

// ---------------------------------------------------------------------------

Outcome bhat_norms() {
  Outcome o;
  const ExampleReport r = bhat(6.0, tol);
  require_claims(o, r, {"norm_T1", "T2_formula", "T3_formula", "T4_formula"});
  const double expect = (5 + std::sqrt(13.0)) / 12;
  const CPMap T = RowContraction::make(bhat_operators(6.0), tol).map();
  const double norm = op_norm(T.unit_image());
  require(o, std::abs(norm - expect) <= 1e-10, "norm of T(1)");
  o.detail = o.pass ? fmt::format("||T(1)|| = {:.15f}", norm) : o.detail;
  return o;
}

Outcome bhat_data() {
  Outcome o;
  const ExampleReport r = bhat(6.0, tol);
  require_claims(o, r, {"d", "D", "dim_E1", "solver_kernel_dim", "goodness_witness"});
  require(o, r.claim("d").residual <= 1e-12 && r.claim("D").residual <= 1e-12, "d or D residual");
  const double w = computed(r, "goodness_witness");
  require(o, std::abs(w - std::sqrt(3.0) / 12) <= 1e-12, "goodness witness");
  if (o.pass) o.detail = fmt::format("witness {:.15f}, dim E_1 = 3, kernel 0", w);
  return o;
}

Outcome scex3_criterion() {
  Outcome o;
  const ExampleReport r = scex3(tol);
  require_claims(o, r, {"strongly_commute", "witness_dims"});
  const CPMap t = CPMap::from_markov_matrix(scex3_matrix());
  const StrongCommuteResult sc = strongly_commute(t, compose(t, t), tol);
  require(o, !sc.strongly && sc.iso.dims == std::make_pair(2, 3), "direct decision");
  if (o.pass) o.detail = "NO, dims (2,3) at block (1,1)";
  return o;
}

Outcome scex5_criterion() {
  Outcome o;
  const ExampleReport r = scex5(0.5, tol);
  require_claims(o, r, {"mult_EF", "mult_FE", "strongly_commute"});
  if (o.pass) o.detail = "[[0,2],[0,1]] vs [[0,1],[0,1]], NO";
  return o;
}

Outcome scex2_criterion() {
  Outcome o;
  const ExampleReport r = scex2_property(100, 0, tol);
  require_claims(o, r, {"M2_strongly_commuting", "M3_strongly_commuting"});
  if (o.pass) o.detail = "100 pairs on M_2 and 100 on M_3 commute strongly";
  return o;
}

Outcome flip_criterion() {
  Outcome o;
  const ExampleReport r = shalit_solel_flip(tol);
  require_claims(o, r, {"exchange_holds", "witness_triple", "witness_residual", "witness_index"});
  require(o, std::abs(computed(r, "witness_residual") - std::sqrt(2.0)) <= 1e-12, "witness residual");
  require(o, r.conclusion.find("does not embed into a superproduct system") != std::string::npos, "conclusion");
  if (o.pass) o.detail = "NO at (1,2,3), residual sqrt 2";
  return o;
}

Outcome nondilatable_criterion() {
  Outcome o;
  const ExampleReport r = nondilatable_semigroup(tol);
  require_claims(o, r, {"module_dim", "semigroup_residual", "exchange_holds"});
  require(o, r.claim("semigroup_residual").residual <= 1e-10, "semigroup residual");
  require(o, r.conclusion.rfind("no good dilation", 0) == 0, "conclusion");
  if (o.pass) o.detail = fmt::format("dim 31, semigroup residual {:.2g}", r.claim("semigroup_residual").residual);
  return o;
}

// Builds sigma from the back: the last slot takes the largest position with
// the largest value.
Permutation sigma_recursive(const IndexFunction& f) {
  std::vector<int> rest(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) rest[i] = static_cast<int>(i) + 1;
  Permutation s(f.size());
  for (int slot = static_cast<int>(f.size()) - 1; slot >= 0; --slot) {
    int best = -1;
    for (std::size_t t = 0; t < rest.size(); ++t)
      if (best < 0 || f[rest[t] - 1] >= f[rest[best] - 1]) best = static_cast<int>(t);
    s[slot] = rest[best];
    rest.erase(rest.begin() + best);
  }
  return s;
}

template <class F>
void for_each_function(int q, int p, F&& visit) {
  IndexFunction f(q, 1);
  for (;;) {
    visit(f);
    int t = q - 1;
    while (t >= 0 && f[t] == p) f[t--] = 1;
    if (t < 0) return;
    ++f[t];
  }
}

Outcome permutation_suite() {
  Outcome o;
  long functions = 0, chains = 0;
  for (int q = 1; q <= 6; ++q)
    for (int p = 1; p <= 4; ++p)
      for_each_function(q, p, [&](const IndexFunction& f) {
        ++functions;
        const Permutation s = sigma_f(f);
        require(o, s == sigma_recursive(f), "sigma_f vs recursion");
        const long inv = inversions(f);
        for (const auto& c : all_maximal_chains(f)) {
          ++chains;
          require(o, static_cast<long>(c.size()) == inv, "chain length");
          require(o, chain_permutation(q, c) == s, "chain permutation");
        }
      });

  // swap flips on C^2 for every pattern value
  FlipData fd;
  const BlockAlgebra c1({1});
  const Correspondence e(c1, c1, IMatrix::Constant(1, 1, 2));
  for (int i = 0; i < 4; ++i) fd.spaces.push_back(e);
  for (int i = 1; i <= 4; ++i)
    for (int j = 1; j < i; ++j) fd.flips.emplace(std::make_pair(j, i), hilbert_swap(e, e));
  double worst = 0.0;
  long operators = 0;
  for (int q = 2; q <= 5; ++q)
    for (int p = 2; p <= 4; ++p)
      for_each_function(q, p, [&](const IndexFunction& f) {
        if (*std::max_element(f.begin(), f.end()) < p) return;  // counted at a smaller p
        const auto cs = all_maximal_chains(f);
        if (cs.size() < 2) return;
        const CMatrix first = pi_f_chain(fd, f, cs.front()).materialize().block(0, 0);
        for (std::size_t k = 1; k < cs.size(); ++k) {
          worst = std::max(worst, (pi_f_chain(fd, f, cs[k]).materialize().block(0, 0) - first).norm());
          ++operators;
        }
      });
  require(o, worst <= 1e-12, fmt::format("chain operators differ by {:.3g}", worst));
  if (o.pass)
    o.detail = fmt::format("{} functions, {} chains, {} operator comparisons (max diff {:.2g})", functions, chains,
                           operators, worst);
  return o;
}

Outcome two_param_suite() {
  Outcome o;
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double unit_res = 0.0, recovery = 0.0;
  int pairs = 0;
  Eigen::MatrixXd shift = Eigen::MatrixXd::Zero(3, 3);
  shift(1, 0) = shift(2, 1) = shift(0, 2) = 1.0;
  const Eigen::MatrixXd id3 = Eigen::MatrixXd::Identity(3, 3);
  // Even trials: lazy circulant walks on C^3. Odd trials: an inner
  // automorphism of M_2 and a random mixture of its first two powers.
  for (int trial = 0; trial < 50; ++trial) {
    const bool classical = trial % 2 == 0;
    CPMap t1, t2;
    if (classical) {
      const double a = u(rng), b = u(rng);
      const Eigen::MatrixXd p1 = rng() % 2 ? shift : Eigen::MatrixXd(shift * shift);
      const Eigen::MatrixXd p2 = rng() % 2 ? shift : Eigen::MatrixXd(shift * shift);
      t1 = CPMap::from_markov_matrix(a * id3 + (1 - a) * p1);
      t2 = CPMap::from_markov_matrix(b * id3 + (1 - b) * p2);
    } else {
      t1 = random_markov(rng, 2, 1);
      const double a = u(rng), b = u(rng), c = u(rng);
      const double s = a + b + c;
      t2 = mix(t1, a / s, b / s, c / s);
    }
    const TwoParamDilation r = two_param_markov_dilation(t1, t2, GridCap({3, 3}), tol);
    const ValidationReport v = validate(r.system, tol);
    require(o, v.passed(), fmt::format("validation of pair {} ({})", trial, classical ? "C^3" : "M_2"));
    for (const auto& [n, x] : *r.system.unit)
      for (const auto& e : t1.domain().matrix_units())
        unit_res = std::max(unit_res, (x.inner(x.left_mul(e)) - power_apply(t1, t2, n, e)).norm());
    recovery = std::max(recovery, r.flip_recovery);
    ++pairs;
  }
  require(o, unit_res <= 1e-9, fmt::format("unit residual {:.3g}", unit_res));
  require(o, recovery <= 1e-12, fmt::format("flip recovery {:.3g}", recovery));
  if (o.pass)
    o.detail = fmt::format("{} pairs (25 on C^3, 25 on M_2), unit residual {:.2g}, flip recovery {:.2g}", pairs,
                           unit_res, recovery);
  return o;
}

Outcome spanned_criterion() {
  Outcome o;
  const CPMap t = CPMap::from_markov_matrix(scex3_matrix());
  const TwoParamDilation r = two_param_markov_dilation(t, compose(t, t), GridCap({1, 1}), tol);
  require(o, r.spanned.proper && r.spanned.rank_gap >= 1, "SCex3 spanned member not proper");

  // commuting endomorphisms: cyclic shift on C^3 and its square, and
  // commuting inner automorphisms of M_2
  Eigen::MatrixXd shift = Eigen::MatrixXd::Zero(3, 3);
  shift(1, 0) = shift(2, 1) = shift(0, 2) = 1.0;
  const CPMap s = CPMap::from_markov_matrix(shift);
  const TwoParamDilation rs = two_param_markov_dilation(s, compose(s, s), GridCap({1, 1}), tol);
  require(o, !rs.spanned.proper, "shift pair spanned member proper");

  const BlockAlgebra M2({2});
  CMatrix w1 = CMatrix::Zero(2, 2), w2 = CMatrix::Zero(2, 2);
  w1(0, 0) = 1;
  w1(1, 1) = std::polar(1.0, 0.7);
  w2(0, 0) = std::polar(1.0, -1.3);
  w2(1, 1) = 1;
  const TwoParamDilation ra = two_param_markov_dilation(CPMap(M2, M2, {w1}), CPMap(M2, M2, {w2}), GridCap({1, 1}), tol);
  require(o, !ra.spanned.proper, "automorphism pair spanned member proper");
  if (o.pass) o.detail = fmt::format("SCex3 rank gap {}, endomorphism pairs not proper", r.spanned.rank_gap);
  return o;
}

bool strong_on_interior(const Classification& c) {
  bool any = false;
  for (const auto& ch : c.checks) {
    if (ch.predicate != "strong" || ch.status == Status::Unchecked) continue;
    any = true;
    if (ch.status != Status::Pass) return false;
  }
  return any;
}

Outcome row_contraction_suite() {
  Outcome o;
  double interior = 0.0, corner = 0.0;
  auto check = [&](const RowContraction& rc, const std::string& label) {
    const TruncatedCoisometricDilation dil = dilate_row_contraction(rc, 3, tol);
    interior = std::max(interior, dil.interior_residual());
    corner = std::max(corner, dil.corner_residual(rc));
    // one-parameter semigroup sum_i w_i* . w_i, interior depth N - 1
    const DilationTriple t = dil.triple();
    const Classification cl = classify(t, GridCap::uniform(t.d(), dil.levels - 1), tol);
    require(o, strong_on_interior(cl), label + ": not strong on interior indices");
  };
  check(RowContraction::make(bhat_operators(6.0), tol), "bhat");

  std::mt19937 rng(11);
  std::uniform_int_distribution<int> dim(1, 3);
  std::uniform_real_distribution<double> scale(0.3, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = dim(rng), g = dim(rng);
    std::vector<CMatrix> c;
    CMatrix s = CMatrix::Zero(g, g);
    for (int i = 0; i < d; ++i) {
      c.push_back(random_matrix(rng, g, g));
      s += c.back().adjoint() * c.back();
    }
    const double f = std::sqrt(scale(rng) / op_norm(s));
    for (auto& x : c) x *= f;
    check(RowContraction::make(c, tol), fmt::format("trial {}", trial));
  }
  require(o, interior <= 1e-10, fmt::format("interior residual {:.3g}", interior));
  require(o, corner <= 1e-12, fmt::format("corner residual {:.3g}", corner));
  if (o.pass) o.detail = fmt::format("21 contractions, interior {:.2g}, corner {:.2g}", interior, corner);
  return o;
}

Outcome gns_kraus_suite() {
  Outcome o;
  std::mt19937 rng(12);
  std::uniform_int_distribution<int> count(1, 4);
  const std::vector<BlockAlgebra> algebras{BlockAlgebra({2}), BlockAlgebra({3}), BlockAlgebra({1, 1, 1})};
  double gns_res = 0.0, functor = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const BlockAlgebra& b = algebras[static_cast<std::size_t>(trial % 3)];
    const CPMap t = random_cp(rng, b, count(rng), 0.9);
    const CPMap s = random_cp(rng, b, count(rng), 0.8);
    const GNSResult g = gns(t, tol);
    for (const auto& e : b.matrix_units())
      gns_res = std::max(gns_res, (g.cyclic.inner(g.cyclic.left_mul(e)) - t.apply(e)).norm());
    require(o, minimal_kraus(t, tol).kraus().size() == numerical_rank(choi(t), tol), "minimal Kraus count");
    const Correspondence f = gns(s, tol).corr;
    require(o, tensor(g.corr, f).mult() == g.corr.mult() * f.mult(), "multiplicity multiplicativity");
    functor = std::max(functor, map_distance(unitalize_cpmap(compose(s, t), tol),
                                             compose(unitalize_cpmap(s, tol), unitalize_cpmap(t, tol))));
  }
  require(o, gns_res <= 1e-10, fmt::format("GNS residual {:.3g}", gns_res));
  require(o, functor <= 1e-10, fmt::format("unitalization residual {:.3g}", functor));
  if (o.pass) o.detail = fmt::format("200 maps, GNS {:.2g}, unitalization {:.2g}", gns_res, functor);
  return o;
}

Outcome nonsolex_criterion() {
  Outcome o;
  const ExampleReport r = nonsolex(tol);
  require_claims(o, r, {"QM2Q_equals_minus_Q_over_3", "QMQMQ_equals_Q_over_3", "solid_gap_above_0.1"});
  if (o.pass) o.detail = fmt::format("gap {:.6f}", computed(r, "solid_gap_above_0.1"));
  return o;
}

Outcome parrot_criterion() {
  Outcome o;
  const ExampleReport r = parrot(0, 200);
  require(o, r.verdict() == Verdict::Pass, "verdict");
  require(o, std::abs(computed(r, "commutator_norm") - 2.0) <= 1e-12, "commutator norm");
  if (o.pass) o.detail = "commutator norm 2, forced bound on 200 candidates";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"Bhat norm and powers", bhat_norms},
      {"Bhat data and goodness witness", bhat_data},
      {"SCex3 strong commutation", scex3_criterion},
      {"SCex5 multiplicities", scex5_criterion},
      {"SCex2 property", scex2_criterion},
      {"flip example exchange", flip_criterion},
      {"non-dilatable semigroup", nondilatable_criterion},
      {"permutation suite", permutation_suite},
      {"two-parameter dilation", two_param_suite},
      {"spanned superproduct properness", spanned_criterion},
      {"row-contraction dilation", row_contraction_suite},
      {"GNS and Kraus suite", gns_kraus_suite},
      {"nonsolex", nonsolex_criterion},
      {"Parrot certificate", parrot_criterion},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failed;
    std::cout << fmt::format("{:>2} {} {} ({:.2f} s): {}\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, secs,
                             o.detail)
              << std::flush;
  }
  std::cout << fmt::format("{} of {} criteria pass\n", criteria.size() - static_cast<std::size_t>(failed),
                           criteria.size());
  return failed == 0 ? 0 : 1;
}
