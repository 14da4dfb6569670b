#include "dilkit/gallery.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace dilkit {

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Fail: return "FAIL";
    case Verdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

Verdict ExampleReport::verdict() const {
  if (std::any_of(claims.begin(), claims.end(), [](const Claim& c) { return !c.pass; })) return Verdict::Fail;
  return inconclusive ? Verdict::Inconclusive : Verdict::Pass;
}

const Claim& ExampleReport::claim(const std::string& cid) const {
  for (const auto& c : claims)
    if (c.id == cid) return c;
  throw Error(ErrorKind::InvalidInput, "no claim " + cid + " in report " + id);
}

void ExampleReport::add(std::string cid, ClaimValue expected, ClaimValue computed, double residual, bool pass) {
  claims.push_back({std::move(cid), std::move(expected), std::move(computed), residual, pass});
}

void ExampleReport::add_close(std::string cid, double expected, double computed, double bound) {
  const double r = std::abs(computed - expected);
  add(std::move(cid), expected, computed, r, r <= bound);
}

void ExampleReport::add_residual(std::string cid, double residual, double bound) {
  add(std::move(cid), 0.0, residual, residual, residual <= bound);
}

void ExampleReport::add_equal(std::string cid, long expected, long computed) {
  add(std::move(cid), expected, computed, std::abs(static_cast<double>(expected - computed)), expected == computed);
}

void ExampleReport::add_flag(std::string cid, bool expected, bool computed) {
  add(std::move(cid), expected, computed, expected == computed ? 0.0 : 1.0, expected == computed);
}

namespace {

CMatrix gaussian(std::mt19937& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = cplx(n(rng), n(rng));
  return m;
}

CMatrix coordinate_projection(Eigen::Index n, Eigen::Index i) {
  CMatrix p = CMatrix::Zero(n, n);
  p(i, i) = 1.0;
  return p;
}

std::string mult_string(const IMatrix& m) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    s += i ? ",[" : "[";
    for (Eigen::Index j = 0; j < m.cols(); ++j) s += (j ? "," : "") + std::to_string(m(i, j));
    s += "]";
  }
  return s + "]";
}

std::vector<double> flatten_real(const CMatrix& m) {
  std::vector<double> v;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v.push_back(m(i, j).real());
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------

double bhat_min_parameter() { return (5.0 + std::sqrt(13.0)) / 2.0; }

std::vector<CMatrix> bhat_operators(double C) {
  CMatrix c1(2, 2), c2(2, 2), c3(2, 2);
  c1 << 2, 1, -1, 0;
  c2 << 0, 1, 3, 0;
  c3 << 0, 1, 0, 0;
  return {c1 / std::sqrt(2 * C), c2 / std::sqrt(6 * C), c3 / std::sqrt(3 * C)};
}

ExampleReport bhat(double C, const Tolerance& tol) {
  const double cmin = bhat_min_parameter();
  if (!std::isfinite(C) || C < cmin * (1 - 1e-15))
    throw Error(ErrorKind::ParameterOutOfRange, fmt::format("bhat: C = {} is below (5 + sqrt 13)/2", C));
  ExampleReport r;
  r.id = "bhat";
  r.header = {{"C", fmt::format("{:.17g}", C)}, {"levels", "3"}, {"depth", "2"}};
  const BlockAlgebra M2({2});
  const std::vector<CMatrix> c = bhat_operators(C);
  const CPMap T(M2, M2, c);

  r.add_close("norm_T1", cmin / C, op_norm(T.unit_image()), 1e-10);
  r.add_flag("contractive", true, is_contractive(T, tol));
  for (int n = 2; n <= 4; ++n) {
    const CPMap tn = power(T, n);
    CMatrix shape(2, 2);
    shape << 2, 1, 1, 1;
    double res = 0.0;
    for (const auto& e : M2.matrix_units()) {
      const cplx f = (2.0 * (e(0, 0) + e(1, 1)) - (e(0, 1) + e(1, 0))) / 4.0 * std::pow(2.0 / C, n);
      res = std::max(res, (tn.apply(e) - f * shape).norm());
    }
    r.add_residual(fmt::format("T{}_formula", n), res, 1e-10);
  }

  CMatrix d(3, 1), D(3, 3), d_exp(3, 1), D_exp(3, 3);
  for (int i = 0; i < 3; ++i) {
    d(i, 0) = c[i](0, 0);
    for (int j = 0; j < 3; ++j) D(i, j) = (c[i] * c[j])(0, 0);
  }
  d_exp << std::sqrt(2.0 / C), 0, 0;
  D_exp << 9, 3 * std::sqrt(3.0), 0, -std::sqrt(3.0), 3, 0, -std::sqrt(6.0), 3 * std::sqrt(2.0), 0;
  D_exp /= 6 * C;
  const double dres = (d - d_exp).cwiseAbs().maxCoeff(), Dres = (D - D_exp).cwiseAbs().maxCoeff();
  r.add("d", flatten_real(d_exp), flatten_real(d), dres, dres <= 1e-12);
  r.add("D", flatten_real(D_exp), flatten_real(D), Dres, Dres <= 1e-12);

  // p c_1 p c_2 p - p c_1 c_2 p on G with p = e e*
  const CMatrix pe = coordinate_projection(2, 0);
  r.add_close("goodness_witness", std::sqrt(3.0) / (2 * C), op_norm(pe * c[0] * pe * c[1] * pe - pe * c[0] * c[1] * pe),
              1e-12);

  const RowContraction rc = RowContraction::make(c, tol);
  const TruncatedCoisometricDilation dil = dilate_row_contraction(rc, 3, tol);
  r.add_residual("dilation_interior", dil.interior_residual(), 1e-10);
  r.add_residual("dilation_corner", dil.corner_residual(rc), 1e-12);
  const DilationTriple t = dil.triple(coordinate_projection(dil.total, 0));
  const GridCap cap = GridCap::uniform(1, 2);
  const Classification cl = classify(t, cap, tol);
  r.add_flag("weak", true, cl.is_weak);
  r.add_flag("good", false, cl.is_good);
  const Superproduct sp = superproduct_of_triple(t, cap, tol);
  r.add_equal("dim_E1", 3, sp.system.member({1}).total_mult());
  r.add_flag("product_system", true, sp.is_product());
  r.add_equal("solver_kernel_dim", 0, product_subsystem_solver(sp.system, tol).kernel_dim);
  r.conclusion =
      "no proper product subsystem contains the vectors theta_n(p)p up to level 2; deeper levels unchecked";
  return r;
}

ExampleReport parrot(unsigned seed, int trials, bool commuting) {
  ExampleReport r;
  r.id = "parrot";
  r.header = {{"seed", std::to_string(seed)}, {"trials", std::to_string(trials)},
              {"v3", commuting ? "v2" : "Z"}};
  CMatrix X(2, 2), Z(2, 2);
  X << 0, 1, 1, 0;
  Z << 1, 0, 0, -1;
  const CMatrix id = CMatrix::Identity(2, 2);
  const std::vector<CMatrix> v = {id, X, commuting ? X : Z};
  double cois = 0.0;
  for (const auto& x : v) cois = std::max(cois, op_norm(x * x.adjoint() - id));
  r.add_residual("coisometries", cois, 1e-12);
  const double comm = op_norm(v[1] * v[2] - v[2] * v[1]);
  r.add_close("commutator_norm", commuting ? 0.0 : 2.0, comm, 1e-12);

  // A coisometric block e_1 forces e_2 = v_2 e_1 and e_3 = v_3 e_1; the
  // remaining relation v_2 e_3 = v_3 e_2 then fails by at least |[v_2, v_3]|.
  std::mt19937 rng(seed);
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < trials; ++i) {
    Eigen::HouseholderQR<CMatrix> qr(gaussian(rng, 3, 3));
    const CMatrix u = qr.householderQ() * CMatrix::Identity(3, 3);
    const CMatrix e1 = u.topRows(2);
    const CMatrix e2 = v[1] * e1, e3 = v[2] * e1;
    worst = std::min(worst, op_norm(v[1] * e3 - v[2] * e2));
  }
  if (trials == 0) worst = 0.0;
  r.add(fmt::format("forced_residual_at_least_{:.17g}", comm / 2), comm / 2, worst, 0.0,
        trials > 0 && worst >= comm / 2 - 1e-12);
  if (comm <= 1e-12) {
    r.inconclusive = true;
    r.conclusion = "v2 and v3 commute; the forced relations are consistent and certify nothing";
  } else {
    r.conclusion = "c1, c2, c3 have no commuting coisometric dilation";
  }
  return r;
}

ExampleReport nonsolex(const Tolerance& tol) {
  ExampleReport r;
  r.id = "nonsolex";
  const double x = 1.0 / std::sqrt(3.0), y = std::sqrt(1 - x * x);
  r.header = {{"x", fmt::format("{:.17g}", x)}, {"levels", "4"}};
  CMatrix M(2, 2);
  M << x, -y, y, x;
  const CMatrix Q = coordinate_projection(2, 0);
  const CMatrix QM2Q = Q * M * M * Q, C = Q * M * Q;
  r.add_residual("QM2Q_equals_minus_Q_over_3", (QM2Q + Q / 3.0).norm(), 1e-12);
  r.add_residual("QMQMQ_equals_Q_over_3", (C * C - Q / 3.0).norm(), 1e-12);
  const BlockAlgebra M2({2});
  r.add_residual("same_cp_map", map_distance(CPMap(M2, M2, {C * C}), CPMap(M2, M2, {QM2Q})), 1e-12);
  r.add_close("C2_minus_QM2Q", 2.0 / 3.0, op_norm(C * C - QM2Q), 1e-12);

  CMatrix N = CMatrix::Zero(3, 3);
  N(0, 1) = N(1, 2) = 1.0;
  const RowContraction rc = RowContraction::make({N}, tol);
  const TruncatedCoisometricDilation W = dilate_row_contraction(rc, 4, tol);
  const CMatrix w = kron(M, W.w[0]);
  const CMatrix p = kron(Q, W.p);
  const int dim = static_cast<int>(w.rows());
  const BlockAlgebra A({dim});
  DilationTriple t{A, {CPMap(A, A, {w})}, p, kron(CMatrix::Identity(2, 2), W.interior), W.levels - 1};
  const Classification cl = classify(t, GridCap::uniform(1, 3), tol);
  r.add_flag("dilation", true, cl.is_dilation);
  r.add_flag("strong", false, cl.is_strong);
  // The dilated semigroup is c*^n . c^n with c = C (x) N.
  const CMatrix c = kron(C, N);
  double sres = 0.0;
  const Corner cor = corner_of(A, p, tol);
  for (int n = 1; n <= 3; ++n) {
    CMatrix cn = CMatrix::Identity(c.rows(), c.cols());
    for (int i = 0; i < n; ++i) cn = cn * c;
    const LinearMapData got = corner_map(t, {n}, tol);
    const auto units = cor.algebra.matrix_units();
    for (std::size_t i = 0; i < units.size(); ++i) {
      const CMatrix expect = cor.to_corner(cn.adjoint() * cor.from_corner(units[i]) * cn);
      sres = std::max(sres, (got.images[i] - expect).norm());
    }
  }
  r.add_residual("dilated_semigroup", sres, 1e-12);
  const double gap = op_norm(p * w * w * p - p * w * p * w * p);
  r.add("solid_gap_above_0.1", 0.1, gap, 0.0, gap > 0.1);
  r.conclusion = "a dilation of an elementary semigroup that is neither solidly elementary nor strong";
  return r;
}

FlipData flip_example_data() {
  const BlockAlgebra C1({1});
  const Correspondence h(C1, C1, IMatrix::Constant(1, 1, 2));
  FlipData fd;
  fd.spaces.assign(3, h);
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j < i; ++j) fd.flips[{j, i}] = BilinearMap::identity(tensor(h, h));
  fd.flips[{2, 3}] = hilbert_swap(h, h);
  return fd;
}

ExampleReport shalit_solel_flip(const Tolerance& tol) {
  ExampleReport r;
  r.id = "shalit-solel-flip";
  const FlipData fd = flip_example_data();
  const ExchangeResult ex = check_exchange(fd, tol);
  r.add_flag("exchange_holds", false, ex.holds);
  const std::string triple =
      ex.triple ? fmt::format("({},{},{})", (*ex.triple)[0], (*ex.triple)[1], (*ex.triple)[2]) : "none";
  r.add("witness_triple", std::string("(1,2,3)"), triple, 0.0, triple == "(1,2,3)");
  r.add_close("witness_residual", std::sqrt(2.0), ex.witness_residual, 1e-12);
  r.add_equal("witness_index", 1, ex.witness_index);  // e1 (x) e1 (x) e2
  bool refused = false;
  try {
    product_from_flips(fd, GridCap::uniform(3, 1), tol);
  } catch (const Error& e) {
    refused = e.kind() == ErrorKind::ExchangeConditionViolated;
  }
  r.add_flag("product_system_refused", true, refused);
  r.conclusion = "the truncated subproduct system does not embed into a superproduct system";
  return r;
}

ExampleReport nondilatable_semigroup(const Tolerance& tol) {
  ExampleReport r;
  r.id = "nondilatable-semigroup";
  const FlipData fd = flip_example_data();
  const TruncatedSystem sys = truncated_from_flips(fd, tol);
  const SubproductSemigroup s = semigroup_from_subproduct(sys, tol);
  r.add_equal("module_dim", 31, s.dim);
  const SemigroupCheck chk = check_subproduct_semigroup(s, tol);
  r.add_residual("semigroup_residual", chk.semigroup_residual, 1e-10);
  r.add_flag("kraus_ranks_match_members", true, chk.multiplicities_match);
  r.add_flag("exchange_holds", false, check_exchange(fd, tol).holds);

  // The unitalized generators form a Markov semigroup on M_31 + C.
  std::vector<CPMap> u;
  bool markov = true;
  for (int i = 1; i <= 3; ++i) {
    u.push_back(unitalize_cpmap(s.at(unit_index(3, i)), tol));
    markov = markov && is_markov(u.back(), tol);
  }
  r.add_equal("unitalized_dim", 32, u[0].domain().total_dim());
  r.add_flag("unitalized_markov", true, markov);
  std::mt19937 rng(1);
  double comm = 0.0;
  for (int k = 0; k < 4; ++k) {
    CMatrix a = CMatrix::Zero(32, 32);
    a.topLeftCorner(31, 31) = gaussian(rng, 31, 31);
    a(31, 31) = gaussian(rng, 1, 1)(0, 0);
    a /= a.norm();
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) comm = std::max(comm, op_norm(u[i].apply(u[j].apply(a)) - u[j].apply(u[i].apply(a))));
  }
  r.add_residual("unitalized_commute", comm, 1e-10);
  r.conclusion =
      "no good dilation; its unitalization is a Markov semigroup on a 32-dimensional algebra with no (weak) dilation";
  return r;
}

Eigen::MatrixXd scex3_matrix() {
  Eigen::MatrixXd t(3, 3);
  t << 0.5, 0, 0.5, 0.25, 0.5, 0.25, 0.25, 0.5, 0.25;
  return t;
}

ExampleReport scex3(const Tolerance& tol) {
  ExampleReport r;
  r.id = "scex3";
  const CPMap T = CPMap::from_markov_matrix(scex3_matrix());
  const CPMap T2 = power(T, 2);
  r.add_residual("commute", map_distance(compose(T, T2), compose(T2, T)), 1e-12);
  const StrongCommuteResult sc = strongly_commute(T, T2, tol);
  r.add_flag("strongly_commute", false, sc.strongly);
  const std::string block = sc.iso.block ? fmt::format("({},{})", sc.iso.block->first, sc.iso.block->second) : "none";
  const std::string dims = sc.iso.dims ? fmt::format("({},{})", sc.iso.dims->first, sc.iso.dims->second) : "none";
  r.add("witness_block", std::string("(1,1)"), block, 0.0, block == "(1,1)");
  r.add("witness_dims", std::string("(2,3)"), dims, 0.0, dims == "(2,3)");
  r.conclusion = "T and T^2 commute but do not commute strongly";
  return r;
}

ExampleReport scex5(double b, const Tolerance& tol) {
  if (!(b > 0.0 && b < 1.0)) throw Error(ErrorKind::ParameterOutOfRange, "scex5: b must lie in (0, 1)");
  ExampleReport r;
  r.id = "scex5";
  r.header = {{"b", fmt::format("{:.17g}", b)}};
  Eigen::MatrixXd tt(2, 2), st(2, 2);
  tt << 1 - b, b, 0, 1;
  st << 0, 1, 0, 1;
  const CPMap T = CPMap::from_markov_matrix(tt), S = CPMap::from_markov_matrix(st);
  r.add_residual("commute", map_distance(compose(T, S), compose(S, T)), 1e-12);
  const StrongCommuteResult sc = strongly_commute(T, S, tol);
  const std::string ef = mult_string(sc.mult_ef), fe = mult_string(sc.mult_fe);
  r.add("mult_EF", std::string("[[0,2],[0,1]]"), ef, 0.0, ef == "[[0,2],[0,1]]");
  r.add("mult_FE", std::string("[[0,1],[0,1]]"), fe, 0.0, fe == "[[0,1],[0,1]]");
  r.add_flag("strongly_commute", false, sc.strongly);
  const BlockAlgebra C1({1});
  const CPMap t0(C1, C1, {CMatrix::Constant(1, 1, std::sqrt(1 - b))});
  r.add_flag("restrictions_strongly_commute", true, strongly_commute(t0, CPMap::zero(C1, C1), tol).strongly);
  r.conclusion = "the unitalizations commute but not strongly, although the original maps do";
  return r;
}

ExampleReport scex2_property(int trials, unsigned seed, const Tolerance& tol) {
  ExampleReport r;
  r.id = "scex2-property";
  r.header = {{"seed", std::to_string(seed)}, {"trials_per_algebra", std::to_string(trials)}};
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> count(1, 3);
  for (int n : {2, 3}) {
    const BlockAlgebra M({n});
    long strong = 0;
    double worst_comm = 0.0;
    for (int i = 0; i < trials; ++i) {
      std::vector<CMatrix> kraus;
      const int k = count(rng);
      for (int j = 0; j < k; ++j) kraus.push_back(gaussian(rng, n, n) / std::sqrt(static_cast<double>(n * k)));
      const CPMap T(M, M, kraus);
      const CPMap T2 = power(T, 2);
      worst_comm = std::max(worst_comm, map_distance(compose(T, T2), compose(T2, T)));
      if (strongly_commute(T, T2, tol).strongly) ++strong;
    }
    r.add_residual(fmt::format("M{}_commute", n), worst_comm, 1e-10);
    r.add_equal(fmt::format("M{}_strongly_commuting", n), trials, strong);
  }
  r.conclusion = "every sampled pair (T, T^2) commutes strongly";
  return r;
}

std::vector<std::string> example_names() {
  return {"bhat", "parrot", "nonsolex", "shalit-solel-flip", "nondilatable-semigroup", "scex3", "scex5",
          "scex2-property"};
}

ExampleReport run_example(const std::string& name, std::optional<double> param, unsigned seed, const Tolerance& tol) {
  if (name == "bhat") return bhat(param.value_or(6.0), tol);
  if (name == "parrot") return parrot(seed);
  if (name == "nonsolex") return nonsolex(tol);
  if (name == "shalit-solel-flip") return shalit_solel_flip(tol);
  if (name == "nondilatable-semigroup") return nondilatable_semigroup(tol);
  if (name == "scex3") return scex3(tol);
  if (name == "scex5") return scex5(param.value_or(0.5), tol);
  if (name == "scex2-property") return scex2_property(100, seed, tol);
  throw Error(ErrorKind::InvalidInput, "unknown example " + name);
}

}  // namespace dilkit
