#include "commands.hpp"

#include "json_io.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <sstream>

namespace dilkit::cli {

namespace {

using io::InputError;
using io::json;

struct Options {
  std::string input = "-";
  std::string out = "-";
  double tol_rank = Tolerance{}.rank_rel;
  double tol_eq = Tolerance{}.eq_rel;
  std::string cap;
  unsigned seed = 0;
  // subcommand specific
  int levels = 3;
  std::string example;
  std::optional<double> param_c, param_b;
  std::string values;

  Tolerance tol() const { return {tol_rank, tol_eq}; }
};

struct Outcome {
  json doc;
  int code = kOk;
};

// Verified negative outcomes raised as library errors.
bool is_verified_failure(ErrorKind k) {
  return k == ErrorKind::ExchangeConditionViolated || k == ErrorKind::NotStrong ||
         k == ErrorKind::UnitConstraintViolated;
}

json read_input(const Options& o, std::istream& in) {
  std::string text;
  if (o.input == "-") {
    text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  } else {
    std::ifstream f(o.input);
    if (!f) throw InputError("", "cannot read " + o.input);
    text.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
  }
  return io::parse_text(text);
}

GridCap cap_for(const Options& o, int d, int fallback) {
  return o.cap.empty() ? GridCap::uniform(d, fallback) : io::parse_cap_string(o.cap, d);
}

std::vector<int> parse_values(const std::string& s) {
  std::vector<int> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError("", "malformed --values '" + s + "'");
    }
  }
  if (v.empty()) throw InputError("", "--values is empty");
  return v;
}

std::pair<CPMap, CPMap> read_pair(const json& j) {
  io::expect_document(j, "cpmap-pair");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "schema" && it.key() != "version" && it.key() != "t" && it.key() != "s")
      throw InputError("/" + it.key(), "unknown field '" + it.key() + "'");
  if (!j.contains("t")) throw InputError("/t", "missing field 't'");
  if (!j.contains("s")) throw InputError("/s", "missing field 's'");
  return {io::parse_cpmap(j["t"], "/t", false), io::parse_cpmap(j["s"], "/s", false)};
}

json validation_json(const ValidationReport& v) {
  json checks = json::array();
  for (const auto& c : v.checks)
    checks.push_back(json{{"name", c.name}, {"residual", c.residual}, {"passed", c.passed}, {"probed", c.probed}});
  return json{{"passed", v.passed()}, {"max_residual", v.max_residual()}, {"checks", checks}};
}

json nested(json doc) {
  doc.erase("schema");
  doc.erase("version");
  return doc;
}

std::string pair_key(const Index& m, const Index& n) { return index_string(m) + "+" + index_string(n); }

// ---------------------------------------------------------------------------

Outcome cmd_gns(const Options& o, std::istream& in) {
  const CPMap t = io::parse_cpmap(read_input(o, in), "", true);
  const GNSResult g = gns(t, o.tol());
  double residual = 0.0;
  for (const CMatrix& a : t.domain().matrix_units())
    residual = std::max(residual, (g.cyclic.inner(g.cyclic.left_mul(a)) - t.apply(a)).norm());
  json doc = io::document("gns");
  doc["left"] = io::to_json(g.corr.left());
  doc["right"] = io::to_json(g.corr.right());
  doc["mult"] = io::to_json(g.corr.mult());
  doc["cyclic"] = io::to_json(g.cyclic);
  doc["reproduction_residual"] = residual;
  return {doc};
}

Outcome cmd_kraus_min(const Options& o, std::istream& in) {
  const CPMap t = io::parse_cpmap(read_input(o, in), "", true);
  return {io::to_json(minimal_kraus(t, o.tol()), true)};
}

Outcome cmd_unitalize(const Options& o, std::istream& in) {
  const CPMap t = io::parse_cpmap(read_input(o, in), "", true);
  if (t.domain() != t.codomain()) throw InputError("/codomain", "unitalization needs an endomorphism");
  return {io::to_json(unitalize_cpmap(t, o.tol()), true)};
}

Outcome cmd_strong_commute(const Options& o, std::istream& in) {
  const auto [t, s] = read_pair(read_input(o, in));
  const StrongCommuteResult r = strongly_commute(t, s, o.tol());
  json doc = io::document("strong-commute");
  doc["strongly"] = r.strongly;
  doc["verdict"] = r.strongly ? "YES" : "NO";
  doc["mult_ef"] = io::to_json(r.mult_ef);
  doc["mult_fe"] = io::to_json(r.mult_fe);
  if (r.iso.block) doc["block"] = {r.iso.block->first, r.iso.block->second};
  if (r.iso.dims) doc["dims"] = {r.iso.dims->first, r.iso.dims->second};
  doc["gram_residual"] = r.iso.gram_residual;
  return {doc, r.strongly ? kOk : kVerifiedFail};
}

Outcome cmd_check_exchange(const Options& o, std::istream& in) {
  const FlipData fd = io::parse_flips(read_input(o, in));
  try {
    fd.validate(o.tol());
  } catch (const Error& e) {
    throw InputError("/flips", e.what());
  }
  const ExchangeResult r = check_exchange(fd, o.tol());
  json doc = io::document("exchange");
  doc["holds"] = r.holds;
  doc["verdict"] = r.holds ? "YES" : "NO";
  if (r.triple) doc["triple"] = *r.triple;
  doc["residual_norm"] = r.residual_norm;
  if (!r.holds) {
    doc["witness_residual"] = r.witness_residual;
    doc["witness_index"] = r.witness_index;
    if (r.witness_block) doc["witness_block"] = {r.witness_block->first, r.witness_block->second};
    doc["conclusion"] = "does not embed into a superproduct system";
  }
  return {doc, r.holds ? kOk : kVerifiedFail};
}

Outcome cmd_build_product(const Options& o, std::istream& in) {
  const FlipData fd = io::parse_flips(read_input(o, in));
  try {
    fd.validate(o.tol());
  } catch (const Error& e) {
    throw InputError("/flips", e.what());
  }
  const TruncatedSystem sys = product_from_flips(fd, cap_for(o, fd.d(), 2), o.tol());
  const ValidationReport v = validate(sys, o.tol());
  json doc = io::document("build-product");
  doc["system"] = nested(io::to_json(sys));
  doc["validation"] = validation_json(v);
  return {doc, v.passed() ? kOk : kVerifiedFail};
}

Outcome cmd_two_param(const Options& o, std::istream& in) {
  const auto [t1, t2] = read_pair(read_input(o, in));
  const TwoParamDilation r = two_param_markov_dilation(t1, t2, cap_for(o, 2, 2), o.tol());
  const ValidationReport v = validate(r.system, o.tol());
  json doc = io::document("two-param-dilation");
  doc["f21_strict"] = r.f21_strict;
  doc["f12_strict"] = r.f12_strict;
  doc["quasi_generic"] = r.quasi_generic();
  doc["generic"] = r.generic();
  doc["spanned_proper"] = r.spanned.proper;
  if (r.spanned.witness) {
    doc["spanned_witness"] = {index_string(r.spanned.witness->first), index_string(r.spanned.witness->second)};
    doc["rank_gap"] = r.spanned.rank_gap;
  }
  if (r.solver) doc["solver_kernel_dim"] = r.solver->kernel_dim;
  doc["flip_recovery"] = r.flip_recovery;
  doc["flip_exchange"] = r.flip_exchange;
  doc["validation"] = validation_json(v);
  doc["system"] = nested(io::to_json(r.system));
  return {doc, v.passed() ? kOk : kVerifiedFail};
}

Outcome cmd_dilate_row(const Options& o, std::istream& in) {
  const RowContraction rc = io::parse_row_contraction(read_input(o, in), o.tol());
  if (o.levels < 1) throw InputError("", "--levels must be at least 1");
  const TruncatedCoisometricDilation dil = dilate_row_contraction(rc, o.levels, o.tol());
  json doc = io::document("dilate-row");
  doc["dim_g"] = dil.dim_g;
  doc["d"] = dil.d;
  doc["levels"] = dil.levels;
  doc["defect_dim"] = dil.defect_dim;
  doc["total"] = dil.total;
  doc["interior_residual"] = dil.interior_residual();
  doc["corner_residual"] = dil.corner_residual(rc);
  doc["triple"] = nested(io::to_json(dil.triple()));
  return {doc};
}

Outcome cmd_classify(const Options& o, std::istream& in) {
  const DilationTriple t = io::parse_triple(read_input(o, in));
  const TripleCheck tc = check_triple(t, o.tol(), o.seed);
  json doc = io::document("classification");
  doc["triple_check"] = json{{"multiplicativity", tc.multiplicativity},
                             {"commutation", tc.commutation},
                             {"projection", tc.projection},
                             {"passed", tc.passed}};
  if (!tc.passed) return {doc, kVerifiedFail};
  const Classification c = classify(t, cap_for(o, t.d(), 2), o.tol());
  doc["is_dilation"] = c.is_dilation;
  doc["is_weak"] = c.is_weak;
  doc["is_strong"] = c.is_strong;
  doc["is_good"] = c.is_good;
  doc["is_markov_dilated"] = c.is_markov_dilated;
  doc["p_increasing"] = c.p_increasing;
  doc["good_matches_unit"] = c.good_matches_unit;
  doc["any_unchecked"] = c.any_unchecked();
  json checks = json::array();
  for (const auto& ch : c.checks) {
    json e{{"predicate", ch.predicate}, {"n", index_string(ch.n)}, {"residual", ch.residual},
           {"status", status_name(ch.status)}};
    if (!ch.m.empty()) e["m"] = index_string(ch.m);
    checks.push_back(std::move(e));
  }
  doc["checks"] = checks;
  return {doc};
}

Outcome cmd_superproduct(const Options& o, std::istream& in) {
  const DilationTriple t = io::parse_triple(read_input(o, in));
  const Superproduct sp = superproduct_of_triple(t, cap_for(o, t.d(), 2), o.tol());
  json doc = io::document("superproduct");
  doc["system"] = nested(io::to_json(sp.system));
  json surj = json::object();
  for (const auto& [mn, s] : sp.surjective) surj[pair_key(mn.first, mn.second)] = s;
  doc["surjective"] = surj;
  doc["is_product"] = sp.is_product();
  doc["product_consistency"] = sp.product_consistency;
  return {doc};
}

Outcome cmd_verify_example(const Options& o) {
  if (o.param_c && o.param_b) throw InputError("", "--param-C and --param-b are exclusive");
  std::optional<double> param = o.param_c ? o.param_c : o.param_b;
  if (o.param_c && o.example != "bhat") throw InputError("", "--param-C applies to bhat only");
  if (o.param_b && o.example != "scex5") throw InputError("", "--param-b applies to scex5 only");
  bool known = false;
  for (const auto& n : example_names()) known = known || n == o.example;
  if (!known) throw InputError("", "unknown example '" + o.example + "'");
  ExampleReport r;
  try {
    r = run_example(o.example, param, o.seed, o.tol());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ParameterOutOfRange) throw InputError("", e.what());
    throw;
  }
  return {io::to_json(r), r.verdict() == Verdict::Fail ? kVerifiedFail : kOk};
}

IndexFunction index_function(const Options& o) {
  const IndexFunction f = parse_values(o.values);
  int p = 0;
  for (int v : f) p = std::max(p, v);
  try {
    validate_index_function(f, p);
  } catch (const Error& e) {
    throw InputError("", e.what());
  }
  return f;
}

Outcome cmd_perm_sigma(const Options& o) {
  const IndexFunction f = index_function(o);
  json doc = io::document("perm-sigma");
  doc["sigma"] = sigma_f(f);
  doc["inversions"] = inversions(f);
  return {doc};
}

Outcome cmd_perm_chains(const Options& o) {
  const IndexFunction f = index_function(o);
  std::vector<TranspositionChain> chains;
  try {
    chains = all_maximal_chains(f);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::CapExceeded) throw InputError("", e.what());
    throw;
  }
  json doc = io::document("perm-chains");
  doc["values"] = f;
  doc["inversions"] = inversions(f);
  doc["sigma"] = sigma_f(f);
  doc["count"] = chains.size();
  doc["chains"] = chains;
  return {doc};
}

void emit(const Options& o, const json& doc, std::ostream& out) {
  const std::string text = io::write(doc);
  if (o.out == "-") {
    out << text;
    return;
  }
  std::ofstream f(o.out);
  if (!f) throw InputError("", "cannot write " + o.out);
  f << text;
}

void report_input_error(std::ostream& err, const std::string& pointer, const std::string& message) {
  err << io::write(json{{"error", "input"}, {"pointer", pointer}, {"message", message}});
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Finite-dimensional CP-semigroup dilation toolkit", "dilkit"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* sub, bool with_input) {
    if (with_input) sub->add_option("input", o.input, "input JSON document, - for stdin");
    sub->add_option("--out", o.out, "output file, - for stdout");
    sub->add_option("--tol-rank", o.tol_rank, "relative rank threshold")->check(CLI::PositiveNumber);
    sub->add_option("--tol-eq", o.tol_eq, "relative equality tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--cap", o.cap, "truncation cap, one value or one per coordinate");
    sub->add_option("--seed", o.seed, "seed for randomized checks");
  };

  using Handler = std::function<Outcome()>;
  std::vector<std::pair<CLI::App*, Handler>> handlers;
  auto with_input = [&](const char* name, const char* help, Outcome (*f)(const Options&, std::istream&)) {
    CLI::App* sub = app.add_subcommand(name, help);
    common(sub, true);
    handlers.emplace_back(sub, [f, &o, &in] { return f(o, in); });
    return sub;
  };

  with_input("gns", "GNS correspondence and cyclic vector of a CP map", cmd_gns);
  with_input("kraus-min", "minimal Kraus decomposition", cmd_kraus_min);
  with_input("unitalize", "unitalization of a CP map", cmd_unitalize);
  with_input("strong-commute", "strong commutation of two CP maps", cmd_strong_commute);
  with_input("check-exchange", "detailed exchange conditions of flip data", cmd_check_exchange);
  with_input("build-product", "product system over N_0^d from flips", cmd_build_product);
  with_input("two-param-dilation", "product system of a commuting Markov pair", cmd_two_param);
  with_input("dilate-row", "truncated coisometric dilation of a row contraction", cmd_dilate_row)
      ->add_option("--levels", o.levels, "number of Fock levels");
  with_input("classify-triple", "weak, strong and good predicates of a triple", cmd_classify);
  with_input("superproduct", "superproduct system of a triple", cmd_superproduct);

  CLI::App* ve = app.add_subcommand("verify-example", "run one verified example");
  common(ve, false);
  ve->add_option("name", o.example, "example name")->required();
  ve->add_option("--param-C", o.param_c, "parameter C of bhat");
  ve->add_option("--param-b", o.param_b, "parameter b of scex5");
  handlers.emplace_back(ve, [&o] { return cmd_verify_example(o); });

  for (const char* name : {"perm-sigma", "perm-chains"}) {
    CLI::App* sub = app.add_subcommand(name, std::string(name) == "perm-sigma" ? "stable sorting permutation"
                                                                              : "all maximal admissible chains");
    common(sub, false);
    sub->add_option("--values", o.values, "values f(1),...,f(q), comma separated")->required();
    handlers.emplace_back(sub, std::string(name) == "perm-sigma" ? Handler([&o] { return cmd_perm_sigma(o); })
                                                                  : Handler([&o] { return cmd_perm_chains(o); }));
  }

  std::vector<const char*> argv{"dilkit"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    report_input_error(err, "", e.what());
    return kInputError;
  }

  for (const auto& [sub, handler] : handlers) {
    if (!sub->parsed()) continue;
    try {
      const Outcome r = handler();
      emit(o, r.doc, out);
      return r.code;
    } catch (const InputError& e) {
      report_input_error(err, e.pointer(), e.what());
      return kInputError;
    } catch (const Error& e) {
      if (is_verified_failure(e.kind())) {
        json doc = io::document("failure");
        doc["error"] = error_kind_name(e.kind());
        doc["message"] = e.what();
        try {
          emit(o, doc, out);
        } catch (const InputError& w) {
          report_input_error(err, w.pointer(), w.what());
          return kInputError;
        }
        return kVerifiedFail;
      }
      err << io::write(json{{"error", error_kind_name(e.kind())}, {"pointer", ""}, {"message", e.what()}});
      return kInputError;
    }
  }
  return kInputError;
}

}  // namespace dilkit::cli
