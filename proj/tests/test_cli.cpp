#include "doctest.h"
#include "commands.hpp"
#include "json_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

using namespace dilkit;
using io::json;

namespace {

struct Run {
  int code;
  std::string out, err;
  json doc() const { return json::parse(out); }
  json error() const { return json::parse(err); }
};

Run run(std::vector<std::string> args, const std::string& input = "") {
  std::istringstream in(input);
  std::ostringstream out, err;
  const int code = cli::run(args, in, out, err);
  return {code, out.str(), err.str()};
}

Run run_doc(std::vector<std::string> args, const json& doc) { return run(std::move(args), io::write(doc)); }

json pair_doc(const CPMap& t, const CPMap& s) {
  json j = io::document("cpmap-pair");
  j["t"] = io::to_json(t, false);
  j["s"] = io::to_json(s, false);
  return j;
}

CPMap scex3_map() { return CPMap::from_markov_matrix(scex3_matrix()); }

CPMap qubit_channel() {
  const double g = 0.3;
  CMatrix k0 = CMatrix::Zero(2, 2), k1 = CMatrix::Zero(2, 2);
  k0(0, 0) = 1.0;
  k0(1, 1) = std::sqrt(1 - g);
  k1(1, 0) = std::sqrt(g);
  return CPMap(BlockAlgebra({2}), BlockAlgebra({2}), {k0, k1});
}

void check_round_trip(const json& doc, const std::function<json(const json&)>& reparse) {
  const std::string first = io::write(doc);
  const std::string second = io::write(reparse(io::parse_text(first)));
  CHECK(first == second);
}

}  // namespace

TEST_CASE("canonical writer") {
  json j{{"b", 1.0}, {"a", json::array({1, 2})}, {"c", json::array({json::array({0.1, -0.0})})}};
  CHECK(io::write(j) == "{\n  \"a\": [1, 2],\n  \"b\": 1.0,\n  \"c\": [[0.10000000000000001, -0.0]]\n}\n");
  CHECK(io::write(json(std::nan(""))) == "null\n");
}

TEST_CASE("round trips are byte identical") {
  const CPMap t = qubit_channel();
  check_round_trip(io::to_json(t, true), [](const json& j) { return io::to_json(io::parse_cpmap(j, "", true), true); });

  const CPMap nc(BlockAlgebra({1, 2}), BlockAlgebra({2}), {CMatrix::Identity(3, 2) * 0.5});
  check_round_trip(io::to_json(nc, true), [](const json& j) { return io::to_json(io::parse_cpmap(j, "", true), true); });

  check_round_trip(io::to_json(flip_example_data()), [](const json& j) { return io::to_json(io::parse_flips(j)); });

  const TruncatedSystem sys = gns_system({scex3_map()}, GridCap::uniform(1, 3), {});
  check_round_trip(io::to_json(sys), [](const json& j) { return io::to_json(io::parse_system(j)); });

  const RowContraction rc = RowContraction::make(bhat_operators(6.0), {});
  check_round_trip(io::to_json(rc), [](const json& j) { return io::to_json(io::parse_row_contraction(j, {})); });

  const DilationTriple tr = dilate_row_contraction(rc, 2, {}).triple();
  check_round_trip(io::to_json(tr), [](const json& j) { return io::to_json(io::parse_triple(j)); });

  for (const char* name : {"bhat", "scex5", "parrot"}) {
    const ExampleReport r = run_example(name, std::nullopt, 0, {});
    check_round_trip(io::to_json(r), [](const json& j) { return io::to_json(io::parse_report(j)); });
  }
}

TEST_CASE("parsed systems keep their structure") {
  const TruncatedSystem sys = gns_system({scex3_map()}, GridCap::uniform(1, 2), {});
  const TruncatedSystem back = io::parse_system(io::parse_text(io::write(io::to_json(sys))));
  CHECK(validate(back, {}).passed());
  for (const auto& [n, e] : sys.members) CHECK(back.member(n).same_shape(e));
  REQUIRE(back.unit);
  CHECK((back.vector({2}).block(0, 0) - sys.vector({2}).block(0, 0)).norm() == 0.0);
}

TEST_CASE("perm subcommands") {
  const Run r = run({"perm-sigma", "--values", "2,1,2,1"});
  CHECK(r.code == 0);
  CHECK(r.doc()["sigma"] == json::array({2, 4, 1, 3}));
  CHECK(r.doc()["inversions"] == 3);

  const Run c = run({"perm-chains", "--values", "2,1,2,1"});
  CHECK(c.code == 0);
  for (const auto& chain : c.doc()["chains"]) CHECK(chain.size() == 3);

  CHECK(run({"perm-sigma", "--values", "2,x"}).code == 2);
  CHECK(run({"perm-sigma", "--values", "0,1"}).code == 2);
  CHECK(run({"perm-chains", "--values", "2,1,2,1,2,1,2,1,2"}).code == 2);
}

TEST_CASE("check-exchange on the flip example") {
  const Run r = run_doc({"check-exchange", "-"}, io::to_json(flip_example_data()));
  CHECK(r.code == 1);
  CHECK(r.doc()["verdict"] == "NO");
  CHECK(r.doc()["triple"] == json::array({1, 2, 3}));
  CHECK(r.doc()["witness_residual"].get<double>() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(r.doc()["conclusion"] == "does not embed into a superproduct system");

  // Exchange failure also stops the product construction, still with a report.
  const Run b = run_doc({"build-product", "-"}, io::to_json(flip_example_data()));
  CHECK(b.code == 1);
  CHECK(b.doc()["schema"] == "dilkit.failure");
}

TEST_CASE("build-product with swap flips") {
  FlipData fd;
  const Correspondence e(BlockAlgebra({1}), BlockAlgebra({1}), IMatrix::Constant(1, 1, 2));
  fd.spaces = {e, e};
  fd.flips.emplace(std::make_pair(1, 2), hilbert_swap(e, e));
  const Run r = run_doc({"build-product", "-", "--cap", "2,1"}, io::to_json(fd));
  CHECK(r.code == 0);
  CHECK(r.doc()["validation"]["passed"] == true);
  CHECK(r.doc()["system"]["members"]["(2,1)"]["mult"] == json::array({json::array({8})}));
}

TEST_CASE("verify-example") {
  const Run r = run({"verify-example", "bhat", "--param-C", "6"});
  CHECK(r.code == 0);
  const json d = r.doc();
  CHECK(d["verdict"] == "PASS");
  bool found = false;
  for (const auto& c : d["claims"])
    if (c["id"] == "norm_T1") {
      found = true;
      CHECK(c["computed"].get<double>() == doctest::Approx((5 + std::sqrt(13.0)) / 12).epsilon(1e-12));
    }
  CHECK(found);

  CHECK(run({"verify-example", "bhat", "--param-C", "4"}).code == 2);
  CHECK(run({"verify-example", "nope"}).code == 2);
  CHECK(run({"verify-example", "scex3", "--param-C", "6"}).code == 2);
  CHECK(run({"verify-example", "scex5", "--param-b", "0.25"}).code == 0);
}

TEST_CASE("CP map subcommands") {
  const CPMap t = qubit_channel();
  const Run g = run_doc({"gns"}, io::to_json(t, true));
  CHECK(g.code == 0);
  CHECK(g.doc()["mult"] == json::array({json::array({2})}));
  CHECK(g.doc()["reproduction_residual"].get<double>() < 1e-12);

  // redundant Kraus family collapses to the Choi rank
  CPMap doubled(t.domain(), t.codomain(), {t.kraus()[0] / std::sqrt(2.0), t.kraus()[0] / std::sqrt(2.0), t.kraus()[1]});
  const Run k = run_doc({"kraus-min"}, io::to_json(doubled, true));
  CHECK(k.code == 0);
  const CPMap km = io::parse_cpmap(k.doc(), "", true);
  CHECK(km.kraus().size() == 2);
  CHECK(maps_approx_equal(km, t, {}));

  const CPMap half(t.domain(), t.codomain(), {t.kraus()[0] * 0.5});
  const Run u = run_doc({"unitalize"}, io::to_json(half, true));
  CHECK(u.code == 0);
  const CPMap tu = io::parse_cpmap(u.doc(), "", true);
  CHECK(tu.domain().block_dims() == std::vector<int>{2, 1});
  CHECK(is_unital(tu, {}));
}

TEST_CASE("strong-commute and two-param-dilation") {
  const CPMap t = scex3_map();
  const Run r = run_doc({"strong-commute"}, pair_doc(t, compose(t, t)));
  CHECK(r.code == 1);
  CHECK(r.doc()["dims"] == json::array({2, 3}));

  const CPMap id = CPMap::identity(t.domain());
  CHECK(run_doc({"strong-commute"}, pair_doc(t, id)).code == 0);

  const Run d = run_doc({"two-param-dilation", "--cap", "2,1"}, pair_doc(t, compose(t, t)));
  CHECK(d.code == 0);
  CHECK(d.doc()["spanned_proper"] == true);
  CHECK(d.doc()["quasi_generic"] == true);
  CHECK(d.doc()["flip_recovery"].get<double>() < 1e-12);
}

TEST_CASE("dilate-row feeds classify-triple and superproduct") {
  const RowContraction rc = RowContraction::make(bhat_operators(6.0), {});
  const Run d = run_doc({"dilate-row", "--levels", "2"}, io::to_json(rc));
  REQUIRE(d.code == 0);
  CHECK(d.doc()["total"] == 2 + 6 + 18);
  CHECK(d.doc()["interior_residual"].get<double>() < 1e-10);

  json triple = d.doc()["triple"];
  triple["schema"] = "dilkit.triple";
  triple["version"] = io::kSchemaVersion;
  const Run c = run_doc({"classify-triple", "--cap", "1"}, triple);
  CHECK(c.code == 0);
  CHECK(c.doc()["triple_check"]["passed"] == true);
  CHECK(c.doc()["is_strong"] == true);

  const Run s = run_doc({"superproduct", "--cap", "1"}, triple);
  CHECK(s.code == 0);
  CHECK(s.doc()["system"]["kind"] == "SUPER");

  // non-commuting generators are rejected by the triple check
  DilationTriple bad;
  bad.ambient = BlockAlgebra({2});
  CMatrix x = CMatrix::Zero(2, 2), z = CMatrix::Identity(2, 2);
  x(0, 1) = x(1, 0) = 1;
  z(1, 1) = -1;
  CMatrix h = (x + z) / std::sqrt(2.0);
  bad.generators = {CPMap(bad.ambient, bad.ambient, {x}), CPMap(bad.ambient, bad.ambient, {h})};
  bad.p = CMatrix::Identity(2, 2);
  CHECK(run_doc({"classify-triple"}, io::to_json(bad)).code == 1);
}

TEST_CASE("input errors carry a pointer") {
  json doc = io::to_json(qubit_channel(), true);
  doc["kraus"][0][1][0] = "x";
  Run r = run_doc({"gns"}, doc);
  CHECK(r.code == 2);
  CHECK(r.error()["pointer"] == "/kraus/0/1/0");
  CHECK(r.out.empty());

  doc = io::to_json(qubit_channel(), true);
  doc["extra"] = 1;
  CHECK(run_doc({"gns"}, doc).error()["pointer"] == "/extra");

  doc = io::to_json(qubit_channel(), true);
  doc.erase("version");
  CHECK(run_doc({"gns"}, doc).error()["pointer"] == "/version");

  doc = io::to_json(qubit_channel(), true);
  doc["schema"] = "dilkit.flips";
  CHECK(run_doc({"gns"}, doc).error()["pointer"] == "/schema");

  doc = io::to_json(qubit_channel(), true);
  doc["algebra"]["blocks"][0] = 3;
  CHECK(run_doc({"gns"}, doc).error()["pointer"] == "/kraus/0");

  json flips = io::to_json(flip_example_data());
  flips["flips"].erase("(2,3)");
  CHECK(run_doc({"check-exchange"}, flips).error()["pointer"] == "/flips/(2,3)");

  json sys = io::to_json(gns_system({scex3_map()}, GridCap::uniform(1, 2), {}));
  sys["members"]["(1)"]["mult"][0][0] = 7;
  CHECK(run_doc({"gns"}, sys).code == 2);
  CHECK_THROWS_AS(io::parse_system(sys), io::InputError);
  try {
    io::parse_system(sys);
  } catch (const io::InputError& e) {
    CHECK(e.pointer() == "/members/(1)/mult");
  }

  Run m = run({"gns"}, "{\"schema\": ");
  CHECK(m.code == 2);
  CHECK(m.error()["pointer"] == "");
  CHECK(run({"gns", "/nonexistent/file.json"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"gns", "--tol-eq", "-1"}).code == 2);
}

TEST_CASE("--out writes a file") {
  const std::string path = "test_cli_out.json";
  const Run r = run({"perm-sigma", "--values", "1,2", "--out", path});
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  CHECK(json::parse(ss.str())["sigma"] == json::array({1, 2}));
  std::remove(path.c_str());
}
