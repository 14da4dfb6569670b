#include "doctest.h"
#include "dilkit/gallery.hpp"

#include <cmath>

using namespace dilkit;

namespace {

void require_pass(const ExampleReport& r) {
  for (const auto& c : r.claims) {
    INFO(r.id << ": " << c.id << " residual " << c.residual);
    CHECK(c.pass);
  }
  CHECK(r.verdict() == Verdict::Pass);
}

double computed(const ExampleReport& r, const std::string& id) { return std::get<double>(r.claim(id).computed); }

}  // namespace

TEST_CASE("Bhat's example") {
  const ExampleReport r = bhat(6.0);
  require_pass(r);
  CHECK(computed(r, "goodness_witness") == doctest::Approx(std::sqrt(3.0) / 12).epsilon(1e-13));
  CHECK(computed(r, "norm_T1") == doctest::Approx((5 + std::sqrt(13.0)) / 12).epsilon(1e-13));

  const ExampleReport edge = bhat(bhat_min_parameter());
  CHECK(computed(edge, "norm_T1") == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(edge.verdict() == Verdict::Pass);
  CHECK_THROWS_AS(bhat(4.0), Error);
}

TEST_CASE("Parrot's example") {
  const ExampleReport r = parrot(0, 200);
  require_pass(r);
  CHECK(computed(r, "commutator_norm") == doctest::Approx(2.0));

  const ExampleReport ctrl = parrot(0, 20, true);
  CHECK(computed(ctrl, "commutator_norm") == 0.0);
  CHECK(ctrl.verdict() == Verdict::Inconclusive);
}

TEST_CASE("a dilation that is not solidly elementary") {
  const ExampleReport r = nonsolex();
  require_pass(r);
  CHECK(computed(r, "solid_gap_above_0.1") == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("flip example and the non-dilatable semigroup") {
  require_pass(shalit_solel_flip());
  const ExampleReport r = nondilatable_semigroup();
  require_pass(r);
  CHECK(std::get<long>(r.claim("module_dim").computed) == 31);
}

TEST_CASE("strong commutation examples") {
  require_pass(scex3());
  require_pass(scex5(0.5));
  require_pass(scex5(0.1));
  CHECK_THROWS_AS(scex5(1.0), Error);
  const ExampleReport r = scex2_property(10, 3);
  require_pass(r);
  CHECK(std::get<long>(r.claim("M3_strongly_commuting").computed) == 10);
}

TEST_CASE("example dispatch") {
  CHECK(example_names().size() == 8);
  CHECK(run_example("scex3", std::nullopt, 0, {}).id == "scex3");
  CHECK(run_example("bhat", 7.0, 0, {}).header.front().second == "7");
  CHECK_THROWS_AS(run_example("nope", std::nullopt, 0, {}), Error);
}
