#pragma once

#include "dilkit/dilate.hpp"

#include <string>
#include <variant>
#include <vector>

namespace dilkit {

using ClaimValue = std::variant<bool, long, double, std::string, std::vector<double>>;

struct Claim {
  std::string id;
  ClaimValue expected;
  ClaimValue computed;
  double residual = 0.0;
  bool pass = false;
};

enum class Verdict { Pass, Fail, Inconclusive };
const char* verdict_name(Verdict v);

struct ExampleReport {
  std::string id;
  std::vector<std::pair<std::string, std::string>> header;  // parameters, seed, trial counts
  std::vector<Claim> claims;
  std::string conclusion;
  bool inconclusive = false;

  // Fail if any claim fails, otherwise Inconclusive when flagged.
  Verdict verdict() const;
  const Claim& claim(const std::string& id) const;

  void add(std::string id, ClaimValue expected, ClaimValue computed, double residual, bool pass);
  // |computed - expected| <= bound
  void add_close(std::string id, double expected, double computed, double bound);
  // residual <= bound, expected value 0
  void add_residual(std::string id, double residual, double bound);
  void add_equal(std::string id, long expected, long computed);
  void add_flag(std::string id, bool expected, bool computed);
};

// Smallest C for which Bhat's map is contractive, (5 + sqrt 13) / 2.
double bhat_min_parameter();
std::vector<CMatrix> bhat_operators(double C);

ExampleReport bhat(double C, const Tolerance& tol = {});
// v_2 = X and v_3 = Z, or v_3 = v_2 for the commuting control case.
ExampleReport parrot(unsigned seed = 0, int trials = 200, bool commuting = false);
ExampleReport nonsolex(const Tolerance& tol = {});
ExampleReport shalit_solel_flip(const Tolerance& tol = {});
ExampleReport nondilatable_semigroup(const Tolerance& tol = {});
ExampleReport scex3(const Tolerance& tol = {});
ExampleReport scex5(double b = 0.5, const Tolerance& tol = {});
// Random CP maps T on M_2 and M_3 (`trials` each): T and T^2 commute strongly.
ExampleReport scex2_property(int trials = 100, unsigned seed = 0, const Tolerance& tol = {});

// The flip data of the three-generator example: E = C^2, F_{2,3} the swap,
// all other flips the identity.
FlipData flip_example_data();
// Markov matrix of the three-state example.
Eigen::MatrixXd scex3_matrix();

std::vector<std::string> example_names();
// Dispatch by name with default parameters; `param` is C for bhat and b for scex5.
ExampleReport run_example(const std::string& name, std::optional<double> param, unsigned seed, const Tolerance& tol);

}  // namespace dilkit
