#pragma once

#include "dilkit/gallery.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>

namespace dilkit::io {

using json = nlohmann::json;

constexpr int kSchemaVersion = 1;

// Malformed or inconsistent input, located by a JSON pointer.
class InputError : public std::runtime_error {
 public:
  InputError(std::string pointer, const std::string& what) : std::runtime_error(what), pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

// Canonical text: sorted keys, two-space indentation, arrays without objects
// on one line, floating point numbers with 17 significant digits.
std::string write(const json& j);
json parse_text(const std::string& text);

json document(const std::string& schema);
// Checks schema and version of a top-level document.
void expect_document(const json& j, const std::string& schema);

json to_json(const CMatrix& m);
json to_json(const IMatrix& m);
json to_json(const BlockAlgebra& a);
json to_json(const Index& n);
json to_json(const CPMap& t, bool top_level);
json to_json(const Correspondence& e);  // {"mult", "factors"}
json to_json(const CorrVector& x);
json to_json(const BilinearMap& m);
json to_json(const FlipData& fd);
json to_json(const TruncatedSystem& sys);
json to_json(const DilationTriple& t);
json to_json(const RowContraction& rc);
json to_json(const ExampleReport& r);

CMatrix parse_matrix(const json& j, const std::string& ptr, Eigen::Index rows = -1, Eigen::Index cols = -1);
BlockAlgebra parse_algebra(const json& j, const std::string& ptr);
CPMap parse_cpmap(const json& j, const std::string& ptr, bool top_level);
FlipData parse_flips(const json& j);
TruncatedSystem parse_system(const json& j);
DilationTriple parse_triple(const json& j);
RowContraction parse_row_contraction(const json& j, const Tolerance& tol);
ExampleReport parse_report(const json& j);
GridCap parse_cap_string(const std::string& s, int d);

}  // namespace dilkit::io
