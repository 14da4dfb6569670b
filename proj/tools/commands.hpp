#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dilkit::cli {

enum ExitCode { kOk = 0, kVerifiedFail = 1, kInputError = 2 };

// Runs one subcommand. `args` excludes the program name. Documents go to
// `out` (or the --out file), input errors to `err` as JSON.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace dilkit::cli
