// Command-line front end: `surface` (grid sweeps with optional Monte Carlo),
// `fit` (noise-model fit from a counts CSV), `locality` (light-cone report)
// and `hom` (dip and dip-position fits). Exit codes: 0 success, 1 usage or
// parse failure, 2 analysis flagged (non-convergence, locality violation).
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qdc::cli {

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qdc::cli
